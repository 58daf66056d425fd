use std::collections::BTreeMap;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use drivebench_core::driver::write_transcripts;
use drivebench_core::generate::{
    generate, read_dataset, write_dataset, write_poc_dataset, GenSpec,
};
use drivebench_core::poc::generate_poc_dataset;
use drivebench_core::sim::{
    detect_violations, rollout_with_transcripts, write_traces, ViolationEvent,
};
use drivebench_core::world::TICK_S;
use drivebench_core::{Scenario, TaskFamily};

use crate::config::HarnessConfig;
use crate::drivers::DriverSpec;
use crate::eval::{run_eval, Dataset};
use crate::report::{build_table, load_result};

#[derive(Debug, Parser)]
#[command(
    name = "drivebench",
    version,
    about = "Closed-loop benchmark for language-model driving agents"
)]
pub struct Cli {
    /// TOML file with policy, remote and template settings.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a labeled dataset as JSONL.
    Generate(GenerateArgs),
    /// Score a driver on a dataset.
    Eval(EvalArgs),
    /// Tabulate accuracy across saved results.
    Report(ReportArgs),
    /// Run closed-loop rollouts and report violations.
    Rollout(RolloutArgs),
    /// Serve the console session API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Task {
    Sadm,
    Ftr,
    Combined,
    Poc,
}

impl Task {
    fn family(self) -> Option<TaskFamily> {
        match self {
            Task::Sadm => Some(TaskFamily::Sadm),
            Task::Ftr => Some(TaskFamily::Ftr),
            Task::Combined => Some(TaskFamily::Combined),
            Task::Poc => None,
        }
    }

    /// Dataset sizes used by default for each task.
    fn default_count(self) -> usize {
        match self {
            Task::Sadm => 34,
            Task::Ftr => 24,
            Task::Combined => 50,
            Task::Poc => 20,
        }
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub task: Task,
    /// Number of scenarios; defaults to 34/24/50/20 for sadm/ftr/combined/poc.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Chance that a combined scenario carries a misleading instruction.
    #[arg(long, default_value_t = 0.5)]
    pub misleading_prob: f64,
    #[arg(long, default_value_t = 0.05)]
    pub balance_floor: f64,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    /// oracle, remote, replay:PATH or scripted:ANSWER
    #[arg(long, default_value = "oracle")]
    pub driver: DriverSpec,
    /// Ask the driver to explain its choice.
    #[arg(long)]
    pub reasoning: bool,
    /// Where the result JSON goes.
    #[arg(long)]
    pub out: PathBuf,
    /// Transcript JSONL; defaults to the result path with `.transcripts.jsonl`.
    #[arg(long)]
    pub transcripts: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(required = true)]
    pub results: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RolloutArgs {
    /// Dataset to roll out; every scenario unless --id picks one.
    #[arg(long, conflicts_with = "task")]
    pub scenario: Option<PathBuf>,
    #[arg(long, requires = "scenario")]
    pub id: Option<String>,
    /// Generate the scenarios instead, from this family and --seed.
    #[arg(long, value_enum)]
    pub task: Option<Task>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub n: usize,
    #[arg(long, default_value = "oracle")]
    pub driver: DriverSpec,
    #[arg(long, default_value_t = 60)]
    pub steps: usize,
    #[arg(long)]
    pub reasoning: bool,
    /// Trace JSONL output.
    #[arg(long)]
    pub out: PathBuf,
    /// Also save every driver exchange here.
    #[arg(long)]
    pub transcripts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let config = HarnessConfig::load_or_default(cli.config.as_deref())?;
    match cli.command {
        Command::Generate(args) => cmd_generate(&args, &config, out),
        Command::Eval(args) => cmd_eval(&args, &config, out),
        Command::Report(args) => cmd_report(&args, out),
        Command::Rollout(args) => cmd_rollout(&args, &config, out),
        Command::Serve(args) => {
            let addr = SocketAddr::new(args.host, args.port);
            let rt = tokio::runtime::Runtime::new().context("starting async runtime")?;
            rt.block_on(crate::server::serve(addr, config))
                .with_context(|| format!("serving on {addr}"))
        }
    }
}

fn cmd_generate(args: &GenerateArgs, config: &HarnessConfig, out: &mut dyn Write) -> Result<()> {
    let n = args.n.unwrap_or(args.task.default_count());
    let path = &args.out;
    let labels: Vec<String> = match args.task.family() {
        Some(family) => {
            let spec = GenSpec {
                misleading_instruction_prob: args.misleading_prob,
                label_balance_floor: args.balance_floor,
                ..GenSpec::new(family, n, args.seed)
            };
            let set = generate(&spec, &config.policy)?;
            write_dataset(&set, path)?;
            set.iter().map(|s| s.ground_truth.to_string()).collect()
        }
        None => {
            let set = generate_poc_dataset(n, args.seed);
            write_poc_dataset(&set, path)?;
            set.iter()
                .map(|s| {
                    serde_json::to_value(s.ground_truth).expect("commands serialize")["action"]
                        .to_string()
                })
                .map(|a| a.trim_matches('"').to_string())
                .collect()
        }
    };
    writeln!(out, "wrote {n} scenarios to {}", path.display())?;
    let mut histogram: BTreeMap<String, usize> = BTreeMap::new();
    for l in labels {
        *histogram.entry(l).or_default() += 1;
    }
    for (label, count) in histogram {
        writeln!(out, "  {label:<24} {count}")?;
    }
    Ok(())
}

fn default_transcripts(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    out.with_file_name(format!("{stem}.transcripts.jsonl"))
}

fn cmd_eval(args: &EvalArgs, config: &HarnessConfig, out: &mut dyn Write) -> Result<()> {
    let dataset = Dataset::load(&args.dataset)?;
    let driver = args.driver.build(config)?;
    let cfg = config.prompt(args.reasoning);
    let concurrency = match args.driver {
        DriverSpec::Remote => config.remote.concurrency,
        _ => config.eval.concurrency,
    };
    let shown = args.dataset.display().to_string();
    let (result, transcripts) = run_eval(&dataset, &shown, &*driver, &cfg, concurrency)?;
    let json = serde_json::to_string_pretty(&result)? + "\n";
    std::fs::write(&args.out, json).with_context(|| format!("writing {}", args.out.display()))?;
    let tpath = args
        .transcripts
        .clone()
        .unwrap_or_else(|| default_transcripts(&args.out));
    write_transcripts(&tpath, &transcripts)
        .with_context(|| format!("writing {}", tpath.display()))?;
    writeln!(
        out,
        "{} on {} ({}): {}/{} correct, accuracy {:.4}",
        result.driver_name,
        shown,
        result.task_family,
        result.correct,
        result.total,
        result.accuracy
    )?;
    Ok(())
}

fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> Result<()> {
    let results = args
        .results
        .iter()
        .map(|p| Ok((p.display().to_string(), load_result(p)?)))
        .collect::<Result<Vec<_>>>()?;
    let table = build_table(&results)?;
    match args.format {
        Format::Text => write!(out, "{}", table.to_text())?,
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&table)?)?,
    }
    Ok(())
}

fn rollout_scenarios(args: &RolloutArgs, config: &HarnessConfig) -> Result<Vec<Scenario>> {
    if let Some(path) = &args.scenario {
        let set = read_dataset(path)?;
        return match &args.id {
            Some(id) => match set.into_iter().find(|s| &s.id == id) {
                Some(s) => Ok(vec![s]),
                None => bail!("{} has no scenario {id:?}", path.display()),
            },
            None => Ok(set),
        };
    }
    let Some(task) = args.task else {
        bail!("give --scenario PATH or --task FAMILY");
    };
    let Some(family) = task.family() else {
        bail!("rollouts need a highway task, not poc");
    };
    Ok(generate(
        &GenSpec::new(family, args.n, args.seed),
        &config.policy,
    )?)
}

fn cmd_rollout(args: &RolloutArgs, config: &HarnessConfig, out: &mut dyn Write) -> Result<()> {
    if args.steps == 0 {
        bail!("--steps must be at least 1");
    }
    let scenarios = rollout_scenarios(args, config)?;
    let driver = args.driver.build(config)?;
    let cfg = config.prompt(args.reasoning);
    let mut traces = Vec::with_capacity(scenarios.len());
    let mut all_transcripts = Vec::new();
    let mut total_violations = 0;
    for s in &scenarios {
        let (trace, transcripts) = rollout_with_transcripts(s, &*driver, args.steps, TICK_S, &cfg)?;
        let violations: Vec<ViolationEvent> = detect_violations(&trace, &s.rules, &config.policy);
        total_violations += violations.len();
        writeln!(
            out,
            "{}: {} after {} ticks, {} violations",
            s.id,
            serde_json::to_value(trace.terminal)?
                .as_str()
                .unwrap_or("?"),
            trace.ticks.len(),
            violations.len()
        )?;
        for v in &violations {
            writeln!(
                out,
                "  tick {}: {} ({})",
                v.tick,
                serde_json::to_value(v.kind)?.as_str().unwrap_or("?"),
                v.detail
            )?;
        }
        traces.push(trace);
        all_transcripts.extend(transcripts);
    }
    write_traces(&args.out, &traces).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.transcripts {
        write_transcripts(path, &all_transcripts)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    writeln!(
        out,
        "{} rollouts, {total_violations} violations",
        traces.len()
    )?;
    Ok(())
}
