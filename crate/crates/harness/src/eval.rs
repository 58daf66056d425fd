//! Dataset evaluation: one driver call per scenario, scored by exact match.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use drivebench_core::driver::{
    run_driver, Driver, DriverError, DriverFailure, DriverRequest, DriverTranscript, Parsed,
};
use drivebench_core::generate::{
    read_dataset, read_poc_dataset, sniff_dataset, DatasetError, DatasetKind,
};
use drivebench_core::poc::PocScene;
use drivebench_core::prompt::PromptConfig;
use drivebench_core::Scenario;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Highway(Vec<Scenario>),
    Poc(Vec<PocScene>),
}

impl Dataset {
    pub fn load(path: &Path) -> Result<Dataset, DatasetError> {
        Ok(match sniff_dataset(path)? {
            DatasetKind::Highway => Dataset::Highway(read_dataset(path)?),
            DatasetKind::Poc => Dataset::Poc(read_poc_dataset(path)?),
        })
    }

    pub fn len(&self) -> usize {
        match self {
            Dataset::Highway(s) => s.len(),
            Dataset::Poc(s) => s.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `sadm`, `ftr`, `combined`, `poc`, or `mixed` for a blend of families.
    pub fn family_label(&self) -> String {
        match self {
            Dataset::Poc(_) => "poc".into(),
            Dataset::Highway(s) => {
                let first = s.first().map(|x| x.task_family);
                if s.iter().all(|x| Some(x.task_family) == first) {
                    first.map_or("empty", |f| f.as_str()).into()
                } else {
                    "mixed".into()
                }
            }
        }
    }

    fn request(&self, i: usize, cfg: &PromptConfig) -> DriverRequest {
        match self {
            Dataset::Highway(s) => DriverRequest::highway(s[i].clone(), cfg.clone(), "eval"),
            Dataset::Poc(s) => DriverRequest::poc(s[i].clone(), cfg.clone(), "eval"),
        }
    }

    fn is_correct(&self, i: usize, parsed: &Parsed) -> bool {
        match self {
            Dataset::Highway(s) => parsed
                .decision()
                .is_some_and(|d| d.action == s[i].ground_truth),
            Dataset::Poc(s) => parsed.command() == Some(s[i].ground_truth),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub scenario_id: String,
    pub predicted: Parsed,
    pub correct: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<DriverFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub started: String,
    pub finished: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub dataset_path: String,
    pub task_family: String,
    pub driver_name: String,
    pub model_name: Option<String>,
    pub reasoning_requested: bool,
    pub template_version: String,
    pub per_scenario: Vec<ScenarioOutcome>,
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
    pub timing: Timing,
}

impl EvalResult {
    /// The result with timestamps blanked, for reproducibility checks.
    pub fn without_timing(&self) -> EvalResult {
        EvalResult {
            timing: Timing {
                started: String::new(),
                finished: String::new(),
            },
            ..self.clone()
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("dataset {0} is empty")]
    EmptyDataset(String),
    #[error(transparent)]
    Driver(#[from] DriverError),
}

/// Every scenario through `driver`, `concurrency` at a time, in dataset order.
///
/// Per-scenario failures (timeouts, rate limits, unparseable answers) score
/// as incorrect; configuration errors abort the run.
pub fn run_eval(
    dataset: &Dataset,
    dataset_path: &str,
    driver: &dyn Driver,
    cfg: &PromptConfig,
    concurrency: usize,
) -> Result<(EvalResult, Vec<DriverTranscript>), EvalError> {
    if dataset.is_empty() {
        return Err(EvalError::EmptyDataset(dataset_path.to_string()));
    }
    let started = now();
    let n = dataset.len();
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<DriverTranscript, DriverError>>>> =
        Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..concurrency.clamp(1, n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let out = run_driver(driver, dataset.request(i, cfg));
                let failed = out.is_err();
                slots.lock().expect("slots")[i] = Some(out);
                if failed {
                    // stop handing out work; earlier indices still finish
                    next.store(n, Ordering::SeqCst);
                }
            });
        }
    });

    let mut transcripts = Vec::with_capacity(n);
    let mut per_scenario = Vec::with_capacity(n);
    for (i, slot) in slots.into_inner().expect("slots").into_iter().enumerate() {
        let t = match slot {
            Some(r) => r?,
            None => continue,
        };
        per_scenario.push(ScenarioOutcome {
            scenario_id: t.request.subject_id().to_string(),
            correct: dataset.is_correct(i, &t.parsed),
            predicted: t.parsed.clone(),
            failure: t.failure.clone(),
        });
        transcripts.push(t);
    }
    let correct = per_scenario.iter().filter(|o| o.correct).count();
    let result = EvalResult {
        dataset_path: dataset_path.to_string(),
        task_family: dataset.family_label(),
        driver_name: driver.name().to_string(),
        model_name: driver.model_name().map(str::to_string),
        reasoning_requested: cfg.reasoning_requested,
        template_version: cfg.template_version.clone(),
        correct,
        total: n,
        accuracy: correct as f64 / n as f64,
        per_scenario,
        timing: Timing {
            started,
            finished: now(),
        },
    };
    Ok((result, transcripts))
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}
