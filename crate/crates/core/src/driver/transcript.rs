use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::DriverTranscript;
use crate::poc::PocCommand;
use crate::prompt::ParseError;
use crate::world::Decision;

/// A successfully parsed answer for either task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Decision(Decision),
    Command(PocCommand),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Parsed {
    Decision { decision: Decision },
    Command { command: PocCommand },
    Error { error: ParseError },
}

impl Parsed {
    pub fn prediction(&self) -> Result<Prediction, &ParseError> {
        match self {
            Parsed::Decision { decision } => Ok(Prediction::Decision(decision.clone())),
            Parsed::Command { command } => Ok(Prediction::Command(*command)),
            Parsed::Error { error } => Err(error),
        }
    }

    pub fn decision(&self) -> Option<&Decision> {
        match self {
            Parsed::Decision { decision } => Some(decision),
            _ => None,
        }
    }

    pub fn command(&self) -> Option<PocCommand> {
        match self {
            Parsed::Command { command } => Some(*command),
            _ => None,
        }
    }

    pub fn error(&self) -> Option<&ParseError> {
        match self {
            Parsed::Error { error } => Some(error),
            _ => None,
        }
    }
}

impl From<Result<Decision, ParseError>> for Parsed {
    fn from(r: Result<Decision, ParseError>) -> Self {
        match r {
            Ok(decision) => Parsed::Decision { decision },
            Err(error) => Parsed::Error { error },
        }
    }
}

impl From<Result<PocCommand, ParseError>> for Parsed {
    fn from(r: Result<PocCommand, ParseError>) -> Self {
        match r {
            Ok(command) => Parsed::Command { command },
            Err(error) => Parsed::Error { error },
        }
    }
}

/// Append-only JSONL sink shared by concurrent evaluators.
pub struct TranscriptWriter {
    out: Mutex<BufWriter<File>>,
}

impl TranscriptWriter {
    pub fn append(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(TranscriptWriter {
            out: Mutex::new(BufWriter::new(file)),
        })
    }

    pub fn write(&self, transcript: &DriverTranscript) -> io::Result<()> {
        let line = serde_json::to_string(transcript)?;
        let mut out = self.out.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(out, "{line}")?;
        out.flush()
    }
}

/// Writes transcripts to a fresh file, one JSON object per line.
pub fn write_transcripts(path: &Path, transcripts: &[DriverTranscript]) -> io::Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for t in transcripts {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_transcripts(path: &Path) -> io::Result<Vec<DriverTranscript>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(io::ErrorKind::InvalidData, format!("line {}: {e}", n + 1))
        })?;
        out.push(t);
    }
    Ok(out)
}
