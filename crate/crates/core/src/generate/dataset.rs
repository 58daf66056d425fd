//! JSONL persistence for scenario and scene datasets.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::poc::PocScene;
use crate::world::Scenario;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("{path}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: field {field:?}: {message}")]
    Schema {
        line: usize,
        field: String,
        message: String,
    },
}

const SCENARIO_FIELDS: &[&str] = &[
    "id",
    "task_family",
    "ego",
    "vehicles",
    "rules",
    "ground_truth",
    "seed",
];
const POC_FIELDS: &[&str] = &["id", "objects", "officer", "ground_truth", "seed"];

/// One JSON object per line, newline-terminated.
pub fn to_jsonl<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("dataset items serialize"));
        out.push('\n');
    }
    out
}

fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut out = BufWriter::new(File::create(path).map_err(io_err)?);
    out.write_all(to_jsonl(items).as_bytes()).map_err(io_err)?;
    out.flush().map_err(io_err)
}

/// Field named in a serde error message, if any.
fn field_from_message(msg: &str) -> Option<String> {
    let start = msg.find('`')? + 1;
    let end = start + msg[start..].find('`')?;
    Some(msg[start..end].to_string())
}

fn read_jsonl<T, V>(path: &Path, required: &[&str], validate: V) -> Result<Vec<T>, DatasetError>
where
    T: DeserializeOwned,
    V: Fn(&T) -> Result<(), String>,
{
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut items = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        let line_no = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let schema = |field: &str, message: String| DatasetError::Schema {
            line: line_no,
            field: field.to_string(),
            message,
        };
        let value: Value = serde_json::from_str(&line).map_err(|e| schema("", e.to_string()))?;
        let Value::Object(map) = &value else {
            return Err(schema("", "not a JSON object".into()));
        };
        if let Some(missing) = required.iter().find(|f| !map.contains_key(**f)) {
            return Err(schema(missing, "missing required field".into()));
        }
        let item: T = serde_json::from_value(value).map_err(|e| {
            let msg = e.to_string();
            schema(&field_from_message(&msg).unwrap_or_default(), msg)
        })?;
        validate(&item).map_err(|m| schema("", m))?;
        items.push(item);
    }
    Ok(items)
}

pub fn write_dataset(scenarios: &[Scenario], path: &Path) -> Result<(), DatasetError> {
    write_jsonl(scenarios, path)
}

pub fn read_dataset(path: &Path) -> Result<Vec<Scenario>, DatasetError> {
    read_jsonl(path, SCENARIO_FIELDS, |s: &Scenario| {
        s.validate().map_err(|e| e.to_string())
    })
}

pub fn write_poc_dataset(scenes: &[PocScene], path: &Path) -> Result<(), DatasetError> {
    write_jsonl(scenes, path)
}

pub fn read_poc_dataset(path: &Path) -> Result<Vec<PocScene>, DatasetError> {
    read_jsonl(path, POC_FIELDS, |s: &PocScene| {
        s.validate().map_err(|e| e.to_string())
    })
}

/// Which task a dataset file holds, judged by its first record.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Highway,
    Poc,
}

pub fn sniff_dataset(path: &Path) -> Result<DatasetKind, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    for line in reader.lines() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(&line).map_err(|e| DatasetError::Schema {
            line: 1,
            field: String::new(),
            message: e.to_string(),
        })?;
        return Ok(if value.get("objects").is_some() {
            DatasetKind::Poc
        } else {
            DatasetKind::Highway
        });
    }
    Ok(DatasetKind::Highway)
}
