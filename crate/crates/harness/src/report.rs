//! Accuracy tables over saved evaluation results.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::Serialize;

use crate::eval::EvalResult;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("reading {path}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: not an evaluation result: {message}")]
    Schema { path: String, message: String },
    #[error("duplicate result for driver {driver:?}, family {family:?}, reasoning {reasoning}: {first} and {second}")]
    Duplicate {
        driver: String,
        family: String,
        reasoning: bool,
        first: String,
        second: String,
    },
    #[error("no results given")]
    Empty,
}

pub fn load_result(path: &Path) -> Result<EvalResult, ReportError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: shown.clone(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| ReportError::Schema {
        path: shown,
        message: e.to_string(),
    })
}

/// A table column: a task family, optionally split by reasoning.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Column {
    pub family: String,
    /// `None` when the table has only one reasoning setting for this family.
    pub reasoning: Option<bool>,
}

impl Column {
    pub fn header(&self) -> String {
        match self.reasoning {
            None => self.family.clone(),
            Some(true) => format!("{} (reason)", self.family),
            Some(false) => format!("{} (no reason)", self.family),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub driver: String,
    /// Accuracy per column, aligned with [`AccuracyTable::columns`].
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyTable {
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

const FAMILY_ORDER: &[&str] = &["sadm", "ftr", "combined", "poc"];

fn family_rank(f: &str) -> (usize, String) {
    let rank = FAMILY_ORDER
        .iter()
        .position(|x| *x == f)
        .unwrap_or(FAMILY_ORDER.len());
    (rank, f.to_string())
}

/// Builds the driver × family table; `sources` names each result for errors.
pub fn build_table(results: &[(String, EvalResult)]) -> Result<AccuracyTable, ReportError> {
    if results.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut cells: BTreeMap<(String, String, bool), (f64, &str)> = BTreeMap::new();
    for (source, r) in results {
        let key = (
            r.driver_name.clone(),
            r.task_family.clone(),
            r.reasoning_requested,
        );
        if let Some((_, first)) = cells.get(&key) {
            return Err(ReportError::Duplicate {
                driver: key.0,
                family: key.1,
                reasoning: key.2,
                first: first.to_string(),
                second: source.clone(),
            });
        }
        cells.insert(key, (r.accuracy, source.as_str()));
    }

    let mut settings: BTreeMap<String, BTreeSet<bool>> = BTreeMap::new();
    for (_, family, reasoning) in cells.keys() {
        settings
            .entry(family.clone())
            .or_default()
            .insert(*reasoning);
    }
    let mut families: Vec<&String> = settings.keys().collect();
    families.sort_by_key(|f| family_rank(f));
    let columns: Vec<Column> = families
        .into_iter()
        .flat_map(|family| {
            let both = settings[family].len() > 1;
            settings[family].iter().rev().map(move |&r| Column {
                family: family.clone(),
                reasoning: both.then_some(r),
            })
        })
        .collect();

    let drivers: BTreeSet<&String> = cells.keys().map(|(d, _, _)| d).collect();
    let rows = drivers
        .into_iter()
        .map(|driver| Row {
            driver: driver.clone(),
            cells: columns
                .iter()
                .map(|c| {
                    let lookup = |r: bool| {
                        cells
                            .get(&(driver.clone(), c.family.clone(), r))
                            .map(|x| x.0)
                    };
                    match c.reasoning {
                        Some(r) => lookup(r),
                        None => lookup(true).or_else(|| lookup(false)),
                    }
                })
                .collect(),
        })
        .collect();
    Ok(AccuracyTable { columns, rows })
}

impl AccuracyTable {
    pub fn to_text(&self) -> String {
        let mut header = vec!["driver".to_string()];
        header.extend(self.columns.iter().map(Column::header));
        let body: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                let mut line = vec![r.driver.clone()];
                line.extend(
                    r.cells
                        .iter()
                        .map(|c| c.map_or("-".into(), |a| format!("{a:.3}"))),
                );
                line
            })
            .collect();
        let widths: Vec<usize> = (0..header.len())
            .map(|i| {
                body.iter()
                    .map(|l| l[i].len())
                    .chain(std::iter::once(header[i].len()))
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let fmt_line = |cells: &[String]| {
            cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
        };
        let mut out = fmt_line(&header);
        out.push('\n');
        out.push_str(
            &widths
                .iter()
                .map(|w| "-".repeat(*w))
                .collect::<Vec<_>>()
                .join("  "),
        );
        out.push('\n');
        for line in &body {
            out.push_str(&fmt_line(line));
            out.push('\n');
        }
        out
    }
}
