//! Per-iteration metrics and their CSV form.
//!
//! One file holds one `(env, algorithm, seed)` run, one row per iteration.
//! Columns, in order:
//!
//! | column | meaning |
//! |---|---|
//! | `algorithm`, `env`, `seed` | run identity |
//! | `iteration`, `env_steps` | progress; `env_steps` is cumulative |
//! | `sampled_return`, `sampled_cost` | estimates from the iteration's batch |
//! | `exact_return`, `exact_cost` | exact values of the updated policy |
//! | `threshold`, `budget` | `d` and `b = d - Ĉ` |
//! | `kappa` | penalty weight, 0 when unused |
//! | `lambda` | dual variable, empty unless PPO-Lagrangian |
//! | `violation` | whether the updated policy violates any constraint |
//! | `path_distance` | distance to the central path, empty when not computed |
//!
//! Cost, threshold, budget and λ columns describe the first constraint.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::algorithms::{Algorithm, UpdateReport};
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 15] = [
    "algorithm",
    "env",
    "seed",
    "iteration",
    "env_steps",
    "sampled_return",
    "sampled_cost",
    "exact_return",
    "exact_cost",
    "threshold",
    "budget",
    "kappa",
    "lambda",
    "violation",
    "path_distance",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub algorithm: Algorithm,
    pub env: String,
    pub seed: u64,
    pub iteration: usize,
    pub env_steps: usize,
    pub sampled_return: f64,
    pub sampled_cost: f64,
    pub exact_return: f64,
    pub exact_cost: f64,
    pub threshold: f64,
    pub budget: f64,
    pub kappa: f64,
    pub lambda: Option<f64>,
    pub violation: bool,
    pub path_distance: Option<f64>,
}

impl MetricsRecord {
    pub fn from_report(
        algorithm: Algorithm,
        env: &str,
        seed: u64,
        report: &UpdateReport,
        path_distance: Option<f64>,
    ) -> Self {
        let first = |v: &[f64]| v.first().copied().unwrap_or(f64::NAN);
        Self {
            algorithm,
            env: env.to_string(),
            seed,
            iteration: report.iteration,
            env_steps: report.env_steps,
            sampled_return: report.return_estimate,
            sampled_cost: first(&report.cost_estimates),
            exact_return: report.exact_return,
            exact_cost: first(&report.exact_costs),
            threshold: first(&report.thresholds),
            budget: first(&report.budgets),
            kappa: report.kappa,
            lambda: (algorithm == Algorithm::PpoLag).then(|| first(&report.lambdas)),
            violation: report.violates(),
            path_distance,
        }
    }
}

/// File name of a run's metrics.
pub fn csv_name(env: &str, algorithm: Algorithm, seed: u64) -> String {
    format!("{env}__{}__seed{seed}.csv", algorithm.name())
}

pub fn to_csv_string(records: &[MetricsRecord]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    if records.is_empty() {
        writer.write_record(CSV_HEADER)?;
    }
    for r in records {
        writer.serialize(r)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Writes through a temporary file and a rename, so a reader never sees a
/// partial file.
pub fn write_csv(path: &Path, records: &[MetricsRecord]) -> Result<()> {
    let text = to_csv_string(records)?;
    let tmp = temp_path(path);
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) fn temp_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".tmp");
    path.with_file_name(name)
}

pub fn parse_csv(text: &str, origin: &Path) -> Result<Vec<MetricsRecord>> {
    let schema = |message: String| Error::Schema {
        path: origin.to_path_buf(),
        message,
    };
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(schema(format!(
            "expected columns {}, found {}",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        let record: MetricsRecord = row.map_err(|e| schema(format!("row {}: {e}", i + 1)))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    parse_csv(&fs::read_to_string(path)?, path)
}

/// Reads every file matching a glob pattern, in sorted path order.
pub fn read_glob(pattern: &str) -> Result<Vec<(PathBuf, Vec<MetricsRecord>)>> {
    let paths = glob::glob(pattern)
        .map_err(|e| Error::Config(format!("bad glob '{pattern}': {e}")))?;
    let mut files: Vec<PathBuf> = Vec::new();
    for entry in paths {
        files.push(entry.map_err(|e| Error::Io(e.into()))?);
    }
    files.sort();
    if files.is_empty() {
        return Err(Error::Empty(format!("no files match '{pattern}'")));
    }
    files
        .into_iter()
        .map(|p| read_csv(&p).map(|r| (p, r)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(iteration: usize) -> MetricsRecord {
        MetricsRecord {
            algorithm: Algorithm::PpoLag,
            env: "gridworld".into(),
            seed: 3,
            iteration,
            env_steps: 100 * (iteration + 1),
            sampled_return: 0.1 + iteration as f64,
            sampled_cost: 1.0 / 3.0,
            exact_return: 0.25,
            exact_cost: 0.125,
            threshold: 0.15,
            budget: -0.02,
            kappa: 0.0,
            lambda: Some(0.5),
            violation: false,
            path_distance: None,
        }
    }

    #[test]
    fn round_trip() {
        let rows = vec![record(0), record(1)];
        let text = to_csv_string(&rows).unwrap();
        assert!(text.starts_with(&CSV_HEADER.join(",")));
        assert_eq!(parse_csv(&text, Path::new("x.csv")).unwrap(), rows);
    }

    #[test]
    fn schema_mismatch() {
        let err = parse_csv("a,b\n1,2\n", Path::new("bad.csv")).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }));
    }

    #[test]
    fn names() {
        assert_eq!(csv_name("chain", Algorithm::C3po, 4), "chain__c3po__seed4.csv");
    }
}
