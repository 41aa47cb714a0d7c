use std::collections::BTreeMap;
use std::fmt;

use super::metrics::{read_glob, MetricsRecord};
use crate::algorithms::Algorithm;
use crate::error::{Error, Result};

/// Interquartile mean: the mean over the middle half of the sorted values,
/// with the two boundary values weighted by the fraction of them inside
/// `[n/4, 3n/4]`.
pub fn iqm(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("iqm of no values".into()));
    }
    if values.iter().any(|x| x.is_nan()) {
        return Err(Error::Domain("iqm of NaN".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let (lo, hi) = (n / 4.0, 3.0 * n / 4.0);
    let mut total = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let overlap = (hi.min(i as f64 + 1.0) - lo.max(i as f64)).max(0.0);
        total += overlap * x;
    }
    Ok(total / (hi - lo))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedFinal {
    pub seed: u64,
    pub iteration: usize,
    pub env_steps: usize,
    pub final_return: f64,
    pub final_cost: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSummary {
    pub env: String,
    pub algorithm: Algorithm,
    pub finals: Vec<SeedFinal>,
    pub iqm_return: f64,
    pub iqm_cost: f64,
    pub mean_return: f64,
    pub mean_cost: f64,
    pub threshold: f64,
    /// Mean final cost at or below the threshold.
    pub admissible: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateReport {
    /// Sorted by environment, then algorithm.
    pub summaries: Vec<AlgorithmSummary>,
    /// Admissible algorithm with the highest mean final return, per environment.
    pub best: BTreeMap<String, Option<Algorithm>>,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Summarises final iterates. With `threshold = None` each environment uses
/// the threshold recorded in its files.
pub fn aggregate_records(
    runs: &[Vec<MetricsRecord>],
    threshold: Option<f64>,
) -> Result<AggregateReport> {
    let mut groups: BTreeMap<(String, Algorithm), Vec<&MetricsRecord>> = BTreeMap::new();
    for rows in runs {
        let last = rows
            .iter()
            .max_by_key(|r| r.iteration)
            .ok_or_else(|| Error::Empty("metrics file without rows".into()))?;
        groups
            .entry((last.env.clone(), last.algorithm))
            .or_default()
            .push(last);
    }
    if groups.is_empty() {
        return Err(Error::Empty("no runs to aggregate".into()));
    }
    let mut summaries = Vec::new();
    for ((env, algorithm), mut lasts) in groups {
        lasts.sort_by_key(|r| r.seed);
        if lasts.windows(2).any(|w| w[0].seed == w[1].seed) {
            return Err(Error::Config(format!(
                "duplicate seed for {env}/{algorithm}"
            )));
        }
        let finals: Vec<SeedFinal> = lasts
            .iter()
            .map(|r| SeedFinal {
                seed: r.seed,
                iteration: r.iteration,
                env_steps: r.env_steps,
                final_return: r.exact_return,
                final_cost: r.exact_cost,
            })
            .collect();
        let returns: Vec<f64> = finals.iter().map(|f| f.final_return).collect();
        let costs: Vec<f64> = finals.iter().map(|f| f.final_cost).collect();
        let d = threshold.unwrap_or(lasts[0].threshold);
        let mean_cost = mean(&costs);
        summaries.push(AlgorithmSummary {
            iqm_return: iqm(&returns)?,
            iqm_cost: iqm(&costs)?,
            mean_return: mean(&returns),
            mean_cost,
            threshold: d,
            admissible: mean_cost <= d,
            env,
            algorithm,
            finals,
        });
    }
    let mut best: BTreeMap<String, Option<(Algorithm, f64)>> = BTreeMap::new();
    for s in &summaries {
        let slot = best.entry(s.env.clone()).or_insert(None);
        if s.admissible && slot.is_none_or(|(_, r)| s.mean_return > r) {
            *slot = Some((s.algorithm, s.mean_return));
        }
    }
    Ok(AggregateReport {
        summaries,
        best: best.into_iter().map(|(k, v)| (k, v.map(|(a, _)| a))).collect(),
    })
}

/// Reads every metrics file matching `pattern` and summarises it.
pub fn aggregate(pattern: &str, threshold: Option<f64>) -> Result<AggregateReport> {
    let runs: Vec<Vec<MetricsRecord>> = read_glob(pattern)?.into_iter().map(|(_, r)| r).collect();
    aggregate_records(&runs, threshold)
}

impl fmt::Display for AggregateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<12} {:<8} {:>5} {:>10} {:>10} {:>10} {:>10} {:>9}  admissible",
            "env", "algo", "seeds", "iqm_ret", "iqm_cost", "mean_ret", "mean_cost", "threshold"
        )?;
        for s in &self.summaries {
            let mark = if self.best.get(&s.env) == Some(&Some(s.algorithm)) {
                " *"
            } else {
                ""
            };
            writeln!(
                f,
                "{:<12} {:<8} {:>5} {:>10.4} {:>10.4} {:>10.4} {:>10.4} {:>9.4}  {}{}",
                s.env,
                s.algorithm.name(),
                s.finals.len(),
                s.iqm_return,
                s.iqm_cost,
                s.mean_return,
                s.mean_cost,
                s.threshold,
                if s.admissible { "yes" } else { "no" },
                mark
            )?;
        }
        for (env, best) in &self.best {
            match best {
                Some(a) => writeln!(f, "best admissible on {env}: {a}")?,
                None => writeln!(f, "no admissible algorithm on {env}")?,
            }
        }
        Ok(())
    }
}
