//! Experiment configuration and the seed-parallel runner.
//!
//! A configuration is a TOML document:
//!
//! ```toml
//! [experiment]
//! name = "demo"
//! seeds = [0, 1, 2]
//! algorithms = ["c3po", "ppo_lag"]
//! mode = "sampled"            # or "exact"
//! output_dir = "runs/demo"
//! path_distance = false       # record the distance to the central path
//!
//! [[envs]]
//! name = "gridworld"
//! spec = "gridworld"          # built-in name, "name:key=value,...", a file, or a table
//! train = { learning_rate = 0.01 }
//!
//! [train]                     # shared training settings
//! total_steps = 20000
//!
//! [overrides.ppo_lag]         # per-algorithm settings
//! lagrange_lr = 0.1
//!
//! [central_path]
//! beta = 1.0
//! t_grid = [0.1, 1.0, 10.0]
//! anchor = "initial"          # or "uniform"
//! ```
//!
//! Training settings resolve as `[train]`, then `[overrides.<algorithm>]`,
//! then the environment's `train` table; unknown keys are rejected everywhere.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::env::{make_env, EnvSpec, BUILTIN_ENVS};
use super::metrics::{csv_name, write_csv, MetricsRecord};
use crate::algorithms::{Algorithm, Mode, TrainConfig, Trainer};
use crate::central_path::{distance_to_path, trace_path_with, CentralPathPoint, PathOptions};
use crate::cmdp::{Cmdp, TabularSoftmaxPolicy};
use crate::error::{Error, Result};

/// Environment variable that, when set, prefixes relative output directories.
pub const OUTPUT_ROOT_VAR: &str = "C3PO_OUTPUT_ROOT";
pub const MANIFEST_NAME: &str = "manifest.toml";

fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}

fn default_algorithms() -> Vec<Algorithm> {
    Algorithm::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub mode: Mode,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub path_distance: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnvSource {
    Text(String),
    Spec(EnvSpec),
}

impl EnvSource {
    pub fn resolve(&self) -> Result<EnvSpec> {
        match self {
            EnvSource::Text(text) => EnvSpec::parse(text),
            EnvSource::Spec(spec) => Ok(spec.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvEntry {
    pub name: String,
    pub spec: EnvSource,
    #[serde(default, skip_serializing_if = "toml::Table::is_empty")]
    pub train: toml::Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathAnchor {
    /// The run's initial policy.
    #[default]
    Initial,
    Uniform,
}

fn default_beta() -> f64 {
    1.0
}

/// `10^k` for `k = -2, -1.75, ..., 4`.
pub fn default_t_grid() -> Vec<f64> {
    (0..=24).map(|i| 10f64.powf(-2.0 + 0.25 * i as f64)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathSection {
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub anchor: PathAnchor,
}

impl Default for PathSection {
    fn default() -> Self {
        Self {
            beta: default_beta(),
            t_grid: default_t_grid(),
            anchor: PathAnchor::Initial,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub envs: Vec<EnvEntry>,
    #[serde(default)]
    pub train: toml::Table,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub overrides: BTreeMap<Algorithm, toml::Table>,
    #[serde(default)]
    pub central_path: PathSection,
}

fn overlay(base: &mut toml::Table, top: &toml::Table) {
    for (k, v) in top {
        base.insert(k.clone(), v.clone());
    }
}

fn table_of(config: &TrainConfig) -> toml::Table {
    toml::Table::try_from(config).expect("TrainConfig serialises to a table")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Built-in environments × all algorithms × five seeds, 2·10⁵ steps each.
    pub fn default_experiment() -> Self {
        Self {
            experiment: ExperimentSection {
                name: "default".into(),
                seeds: default_seeds(),
                algorithms: default_algorithms(),
                mode: Mode::Sampled,
                output_dir: "runs/default".into(),
                path_distance: false,
            },
            envs: BUILTIN_ENVS
                .iter()
                .map(|n| EnvEntry {
                    name: n.to_string(),
                    spec: EnvSource::Text(n.to_string()),
                    train: toml::Table::new(),
                })
                .collect(),
            train: toml::Table::new(),
            overrides: BTreeMap::new(),
            central_path: PathSection::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.seeds.is_empty() || e.algorithms.is_empty() || self.envs.is_empty() {
            return Err(Error::Config("seeds, algorithms and envs must be non-empty".into()));
        }
        let mut names: Vec<&str> = self.envs.iter().map(|x| x.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("environment names must be unique".into()));
        }
        for entry in &self.envs {
            if entry.name.is_empty() || entry.name.contains(['/', '\\']) || entry.name.contains("__") {
                return Err(Error::Config(format!("bad environment name '{}'", entry.name)));
            }
            entry.spec.resolve()?;
            for alg in &e.algorithms {
                self.resolve_train(entry, *alg, e.seeds[0])?;
            }
        }
        let cp = &self.central_path;
        if !(cp.beta > 0.0) || cp.t_grid.is_empty() || cp.t_grid.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "central_path needs beta > 0 and a strictly increasing t_grid".into(),
            ));
        }
        Ok(())
    }

    /// Training settings of one run.
    pub fn resolve_train(&self, env: &EnvEntry, algorithm: Algorithm, seed: u64) -> Result<TrainConfig> {
        let mut table = self.train.clone();
        if let Some(o) = self.overrides.get(&algorithm) {
            overlay(&mut table, o);
        }
        overlay(&mut table, &env.train);
        for reserved in ["algorithm", "seed"] {
            if table.contains_key(reserved) {
                return Err(Error::Config(format!(
                    "'{reserved}' is set by the experiment, not in training tables"
                )));
            }
        }
        table.insert("algorithm".into(), toml::Value::String(algorithm.name().into()));
        table.insert("seed".into(), toml::Value::Integer(seed as i64));
        let config: TrainConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("env '{}': {e}", env.name)))?;
        config.validate()?;
        Ok(config)
    }

    /// The configuration with `[train]` expanded to every key, which runs
    /// identically.
    pub fn manifest(&self) -> Self {
        let mut full = table_of(&TrainConfig::default());
        overlay(&mut full, &self.train);
        full.remove("algorithm");
        full.remove("seed");
        Self {
            train: full,
            ..self.clone()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serialises")
    }
}

/// Options applied on top of a configuration file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seeds: Option<Vec<u64>>,
    /// Prefix for a relative `output_dir`; falls back to [`OUTPUT_ROOT_VAR`].
    pub output_root: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub written: Vec<PathBuf>,
    /// Runs whose files already existed.
    pub skipped: Vec<PathBuf>,
    /// Wall-clock time per written file; kept out of the CSVs so they stay
    /// reproducible.
    pub elapsed: Vec<(PathBuf, Duration)>,
}

fn output_dir(config: &ExperimentConfig, options: &RunOptions) -> PathBuf {
    let dir = &config.experiment.output_dir;
    if dir.is_absolute() {
        return dir.clone();
    }
    let root = options
        .output_root
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from));
    match root {
        Some(r) => r.join(dir),
        None => dir.clone(),
    }
}

/// Central-path setup shared by the runs of one environment.
struct PathSetup<'a> {
    section: &'a PathSection,
    uniform: Option<Vec<CentralPathPoint>>,
}

impl PathSetup<'_> {
    fn path_for(&self, cmdp: &Cmdp, initial: &TabularSoftmaxPolicy) -> Result<Vec<CentralPathPoint>> {
        match (&self.uniform, self.section.anchor) {
            (Some(p), PathAnchor::Uniform) => Ok(p.clone()),
            _ => {
                let opts = PathOptions {
                    beta: self.section.beta,
                    anchor: Some(initial.clone()),
                    ..PathOptions::default()
                };
                trace_path_with(cmdp, &self.section.t_grid, &opts)
            }
        }
    }
}

/// Trains one run and returns its metrics rows.
pub fn run_single(
    cmdp: &Cmdp,
    env_name: &str,
    config: TrainConfig,
    mode: Mode,
    path: Option<&PathSection>,
) -> Result<Vec<MetricsRecord>> {
    let algorithm = config.algorithm;
    let seed = config.seed;
    let mut trainer = Trainer::new(cmdp, config, mode)?;
    let central = match path {
        Some(section) => {
            let setup = PathSetup {
                section,
                uniform: (section.anchor == PathAnchor::Uniform)
                    .then(|| {
                        let opts = PathOptions {
                            beta: section.beta,
                            anchor: Some(TabularSoftmaxPolicy::uniform(
                                cmdp.n_states(),
                                cmdp.n_actions(),
                            )),
                            ..PathOptions::default()
                        };
                        trace_path_with(cmdp, &section.t_grid, &opts)
                    })
                    .transpose()?,
            };
            Some(setup.path_for(cmdp, trainer.policy())?)
        }
        None => None,
    };
    let mut rows = Vec::new();
    while !trainer.is_done() {
        let report = trainer.step()?;
        let distance = match &central {
            Some(p) => Some(distance_to_path(trainer.policy(), p)?),
            None => None,
        };
        rows.push(MetricsRecord::from_report(algorithm, env_name, seed, &report, distance));
    }
    Ok(rows)
}

/// Runs every `(env, algorithm, seed)` of a configuration file.
pub fn run(config_path: &Path, options: &RunOptions) -> Result<RunSummary> {
    run_config(&ExperimentConfig::load(config_path)?, options)
}

pub fn run_config(config: &ExperimentConfig, options: &RunOptions) -> Result<RunSummary> {
    let mut config = config.clone();
    if let Some(seeds) = &options.seeds {
        config.experiment.seeds = seeds.clone();
    }
    config.validate()?;
    let dir = output_dir(&config, options);
    fs::create_dir_all(&dir)?;
    let manifest = config.manifest().to_toml();
    let manifest_path = dir.join(MANIFEST_NAME);
    if let Ok(existing) = fs::read_to_string(&manifest_path) {
        let previous = ExperimentConfig::parse(&existing)?;
        let mut current = config.manifest();
        current.experiment.seeds = previous.experiment.seeds.clone();
        if previous != current {
            return Err(Error::Config(format!(
                "{} holds a different experiment; use a fresh output_dir",
                manifest_path.display()
            )));
        }
    }
    fs::write(&manifest_path, &manifest)?;

    let envs: Vec<(String, Cmdp)> = config
        .envs
        .iter()
        .map(|e| Ok((e.name.clone(), make_env(&e.spec.resolve()?)?)))
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for (i, entry) in config.envs.iter().enumerate() {
        for &alg in &config.experiment.algorithms {
            for &seed in &config.experiment.seeds {
                let train = config.resolve_train(entry, alg, seed)?;
                jobs.push((i, train, dir.join(csv_name(&entry.name, alg, seed))));
            }
        }
    }
    let mode = config.experiment.mode;
    let path = config.experiment.path_distance.then_some(&config.central_path);
    let outcomes: Vec<Result<Option<(PathBuf, Duration)>>> = jobs
        .into_par_iter()
        .map(|(i, train, file)| {
            if file.exists() {
                log::info!("skipping {}", file.display());
                return Ok(None);
            }
            let start = Instant::now();
            let (name, cmdp) = &envs[i];
            let rows = run_single(cmdp, name, train, mode, path)?;
            write_csv(&file, &rows)?;
            log::info!("wrote {}", file.display());
            Ok(Some((file, start.elapsed())))
        })
        .collect();
    let mut summary = RunSummary {
        output_dir: dir.clone(),
        written: Vec::new(),
        skipped: Vec::new(),
        elapsed: Vec::new(),
    };
    let mut expected: Vec<PathBuf> = Vec::new();
    for entry in &config.envs {
        for &alg in &config.experiment.algorithms {
            for &seed in &config.experiment.seeds {
                expected.push(dir.join(csv_name(&entry.name, alg, seed)));
            }
        }
    }
    for (file, outcome) in expected.into_iter().zip(outcomes) {
        match outcome? {
            Some((f, t)) => {
                summary.written.push(f.clone());
                summary.elapsed.push((f, t));
            }
            None => summary.skipped.push(file),
        }
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
[experiment]
name = "t"
seeds = [1]
algorithms = ["c3po", "ppo_lag"]
output_dir = "out"

[[envs]]
name = "chain"
spec = "chain:length=4"
train = { learning_rate = 0.01 }

[train]
total_steps = 400
steps_per_iter = 200

[overrides.ppo_lag]
lagrange_lr = 0.2
"#;

    #[test]
    fn resolution_order() {
        let c = ExperimentConfig::parse(TEXT).unwrap();
        let lag = c.resolve_train(&c.envs[0], Algorithm::PpoLag, 7).unwrap();
        assert_eq!(lag.lagrange_lr, 0.2);
        assert_eq!(lag.learning_rate, 0.01);
        assert_eq!(lag.seed, 7);
        let c3 = c.resolve_train(&c.envs[0], Algorithm::C3po, 7).unwrap();
        assert_eq!(c3.lagrange_lr, TrainConfig::default().lagrange_lr);
        assert_eq!(c3.total_steps, 400);
    }

    #[test]
    fn strict_keys() {
        let bad = TEXT.replace("total_steps = 400", "total_stepz = 400");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(Error::Config(_))));
        let bad = TEXT.replace("name = \"t\"", "name = \"t\"\ncolour = 1");
        assert!(ExperimentConfig::parse(&bad).is_err());
        let bad = TEXT.replace("total_steps = 400", "total_steps = 400\nseed = 3");
        assert!(ExperimentConfig::parse(&bad).is_err());
    }

    #[test]
    fn manifest_is_total_and_reloads() {
        let c = ExperimentConfig::parse(TEXT).unwrap();
        let text = c.manifest().to_toml();
        assert!(text.contains("kappa_end = 30.0"));
        assert!(text.contains("w = 0.05"));
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, c.manifest());
        for alg in [Algorithm::C3po, Algorithm::PpoLag] {
            assert_eq!(
                back.resolve_train(&back.envs[0], alg, 1).unwrap(),
                c.resolve_train(&c.envs[0], alg, 1).unwrap()
            );
        }
    }

    #[test]
    fn default_experiment_is_valid() {
        let c = ExperimentConfig::default_experiment();
        c.validate().unwrap();
        assert_eq!(c.envs.len() * c.experiment.algorithms.len() * c.experiment.seeds.len(), 80);
    }
}
