use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cmdp::Cmdp;
use crate::error::{Error, Result};
use crate::estimation::BudgetMode;

/// Cost threshold used by episodic benchmark configurations when none is given.
pub const BENCHMARK_THRESHOLD: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    C3po,
    P3o,
    PpoLag,
    Ppo,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::C3po, Algorithm::P3o, Algorithm::PpoLag, Algorithm::Ppo];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::C3po => "c3po",
            Algorithm::P3o => "p3o",
            Algorithm::PpoLag => "ppo_lag",
            Algorithm::Ppo => "ppo",
        }
    }

    /// Whether the loss carries the `κ`-weighted hinge.
    pub fn uses_kappa(self) -> bool {
        matches!(self, Algorithm::C3po | Algorithm::P3o)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown algorithm '{s}'")))
    }
}

/// Training hyperparameters. Every field has a default, so configuration
/// files only list what they change; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub kappa_start: f64,
    pub kappa_end: f64,
    pub w: f64,
    pub clip_eps: f64,
    pub learning_rate: f64,
    pub epochs_per_iter: usize,
    pub minibatch_size: usize,
    pub steps_per_iter: usize,
    pub total_steps: usize,
    /// Discount of the advantage estimator; the CMDP discount when unset.
    pub gamma: Option<f64>,
    pub gae_lambda: f64,
    /// Per-constraint thresholds; when unset, the CMDP thresholds in
    /// discounted mode and [`BENCHMARK_THRESHOLD`] in episodic mode.
    pub thresholds: Option<Vec<f64>>,
    pub budget_mode: BudgetMode,
    pub lagrange_lr: f64,
    pub lagrange_init: f64,
    /// Episode length; the smallest `T` with `γ^T < 1e-3` when unset.
    pub horizon: Option<usize>,
    pub normalize_reward_advantages: bool,
    /// Refits the value tables on the fresh batch before computing advantages.
    pub refit_before_advantages: bool,
    /// Half-width of the uniform noise added to the initial (zero) logits.
    pub init_noise: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::C3po,
            kappa_start: 1.0,
            kappa_end: 30.0,
            w: 0.05,
            clip_eps: 0.2,
            learning_rate: 3e-4,
            epochs_per_iter: 10,
            minibatch_size: 64,
            steps_per_iter: 2000,
            total_steps: 200_000,
            gamma: None,
            gae_lambda: 0.95,
            thresholds: None,
            budget_mode: BudgetMode::Discounted,
            lagrange_lr: 0.05,
            lagrange_init: 0.0,
            horizon: None,
            normalize_reward_advantages: true,
            refit_before_advantages: false,
            init_noise: 0.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn for_algorithm(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            ..Self::default()
        }
    }

    pub fn iterations(&self) -> usize {
        self.total_steps / self.steps_per_iter.max(1)
    }

    /// Linear schedule with `κ_0 = kappa_start` and `κ_{K-1} = kappa_end`.
    pub fn kappa_at(&self, iteration: usize) -> f64 {
        let k = self.iterations();
        if k <= 1 {
            return self.kappa_start;
        }
        let frac = iteration.min(k - 1) as f64 / (k - 1) as f64;
        self.kappa_start + (self.kappa_end - self.kappa_start) * frac
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        if !nonneg(self.kappa_start) || !nonneg(self.kappa_end) {
            return fail("kappa_start and kappa_end must be finite and >= 0".into());
        }
        if !(self.w > 0.0 && self.w <= 1.0) {
            return fail(format!("w must lie in (0, 1], got {}", self.w));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return fail(format!("clip_eps must lie in (0, 1), got {}", self.clip_eps));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if self.epochs_per_iter == 0 || self.minibatch_size == 0 || self.steps_per_iter == 0 {
            return fail("epochs_per_iter, minibatch_size and steps_per_iter must be >= 1".into());
        }
        if self.total_steps == 0 || !self.total_steps.is_multiple_of(self.steps_per_iter) {
            return fail(format!(
                "total_steps ({}) must be a positive multiple of steps_per_iter ({})",
                self.total_steps, self.steps_per_iter
            ));
        }
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return fail(format!("gamma must lie in [0, 1), got {g}"));
            }
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return fail(format!("gae_lambda must lie in [0, 1], got {}", self.gae_lambda));
        }
        if let Some(d) = &self.thresholds {
            if d.is_empty() || d.iter().any(|x| !x.is_finite()) {
                return fail("thresholds must be a non-empty list of finite numbers".into());
            }
        }
        if !nonneg(self.lagrange_lr) || !nonneg(self.lagrange_init) {
            return fail("lagrange_lr and lagrange_init must be finite and >= 0".into());
        }
        if self.horizon == Some(0) {
            return fail("horizon must be at least 1".into());
        }
        if !nonneg(self.init_noise) {
            return fail("init_noise must be finite and >= 0".into());
        }
        Ok(())
    }

    /// Thresholds in effect for a CMDP.
    pub fn resolved_thresholds(&self, cmdp: &Cmdp) -> Result<Vec<f64>> {
        let d = match (&self.thresholds, self.budget_mode) {
            (Some(d), _) => d.clone(),
            (None, BudgetMode::Discounted) => cmdp.thresholds().to_vec(),
            (None, BudgetMode::Episodic) => vec![BENCHMARK_THRESHOLD; cmdp.n_constraints()],
        };
        if d.len() != cmdp.n_constraints() {
            return Err(Error::Config(format!(
                "{} thresholds for {} constraints",
                d.len(),
                cmdp.n_constraints()
            )));
        }
        Ok(d)
    }
}
