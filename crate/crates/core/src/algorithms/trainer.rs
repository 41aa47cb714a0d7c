use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::adam::Adam;
use super::config::{Algorithm, TrainConfig};
use super::loss::{budgets, dual_step, objective_and_gradient, objective_value, Objective};
use crate::cmdp::{expected_return, state_occupancy, Cmdp, Signal, TabularSoftmaxPolicy};
use crate::error::{Error, Result};
use crate::estimation::{
    default_horizon, episode_cost_estimate, episode_return_estimate, fit_values, sample, Batch,
    BudgetMode, ValueTables,
};
use crate::penalty::{c3po_penalty_term, kl_bar};

/// Largest `|S|·|A|` accepted in full-information mode.
pub const MAX_EXACT_PAIRS: usize = 20_000;

/// Where the data of an iteration comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Sampled,
    /// Exact occupancies and advantages replace samples.
    Exact,
}

/// Diagnostics of one iteration. Estimates refer to the policy the data came
/// from; `exact_*` and `kl_bar` describe the updated policy.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateReport {
    pub iteration: usize,
    pub env_steps: usize,
    pub loss_before: f64,
    pub loss_after: f64,
    /// `κ Σ hinge` for penalty methods, `Σ λ α` for the Lagrangian, 0 for PPO.
    pub penalty: f64,
    pub return_estimate: f64,
    pub cost_estimates: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub budgets: Vec<f64>,
    /// `κ_k` for penalty methods, 0 otherwise.
    pub kappa: f64,
    pub kl_bar: f64,
    pub lambdas: Vec<f64>,
    pub exact_return: f64,
    pub exact_costs: Vec<f64>,
}

impl UpdateReport {
    /// Whether the updated policy violates any constraint exactly.
    pub fn violates(&self) -> bool {
        self.exact_costs
            .iter()
            .zip(&self.thresholds)
            .any(|(c, d)| c > d)
    }
}

/// splitmix64 finaliser, used to derive independent seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateful training loop: one call to [`Trainer::step`] is one iteration of
/// collect, estimate, update and refit.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    cmdp: &'a Cmdp,
    config: TrainConfig,
    mode: Mode,
    thresholds: Vec<f64>,
    horizon: usize,
    gae_gamma: f64,
    policy: TabularSoftmaxPolicy,
    values: ValueTables,
    adam: Adam,
    lambdas: Vec<f64>,
    shuffle_rng: ChaCha8Rng,
    iteration: usize,
    env_steps: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(cmdp: &'a Cmdp, config: TrainConfig, mode: Mode) -> Result<Self> {
        config.validate()?;
        let thresholds = config.resolved_thresholds(cmdp)?;
        if mode == Mode::Exact {
            if cmdp.n_pairs() > MAX_EXACT_PAIRS {
                return Err(Error::TooLarge(format!(
                    "exact mode supports at most {MAX_EXACT_PAIRS} state-action pairs"
                )));
            }
            if config.budget_mode != BudgetMode::Discounted {
                return Err(Error::Config("exact mode requires budget_mode = discounted".into()));
            }
        }
        let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
        let mut init_rng = ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ 0x1));
        let logits = (0..s_n * a_n)
            .map(|_| {
                if config.init_noise > 0.0 {
                    init_rng.gen_range(-config.init_noise..=config.init_noise)
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Self {
            cmdp,
            mode,
            horizon: config
                .horizon
                .unwrap_or_else(|| default_horizon(cmdp.discount(), 1e-3)),
            gae_gamma: config.gamma.unwrap_or(cmdp.discount()),
            policy: TabularSoftmaxPolicy::new(s_n, a_n, logits)?,
            values: ValueTables::zeros(s_n, cmdp.n_constraints()),
            adam: Adam::new(s_n * a_n, config.learning_rate),
            lambdas: vec![config.lagrange_init; cmdp.n_constraints()],
            shuffle_rng: ChaCha8Rng::seed_from_u64(splitmix64(config.seed ^ 0x2)),
            iteration: 0,
            env_steps: 0,
            thresholds,
            config,
        })
    }

    /// Replaces the initial policy.
    pub fn with_policy(mut self, policy: TabularSoftmaxPolicy) -> Result<Self> {
        policy.check_shape(self.cmdp.n_states(), self.cmdp.n_actions())?;
        self.policy = policy;
        Ok(self)
    }

    pub fn policy(&self) -> &TabularSoftmaxPolicy {
        &self.policy
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_done(&self) -> bool {
        self.iteration >= self.config.iterations()
    }

    fn collect(&mut self) -> Result<(Batch, f64, Vec<f64>)> {
        match self.mode {
            Mode::Exact => {
                let batch = Batch::exact(self.cmdp, &self.policy)?;
                let ret = episode_return_estimate(&batch)?;
                let costs = (0..self.cmdp.n_constraints())
                    .map(|i| episode_cost_estimate(&batch, BudgetMode::Discounted, i))
                    .collect::<Result<_>>()?;
                Ok((batch, ret, costs))
            }
            Mode::Sampled => {
                let seed = splitmix64(self.config.seed.wrapping_add(
                    (self.iteration as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                ));
                let trajs = sample(
                    self.cmdp,
                    &self.policy,
                    self.config.steps_per_iter,
                    self.horizon,
                    seed,
                )?;
                let mut batch = Batch::from_trajectories(
                    &trajs,
                    &self.values,
                    self.cmdp.n_actions(),
                    self.gae_gamma,
                    self.config.gae_lambda,
                )?;
                if self.config.refit_before_advantages {
                    self.refit(&batch)?;
                    batch = Batch::from_trajectories(
                        &trajs,
                        &self.values,
                        self.cmdp.n_actions(),
                        self.gae_gamma,
                        self.config.gae_lambda,
                    )?;
                }
                let ret = episode_return_estimate(&batch)?;
                let costs = (0..self.cmdp.n_constraints())
                    .map(|i| episode_cost_estimate(&batch, self.config.budget_mode, i))
                    .collect::<Result<_>>()?;
                Ok((batch, ret, costs))
            }
        }
    }

    fn refit(&mut self, batch: &Batch) -> Result<()> {
        self.values.reward = fit_values(batch, Signal::Reward, &self.values.reward)?;
        for i in 0..self.values.costs.len() {
            self.values.costs[i] = fit_values(batch, Signal::Cost(i), &self.values.costs[i])?;
        }
        Ok(())
    }

    /// Runs one iteration.
    pub fn step(&mut self) -> Result<UpdateReport> {
        if self.is_done() {
            return Err(Error::Config("training budget exhausted".into()));
        }
        let k = self.iteration;
        let cfg = self.config.clone();
        let (mut batch, return_estimate, cost_estimates) = self.collect()?;
        let b = budgets(&cost_estimates, &self.thresholds);
        if cfg.algorithm == Algorithm::PpoLag {
            for ((l, c), d) in self.lambdas.iter_mut().zip(&cost_estimates).zip(&self.thresholds) {
                *l = dual_step(*l, cfg.lagrange_lr, *c, *d);
            }
        }
        if self.mode == Mode::Sampled {
            self.refit(&batch)?;
            if cfg.normalize_reward_advantages {
                batch.normalize_reward_advantages();
            }
        }
        let kappa = if cfg.algorithm.uses_kappa() { cfg.kappa_at(k) } else { 0.0 };
        let lambdas = self.lambdas.clone();
        let objective = match cfg.algorithm {
            Algorithm::Ppo => Objective::Ppo,
            Algorithm::C3po => Objective::Penalty { budgets: &b, w: cfg.w, kappa },
            Algorithm::P3o => Objective::Penalty { budgets: &b, w: 1.0, kappa },
            Algorithm::PpoLag => Objective::Lagrangian { lambdas: &lambdas },
        };
        let old_policy = self.policy.clone();
        let loss_before =
            objective_value(&batch, &batch.behavior_logprobs, cfg.clip_eps, objective)?;

        let mut order: Vec<usize> = (0..batch.len()).collect();
        for _ in 0..cfg.epochs_per_iter {
            let chunks: Vec<Batch> = match self.mode {
                Mode::Exact => vec![batch.clone()],
                Mode::Sampled => {
                    order.shuffle(&mut self.shuffle_rng);
                    order
                        .chunks(cfg.minibatch_size)
                        .map(|rows| batch.select(rows))
                        .collect()
                }
            };
            for mb in &chunks {
                let (loss, grad) =
                    objective_and_gradient(mb, &self.policy, cfg.clip_eps, objective)?;
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFinite(format!(
                        "{} loss or gradient at iteration {k}",
                        cfg.algorithm
                    )));
                }
                self.adam.step(self.policy.logits_mut(), &grad);
            }
        }
        if self.policy.logits().iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("logits at iteration {k}")));
        }

        let new_lp = batch.candidate_logprobs(&self.policy)?;
        let loss_after = objective_value(&batch, &new_lp, cfg.clip_eps, objective)?;
        let penalty = match objective {
            Objective::Ppo => 0.0,
            Objective::Penalty { budgets, w, kappa } => {
                let mut hinge = 0.0;
                for (i, &bi) in budgets.iter().enumerate() {
                    let alpha = crate::estimation::clipped_cost_surrogate(
                        &batch,
                        &new_lp,
                        cfg.clip_eps,
                        i,
                    )?;
                    hinge += c3po_penalty_term(alpha, bi, w);
                }
                kappa * hinge
            }
            Objective::Lagrangian { lambdas } => {
                let mut total = 0.0;
                for (i, &l) in lambdas.iter().enumerate() {
                    total += l * crate::estimation::clipped_cost_surrogate(
                        &batch,
                        &new_lp,
                        cfg.clip_eps,
                        i,
                    )?;
                }
                total
            }
        };
        let kl = kl_bar(&self.policy, &old_policy, &state_occupancy(self.cmdp, &old_policy)?)?;
        let exact_return = expected_return(self.cmdp, &self.policy, Signal::Reward)?;
        let exact_costs = (0..self.cmdp.n_constraints())
            .map(|i| expected_return(self.cmdp, &self.policy, Signal::Cost(i)))
            .collect::<Result<Vec<_>>>()?;

        self.iteration += 1;
        self.env_steps += cfg.steps_per_iter;
        let report = UpdateReport {
            iteration: k,
            env_steps: self.env_steps,
            loss_before,
            loss_after,
            penalty,
            return_estimate,
            cost_estimates,
            thresholds: self.thresholds.clone(),
            budgets: b,
            kappa,
            kl_bar: kl,
            lambdas: self.lambdas.clone(),
            exact_return,
            exact_costs,
        };
        let finite = [report.loss_before, report.loss_after, report.penalty, report.kl_bar]
            .iter()
            .chain(&report.cost_estimates)
            .chain(&report.budgets)
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite(format!("report of iteration {k}: {report:?}")));
        }
        Ok(report)
    }

    /// Runs the remaining iterations.
    pub fn run(mut self) -> Result<(TabularSoftmaxPolicy, Vec<UpdateReport>)> {
        let mut reports = Vec::with_capacity(self.config.iterations());
        while !self.is_done() {
            reports.push(self.step()?);
        }
        Ok((self.policy, reports))
    }
}

/// Sampled training: `total_steps / steps_per_iter` iterations.
pub fn train(cmdp: &Cmdp, config: &TrainConfig) -> Result<(TabularSoftmaxPolicy, Vec<UpdateReport>)> {
    Trainer::new(cmdp, config.clone(), Mode::Sampled)?.run()
}

/// Full-information training with the same update rules and no sampling noise.
pub fn train_exact(
    cmdp: &Cmdp,
    config: &TrainConfig,
) -> Result<(TabularSoftmaxPolicy, Vec<UpdateReport>)> {
    Trainer::new(cmdp, config.clone(), Mode::Exact)?.run()
}
