use serde::{Deserialize, Serialize};

use super::advantage::{fit_table, gae, ValueTables};
use super::sampling::Trajectory;
use crate::cmdp::{evaluate, expected_return, state_occupancy, Cmdp, Signal, TabularSoftmaxPolicy};
use crate::error::{Error, Result};

/// How `C(π_k)` is estimated from a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// Mean `(1-γ)`-discounted cost from episode starts; the scale of `C(π)`.
    #[default]
    Discounted,
    /// Mean undiscounted cost per episode, as in benchmark suites.
    Episodic,
}

/// Per-episode summaries of complete episodes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeSummary {
    pub discounted_returns: Vec<f64>,
    /// Indexed `[constraint][episode]`.
    pub discounted_costs: Vec<Vec<f64>>,
    pub undiscounted_costs: Vec<Vec<f64>>,
}

/// A weighted set of state-action samples with advantages and value targets.
///
/// Sampled batches weight every transition by `1/N`. The full-information
/// batch built by [`Batch::exact`] holds every state-action pair once, weighted
/// by the occupancy `ρ_k(s, a)`, with exact advantages.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub n_states: usize,
    pub n_actions: usize,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub weights: Vec<f64>,
    pub behavior_logprobs: Vec<f64>,
    pub reward_adv: Vec<f64>,
    /// Indexed `[constraint][sample]`.
    pub cost_adv: Vec<Vec<f64>>,
    pub reward_targets: Vec<f64>,
    pub cost_targets: Vec<Vec<f64>>,
    pub episodes: EpisodeSummary,
}

impl Batch {
    /// Flattens trajectories and runs GAE-λ for the reward and every cost,
    /// bootstrapping each episode with the value of its final next state.
    pub fn from_trajectories(
        trajectories: &[Trajectory],
        values: &ValueTables,
        n_actions: usize,
        gamma: f64,
        lambda: f64,
    ) -> Result<Self> {
        let n_states = values.reward.len();
        let m = values.costs.len();
        let total: usize = trajectories.iter().map(Trajectory::len).sum();
        if total == 0 {
            return Err(Error::Empty("batch without transitions".into()));
        }
        let mut batch = Batch {
            n_states,
            n_actions,
            states: Vec::with_capacity(total),
            actions: Vec::with_capacity(total),
            weights: vec![1.0 / total as f64; total],
            behavior_logprobs: Vec::with_capacity(total),
            reward_adv: Vec::with_capacity(total),
            cost_adv: vec![Vec::with_capacity(total); m],
            reward_targets: Vec::with_capacity(total),
            cost_targets: vec![Vec::with_capacity(total); m],
            episodes: EpisodeSummary {
                discounted_returns: Vec::new(),
                discounted_costs: vec![Vec::new(); m],
                undiscounted_costs: vec![Vec::new(); m],
            },
        };
        let full = trajectories.iter().map(Trajectory::len).max().unwrap_or(0);
        for traj in trajectories.iter().filter(|t| !t.is_empty()) {
            if traj.behavior_logprobs.len() != traj.len() {
                return Err(Error::Dimension("behavior log-probabilities per step".into()));
            }
            let mut states: Vec<usize> = traj.steps.iter().map(|s| s.state).collect();
            states.push(traj.steps[traj.len() - 1].next_state);
            if states.iter().any(|&s| s >= n_states) {
                return Err(Error::Dimension("trajectory state outside the value table".into()));
            }
            let run = |table: &[f64], signal: Vec<f64>| -> Result<(Vec<f64>, Vec<f64>)> {
                let v: Vec<f64> = states.iter().map(|&s| table[s]).collect();
                let adv = gae(&signal, &v, gamma, lambda)?;
                let targets = adv.iter().zip(&v).map(|(a, v)| a + v).collect();
                Ok((adv, targets))
            };
            let (adv, targets) = run(&values.reward, traj.steps.iter().map(|s| s.reward).collect())?;
            batch.reward_adv.extend(adv);
            batch.reward_targets.extend(targets);
            for i in 0..m {
                if traj.steps.iter().any(|s| s.costs.len() != m) {
                    return Err(Error::Dimension("cost vector length differs from m".into()));
                }
                let (adv, targets) =
                    run(&values.costs[i], traj.steps.iter().map(|s| s.costs[i]).collect())?;
                batch.cost_adv[i].extend(adv);
                batch.cost_targets[i].extend(targets);
            }
            batch.states.extend(&states[..traj.len()]);
            batch.actions.extend(traj.steps.iter().map(|s| s.action));
            batch.behavior_logprobs.extend(&traj.behavior_logprobs);
            if traj.len() == full {
                let ep = &mut batch.episodes;
                ep.discounted_returns.push(traj.discounted_sum(gamma, |s| s.reward));
                for i in 0..m {
                    ep.discounted_costs[i].push(traj.discounted_sum(gamma, |s| s.costs[i]));
                    ep.undiscounted_costs[i].push(traj.steps.iter().map(|s| s.costs[i]).sum());
                }
            }
        }
        if batch.behavior_logprobs.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("behavior log-probabilities".into()));
        }
        Ok(batch)
    }

    /// Full-information batch of `π_k`: all pairs weighted by `ρ_k(s, a)` with
    /// exact advantages rescaled to the per-step scale, `A / (1-γ)`. Episode
    /// summaries hold the exact `R(π_k)` and `C_i(π_k)`.
    pub fn exact(cmdp: &Cmdp, policy: &TabularSoftmaxPolicy) -> Result<Self> {
        let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
        let m = cmdp.n_constraints();
        let scale = 1.0 / (1.0 - cmdp.discount());
        let rho = state_occupancy(cmdp, policy)?;
        let adv = |signal| -> Result<Vec<f64>> {
            Ok(evaluate(cmdp, policy, signal)?
                .adv
                .iter()
                .map(|a| a * scale)
                .collect())
        };
        let mut cost_adv = Vec::with_capacity(m);
        let mut costs = Vec::with_capacity(m);
        for i in 0..m {
            cost_adv.push(adv(Signal::Cost(i))?);
            costs.push(vec![expected_return(cmdp, policy, Signal::Cost(i))?]);
        }
        Ok(Batch {
            n_states: s_n,
            n_actions: a_n,
            states: (0..s_n * a_n).map(|i| i / a_n).collect(),
            actions: (0..s_n * a_n).map(|i| i % a_n).collect(),
            weights: rho.rho().to_vec(),
            behavior_logprobs: policy.log_probabilities(),
            reward_adv: adv(Signal::Reward)?,
            cost_adv,
            reward_targets: Vec::new(),
            cost_targets: vec![Vec::new(); m],
            episodes: EpisodeSummary {
                discounted_returns: vec![expected_return(cmdp, policy, Signal::Reward)?],
                discounted_costs: costs,
                undiscounted_costs: vec![Vec::new(); m],
            },
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn n_constraints(&self) -> usize {
        self.cost_adv.len()
    }

    /// Sub-batch of the given rows with weights renormalised to sum to one.
    /// Episode summaries are not carried over.
    pub fn select(&self, rows: &[usize]) -> Batch {
        let pick = |v: &[f64]| rows.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let mut weights = pick(&self.weights);
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Batch {
            n_states: self.n_states,
            n_actions: self.n_actions,
            states: rows.iter().map(|&i| self.states[i]).collect(),
            actions: rows.iter().map(|&i| self.actions[i]).collect(),
            weights,
            behavior_logprobs: pick(&self.behavior_logprobs),
            reward_adv: pick(&self.reward_adv),
            cost_adv: self.cost_adv.iter().map(|c| pick(c)).collect(),
            reward_targets: if self.reward_targets.is_empty() {
                Vec::new()
            } else {
                pick(&self.reward_targets)
            },
            cost_targets: self
                .cost_targets
                .iter()
                .map(|c| if c.is_empty() { Vec::new() } else { pick(c) })
                .collect(),
            episodes: EpisodeSummary::default(),
        }
    }

    /// Shifts and scales the reward advantages to weighted zero mean and unit
    /// variance. Cost advantages are left untouched.
    pub fn normalize_reward_advantages(&mut self) {
        let mean: f64 = self.weights.iter().zip(&self.reward_adv).map(|(w, a)| w * a).sum();
        let var: f64 = self
            .weights
            .iter()
            .zip(&self.reward_adv)
            .map(|(w, a)| w * (a - mean) * (a - mean))
            .sum();
        let std = var.sqrt().max(1e-8);
        for a in &mut self.reward_adv {
            *a = (*a - mean) / std;
        }
    }

    /// `log π(a_i|s_i)` of a candidate policy at every sample.
    pub fn candidate_logprobs(&self, policy: &TabularSoftmaxPolicy) -> Result<Vec<f64>> {
        policy.check_shape(self.n_states, self.n_actions)?;
        let table = policy.log_probabilities();
        Ok(self
            .states
            .iter()
            .zip(&self.actions)
            .map(|(&s, &a)| table[s * self.n_actions + a])
            .collect())
    }

    /// Weighted mean of the advantages of one signal.
    pub fn mean_advantage(&self, signal: Signal) -> Result<f64> {
        let adv = self.advantages(signal)?;
        Ok(self.weights.iter().zip(adv).map(|(w, a)| w * a).sum())
    }

    pub fn advantages(&self, signal: Signal) -> Result<&[f64]> {
        match signal {
            Signal::Reward => Ok(&self.reward_adv),
            Signal::Cost(i) => self
                .cost_adv
                .get(i)
                .map(Vec::as_slice)
                .ok_or_else(|| Error::Dimension(format!("no cost signal {i} in batch"))),
        }
    }

    fn targets(&self, signal: Signal) -> Result<&[f64]> {
        match signal {
            Signal::Reward => Ok(&self.reward_targets),
            Signal::Cost(i) => self
                .cost_targets
                .get(i)
                .map(Vec::as_slice)
                .ok_or_else(|| Error::Dimension(format!("no cost signal {i} in batch"))),
        }
    }
}

/// Refits a tabular value estimate to the λ-returns of one signal.
pub fn fit_values(batch: &Batch, signal: Signal, previous: &[f64]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(Error::Empty("cannot fit values on an empty batch".into()));
    }
    fit_table(&batch.states, batch.targets(signal)?, previous)
}

/// Estimate of `C_i(π_k)` from the complete episodes of a batch.
pub fn episode_cost_estimate(batch: &Batch, mode: BudgetMode, constraint: usize) -> Result<f64> {
    let table = match mode {
        BudgetMode::Discounted => &batch.episodes.discounted_costs,
        BudgetMode::Episodic => &batch.episodes.undiscounted_costs,
    };
    let values = table
        .get(constraint)
        .ok_or_else(|| Error::Dimension(format!("no cost signal {constraint} in batch")))?;
    mean(values)
}

/// Estimate of `R(π_k)` from the complete episodes of a batch.
pub fn episode_return_estimate(batch: &Batch) -> Result<f64> {
    mean(&batch.episodes.discounted_returns)
}

fn mean(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("no complete episodes in batch".into()));
    }
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::sampling::Step;

    fn constant_episode(len: usize) -> Trajectory {
        Trajectory {
            steps: (0..len)
                .map(|t| Step {
                    state: 0,
                    action: 0,
                    reward: 0.0,
                    costs: vec![1.0],
                    next_state: 0,
                    terminal: t + 1 == len,
                })
                .collect(),
            behavior_logprobs: vec![0.0; len],
        }
    }

    #[test]
    fn constant_cost_estimates() {
        let trajs = vec![constant_episode(10), constant_episode(10), constant_episode(3)];
        let values = ValueTables::zeros(1, 1);
        let batch = Batch::from_trajectories(&trajs, &values, 1, 0.5, 0.95).unwrap();
        assert_eq!(batch.len(), 23);
        assert_eq!(episode_cost_estimate(&batch, BudgetMode::Episodic, 0).unwrap(), 10.0);
        let disc = episode_cost_estimate(&batch, BudgetMode::Discounted, 0).unwrap();
        assert!((disc - (1.0 - 0.5f64.powi(10))).abs() < 1e-15);
        assert!(episode_cost_estimate(&batch, BudgetMode::Episodic, 1).is_err());
    }

    #[test]
    fn select_renormalises() {
        let trajs = vec![constant_episode(4)];
        let batch = Batch::from_trajectories(&trajs, &ValueTables::zeros(1, 1), 1, 0.5, 1.0)
            .unwrap();
        let sub = batch.select(&[1, 3]);
        assert_eq!(sub.weights, vec![0.5, 0.5]);
        assert_eq!(sub.cost_adv[0], vec![batch.cost_adv[0][1], batch.cost_adv[0][3]]);
    }

    #[test]
    fn normalised_rewards_have_unit_scale() {
        let mut batch = Batch::from_trajectories(
            &[constant_episode(5)],
            &ValueTables::zeros(1, 1),
            1,
            0.5,
            1.0,
        )
        .unwrap();
        batch.reward_adv = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let costs = batch.cost_adv.clone();
        batch.normalize_reward_advantages();
        assert!(batch.mean_advantage(Signal::Reward).unwrap().abs() < 1e-15);
        let var: f64 = batch.reward_adv.iter().map(|a| a * a / 5.0).sum();
        assert!((var - 1.0).abs() < 1e-12);
        assert_eq!(batch.cost_adv, costs);
    }
}
