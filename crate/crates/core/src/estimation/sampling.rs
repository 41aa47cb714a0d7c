use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cmdp::{Cmdp, TabularSoftmaxPolicy};
use crate::error::{Error, Result};

/// One transition of an episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub costs: Vec<f64>,
    pub next_state: usize,
    /// Set on the last step of an episode. Finite CMDPs never terminate, so
    /// this marks truncation and the value of `next_state` is bootstrapped.
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub behavior_logprobs: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// `(1-γ) Σ_t γ^t x_t` of a per-step signal.
    pub fn discounted_sum(&self, gamma: f64, signal: impl Fn(&Step) -> f64) -> f64 {
        let mut total = 0.0;
        let mut g = 1.0;
        for step in &self.steps {
            total += g * signal(step);
            g *= gamma;
        }
        (1.0 - gamma) * total
    }
}

/// Smallest horizon `T` with `γ^T < tol`.
pub fn default_horizon(gamma: f64, tol: f64) -> usize {
    if gamma <= 0.0 {
        return 1;
    }
    ((tol.ln() / gamma.ln()).floor() as usize + 1).max(1)
}

struct Samplers {
    initial: WeightedIndex<f64>,
    policy: Vec<WeightedIndex<f64>>,
    transition: Vec<WeightedIndex<f64>>,
}

fn weighted(row: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(row).map_err(|e| Error::Numerical(format!("sampling weights: {e}")))
}

/// Samples `n_steps` transitions as episodes of `horizon` steps (the last one
/// may be shorter). Episode `e` draws from its own ChaCha8 stream, so the
/// result depends only on the seed.
pub fn sample(
    cmdp: &Cmdp,
    policy: &TabularSoftmaxPolicy,
    n_steps: usize,
    horizon: usize,
    rng_seed: u64,
) -> Result<Vec<Trajectory>> {
    if horizon == 0 {
        return Err(Error::Config("horizon must be at least 1".into()));
    }
    policy.check_shape(cmdp.n_states(), cmdp.n_actions())?;
    let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
    let probs = policy.probabilities();
    let samplers = Samplers {
        initial: weighted(cmdp.initial())?,
        policy: probs.chunks(a_n).map(weighted).collect::<Result<_>>()?,
        transition: cmdp.transition().chunks(s_n).map(weighted).collect::<Result<_>>()?,
    };
    let log_probs = policy.log_probabilities();
    let n_episodes = n_steps.div_ceil(horizon);
    Ok((0..n_episodes)
        .into_par_iter()
        .map(|e| {
            let len = horizon.min(n_steps - e * horizon);
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(e as u64);
            let mut steps = Vec::with_capacity(len);
            let mut behavior_logprobs = Vec::with_capacity(len);
            let mut s = samplers.initial.sample(&mut rng);
            for t in 0..len {
                let a = samplers.policy[s].sample(&mut rng);
                let next = samplers.transition[s * a_n + a].sample(&mut rng);
                let pair = s * a_n + a;
                steps.push(Step {
                    state: s,
                    action: a,
                    reward: cmdp.reward()[pair],
                    costs: cmdp.costs().iter().map(|c| c[pair]).collect(),
                    next_state: next,
                    terminal: t + 1 == len,
                });
                behavior_logprobs.push(log_probs[pair]);
                s = next;
            }
            Trajectory {
                steps,
                behavior_logprobs,
            }
        })
        .collect())
}
