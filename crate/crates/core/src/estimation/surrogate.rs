use super::batch::Batch;
use crate::cmdp::{Signal, TabularSoftmaxPolicy};
use crate::error::{Error, Result};

/// Which side of the clip is taken: `min` for rewards, `max` for costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Clip {
    Optimistic,
    Pessimistic,
}

impl Clip {
    fn of(signal: Signal) -> Self {
        match signal {
            Signal::Reward => Clip::Optimistic,
            Signal::Cost(_) => Clip::Pessimistic,
        }
    }
}

/// Per-sample clipped term and its derivative with respect to the ratio.
#[inline]
fn clipped(ratio: f64, adv: f64, eps: f64, clip: Clip) -> (f64, f64) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    match clip {
        Clip::Optimistic if unclipped <= clipped => (unclipped, adv),
        Clip::Pessimistic if unclipped >= clipped => (unclipped, adv),
        _ => (clipped, 0.0),
    }
}

fn check(batch: &Batch, candidate_logprobs: &[f64]) -> Result<()> {
    if candidate_logprobs.len() != batch.len() {
        return Err(Error::Dimension(format!(
            "{} candidate log-probabilities for a batch of {}",
            candidate_logprobs.len(),
            batch.len()
        )));
    }
    Ok(())
}

fn surrogate(batch: &Batch, candidate_logprobs: &[f64], eps: f64, signal: Signal) -> Result<f64> {
    check(batch, candidate_logprobs)?;
    let adv = batch.advantages(signal)?;
    let clip = Clip::of(signal);
    Ok((0..batch.len())
        .map(|i| {
            let ratio = (candidate_logprobs[i] - batch.behavior_logprobs[i]).exp();
            batch.weights[i] * clipped(ratio, adv[i], eps, clip).0
        })
        .sum())
}

/// PPO objective `E[min(r Â_r, clip(r, 1-ε, 1+ε) Â_r)]`, to be maximised.
pub fn clipped_reward_surrogate(batch: &Batch, candidate_logprobs: &[f64], eps: f64) -> Result<f64> {
    surrogate(batch, candidate_logprobs, eps, Signal::Reward)
}

/// Pessimistic cost surrogate `α = E[max(r Â_c, clip(r, 1-ε, 1+ε) Â_c)]`.
pub fn clipped_cost_surrogate(
    batch: &Batch,
    candidate_logprobs: &[f64],
    eps: f64,
    constraint: usize,
) -> Result<f64> {
    surrogate(batch, candidate_logprobs, eps, Signal::Cost(constraint))
}

/// Value of a clipped surrogate together with its gradient with respect to
/// the candidate's logits.
pub fn surrogate_and_gradient(
    batch: &Batch,
    policy: &TabularSoftmaxPolicy,
    eps: f64,
    signal: Signal,
) -> Result<(f64, Vec<f64>)> {
    let a_n = batch.n_actions;
    let logprobs = batch.candidate_logprobs(policy)?;
    let probs = policy.probabilities();
    let adv = batch.advantages(signal)?;
    let clip = Clip::of(signal);
    let mut value = 0.0;
    let mut grad = vec![0.0; probs.len()];
    for i in 0..batch.len() {
        let ratio = (logprobs[i] - batch.behavior_logprobs[i]).exp();
        let (term, d_ratio) = clipped(ratio, adv[i], eps, clip);
        value += batch.weights[i] * term;
        if d_ratio == 0.0 {
            continue;
        }
        // ∂r/∂θ(s_i, b) = r (1[b = a_i] - π(b|s_i))
        let scale = batch.weights[i] * d_ratio * ratio;
        let s = batch.states[i];
        for b in 0..a_n {
            let indicator = if b == batch.actions[i] { 1.0 } else { 0.0 };
            grad[s * a_n + b] += scale * (indicator - probs[s * a_n + b]);
        }
    }
    Ok((value, grad))
}
