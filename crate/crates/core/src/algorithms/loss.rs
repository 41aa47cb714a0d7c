use crate::cmdp::{Signal, TabularSoftmaxPolicy};
use crate::error::{Error, Result};
use crate::estimation::{clipped_cost_surrogate, clipped_reward_surrogate, surrogate_and_gradient, Batch};
use crate::penalty::c3po_penalty_term;

/// The loss minimised in the inner loop of an iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Objective<'a> {
    /// `L^PPO`, costs ignored.
    Ppo,
    /// `L^PPO + κ Σ_i max{0, α_i - min(b_i, w b_i)}`.
    Penalty {
        budgets: &'a [f64],
        w: f64,
        kappa: f64,
    },
    /// `(L^PPO + Σ_i λ_i α_i) / (1 + Σ_i λ_i)`.
    Lagrangian { lambdas: &'a [f64] },
}

impl Objective<'_> {
    fn check(&self, batch: &Batch) -> Result<()> {
        let n = match self {
            Objective::Ppo => return Ok(()),
            Objective::Penalty { budgets, .. } => budgets.len(),
            Objective::Lagrangian { lambdas } => lambdas.len(),
        };
        if n != batch.n_constraints() {
            return Err(Error::Dimension(format!(
                "{n} budgets or multipliers for {} constraints",
                batch.n_constraints()
            )));
        }
        Ok(())
    }
}

/// Value of the objective at a candidate given by its log-probabilities.
pub fn objective_value(
    batch: &Batch,
    candidate_logprobs: &[f64],
    eps: f64,
    objective: Objective<'_>,
) -> Result<f64> {
    objective.check(batch)?;
    let ppo = -clipped_reward_surrogate(batch, candidate_logprobs, eps)?;
    match objective {
        Objective::Ppo => Ok(ppo),
        Objective::Penalty { budgets, w, kappa } => {
            let mut hinge = 0.0;
            for (i, &b) in budgets.iter().enumerate() {
                let alpha = clipped_cost_surrogate(batch, candidate_logprobs, eps, i)?;
                hinge += c3po_penalty_term(alpha, b, w);
            }
            Ok(ppo + kappa * hinge)
        }
        Objective::Lagrangian { lambdas } => {
            let mut total = ppo;
            for (i, &l) in lambdas.iter().enumerate() {
                total += l * clipped_cost_surrogate(batch, candidate_logprobs, eps, i)?;
            }
            Ok(total / (1.0 + lambdas.iter().sum::<f64>()))
        }
    }
}

/// Value of the objective and its gradient with respect to the logits.
pub fn objective_and_gradient(
    batch: &Batch,
    policy: &TabularSoftmaxPolicy,
    eps: f64,
    objective: Objective<'_>,
) -> Result<(f64, Vec<f64>)> {
    objective.check(batch)?;
    let (reward, reward_grad) = surrogate_and_gradient(batch, policy, eps, Signal::Reward)?;
    let mut loss = -reward;
    let mut grad: Vec<f64> = reward_grad.iter().map(|g| -g).collect();
    match objective {
        Objective::Ppo => {}
        Objective::Penalty { budgets, w, kappa } => {
            let mut hinge = 0.0;
            for (i, &b) in budgets.iter().enumerate() {
                let (alpha, alpha_grad) =
                    surrogate_and_gradient(batch, policy, eps, Signal::Cost(i))?;
                let term = c3po_penalty_term(alpha, b, w);
                hinge += term;
                if term > 0.0 {
                    grad.iter_mut().zip(&alpha_grad).for_each(|(g, a)| *g += kappa * a);
                }
            }
            loss += kappa * hinge;
        }
        Objective::Lagrangian { lambdas } => {
            for (i, &l) in lambdas.iter().enumerate() {
                let (alpha, alpha_grad) =
                    surrogate_and_gradient(batch, policy, eps, Signal::Cost(i))?;
                loss += l * alpha;
                grad.iter_mut().zip(&alpha_grad).for_each(|(g, a)| *g += l * a);
            }
            let scale = 1.0 / (1.0 + lambdas.iter().sum::<f64>());
            loss *= scale;
            grad.iter_mut().for_each(|g| *g *= scale);
        }
    }
    Ok((loss, grad))
}

/// Plain PPO loss `-E[min(r Â_r, clip(r) Â_r)]`.
pub fn ppo_loss(batch: &Batch, candidate_logprobs: &[f64], eps: f64) -> Result<f64> {
    objective_value(batch, candidate_logprobs, eps, Objective::Ppo)
}

/// C3PO loss `L^PPO + κ Σ_i ReLU(α_i - min(b_i, w b_i))`. The hinge wraps the
/// batch-level surrogate `α_i`, one term per constraint.
pub fn c3po_loss(
    batch: &Batch,
    candidate_logprobs: &[f64],
    budgets: &[f64],
    w: f64,
    kappa: f64,
    eps: f64,
) -> Result<f64> {
    objective_value(batch, candidate_logprobs, eps, Objective::Penalty { budgets, w, kappa })
}

/// Budgets `b_i = d_i - C_i`.
pub fn budgets(cost_estimates: &[f64], thresholds: &[f64]) -> Vec<f64> {
    thresholds.iter().zip(cost_estimates).map(|(d, c)| d - c).collect()
}

/// P3O loss `L^PPO + κ Σ_i max{0, α_i + C_i - d_i}`, evaluated as the C3PO
/// loss with `w = 1`.
pub fn p3o_loss(
    batch: &Batch,
    candidate_logprobs: &[f64],
    cost_estimates: &[f64],
    thresholds: &[f64],
    kappa: f64,
    eps: f64,
) -> Result<f64> {
    if cost_estimates.len() != thresholds.len() {
        return Err(Error::Dimension("cost estimates and thresholds differ in length".into()));
    }
    let b = budgets(cost_estimates, thresholds);
    c3po_loss(batch, candidate_logprobs, &b, 1.0, kappa, eps)
}

/// Lagrangian loss normalised by `1 + Σ λ`.
pub fn lagrangian_loss(
    batch: &Batch,
    candidate_logprobs: &[f64],
    lambdas: &[f64],
    eps: f64,
) -> Result<f64> {
    objective_value(batch, candidate_logprobs, eps, Objective::Lagrangian { lambdas })
}

/// Projected dual ascent `λ ← max(0, λ + lr (Ĉ - d))`.
pub fn dual_step(lambda: f64, lagrange_lr: f64, cost_estimate: f64, threshold: f64) -> f64 {
    (lambda + lagrange_lr * (cost_estimate - threshold)).max(0.0)
}
