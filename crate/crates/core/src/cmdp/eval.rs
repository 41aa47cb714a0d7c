use nalgebra::DMatrix;

use super::{Cmdp, Signal, TabularSoftmaxPolicy};
use crate::error::{Error, Result};
use crate::linalg;

/// Discounted state-action visitation distribution `ρ(s, a)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyMeasure {
    n_states: usize,
    n_actions: usize,
    rho: Vec<f64>,
}

impl OccupancyMeasure {
    pub fn new(n_states: usize, n_actions: usize, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "occupancy with {} entries for {n_states}x{n_actions}",
                rho.len()
            )));
        }
        if rho.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Domain("occupancy entries must be finite and >= 0".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            rho,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.rho[s * self.n_actions + a]
    }

    /// `ρ(s) = Σ_a ρ(s, a)`.
    pub fn state_marginal(&self) -> Vec<f64> {
        self.rho
            .chunks(self.n_actions)
            .map(|row| row.iter().sum())
            .collect()
    }

    pub fn total(&self) -> f64 {
        self.rho.iter().sum()
    }

    /// `⟨ρ, table⟩` for a per-pair table.
    pub fn inner(&self, table: &[f64]) -> f64 {
        self.rho.iter().zip(table).map(|(r, x)| r * x).sum()
    }

    /// Largest absolute violation of the Bellman flow equalities
    /// `Σ_a ρ(s,a) - γ Σ_{s',a'} P(s|s',a') ρ(s',a') = (1-γ) μ(s)`.
    pub fn flow_residual(&self, cmdp: &Cmdp) -> f64 {
        let s_n = cmdp.n_states();
        let a_n = cmdp.n_actions();
        let gamma = cmdp.discount();
        let mut lhs: Vec<f64> = self.state_marginal();
        for sp in 0..s_n {
            for ap in 0..a_n {
                let mass = self.rho[sp * a_n + ap];
                if mass == 0.0 {
                    continue;
                }
                for (s, p) in cmdp.next_states(sp, ap).iter().enumerate() {
                    lhs[s] -= gamma * p * mass;
                }
            }
        }
        lhs.iter()
            .zip(cmdp.initial())
            .map(|(l, mu)| (l - (1.0 - gamma) * mu).abs())
            .fold(0.0, f64::max)
    }
}

/// Value, action-value and advantage tables of one signal under one policy.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalTables {
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub adv: Vec<f64>,
}

/// A policy recovered from an occupancy measure, with the states that had
/// zero marginal mass (and therefore received uniform conditionals).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractedPolicy {
    pub policy: TabularSoftmaxPolicy,
    pub unvisited_states: Vec<usize>,
}

fn check_probs(cmdp: &Cmdp, probs: &[f64]) -> Result<()> {
    if probs.len() != cmdp.n_pairs() {
        return Err(Error::Dimension(format!(
            "policy table with {} entries for {} state-action pairs",
            probs.len(),
            cmdp.n_pairs()
        )));
    }
    Ok(())
}

/// State-to-state kernel `P_π[s, s'] = Σ_a π(a|s) P(s'|s,a)`.
fn kernel(cmdp: &Cmdp, probs: &[f64]) -> DMatrix<f64> {
    let s_n = cmdp.n_states();
    let a_n = cmdp.n_actions();
    let mut k = DMatrix::zeros(s_n, s_n);
    for s in 0..s_n {
        for a in 0..a_n {
            let pi = probs[s * a_n + a];
            if pi == 0.0 {
                continue;
            }
            for (sp, p) in cmdp.next_states(s, a).iter().enumerate() {
                k[(s, sp)] += pi * p;
            }
        }
    }
    k
}

/// Occupancy of an arbitrary row-stochastic policy table (zeros allowed).
pub fn occupancy_from_probs(cmdp: &Cmdp, probs: &[f64]) -> Result<OccupancyMeasure> {
    check_probs(cmdp, probs)?;
    let s_n = cmdp.n_states();
    let a_n = cmdp.n_actions();
    let gamma = cmdp.discount();
    let k = kernel(cmdp, probs);
    let system = DMatrix::identity(s_n, s_n) - k.transpose() * gamma;
    let rhs: Vec<f64> = cmdp.initial().iter().map(|mu| (1.0 - gamma) * mu).collect();
    let rho_s = linalg::solve(system, &rhs)?;
    let mut rho = Vec::with_capacity(s_n * a_n);
    for (s, &mass) in rho_s.iter().enumerate() {
        for a in 0..a_n {
            rho.push((mass * probs[s * a_n + a]).max(0.0));
        }
    }
    OccupancyMeasure::new(s_n, a_n, rho)
}

/// Solves `x = (1-γ) μ + γ P_πᵀ x` and returns `ρ(s, a) = x(s) π(a|s)`.
pub fn state_occupancy(cmdp: &Cmdp, policy: &TabularSoftmaxPolicy) -> Result<OccupancyMeasure> {
    policy.check_shape(cmdp.n_states(), cmdp.n_actions())?;
    occupancy_from_probs(cmdp, &policy.probabilities())
}

pub(crate) fn evaluate_probs(cmdp: &Cmdp, probs: &[f64], signal: Signal) -> Result<EvalTables> {
    check_probs(cmdp, probs)?;
    let table = cmdp.signal(signal)?;
    let s_n = cmdp.n_states();
    let a_n = cmdp.n_actions();
    let gamma = cmdp.discount();
    let k = kernel(cmdp, probs);
    let system = DMatrix::identity(s_n, s_n) - k * gamma;
    let rhs: Vec<f64> = (0..s_n)
        .map(|s| {
            (1.0 - gamma)
                * (0..a_n)
                    .map(|a| probs[s * a_n + a] * table[s * a_n + a])
                    .sum::<f64>()
        })
        .collect();
    let v = linalg::solve(system, &rhs)?;
    let mut q = vec![0.0; s_n * a_n];
    for s in 0..s_n {
        for a in 0..a_n {
            let next: f64 = cmdp
                .next_states(s, a)
                .iter()
                .zip(&v)
                .map(|(p, vn)| p * vn)
                .sum();
            q[s * a_n + a] = (1.0 - gamma) * table[s * a_n + a] + gamma * next;
        }
    }
    let adv = q
        .iter()
        .enumerate()
        .map(|(i, qi)| qi - v[i / a_n])
        .collect();
    Ok(EvalTables { v, q, adv })
}

/// Exact `V`, `Q` and `A = Q - V` for one signal, `(1-γ)`-normalised.
pub fn evaluate(
    cmdp: &Cmdp,
    policy: &TabularSoftmaxPolicy,
    signal: Signal,
) -> Result<EvalTables> {
    policy.check_shape(cmdp.n_states(), cmdp.n_actions())?;
    evaluate_probs(cmdp, &policy.probabilities(), signal)
}

/// `E_{s∼μ}[V(s)]`: the return `R(π)` or a cost `C_i(π)`.
pub fn expected_return(cmdp: &Cmdp, policy: &TabularSoftmaxPolicy, signal: Signal) -> Result<f64> {
    let tables = evaluate(cmdp, policy, signal)?;
    Ok(cmdp.initial().iter().zip(&tables.v).map(|(m, v)| m * v).sum())
}

/// The same quantity computed as `⟨ρ_π, signal⟩`.
pub fn expected_return_via_occupancy(
    cmdp: &Cmdp,
    policy: &TabularSoftmaxPolicy,
    signal: Signal,
) -> Result<f64> {
    let rho = state_occupancy(cmdp, policy)?;
    Ok(rho.inner(cmdp.signal(signal)?))
}

/// Policy advantage `𝔸^{base}(candidate) = Σ_{s,a} ρ_base(s) candidate(a|s) A_base(s,a)`.
pub fn policy_advantage(
    cmdp: &Cmdp,
    base: &TabularSoftmaxPolicy,
    candidate: &TabularSoftmaxPolicy,
    signal: Signal,
) -> Result<f64> {
    candidate.check_shape(cmdp.n_states(), cmdp.n_actions())?;
    let rho = state_occupancy(cmdp, base)?;
    let tables = evaluate(cmdp, base, signal)?;
    let marginal = rho.state_marginal();
    let cand = candidate.probabilities();
    let a_n = cmdp.n_actions();
    Ok(cand
        .iter()
        .zip(&tables.adv)
        .enumerate()
        .map(|(i, (p, adv))| marginal[i / a_n] * p * adv)
        .sum())
}

/// Conditions an occupancy measure on states: `π(a|s) = ρ(s,a) / Σ_a' ρ(s,a')`.
/// States without mass get the uniform distribution.
pub fn extract_policy(rho: &OccupancyMeasure) -> Result<ExtractedPolicy> {
    let a_n = rho.n_actions();
    let mut probs = Vec::with_capacity(rho.rho().len());
    let mut unvisited = Vec::new();
    for (s, row) in rho.rho().chunks(a_n).enumerate() {
        let mass: f64 = row.iter().sum();
        if mass > 0.0 {
            probs.extend(row.iter().map(|x| x / mass));
        } else {
            unvisited.push(s);
            probs.extend(std::iter::repeat_n(1.0 / a_n as f64, a_n));
        }
    }
    if !unvisited.is_empty() {
        log::warn!(
            "extract_policy: {} state(s) with zero occupancy received uniform conditionals",
            unvisited.len()
        );
    }
    Ok(ExtractedPolicy {
        policy: TabularSoftmaxPolicy::from_probabilities(rho.n_states(), a_n, &probs)?,
        unvisited_states: unvisited,
    })
}

/// Exact gradient of `E_μ[V]` with respect to the softmax logits:
/// `∂/∂θ(s,a) = ρ(s) π(a|s) A(s,a) / (1-γ)`.
pub fn return_gradient(
    cmdp: &Cmdp,
    policy: &TabularSoftmaxPolicy,
    signal: Signal,
) -> Result<Vec<f64>> {
    let rho = state_occupancy(cmdp, policy)?;
    let tables = evaluate(cmdp, policy, signal)?;
    let scale = 1.0 / (1.0 - cmdp.discount());
    Ok(rho
        .rho()
        .iter()
        .zip(&tables.adv)
        .map(|(r, adv)| r * adv * scale)
        .collect())
}
