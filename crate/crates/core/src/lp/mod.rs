//! Exact solution of the occupancy-measure linear program
//!
//! ```text
//! maximise ⟨r, ρ⟩  s.t.  Σ_a ρ(s,a) - γ Σ_{s',a'} P(s|s',a') ρ(s',a') = (1-γ) μ(s)
//!                        ⟨c_i, ρ⟩ <= d_i,   ρ >= 0
//! ```
//!
//! together with the flow duals `ν` and the cost multipliers `λ >= 0`. This is
//! the ground truth every learner in the crate is measured against.

mod enumerate;
mod simplex;

pub use enumerate::{best_feasible_value, value_iteration_optimum, MAX_ENUMERATION_PAIRS};

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::cmdp::{extract_policy, Cmdp, OccupancyMeasure, TabularSoftmaxPolicy};
use crate::error::{Error, Result};
use simplex::SimplexStatus;

/// The occupancy LP in equality form with explicit cost slacks.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyLp {
    n_states: usize,
    n_actions: usize,
    /// `S x (S·A)` flow matrix `M`.
    pub flow: DMatrix<f64>,
    /// `(1-γ) μ`.
    pub flow_rhs: Vec<f64>,
    /// One row `c_i` per constraint.
    pub cost_rows: Vec<Vec<f64>>,
    pub cost_bounds: Vec<f64>,
    pub objective: Vec<f64>,
}

impl OccupancyLp {
    pub fn n_equalities(&self) -> usize {
        self.flow.nrows()
    }

    pub fn n_inequalities(&self) -> usize {
        self.cost_rows.len()
    }

    pub fn n_vars(&self) -> usize {
        self.flow.ncols()
    }

    /// Largest violation of `Mρ = q`, `⟨c_i,ρ⟩ <= d_i` and `ρ >= 0`.
    pub fn primal_violation(&self, rho: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (s, q) in self.flow_rhs.iter().enumerate() {
            let lhs: f64 = self.flow.row(s).iter().zip(rho).map(|(m, x)| m * x).sum();
            worst = worst.max((lhs - q).abs());
        }
        for (row, d) in self.cost_rows.iter().zip(&self.cost_bounds) {
            let lhs: f64 = row.iter().zip(rho).map(|(c, x)| c * x).sum();
            worst = worst.max(lhs - d);
        }
        rho.iter().fold(worst, |w, x| w.max(-x))
    }

    /// Standard-form matrix over `[ρ, slack]`.
    fn standard_form(&self) -> (DMatrix<f64>, Vec<f64>, Vec<f64>) {
        let (s_n, n) = self.flow.shape();
        let m = self.cost_rows.len();
        let mut a = DMatrix::zeros(s_n + m, n + m);
        a.view_mut((0, 0), (s_n, n)).copy_from(&self.flow);
        for (i, row) in self.cost_rows.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                a[(s_n + i, j)] = *c;
            }
            a[(s_n + i, n + i)] = 1.0;
        }
        let mut b = self.flow_rhs.clone();
        b.extend_from_slice(&self.cost_bounds);
        let mut c = self.objective.clone();
        c.extend(std::iter::repeat_n(0.0, m));
        (a, b, c)
    }
}

/// Builds the occupancy LP of a CMDP.
pub fn build_lp(cmdp: &Cmdp) -> OccupancyLp {
    let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
    let gamma = cmdp.discount();
    let mut flow = DMatrix::zeros(s_n, s_n * a_n);
    for sp in 0..s_n {
        for ap in 0..a_n {
            let col = sp * a_n + ap;
            flow[(sp, col)] += 1.0;
            for (s, p) in cmdp.next_states(sp, ap).iter().enumerate() {
                flow[(s, col)] -= gamma * p;
            }
        }
    }
    OccupancyLp {
        n_states: s_n,
        n_actions: a_n,
        flow,
        flow_rhs: cmdp.initial().iter().map(|mu| (1.0 - gamma) * mu).collect(),
        cost_rows: cmdp.costs().to_vec(),
        cost_bounds: cmdp.thresholds().to_vec(),
        objective: cmdp.reward().to_vec(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

/// Primal-dual solution of the occupancy LP. For infeasible programs only
/// `status` is meaningful: `rho_star` is all zeros, `optimal_value` is `-∞`
/// and the dual vectors are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub rho_star: OccupancyMeasure,
    pub optimal_value: f64,
    /// `ν`, one per flow equality.
    pub duals_flow: Vec<f64>,
    /// `λ* >= 0`, one per cost constraint.
    pub duals_cost: Vec<f64>,
    /// `d_i - ⟨c_i, ρ*⟩`.
    pub slacks: Vec<f64>,
}

/// Optimality certificate measured on a solved LP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certificate {
    pub primal_violation: f64,
    /// Largest positive reduced cost `r - Mᵀν - Cᵀλ`, or negative multiplier.
    pub dual_violation: f64,
    /// Largest `|ρ·reduced| ` or `|λ_i·slack_i|`.
    pub complementarity: f64,
    /// `|primal objective - dual objective|`.
    pub duality_gap: f64,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// Optimal policy `π*(a|s) = ρ*(s,a) / ρ*(s)`.
    pub fn policy(&self) -> Result<TabularSoftmaxPolicy> {
        if !self.is_optimal() {
            return Err(Error::Infeasible);
        }
        Ok(extract_policy(&self.rho_star)?.policy)
    }

    /// `qᵀν + dᵀλ`.
    pub fn dual_objective(&self, lp: &OccupancyLp) -> f64 {
        self.duals_flow
            .iter()
            .zip(&lp.flow_rhs)
            .map(|(y, q)| y * q)
            .sum::<f64>()
            + self
                .duals_cost
                .iter()
                .zip(&lp.cost_bounds)
                .map(|(l, d)| l * d)
                .sum::<f64>()
    }

    pub fn certificate(&self, lp: &OccupancyLp) -> Result<Certificate> {
        if !self.is_optimal() {
            return Err(Error::Infeasible);
        }
        let rho = self.rho_star.rho();
        let mut dual_violation = self.duals_cost.iter().fold(0.0f64, |w, l| w.max(-l));
        let mut complementarity: f64 = 0.0;
        for j in 0..lp.n_vars() {
            let mut reduced = lp.objective[j];
            for (s, nu) in self.duals_flow.iter().enumerate() {
                reduced -= lp.flow[(s, j)] * nu;
            }
            for (row, l) in lp.cost_rows.iter().zip(&self.duals_cost) {
                reduced -= row[j] * l;
            }
            dual_violation = dual_violation.max(reduced);
            complementarity = complementarity.max((rho[j] * reduced).abs());
        }
        for (l, slack) in self.duals_cost.iter().zip(&self.slacks) {
            complementarity = complementarity.max((l * slack).abs());
        }
        Ok(Certificate {
            primal_violation: lp.primal_violation(rho),
            dual_violation,
            complementarity,
            duality_gap: (self.optimal_value - self.dual_objective(lp)).abs(),
        })
    }

    /// Plain-text report: status, value, multipliers, slacks and `π*`.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let status = match self.status {
            LpStatus::Optimal => "optimal",
            LpStatus::Infeasible => "infeasible",
        };
        let _ = writeln!(out, "status {status}");
        if !self.is_optimal() {
            return out;
        }
        let join = |v: &[f64]| {
            v.iter()
                .map(|x| format!("{x:?}"))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let _ = writeln!(out, "optimal_value {:?}", self.optimal_value);
        let _ = writeln!(out, "lambda {}", join(&self.duals_cost));
        let _ = writeln!(out, "slack {}", join(&self.slacks));
        let _ = writeln!(out, "flow_duals {}", join(&self.duals_flow));
        out.push_str("policy\n");
        if let Ok(extracted) = extract_policy(&self.rho_star) {
            let probs = extracted.policy.probabilities();
            for row in probs.chunks(self.rho_star.n_actions()) {
                let _ = writeln!(out, "{}", join(row));
            }
        }
        out.push_str("occupancy\n");
        for row in self.rho_star.rho().chunks(self.rho_star.n_actions()) {
            let _ = writeln!(out, "{}", join(row));
        }
        out
    }
}

/// Solves the occupancy LP. Infeasibility is a status, not an error.
pub fn solve_lp(lp: &OccupancyLp) -> Result<LpSolution> {
    let (a, b, c) = lp.standard_form();
    let n = lp.n_vars();
    let s_n = lp.n_equalities();
    let res = simplex::solve(&a, &b, &c)?;
    match res.status {
        SimplexStatus::Infeasible => Ok(LpSolution {
            status: LpStatus::Infeasible,
            rho_star: OccupancyMeasure::new(lp.n_states, lp.n_actions, vec![0.0; n])?,
            optimal_value: f64::NEG_INFINITY,
            duals_flow: Vec::new(),
            duals_cost: Vec::new(),
            slacks: Vec::new(),
        }),
        SimplexStatus::Optimal => {
            let rho: Vec<f64> = res.x[..n].to_vec();
            let slacks = lp
                .cost_rows
                .iter()
                .zip(&lp.cost_bounds)
                .map(|(row, d)| d - row.iter().zip(&rho).map(|(c, x)| c * x).sum::<f64>())
                .collect();
            Ok(LpSolution {
                status: LpStatus::Optimal,
                optimal_value: res.objective,
                rho_star: OccupancyMeasure::new(lp.n_states, lp.n_actions, rho)?,
                duals_flow: res.y[..s_n].to_vec(),
                duals_cost: res.y[s_n..].to_vec(),
                slacks,
            })
        }
    }
}

/// Strictly feasible occupancy with the largest uniform constraint margin:
/// maximises `τ` subject to `⟨c_i, ρ⟩ + τ <= d_i` over the flow polytope.
/// Returns the maximiser and `τ`, which is positive exactly when a strictly
/// feasible (Slater) point exists.
pub fn max_margin_point(cmdp: &Cmdp) -> Result<(OccupancyMeasure, f64)> {
    let lp = build_lp(cmdp);
    let (s_n, n) = lp.flow.shape();
    let m = lp.cost_rows.len();
    // columns: ρ, slacks, τ+, τ-
    let cols = n + m + 2;
    let mut a = DMatrix::zeros(s_n + m, cols);
    a.view_mut((0, 0), (s_n, n)).copy_from(&lp.flow);
    for (i, row) in lp.cost_rows.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            a[(s_n + i, j)] = *c;
        }
        a[(s_n + i, n + i)] = 1.0;
        a[(s_n + i, n + m)] = 1.0;
        a[(s_n + i, n + m + 1)] = -1.0;
    }
    let mut b = lp.flow_rhs.clone();
    b.extend_from_slice(&lp.cost_bounds);
    let mut c = vec![0.0; cols];
    c[n + m] = 1.0;
    c[n + m + 1] = -1.0;
    let res = simplex::solve(&a, &b, &c)?;
    if res.status != SimplexStatus::Optimal {
        return Err(Error::Numerical("margin LP without a feasible point".into()));
    }
    Ok((
        OccupancyMeasure::new(lp.n_states, lp.n_actions, res.x[..n].to_vec())?,
        res.objective,
    ))
}

/// Convenience: build and solve in one step.
pub fn solve_cmdp(cmdp: &Cmdp) -> Result<LpSolution> {
    solve_lp(&build_lp(cmdp))
}
