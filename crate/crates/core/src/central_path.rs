//! The central path of the occupancy LP.
//!
//! For `t > 0` the path point `ρ_t` minimises
//!
//! ```text
//! f_t(ρ) = -t ⟨r, ρ⟩ + Φ(ρ) - ⟨∇Φ(ρ_0), ρ⟩,
//! Φ(ρ)   = Σ_{s,a} ρ(s,a) log π_ρ(a|s) - β Σ_i log(d_i - ⟨c_i, ρ⟩)
//! ```
//!
//! over the Bellman flow polytope, i.e. it maximises `t ⟨r, ρ⟩ - D_Φ(ρ, ρ_0)`.
//! The anchor term is absent unless an anchor policy is given, in which case
//! `t → 0` recovers the anchor and `t → ∞` the LP optimum. Without an anchor
//! small `t` gives the analytic centre of `Φ`.
//!
//! With multipliers `λ_i = β / s_i` on the slacks, the inner problem in `ρ` is
//! an entropy-regularised MDP with shaped reward `t r + ∇Φ(ρ_0) - Σ λ_i c_i`,
//! solved exactly by soft policy iteration. The outer problem is the convex
//! dual
//!
//! ```text
//! h(λ) = G(λ) + Σ_i λ_i d_i - β Σ_i log λ_i
//! ```
//!
//! with `G` the soft-optimal value, minimised by damped Newton steps using the
//! analytic Hessian of `G`.

use nalgebra::{DMatrix, DVector, LU};

use crate::cmdp::{state_occupancy, Cmdp, OccupancyMeasure, TabularSoftmaxPolicy};
use crate::error::{Error, Result};
use crate::lp::max_margin_point;
use crate::penalty::weighted_kl;

const MAX_NEWTON: usize = 500;
const MAX_SOFT_ITER: usize = 200;
const CONTINUATION_FACTOR: f64 = 4.0;
const ROUNDING_SLACK: f64 = 1e3;

#[derive(Debug, Clone, PartialEq)]
pub struct PathOptions {
    /// Barrier weight `β > 0`.
    pub beta: f64,
    /// Anchor policy `π_0` of the Bregman term; must be strictly feasible.
    pub anchor: Option<TabularSoftmaxPolicy>,
    /// Bound on `max_i |λ_i s_i / β - 1|`.
    pub tolerance: f64,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self {
            beta: 1.0,
            anchor: None,
            tolerance: 1e-8,
        }
    }
}

impl PathOptions {
    pub fn with_beta(beta: f64) -> Self {
        Self {
            beta,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralPathPoint {
    pub t: f64,
    pub rho_t: OccupancyMeasure,
    pub policy_t: TabularSoftmaxPolicy,
    /// `⟨r, ρ_t⟩`.
    pub objective_value: f64,
    /// `d_i - ⟨c_i, ρ_t⟩` per constraint.
    pub feasibility_slack: Vec<f64>,
    /// Final `max_i |λ_i s_i / β - 1|`.
    pub residual: f64,
    pub newton_steps: usize,
}

impl CentralPathPoint {
    pub fn min_slack(&self) -> f64 {
        self.feasibility_slack
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

type Lu = LU<f64, nalgebra::Dyn, nalgebra::Dyn>;

/// Soft-optimal policy for a shaped reward and the quantities derived from it.
struct SoftSolution {
    log_pi: Vec<f64>,
    pi: Vec<f64>,
    /// Unnormalised soft values.
    v: Vec<f64>,
    /// Normalised state occupancy.
    state_occ: Vec<f64>,
    rho: Vec<f64>,
    /// LU of `I - γ P_π` and of its transpose.
    eval_lu: Lu,
    occ_lu: Lu,
}

struct Problem<'a> {
    cmdp: &'a Cmdp,
    beta: f64,
    anchor_grad: Vec<f64>,
    tolerance: f64,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

impl<'a> Problem<'a> {
    fn new(cmdp: &'a Cmdp, options: &PathOptions) -> Result<Self> {
        if !(options.beta > 0.0 && options.beta.is_finite()) {
            return Err(Error::Domain(format!("beta must be positive, got {}", options.beta)));
        }
        if !(options.tolerance > 0.0) {
            return Err(Error::Domain("tolerance must be positive".into()));
        }
        let mut problem = Problem {
            cmdp,
            beta: options.beta,
            anchor_grad: vec![0.0; cmdp.n_pairs()],
            tolerance: options.tolerance,
        };
        if let Some(anchor) = &options.anchor {
            anchor.check_shape(cmdp.n_states(), cmdp.n_actions())?;
            let rho = state_occupancy(cmdp, anchor)?;
            let slacks = problem.slacks(rho.rho());
            if slacks.iter().any(|&s| s <= 0.0) {
                return Err(Error::Domain("anchor policy is not strictly feasible".into()));
            }
            let mut grad = anchor.log_probabilities();
            for (c, s) in cmdp.costs().iter().zip(&slacks) {
                for (g, c) in grad.iter_mut().zip(c) {
                    *g += problem.beta * c / s;
                }
            }
            problem.anchor_grad = grad;
        }
        Ok(problem)
    }

    fn slacks(&self, rho: &[f64]) -> Vec<f64> {
        self.cmdp
            .costs()
            .iter()
            .zip(self.cmdp.thresholds())
            .map(|(c, d)| d - c.iter().zip(rho).map(|(c, x)| c * x).sum::<f64>())
            .collect()
    }

    fn shaped_reward(&self, t: f64, lambda: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = self
            .cmdp
            .reward()
            .iter()
            .zip(&self.anchor_grad)
            .map(|(r, a)| t * r + a)
            .collect();
        for (c, l) in self.cmdp.costs().iter().zip(lambda) {
            for (r, c) in r.iter_mut().zip(c) {
                *r -= l * c;
            }
        }
        r
    }

    /// `γ Σ_{s'} P(s'|s,a) v(s')` for every pair.
    fn backup(&self, v: &[f64]) -> Vec<f64> {
        let (s_n, a_n) = (self.cmdp.n_states(), self.cmdp.n_actions());
        let gamma = self.cmdp.discount();
        let mut out = vec![0.0; s_n * a_n];
        for s in 0..s_n {
            for a in 0..a_n {
                out[s * a_n + a] = gamma
                    * self
                        .cmdp
                        .next_states(s, a)
                        .iter()
                        .zip(v)
                        .map(|(p, x)| p * x)
                        .sum::<f64>();
            }
        }
        out
    }

    fn greedy(&self, q: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let a_n = self.cmdp.n_actions();
        let mut log_pi = vec![0.0; q.len()];
        for (row, out) in q.chunks(a_n).zip(log_pi.chunks_mut(a_n)) {
            let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            for (o, x) in out.iter_mut().zip(row) {
                *o = x - top;
            }
            let z = log_sum_exp(out);
            for o in out.iter_mut() {
                *o -= z;
            }
        }
        let pi = log_pi.iter().map(|l| l.exp()).collect();
        (log_pi, pi)
    }

    fn kernel(&self, pi: &[f64]) -> DMatrix<f64> {
        let (s_n, a_n) = (self.cmdp.n_states(), self.cmdp.n_actions());
        let mut k = DMatrix::zeros(s_n, s_n);
        for s in 0..s_n {
            for a in 0..a_n {
                let p = pi[s * a_n + a];
                for (sp, q) in self.cmdp.next_states(s, a).iter().enumerate() {
                    k[(s, sp)] += p * q;
                }
            }
        }
        k
    }

    /// Soft policy iteration for the shaped reward.
    fn soft_solve(&self, shaped: &[f64], warm_v: Option<&[f64]>) -> Result<SoftSolution> {
        let (s_n, a_n) = (self.cmdp.n_states(), self.cmdp.n_actions());
        let gamma = self.cmdp.discount();
        let q0: Vec<f64> = match warm_v {
            Some(v) => shaped.iter().zip(self.backup(v)).map(|(r, b)| r + b).collect(),
            None => shaped.to_vec(),
        };
        let (mut log_pi, mut pi) = self.greedy(&q0);
        let mut previous = f64::INFINITY;
        for _ in 0..MAX_SOFT_ITER {
            let system = DMatrix::identity(s_n, s_n) - self.kernel(&pi) * gamma;
            let eval_lu = system.clone().lu();
            let rhs = DVector::from_fn(s_n, |s, _| {
                (0..a_n)
                    .map(|a| {
                        let j = s * a_n + a;
                        if pi[j] > 0.0 {
                            pi[j] * (shaped[j] - log_pi[j])
                        } else {
                            0.0
                        }
                    })
                    .sum()
            });
            let v = eval_lu
                .solve(&rhs)
                .ok_or_else(|| Error::Numerical("singular soft evaluation system".into()))?;
            let v: Vec<f64> = v.iter().copied().collect();
            let q: Vec<f64> = shaped.iter().zip(self.backup(&v)).map(|(r, b)| r + b).collect();
            let size = v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
            let (next_log_pi, next_pi) = self.greedy(&q);
            // The soft Bellman residual is quadratic in the policy error, so
            // convergence is judged on the policy itself.
            let change = (0..q.len())
                .map(|j| pi[j].max(next_pi[j]) * (next_log_pi[j] - log_pi[j]).abs())
                .fold(0.0, f64::max);
            let floor = 16.0 * f64::EPSILON * size;
            let stalled = change >= previous && change <= 1e3 * floor;
            previous = change;
            if change <= floor || stalled {
                let occ_lu = system.transpose().lu();
                let mu = DVector::from_fn(s_n, |s, _| (1.0 - gamma) * self.cmdp.initial()[s]);
                let occ = occ_lu
                    .solve(&mu)
                    .ok_or_else(|| Error::Numerical("singular occupancy system".into()))?;
                let state_occ: Vec<f64> = occ.iter().map(|x| x.max(0.0)).collect();
                let rho = (0..s_n * a_n).map(|j| state_occ[j / a_n] * pi[j]).collect();
                return Ok(SoftSolution {
                    log_pi,
                    pi,
                    v,
                    state_occ,
                    rho,
                    eval_lu,
                    occ_lu,
                });
            }
            (log_pi, pi) = (next_log_pi, next_pi);
        }
        Err(Error::Numerical("soft policy iteration did not converge".into()))
    }

    /// `dρ` for a perturbation `δ` of the shaped reward.
    fn occupancy_derivative(&self, sol: &SoftSolution, delta: &[f64]) -> Result<Vec<f64>> {
        let (s_n, a_n) = (self.cmdp.n_states(), self.cmdp.n_actions());
        let gamma = self.cmdp.discount();
        let rhs = DVector::from_fn(s_n, |s, _| {
            (0..a_n).map(|a| sol.pi[s * a_n + a] * delta[s * a_n + a]).sum()
        });
        let dv = sol
            .eval_lu
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular soft evaluation system".into()))?;
        let dv: Vec<f64> = dv.iter().copied().collect();
        let dq: Vec<f64> = delta.iter().zip(self.backup(&dv)).map(|(d, b)| d + b).collect();
        let dpi: Vec<f64> = (0..s_n * a_n)
            .map(|j| sol.pi[j] * (dq[j] - dv[j / a_n]))
            .collect();
        let mut inflow = DVector::zeros(s_n);
        for s in 0..s_n {
            for a in 0..a_n {
                let w = gamma * sol.state_occ[s] * dpi[s * a_n + a];
                if w == 0.0 {
                    continue;
                }
                for (sp, p) in self.cmdp.next_states(s, a).iter().enumerate() {
                    inflow[sp] += w * p;
                }
            }
        }
        let dd = sol
            .occ_lu
            .solve(&inflow)
            .ok_or_else(|| Error::Numerical("singular occupancy system".into()))?;
        Ok((0..s_n * a_n)
            .map(|j| dd[j / a_n] * sol.pi[j] + sol.state_occ[j / a_n] * dpi[j])
            .collect())
    }

    fn dual_value(&self, sol: &SoftSolution, lambda: &[f64]) -> f64 {
        let gamma = self.cmdp.discount();
        let g: f64 = (1.0 - gamma)
            * self
                .cmdp
                .initial()
                .iter()
                .zip(&sol.v)
                .map(|(m, v)| m * v)
                .sum::<f64>();
        g + lambda
            .iter()
            .zip(self.cmdp.thresholds())
            .map(|(l, d)| l * d - self.beta * l.ln())
            .sum::<f64>()
    }

    fn complementarity(&self, slacks: &[f64], lambda: &[f64]) -> f64 {
        slacks
            .iter()
            .zip(lambda)
            .map(|(s, l)| (l * s / self.beta - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Damped Newton on the dual from the multipliers `lambda`.
    fn solve(&self, t: f64, mut lambda: Vec<f64>) -> Result<CentralPathPoint> {
        let m = lambda.len();
        let mut sol = self.soft_solve(&self.shaped_reward(t, &lambda), None)?;
        for it in 0..MAX_NEWTON {
            let slacks = self.slacks(&sol.rho);
            let residual = self.complementarity(&slacks, &lambda);
            if residual <= self.tolerance {
                return self.point(sol, t, residual, it);
            }
            let grad: Vec<f64> = slacks
                .iter()
                .zip(&lambda)
                .map(|(s, l)| s - self.beta / l)
                .collect();
            let mut hess = DMatrix::zeros(m, m);
            for j in 0..m {
                let delta: Vec<f64> = self.cmdp.cost(j).iter().map(|c| -c).collect();
                let drho = self.occupancy_derivative(&sol, &delta)?;
                for i in 0..m {
                    hess[(i, j)] = -self
                        .cmdp
                        .cost(i)
                        .iter()
                        .zip(&drho)
                        .map(|(c, d)| c * d)
                        .sum::<f64>();
                }
                hess[(j, j)] += self.beta / (lambda[j] * lambda[j]);
            }
            let hess = (&hess + hess.transpose()) * 0.5;
            let step = hess
                .lu()
                .solve(&DVector::from_vec(grad.iter().map(|g| -g).collect()))
                .ok_or_else(|| Error::Numerical("singular dual Hessian".into()))?;
            if step.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numerical("non-finite dual Newton step".into()));
            }
            let mut alpha: f64 = 1.0;
            for (l, d) in lambda.iter().zip(step.iter()) {
                if *d < 0.0 {
                    alpha = alpha.min(0.9 * -l / d);
                }
            }
            let h0 = self.dual_value(&sol, &lambda);
            let slope: f64 = grad.iter().zip(step.iter()).map(|(g, d)| g * d).sum();
            let slack_tol = 1e-14 * h0.abs().max(1.0);
            let mut accepted = None;
            for _ in 0..60 {
                let trial: Vec<f64> = lambda
                    .iter()
                    .zip(step.iter())
                    .map(|(l, d)| l + alpha * d)
                    .collect();
                let Ok(next) = self.soft_solve(&self.shaped_reward(t, &trial), Some(&sol.v)) else {
                    alpha *= 0.5;
                    continue;
                };
                let h1 = self.dual_value(&next, &trial);
                let armijo = h1 <= h0 + 1e-4 * alpha * slope.min(0.0) && h1 < h0 - slack_tol;
                // Near the solution h is flat to rounding; fall back to the residual.
                let closer = (h1 - h0).abs() <= 1e-10 * h0.abs().max(1.0)
                    && self.complementarity(&self.slacks(&next.rho), &trial) < residual;
                if armijo || closer {
                    accepted = Some((trial, next));
                    break;
                }
                alpha *= 0.5;
            }
            let accepted = accepted.filter(|(trial, _)| *trial != lambda);
            let Some((trial, next)) = accepted else {
                // No further decrease is resolvable in floating point.
                if residual <= (ROUNDING_SLACK * self.tolerance).max(self.noise_floor(&sol, &lambda)) {
                    return self.point(sol, t, residual, it);
                }
                return Err(Error::Numerical(format!(
                    "line search failed at t = {t} (residual {residual:e})"
                )));
            };
            lambda = trial;
            sol = next;
        }
        Err(Error::Numerical(format!(
            "dual Newton did not converge at t = {t} within {MAX_NEWTON} steps"
        )))
    }

    /// Smallest complementarity residual the soft solve can resolve: logits
    /// are accurate to a few ulps of the value scale, which bounds the
    /// relative accuracy of every slack.
    fn noise_floor(&self, sol: &SoftSolution, lambda: &[f64]) -> f64 {
        let size = sol.v.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let spend = self
            .cmdp
            .costs()
            .iter()
            .zip(lambda)
            .map(|(c, l)| l / self.beta * c.iter().zip(&sol.rho).map(|(c, r)| c * r).sum::<f64>())
            .fold(0.0, f64::max);
        64.0 * f64::EPSILON * size * spend
    }

    /// Continuation from `t_from` to `t` in geometric stages.
    fn follow(&self, t_from: f64, t: f64, mut lambda: Vec<f64>) -> Result<CentralPathPoint> {
        let mut steps = 0;
        let mut stage = t_from;
        while stage * CONTINUATION_FACTOR < t {
            let point = self.solve(stage, lambda)?;
            steps += point.newton_steps;
            lambda = point.feasibility_slack.iter().map(|s| self.beta / s).collect();
            stage *= CONTINUATION_FACTOR;
        }
        let mut point = self.solve(t, lambda)?;
        point.newton_steps += steps;
        Ok(point)
    }

    /// Cold-start multipliers `β / τ` from the max-margin slack `τ`.
    fn initial_multipliers(&self) -> Result<Vec<f64>> {
        let (_, tau) = max_margin_point(self.cmdp)?;
        let scale = self
            .cmdp
            .thresholds()
            .iter()
            .fold(1.0f64, |acc, d| acc.max(d.abs()));
        if tau <= 1e-12 * scale {
            return Err(Error::NoInteriorPoint);
        }
        Ok(vec![self.beta / tau; self.cmdp.n_constraints()])
    }

    fn point(&self, sol: SoftSolution, t: f64, residual: f64, steps: usize) -> Result<CentralPathPoint> {
        let (s_n, a_n) = (self.cmdp.n_states(), self.cmdp.n_actions());
        let feasibility_slack = self.slacks(&sol.rho);
        if feasibility_slack.iter().any(|&s| s <= 0.0) {
            return Err(Error::Numerical(format!("path point at t = {t} is not interior")));
        }
        let objective_value = self.cmdp.reward().iter().zip(&sol.rho).map(|(r, x)| r * x).sum();
        Ok(CentralPathPoint {
            t,
            rho_t: OccupancyMeasure::new(s_n, a_n, sol.rho)?,
            policy_t: TabularSoftmaxPolicy::new(s_n, a_n, sol.log_pi)?,
            objective_value,
            feasibility_slack,
            residual,
            newton_steps: steps,
        })
    }
}

fn check_t(t: f64) -> Result<()> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::Domain(format!("t must be positive and finite, got {t}")));
    }
    Ok(())
}

/// Path point at `t` with barrier weight `β` and no anchor.
pub fn solve_path_point(cmdp: &Cmdp, t: f64, beta: f64) -> Result<CentralPathPoint> {
    solve_path_point_with(cmdp, t, &PathOptions::with_beta(beta), None)
}

/// Path point at `t`, optionally warm-started from another point of the same
/// path.
pub fn solve_path_point_with(
    cmdp: &Cmdp,
    t: f64,
    options: &PathOptions,
    warm_start: Option<&CentralPathPoint>,
) -> Result<CentralPathPoint> {
    check_t(t)?;
    let problem = Problem::new(cmdp, options)?;
    let lambda = match warm_start {
        Some(p) if p.feasibility_slack.len() == cmdp.n_constraints() => {
            if p.min_slack() <= 0.0 {
                return Err(Error::Domain("warm start is not interior".into()));
            }
            p.feasibility_slack.iter().map(|s| problem.beta / s).collect()
        }
        Some(_) => return Err(Error::Dimension("warm start has the wrong constraint count".into())),
        None => problem.initial_multipliers()?,
    };
    let t_from = match warm_start {
        Some(p) if p.t < t => p.t,
        Some(_) => t,
        None => t.min(1.0),
    };
    problem.follow(t_from, t, lambda)
}

/// Points along an increasing grid of `t`, each warm-started from the last.
pub fn trace_path(cmdp: &Cmdp, t_grid: &[f64], beta: f64) -> Result<Vec<CentralPathPoint>> {
    trace_path_with(cmdp, t_grid, &PathOptions::with_beta(beta))
}

pub fn trace_path_with(
    cmdp: &Cmdp,
    t_grid: &[f64],
    options: &PathOptions,
) -> Result<Vec<CentralPathPoint>> {
    if t_grid.is_empty() {
        return Err(Error::Empty("t grid".into()));
    }
    for t in t_grid {
        check_t(*t)?;
    }
    if t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("t grid must be strictly increasing".into()));
    }
    let mut points: Vec<CentralPathPoint> = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let point = solve_path_point_with(cmdp, t, options, points.last())?;
        points.push(point);
    }
    Ok(points)
}

/// `min_t Σ_s ρ_t(s) KL(π_t(·|s) ‖ π(·|s))` over the points of a path.
pub fn distance_to_path(policy: &TabularSoftmaxPolicy, path: &[CentralPathPoint]) -> Result<f64> {
    if path.is_empty() {
        return Err(Error::Empty("central path".into()));
    }
    let log_pi = policy.log_probabilities();
    let mut best = f64::INFINITY;
    for point in path {
        point
            .policy_t
            .check_shape(policy.n_states(), policy.n_actions())?;
        let d = weighted_kl(
            &point.rho_t.state_marginal(),
            &point.policy_t.log_probabilities(),
            &log_pi,
            policy.n_actions(),
        );
        best = best.min(d);
    }
    Ok(best)
}
