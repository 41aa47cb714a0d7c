//! Penalty and divergence mathematics in closed form.
//!
//! The barrier divergence of a cost advantage `𝔸` against a budget `b > 0` is
//!
//! ```text
//! D_B(𝔸, b) = (b - 𝔸)/b - log((b - 𝔸)/b) - 1
//! ```
//!
//! and the sublevel set `{𝔸 ∈ [0, b) : D_B <= δ_B}` is exactly `[0, w·b]` with
//! `w = W₀(-exp(-δ_B - 1)) + 1`. This is why the receding hinge
//! `max{0, 𝔸 - min(b, w·b)}` can stand in for the barrier constraint.

use crate::cmdp::{OccupancyMeasure, TabularSoftmaxPolicy};
use crate::error::{Error, Result};

const LAMBERT_MAX_ITER: usize = 50;
const LAMBERT_TOL: f64 = 1e-14;
const INV_E: f64 = 0.367_879_441_171_442_33;

/// A real number or `+∞`, kept apart from floating-point overflow.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub enum ExtendedReal {
    Finite(f64),
    Infinite,
}

impl ExtendedReal {
    pub fn is_finite(self) -> bool {
        matches!(self, ExtendedReal::Finite(_))
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtendedReal::Finite(x) => Some(x),
            ExtendedReal::Infinite => None,
        }
    }

    /// Lossy conversion mapping the marker to `f64::INFINITY`.
    pub fn to_f64(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// Hyperparameters of the penalised update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyParams {
    pub kappa: f64,
    pub w: f64,
    pub delta_b: f64,
    pub clip_eps: f64,
}

impl PenaltyParams {
    /// Parameters with `δ_B` derived from the rate `w`.
    pub fn from_rate(kappa: f64, w: f64, clip_eps: f64) -> Result<Self> {
        let params = Self {
            kappa,
            w,
            delta_b: delta_from_w(w)?,
            clip_eps,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::Domain(format!("kappa must be >= 0, got {}", self.kappa)));
        }
        if !(self.w > 0.0 && self.w < 1.0) {
            return Err(Error::Domain(format!("w must lie in (0, 1), got {}", self.w)));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::Domain(format!(
                "clip epsilon must lie in (0, 1), got {}",
                self.clip_eps
            )));
        }
        let expected = delta_from_w(self.w)?;
        if (self.delta_b - expected).abs() > 1e-12 * expected.max(1.0) {
            return Err(Error::Domain(format!(
                "delta_b = {} does not match w = {} (expected {expected})",
                self.delta_b, self.w
            )));
        }
        Ok(())
    }
}

/// Remaining cost budget `b = d - C(π_k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub b: f64,
    pub threshold: f64,
    pub current_cost: f64,
}

impl Budget {
    pub fn new(threshold: f64, current_cost: f64) -> Self {
        Self {
            b: threshold - current_cost,
            threshold,
            current_cost,
        }
    }
}

/// `Σ_s ρ_base(s) KL(candidate(·|s) ‖ base(·|s))`.
pub fn kl_bar(
    candidate: &TabularSoftmaxPolicy,
    base: &TabularSoftmaxPolicy,
    occupancy_of_base: &OccupancyMeasure,
) -> Result<f64> {
    let (s_n, a_n) = (base.n_states(), base.n_actions());
    candidate.check_shape(s_n, a_n)?;
    if occupancy_of_base.n_states() != s_n || occupancy_of_base.n_actions() != a_n {
        return Err(Error::Dimension("occupancy does not match the policies".into()));
    }
    let weights = occupancy_of_base.state_marginal();
    Ok(weighted_kl(
        &weights,
        &candidate.log_probabilities(),
        &base.log_probabilities(),
        a_n,
    ))
}

/// `Σ_s weight(s) Σ_a exp(p(s,a)) (p(s,a) - q(s,a))` over log-probability tables.
pub(crate) fn weighted_kl(weights: &[f64], log_p: &[f64], log_q: &[f64], n_actions: usize) -> f64 {
    let mut total = 0.0;
    for (s, &wt) in weights.iter().enumerate() {
        if wt == 0.0 {
            continue;
        }
        let range = s * n_actions..(s + 1) * n_actions;
        let kl: f64 = log_p[range.clone()]
            .iter()
            .zip(&log_q[range])
            .map(|(p, q)| p.exp() * (p - q))
            .sum();
        total += wt * kl.max(0.0);
    }
    total
}

/// `D_B(𝔸, b)`, or `+∞` when `b <= 0` or `𝔸 >= b`.
pub fn barrier_divergence(cost_advantage: f64, b: f64) -> ExtendedReal {
    if b <= 0.0 || cost_advantage >= b {
        return ExtendedReal::Infinite;
    }
    // u - 1 - log u with u = 1 - 𝔸/b, evaluated without cancellation near u = 1.
    let z = -cost_advantage / b;
    ExtendedReal::Finite(z - z.ln_1p())
}

fn halley_start(x: f64) -> f64 {
    if x < -0.32 {
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        x.ln_1p() * 0.8
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    }
}

/// Principal branch `W₀(x)` of the Lambert W function for `x >= -1/e`.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < -INV_E - 1e-15 {
        return Err(Error::Domain(format!("lambert_w0 undefined at {x}")));
    }
    if x <= -INV_E {
        return Ok(-1.0);
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let mut w = halley_start(x);
    for _ in 0..LAMBERT_MAX_ITER {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 {
            break;
        }
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        let next = (w - step).max(-1.0);
        let done = (next - w).abs() <= LAMBERT_TOL * (1.0 + next.abs());
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

/// `w = W₀(-exp(-δ_B - 1)) + 1 ∈ (0, 1)`.
pub fn w_from_delta(delta_b: f64) -> Result<f64> {
    if !(delta_b > 0.0) || !delta_b.is_finite() {
        return Err(Error::Domain(format!("delta_b must be positive, got {delta_b}")));
    }
    Ok(lambert_w0(-(-delta_b - 1.0).exp())? + 1.0)
}

/// `δ_B = -w - log(1 - w)`, the inverse of [`w_from_delta`].
pub fn delta_from_w(w: f64) -> Result<f64> {
    if !(w > 0.0 && w < 1.0) {
        return Err(Error::Domain(format!("w must lie in (0, 1), got {w}")));
    }
    Ok(-w - (-w).ln_1p())
}

/// The advantage `𝔸_B ∈ (0, b)` with `D_B(𝔸_B, b) = δ_B`.
pub fn advantage_bound(b: f64, delta_b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!("budget must be positive, got {b}")));
    }
    Ok(b * w_from_delta(delta_b)?)
}

/// `max{0, 𝔸_c - min(b, w·b)}`.
pub fn c3po_penalty_term(cost_advantage: f64, b: f64, w: f64) -> f64 {
    (cost_advantage - b.min(w * b)).max(0.0)
}

/// `P_κ = f - κ max{0, g - bound}`.
pub fn exact_penalty_objective(f_value: f64, g_value: f64, bound: f64, kappa: f64) -> f64 {
    f_value - kappa * (g_value - bound).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambert_fixed_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(lambert_w0(-INV_E).unwrap(), -1.0);
        assert!(lambert_w0(-0.5).is_err());
        let w = lambert_w0(1e6).unwrap();
        assert!((w * w.exp() - 1e6).abs() <= 1e-12 * 1e6);
    }

    #[test]
    fn divergence_values() {
        assert_eq!(barrier_divergence(0.0, 3.0), ExtendedReal::Finite(0.0));
        assert_eq!(barrier_divergence(0.1, 0.0), ExtendedReal::Infinite);
        assert_eq!(barrier_divergence(2.0, 1.0), ExtendedReal::Infinite);
        let d = barrier_divergence(0.05 * 4.0, 4.0).finite().unwrap();
        assert!((d - (-0.05 - 0.95f64.ln())).abs() < 1e-15);
        assert!(ExtendedReal::Finite(1e300) < ExtendedReal::Infinite);
    }

    #[test]
    fn rate_and_radius() {
        let delta = delta_from_w(0.05).unwrap();
        assert!((delta - 1.2932e-3).abs() < 1e-7);
        assert!((w_from_delta(delta).unwrap() - 0.05).abs() < 1e-10);
        assert!((advantage_bound(1.0, delta).unwrap() - 0.05).abs() < 1e-10);
        assert!(PenaltyParams::from_rate(30.0, 0.05, 0.2).is_ok());
        assert!(PenaltyParams::from_rate(30.0, 1.0, 0.2).is_err());
    }

    #[test]
    fn hinge_values() {
        assert_eq!(c3po_penalty_term(0.0, 1.0, 0.05), 0.0);
        assert!((c3po_penalty_term(1.0, 2.0, 0.05) - 0.9).abs() < 1e-15);
        assert_eq!(c3po_penalty_term(0.0, -1.0, 0.05), 1.0);
        assert_eq!(exact_penalty_objective(2.0, 0.5, 1.0, 10.0), 2.0);
        assert_eq!(Budget::new(0.5, 0.2).b, 0.5 - 0.2);
    }
}
