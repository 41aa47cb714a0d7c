//! Brute-force cross-checks for the LP optimum on tiny instances.

use crate::cmdp::{occupancy_from_probs, Cmdp};
use crate::error::{Error, Result};

/// Largest `|S|·|A|` accepted by [`best_feasible_value`].
pub const MAX_ENUMERATION_PAIRS: usize = 12;
const MAX_GRID_POINTS: usize = 5_000_000;

/// All ways to write `total` as an ordered sum of `parts` non-negative integers.
fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    if parts == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(total - first, parts - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Best return over the grid of stochastic policies with probabilities in
/// multiples of `1/resolution`, restricted to policies satisfying every cost
/// constraint. Returns `-∞` when no grid policy is feasible.
pub fn best_feasible_value(cmdp: &Cmdp, resolution: usize) -> Result<f64> {
    let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
    if s_n * a_n > MAX_ENUMERATION_PAIRS {
        return Err(Error::TooLarge(format!(
            "enumeration needs |S|·|A| <= {MAX_ENUMERATION_PAIRS}, got {}",
            s_n * a_n
        )));
    }
    if resolution == 0 {
        return Err(Error::Domain("grid resolution must be positive".into()));
    }
    let rows = compositions(resolution, a_n);
    let points = (rows.len() as f64).powi(s_n as i32);
    if points > MAX_GRID_POINTS as f64 {
        return Err(Error::TooLarge(format!(
            "{points} grid policies exceed the limit of {MAX_GRID_POINTS}"
        )));
    }
    let scale = 1.0 / resolution as f64;
    let mut index = vec![0usize; s_n];
    let mut probs = vec![0.0; s_n * a_n];
    let mut best = f64::NEG_INFINITY;
    loop {
        for (s, &k) in index.iter().enumerate() {
            for (a, &n) in rows[k].iter().enumerate() {
                probs[s * a_n + a] = n as f64 * scale;
            }
        }
        let rho = occupancy_from_probs(cmdp, &probs)?;
        let feasible = cmdp
            .costs()
            .iter()
            .zip(cmdp.thresholds())
            .all(|(c, d)| rho.inner(c) <= *d);
        if feasible {
            best = best.max(rho.inner(cmdp.reward()));
        }
        let mut pos = 0;
        loop {
            if pos == s_n {
                return Ok(best);
            }
            index[pos] += 1;
            if index[pos] < rows.len() {
                break;
            }
            index[pos] = 0;
            pos += 1;
        }
    }
}

/// Optimal unconstrained return `E_μ[V*]` by value iteration on the
/// `(1-γ)`-normalised Bellman optimality operator.
pub fn value_iteration_optimum(cmdp: &Cmdp, tolerance: f64) -> f64 {
    let (s_n, a_n) = (cmdp.n_states(), cmdp.n_actions());
    let gamma = cmdp.discount();
    let r = cmdp.reward();
    let mut v = vec![0.0; s_n];
    // ‖V_k - V*‖ <= γ/(1-γ) ‖V_k - V_{k-1}‖
    let stop = tolerance * (1.0 - gamma) / gamma.max(f64::MIN_POSITIVE);
    for _ in 0..1_000_000 {
        let mut next = vec![f64::NEG_INFINITY; s_n];
        for (s, out) in next.iter_mut().enumerate() {
            for a in 0..a_n {
                let cont: f64 = cmdp
                    .next_states(s, a)
                    .iter()
                    .zip(&v)
                    .map(|(p, x)| p * x)
                    .sum();
                *out = out.max((1.0 - gamma) * r[s * a_n + a] + gamma * cont);
            }
        }
        let change = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = next;
        if change <= stop {
            break;
        }
    }
    cmdp.initial().iter().zip(&v).map(|(m, x)| m * x).sum()
}
