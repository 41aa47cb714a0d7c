use crate::error::{Error, Result};

/// Logit assigned to zero-probability actions when building a policy from a
/// probability table. `exp(-690)` is still a positive normal double.
pub const LOGIT_FLOOR: f64 = -690.0;

/// A tabular softmax policy `π(a|s) ∝ exp(θ[s, a])`.
///
/// Every conditional distribution is strictly positive; the softmax is
/// evaluated with the per-state maximum subtracted.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularSoftmaxPolicy {
    n_states: usize,
    n_actions: usize,
    logits: Vec<f64>,
}

impl TabularSoftmaxPolicy {
    pub fn new(n_states: usize, n_actions: usize, logits: Vec<f64>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::Dimension("policy needs states and actions".into()));
        }
        if logits.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "{} logits for {n_states} states x {n_actions} actions",
                logits.len()
            )));
        }
        if logits.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("policy logits".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            logits,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            logits: vec![0.0; n_states * n_actions],
        }
    }

    /// Policy whose conditionals equal the given row-stochastic table.
    /// Zero entries map to [`LOGIT_FLOOR`].
    pub fn from_probabilities(n_states: usize, n_actions: usize, probs: &[f64]) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(Error::Dimension(format!(
                "{} probabilities for {n_states} states x {n_actions} actions",
                probs.len()
            )));
        }
        let logits = probs
            .iter()
            .map(|&p| if p > 0.0 { p.ln().max(LOGIT_FLOOR) } else { LOGIT_FLOOR })
            .collect();
        Self::new(n_states, n_actions, logits)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    /// Conditional distribution `π(·|s)`.
    pub fn probs(&self, s: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_actions];
        self.write_probs(s, &mut out);
        out
    }

    fn write_probs(&self, s: usize, out: &mut [f64]) {
        let row = &self.logits[s * self.n_actions..(s + 1) * self.n_actions];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for (o, &x) in out.iter_mut().zip(row) {
            *o = (x - max).exp();
            total += *o;
        }
        for o in out.iter_mut() {
            *o /= total;
        }
    }

    /// Full row-major `π(a|s)` table.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.logits.len()];
        for s in 0..self.n_states {
            self.write_probs(s, &mut out[s * self.n_actions..(s + 1) * self.n_actions]);
        }
        out
    }

    /// Full row-major `log π(a|s)` table.
    pub fn log_probabilities(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.logits.len()];
        for s in 0..self.n_states {
            let row = &self.logits[s * self.n_actions..(s + 1) * self.n_actions];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let log_z = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
            for (a, &x) in row.iter().enumerate() {
                out[s * self.n_actions + a] = x - log_z;
            }
        }
        out
    }

    pub fn log_prob(&self, s: usize, a: usize) -> f64 {
        let row = &self.logits[s * self.n_actions..(s + 1) * self.n_actions];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        row[a] - log_z
    }

    pub(crate) fn check_shape(&self, n_states: usize, n_actions: usize) -> Result<()> {
        if self.n_states != n_states || self.n_actions != n_actions {
            return Err(Error::Dimension(format!(
                "policy is {}x{}, expected {n_states}x{n_actions}",
                self.n_states, self.n_actions
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_rows_sum_to_one_even_for_extreme_logits() {
        let p = TabularSoftmaxPolicy::new(2, 3, vec![800.0, 0.0, -800.0, 1.0, 2.0, 3.0]).unwrap();
        for s in 0..2 {
            let row = p.probs(s);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x > 0.0 || s == 0));
        }
        let lp = p.log_probabilities();
        assert!((lp[3..].iter().map(|x| x.exp()).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((p.log_prob(1, 2) - lp[5]).abs() < 1e-15);
    }

    #[test]
    fn from_probabilities_round_trips() {
        let probs = [0.75, 0.25, 0.0, 1.0];
        let p = TabularSoftmaxPolicy::from_probabilities(2, 2, &probs).unwrap();
        let back = p.probabilities();
        assert!((back[0] - 0.75).abs() < 1e-15);
        assert!(back[2] > 0.0 && back[2] < 1e-290);
    }

    #[test]
    fn rejects_wrong_shape() {
        assert!(TabularSoftmaxPolicy::new(2, 2, vec![0.0; 3]).is_err());
        assert!(TabularSoftmaxPolicy::new(1, 1, vec![f64::NAN]).is_err());
    }
}
