use crate::error::{Error, Result};

/// GAE-λ by backward recursion over one truncated episode.
///
/// `values` holds `V(s_0), ..., V(s_T)`, the last entry being the bootstrap.
/// `δ_t = x_t + γ V(s_{t+1}) - V(s_t)` and `A_t = δ_t + γλ A_{t+1}`.
pub fn gae(signal: &[f64], values: &[f64], gamma: f64, lambda: f64) -> Result<Vec<f64>> {
    if values.len() != signal.len() + 1 {
        return Err(Error::Dimension(format!(
            "gae: {} signal entries need {} values, got {}",
            signal.len(),
            signal.len() + 1,
            values.len()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Domain(format!("gae lambda must lie in [0, 1], got {lambda}")));
    }
    let mut adv = vec![0.0; signal.len()];
    let mut running = 0.0;
    for t in (0..signal.len()).rev() {
        let delta = signal[t] + gamma * values[t + 1] - values[t];
        running = delta + gamma * lambda * running;
        adv[t] = running;
    }
    Ok(adv)
}

/// Tabular value estimates for the reward and each cost, on the per-step
/// (unnormalised) scale used by the sampled pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub reward: Vec<f64>,
    pub costs: Vec<Vec<f64>>,
}

impl ValueTables {
    pub fn zeros(n_states: usize, n_constraints: usize) -> Self {
        Self {
            reward: vec![0.0; n_states],
            costs: vec![vec![0.0; n_states]; n_constraints],
        }
    }
}

/// Least-squares tabular fit: the per-state mean of the targets. States that
/// never occur keep their previous estimate.
pub fn fit_table(states: &[usize], targets: &[f64], previous: &[f64]) -> Result<Vec<f64>> {
    if states.len() != targets.len() {
        return Err(Error::Dimension("fit: states and targets differ in length".into()));
    }
    let mut sum = vec![0.0; previous.len()];
    let mut count = vec![0usize; previous.len()];
    for (&s, &y) in states.iter().zip(targets) {
        let slot = sum.get_mut(s).ok_or_else(|| {
            Error::Dimension(format!("state {s} outside a table of {}", previous.len()))
        })?;
        *slot += y;
        count[s] += 1;
    }
    Ok(previous
        .iter()
        .enumerate()
        .map(|(s, &old)| if count[s] > 0 { sum[s] / count[s] as f64 } else { old })
        .collect())
}
