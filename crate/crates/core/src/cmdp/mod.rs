//! Finite constrained Markov decision processes and their exact evaluation.
//!
//! Values follow the `(1 - γ)`-normalised convention throughout: a constant
//! reward of one has value one, and occupancy measures are probability
//! distributions over state-action pairs. Thresholds live on the same scale.

mod eval;
mod policy;
pub mod text;

pub use eval::{
    evaluate, expected_return, expected_return_via_occupancy, extract_policy, occupancy_from_probs,
    policy_advantage, return_gradient, state_occupancy, EvalTables, ExtractedPolicy,
    OccupancyMeasure,
};
pub use policy::TabularSoftmaxPolicy;

use crate::error::{Error, Result};

/// Tolerance on probability rows (transition rows and the initial distribution).
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;

/// Which per-step signal of the CMDP a computation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Signal {
    Reward,
    Cost(usize),
}

/// A finite CMDP with `m >= 1` expected-cost constraints.
///
/// Tables are dense and row-major: `transition[(s * A + a) * S + s']`,
/// `reward[s * A + a]`, `costs[i][s * A + a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cmdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    costs: Vec<Vec<f64>>,
    thresholds: Vec<f64>,
    discount: f64,
    initial: Vec<f64>,
}

impl Cmdp {
    pub fn builder(n_states: usize, n_actions: usize) -> CmdpBuilder {
        CmdpBuilder::new(n_states, n_actions)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Number of state-action pairs.
    pub fn n_pairs(&self) -> usize {
        self.n_states * self.n_actions
    }

    pub fn n_constraints(&self) -> usize {
        self.costs.len()
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self) -> &[f64] {
        &self.transition
    }

    /// Next-state distribution for `(s, a)`.
    pub fn next_states(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn reward(&self) -> &[f64] {
        &self.reward
    }

    pub fn cost(&self, i: usize) -> &[f64] {
        &self.costs[i]
    }

    pub fn costs(&self) -> &[Vec<f64>] {
        &self.costs
    }

    pub fn threshold(&self, i: usize) -> f64 {
        self.thresholds[i]
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// The per-pair table of a signal.
    pub fn signal(&self, signal: Signal) -> Result<&[f64]> {
        match signal {
            Signal::Reward => Ok(&self.reward),
            Signal::Cost(i) if i < self.costs.len() => Ok(&self.costs[i]),
            Signal::Cost(i) => Err(Error::Dimension(format!(
                "cost index {i} out of range for {} constraints",
                self.costs.len()
            ))),
        }
    }

    /// Copy of this CMDP with different thresholds.
    pub fn with_thresholds(&self, thresholds: Vec<f64>) -> Result<Cmdp> {
        if thresholds.len() != self.costs.len() {
            return Err(Error::Dimension(format!(
                "{} thresholds for {} constraints",
                thresholds.len(),
                self.costs.len()
            )));
        }
        if thresholds.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidCmdp("thresholds must be finite".into()));
        }
        Ok(Cmdp {
            thresholds,
            ..self.clone()
        })
    }
}

/// Incremental constructor for [`Cmdp`]; all invariants are checked in
/// [`CmdpBuilder::build`].
#[derive(Debug, Clone)]
pub struct CmdpBuilder {
    n_states: usize,
    n_actions: usize,
    transition: Option<Vec<f64>>,
    reward: Option<Vec<f64>>,
    costs: Vec<Vec<f64>>,
    thresholds: Vec<f64>,
    discount: f64,
    initial: Option<Vec<f64>>,
}

impl CmdpBuilder {
    pub fn new(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            transition: None,
            reward: None,
            costs: Vec::new(),
            thresholds: Vec::new(),
            discount: 0.9,
            initial: None,
        }
    }

    pub fn discount(mut self, gamma: f64) -> Self {
        self.discount = gamma;
        self
    }

    pub fn initial(mut self, mu: Vec<f64>) -> Self {
        self.initial = Some(mu);
        self
    }

    /// Row-major `[(s * A + a) * S + s']` transition table.
    pub fn transition(mut self, table: Vec<f64>) -> Self {
        self.transition = Some(table);
        self
    }

    pub fn reward(mut self, table: Vec<f64>) -> Self {
        self.reward = Some(table);
        self
    }

    /// Adds one cost table together with its threshold.
    pub fn constraint(mut self, cost: Vec<f64>, threshold: f64) -> Self {
        self.costs.push(cost);
        self.thresholds.push(threshold);
        self
    }

    pub fn build(self) -> Result<Cmdp> {
        let (s_n, a_n) = (self.n_states, self.n_actions);
        if s_n == 0 || a_n == 0 {
            return Err(Error::InvalidCmdp(
                "need at least one state and one action".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(Error::InvalidCmdp(format!(
                "discount {} outside [0, 1)",
                self.discount
            )));
        }
        let transition = self
            .transition
            .ok_or_else(|| Error::InvalidCmdp("missing transition table".into()))?;
        if transition.len() != s_n * a_n * s_n {
            return Err(Error::Dimension(format!(
                "transition table has {} entries, expected {}",
                transition.len(),
                s_n * a_n * s_n
            )));
        }
        for (row, probs) in transition.chunks(s_n).enumerate() {
            check_distribution(probs)
                .map_err(|e| Error::InvalidCmdp(format!("transition row {row}: {e}")))?;
        }
        let initial = self
            .initial
            .ok_or_else(|| Error::InvalidCmdp("missing initial distribution".into()))?;
        if initial.len() != s_n {
            return Err(Error::Dimension(format!(
                "initial distribution has {} entries, expected {s_n}",
                initial.len()
            )));
        }
        check_distribution(&initial)
            .map_err(|e| Error::InvalidCmdp(format!("initial distribution: {e}")))?;
        let reward = self
            .reward
            .ok_or_else(|| Error::InvalidCmdp("missing reward table".into()))?;
        check_table("reward", &reward, s_n * a_n)?;
        if self.costs.is_empty() {
            return Err(Error::InvalidCmdp("at least one constraint required".into()));
        }
        for (i, cost) in self.costs.iter().enumerate() {
            check_table(&format!("cost {i}"), cost, s_n * a_n)?;
        }
        if self.thresholds.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidCmdp("thresholds must be finite".into()));
        }
        Ok(Cmdp {
            n_states: s_n,
            n_actions: a_n,
            transition,
            reward,
            costs: self.costs,
            thresholds: self.thresholds,
            discount: self.discount,
            initial,
        })
    }
}

fn check_distribution(p: &[f64]) -> std::result::Result<(), String> {
    if let Some(x) = p.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(format!("entry {x} is negative or not finite"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(format!("sums to {total}"));
    }
    Ok(())
}

fn check_table(name: &str, table: &[f64], len: usize) -> Result<()> {
    if table.len() != len {
        return Err(Error::Dimension(format!(
            "{name} table has {} entries, expected {len}",
            table.len()
        )));
    }
    if table.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidCmdp(format!("{name} table has non-finite entries")));
    }
    Ok(())
}
