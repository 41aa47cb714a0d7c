//! Sampling-based estimation: trajectories, GAE-λ, tabular value fitting and
//! the clipped surrogates entering every loss.
//!
//! The sampled pipeline works on the per-step scale: rewards and costs enter
//! GAE unnormalised, so advantages and value tables are those of the plain
//! discounted sum. Cost estimates from episodes use either the `(1-γ)`
//! normalised scale of the CMDP thresholds or undiscounted episode sums.

mod advantage;
mod batch;
mod sampling;
mod surrogate;

pub use advantage::{fit_table, gae, ValueTables};
pub use batch::{
    episode_cost_estimate, episode_return_estimate, fit_values, Batch, BudgetMode, EpisodeSummary,
};
pub use sampling::{default_horizon, sample, Step, Trajectory};
pub use surrogate::{clipped_cost_surrogate, clipped_reward_surrogate, surrogate_and_gradient};
