//! Policy-update engines: C3PO, P3O, PPO-Lagrangian and PPO.
//!
//! All four share one training loop and differ only in the loss minimised in
//! the inner epochs (and, for the Lagrangian method, a projected dual step
//! taken before the policy update). Each runs on sampled batches or, for
//! testing, on the exact full-information batch of the current policy.

mod adam;
mod config;
mod loss;
mod trainer;

pub use adam::Adam;
pub use config::{Algorithm, TrainConfig, BENCHMARK_THRESHOLD};
pub use loss::{
    budgets, c3po_loss, dual_step, lagrangian_loss, objective_and_gradient, objective_value,
    p3o_loss, ppo_loss, Objective,
};
pub use trainer::{
    splitmix64, train, train_exact, Mode, Trainer, UpdateReport, MAX_EXACT_PAIRS,
};
