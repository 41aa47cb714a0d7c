//! A laboratory for constrained reinforcement learning on finite CMDPs.
//!
//! The crate implements the central-path proximal policy optimization update
//! (a PPO loss plus a receding ReLU penalty on the cost surrogate) next to the
//! P3O, PPO-Lagrangian and plain PPO baselines, and checks all of them against
//! exact ground truth:
//!
//! - [`cmdp`]: finite CMDPs, tabular softmax policies, exact evaluation of
//!   values, advantages, occupancy measures and policy advantages.
//! - [`lp`]: the occupancy-measure linear program solved by a dense revised
//!   simplex method with exact duals.
//! - [`penalty`]: closed-form penalty mathematics (averaged KL, barrier
//!   divergence, Lambert W, the rate/radius correspondence, exact penalties).
//! - [`estimation`]: trajectory sampling, GAE-λ, tabular value fitting and the
//!   clipped surrogates.
//! - [`algorithms`]: the update engines, in sampled and full-information mode.
//! - [`central_path`]: the entropy + log-barrier central path of the LP and the
//!   distance of iterates to it.
//! - [`harness`]: environments, experiment runs, CSV metrics, IQM aggregation
//!   and SVG plots.
//!
//! Every capability has a runnable program under `examples/`.

pub mod algorithms;
pub mod central_path;
pub mod cmdp;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod lp;
pub mod penalty;

pub(crate) mod linalg;

pub use error::{Error, Result};
