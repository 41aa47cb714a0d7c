//! Sampled-mode C3PO on the hazard gridworld with full-batch updates.
//!
//! `cargo run --release --example train_gridworld -- [seed]`

use c3po_lab::algorithms::{Algorithm, Mode, TrainConfig, Trainer};
use c3po_lab::harness::{builtin, make_env};
use c3po_lab::lp::solve_cmdp;

fn main() -> c3po_lab::Result<()> {
    let seed = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed"));
    let cmdp = make_env(&builtin("gridworld")?)?;
    let optimum = solve_cmdp(&cmdp)?.optimal_value;
    let config = TrainConfig {
        algorithm: Algorithm::C3po,
        learning_rate: 0.01,
        steps_per_iter: 20_000,
        minibatch_size: 20_000,
        total_steps: 2_000_000,
        refit_before_advantages: true,
        seed,
        ..TrainConfig::default()
    };
    let d = cmdp.threshold(0);
    println!("LP optimum {optimum:.4}, threshold {d}");
    let mut trainer = Trainer::new(&cmdp, config, Mode::Sampled)?;
    let mut violations = 0;
    while !trainer.is_done() {
        let r = trainer.step()?;
        violations += r.violates() as usize;
        if r.iteration % 10 == 9 {
            println!(
                "iter {:>3}  return {:.4}  cost {:.4}  budget {:+.4}  kappa {:>5.2}",
                r.iteration, r.exact_return, r.exact_costs[0], r.budgets[0], r.kappa
            );
        }
    }
    println!("violating iterations: {violations}/{}", trainer.iteration());
    Ok(())
}
