//! Exact-mode C3PO, P3O, PPO-Lagrangian and PPO on the hazard gridworld from
//! the same initial policy: final values and how often each violated the
//! constraint.

use c3po_lab::algorithms::{train_exact, Algorithm, TrainConfig};
use c3po_lab::harness::{builtin, make_env};
use c3po_lab::lp::solve_cmdp;

fn main() -> c3po_lab::Result<()> {
    let cmdp = make_env(&builtin("gridworld")?)?;
    let lp = solve_cmdp(&cmdp)?;
    println!(
        "LP optimum {:.4} at cost {:.4} (d = {})\n",
        lp.optimal_value,
        cmdp.threshold(0) - lp.slacks[0],
        cmdp.threshold(0)
    );
    println!("{:<8} {:>8} {:>8} {:>10} {:>8}", "algo", "return", "cost", "violating", "lambda");
    for algorithm in Algorithm::ALL {
        let config = TrainConfig {
            algorithm,
            learning_rate: 0.01,
            steps_per_iter: 1000,
            total_steps: 200_000,
            ..TrainConfig::default()
        };
        let (_, reports) = train_exact(&cmdp, &config)?;
        let last = reports.last().expect("at least one iteration");
        let violating = reports.iter().filter(|r| r.violates()).count() as f64 / reports.len() as f64;
        println!(
            "{:<8} {:>8.4} {:>8.4} {:>10.3} {:>8.3}",
            algorithm.name(),
            last.exact_return,
            last.exact_costs[0],
            violating,
            last.lambdas.first().copied().unwrap_or(0.0)
        );
    }
    Ok(())
}
