//! Traces the entropy + log-barrier central path of the gridworld LP and
//! measures how far exact-mode C3PO and PPO-Lagrangian iterates stay from it.

use c3po_lab::algorithms::{Algorithm, Mode, TrainConfig, Trainer};
use c3po_lab::central_path::{distance_to_path, trace_path_with, PathOptions};
use c3po_lab::harness::{builtin, make_env};
use c3po_lab::lp::solve_cmdp;

fn main() -> c3po_lab::Result<()> {
    let cmdp = make_env(&builtin("gridworld")?)?;
    let optimum = solve_cmdp(&cmdp)?.optimal_value;
    let grid: Vec<f64> = (-2..=6).map(|k| 10f64.powi(k)).collect();
    let path = trace_path_with(&cmdp, &grid, &PathOptions::default())?;
    println!("{:>8} {:>10} {:>10} {:>10} {:>7}", "t", "objective", "gap", "slack", "newton");
    for p in &path {
        println!(
            "{:>8.0e} {:>10.6} {:>10.2e} {:>10.2e} {:>7}",
            p.t,
            p.objective_value,
            optimum - p.objective_value,
            p.feasibility_slack[0],
            p.newton_steps
        );
    }

    println!("\nmean distance to the path anchored at each run's initial policy:");
    for algorithm in [Algorithm::C3po, Algorithm::PpoLag] {
        let config = TrainConfig {
            algorithm,
            learning_rate: 0.01,
            steps_per_iter: 1000,
            total_steps: 200_000,
            init_noise: 0.1,
            ..TrainConfig::default()
        };
        let mut trainer = Trainer::new(&cmdp, config, Mode::Exact)?;
        let opts = PathOptions {
            anchor: Some(trainer.policy().clone()),
            ..PathOptions::default()
        };
        let anchored = trace_path_with(&cmdp, &grid, &opts)?;
        let mut total = 0.0;
        while !trainer.is_done() {
            trainer.step()?;
            total += distance_to_path(trainer.policy(), &anchored)?;
        }
        println!("  {:<8} {:.5}", algorithm.name(), total / trainer.iteration() as f64);
    }
    Ok(())
}
