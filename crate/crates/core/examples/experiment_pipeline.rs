//! Runs a small experiment from an inline configuration, then aggregates the
//! CSVs and draws the SVG curves, all inside a temporary directory.

use c3po_lab::harness::{aggregate, plot, run_config, ExperimentConfig, RunOptions};

const CONFIG: &str = r#"
[experiment]
name = "pipeline"
seeds = [0, 1, 2, 3]
algorithms = ["c3po", "p3o", "ppo_lag", "ppo"]
mode = "exact"
output_dir = "runs"

[[envs]]
name = "gridworld"
spec = "gridworld"

[train]
learning_rate = 0.01
steps_per_iter = 1000
total_steps = 100000
init_noise = 0.1
"#;

fn main() -> c3po_lab::Result<()> {
    let dir = std::env::temp_dir().join(format!("c3po-pipeline-{}", std::process::id()));
    let config = ExperimentConfig::parse(CONFIG)?;
    let summary = run_config(
        &config,
        &RunOptions {
            seeds: None,
            output_root: Some(dir.clone()),
        },
    )?;
    println!("{} runs written to {}", summary.written.len(), summary.output_dir.display());

    let pattern = format!("{}/*.csv", summary.output_dir.display());
    print!("\n{}", aggregate(&pattern, None)?);
    for svg in plot(&pattern, &dir.join("plots"))? {
        println!("plot: {}", svg.display());
    }

    let again = run_config(&config, &RunOptions { seeds: None, output_root: Some(dir.clone()) })?;
    println!("\nsecond run resumed: {} written, {} kept", again.written.len(), again.skipped.len());
    Ok(())
}
