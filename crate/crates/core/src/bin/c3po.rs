use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use c3po_lab::central_path::{trace_path, CentralPathPoint};
use c3po_lab::harness::{self, EnvSpec, RunOptions};
use c3po_lab::lp::solve_cmdp;
use c3po_lab::Error;

#[derive(Parser)]
#[command(name = "c3po", version, about = "Constrained policy optimization on finite CMDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (environment, algorithm, seed) of an experiment file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds replacing the configured ones.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
    },
    /// Solve the occupancy LP exactly and print the solution.
    Oracle {
        /// Built-in name, `name:key=value,...`, or a CMDP text file.
        #[arg(long)]
        env: String,
    },
    /// Trace the central path and write it as CSV.
    CentralPath {
        #[arg(long)]
        env: String,
        /// Comma-separated, strictly increasing values of t.
        #[arg(long, value_delimiter = ',', required = true)]
        t_grid: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarise metrics files by interquartile mean.
    Aggregate {
        #[arg(long)]
        glob: String,
        /// Threshold replacing the one recorded in the files.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Draw return and cost curves as SVG.
    Plot {
        #[arg(long)]
        glob: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn path_csv(points: &[CentralPathPoint]) -> String {
    let mut s = String::from("t,objective");
    let Some(first) = points.first() else {
        s.push('\n');
        return s;
    };
    for i in 0..first.feasibility_slack.len() {
        let _ = write!(s, ",slack_{i}");
    }
    let (n_s, n_a) = (first.policy_t.n_states(), first.policy_t.n_actions());
    for st in 0..n_s {
        for a in 0..n_a {
            let _ = write!(s, ",pi_{st}_{a}");
        }
    }
    s.push('\n');
    for p in points {
        let _ = write!(s, "{:?},{:?}", p.t, p.objective_value);
        for x in &p.feasibility_slack {
            let _ = write!(s, ",{x:?}");
        }
        for x in p.policy_t.probabilities() {
            let _ = write!(s, ",{x:?}");
        }
        s.push('\n');
    }
    s
}

fn run(cli: Cli) -> c3po_lab::Result<()> {
    match cli.command {
        Command::Train { config, seeds } => {
            let summary = harness::run(
                &config,
                &RunOptions {
                    seeds,
                    output_root: None,
                },
            )?;
            for (file, t) in &summary.elapsed {
                println!("wrote {} ({:.1}s)", file.display(), t.as_secs_f64());
            }
            for file in &summary.skipped {
                println!("kept {}", file.display());
            }
        }
        Command::Oracle { env } => {
            let cmdp = harness::make_env(&EnvSpec::parse(&env)?)?;
            let solution = solve_cmdp(&cmdp)?;
            print!("{}", solution.report());
            if !solution.is_optimal() {
                return Err(Error::Infeasible);
            }
        }
        Command::CentralPath {
            env,
            t_grid,
            beta,
            out,
        } => {
            let cmdp = harness::make_env(&EnvSpec::parse(&env)?)?;
            let text = path_csv(&trace_path(&cmdp, &t_grid, beta)?);
            match out {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
        }
        Command::Aggregate { glob, threshold } => {
            print!("{}", harness::aggregate(&glob, threshold)?);
        }
        Command::Plot { glob, out } => {
            for file in harness::plot(&glob, &out)? {
                println!("wrote {}", file.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) | Error::Parse { .. } | Error::Schema { .. } => 2,
                Error::Infeasible | Error::NoInteriorPoint => 3,
                _ => 1,
            })
        }
    }
}
