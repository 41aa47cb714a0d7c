//! Environments, experiment orchestration, metrics files, aggregation and
//! plots.

mod aggregate;
mod env;
mod experiment;
mod metrics;
mod plot;

pub use aggregate::{aggregate, aggregate_records, iqm, AggregateReport, AlgorithmSummary, SeedFinal};
pub use env::{builtin, make_env, random_cmdp, EnvSpec, BUILTIN_ENVS, DETOUR_LAYOUT, HAZARD_LAYOUT};
pub use experiment::{
    default_t_grid, run, run_config, run_single, EnvEntry, EnvSource, ExperimentConfig,
    ExperimentSection, PathAnchor, PathSection, RunOptions, RunSummary, MANIFEST_NAME,
    OUTPUT_ROOT_VAR,
};
pub use metrics::{csv_name, parse_csv, read_csv, read_glob, to_csv_string, write_csv, MetricsRecord, CSV_HEADER};
pub use plot::{plot, render_svg, series, Metric, Series};
