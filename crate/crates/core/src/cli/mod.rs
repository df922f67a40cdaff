//! Configuration, initial data, snapshot files and the command-line subcommands.

mod commands;
mod config;
mod snapshot;

pub use commands::{
    cmd_derivative_check, cmd_fit_cap, cmd_minkowski, cmd_run, cmd_static_check, fallback_hypotheses, Conservation,
    MinkowskiSummary, Report, RunSummary, StaticSummary, ANGLE_TOL, DERIVATIVE_TOL, ENERGY_INCREASE_TOL,
    MINKOWSKI_CONSTANT, STATIC_DRIFT_TOL, VOLUME_DRIFT_TOL,
};
pub use config::{
    build_initial, parse_config, AmbientConfig, BarrierConfig, GridConfig, InitialConfig, InitialKind, OutputConfig,
    ParsedConfig, RunConfig,
};
pub use snapshot::{format_snapshot, parse_snapshot, read_snapshot, snapshot_name, write_snapshot, SnapshotHeader};
