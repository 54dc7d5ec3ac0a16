//! Configuration-driven experiment runner: presets for the annulus shear
//! flow and the offset-disk body-force flow, reference and nudged runs,
//! comparisons and diagnostics.

pub mod commands;
pub mod config;
pub mod vtk;

pub use commands::{
    build_hierarchy, build_problem, cmd_analyze, cmd_compare, cmd_dns, cmd_mesh, cmd_nudge, load_reference, read_series,
    stats_table, summary_path, CliError, DnsReport, NudgeReport, MU_ZERO_WARNING,
};
pub use config::{load_config, parse_config, ConfigError, SimConfig};
pub use vtk::{read_snapshot, write_snapshot, Snapshot};
