//! Command-line front end: configuration files, output writers and the
//! `twogrid` subcommands.

pub mod app;
pub mod config;
pub mod output;
pub mod vtk;

pub use app::{run, AppError, EXIT_INVALID, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
pub use config::{
    parse_config, parse_mandel_config, ConfigError, MeshSource, OutputConfig, Preset, RunConfig,
};
pub use vtk::{vtk_string, write_vtk, VtkError, VtkFields};
