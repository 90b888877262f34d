//! Command-line front end: configuration, dispatch and report files. The
//! binary only parses flags and forwards here.

mod commands;
mod config;
mod output;

pub use commands::{execute, Outcome};
pub use config::{
    AnalysisSection, Command, ConfigError, FieldSection, KernelSection, OutputSection, RunConfig, ScalesSection,
    MAX_GEN_CUBES, MAX_OPERATOR_CUBES,
};
pub use output::{Format, META_SCHEMA};
