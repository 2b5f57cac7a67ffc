//! Command-line harness for the neighborhood-discovery toolkit: generate
//! layouts, analyze them for deception geometry, and simulate protocol runs.

pub mod commands;
pub mod config;
pub mod svg;

pub use commands::{
    analyze_layout, cmd_analyze, cmd_generate, cmd_simulate, run_simulation, AnalysisReport,
    GeneratorKind, EXIT_CONDITION_VIOLATED, EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_OK,
    EXIT_PROPERTY_FAILED,
};
pub use config::{ConfigError, RunConfig};
