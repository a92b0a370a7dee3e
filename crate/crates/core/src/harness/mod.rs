//! Scenario configuration, presets, Monte-Carlo sweeps and CSV output.

pub mod config;
pub mod csv_out;
pub mod presets;
pub mod sweep;

pub use config::{
    AngleConfig, DeltaMode, GammaSpec, ModeSelection, NRandRule, NRandSpec, RunMode,
    ScenarioConfig, SweepAxis,
};
pub use presets::{preset, PresetName, Scale};
pub use sweep::{
    aggregate, beam_study, correlation_study, realization_channels, run_realization, run_sweep,
    AggregateRow, BeamPatterns, RunFailure, RunRow, SweepResult,
};
