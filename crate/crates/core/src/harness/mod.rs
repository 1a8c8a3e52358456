//! Experiment orchestration: the hybrid pipeline, seeded Monte-Carlo sweeps
//! over layer count and thickness, CSV output and the self-check.

pub mod check;
pub mod config;
pub mod sweep;

pub use check::{self_check, self_check_with, CheckOutcome, SelfCheckReport};
pub use config::{dbm_to_watts, Algorithm, ExperimentConfig, SweepAxis};
pub use sweep::{
    derive_seed, run_hybrid, run_once, run_trial, sweep_layers, sweep_thickness, write_trace, AggregateRow, Scenario,
    SweepResult, SweepRow,
};
