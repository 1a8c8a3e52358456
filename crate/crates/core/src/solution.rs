//! Optimizer output shared by both algorithms and the harness.

use crate::cascade::{PhaseConfig, PowerVector};

/// One outer iteration (RMax) or one full sweep (IMin).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub rate: f64,
    pub grad_norm_tx: f64,
    pub grad_norm_rx: f64,
    /// Inter-stream interference at this iterate.
    pub g: f64,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub phases: PhaseConfig,
    pub power: PowerVector,
    /// Achievable rate at `phases` and `power`, interference included.
    pub rate: f64,
    pub interference: f64,
    /// Outer AO iterations (RMax) or sweeps (IMin) actually run.
    pub outer_iters: usize,
    pub trace: Vec<TraceRecord>,
    /// Rate after every sub-step: the start point, then one entry per
    /// TX update, RX update and power update.
    pub step_rates: Vec<f64>,
    /// Interference after every single coordinate update (IMin, when recorded).
    pub update_interference: Vec<f64>,
    pub wall_ms: f64,
}
