use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{path_gain_linear, path_gain_linear_literal, PathLossParams};
use crate::error::{Result, SimError};
use crate::geometry::{wavelength_from_carrier, GeometryConfig};
use crate::imin::IminConfig;
use crate::rmax::RmaxConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Rate maximization from random phases and equal power.
    RmaxRandom,
    Imin,
    /// Rate maximization started from the interference-minimizing solution.
    Hybrid,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::RmaxRandom, Algorithm::Imin, Algorithm::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::RmaxRandom => "rmax-random",
            Algorithm::Imin => "imin",
            Algorithm::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| SimError::Config(format!("unknown algorithm '{s}' (expected rmax-random, imin or hybrid)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    /// `L = K`, thickness fixed.
    Layers,
    /// `D_tx = D_rx`, layer counts fixed.
    Thickness,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Layers => "layers",
            SweepAxis::Thickness => "thickness",
        }
    }
}

/// Everything that determines a run. Loaded from JSON; missing keys take the
/// desk-scale defaults and unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub carrier_hz: f64,
    pub streams: usize,
    pub tx_atoms: usize,
    pub rx_atoms: usize,
    pub tx_layers: usize,
    pub rx_layers: usize,
    /// `(rows, cols)` for atom counts that are not perfect squares.
    pub tx_grid: Option<(usize, usize)>,
    pub rx_grid: Option<(usize, usize)>,
    pub tx_thickness_m: f64,
    pub rx_thickness_m: f64,
    pub link_distance_m: f64,
    pub reference_distance_m: f64,
    pub a1: f64,
    pub a2: f64,
    /// Use the path-loss expression with the signs as printed instead of the
    /// attenuation form.
    pub pathloss_literal: bool,
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub rmax: RmaxConfig,
    pub imin: IminConfig,
    pub layer_axis: Vec<usize>,
    pub thickness_axis: Vec<f64>,
    pub output: Option<PathBuf>,
    /// Write measured wall times; off by default so outputs are byte-reproducible.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 6.0e9,
            streams: 4,
            tx_atoms: 25,
            rx_atoms: 25,
            tx_layers: 4,
            rx_layers: 4,
            tx_grid: None,
            rx_grid: None,
            tx_thickness_m: 0.1,
            rx_thickness_m: 0.1,
            link_distance_m: 240.0,
            reference_distance_m: 1.0,
            a1: 2.0,
            a2: 3.5,
            pathloss_literal: false,
            tx_power_dbm: 20.0,
            noise_dbm: -110.0,
            trials: 20,
            seed: 2024,
            algorithms: Algorithm::ALL.to_vec(),
            rmax: RmaxConfig::default(),
            imin: IminConfig::default(),
            layer_axis: (1..=6).collect(),
            thickness_axis: vec![0.02, 0.05, 0.1, 0.2],
            output: None,
            record_wall_time: false,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

impl ExperimentConfig {
    /// Desk-scale defaults: `N = M = 25`, `S = 4`, 20 trials.
    pub fn desk() -> Self {
        Self::default()
    }

    /// The full-size setting: `N = M = 100`, `L = K = 7`, 100 trials.
    pub fn full_scale() -> Self {
        Self {
            tx_atoms: 100,
            rx_atoms: 100,
            tx_layers: 7,
            rx_layers: 7,
            trials: 100,
            layer_axis: (1..=10).collect(),
            thickness_axis: vec![0.02, 0.05, 0.1, 0.15, 0.2, 0.3],
            ..Self::default()
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("carrier_hz", self.carrier_hz),
            ("tx_thickness_m", self.tx_thickness_m),
            ("rx_thickness_m", self.rx_thickness_m),
            ("link_distance_m", self.link_distance_m),
            ("reference_distance_m", self.reference_distance_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let counts = [
            ("streams", self.streams),
            ("tx_atoms", self.tx_atoms),
            ("rx_atoms", self.rx_atoms),
            ("tx_layers", self.tx_layers),
            ("rx_layers", self.rx_layers),
            ("trials", self.trials),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(SimError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.a1 < 0.0 || self.a2 < 0.0 {
            return Err(SimError::Config("path-loss exponents must be non-negative".into()));
        }
        if !self.tx_power_dbm.is_finite() || !self.noise_dbm.is_finite() {
            return Err(SimError::Config("powers must be finite".into()));
        }
        if self.algorithms.is_empty() {
            return Err(SimError::Config("no algorithms selected".into()));
        }
        if self.layer_axis.contains(&0) {
            return Err(SimError::Config("layer axis values must be positive".into()));
        }
        if self.thickness_axis.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(SimError::Config("thickness axis values must be positive".into()));
        }
        Ok(())
    }

    pub fn wavelength(&self) -> f64 {
        wavelength_from_carrier(self.carrier_hz)
    }

    pub fn tx_power_watts(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    pub fn noise_watts(&self) -> f64 {
        dbm_to_watts(self.noise_dbm)
    }

    /// Linear path gain of the SIM-to-SIM channel.
    pub fn path_gain(&self) -> Result<f64> {
        let params = PathLossParams {
            reference_distance: self.reference_distance_m,
            distance: self.link_distance_m,
            a1: self.a1,
            a2: self.a2,
            wavelength: self.wavelength(),
        };
        if self.pathloss_literal {
            path_gain_linear_literal(&params)
        } else {
            path_gain_linear(&params)
        }
    }

    pub fn geometry(&self) -> GeometryConfig {
        GeometryConfig {
            streams: self.streams,
            tx_atoms: self.tx_atoms,
            rx_atoms: self.rx_atoms,
            tx_layers: self.tx_layers,
            rx_layers: self.rx_layers,
            wavelength: self.wavelength(),
            atom_area: None,
            tx_thickness: self.tx_thickness_m,
            rx_thickness: self.rx_thickness_m,
            link_distance: self.link_distance_m,
            tx_grid: self.tx_grid,
            rx_grid: self.rx_grid,
        }
    }

    /// Copy with `L = K = layers`.
    pub fn with_layers(&self, layers: usize) -> Self {
        Self { tx_layers: layers, rx_layers: layers, ..self.clone() }
    }

    /// Copy with `D_tx = D_rx = thickness`.
    pub fn with_thickness(&self, thickness: f64) -> Self {
        Self { tx_thickness_m: thickness, rx_thickness_m: thickness, ..self.clone() }
    }
}
