use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::cascade::{PhaseConfig, PowerVector};
use crate::channel::{rng_for, sample_channel, ChannelRealization, CorrelationPair, RngPurpose};
use crate::error::{Result, SimError};
use crate::geometry::{build_geometry, build_propagation_matrices, PropagationSet};
use crate::imin::run_imin;
use crate::rmax::{run_rmax, Link};
use crate::solution::Solution;

use super::config::{Algorithm, ExperimentConfig, SweepAxis};

/// Seed of one trial. Only the axis position and trial index enter, so the
/// same cell of two different sweeps sees the same channel and start point.
pub fn derive_seed(base: u64, axis_index: usize, trial_index: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(base) ^ axis_index as u64) ^ trial_index as u64)
}

/// Geometry, propagation matrices and correlation shared by all trials of
/// one configuration.
pub struct Scenario {
    pub props: PropagationSet,
    pub correlation: CorrelationPair,
    pub path_gain: f64,
    pub total_power: f64,
    pub noise: f64,
}

impl Scenario {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let geom = build_geometry(&config.geometry())?;
        let props = build_propagation_matrices(&geom)?;
        // layers facing the channel: last TX layer, first RX layer
        let correlation = CorrelationPair::from_layouts(
            &geom.tx_atom_positions[geom.tx_layers - 1],
            &geom.rx_atom_positions[0],
            geom.wavelength,
        )?;
        Ok(Self {
            props,
            correlation,
            path_gain: config.path_gain()?,
            total_power: config.tx_power_watts(),
            noise: config.noise_watts(),
        })
    }

    pub fn channel(&self, seed: u64) -> ChannelRealization {
        sample_channel(seed, self.path_gain, &self.correlation)
    }

    /// Random start phases of a trial.
    pub fn initial_phases(&self, seed: u64) -> PhaseConfig {
        PhaseConfig::random(&self.props, &mut rng_for(seed, RngPurpose::PhaseInit))
    }
}

/// Interference minimization followed by rate maximization from its result.
/// Returns the final solution and the intermediate one.
pub fn run_hybrid(link: Link<'_>, init: &PhaseConfig, total: f64, noise: f64, config: &ExperimentConfig) -> Result<(Solution, Solution)> {
    let imin = run_imin(link, init, total, noise, &config.imin)?;
    let rmax = run_rmax(link, &imin.phases, &imin.power, &config.rmax)?;
    Ok((rmax, imin))
}

/// Results of all configured algorithms on one trial (same channel and
/// same random start for every algorithm).
pub fn run_trial(scenario: &Scenario, seed: u64, config: &ExperimentConfig) -> Result<Vec<(Algorithm, Solution)>> {
    let channel = scenario.channel(seed);
    let link = Link::new(&scenario.props, &channel)?;
    let init = scenario.initial_phases(seed);
    let (total, noise) = (scenario.total_power, scenario.noise);

    let mut out = Vec::with_capacity(config.algorithms.len());
    let mut imin_cached: Option<Solution> = None;
    let mut algos = config.algorithms.clone();
    algos.sort();
    algos.dedup();
    for algo in algos {
        let sol = match algo {
            Algorithm::RmaxRandom => {
                run_rmax(link, &init, &PowerVector::equal(scenario.props.streams(), total, noise), &config.rmax)?
            }
            Algorithm::Imin => {
                let sol = run_imin(link, &init, total, noise, &config.imin)?;
                imin_cached = Some(sol.clone());
                sol
            }
            Algorithm::Hybrid => {
                let started = Instant::now();
                let imin = match imin_cached.take() {
                    Some(sol) => sol,
                    None => run_imin(link, &init, total, noise, &config.imin)?,
                };
                let mut sol = run_rmax(link, &imin.phases, &imin.power, &config.rmax)?;
                sol.wall_ms += imin.wall_ms;
                sol.wall_ms = sol.wall_ms.max(started.elapsed().as_secs_f64() * 1e3);
                sol
            }
        };
        out.push((algo, sol));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub axis_name: String,
    pub axis_value: f64,
    pub trial: usize,
    pub seed: u64,
    pub algo: Algorithm,
    pub rate_bps_hz: f64,
    pub interference: f64,
    pub outer_iters: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub axis_value: f64,
    pub algo: Algorithm,
    pub mean_rate: f64,
    pub std_rate: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub axis_values: Vec<f64>,
    /// Sorted by axis position, trial, algorithm.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    /// Mean and sample standard deviation of the rate per axis value and
    /// algorithm, in axis order.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut out = Vec::new();
        for &value in &self.axis_values {
            for algo in Algorithm::ALL {
                let rates: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.axis_value == value && r.algo == algo)
                    .map(|r| r.rate_bps_hz)
                    .collect();
                if rates.is_empty() {
                    continue;
                }
                let n = rates.len();
                let mean = rates.iter().sum::<f64>() / n as f64;
                let var = if n > 1 {
                    rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                out.push(AggregateRow { axis_value: value, algo, mean_rate: mean, std_rate: var.sqrt(), n });
            }
        }
        out
    }

    /// Aggregate entry for one cell.
    pub fn cell(&self, axis_value: f64, algo: Algorithm) -> Option<AggregateRow> {
        self.aggregate().into_iter().find(|r| r.axis_value == axis_value && r.algo == algo)
    }

    /// Rates of one algorithm at one axis value, in trial order.
    pub fn rates(&self, axis_value: f64, algo: Algorithm) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.axis_value == axis_value && r.algo == algo)
            .map(|r| r.rate_bps_hz)
            .collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_rows(&self.rows, out)
    }

    pub fn write_aggregate_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in self.aggregate() {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write `<path>` with per-trial rows and `<stem>_aggregate.csv` next to it.
    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)?;
        self.write_aggregate_csv(std::fs::File::create(aggregate_path(path))?)
    }
}

pub fn aggregate_path(path: &Path) -> std::path::PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    path.with_file_name(format!("{stem}_aggregate.csv"))
}

pub fn write_rows<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

fn to_row(axis: &str, axis_value: f64, trial: usize, seed: u64, algo: Algorithm, sol: &Solution, timed: bool) -> SweepRow {
    SweepRow {
        axis_name: axis.to_string(),
        axis_value,
        trial,
        seed,
        algo,
        rate_bps_hz: sol.rate,
        interference: sol.interference,
        outer_iters: sol.outer_iters,
        wall_ms: if timed { sol.wall_ms } else { 0.0 },
    }
}

fn run_sweep(config: &ExperimentConfig, axis: SweepAxis, values: Vec<f64>, cells: Vec<ExperimentConfig>) -> Result<SweepResult> {
    let scenarios = cells.iter().map(Scenario::new).collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|a| (0..config.trials).map(move |t| (a, t))).collect();
    let results = jobs
        .into_par_iter()
        .map(|(a, t)| {
            let seed = derive_seed(config.seed, a, t);
            let sols = run_trial(&scenarios[a], seed, &cells[a])?;
            Ok(sols
                .iter()
                .map(|(algo, sol)| to_row(axis.as_str(), values[a], t, seed, *algo, sol, config.record_wall_time))
                .collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()?;
    // results arrive in job order, which is already (axis, trial); algorithms are sorted per trial
    let rows = results.into_iter().flatten().collect();
    Ok(SweepResult { axis, axis_values: values, rows })
}

/// Vary `L = K` over `config.layer_axis` at fixed thickness.
pub fn sweep_layers(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    if config.layer_axis.is_empty() {
        return Err(SimError::Config("layer axis is empty".into()));
    }
    let cells = config.layer_axis.iter().map(|&l| config.with_layers(l)).collect();
    let values = config.layer_axis.iter().map(|&l| l as f64).collect();
    run_sweep(config, SweepAxis::Layers, values, cells)
}

/// Vary `D_tx = D_rx` over `config.thickness_axis` at fixed layer counts.
pub fn sweep_thickness(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    if config.thickness_axis.is_empty() {
        return Err(SimError::Config("thickness axis is empty".into()));
    }
    let cells = config.thickness_axis.iter().map(|&d| config.with_thickness(d)).collect();
    run_sweep(config, SweepAxis::Thickness, config.thickness_axis.clone(), cells)
}

/// One trial of each configured algorithm at the configured sizes.
pub fn run_once(config: &ExperimentConfig) -> Result<Vec<(SweepRow, Solution)>> {
    let scenario = Scenario::new(config)?;
    let seed = derive_seed(config.seed, 0, 0);
    let sols = run_trial(&scenario, seed, config)?;
    Ok(sols
        .into_iter()
        .map(|(algo, sol)| {
            let row = to_row("layers", config.tx_layers as f64, 0, seed, algo, &sol, config.record_wall_time);
            (row, sol)
        })
        .collect())
}

#[derive(Serialize)]
struct TraceRow {
    iter: usize,
    rate: f64,
    grad_norm_tx: f64,
    grad_norm_rx: f64,
    g: f64,
}

/// One row per outer iteration (sweep for interference minimization).
pub fn write_trace<W: Write>(sol: &Solution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for t in &sol.trace {
        w.serialize(TraceRow { iter: t.iter, rate: t.rate, grad_norm_tx: t.grad_norm_tx, grad_norm_rx: t.grad_norm_rx, g: t.g })?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            streams: 2,
            tx_atoms: 4,
            rx_atoms: 4,
            tx_layers: 2,
            rx_layers: 2,
            trials: 2,
            layer_axis: vec![1, 2],
            thickness_axis: vec![0.05, 0.1],
            ..Default::default()
        }
    }

    #[test]
    fn seeds_differ_per_cell() {
        let a = derive_seed(1, 0, 0);
        assert_ne!(a, derive_seed(1, 0, 1));
        assert_ne!(a, derive_seed(1, 1, 0));
        assert_ne!(a, derive_seed(2, 0, 0));
        assert_eq!(a, derive_seed(1, 0, 0));
    }

    #[test]
    fn row_count_and_order() {
        let res = sweep_layers(&tiny()).unwrap();
        assert_eq!(res.rows.len(), 2 * 2 * 3);
        let keys: Vec<_> = res.rows.iter().map(|r| (r.axis_value as usize, r.trial, r.algo)).collect();
        let mut sorted = keys.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(keys, sorted);
        assert!(res.rows.iter().all(|r| r.wall_ms == 0.0 && r.axis_name == "layers"));
    }

    #[test]
    fn single_trial_has_zero_spread() {
        let cfg = ExperimentConfig { trials: 1, ..tiny() };
        let res = sweep_thickness(&cfg).unwrap();
        assert!(res.aggregate().iter().all(|r| r.std_rate == 0.0 && r.n == 1));
    }

    #[test]
    fn thickness_cell_matches_layer_cell() {
        let cfg = ExperimentConfig { layer_axis: vec![2], thickness_axis: vec![0.1], ..tiny() };
        let a = sweep_layers(&cfg).unwrap();
        let b = sweep_thickness(&cfg).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!((x.seed, x.algo, x.rate_bps_hz, x.interference), (y.seed, y.algo, y.rate_bps_hz, y.interference));
        }
    }

    #[test]
    fn hybrid_never_below_its_imin_stage() {
        let cfg = tiny();
        let scenario = Scenario::new(&cfg).unwrap();
        for t in 0..3 {
            let seed = derive_seed(7, 0, t);
            let channel = scenario.channel(seed);
            let link = Link::new(&scenario.props, &channel).unwrap();
            let init = scenario.initial_phases(seed);
            let (hybrid, imin) = run_hybrid(link, &init, scenario.total_power, scenario.noise, &cfg).unwrap();
            assert!(hybrid.rate >= imin.rate - 1e-12);
        }
    }
}
