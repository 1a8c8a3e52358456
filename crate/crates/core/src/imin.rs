//! Interference minimization by cyclic closed-form meta-atom updates,
//! followed by water-filling on the direct-path gains.
//!
//! For one layer with the other layers fixed, the off-diagonal part of the
//! effective channel is linear in the layer's coefficients:
//! `offdiag(H) = E theta = sum_n e_n theta_n`, where column `n` stacks
//! `left[s,n] right[n,j]` over the ordered pairs `s != j` (column-major order
//! of `vec(H)`, diagonal skipped). On the TX side `left = V_rx H_tilde V^{l+}`
//! and `right = V^{l-} Omega^1`; on the RX side `left = Omega^1 V^{k-}` and
//! `right = V^{k+} H_tilde V_tx`. Minimizing `||E theta||^2` over one
//! coefficient has the closed form `theta_n = exp(j arg(-e_n^H r_n))` with
//! `r_n` the sum over the other columns.

use std::time::Instant;

use crate::cascade::{
    interference_power, prefix_products, rate_unchecked, rx_cascade, suffix_products, tx_cascade, PhaseConfig, PowerVector, Side,
};
use crate::error::{Result, SimError};
use crate::linalg::{scale_cols, scale_rows, CMat, CVec, C64};
use crate::power::waterfill_power;
use crate::rmax::Link;
use crate::solution::{Solution, TraceRecord};

/// Columns `e_n` of one layer plus the running sum `E theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceBasis {
    /// `S(S-1) x n`.
    pub columns: CMat,
    pub theta: Vec<C64>,
    partial: CVec,
}

/// `(s, j)` pairs with `s != j` in column-major order of an `S x S` matrix.
pub fn off_diagonal_pairs(streams: usize) -> Vec<(usize, usize)> {
    (0..streams)
        .flat_map(|j| (0..streams).filter(move |&s| s != j).map(move |s| (s, j)))
        .collect()
}

impl InterferenceBasis {
    /// Build the basis from the layer factors `left` (`S x n`) and `right`
    /// (`n x S`) by direct indexing.
    pub fn from_factors(left: &CMat, right: &CMat, theta: &[C64]) -> Self {
        let pairs = off_diagonal_pairs(left.nrows());
        let atoms = left.ncols();
        let columns = CMat::from_fn(pairs.len(), atoms, |row, n| {
            let (s, j) = pairs[row];
            left[(s, n)] * right[(n, j)]
        });
        let partial = &columns * CVec::from_column_slice(theta);
        Self { columns, theta: theta.to_vec(), partial }
    }

    /// Current `E theta`.
    pub fn residual(&self) -> &CVec {
        &self.partial
    }

    /// `||E theta||^2`, the interference for the current coefficients.
    pub fn objective(&self) -> f64 {
        self.partial.norm_squared()
    }

    /// Recompute the running sum from scratch.
    pub fn refresh(&mut self) {
        self.partial = &self.columns * CVec::from_column_slice(&self.theta);
    }

    /// Interference with coefficient `n` replaced by `value`.
    pub fn objective_with(&self, n: usize, value: C64) -> f64 {
        let col = self.columns.column(n);
        (&self.partial + col * (value - self.theta[n])).norm_squared()
    }

    /// Set coefficient `n` to its exact minimizer and return it. If `e_n` is
    /// orthogonal to the other columns' sum every phase is optimal and the
    /// coefficient is left alone.
    pub fn update_meta_atom(&mut self, n: usize) -> C64 {
        let col = self.columns.column(n);
        let others = &self.partial - col * self.theta[n];
        let coupling = col.dotc(&others);
        let scale = col.norm() * others.norm();
        if coupling.norm() <= 1e-14 * scale || coupling.norm() == 0.0 {
            return self.theta[n];
        }
        let next = -coupling / coupling.norm();
        self.partial = others + col * next;
        self.theta[n] = next;
        next
    }
}

/// Interference basis of one layer (1-based) computed from fresh partial
/// cascades at the current phases.
pub fn interference_columns(link: Link<'_>, phases: &PhaseConfig, side: Side, layer: usize) -> Result<InterferenceBasis> {
    let props = link.props;
    let layers = phases.layers(side);
    if layer == 0 || layer > layers {
        return Err(SimError::Index { context: "interference_columns", index: layer, max: layers });
    }
    let h_t = link.h_tilde();
    let (left, right) = match side {
        Side::Tx => {
            let theta = &phases.theta_tx;
            let minus = &prefix_products(&props.omega_tx, theta, Side::Tx)[layer - 1];
            let plus = &suffix_products(&props.omega_tx, theta, Side::Tx)[layer - 1];
            let v_rx = rx_cascade(&props.omega_rx, &phases.theta_rx)?;
            (v_rx * h_t * plus, minus * &props.omega_tx[0])
        }
        Side::Rx => {
            let theta = &phases.theta_rx;
            let minus = &prefix_products(&props.omega_rx, theta, Side::Rx)[layer - 1];
            let plus = &suffix_products(&props.omega_rx, theta, Side::Rx)[layer - 1];
            let v_tx = tx_cascade(&props.omega_tx, &phases.theta_tx)?;
            (&props.omega_rx[0] * minus, plus * (h_t * v_tx))
        }
    };
    Ok(InterferenceBasis::from_factors(&left, &right, phases.block(side, layer)))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IminConfig {
    pub max_sweeps: usize,
    /// Stop when one sweep lowers the interference by less than this fraction.
    pub tolerance: f64,
    /// Keep the interference after every single update in the solution.
    pub record_updates: bool,
}

impl Default for IminConfig {
    fn default() -> Self {
        Self { max_sweeps: 200, tolerance: 1e-8, record_updates: false }
    }
}

/// Update every atom of every layer of one side, layers in order.
fn sweep_side(link: Link<'_>, phases: &mut PhaseConfig, side: Side, log: &mut Option<Vec<f64>>) -> Result<()> {
    let props = link.props;
    let layers = phases.layers(side);
    let h_t = link.h_tilde();
    // layers after the current one are untouched until the pass reaches them
    let (omega, frozen) = match side {
        Side::Tx => (&props.omega_tx, rx_cascade(&props.omega_rx, &phases.theta_rx)? * h_t),
        Side::Rx => (&props.omega_rx, h_t * tx_cascade(&props.omega_tx, &phases.theta_tx)?),
    };
    let suffixes = suffix_products(omega, phases.theta(side), side);
    let atoms = phases.atoms(side);
    let mut prefix = CMat::identity(atoms, atoms);

    for layer in 1..=layers {
        if layer > 1 {
            let prev = phases.block(side, layer - 1);
            prefix = match side {
                Side::Tx => &omega[layer - 1] * scale_rows(prefix, prev),
                Side::Rx => scale_cols(prefix, prev) * &omega[layer - 1],
            };
        }
        let plus = &suffixes[layer - 1];
        let (left, right) = match side {
            Side::Tx => (&frozen * plus, &prefix * &omega[0]),
            Side::Rx => (&omega[0] * &prefix, plus * &frozen),
        };
        let mut basis = InterferenceBasis::from_factors(&left, &right, phases.block(side, layer));
        for n in 0..atoms {
            basis.update_meta_atom(n);
            if let Some(log) = log.as_mut() {
                log.push(basis.objective());
            }
        }
        phases.block_mut(side, layer).copy_from_slice(&basis.theta);
    }
    Ok(())
}

fn waterfilled(h: &CMat, total: f64, noise: f64) -> Result<PowerVector> {
    let gains: Vec<f64> = (0..h.nrows()).map(|s| h[(s, s)].norm_sqr()).collect();
    if gains.iter().all(|&g| g == 0.0) {
        return Ok(PowerVector::equal(h.nrows(), total, noise));
    }
    waterfill_power(&gains, total, noise)
}

/// Coordinate descent on the interference from `init`, TX layers first then
/// RX layers in each sweep, followed by water-filling that treats the
/// remaining interference as absent. The reported rate counts it.
pub fn run_imin(link: Link<'_>, init: &PhaseConfig, total: f64, noise: f64, config: &IminConfig) -> Result<Solution> {
    let started = Instant::now();
    if !(total > 0.0) || !(noise > 0.0) {
        return Err(SimError::Domain("power budget and noise must be positive".into()));
    }
    let mut phases = init.clone();
    let mut h = link.effective(&phases)?;
    let mut g = interference_power(&h);
    let mut log = config.record_updates.then(|| vec![g]);
    let power = waterfilled(&h, total, noise)?;
    let mut trace = vec![TraceRecord {
        iter: 0,
        rate: rate_unchecked(&h, &power.p, noise),
        grad_norm_tx: f64::NAN,
        grad_norm_rx: f64::NAN,
        g,
        wall_ms: 0.0,
    }];

    let mut sweeps = 0;
    while sweeps < config.max_sweeps && g > 0.0 {
        sweeps += 1;
        sweep_side(link, &mut phases, Side::Tx, &mut log)?;
        sweep_side(link, &mut phases, Side::Rx, &mut log)?;
        h = link.effective(&phases)?;
        let next = interference_power(&h);
        let power = waterfilled(&h, total, noise)?;
        trace.push(TraceRecord {
            iter: sweeps,
            rate: rate_unchecked(&h, &power.p, noise),
            grad_norm_tx: f64::NAN,
            grad_norm_rx: f64::NAN,
            g: next,
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        let drop = g - next;
        g = next;
        if drop <= config.tolerance * (g + drop) {
            break;
        }
    }

    let power = waterfilled(&h, total, noise)?;
    let rate = rate_unchecked(&h, &power.p, noise);
    Ok(Solution {
        phases,
        power,
        rate,
        interference: g,
        outer_iters: sweeps,
        trace,
        step_rates: Vec::new(),
        update_interference: log.unwrap_or_default(),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
