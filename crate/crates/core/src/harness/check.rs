use std::f64::consts::TAU;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cascade::{partial_cascades, rate_unchecked, rx_cascade, tx_cascade, PhaseConfig, PowerVector, Side};
use crate::channel::{rng_for, sample_channel, CorrelationPair, RngPurpose};
use crate::error::Result;
use crate::geometry::{build_geometry, build_propagation_matrices, GeometryConfig};
use crate::imin::InterferenceBasis;
use crate::linalg::{max_abs, phasor, CMat, CVec, C64};
use crate::power::{parallel_capacity, waterfill_power, wmmse_power, PowerProblem, WmmseConfig};
use crate::rmax::{euclidean_gradient_rx, euclidean_gradient_tx, Link};

/// Euclidean rate gradient of one side, as used by the optimizer.
pub type GradientFn<'f> = dyn Fn(Link<'_>, &PhaseConfig, &PowerVector, Side) -> Result<CVec> + 'f;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub max_error: f64,
    pub threshold: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_error <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCheckReport {
    pub checks: Vec<CheckOutcome>,
}

impl SelfCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CheckOutcome::passed)
    }
}

impl fmt::Display for SelfCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let status = if c.passed() { "ok  " } else { "FAIL" };
            writeln!(f, "{status} {:<24} max rel error {:.3e} (limit {:.0e})", c.name, c.max_error, c.threshold)?;
        }
        Ok(())
    }
}

fn analytic_gradient(link: Link<'_>, phases: &PhaseConfig, power: &PowerVector, side: Side) -> Result<CVec> {
    match side {
        Side::Tx => euclidean_gradient_tx(link, phases, power),
        Side::Rx => euclidean_gradient_rx(link, phases, power),
    }
}

/// Wirtinger gradient w.r.t. `conj(theta)` by central differences in the
/// real and imaginary parts: `(df/dx + j df/dy) / 2`.
fn numeric_gradient(link: Link<'_>, phases: &PhaseConfig, power: &PowerVector, side: Side, step: f64) -> Result<CVec> {
    let rate_at = |p: &PhaseConfig| -> Result<f64> { Ok(rate_unchecked(&link.effective(p)?, &power.p, power.noise)) };
    let len = phases.theta(side).len();
    let mut out = CVec::zeros(len);
    for i in 0..len {
        let mut partial = [0.0; 2];
        for (k, dir) in [C64::new(step, 0.0), C64::new(0.0, step)].into_iter().enumerate() {
            let mut plus = phases.clone();
            plus.theta_mut(side)[i] += dir;
            let mut minus = phases.clone();
            minus.theta_mut(side)[i] -= dir;
            partial[k] = (rate_at(&plus)? - rate_at(&minus)?) / (2.0 * step);
        }
        out[i] = C64::new(partial[0], partial[1]) * 0.5;
    }
    Ok(out)
}

fn relative(err: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        err / scale
    } else {
        err
    }
}

fn gradient_check(grad: &GradientFn<'_>) -> Result<f64> {
    let mut worst = 0.0_f64;
    for (case, layers) in [1usize, 2, 3].into_iter().enumerate() {
        let seed = 100 + case as u64;
        let geom = build_geometry(&GeometryConfig::new(2, 9, layers))?;
        let props = build_propagation_matrices(&geom)?;
        let channel = sample_channel(seed, 1.0, &CorrelationPair::identity(9, 9));
        let link = Link::new(&props, &channel)?;
        let phases = PhaseConfig::random(&props, &mut rng_for(seed, RngPurpose::PhaseInit));
        let h = link.effective(&phases)?;
        // noise comparable to the received power keeps every term active
        let noise = (0..2).map(|s| h[(s, s)].norm_sqr()).sum::<f64>() / 2.0;
        let power = PowerVector { p: vec![0.7, 0.3], total: 1.0, noise };
        for side in [Side::Tx, Side::Rx] {
            let a = grad(link, &phases, &power, side)?;
            let n = numeric_gradient(link, &phases, &power, side, 1e-6)?;
            worst = worst.max(relative((&a - &n).norm(), n.norm()));
        }
    }
    Ok(worst)
}

fn factorization_check() -> Result<f64> {
    let geom = build_geometry(&GeometryConfig::new(3, 9, 3))?;
    let props = build_propagation_matrices(&geom)?;
    let phases = PhaseConfig::random(&props, &mut rng_for(7, RngPurpose::PhaseInit));
    let mut worst = 0.0_f64;
    let v_tx = tx_cascade(&props.omega_tx, &phases.theta_tx)?;
    let v_rx = rx_cascade(&props.omega_rx, &phases.theta_rx)?;
    for layer in 1..=3 {
        let diag = |side: Side| CMat::from_diagonal(&CVec::from_column_slice(phases.block(side, layer)));
        let (minus, plus) = partial_cascades(&props.omega_tx, &phases.theta_tx, Side::Tx, layer)?;
        let rebuilt = plus * diag(Side::Tx) * minus * &props.omega_tx[0];
        worst = worst.max(relative(max_abs(&(rebuilt - &v_tx)), max_abs(&v_tx)));
        let (minus, plus) = partial_cascades(&props.omega_rx, &phases.theta_rx, Side::Rx, layer)?;
        let rebuilt = &props.omega_rx[0] * minus * diag(Side::Rx) * plus;
        worst = worst.max(relative(max_abs(&(rebuilt - &v_rx)), max_abs(&v_rx)));
    }
    Ok(worst)
}

fn coordinate_check() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0_f64;
    for _ in 0..50 {
        let left = CMat::from_fn(3, 8, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let right = CMat::from_fn(8, 3, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let theta: Vec<C64> = (0..8).map(|_| phasor(rng.random::<f64>() * TAU)).collect();
        let mut basis = InterferenceBasis::from_factors(&left, &right, &theta);
        let n = rng.random_range(0..8);
        let grid = (0..3600)
            .map(|k| basis.objective_with(n, phasor(k as f64 * TAU / 3600.0)))
            .fold(f64::INFINITY, f64::min);
        basis.update_meta_atom(n);
        worst = worst.max(relative((basis.objective() - grid).max(0.0), grid));
    }
    worst
}

fn power_check() -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst = 0.0_f64;
    for _ in 0..20 {
        let gains: Vec<f64> = (0..4).map(|_| 10f64.powf(rng.random::<f64>() * 3.0 - 1.5)).collect();
        let h = CMat::from_diagonal(&CVec::from_iterator(4, gains.iter().map(|g| C64::new(g.sqrt(), 0.0))));
        let wf = waterfill_power(&gains, 1.0, 1.0)?;
        let problem = PowerProblem::new(h, 1.0, 1.0)?;
        let wm = wmmse_power(&problem, &[0.25; 4], &WmmseConfig { max_iters: 5000, tolerance: 1e-14 })?;
        let target = parallel_capacity(&gains, &wf.p, 1.0);
        worst = worst.max(relative((problem.rate(&wm.p) - target).abs(), target));
    }
    Ok(worst)
}

/// Run every check with the optimizer's own gradient.
pub fn self_check() -> Result<SelfCheckReport> {
    self_check_with(&analytic_gradient)
}

/// Run every check, validating `grad` in place of the optimizer's gradient.
pub fn self_check_with(grad: &GradientFn<'_>) -> Result<SelfCheckReport> {
    Ok(SelfCheckReport {
        checks: vec![
            CheckOutcome { name: "gradient", max_error: gradient_check(grad)?, threshold: 1e-5 },
            CheckOutcome { name: "cascade factorization", max_error: factorization_check()?, threshold: 1e-10 },
            CheckOutcome { name: "coordinate update", max_error: coordinate_check(), threshold: 1e-6 },
            CheckOutcome { name: "water-filling vs wmmse", max_error: power_check()?, threshold: 1e-6 },
        ],
    })
}
