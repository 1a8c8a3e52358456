//! Fixtures and independent reference implementations shared by the
//! integration suites. Nothing here calls the optimizer internals it checks.
#![allow(dead_code)]

use simrate::cascade::{PhaseConfig, Side};
use simrate::channel::{rng_for, sample_channel, ChannelRealization, CorrelationPair, RngPurpose};
use simrate::geometry::{build_geometry, build_propagation_matrices, GeometryConfig, PropagationSet};
use simrate::{CMat, CVec, C64};

pub struct Fixture {
    pub props: PropagationSet,
    pub channel: ChannelRealization,
    pub phases: PhaseConfig,
}

/// Most nearly square `rows x cols` factorization of `n`.
pub fn grid_for(n: usize) -> (usize, usize) {
    let rows = (1..=n).filter(|&r| n.is_multiple_of(r) && r * r <= n).max().unwrap();
    (rows, n / rows)
}

/// Link with unit-variance uncorrelated channel and random phases.
pub fn fixture(s: usize, n: usize, m: usize, l: usize, k: usize, seed: u64) -> Fixture {
    let mut cfg = GeometryConfig::new(s, n, l);
    cfg.rx_atoms = m;
    cfg.rx_layers = k;
    cfg.tx_grid = Some(grid_for(n));
    cfg.rx_grid = Some(grid_for(m));
    let props = build_propagation_matrices(&build_geometry(&cfg).unwrap()).unwrap();
    let channel = sample_channel(seed, 1.0, &CorrelationPair::identity(n, m));
    let phases = PhaseConfig::random(&props, &mut rng_for(seed, RngPurpose::PhaseInit));
    Fixture { props, channel, phases }
}

pub fn diag(v: &[C64]) -> CMat {
    CMat::from_diagonal(&CVec::from_column_slice(v))
}

/// `Theta^L Omega^L ... Theta^1 Omega^1` by explicit diagonal matrices.
pub fn naive_tx(omega: &[CMat], theta: &CVec) -> CMat {
    let n = omega[0].nrows();
    let mut v = omega[0].clone();
    for l in 0..omega.len() {
        if l > 0 {
            v = &omega[l] * v;
        }
        v = diag(&theta.as_slice()[l * n..(l + 1) * n]) * v;
    }
    v
}

/// `Omega^1 Theta^1 ... Omega^K Theta^K` by explicit diagonal matrices.
pub fn naive_rx(omega: &[CMat], theta: &CVec) -> CMat {
    let m = omega[0].ncols();
    let mut v = omega[0].clone();
    for k in 0..omega.len() {
        if k > 0 {
            v *= &omega[k];
        }
        v *= diag(&theta.as_slice()[k * m..(k + 1) * m]);
    }
    v
}

pub fn naive_h(f: &Fixture, theta_tx: &CVec, theta_rx: &CVec) -> CMat {
    naive_rx(&f.props.omega_rx, theta_rx) * &f.channel.h_tilde * naive_tx(&f.props.omega_tx, theta_tx)
}

pub fn naive_rate(h: &CMat, p: &[f64], noise: f64) -> f64 {
    let s = h.nrows();
    (0..s)
        .map(|i| {
            let signal = h[(i, i)].norm_sqr() * p[i];
            let interference: f64 = (0..s).filter(|&j| j != i).map(|j| h[(i, j)].norm_sqr() * p[j]).sum();
            (1.0 + signal / (interference + noise)).log2()
        })
        .sum()
}

/// Wirtinger gradient w.r.t. `conj(theta_side)` by central differences.
pub fn fd_gradient(f: &Fixture, side: Side, p: &[f64], noise: f64, step: f64) -> CVec {
    let base = (f.phases.theta_tx.clone(), f.phases.theta_rx.clone());
    let len = match side {
        Side::Tx => base.0.len(),
        Side::Rx => base.1.len(),
    };
    let eval = |i: usize, d: C64| {
        let (mut tx, mut rx) = base.clone();
        match side {
            Side::Tx => tx[i] += d,
            Side::Rx => rx[i] += d,
        }
        naive_rate(&naive_h(f, &tx, &rx), p, noise)
    };
    CVec::from_iterator(
        len,
        (0..len).map(|i| {
            let dx = (eval(i, C64::new(step, 0.0)) - eval(i, C64::new(-step, 0.0))) / (2.0 * step);
            let dy = (eval(i, C64::new(0.0, step)) - eval(i, C64::new(0.0, -step))) / (2.0 * step);
            C64::new(dx, dy) * 0.5
        }),
    )
}

/// `L (right^T kron left) L_tilde` with dense selection matrices.
pub fn materialized_e(left: &CMat, right: &CMat) -> CMat {
    let (s, n) = left.shape();
    let one = C64::new(1.0, 0.0);
    let mut sel_off = CMat::zeros(s * (s - 1), s * s);
    let mut row = 0;
    for j in 0..s {
        for i in 0..s {
            if i != j {
                sel_off[(row, i + j * s)] = one;
                row += 1;
            }
        }
    }
    let mut sel_diag = CMat::zeros(n * n, n);
    for i in 0..n {
        sel_diag[(i + i * n, i)] = one;
    }
    sel_off * right.transpose().kronecker(left) * sel_diag
}

/// Water-filling by bisection on the water level.
pub fn waterfill_bisection(gains: &[f64], total: f64, noise: f64) -> Vec<f64> {
    let alloc = |mu: f64| -> Vec<f64> {
        gains.iter().map(|&g| if g > 0.0 { (mu - noise / g).max(0.0) } else { 0.0 }).collect()
    };
    let (mut lo, mut hi) = (0.0, total + noise / gains.iter().cloned().fold(0.0, f64::max) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if alloc(mid).iter().sum::<f64>() > total {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    alloc(0.5 * (lo + hi))
}

pub fn relative_error(a: &CVec, b: &CVec) -> f64 {
    (a - b).norm() / b.norm()
}
