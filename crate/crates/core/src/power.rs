//! Power allocation across the `S` streams for fixed phases.
//!
//! [`wmmse_power`] handles the interference-aware problem with the scalar
//! WMMSE iteration; [`waterfill_power`] is the closed-form optimum when the
//! cross-stream terms are ignored.
//!
//! Both work internally in normalized units: powers as fractions of the
//! budget and gains `|H_sj|^2 P_t / noise`, so the numbers stay O(1)
//! regardless of path loss.

use crate::cascade::{rate_unchecked, PowerVector};
use crate::error::{Result, SimError};
use crate::linalg::CMat;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerProblem {
    pub h: CMat,
    pub total: f64,
    pub noise: f64,
}

impl PowerProblem {
    pub fn new(h: CMat, total: f64, noise: f64) -> Result<Self> {
        if !(total > 0.0) || !(noise > 0.0) {
            return Err(SimError::Domain("power budget and noise must be positive".into()));
        }
        if !h.is_square() {
            return Err(SimError::dims("PowerProblem", "square channel", format!("{:?}", h.shape())));
        }
        Ok(Self { h, total, noise })
    }

    pub fn streams(&self) -> usize {
        self.h.nrows()
    }

    pub fn rate(&self, p: &[f64]) -> f64 {
        rate_unchecked(&self.h, p, self.noise)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WmmseConfig {
    pub max_iters: usize,
    /// Stop once the rate changes by less than this (bits/s/Hz).
    pub tolerance: f64,
}

impl Default for WmmseConfig {
    fn default() -> Self {
        Self { max_iters: 5000, tolerance: 1e-10 }
    }
}

/// Normalized rate for amplitudes `v` (with `sum v^2 = 1`) and gains `a`.
fn normalized_rate(a: &[Vec<f64>], v: &[f64]) -> f64 {
    let s = v.len();
    (0..s)
        .map(|i| {
            let intf: f64 = 1.0 + (0..s).filter(|&j| j != i).map(|j| a[i][j] * v[j] * v[j]).sum::<f64>();
            (a[i][i] * v[i] * v[i] / intf).ln_1p()
        })
        .sum::<f64>()
        / std::f64::consts::LN_2
}

/// Multiplier `mu` with `sum_s (c_s / (b_s + mu))^2 = 1`, restricted to
/// `mu > -min b_s` over the active streams.
fn solve_multiplier(c: &[f64], b: &[f64]) -> f64 {
    let excess = |mu: f64| -> f64 {
        c.iter()
            .zip(b)
            .filter(|(&ci, _)| ci > 0.0)
            .map(|(&ci, &bi)| (ci / (bi + mu)).powi(2))
            .sum::<f64>()
            - 1.0
    };
    let (mut lo, mut hi) = if excess(0.0) >= 0.0 {
        let mut hi = 1.0;
        let mut guard = 0;
        while excess(hi) > 0.0 && guard < 2000 {
            hi *= 2.0;
            guard += 1;
        }
        (0.0, hi)
    } else {
        let floor = c
            .iter()
            .zip(b)
            .filter(|(&ci, _)| ci > 0.0)
            .map(|(_, &bi)| bi)
            .fold(f64::INFINITY, f64::min);
        (-floor, 0.0)
    };
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * lo.abs().max(hi.abs()).max(1e-300) || mid == lo || mid == hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scalar WMMSE for the interference-aware power problem, warm-started at
/// `p0`. The returned allocation meets the budget with equality and its rate
/// is never below the rate of `p0`.
pub fn wmmse_power(problem: &PowerProblem, p0: &[f64], config: &WmmseConfig) -> Result<PowerVector> {
    let s = problem.streams();
    let start = PowerVector { p: p0.to_vec(), total: problem.total, noise: problem.noise };
    if p0.len() != s {
        return Err(SimError::dims("wmmse_power", s, p0.len()));
    }
    start.validate()?;

    let scale = problem.total / problem.noise;
    let a: Vec<Vec<f64>> = (0..s)
        .map(|i| (0..s).map(|j| problem.h[(i, j)].norm_sqr() * scale).collect())
        .collect();
    let mut v: Vec<f64> = p0.iter().map(|&p| (p / problem.total).sqrt()).collect();
    let mut rate = normalized_rate(&a, &v);
    let mut best = v.clone();

    for _ in 0..config.max_iters {
        // receive scalars u and MSE weights w at the current amplitudes
        let mut u = vec![0.0; s];
        let mut w = vec![0.0; s];
        for i in 0..s {
            let total: f64 = 1.0 + (0..s).map(|j| a[i][j] * v[j] * v[j]).sum::<f64>();
            let signal = a[i][i] * v[i] * v[i];
            u[i] = a[i][i].sqrt() * v[i] / total;
            w[i] = total / (total - signal);
        }
        let c: Vec<f64> = (0..s).map(|i| w[i] * u[i] * a[i][i].sqrt()).collect();
        let b: Vec<f64> = (0..s)
            .map(|i| (0..s).map(|j| w[j] * u[j] * u[j] * a[j][i]).sum())
            .collect();
        if c.iter().all(|&ci| ci <= 0.0) {
            break;
        }
        let mu = solve_multiplier(&c, &b);
        let mut next: Vec<f64> = (0..s)
            .map(|i| if c[i] > 0.0 { c[i] / (b[i] + mu) } else { 0.0 })
            .collect();
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        next.iter_mut().for_each(|x| *x /= norm);

        let next_rate = normalized_rate(&a, &next);
        let change = next_rate - rate;
        if next_rate >= rate {
            best.clone_from(&next);
        }
        v = next;
        rate = rate.max(next_rate);
        if change.abs() < config.tolerance {
            break;
        }
    }

    let p = best.iter().map(|x| x * x * problem.total).collect();
    Ok(PowerVector { p, total: problem.total, noise: problem.noise })
}

/// Water level `mu` such that `sum_s max(0, mu - noise / g_s) = total`.
pub fn water_level(gains: &[f64], total: f64, noise: f64) -> Result<f64> {
    if !(total > 0.0) || !(noise > 0.0) {
        return Err(SimError::Domain("power budget and noise must be positive".into()));
    }
    if gains.iter().any(|&g| g < 0.0 || !g.is_finite()) {
        return Err(SimError::Domain("gains must be finite and nonnegative".into()));
    }
    let mut floors: Vec<f64> = gains.iter().filter(|&&g| g > 0.0).map(|&g| noise / g).collect();
    if floors.is_empty() {
        return Err(SimError::Domain("all stream gains are zero".into()));
    }
    floors.sort_by(|x, y| x.partial_cmp(y).expect("finite floors"));
    // grow the active set from the strongest stream while the level stays above the next floor
    let mut sum = 0.0;
    let mut level = 0.0;
    for (k, &floor) in floors.iter().enumerate() {
        let candidate = (total + sum + floor) / (k + 1) as f64;
        if k > 0 && candidate <= floor {
            break;
        }
        sum += floor;
        level = candidate;
    }
    Ok(level)
}

/// Interference-free optimum `p_s = max(0, mu - noise / g_s)`.
pub fn waterfill_power(gains: &[f64], total: f64, noise: f64) -> Result<PowerVector> {
    let level = water_level(gains, total, noise)?;
    let mut p: Vec<f64> = gains
        .iter()
        .map(|&g| if g > 0.0 { (level - noise / g).max(0.0) } else { 0.0 })
        .collect();
    // remove rounding drift so the budget holds with equality
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x *= total / sum);
    Ok(PowerVector { p, total, noise })
}

/// `sum_s log2(1 + g_s p_s / noise)`.
pub fn parallel_capacity(gains: &[f64], p: &[f64], noise: f64) -> f64 {
    gains.iter().zip(p).map(|(g, x)| (1.0 + g * x / noise).log2()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag_channel(gains: &[f64]) -> CMat {
        let mut h = CMat::zeros(gains.len(), gains.len());
        for (i, g) in gains.iter().enumerate() {
            h[(i, i)] = C64::new(g.sqrt(), 0.0);
        }
        h
    }

    #[test]
    fn single_stream_takes_everything() {
        let h = CMat::from_element(1, 1, C64::new(0.3, -0.4));
        let prob = PowerProblem::new(h, 2.0, 0.1).unwrap();
        let out = wmmse_power(&prob, &[2.0], &WmmseConfig::default()).unwrap();
        assert!((out.p[0] - 2.0).abs() < 1e-12);
        let rate = prob.rate(&out.p);
        assert!((rate - (1.0 + 0.25 * 2.0 / 0.1f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn symmetric_diagonal_splits_evenly() {
        let prob = PowerProblem::new(diag_channel(&[2.0; 4]), 1.0, 0.5).unwrap();
        let out = wmmse_power(&prob, &[0.4, 0.3, 0.2, 0.1], &WmmseConfig::default()).unwrap();
        for p in &out.p {
            assert!((p - 0.25).abs() < 1e-4, "{p}");
        }
        let wf = waterfill_power(&[2.0; 4], 1.0, 0.5).unwrap();
        assert!(wf.p.iter().all(|p| (p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn infeasible_start_rejected() {
        let prob = PowerProblem::new(diag_channel(&[1.0, 1.0]), 1.0, 1.0).unwrap();
        assert!(matches!(wmmse_power(&prob, &[0.3, 0.3], &WmmseConfig::default()), Err(SimError::Domain(_))));
        assert!(wmmse_power(&prob, &[1.0], &WmmseConfig::default()).is_err());
    }

    #[test]
    fn two_streams_match_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let h = CMat::from_fn(2, 2, |i, j| {
                let mag = if i == j { 1.0 } else { 0.3 };
                C64::new(mag * (rng.random::<f64>() - 0.5), mag * (rng.random::<f64>() - 0.5))
            });
            let prob = PowerProblem::new(h, 1.0, 0.01).unwrap();
            let out = wmmse_power(&prob, &[0.5, 0.5], &WmmseConfig::default()).unwrap();
            let grid_best = (0..=1000)
                .map(|k| {
                    let p1 = k as f64 * 1e-3;
                    prob.rate(&[p1, 1.0 - p1])
                })
                .fold(f64::MIN, f64::max);
            let got = prob.rate(&out.p);
            assert!(got >= grid_best - 1e-3, "wmmse {got} vs grid {grid_best}");
            assert!((out.p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn wmmse_never_loses_rate() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..20 {
            let h = CMat::from_fn(4, 4, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
            let prob = PowerProblem::new(h, 3.0, 0.02).unwrap();
            let raw: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let sum: f64 = raw.iter().sum();
            let p0: Vec<f64> = raw.iter().map(|x| 3.0 * x / sum).collect();
            let out = wmmse_power(&prob, &p0, &WmmseConfig::default()).unwrap();
            out.validate().unwrap();
            assert!(prob.rate(&out.p) >= prob.rate(&p0) - 1e-9);
        }
    }

    #[test]
    fn waterfill_shuts_off_vanishing_stream() {
        let wf = waterfill_power(&[1.0, 1e-12], 1.0, 1.0).unwrap();
        assert!((wf.p[0] - 1.0).abs() < 1e-12 && wf.p[1] == 0.0);
    }

    #[test]
    fn waterfill_zero_gain_and_all_zero() {
        let wf = waterfill_power(&[0.0, 2.0, 1.0], 1.0, 0.1).unwrap();
        assert_eq!(wf.p[0], 0.0);
        assert!((wf.p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(matches!(waterfill_power(&[0.0, 0.0], 1.0, 1.0), Err(SimError::Domain(_))));
    }

    #[test]
    fn waterfill_kkt_equal_levels() {
        let gains = [3.0, 0.7, 0.05, 1.9];
        let wf = waterfill_power(&gains, 2.0, 0.4).unwrap();
        let levels: Vec<f64> = gains
            .iter()
            .zip(&wf.p)
            .filter(|(_, &p)| p > 0.0)
            .map(|(g, p)| p + 0.4 / g)
            .collect();
        assert!(levels.len() >= 2);
        for l in &levels {
            assert!((l - levels[0]).abs() < 1e-10);
        }
        // inactive streams sit above the water level
        for (g, p) in gains.iter().zip(&wf.p) {
            if *p == 0.0 {
                assert!(0.4 / g >= levels[0]);
            }
        }
    }
}
