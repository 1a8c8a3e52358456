//! Wave-domain cascades through each SIM, the end-to-end effective channel,
//! the achievable rate and the inter-stream interference.
//!
//! With `Theta^l = diag(theta^l)`:
//!
//! ```text
//! V_tx = Theta^L Omega^L ... Theta^2 Omega^2 Theta^1 Omega^1        (N x S)
//! V_rx = Omega^1 Theta^1 Omega^2 Theta^2 ... Omega^K Theta^K        (S x M)
//! H    = V_rx H_tilde V_tx                                          (S x S)
//! ```
//!
//! Partial cascades split either product around one layer:
//! `V_tx = V_tx^{l+} Theta^l V_tx^{l-} Omega^1` and
//! `V_rx = Omega^1 V_rx^{k-} Theta^k V_rx^{k+}`.

use crate::channel::ChannelRealization;
use crate::error::{Result, SimError};
use crate::geometry::PropagationSet;
use crate::linalg::{phasor, scale_cols, scale_rows, CMat, CVec, C64};
use rand::Rng;

const UNIT_MODULUS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Tx,
    Rx,
}

/// Meta-atom coefficients of both SIMs, stored layer after layer.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseConfig {
    pub theta_tx: CVec,
    pub theta_rx: CVec,
    tx_atoms: usize,
    rx_atoms: usize,
}

impl PhaseConfig {
    pub fn new(theta_tx: CVec, theta_rx: CVec, tx_atoms: usize, rx_atoms: usize) -> Result<Self> {
        if tx_atoms == 0 || !theta_tx.len().is_multiple_of(tx_atoms) || theta_tx.is_empty() {
            return Err(SimError::dims("PhaseConfig tx", format!("multiple of {tx_atoms}"), theta_tx.len()));
        }
        if rx_atoms == 0 || !theta_rx.len().is_multiple_of(rx_atoms) || theta_rx.is_empty() {
            return Err(SimError::dims("PhaseConfig rx", format!("multiple of {rx_atoms}"), theta_rx.len()));
        }
        let cfg = Self { theta_tx, theta_rx, tx_atoms, rx_atoms };
        let dev = cfg.max_modulus_deviation();
        if dev > UNIT_MODULUS_TOL {
            return Err(SimError::Domain(format!("phase coefficients off the unit circle by {dev:e}")));
        }
        Ok(cfg)
    }

    /// All coefficients equal to one.
    pub fn identity(props: &PropagationSet) -> Self {
        let (n, m) = (props.tx_atoms(), props.rx_atoms());
        Self {
            theta_tx: CVec::from_element(n * props.tx_layers(), C64::new(1.0, 0.0)),
            theta_rx: CVec::from_element(m * props.rx_layers(), C64::new(1.0, 0.0)),
            tx_atoms: n,
            rx_atoms: m,
        }
    }

    /// I.i.d. phases uniform on `[0, 2 pi)`; TX draws first, then RX.
    pub fn random<R: Rng + ?Sized>(props: &PropagationSet, rng: &mut R) -> Self {
        let (n, m) = (props.tx_atoms(), props.rx_atoms());
        let mut draw = |len: usize| {
            CVec::from_iterator(len, (0..len).map(|_| phasor(rng.random::<f64>() * std::f64::consts::TAU)))
        };
        let theta_tx = draw(n * props.tx_layers());
        let theta_rx = draw(m * props.rx_layers());
        Self { theta_tx, theta_rx, tx_atoms: n, rx_atoms: m }
    }

    pub fn atoms(&self, side: Side) -> usize {
        match side {
            Side::Tx => self.tx_atoms,
            Side::Rx => self.rx_atoms,
        }
    }

    pub fn layers(&self, side: Side) -> usize {
        self.theta(side).len() / self.atoms(side)
    }

    pub fn theta(&self, side: Side) -> &CVec {
        match side {
            Side::Tx => &self.theta_tx,
            Side::Rx => &self.theta_rx,
        }
    }

    pub fn theta_mut(&mut self, side: Side) -> &mut CVec {
        match side {
            Side::Tx => &mut self.theta_tx,
            Side::Rx => &mut self.theta_rx,
        }
    }

    /// Coefficients of layer `layer` (1-based).
    pub fn block(&self, side: Side, layer: usize) -> &[C64] {
        let n = self.atoms(side);
        &self.theta(side).as_slice()[(layer - 1) * n..layer * n]
    }

    pub fn block_mut(&mut self, side: Side, layer: usize) -> &mut [C64] {
        let n = self.atoms(side);
        &mut self.theta_mut(side).as_mut_slice()[(layer - 1) * n..layer * n]
    }

    pub fn max_modulus_deviation(&self) -> f64 {
        self.theta_tx
            .iter()
            .chain(self.theta_rx.iter())
            .fold(0.0_f64, |acc, z| acc.max((z.norm() - 1.0).abs()))
    }

    fn check_against(&self, props: &PropagationSet) -> Result<()> {
        let tx_len = props.tx_atoms() * props.tx_layers();
        let rx_len = props.rx_atoms() * props.rx_layers();
        if self.theta_tx.len() != tx_len || self.tx_atoms != props.tx_atoms() {
            return Err(SimError::dims("theta_tx", tx_len, self.theta_tx.len()));
        }
        if self.theta_rx.len() != rx_len || self.rx_atoms != props.rx_atoms() {
            return Err(SimError::dims("theta_rx", rx_len, self.theta_rx.len()));
        }
        Ok(())
    }
}

/// Per-stream power allocation with its budget and noise level (watts).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVector {
    pub p: Vec<f64>,
    pub total: f64,
    pub noise: f64,
}

impl PowerVector {
    pub fn equal(streams: usize, total: f64, noise: f64) -> Self {
        Self { p: vec![total / streams as f64; streams], total, noise }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise > 0.0) {
            return Err(SimError::Domain(format!("noise power must be positive, got {}", self.noise)));
        }
        if self.p.iter().any(|&x| x < 0.0 || !x.is_finite()) {
            return Err(SimError::Domain("powers must be finite and nonnegative".into()));
        }
        let sum: f64 = self.p.iter().sum();
        if (sum - self.total).abs() > 1e-9 * self.total.max(f64::MIN_POSITIVE) {
            return Err(SimError::Domain(format!("powers sum to {sum}, budget is {}", self.total)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveChannel {
    pub h: CMat,
    pub v_tx: CMat,
    pub v_rx: CMat,
}

fn check_blocks(omega: &[CMat], theta: &CVec, atoms: usize, context: &'static str) -> Result<()> {
    if omega.is_empty() {
        return Err(SimError::dims(context, "at least one layer", 0));
    }
    if theta.len() != atoms * omega.len() {
        return Err(SimError::dims(context, atoms * omega.len(), theta.len()));
    }
    Ok(())
}

/// `V_tx = Theta^L Omega^L ... Theta^1 Omega^1`.
pub fn tx_cascade(omega_tx: &[CMat], theta_tx: &CVec) -> Result<CMat> {
    let n = omega_tx.first().map_or(0, |o| o.nrows());
    check_blocks(omega_tx, theta_tx, n, "tx_cascade")?;
    let th = theta_tx.as_slice();
    let mut v = scale_rows(omega_tx[0].clone(), &th[..n]);
    for (l, omega) in omega_tx.iter().enumerate().skip(1) {
        if omega.shape() != (n, n) {
            return Err(SimError::dims("tx_cascade", format!("{n}x{n}"), format!("{:?}", omega.shape())));
        }
        v = scale_rows(omega * v, &th[l * n..(l + 1) * n]);
    }
    Ok(v)
}

/// `V_rx = Omega^1 Theta^1 Omega^2 Theta^2 ... Omega^K Theta^K`.
pub fn rx_cascade(omega_rx: &[CMat], theta_rx: &CVec) -> Result<CMat> {
    let m = omega_rx.first().map_or(0, |o| o.ncols());
    check_blocks(omega_rx, theta_rx, m, "rx_cascade")?;
    let th = theta_rx.as_slice();
    let mut v = scale_cols(omega_rx[0].clone(), &th[..m]);
    for (k, omega) in omega_rx.iter().enumerate().skip(1) {
        if omega.shape() != (m, m) {
            return Err(SimError::dims("rx_cascade", format!("{m}x{m}"), format!("{:?}", omega.shape())));
        }
        v = scale_cols(v * omega, &th[k * m..(k + 1) * m]);
    }
    Ok(v)
}

/// `(V^{l-}, V^{l+})` for one layer (1-based index) of one side.
///
/// TX: `V^{l-} = Omega^l Theta^{l-1} ... Omega^2 Theta^1`, `V^{l+} = Theta^L Omega^L ... Theta^{l+1} Omega^{l+1}`.
/// RX: `V^{k-} = Theta^1 Omega^2 ... Theta^{k-1} Omega^k`, `V^{k+} = Omega^{k+1} Theta^{k+1} ... Omega^K Theta^K`.
pub fn partial_cascades(omega: &[CMat], theta: &CVec, side: Side, index: usize) -> Result<(CMat, CMat)> {
    let layers = omega.len();
    if index == 0 || index > layers {
        return Err(SimError::Index { context: "partial_cascades", index, max: layers });
    }
    let all = all_partial_cascades(omega, theta, side)?;
    Ok(all.into_iter().nth(index - 1).expect("index checked"))
}

/// Partial cascades for every layer, built from running prefix and suffix
/// products.
pub fn all_partial_cascades(omega: &[CMat], theta: &CVec, side: Side) -> Result<Vec<(CMat, CMat)>> {
    let atoms = match side {
        Side::Tx => omega.first().map_or(0, |o| o.nrows()),
        Side::Rx => omega.first().map_or(0, |o| o.ncols()),
    };
    check_blocks(omega, theta, atoms, "partial_cascades")?;
    let minus = prefix_products(omega, theta, side);
    let plus = suffix_products(omega, theta, side);
    Ok(minus.into_iter().zip(plus).collect())
}

fn block(theta: &CVec, atoms: usize, layer: usize) -> &[C64] {
    &theta.as_slice()[(layer - 1) * atoms..layer * atoms]
}

/// `V^{l-}` for `l = 1..=L`.
pub(crate) fn prefix_products(omega: &[CMat], theta: &CVec, side: Side) -> Vec<CMat> {
    let layers = omega.len();
    let atoms = theta.len() / layers;
    let mut out = Vec::with_capacity(layers);
    out.push(CMat::identity(atoms, atoms));
    for l in 2..=layers {
        let prev = &out[l - 2];
        let next = match side {
            // Omega^l Theta^{l-1} V^{(l-1)-}
            Side::Tx => &omega[l - 1] * scale_rows(prev.clone(), block(theta, atoms, l - 1)),
            // V^{(k-1)-} Theta^{k-1} Omega^k
            Side::Rx => scale_cols(prev.clone(), block(theta, atoms, l - 1)) * &omega[l - 1],
        };
        out.push(next);
    }
    out
}

/// `V^{l+}` for `l = 1..=L`.
pub(crate) fn suffix_products(omega: &[CMat], theta: &CVec, side: Side) -> Vec<CMat> {
    let layers = omega.len();
    let atoms = theta.len() / layers;
    let mut out = vec![CMat::identity(atoms, atoms); layers];
    for l in (1..layers).rev() {
        let next = &out[l];
        out[l - 1] = match side {
            // V^{(l+1)+} Theta^{l+1} Omega^{l+1}
            Side::Tx => scale_cols(next.clone(), block(theta, atoms, l + 1)) * &omega[l],
            // Omega^{k+1} Theta^{k+1} V^{(k+1)+}
            Side::Rx => &omega[l] * scale_rows(next.clone(), block(theta, atoms, l + 1)),
        };
    }
    out
}

pub fn effective_channel(
    channel: &ChannelRealization,
    phases: &PhaseConfig,
    props: &PropagationSet,
) -> Result<EffectiveChannel> {
    phases.check_against(props)?;
    let h_t = &channel.h_tilde;
    if h_t.shape() != (props.rx_atoms(), props.tx_atoms()) {
        return Err(SimError::dims(
            "effective_channel",
            format!("{}x{}", props.rx_atoms(), props.tx_atoms()),
            format!("{}x{}", h_t.nrows(), h_t.ncols()),
        ));
    }
    let v_tx = tx_cascade(&props.omega_tx, &phases.theta_tx)?;
    let v_rx = rx_cascade(&props.omega_rx, &phases.theta_rx)?;
    let h = &v_rx * (h_t * &v_tx);
    Ok(EffectiveChannel { h, v_tx, v_rx })
}

/// `sum_s log2(1 + |H_ss|^2 p_s / (sum_{j != s} |H_sj|^2 p_j + noise))`.
pub fn achievable_rate(h: &CMat, p: &[f64], noise: f64) -> Result<f64> {
    if !(noise > 0.0) {
        return Err(SimError::Domain(format!("noise power must be positive, got {noise}")));
    }
    let s = h.nrows();
    if h.ncols() != s || p.len() != s {
        return Err(SimError::dims("achievable_rate", format!("{s}x{s} channel, {s} powers"), format!("{:?}, {}", h.shape(), p.len())));
    }
    Ok(rate_unchecked(h, p, noise))
}

pub(crate) fn rate_unchecked(h: &CMat, p: &[f64], noise: f64) -> f64 {
    let s = h.nrows();
    (0..s)
        .map(|i| {
            let mut interference = noise;
            for j in 0..s {
                if j != i {
                    interference += h[(i, j)].norm_sqr() * p[j];
                }
            }
            (h[(i, i)].norm_sqr() * p[i] / interference).ln_1p()
        })
        .sum::<f64>()
        / std::f64::consts::LN_2
}

/// Squared norm of the off-diagonal part of `H`.
pub fn interference_power(h: &CMat) -> f64 {
    let mut g = 0.0;
    for j in 0..h.ncols() {
        for s in 0..h.nrows() {
            if s != j {
                g += h[(s, j)].norm_sqr();
            }
        }
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    fn random_phases(rng: &mut ChaCha8Rng, len: usize) -> CVec {
        CVec::from_iterator(len, (0..len).map(|_| phasor(rng.random::<f64>() * std::f64::consts::TAU)))
    }

    fn diag(v: &[C64]) -> CMat {
        CMat::from_diagonal(&CVec::from_column_slice(v))
    }

    fn random_tx(rng: &mut ChaCha8Rng, n: usize, s: usize, layers: usize) -> Vec<CMat> {
        let mut om = vec![random_mat(rng, n, s)];
        om.extend((1..layers).map(|_| random_mat(rng, n, n)));
        om
    }

    fn random_rx(rng: &mut ChaCha8Rng, m: usize, s: usize, layers: usize) -> Vec<CMat> {
        let mut om = vec![random_mat(rng, s, m)];
        om.extend((1..layers).map(|_| random_mat(rng, m, m)));
        om
    }

    #[test]
    fn single_layer_cascades() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let om = random_tx(&mut rng, 4, 2, 1);
        let th = random_phases(&mut rng, 4);
        let v = tx_cascade(&om, &th).unwrap();
        assert!(max_abs(&(v - diag(th.as_slice()) * &om[0])) < 1e-14);
        let om = random_rx(&mut rng, 4, 2, 1);
        let v = rx_cascade(&om, &th).unwrap();
        assert!(max_abs(&(v - &om[0] * diag(th.as_slice()))) < 1e-14);
    }

    #[test]
    fn unit_phases_give_plain_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let ones = CVec::from_element(12, C64::new(1.0, 0.0));
        let om = random_tx(&mut rng, 4, 2, 3);
        let v = tx_cascade(&om, &ones).unwrap();
        assert!(max_abs(&(v - &om[2] * &om[1] * &om[0])) < 1e-13);
        let om = random_rx(&mut rng, 4, 2, 3);
        let v = rx_cascade(&om, &ones).unwrap();
        assert!(max_abs(&(v - &om[0] * &om[1] * &om[2])) < 1e-13);
    }

    #[test]
    fn three_layer_cascades_match_naive_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (n, s) = (4, 2);
        let om = random_tx(&mut rng, n, s, 3);
        let th = random_phases(&mut rng, 3 * n);
        let t = |l: usize| diag(&th.as_slice()[l * n..(l + 1) * n]);
        let naive = t(2) * &om[2] * t(1) * &om[1] * t(0) * &om[0];
        assert!(max_abs(&(tx_cascade(&om, &th).unwrap() - naive)) < 1e-12);

        let om = random_rx(&mut rng, n, s, 3);
        let naive = &om[0] * t(0) * &om[1] * t(1) * &om[2] * t(2);
        assert!(max_abs(&(rx_cascade(&om, &th).unwrap() - naive)) < 1e-12);
    }

    #[test]
    fn partial_cascade_boundaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let om = random_tx(&mut rng, 3, 2, 3);
        let th = random_phases(&mut rng, 9);
        let eye = CMat::identity(3, 3);
        let (minus, _) = partial_cascades(&om, &th, Side::Tx, 1).unwrap();
        assert_eq!(minus, eye);
        let (_, plus) = partial_cascades(&om, &th, Side::Tx, 3).unwrap();
        assert_eq!(plus, eye);
        assert!(matches!(partial_cascades(&om, &th, Side::Tx, 4), Err(SimError::Index { .. })));
        assert!(partial_cascades(&om, &th, Side::Tx, 0).is_err());
    }

    #[test]
    fn factorization_identity_every_layer() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (n, s) = (5, 2);
        let om = random_tx(&mut rng, n, s, 3);
        let th = random_phases(&mut rng, 3 * n);
        let v = tx_cascade(&om, &th).unwrap();
        for l in 1..=3 {
            let (minus, plus) = partial_cascades(&om, &th, Side::Tx, l).unwrap();
            let rebuilt = plus * diag(&th.as_slice()[(l - 1) * n..l * n]) * minus * &om[0];
            assert!(max_abs(&(&rebuilt - &v)) < 1e-10 * max_abs(&v));
        }
        let om = random_rx(&mut rng, n, s, 3);
        let v = rx_cascade(&om, &th).unwrap();
        for k in 1..=3 {
            let (minus, plus) = partial_cascades(&om, &th, Side::Rx, k).unwrap();
            let rebuilt = &om[0] * minus * diag(&th.as_slice()[(k - 1) * n..k * n]) * plus;
            assert!(max_abs(&(&rebuilt - &v)) < 1e-10 * max_abs(&v));
        }
    }

    #[test]
    fn rate_reference_cases() {
        let h = CMat::identity(3, 3);
        let r = achievable_rate(&h, &[0.5, 0.5, 0.5], 0.5).unwrap();
        assert!((r - 3.0).abs() < 1e-14);
        assert_eq!(achievable_rate(&h, &[0.0; 3], 1.0).unwrap(), 0.0);
        assert!(matches!(achievable_rate(&h, &[1.0; 3], 0.0), Err(SimError::Domain(_))));
    }

    #[test]
    fn rate_matches_scalar_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_mat(&mut rng, 3, 3);
        let p = [0.2, 1.3, 0.7];
        let noise = 0.05;
        let mut oracle = 0.0;
        for s in 0..3 {
            let signal = h[(s, s)].norm_sqr() * p[s];
            let mut intf = noise;
            for j in 0..3 {
                if j != s {
                    intf += h[(s, j)].norm_sqr() * p[j];
                }
            }
            oracle += (1.0 + signal / intf).log2();
        }
        assert!((achievable_rate(&h, &p, noise).unwrap() - oracle).abs() < 1e-13);
    }

    #[test]
    fn interference_reference_cases() {
        assert_eq!(interference_power(&CMat::from_diagonal(&CVec::from_vec(vec![C64::new(2.0, 1.0); 3]))), 0.0);
        let ones = CMat::from_element(2, 2, C64::new(1.0, 0.0));
        assert_eq!(interference_power(&ones), 2.0);
    }

    #[test]
    fn interference_matches_extraction_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let s = 4;
        let h = random_mat(&mut rng, s, s);
        // L picks the off-diagonal entries of vec(H) (column-major)
        let mut l = CMat::zeros(s * (s - 1), s * s);
        let mut row = 0;
        for j in 0..s {
            for i in 0..s {
                if i != j {
                    l[(row, i + s * j)] = C64::new(1.0, 0.0);
                    row += 1;
                }
            }
        }
        let vec_h = CVec::from_column_slice(h.as_slice());
        let oracle = (l * vec_h).norm_squared();
        assert!((interference_power(&h) - oracle).abs() < 1e-13);
        let diag_energy: f64 = (0..s).map(|i| h[(i, i)].norm_sqr()).sum();
        assert!((interference_power(&h) - (h.norm_squared() - diag_energy)).abs() < 1e-13);
    }

    #[test]
    fn phase_config_validation() {
        let good = CVec::from_element(4, phasor(0.3));
        assert!(PhaseConfig::new(good.clone(), good.clone(), 2, 2).is_ok());
        let mut bad = good.clone();
        bad[1] = C64::new(1.1, 0.0);
        assert!(matches!(PhaseConfig::new(bad, good.clone(), 2, 2), Err(SimError::Domain(_))));
        assert!(PhaseConfig::new(good.clone(), good, 3, 2).is_err());
    }

    #[test]
    fn power_vector_validation() {
        assert!(PowerVector::equal(4, 2.0, 1e-3).validate().is_ok());
        let off = PowerVector { p: vec![1.0, 0.5], total: 2.0, noise: 1.0 };
        assert!(off.validate().is_err());
        let neg = PowerVector { p: vec![2.5, -0.5], total: 2.0, noise: 1.0 };
        assert!(neg.validate().is_err());
    }
}
