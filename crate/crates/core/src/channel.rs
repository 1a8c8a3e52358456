//! Spatially correlated Rayleigh channel between the outermost TX-SIM layer
//! and the outermost RX-SIM layer, with distance-dependent path loss.
//!
//! `H = R_rx^{1/2} H_w R_tx^{1/2}` where `H_w` has i.i.d. `CN(0, xi)` entries.

use std::f64::consts::PI;

use nalgebra::linalg::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SimError};
use crate::geometry::Point3;
use crate::linalg::{max_abs, CMat, C64};

/// Independent random streams drawn from one trial seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum RngPurpose {
    Channel = 1,
    PhaseInit = 2,
}

/// ChaCha8 generator keyed by `seed`, with the purpose selecting the stream.
/// Same `(seed, purpose)` always gives the same sequence.
pub fn rng_for(seed: u64, purpose: RngPurpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossParams {
    pub reference_distance: f64,
    pub distance: f64,
    pub a1: f64,
    pub a2: f64,
    pub wavelength: f64,
}

impl PathLossParams {
    fn validate(&self) -> Result<()> {
        if !(self.reference_distance > 0.0) || !(self.wavelength > 0.0) {
            return Err(SimError::Domain("reference distance and wavelength must be positive".into()));
        }
        if self.distance < self.reference_distance {
            return Err(SimError::Domain(format!(
                "link distance {} is below reference distance {}",
                self.distance, self.reference_distance
            )));
        }
        Ok(())
    }

    /// Path gain in dB: free-space loss at the reference distance plus the
    /// distance-exponent loss, both counted as attenuation.
    pub fn gain_db(&self) -> Result<f64> {
        self.validate()?;
        let reference = 10.0 * self.a1 * (4.0 * PI * self.reference_distance / self.wavelength).log10();
        let excess = 10.0 * self.a2 * (self.distance / self.reference_distance).log10();
        Ok(-reference - excess)
    }

    /// The dB expression evaluated with the signs exactly as commonly printed,
    /// `10 a1 log10(4 pi d0 / lambda) + 10 a2 log10(d0 / d)`.
    pub fn literal_db(&self) -> Result<f64> {
        self.validate()?;
        Ok(10.0 * self.a1 * (4.0 * PI * self.reference_distance / self.wavelength).log10()
            + 10.0 * self.a2 * (self.reference_distance / self.distance).log10())
    }
}

pub fn path_gain_linear(params: &PathLossParams) -> Result<f64> {
    Ok(10f64.powf(params.gain_db()? / 10.0))
}

pub fn path_gain_linear_literal(params: &PathLossParams) -> Result<f64> {
    Ok(10f64.powf(params.literal_db()? / 10.0))
}

/// `sin(pi x) / (pi x)` with `sinc(0) = 1`.
pub fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Isotropic-scattering correlation `R[i][j] = sinc(2 d_ij / lambda)`.
pub fn correlation_matrix(positions: &[Point3], wavelength: f64) -> CMat {
    let n = positions.len();
    CMat::from_fn(n, n, |i, j| {
        if i == j {
            return C64::new(1.0, 0.0);
        }
        let (a, b) = (positions[i], positions[j]);
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        C64::new(sinc(2.0 * d / wavelength), 0.0)
    })
}

const HERMITIAN_TOL: f64 = 1e-12;

/// Hermitian PSD square root. Negative eigenvalues (numerical noise) are
/// clamped to zero first.
pub fn psd_sqrt(r: &CMat) -> Result<CMat> {
    if !r.is_square() {
        return Err(SimError::dims("psd_sqrt", "square matrix", format!("{}x{}", r.nrows(), r.ncols())));
    }
    let asym = max_abs(&(r - r.adjoint()));
    if asym > HERMITIAN_TOL * max_abs(r).max(1.0) {
        return Err(SimError::Domain(format!("matrix is not Hermitian (max asymmetry {asym:e})")));
    }
    let sym = (r + r.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| C64::new(v.max(0.0).sqrt(), 0.0));
    let q = &eig.eigenvectors;
    let mut scaled = q.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= roots[j];
    }
    Ok(scaled * q.adjoint())
}

/// Smallest eigenvalue of a Hermitian matrix, before any clamping.
pub fn min_eigenvalue(r: &CMat) -> f64 {
    let sym = (r + r.adjoint()) * C64::new(0.5, 0.0);
    SymmetricEigen::new(sym).eigenvalues.min()
}

#[derive(Debug, Clone)]
pub struct CorrelationPair {
    pub r_tx: CMat,
    pub r_rx: CMat,
    pub sqrt_r_tx: CMat,
    pub sqrt_r_rx: CMat,
}

impl CorrelationPair {
    pub fn new(r_tx: CMat, r_rx: CMat) -> Result<Self> {
        let sqrt_r_tx = psd_sqrt(&r_tx)?;
        let sqrt_r_rx = psd_sqrt(&r_rx)?;
        Ok(Self { r_tx, r_rx, sqrt_r_tx, sqrt_r_rx })
    }

    /// Uncorrelated pair of the given sizes.
    pub fn identity(tx_atoms: usize, rx_atoms: usize) -> Self {
        let (tx, rx) = (CMat::identity(tx_atoms, tx_atoms), CMat::identity(rx_atoms, rx_atoms));
        Self { r_tx: tx.clone(), r_rx: rx.clone(), sqrt_r_tx: tx, sqrt_r_rx: rx }
    }

    /// Correlation matrices from the meta-atom layouts of one layer of each SIM.
    pub fn from_layouts(tx: &[Point3], rx: &[Point3], wavelength: f64) -> Result<Self> {
        Self::new(correlation_matrix(tx, wavelength), correlation_matrix(rx, wavelength))
    }

    pub fn tx_atoms(&self) -> usize {
        self.r_tx.nrows()
    }

    pub fn rx_atoms(&self) -> usize {
        self.r_rx.nrows()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// `M x N`, from the transmit SIM to the receive SIM.
    pub h_tilde: CMat,
    pub seed: u64,
    pub xi_linear: f64,
}

/// Draw `H = sqrt(R_rx) H_w sqrt(R_tx)` with `H_w ~ CN(0, xi)` entrywise.
pub fn sample_channel(seed: u64, xi_linear: f64, corr: &CorrelationPair) -> ChannelRealization {
    let (m, n) = (corr.rx_atoms(), corr.tx_atoms());
    let mut rng = rng_for(seed, RngPurpose::Channel);
    let sd = (xi_linear / 2.0).sqrt();
    // column-major fill keeps the draw order fixed for a given seed
    let h_w = CMat::from_fn(m, n, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(sd * re, sd * im)
    });
    let h_tilde = &corr.sqrt_r_rx * h_w * &corr.sqrt_r_tx;
    ChannelRealization { h_tilde, seed, xi_linear }
}
