//! Small complex linear-algebra helpers shared by the cascade code.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// `diag(theta) * m`, i.e. row `i` scaled by `theta[i]`.
pub fn scale_rows(mut m: CMat, theta: &[C64]) -> CMat {
    debug_assert_eq!(m.nrows(), theta.len());
    for (i, mut row) in m.row_iter_mut().enumerate() {
        row *= theta[i];
    }
    m
}

/// `m * diag(theta)`, i.e. column `j` scaled by `theta[j]`.
pub fn scale_cols(mut m: CMat, theta: &[C64]) -> CMat {
    debug_assert_eq!(m.ncols(), theta.len());
    for (j, mut col) in m.column_iter_mut().enumerate() {
        col *= theta[j];
    }
    m
}

/// Real inner product `Re(a^H b)` on C^n viewed as R^2n.
pub fn real_inner(a: &CVec, b: &CVec) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

pub fn norm(a: &CVec) -> f64 {
    real_inner(a, a).sqrt()
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// Unit-modulus phasor `exp(j phase)`.
#[inline]
pub fn phasor(phase: f64) -> C64 {
    C64::from_polar(1.0, phase)
}
