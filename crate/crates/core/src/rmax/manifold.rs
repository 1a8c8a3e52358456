//! The complex circle product `{theta in C^n : |theta_i| = 1}` as an embedded
//! submanifold of `C^n ~ R^2n` with metric `Re(a^H b)`.

use crate::linalg::{CVec, C64};

/// Orthogonal projection onto the tangent space at `theta`:
/// `v - Re(v o conj(theta)) o theta`.
pub fn project_to_tangent(v: &CVec, theta: &CVec) -> CVec {
    CVec::from_iterator(
        v.len(),
        v.iter().zip(theta.iter()).map(|(vi, ti)| vi - ti * (vi * ti.conj()).re),
    )
}

/// Riemannian gradient of a real function whose Wirtinger gradient with
/// respect to `conj(theta)` is `egrad`. The factor 2 converts the Wirtinger
/// gradient into the gradient for the real metric.
pub fn riemannian_gradient(egrad: &CVec, theta: &CVec) -> CVec {
    project_to_tangent(egrad, theta) * C64::new(2.0, 0.0)
}

/// Elementwise normalization retraction `(theta + t xi) / |theta + t xi|`.
/// An entry that lands exactly on zero keeps its old value.
pub fn retract(theta: &CVec, tangent: &CVec, step: f64) -> CVec {
    CVec::from_iterator(
        theta.len(),
        theta.iter().zip(tangent.iter()).map(|(ti, xi)| {
            let z = ti + xi * step;
            let r = z.norm();
            if r == 0.0 || !r.is_finite() {
                *ti
            } else {
                z / r
            }
        }),
    )
}
