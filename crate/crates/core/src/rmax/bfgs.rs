//! Riemannian BFGS on the complex circle product.
//!
//! Maximizes a smooth objective over unit-modulus vectors. The inverse
//! Hessian approximation is kept in two-loop form; stored pairs are carried
//! to each new iterate by tangent projection. With `memory == 0` every pair
//! is kept, which reproduces full BFGS from a scaled identity start.

use std::collections::VecDeque;

use crate::linalg::{norm, real_inner, CVec, C64};

use super::manifold::{project_to_tangent, retract, riemannian_gradient};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BfgsConfig {
    pub max_iters: usize,
    /// Stop once the Riemannian gradient norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop once an accepted step changes the objective by less than this,
    /// relative to `max(1, |f|)`.
    pub value_tolerance: f64,
    /// Armijo sufficient-increase constant.
    pub armijo: f64,
    pub backtrack: f64,
    pub max_line_search_evals: usize,
    /// Largest per-coordinate move (radians, roughly) for a plain gradient step.
    pub initial_step: f64,
    /// Stored curvature pairs; 0 keeps all of them.
    pub memory: usize,
    /// Skip the update when `<s, y>` does not exceed this.
    pub curvature_threshold: f64,
}

impl Default for BfgsConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            gradient_tolerance: 1e-6,
            value_tolerance: 1e-10,
            armijo: 1e-4,
            backtrack: 0.5,
            max_line_search_evals: 40,
            initial_step: 0.5,
            memory: 0,
            curvature_threshold: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseOptOutcome {
    pub theta: CVec,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    /// Riemannian gradient norm at the returned point.
    pub grad_norm: f64,
    pub converged: bool,
    /// The last line search found no acceptable step; `theta` is the best
    /// iterate seen.
    pub line_search_failed: bool,
}

struct Pair {
    s: CVec,
    y: CVec,
    rho: f64,
}

/// `H q` by the two-loop recursion.
fn apply_inverse_hessian(q: &CVec, pairs: &VecDeque<Pair>) -> CVec {
    let mut q = q.clone();
    let mut alphas = Vec::with_capacity(pairs.len());
    for pair in pairs.iter().rev() {
        let a = pair.rho * real_inner(&pair.s, &q);
        q -= &pair.y * C64::new(a, 0.0);
        alphas.push(a);
    }
    if let Some(last) = pairs.back() {
        let gamma = real_inner(&last.s, &last.y) / real_inner(&last.y, &last.y);
        q *= C64::new(gamma, 0.0);
    }
    for (pair, a) in pairs.iter().zip(alphas.into_iter().rev()) {
        let b = pair.rho * real_inner(&pair.y, &q);
        q += &pair.s * C64::new(a - b, 0.0);
    }
    q
}

/// Maximize `value` over the circle product starting at `theta0`.
///
/// `egrad` returns the Wirtinger gradient with respect to `conj(theta)`.
/// Accepted steps strictly increase the objective.
pub fn optimize_phases<F, G>(mut value: F, mut egrad: G, theta0: &CVec, config: &BfgsConfig) -> PhaseOptOutcome
where
    F: FnMut(&CVec) -> f64,
    G: FnMut(&CVec) -> CVec,
{
    let mut x = theta0.clone();
    // minimize phi = -f internally
    let mut phi = -value(&x);
    let initial_value = -phi;
    let mut grad = -riemannian_gradient(&egrad(&x), &x);
    let mut pairs: VecDeque<Pair> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut line_search_failed = false;

    while iterations < config.max_iters {
        let grad_norm = norm(&grad);
        if grad_norm <= config.gradient_tolerance {
            converged = true;
            break;
        }

        let mut dir = -apply_inverse_hessian(&grad, &pairs);
        let mut slope = real_inner(&grad, &dir);
        if !(slope < 0.0) || !slope.is_finite() {
            pairs.clear();
            dir = -grad.clone();
            slope = -grad_norm * grad_norm;
        }

        let mut step = if pairs.is_empty() {
            let largest = dir.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()));
            (config.initial_step / largest).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..config.max_line_search_evals {
            let trial = retract(&x, &dir, step);
            let trial_phi = -value(&trial);
            if trial_phi <= phi + config.armijo * step * slope && trial_phi < phi {
                accepted = Some((trial, trial_phi));
                break;
            }
            step *= config.backtrack;
        }
        let Some((next, next_phi)) = accepted else {
            line_search_failed = true;
            break;
        };
        iterations += 1;

        let next_grad = -riemannian_gradient(&egrad(&next), &next);
        let s = project_to_tangent(&(&dir * C64::new(step, 0.0)), &next);
        let y = &next_grad - project_to_tangent(&grad, &next);

        // carry the stored pairs to the new tangent space
        pairs = pairs
            .into_iter()
            .filter_map(|p| {
                let s = project_to_tangent(&p.s, &next);
                let y = project_to_tangent(&p.y, &next);
                let sy = real_inner(&s, &y);
                (sy > config.curvature_threshold).then(|| Pair { s, y, rho: 1.0 / sy })
            })
            .collect();
        let sy = real_inner(&s, &y);
        if sy > config.curvature_threshold {
            pairs.push_back(Pair { s, y, rho: 1.0 / sy });
            if config.memory > 0 && pairs.len() > config.memory {
                pairs.pop_front();
            }
        }

        let decrease = phi - next_phi;
        x = next;
        phi = next_phi;
        grad = next_grad;
        if decrease <= config.value_tolerance * phi.abs().max(1.0) {
            converged = true;
            break;
        }
    }

    PhaseOptOutcome {
        grad_norm: norm(&grad),
        theta: x,
        value: -phi,
        initial_value,
        iterations,
        converged,
        line_search_failed,
    }
}
