//! Rate maximization: alternate Riemannian BFGS over the TX phases, then the
//! RX phases, then WMMSE power allocation.
//!
//! The Euclidean gradients follow from the layer factorization of the
//! effective channel. For TX layer `l`,
//! `H_sj = sum_n B[s,n] theta_n A[n,j]` with `A = V_tx^{l-} Omega_tx^1` and
//! `B = V_rx H_tilde V_tx^{l+}`; the RX side is the same with
//! `C = Omega_rx^1 V_rx^{k-}` and `D = V_rx^{k+} H_tilde V_tx`. Writing
//! `T_s` for the total received power plus noise and `I_s` for the
//! interference plus noise on stream `s`,
//!
//! ```text
//! grad_n = 1/ln2 sum_s conj(B[s,n]) sum_j H_sj p_j conj(A[n,j]) (1/T_s - [j != s]/I_s)
//! ```
//!
//! which is the gradient with respect to `conj(theta)`.

pub mod bfgs;
pub mod manifold;

use std::time::Instant;

use crate::cascade::{
    all_partial_cascades, interference_power, rate_unchecked, rx_cascade, tx_cascade, PhaseConfig, PowerVector, Side,
};
use crate::channel::ChannelRealization;
use crate::error::{Result, SimError};
use crate::geometry::PropagationSet;
use crate::linalg::{CMat, CVec, C64};
use crate::power::{wmmse_power, PowerProblem, WmmseConfig};
use crate::solution::{Solution, TraceRecord};

pub use bfgs::{optimize_phases, BfgsConfig, PhaseOptOutcome};
pub use manifold::{project_to_tangent, retract, riemannian_gradient};

/// The fixed part of a link: propagation matrices and one channel draw.
#[derive(Debug, Clone, Copy)]
pub struct Link<'a> {
    pub props: &'a PropagationSet,
    pub channel: &'a ChannelRealization,
}

impl<'a> Link<'a> {
    pub fn new(props: &'a PropagationSet, channel: &'a ChannelRealization) -> Result<Self> {
        let want = (props.rx_atoms(), props.tx_atoms());
        if channel.h_tilde.shape() != want {
            return Err(SimError::dims("Link", format!("{want:?}"), format!("{:?}", channel.h_tilde.shape())));
        }
        Ok(Self { props, channel })
    }

    pub fn h_tilde(&self) -> &CMat {
        &self.channel.h_tilde
    }

    pub fn effective(&self, phases: &PhaseConfig) -> Result<CMat> {
        crate::cascade::effective_channel(self.channel, phases, self.props).map(|e| e.h)
    }
}

/// Rate as a function of one side's phases with the other side frozen.
///
/// For the TX side the frozen half is `V_rx H_tilde` (`S x N`); for the RX
/// side it is `H_tilde V_tx` (`M x S`).
pub struct SideObjective<'a> {
    link: Link<'a>,
    side: Side,
    frozen: CMat,
    power: &'a [f64],
    noise: f64,
}

impl<'a> SideObjective<'a> {
    pub fn new(link: Link<'a>, phases: &PhaseConfig, side: Side, power: &'a PowerVector) -> Result<Self> {
        power.validate()?;
        let props = link.props;
        if power.p.len() != props.streams() {
            return Err(SimError::dims("SideObjective power", props.streams(), power.p.len()));
        }
        let frozen = match side {
            Side::Tx => rx_cascade(&props.omega_rx, &phases.theta_rx)? * link.h_tilde(),
            Side::Rx => link.h_tilde() * tx_cascade(&props.omega_tx, &phases.theta_tx)?,
        };
        if phases.theta(side).len() != props_len(props, side) {
            return Err(SimError::dims("SideObjective phases", props_len(props, side), phases.theta(side).len()));
        }
        Ok(Self { link, side, frozen, power: &power.p, noise: power.noise })
    }

    pub fn channel(&self, theta: &CVec) -> CMat {
        let props = self.link.props;
        match self.side {
            Side::Tx => &self.frozen * tx_cascade(&props.omega_tx, theta).expect("checked dimensions"),
            Side::Rx => rx_cascade(&props.omega_rx, theta).expect("checked dimensions") * &self.frozen,
        }
    }

    pub fn value(&self, theta: &CVec) -> f64 {
        rate_unchecked(&self.channel(theta), self.power, self.noise)
    }

    /// Wirtinger gradient of the rate with respect to `conj(theta)`.
    pub fn egrad(&self, theta: &CVec) -> CVec {
        let props = self.link.props;
        let h = self.channel(theta);
        let coeff = rate_coefficients(&h, self.power, self.noise);
        let (omega, atoms) = match self.side {
            Side::Tx => (&props.omega_tx, props.tx_atoms()),
            Side::Rx => (&props.omega_rx, props.rx_atoms()),
        };
        let partials = all_partial_cascades(omega, theta, self.side).expect("checked dimensions");
        let mut out = CVec::zeros(theta.len());
        for (l, (minus, plus)) in partials.iter().enumerate() {
            let (left, right) = match self.side {
                Side::Tx => (&self.frozen * plus, minus * &omega[0]),
                Side::Rx => (&omega[0] * minus, plus * &self.frozen),
            };
            let block = layer_gradient(&left, &right, &coeff);
            out.rows_mut(l * atoms, atoms).copy_from(&block);
        }
        out
    }
}

fn props_len(props: &PropagationSet, side: Side) -> usize {
    match side {
        Side::Tx => props.tx_atoms() * props.tx_layers(),
        Side::Rx => props.rx_atoms() * props.rx_layers(),
    }
}

/// `c_sj = H_sj p_j (1/T_s - [j != s]/I_s) / ln 2`.
fn rate_coefficients(h: &CMat, p: &[f64], noise: f64) -> CMat {
    let s = h.nrows();
    let mut coeff = CMat::zeros(s, s);
    for i in 0..s {
        let signal = h[(i, i)].norm_sqr() * p[i];
        let interference: f64 = noise + (0..s).filter(|&j| j != i).map(|j| h[(i, j)].norm_sqr() * p[j]).sum::<f64>();
        let total = interference + signal;
        for j in 0..s {
            let weight = if j == i { 1.0 / total } else { 1.0 / total - 1.0 / interference };
            coeff[(i, j)] = h[(i, j)] * (p[j] * weight / std::f64::consts::LN_2);
        }
    }
    coeff
}

/// `grad_n = sum_s conj(left[s,n]) sum_j coeff[s,j] conj(right[n,j])`.
fn layer_gradient(left: &CMat, right: &CMat, coeff: &CMat) -> CVec {
    let (s, n) = left.shape();
    CVec::from_iterator(
        n,
        (0..n).map(|a| {
            let mut acc = C64::new(0.0, 0.0);
            for i in 0..s {
                let mut inner = C64::new(0.0, 0.0);
                for j in 0..s {
                    inner += coeff[(i, j)] * right[(a, j)].conj();
                }
                acc += left[(i, a)].conj() * inner;
            }
            acc
        }),
    )
}

/// Gradient of the rate with respect to `conj(theta_tx)`, layer blocks stacked.
pub fn euclidean_gradient_tx(link: Link<'_>, phases: &PhaseConfig, power: &PowerVector) -> Result<CVec> {
    Ok(SideObjective::new(link, phases, Side::Tx, power)?.egrad(&phases.theta_tx))
}

/// Gradient of the rate with respect to `conj(theta_rx)`, layer blocks stacked.
pub fn euclidean_gradient_rx(link: Link<'_>, phases: &PhaseConfig, power: &PowerVector) -> Result<CVec> {
    Ok(SideObjective::new(link, phases, Side::Rx, power)?.egrad(&phases.theta_rx))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RmaxConfig {
    pub max_outer_iters: usize,
    /// Stop when the relative rate gain of one outer iteration drops below this.
    pub rate_tolerance: f64,
    pub phase: BfgsConfig,
    pub power: WmmseConfig,
}

impl Default for RmaxConfig {
    fn default() -> Self {
        Self {
            max_outer_iters: 50,
            rate_tolerance: 1e-6,
            phase: BfgsConfig::default(),
            power: WmmseConfig::default(),
        }
    }
}

/// One BFGS pass over one side; returns the gradient norm at the result.
fn update_side(link: Link<'_>, phases: &mut PhaseConfig, side: Side, power: &PowerVector, cfg: &BfgsConfig) -> Result<f64> {
    let objective = SideObjective::new(link, phases, side, power)?;
    let out = optimize_phases(|t| objective.value(t), |t| objective.egrad(t), phases.theta(side), cfg);
    *phases.theta_mut(side) = out.theta;
    Ok(out.grad_norm)
}

/// Alternating optimization from `init` with starting powers `p0`.
///
/// The rate recorded after every sub-step never decreases.
pub fn run_rmax(link: Link<'_>, init: &PhaseConfig, p0: &PowerVector, config: &RmaxConfig) -> Result<Solution> {
    let started = Instant::now();
    p0.validate()?;
    let mut phases = init.clone();
    let mut power = p0.clone();
    let mut h = link.effective(&phases)?;
    let mut rate = rate_unchecked(&h, &power.p, power.noise);
    let mut step_rates = vec![rate];
    let mut trace = vec![TraceRecord {
        iter: 0,
        rate,
        grad_norm_tx: f64::NAN,
        grad_norm_rx: f64::NAN,
        g: interference_power(&h),
        wall_ms: 0.0,
    }];
    
    let mut outer = 0;
    while outer < config.max_outer_iters {
        outer += 1;
        let before = rate;

        let grad_norm_tx = update_side(link, &mut phases, Side::Tx, &power, &config.phase)?;
        h = link.effective(&phases)?;
        step_rates.push(rate_unchecked(&h, &power.p, power.noise));

        let grad_norm_rx = update_side(link, &mut phases, Side::Rx, &power, &config.phase)?;
        h = link.effective(&phases)?;
        let phase_rate = rate_unchecked(&h, &power.p, power.noise);
        step_rates.push(phase_rate);

        let problem = PowerProblem::new(h.clone(), power.total, power.noise)?;
        // a stream at zero power stays there under the warm start, so an
        // equal-power restart competes with it
        let warm = wmmse_power(&problem, &power.p, &config.power)?;
        let fresh = wmmse_power(&problem, &vec![power.total / power.p.len() as f64; power.p.len()], &config.power)?;
        let next = if problem.rate(&fresh.p) > problem.rate(&warm.p) { fresh } else { warm };
        if problem.rate(&next.p) >= phase_rate {
            power = next;
        }
        rate = rate_unchecked(&h, &power.p, power.noise);
        step_rates.push(rate);

        trace.push(TraceRecord {
            iter: outer,
            rate,
            grad_norm_tx,
            grad_norm_rx,
            g: interference_power(&h),
            wall_ms: started.elapsed().as_secs_f64() * 1e3,
        });
        if rate - before <= config.rate_tolerance * before.abs().max(f64::MIN_POSITIVE) {
            break;
        }
    }

    Ok(Solution {
        interference: interference_power(&h),
        phases,
        power,
        rate,
        outer_iters: outer,
        trace,
        step_rates,
        update_interference: Vec::new(),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}
