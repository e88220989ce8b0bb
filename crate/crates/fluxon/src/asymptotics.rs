//! Small-time elliptic asymptotics of the fluxon condensate and their
//! theta-function cross-checks.
//!
//! Given a solved [`ModulationState`] and `eps = A/N`, the leading-order
//! wave samples are, with `W = 2 Phi K(m) / (pi eps)`:
//!
//! ```text
//! librational (case L):  cos(u/2) = dn(W;m),  sin(u/2) = -sqrt(m) sn(W;m),
//!                        eps u_t  = -(4K/pi) dPhi/dt sqrt(m) cn(W;m)
//! rotational  (case R):  cos(u/2) = cn(W;m),  sin(u/2) = -sn(W;m),
//!                        eps u_t  = -(4K/pi) dPhi/dt dn(W;m)
//! ```
//!
//! The same quantities arise as ratios of Riemann theta functions in the
//! outer parametrix; [`theta_crosscheck`] evaluates those ratios directly
//! (fast phase `nu = pi W / (2K)`) and reports the discrepancy.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::{complete_k, jacobi_sn_cn_dn, riemann_theta, riemann_theta_dz, EllipticParams};
use crate::error::{FluxonError, Result};
use crate::exact_ist::WaveSample;
use crate::modulation::{omega_theorem, CaseTag, ModulationState};

type C = Complex64;

/// Fast elliptic argument `W = 2 Phi K(m) / (pi eps)`.
pub fn fast_argument(state: &ModulationState, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(FluxonError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    Ok(2.0 * state.phi * complete_k(state.m)? / (PI * eps))
}

/// Librational wave sample (case L).
pub fn evaluate_librational(state: &ModulationState, eps: f64) -> Result<WaveSample> {
    if state.case_tag != CaseTag::L {
        return Err(FluxonError::CaseMismatch(format!(
            "librational formulas need a case L state, got case R at (x,t) = ({}, {})",
            state.x, state.t
        )));
    }
    let w = fast_argument(state, eps)?;
    let k = complete_k(state.m)?;
    let (sn, cn, dn) = jacobi_sn_cn_dn(w, state.m)?;
    let rm = state.m.sqrt();
    Ok(WaveSample::new(
        state.x,
        state.t,
        dn,
        -rm * sn,
        -4.0 * k / PI * state.dphi_dt * rm * cn,
    ))
}

/// Rotational wave sample (case R).
pub fn evaluate_rotational(state: &ModulationState, eps: f64) -> Result<WaveSample> {
    if state.case_tag != CaseTag::R {
        return Err(FluxonError::CaseMismatch(format!(
            "rotational formulas need a case R state, got case L at (x,t) = ({}, {})",
            state.x, state.t
        )));
    }
    let w = fast_argument(state, eps)?;
    let k = complete_k(state.m)?;
    let (sn, cn, dn) = jacobi_sn_cn_dn(w, state.m)?;
    Ok(WaveSample::new(state.x, state.t, cn, -sn, -4.0 * k / PI * state.dphi_dt * dn))
}

/// Dispatch on the case of the state.
pub fn evaluate(state: &ModulationState, eps: f64) -> Result<WaveSample> {
    match state.case_tag {
        CaseTag::L => evaluate_librational(state, eps),
        CaseTag::R => evaluate_rotational(state, eps),
    }
}

/// Outcome of [`theta_crosscheck`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaReport {
    /// Fast phase `nu`.
    pub nu: f64,
    /// `cos(u/2)` from theta ratios (including the Delta parity sign).
    pub c_theta: C,
    /// `sin(u/2)` from theta ratios (including the Delta parity sign).
    pub s_theta: C,
    /// `cos(u/2)` from the Jacobi functions.
    pub c_jacobi: f64,
    /// `sin(u/2)` from the Jacobi functions.
    pub s_jacobi: f64,
    /// Case R only: theta form of `eps u_t` and its Jacobi counterpart.
    pub g_pair: Option<(C, f64)>,
    /// Largest absolute discrepancy between the two routes.
    pub discrepancy: f64,
}

/// Evaluate the outer-parametrix theta ratios at fast phase `nu` and compare
/// with the Jacobi forms at `W = 2 nu K / pi`.
///
/// ```text
/// case L:  H = (H0 + 2 pi i)/2,  zeta = asin(sqrt m),  phi_{1,2} = nu -+ pi/2
///          C = e^{i zeta}/2  Th(i pi)/Th(0) [Th(i phi2)/Th(i phi1) + Th(i phi1)/Th(i phi2)]
///          S = e^{i zeta}/2i Th(i pi)/Th(0) [Th(i phi2)/Th(i phi1) - Th(i phi1)/Th(i phi2)]
/// case R:  H = 2 H0,  phi_{1,2} = nu -+ (pi/2 + i H0/4),  q = (1 + sqrt(1-m))/sqrt(m)
///          r = e^{H/8} Th(H/2)/Th(0),   a = Th(2i phi1)/Th(2i phi2)
///          C = q r (a e^{i nu} + e^{-i nu}/a)/2,   S = -q r (a e^{i nu} - e^{-i nu}/a)/2i
///          G = 4 dPhi/dt [Th'/Th(2i phi2) - Th'/Th(2i phi1) - 1/2]
/// ```
///
/// The theta values are multiplied by `(-1)^{delta_parity}`; the Jacobi
/// forms are parity free, so the parity must be even (or absorbed by a
/// half-period shift of `nu`) for agreement.
pub fn theta_crosscheck(state: &ModulationState, nu: f64, delta_parity: u32) -> Result<ThetaReport> {
    let ep = EllipticParams::new(state.m)?;
    let w = 2.0 * nu * ep.k / PI;
    let (sn, cn, dn) = jacobi_sn_cn_dn(w, state.m)?;
    let sign = if delta_parity.is_multiple_of(2) { 1.0 } else { -1.0 };
    let i = C::i();
    let (c_theta, s_theta, c_j, s_j, g_pair) = match state.case_tag {
        CaseTag::L => {
            let hh = C::new(0.5 * ep.h0, PI);
            let th = |z: C| riemann_theta(z, hh);
            let zeta = state.m.sqrt().asin();
            let ratio = th(C::new(0.0, PI))? / th(C::new(0.0, 0.0))?;
            let t1 = th(i * (nu - 0.5 * PI))?;
            let t2 = th(i * (nu + 0.5 * PI))?;
            let pre = C::from_polar(1.0, zeta) * ratio;
            let c = pre * (t2 / t1 + t1 / t2) * 0.5;
            let s = pre * (t2 / t1 - t1 / t2) / (i * 2.0);
            (c * sign, s * sign, dn, -state.m.sqrt() * sn, None)
        }
        CaseTag::R => {
            let h0 = ep.h0;
            let hh = C::new(2.0 * h0, 0.0);
            let th = |z: C| riemann_theta(z, hh);
            let dth = |z: C| riemann_theta_dz(z, hh);
            let q14 = (1.0 + (1.0 - state.m).sqrt()) / state.m.sqrt();
            let r = th(hh * 0.5)? / th(C::new(0.0, 0.0))? * (hh / 8.0).exp();
            let phi1 = C::new(nu - 0.5 * PI, -0.25 * h0);
            let phi2 = C::new(nu + 0.5 * PI, 0.25 * h0);
            let (z1, z2) = (i * phi1 * 2.0, i * phi2 * 2.0);
            let a1 = th(z1)? / th(z2)?;
            let e = C::from_polar(1.0, nu);
            let c = (a1 * e + e.inv() / a1) * (0.5 * q14) * r;
            let s = -(a1 * e - e.inv() / a1) * (0.5 * q14) * r / i;
            let bracket = dth(z2)? / th(z2)? - dth(z1)? / th(z1)? - 0.5;
            let g = bracket * (4.0 * state.dphi_dt);
            let g_j = -4.0 * ep.k / PI * state.dphi_dt * dn;
            (c * sign, s * sign, cn, -sn, Some((g * sign, g_j)))
        }
    };
    let mut discrepancy = (c_theta - c_j).norm().max((s_theta - s_j).norm());
    if let Some((g, gj)) = g_pair {
        discrepancy = discrepancy.max((g - gj).norm());
    }
    if !discrepancy.is_finite() {
        return Err(crate::error::numeric("theta cross-check", "non-finite theta ratio"));
    }
    Ok(ThetaReport { nu, c_theta, s_theta, c_jacobi: c_j, s_jacobi: s_j, g_pair, discrepancy })
}

/// Outcome of [`differential_consistency`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifferentialReport {
    /// Time spacing of the states.
    pub h: f64,
    /// `max |eps dS/dt - C G / 2|` over interior states.
    pub residual_s: f64,
    /// `max |eps dC/dt + S G / 2|` over interior states.
    pub residual_c: f64,
}

impl DifferentialReport {
    /// Larger of the two residuals.
    pub fn max_residual(&self) -> f64 {
        self.residual_s.max(self.residual_c)
    }
}

/// Check `eps dS/dt = C G / 2` and `eps dC/dt = -S G / 2` by centred
/// differences along equally spaced states at fixed `x`.
pub fn differential_consistency(states: &[ModulationState], eps: f64) -> Result<DifferentialReport> {
    if states.len() < 5 {
        return Err(FluxonError::InvalidParameter(format!(
            "differential check needs at least 5 states, got {}",
            states.len()
        )));
    }
    let h = states[1].t - states[0].t;
    if states.windows(2).any(|w| ((w[1].t - w[0].t) - h).abs() > 1e-9 * h.abs().max(1e-300)) {
        return Err(FluxonError::InvalidParameter("states must be equally spaced in t".into()));
    }
    let samples: Vec<WaveSample> = states.iter().map(|s| evaluate(s, eps)).collect::<Result<_>>()?;
    let mut rs: f64 = 0.0;
    let mut rc: f64 = 0.0;
    for j in 1..samples.len() - 1 {
        let (a, b, c) = (&samples[j - 1], &samples[j], &samples[j + 1]);
        let ds = (c.sin_half - a.sin_half) / (2.0 * h);
        let dc = (c.cos_half - a.cos_half) / (2.0 * h);
        rs = rs.max((eps * ds - 0.5 * b.cos_half * b.eps_ut).abs());
        rc = rc.max((eps * dc + 0.5 * b.sin_half * b.eps_ut).abs());
    }
    Ok(DifferentialReport { h, residual_s: rs, residual_c: rc })
}

/// Exact periodic wavetrain obtained by freezing the modulation at `state`
/// and advancing the phase linearly:
/// `Phi + k (x - x0) - omega (t - t0)` with `k = omega n_p`.
pub fn local_wavetrain(state: &ModulationState, eps: f64, x: f64, t: f64) -> Result<WaveSample> {
    let omega = omega_theorem(state)?;
    let k = omega * state.n_p;
    let mut frozen = *state;
    frozen.phi = state.phi + k * (x - state.x) - omega * (t - state.t);
    frozen.x = x;
    frozen.t = t;
    evaluate(&frozen, eps)
}
