//! Admissible pure-impulse initial profiles `G(x)` and their derived
//! constants.
//!
//! A profile is even, negative and strictly increasing on `x > 0`. Two
//! families are supported:
//!
//! * the closed-form family `G(x) = -4A sech(x)`;
//! * profiles generated by a positive function `scrG(m)` on `(0, G(0)^2)`
//!   through the inverse-function formula
//!
//! ```text
//! x(G) = int_{G^2}^{G(0)^2} scrG(m) dm / (m sqrt(G(0)^2 - m))
//! ```
//!
//! Besides `G` itself the profile carries the WKB phase continuation used by
//! the spectral-plane integrals of the modulation module. For the sech family
//! the continuation is exact (`Psi(iv/4) = pi A - pi v / 4`). For other
//! profiles it is a Chebyshev interpolant in `v`, which is analytic but only
//! validated on the real interval; such profiles are flagged.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FluxonError, Result};
use crate::quadrature::tanh_sinh;
use crate::roots::{bisect, brent};

/// Quadrature tolerance used for all profile integrals.
pub(crate) const PROFILE_TOL: f64 = 1e-13;

/// Number of Chebyshev nodes used to continue the WKB phase of a
/// non-closed-form profile.
const CHEBYSHEV_NODES: usize = 48;

/// User-supplied generating function `scrG(m)` on `(0, G(0)^2)`.
pub type ScrGFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Which family a profile belongs to.
#[derive(Clone)]
pub enum ProfileKind {
    /// `G(x) = -4 A sech(x)` with amplitude `A > 0`.
    Sech {
        /// Amplitude `A`.
        amplitude: f64,
    },
    /// Profile generated by `scrG` with prescribed `G(0) = g0 < 0`.
    FromScrG {
        /// Generating function.
        scr_g: ScrGFn,
        /// Value `G(0)`.
        g0: f64,
    },
}

impl fmt::Debug for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileKind::Sech { amplitude } => f.debug_struct("Sech").field("amplitude", amplitude).finish(),
            ProfileKind::FromScrG { g0, .. } => f.debug_struct("FromScrG").field("g0", g0).finish_non_exhaustive(),
        }
    }
}

/// Endpoints `a < -1 < b < 0` of the interval filled by kink poles.
///
/// ```text
/// a = -(sqrt(G(0)^2 - 4) - G(0))^2 / 4,   b = 1/a
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KinkInterval {
    /// Left endpoint `a`.
    pub a: f64,
    /// Right endpoint `b = 1/a`.
    pub b: f64,
}

/// Derived constants of a profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileConstants {
    /// `G(0)`.
    pub g0: f64,
    /// `||G||_1`.
    pub l1_norm: f64,
    /// Positive root of `G(x) = -2`, present iff `G(0) < -2`.
    pub x_crit: Option<f64>,
    /// Kink interval, present iff `G(0) < -2`.
    pub kink_interval: Option<KinkInterval>,
}

/// Analytic continuation of `psi(v) = Psi(iv/4)` off the real `v` interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PhaseContinuation {
    /// Exact linear phase of the sech family.
    Linear {
        /// Amplitude `A`; `psi(v) = pi A - pi v / 4`.
        amplitude: f64,
    },
    /// Chebyshev interpolant on `[0, span]`.
    Chebyshev {
        /// Coefficients of `T_k(2v/span - 1)`.
        coeffs: Vec<f64>,
        /// Interval length `-G(0)`.
        span: f64,
    },
}

impl PhaseContinuation {
    /// `psi(v)` at complex `v`.
    pub fn psi(&self, v: Complex64) -> Complex64 {
        match self {
            PhaseContinuation::Linear { amplitude } => PI * amplitude - v * (PI / 4.0),
            PhaseContinuation::Chebyshev { coeffs, span } => clenshaw(coeffs, v * (2.0 / span) - 1.0),
        }
    }

    /// `psi'(v)` at complex `v`.
    pub fn dpsi(&self, v: Complex64) -> Complex64 {
        match self {
            PhaseContinuation::Linear { .. } => Complex64::new(-PI / 4.0, 0.0),
            PhaseContinuation::Chebyshev { coeffs, span } => {
                clenshaw(&chebyshev_derivative(coeffs), v * (2.0 / span) - 1.0) * (2.0 / span)
            }
        }
    }
}

fn clenshaw(c: &[f64], t: Complex64) -> Complex64 {
    let mut b1 = Complex64::new(0.0, 0.0);
    let mut b2 = Complex64::new(0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = t * b1 * 2.0 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + c[0]
}

fn chebyshev_derivative(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n < 2 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n];
    for k in (0..n - 1).rev() {
        let next = if k + 2 < n { d[k + 2] } else { 0.0 };
        d[k] = next + 2.0 * (k as f64 + 1.0) * c[k + 1];
    }
    d[0] *= 0.5;
    d.truncate(n - 1);
    d
}

/// An even Klaus–Shaw impulse profile with its derived constants.
#[derive(Debug, Clone)]
pub struct ImpulseProfile {
    /// Family and parameters.
    pub kind: ProfileKind,
    /// `G(0) < 0`.
    pub g0: f64,
    /// `||G||_1 > 0`.
    pub l1_norm: f64,
    /// Root of `G(x) = -2` when `G(0) < -2`.
    pub x_crit: Option<f64>,
    /// Kink interval when `G(0) < -2`.
    pub kink_interval: Option<KinkInterval>,
    /// Continuation of the WKB phase into the complex `v` plane.
    pub phase: PhaseContinuation,
}

/// Closed-form sech profile `G(x) = -4 A sech(x)`.
///
/// `x_crit` is populated iff `A > 1/2` (i.e. `G(0) < -2`).
pub fn make_sech_profile(amplitude: f64) -> Result<ImpulseProfile> {
    if !(amplitude > 0.0 && amplitude.is_finite()) {
        return Err(FluxonError::InvalidParameter(format!(
            "sech amplitude must be positive and finite, got {amplitude}"
        )));
    }
    let g0 = -4.0 * amplitude;
    let mut profile = ImpulseProfile {
        kind: ProfileKind::Sech { amplitude },
        g0,
        l1_norm: 4.0 * PI * amplitude,
        x_crit: None,
        kink_interval: kink_interval(g0),
        phase: PhaseContinuation::Linear { amplitude },
    };
    profile.x_crit = find_x_crit(&profile)?;
    Ok(profile)
}

/// Profile generated by `scr_g` on `(0, g0^2)` through the inverse-function
/// formula.
///
/// `scr_g` is sampled on a 64-point interior grid and near both endpoints;
/// any non-positive or non-finite value is rejected. The WKB phase is
/// continued by a Chebyshev interpolant; a warning is logged because the
/// modulation contour integrals are only validated for the exact (sech)
/// continuation.
pub fn profile_from_scr_g(scr_g: ScrGFn, g0: f64) -> Result<ImpulseProfile> {
    if !(g0 < 0.0 && g0.is_finite()) {
        return Err(FluxonError::InvalidParameter(format!("G(0) must be negative, got {g0}")));
    }
    let top = g0 * g0;
    for i in 0..=65 {
        let m = match i {
            0 => top * 1e-12,
            65 => top * (1.0 - 1e-12),
            _ => top * i as f64 / 65.0,
        };
        let v = scr_g(m);
        if !(v > 0.0 && v.is_finite()) {
            return Err(FluxonError::InvalidProfile(format!(
                "scrG must be positive on (0, G(0)^2); scrG({m}) = {v}"
            )));
        }
    }
    // ||G||_1 = 2 int_0^top scrG(m) dm / sqrt(m (top - m)); with m = top sin^2(th)
    // the integrand becomes the smooth 4 scrG(top sin^2 th) on [0, pi/2].
    let l1_integrand = {
        let s = scr_g.clone();
        move |th: f64| {
            let sn = th.sin();
            4.0 * s(top * sn * sn)
        }
    };
    let l1_norm = tanh_sinh(l1_integrand, 0.0, 0.5 * PI, PROFILE_TOL)?;
    let mut profile = ImpulseProfile {
        kind: ProfileKind::FromScrG { scr_g, g0 },
        g0,
        l1_norm,
        x_crit: None,
        kink_interval: kink_interval(g0),
        phase: PhaseContinuation::Linear { amplitude: 0.0 },
    };
    profile.phase = chebyshev_phase(&profile)?;
    profile.x_crit = find_x_crit(&profile)?;
    log::warn!(
        "profile generated from scrG: the WKB phase continuation is a Chebyshev interpolant; \
         modulation contour integrals are validated only for the sech family"
    );
    Ok(profile)
}

/// Derived constants `{g0, ||G||_1, x_crit, a, b}` of a profile.
pub fn profile_constants(profile: &ImpulseProfile) -> ProfileConstants {
    ProfileConstants {
        g0: profile.g0,
        l1_norm: profile.l1_norm,
        x_crit: profile.x_crit,
        kink_interval: profile.kink_interval,
    }
}

fn kink_interval(g0: f64) -> Option<KinkInterval> {
    if g0 < -2.0 {
        let r = (g0 * g0 - 4.0).sqrt() - g0;
        let a = -0.25 * r * r;
        Some(KinkInterval { a, b: 1.0 / a })
    } else {
        None
    }
}

fn find_x_crit(profile: &ImpulseProfile) -> Result<Option<f64>> {
    if profile.g0 >= -2.0 {
        return Ok(None);
    }
    let hi = 10.0 * profile.g0.abs();
    let root = bisect(|x| profile.g(x) + 2.0, 0.0, hi, 1e-12)?;
    Ok(Some(root))
}

fn chebyshev_phase(profile: &ImpulseProfile) -> Result<PhaseContinuation> {
    let span = -profile.g0;
    let n = CHEBYSHEV_NODES;
    let mut values = Vec::with_capacity(n);
    for j in 0..n {
        let theta = PI * (j as f64 + 0.5) / n as f64;
        let v = 0.5 * span * (1.0 + theta.cos());
        values.push(profile.wkb_phase_quadrature(v)?);
    }
    let mut coeffs = vec![0.0; n];
    for (k, c) in coeffs.iter_mut().enumerate() {
        let mut s = 0.0;
        for (j, val) in values.iter().enumerate() {
            let theta = PI * (j as f64 + 0.5) / n as f64;
            s += val * (k as f64 * theta).cos();
        }
        *c = 2.0 * s / n as f64;
    }
    coeffs[0] *= 0.5;
    Ok(PhaseContinuation::Chebyshev { coeffs, span })
}

impl ImpulseProfile {
    /// Amplitude `A` for sech profiles.
    pub fn sech_amplitude(&self) -> Option<f64> {
        match self.kind {
            ProfileKind::Sech { amplitude } => Some(amplitude),
            ProfileKind::FromScrG { .. } => None,
        }
    }

    /// Whether the WKB phase continuation is exact (closed form).
    pub fn has_exact_continuation(&self) -> bool {
        matches!(self.phase, PhaseContinuation::Linear { .. })
    }

    /// `x(m)` for `m = G^2 in (0, G(0)^2]`, by quadrature of the inverse formula.
    fn x_of_m(&self, m: f64) -> Result<f64> {
        match &self.kind {
            ProfileKind::Sech { amplitude } => Ok((4.0 * amplitude / m.sqrt()).acosh()),
            ProfileKind::FromScrG { scr_g, g0 } => {
                let top = g0 * g0;
                if m >= top {
                    return Ok(0.0);
                }
                // mu = top - s^2 removes the endpoint singularity
                tanh_sinh(
                    |s: f64| {
                        let mu = top - s * s;
                        2.0 * scr_g(mu) / mu
                    },
                    0.0,
                    (top - m).sqrt(),
                    PROFILE_TOL,
                )
            }
        }
    }

    /// Evaluate `G(x)`.
    ///
    /// Sech profiles use the closed form; generated profiles invert `x(G^2)`
    /// by Brent's method in `log m`.
    pub fn g(&self, x: f64) -> f64 {
        let x = x.abs();
        match &self.kind {
            ProfileKind::Sech { amplitude } => -4.0 * amplitude / x.cosh(),
            ProfileKind::FromScrG { g0, .. } => {
                if x == 0.0 {
                    return *g0;
                }
                let top = g0 * g0;
                let f = |y: f64| self.x_of_m(y.exp()).map(|v| v - x).unwrap_or(f64::NAN);
                let hi = top.ln();
                let mut lo = hi - 1.0;
                while f(lo) < 0.0 && lo > -700.0 {
                    lo -= 4.0;
                }
                match brent(f, lo, hi, 1e-15, 200) {
                    Ok(y) => -(0.5 * y).exp(),
                    Err(_) => 0.0,
                }
            }
        }
    }

    /// Inverse `G^{-1}(w) >= 0` for `G(0) <= w < 0`.
    pub fn g_inverse(&self, w: f64) -> Result<f64> {
        if !(w >= self.g0 && w < 0.0) {
            return Err(FluxonError::Domain(format!(
                "G^-1 requires G(0) = {} <= w < 0, got {w}",
                self.g0
            )));
        }
        self.x_of_m(w * w)
    }

    /// Raw quadrature of the WKB phase `Psi(iv/4)` for `0 <= v <= -G(0)`.
    ///
    /// Sech profiles integrate the defining formula in `x`; generated
    /// profiles use the equivalent single integral over `m = G^2`
    /// (obtained by integrating by parts and exchanging the order of
    /// integration):
    ///
    /// ```text
    /// Psi = 1/2 int_0^{G^-1(-v)} sqrt(G(s)^2 - v^2) ds
    ///     = 1/2 int_{v^2}^{G(0)^2} scrG(m) sqrt(m - v^2) / (m sqrt(G(0)^2 - m)) dm
    /// ```
    pub(crate) fn wkb_phase_quadrature(&self, v: f64) -> Result<f64> {
        let span = -self.g0;
        if v >= span {
            return Ok(0.0);
        }
        match &self.kind {
            ProfileKind::Sech { .. } => {
                if v <= 0.0 {
                    return Ok(0.25 * self.l1_norm);
                }
                let xmax = self.g_inverse(-v)?;
                let val = tanh_sinh(
                    |s: f64| {
                        let g = self.g(s);
                        (g * g - v * v).max(0.0).sqrt()
                    },
                    0.0,
                    xmax,
                    PROFILE_TOL,
                )?;
                Ok(0.5 * val)
            }
            ProfileKind::FromScrG { scr_g, g0 } => {
                if v <= 0.0 {
                    return Ok(0.25 * self.l1_norm);
                }
                let top = g0 * g0;
                let v2 = v * v;
                // m = top - s^2 removes the endpoint singularity at m = top
                let val = tanh_sinh(
                    |s: f64| {
                        let m = top - s * s;
                        if m <= v2 {
                            return 0.0;
                        }
                        2.0 * scr_g(m) * (m - v2).sqrt() / m
                    },
                    0.0,
                    (top - v2).sqrt(),
                    PROFILE_TOL,
                )?;
                Ok(0.5 * val)
            }
        }
    }
}
