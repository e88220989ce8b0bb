//! Spectral-plane maps, the WKB phase, Bohr–Sommerfeld eigenvalues, the
//! pole locus in the `w`-plane and the choice of the `Delta/Nabla` split.
//!
//! With `s = sqrt(-w)` (principal branch, `Re s > 0` off the positive real
//! axis):
//!
//! ```text
//! E(w) = (i/4)(s + 1/s),   D(w) = (i/4)(s - 1/s),   Q(w; x, t) = E x + D t
//! theta0(w) = psi(s + 1/s),  psi(v) = Psi(iv/4)
//! ```
//!
//! An eigenvalue `lambda_k = i v_k / 4` contributes two poles: a breather
//! pair `w = -exp(+-2 i acos(v_k/2))` on the unit circle when `v_k < 2`, or a
//! kink pair `w = -s^2, -1/s^2` with `s = (v_k + sqrt(v_k^2 - 4))/2` when
//! `v_k > 2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{numeric, FluxonError, Result};
use crate::profiles::ImpulseProfile;
use crate::quadrature::tanh_sinh;
use crate::roots::brent;

/// Side from which a boundary value on the positive real axis is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Limit from `Im w > 0`.
    Upper,
    /// Limit from `Im w < 0`.
    Lower,
}

/// Principal `sqrt(-w)`; errors on the closed positive real axis.
pub fn sqrt_neg(w: Complex64) -> Result<Complex64> {
    if w.im == 0.0 && w.re >= 0.0 {
        return Err(FluxonError::Domain(format!(
            "w = {w} lies on the branch cut [0, inf); request a boundary value with a Side"
        )));
    }
    Ok((-w).sqrt())
}

/// Boundary value of `sqrt(-w)` at real `w >= 0` from the given side.
pub fn sqrt_neg_side(w: f64, side: Side) -> Complex64 {
    let r = w.abs().sqrt();
    if w < 0.0 {
        return Complex64::new(r, 0.0);
    }
    // -w - i0 (upper side) has argument -pi, so sqrt = -i sqrt(w)
    match side {
        Side::Upper => Complex64::new(0.0, -r),
        Side::Lower => Complex64::new(0.0, r),
    }
}

/// `E(w) = (i/4)(sqrt(-w) + 1/sqrt(-w))`.
pub fn e_of(w: Complex64) -> Result<Complex64> {
    let s = sqrt_neg(w)?;
    Ok(Complex64::i() * 0.25 * (s + s.inv()))
}

/// `D(w) = (i/4)(sqrt(-w) - 1/sqrt(-w))`.
pub fn d_of(w: Complex64) -> Result<Complex64> {
    let s = sqrt_neg(w)?;
    Ok(Complex64::i() * 0.25 * (s - s.inv()))
}

/// `Q(w; x, t) = E(w) x + D(w) t`.
pub fn q_of(w: Complex64, x: f64, t: f64) -> Result<Complex64> {
    let s = sqrt_neg(w)?;
    Ok(q_of_s(s, x, t))
}

/// `E` evaluated on the positive real axis from one side.
pub fn e_of_side(w: f64, side: Side) -> Complex64 {
    let s = sqrt_neg_side(w, side);
    Complex64::i() * 0.25 * (s + s.inv())
}

pub(crate) fn q_of_s(s: Complex64, x: f64, t: f64) -> Complex64 {
    Complex64::i() * 0.25 * ((s + s.inv()) * x + (s - s.inv()) * t)
}

/// Continued phase `theta0(w) = psi(sqrt(-w) + 1/sqrt(-w))`.
pub fn theta0(profile: &ImpulseProfile, w: Complex64) -> Complex64 {
    let s = (-w).sqrt();
    profile.phase.psi(s + s.inv())
}

/// Derivative `theta0'(w) = -psi'(v) (1 - 1/s^2) / (2 s)`, `v = s + 1/s`.
pub fn theta0_prime(profile: &ImpulseProfile, w: Complex64) -> Complex64 {
    let s = (-w).sqrt();
    let v = s + s.inv();
    -profile.phase.dpsi(v) * (Complex64::new(1.0, 0.0) - (s * s).inv()) / (s * 2.0)
}

/// Weight `f(w) = theta0'(w) sqrt(-w) = -psi'(v) (1 + 1/w) / 2`.
///
/// This is the combination appearing in every contour integral of the
/// modulation module; it is single-valued for the sech family.
pub fn theta0_weight(profile: &ImpulseProfile, w: Complex64) -> Complex64 {
    let s = (-w).sqrt();
    let v = s + s.inv();
    -profile.phase.dpsi(v) * (Complex64::new(1.0, 0.0) + w.inv()) * 0.5
}

/// WKB phase `Psi(iv/4)` for `0 < v < -G(0)` by tanh-sinh quadrature.
///
/// ```text
/// Psi(iv/4) = 1/2 int_0^{G^-1(-v)} sqrt(G(s)^2 - v^2) ds
/// ```
pub fn wkb_phase(profile: &ImpulseProfile, v: f64) -> Result<f64> {
    if !(v > 0.0 && v < -profile.g0) {
        return Err(FluxonError::Domain(format!(
            "WKB phase requires 0 < v < {}, got {v}",
            -profile.g0
        )));
    }
    profile.wkb_phase_quadrature(v)
}

/// Reconstruct `G^{-1}(w)` from the WKB phase by the Abel inversion formula.
///
/// ```text
/// G^-1(w) = -(4/pi) int_{-w}^{-G(0)} phi(v) dv / sqrt(v^2 - w^2),
/// phi(v) = d Psi(iv/4) / dv
/// ```
///
/// `phi` is obtained by second-order finite differences of [`wkb_phase`]
/// with step `1e-5 (-G(0))`, one-sided near the ends of the range.
pub fn abel_inverse(profile: &ImpulseProfile, w: f64) -> Result<f64> {
    let top = -profile.g0;
    if !(w > profile.g0 && w < 0.0) {
        return Err(FluxonError::Domain(format!(
            "Abel inversion requires G(0) = {} < w < 0, got {w}",
            profile.g0
        )));
    }
    let h = 1e-5 * top;
    let psi = |v: f64| profile.wkb_phase_quadrature(v.clamp(0.0, top));
    let phi = |v: f64| -> Result<f64> {
        if v + h > top {
            Ok((3.0 * psi(v)? - 4.0 * psi(v - h)? + psi(v - 2.0 * h)?) / (2.0 * h))
        } else if v - h < 0.0 {
            Ok((-3.0 * psi(v)? + 4.0 * psi(v + h)? - psi(v + 2.0 * h)?) / (2.0 * h))
        } else {
            Ok((psi(v + h)? - psi(v - h)?) / (2.0 * h))
        }
    };
    let lo = -w;
    // v = lo + (top - lo) u^2 removes the inverse square root at v = -w.
    let val = tanh_sinh(
        |u: f64| {
            let v = lo + (top - lo) * u * u;
            match phi(v) {
                Ok(p) => p * 2.0 * ((top - lo) / (v + lo)).sqrt(),
                Err(_) => f64::NAN,
            }
        },
        0.0,
        1.0,
        1e-11,
    )?;
    Ok(-4.0 / PI * val)
}

/// Type of a pole of the condensate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoleKind {
    /// Negative real pole (from `v_k > 2`).
    Kink,
    /// Pole on the unit circle (from `v_k < 2`).
    Breather,
}

/// One point of the pole locus `P_N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoleRecord {
    /// Location in the `w`-plane, `|arg(-w)| < pi`.
    pub w: Complex64,
    /// Index of the eigenvalue `v_k` generating the pole.
    pub k: usize,
    /// Kink or breather.
    pub kind: PoleKind,
    /// Proportionality constant `(-1)^{k+1}`.
    pub sign: i8,
    /// Whether the pole belongs to `Delta`.
    pub in_delta: bool,
}

impl PoleRecord {
    /// `s = sqrt(-w)` with `Re s > 0`.
    pub fn s(&self) -> Complex64 {
        (-self.w).sqrt()
    }
}

/// Partition of the poles into `Delta` and `Nabla`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeltaConfig {
    /// All poles in `Nabla`.
    DeltaEmpty,
    /// All poles in `Delta`.
    NablaEmpty,
    /// `Delta` = kink poles in `[a, tau_N]`.
    DeltaPrecK(f64),
    /// `Delta` = kink poles in `[tau_N, b]`.
    DeltaKSucc(f64),
    /// `Nabla` = kink poles in `[a, tau_N]`, everything else in `Delta`.
    NablaPrecK(f64),
    /// `Nabla` = kink poles in `[tau_N, b]`, everything else in `Delta`.
    NablaKSucc(f64),
}

impl DeltaConfig {
    /// Default policy: `Delta` empty for `x >= 0`, `Nabla` empty for `x < 0`.
    pub fn sign_of_x(x: f64) -> Self {
        if x >= 0.0 {
            DeltaConfig::DeltaEmpty
        } else {
            DeltaConfig::NablaEmpty
        }
    }

    fn tau_inf(&self) -> Option<f64> {
        match *self {
            DeltaConfig::DeltaEmpty | DeltaConfig::NablaEmpty => None,
            DeltaConfig::DeltaPrecK(t)
            | DeltaConfig::DeltaKSucc(t)
            | DeltaConfig::NablaPrecK(t)
            | DeltaConfig::NablaKSucc(t) => Some(t),
        }
    }
}

/// WKB scattering data of the `N`-th condensate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringData {
    /// Condensate index.
    pub n: usize,
    /// `eps_N = ||G||_1 / (4 pi N)`.
    pub eps: f64,
    /// Eigenvalue parameters `v_k = -4 i lambda_k`, strictly decreasing.
    pub v: Vec<f64>,
    /// The `2N` poles, two per eigenvalue in order of `k`.
    pub poles: Vec<PoleRecord>,
    /// Current `Delta/Nabla` split.
    pub delta_config: DeltaConfig,
    /// Transition point when the split requires one.
    pub tau_n: Option<f64>,
}

impl ScatteringData {
    /// Number of breather eigenvalues `N_B`.
    pub fn breather_count(&self) -> usize {
        self.v.iter().filter(|&&v| v < 2.0).count()
    }

    /// Number of kink eigenvalues `N_K`.
    pub fn kink_count(&self) -> usize {
        self.v.iter().filter(|&&v| v > 2.0).count()
    }

    /// Number of poles currently in `Delta`.
    pub fn delta_count(&self) -> usize {
        self.poles.iter().filter(|p| p.in_delta).count()
    }

    /// Copy of the data with a new `Delta/Nabla` split applied.
    ///
    /// Mixed splits solve for the transition point `tau_N` from `tau_inf`.
    pub fn with_delta_config(&self, profile: &ImpulseProfile, config: DeltaConfig) -> Result<Self> {
        let mut out = self.clone();
        let tau_n = match config.tau_inf() {
            Some(ti) => {
                let ki = profile.kink_interval.ok_or_else(|| {
                    FluxonError::Domain("mixed Delta configurations need a kink interval".into())
                })?;
                let prec = matches!(config, DeltaConfig::DeltaPrecK(_) | DeltaConfig::NablaPrecK(_));
                let ok = if prec { ti > ki.a && ti < -1.0 } else { ti > -1.0 && ti < ki.b };
                if !ok {
                    return Err(FluxonError::Domain(format!(
                        "tau_inf = {ti} is on the wrong side of -1 for {config:?}"
                    )));
                }
                Some(transition_point(profile, ti, self.n)?)
            }
            None => None,
        };
        for p in &mut out.poles {
            let is_kink = p.kind == PoleKind::Kink;
            let w = p.w.re;
            p.in_delta = match (config, tau_n) {
                (DeltaConfig::DeltaEmpty, _) => false,
                (DeltaConfig::NablaEmpty, _) => true,
                (DeltaConfig::DeltaPrecK(_), Some(tn)) => is_kink && w <= tn,
                (DeltaConfig::DeltaKSucc(_), Some(tn)) => is_kink && w >= tn,
                (DeltaConfig::NablaPrecK(_), Some(tn)) => !(is_kink && w <= tn),
                (DeltaConfig::NablaKSucc(_), Some(tn)) => !(is_kink && w >= tn),
                _ => unreachable!("mixed configurations always carry tau_N"),
            };
        }
        out.delta_config = config;
        out.tau_n = tau_n;
        Ok(out)
    }
}

/// Bohr–Sommerfeld eigenvalues and pole locus for the `N`-th condensate.
///
/// Each `v_k` solves `Psi(iv/4) = pi eps_N (k + 1/2)` by Brent's method on
/// the strictly decreasing quadrature of the WKB phase. Eigenvalues within
/// `1e-9` of `v = 2` are rejected. The returned split is `Delta` empty.
pub fn bohr_sommerfeld(profile: &ImpulseProfile, n: usize) -> Result<ScatteringData> {
    if n == 0 {
        return Err(FluxonError::InvalidParameter("N must be at least 1".into()));
    }
    let eps = profile.l1_norm / (4.0 * PI * n as f64);
    let top = -profile.g0;
    let mut v = Vec::with_capacity(n);
    for k in 0..n {
        let target = PI * eps * (k as f64 + 0.5);
        let f = |vv: f64| profile.wkb_phase_quadrature(vv).map(|p| p - target).unwrap_or(f64::NAN);
        let root = brent(f, 0.0, top, 1e-14, 200)
            .map_err(|e| numeric("Bohr-Sommerfeld root", format!("k = {k}: {e}")))?;
        v.push(root);
    }
    let mut poles = Vec::with_capacity(2 * n);
    for (k, &vk) in v.iter().enumerate() {
        if (vk - 2.0).abs() < 1e-9 {
            return Err(FluxonError::DegenerateSpectrum(format!(
                "v_{k} = {vk} is within 1e-9 of 2 (double point); choose another N"
            )));
        }
        let sign = if k % 2 == 0 { -1 } else { 1 };
        let (s1, s2, kind) = if vk > 2.0 {
            let s = 0.5 * (vk + (vk * vk - 4.0).sqrt());
            (Complex64::new(s, 0.0), Complex64::new(1.0 / s, 0.0), PoleKind::Kink)
        } else {
            let th = (0.5 * vk).acos();
            (Complex64::from_polar(1.0, th), Complex64::from_polar(1.0, -th), PoleKind::Breather)
        };
        for s in [s1, s2] {
            poles.push(PoleRecord { w: -(s * s), k, kind, sign, in_delta: false });
        }
    }
    Ok(ScatteringData { n, eps, v, poles, delta_config: DeltaConfig::DeltaEmpty, tau_n: None })
}

/// Transition point `tau_N` near `tau_inf in (a, -1) U (-1, b)`.
///
/// Solves `theta0(tau_N) = pi eps_N floor(theta0(tau_inf) / (pi eps_N))` on
/// the monotone branch of `theta0` containing `tau_inf`, bracketing between
/// `tau_inf` and the endpoint of the kink interval where `theta0` vanishes.
pub fn transition_point(profile: &ImpulseProfile, tau_inf: f64, n: usize) -> Result<f64> {
    let ki = profile
        .kink_interval
        .ok_or_else(|| FluxonError::Domain("transition points need G(0) < -2".into()))?;
    if !(tau_inf > ki.a && tau_inf < ki.b) || (tau_inf + 1.0).abs() < 1e-12 {
        return Err(FluxonError::Domain(format!(
            "tau_inf = {tau_inf} must lie in ({}, -1) U (-1, {})",
            ki.a, ki.b
        )));
    }
    let eps = profile.l1_norm / (4.0 * PI * n as f64);
    let th = |w: f64| theta0(profile, Complex64::new(w, 0.0)).re;
    let level = PI * eps * (th(tau_inf) / (PI * eps)).floor();
    let end = if tau_inf < -1.0 { ki.a } else { ki.b };
    brent(|w| th(w) - level, tau_inf, end, 1e-15, 200)
}
