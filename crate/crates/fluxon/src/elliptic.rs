//! Complete elliptic integrals, Jacobi elliptic functions and the
//! one-dimensional Riemann theta function.
//!
//! The hot-path evaluations ([`complete_k`], [`complete_e`],
//! [`jacobi_sn_cn_dn`]) use the arithmetic–geometric mean. The theta series
//! [`riemann_theta`] and the theta-ratio forms of the Jacobi functions
//! ([`jacobi_via_theta`]) are used to cross-check identities and the
//! theta-function form of the asymptotic wave samples.
//!
//! ```text
//! K(m) = int_0^{pi/2} (1 - m sin^2 s)^{-1/2} ds = pi / (2 AGM(1, sqrt(1-m)))
//! E(m) = int_0^{pi/2} (1 - m sin^2 s)^{1/2} ds
//! Theta(z; H) = sum_n exp(H n^2 / 2 + n z),   Re H < 0
//! ```

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FluxonError, Result};

/// Complete elliptic integral of the first kind `K(m)` for `0 <= m < 1`.
///
/// Values of `m` within `1e-12` of 1 are accepted but logged, since `K`
/// grows logarithmically there.
pub fn complete_k(m: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&m) {
        return Err(FluxonError::Domain(format!("K(m) requires 0 <= m < 1, got {m}")));
    }
    if 1.0 - m < 1e-12 {
        log::warn!("K(m) evaluated at m = {m}, close to the logarithmic singularity");
    }
    let (a, _) = agm(1.0, (1.0 - m).sqrt());
    Ok(FRAC_PI_2 / a)
}

/// Complete elliptic integral of the second kind `E(m)` for `0 <= m <= 1`.
///
/// ```text
/// E(m) = K(m) (1 - sum_{n>=0} 2^{n-1} c_n^2),  c_0 = sqrt(m)
/// ```
pub fn complete_e(m: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&m) {
        return Err(FluxonError::Domain(format!("E(m) requires 0 <= m <= 1, got {m}")));
    }
    if m == 1.0 {
        return Ok(1.0);
    }
    let mut a = 1.0;
    let mut b = (1.0 - m).sqrt();
    let mut c = m.sqrt();
    let mut sum = 0.5 * c * c;
    let mut pow = 0.5;
    for _ in 0..64 {
        if c.abs() < 1e-17 {
            break;
        }
        let an = 0.5 * (a + b);
        let bn = (a * b).sqrt();
        c = 0.5 * (a - b);
        a = an;
        b = bn;
        pow *= 2.0;
        sum += pow * c * c;
    }
    Ok(FRAC_PI_2 / a * (1.0 - sum))
}

/// Derivatives `(K'(m), E'(m))` from the classical differential identities.
///
/// ```text
/// K'(m) = (E - (1-m) K) / (2 m (1-m)),   E'(m) = (E - K) / (2m)
/// ```
pub fn complete_k_e_derivatives(m: f64) -> Result<(f64, f64)> {
    if !(0.0 < m && m < 1.0) {
        return Err(FluxonError::Domain(format!(
            "K'(m), E'(m) require 0 < m < 1, got {m}"
        )));
    }
    let k = complete_k(m)?;
    let e = complete_e(m)?;
    Ok(((e - (1.0 - m) * k) / (2.0 * m * (1.0 - m)), (e - k) / (2.0 * m)))
}

fn agm(mut a: f64, mut b: f64) -> (f64, usize) {
    let mut n = 0;
    while (a - b).abs() > 1e-16 * a && n < 64 {
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
        n += 1;
    }
    (a, n)
}

/// Bundle of complete integrals and the theta parameter for one `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EllipticParams {
    /// Elliptic parameter in `(0, 1)`.
    pub m: f64,
    /// `K(m)`.
    pub k: f64,
    /// `K(1 - m)`.
    pub k_prime: f64,
    /// `E(m)`.
    pub e_int: f64,
    /// Negative theta parameter `H0 = -2 pi K(1-m) / K(m)`.
    pub h0: f64,
}

impl EllipticParams {
    /// Evaluate all quantities for `0 < m < 1`.
    pub fn new(m: f64) -> Result<Self> {
        if !(0.0 < m && m < 1.0) {
            return Err(FluxonError::Domain(format!(
                "elliptic parameter must lie in (0,1), got {m}"
            )));
        }
        let k = complete_k(m)?;
        let k_prime = complete_k(1.0 - m)?;
        let e_int = complete_e(m)?;
        Ok(EllipticParams { m, k, k_prime, e_int, h0: -2.0 * PI * k_prime / k })
    }

    /// Residual of the Legendre relation `E K' + E' K - K K' - pi/2`.
    pub fn legendre_residual(&self) -> f64 {
        let e_prime = complete_e(1.0 - self.m).unwrap_or(f64::NAN);
        self.e_int * self.k_prime + e_prime * self.k - self.k * self.k_prime - FRAC_PI_2
    }
}

/// Jacobi elliptic functions `(sn, cn, dn)(u; m)` for real `u`, `0 <= m < 1`.
///
/// Descending Landen / AGM scheme: with `a_0 = 1`, `b_0 = sqrt(1-m)`,
/// `c_0 = sqrt(m)`, iterate to `a_N`, set `phi_N = 2^N a_N u` and recurse
/// `phi_{n-1} = (phi_n + asin(c_n sin(phi_n) / a_n)) / 2`; then
/// `sn = sin phi_0`, `cn = cos phi_0`, `dn = sqrt(1 - m sn^2)`.
pub fn jacobi_sn_cn_dn(u: f64, m: f64) -> Result<(f64, f64, f64)> {
    if !(0.0..1.0).contains(&m) {
        return Err(FluxonError::Domain(format!(
            "Jacobi functions require 0 <= m < 1, got {m}"
        )));
    }
    if m < 1e-300 {
        return Ok((u.sin(), u.cos(), 1.0));
    }
    let (a, c) = landen_sequence(m);
    let n = a.len() - 1;
    let mut phi = 2f64.powi(n as i32) * a[n] * u;
    for j in (1..=n).rev() {
        phi = 0.5 * (phi + (c[j] * phi.sin() / a[j]).asin());
    }
    let sn = phi.sin();
    let cn = phi.cos();
    let dn = (1.0 - m * sn * sn).max(0.0).sqrt();
    Ok((sn, cn, dn))
}

fn landen_sequence(m: f64) -> (Vec<f64>, Vec<f64>) {
    let mut a = vec![1.0];
    let mut b = (1.0 - m).sqrt();
    let mut c = vec![m.sqrt()];
    while c[c.len() - 1].abs() > 1e-16 && a.len() < 64 {
        let an = a[a.len() - 1];
        let a_next = 0.5 * (an + b);
        let c_next = 0.5 * (an - b);
        b = (an * b).sqrt();
        a.push(a_next);
        c.push(c_next);
    }
    (a, c)
}

fn theta_terms(z: Complex64, h: Complex64) -> i64 {
    let rh = -h.re;
    let base = (80.0 / rh).sqrt().ceil() as i64 + 4;
    base + (z.re.abs() / rh).ceil() as i64
}

/// Riemann theta function `Theta(z; H) = sum_n exp(H n^2/2 + n z)`.
///
/// The series is truncated at `|n| <= ceil(sqrt(80/|Re H|)) + 4`, widened by
/// `|Re z| / |Re H|` so that the dominant terms are always included.
pub fn riemann_theta(z: Complex64, h: Complex64) -> Result<Complex64> {
    if h.re >= 0.0 {
        return Err(FluxonError::Domain(format!(
            "theta series requires Re H < 0, got H = {h}"
        )));
    }
    let n = theta_terms(z, h);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in -n..=n {
        let kf = k as f64;
        acc += (h * (0.5 * kf * kf) + z * kf).exp();
    }
    Ok(acc)
}

/// Derivative `d Theta / dz (z; H) = sum_n n exp(H n^2/2 + n z)`.
pub fn riemann_theta_dz(z: Complex64, h: Complex64) -> Result<Complex64> {
    if h.re >= 0.0 {
        return Err(FluxonError::Domain(format!(
            "theta series requires Re H < 0, got H = {h}"
        )));
    }
    let n = theta_terms(z, h);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in -n..=n {
        let kf = k as f64;
        acc += (h * (0.5 * kf * kf) + z * kf).exp() * kf;
    }
    Ok(acc)
}

/// Jacobi functions evaluated through theta ratios with parameter `H0(m)`.
///
/// ```text
/// u = K z / (pi i)
/// sn = i e^{-z/2} Th(0) Th(z + i pi - H0/2) / (Th(-H0/2) Th(z + i pi))
/// cn = e^{-z/2} Th(i pi) Th(z - H0/2) / (Th(-H0/2) Th(z + i pi))
/// dn = Th(i pi) Th(z) / (Th(0) Th(z + i pi))
/// ```
///
/// Intended for identity checks; use [`jacobi_sn_cn_dn`] in hot loops.
pub fn jacobi_via_theta(u: f64, m: f64) -> Result<(Complex64, Complex64, Complex64)> {
    let p = EllipticParams::new(m)?;
    let h0 = Complex64::new(p.h0, 0.0);
    let ipi = Complex64::new(0.0, PI);
    let z = Complex64::new(0.0, PI * u / p.k);
    let th = |w: Complex64| riemann_theta(w, h0);
    let th0 = th(Complex64::new(0.0, 0.0))?;
    let th_ipi = th(ipi)?;
    let th_half = th(-h0 * 0.5)?;
    let den = th(z + ipi)?;
    let emz = (-z * 0.5).exp();
    let sn = Complex64::i() * emz * th0 * th(z + ipi - h0 * 0.5)? / (th_half * den);
    let cn = emz * th_ipi * th(z - h0 * 0.5)? / (th_half * den);
    let dn = th_ipi * th(z)? / (th0 * den);
    Ok((sn, cn, dn))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn special_values() {
        assert!((complete_k(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!((complete_e(0.0).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert_eq!(complete_e(1.0).unwrap(), 1.0);
        assert!(complete_k(1.0).is_err());
    }

    #[test]
    fn jacobi_circular_limit() {
        let (s, c, d) = jacobi_sn_cn_dn(0.8, 0.0).unwrap();
        assert!((s - 0.8f64.sin()).abs() < 1e-15 && (c - 0.8f64.cos()).abs() < 1e-15);
        assert_eq!(d, 1.0);
    }
}
