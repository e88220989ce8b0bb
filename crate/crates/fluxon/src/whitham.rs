//! Whitham modulation theory for the single-phase wavetrains: the averaged
//! action `J(E)`, characteristic velocities, type classification and
//! residual audits of computed modulation fields.
//!
//! ```text
//! case R (E > 1):      m = 2/(1+E),  J  = (4/pi) sqrt((1+E)/2) E(m),
//!                                    J' = (1/pi) sqrt(2/(1+E)) K(m)
//! case L (|E| < 1):    m = (1+E)/2,  J  = (8/pi) E(m) - (4/pi)(1-E) K(m),
//!                                    J' = (2/pi) K(m)
//! both:                J'' = J / (4 (1 - E^2))
//! ```
//!
//! The modulation fields `(n_p, E)` satisfy
//!
//! ```text
//! d/dt [n_p, E] + A d/dx [n_p, E] = 0,
//! A = 1/N [[n_p (J J'' + J'^2), -(1-n_p^2)^2 J' J''], [J J', n_p (J J'' + J'^2)]],
//! N = n_p^2 J J'' + J'^2,
//! ```
//!
//! which is diagonalized by the band endpoints `w_j` with velocities
//!
//! ```text
//! c_j = [s(1+s) J + (w_j - w_{1-j})(1-s) J'] / [s(1-s) J + (w_j - w_{1-j})(1+s) J'],
//! s = sqrt(w0 w1).
//! ```

use std::f64::consts::PI;
use std::thread;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::{complete_e, complete_k};
use crate::error::{FluxonError, Result};
use crate::modulation::{solve_at, solve_column, Band, CaseTag, ModulationOptions, ModulationState};
use crate::profiles::ImpulseProfile;
use crate::quadrature::gauss_kronrod;

type C = Complex64;

/// Absolute and relative targets of the band integrals; near the band
/// endpoint the integrand carries cancellation noise, so tighter targets are
/// not attainable in double precision.
const GK_ABS: f64 = 1e-12;
const GK_REL: f64 = 1e-11;

/// `(J, J', J'')` at energy `e` for the given case.
pub fn j_and_derivatives(e: f64, case: CaseTag) -> Result<(f64, f64, f64)> {
    let (j, jp) = match case {
        CaseTag::R => {
            if !(e > 1.0) {
                return Err(FluxonError::Domain(format!("rotational J requires E > 1, got {e}")));
            }
            let m = 2.0 / (1.0 + e);
            (
                4.0 / PI * (0.5 * (1.0 + e)).sqrt() * complete_e(m)?,
                1.0 / PI * (2.0 / (1.0 + e)).sqrt() * complete_k(m)?,
            )
        }
        CaseTag::L => {
            if !(e > -1.0 && e < 1.0) {
                return Err(FluxonError::Domain(format!("librational J requires |E| < 1, got {e}")));
            }
            let m = 0.5 * (1.0 + e);
            let k = complete_k(m)?;
            (8.0 / PI * complete_e(m)? - 4.0 / PI * (1.0 - e) * k, 2.0 / PI * k)
        }
    };
    Ok((j, jp, j / (4.0 * (1.0 - e * e))))
}

/// Velocity formula shared by `c_j` (with `J, J'`) and `c^_j` (with `U, V`).
fn velocity_pair(band: &Band, a: f64, b: f64) -> Result<(C, C)> {
    let s = band.sqrt_pi();
    let w = [band.w0, band.w1];
    let mut out = [C::new(0.0, 0.0); 2];
    for j in 0..2 {
        let d = w[j] - w[1 - j];
        let num = d * ((1.0 - s) * b) + s * (1.0 + s) * a;
        let den = d * ((1.0 + s) * b) + s * (1.0 - s) * a;
        if den.norm() < 1e-300 || (w[0] - w[1]).norm() < 1e-14 {
            return Err(FluxonError::Domain(format!(
                "characteristic velocity is singular for roots {} and {}",
                band.w0, band.w1
            )));
        }
        out[j] = num / den;
    }
    Ok((out[0], out[1]))
}

/// Energy `E = -p / sqrt(w0 w1)` of a band.
pub fn band_energy(band: &Band) -> f64 {
    -band.p() / band.sqrt_pi()
}

/// Characteristic velocities `(c0, c1)` from the closed-form `J`.
pub fn characteristic_velocities(band: &Band) -> Result<(C, C)> {
    let (j, jp, _) = j_and_derivatives(band_energy(band), band.case())?;
    velocity_pair(band, j, jp)
}

/// Band integrals `(U, V)` whose ratio equals `J / J'`.
///
/// ```text
/// V = 2 Re int_path dxi / (sqrt(-xi) (-R(xi)))
/// U = 2 Re int_path (2 xi - w0 - w1) dxi / (sqrt(-xi) (-R(xi))) / sqrt(w0 w1)
/// ```
///
/// The path runs from the band endpoint `w0` to `1` along the circle through
/// `w0, conj(w0), 1` in case L, and from `1` along the upper half of the
/// circle through `1` and the band midpoint in case R.
pub fn band_integrals(band: &Band) -> Result<(f64, f64)> {
    let (w0, w1) = (band.w0, band.w1);
    let path: Box<dyn Fn(f64) -> (C, C)> = match band.case() {
        CaseTag::L => {
            let (c, rho) = band.circle();
            let ph0 = (w0 - c).arg();
            Box::new(move |u: f64| {
                let u = u.max(1e-7);
                let ph = ph0 * (1.0 - u * u);
                let e = C::from_polar(1.0, ph);
                (c + e * rho, C::i() * e * (rho * (-2.0 * ph0 * u)))
            })
        }
        CaseTag::R => {
            let mid = band.p();
            let c = 0.5 * (1.0 + mid);
            let rho = 0.5 * (1.0 - mid);
            Box::new(move |u: f64| {
                let e = C::from_polar(1.0, PI * u);
                (c + e * rho, C::i() * e * (rho * PI))
            })
        }
    };
    let kernel = |u: f64| {
        let (xi, d) = path(u);
        d / ((-xi).sqrt() * (-band.r(xi)))
    };
    let v = gauss_kronrod(kernel, 0.0, 1.0, GK_ABS, GK_REL, 2000)?;
    let u_int = gauss_kronrod(
        |u: f64| {
            let (xi, _) = path(u);
            kernel(u) * (xi * 2.0 - w0 - w1)
        },
        0.0,
        1.0,
        GK_ABS,
        GK_REL,
        2000,
    )?;
    Ok((2.0 * u_int.re / band.sqrt_pi(), 2.0 * v.re))
}

/// Velocities `(c^0, c^1)` from the band integrals `U, V`.
pub fn hat_velocities(band: &Band) -> Result<(C, C)> {
    let (u, v) = band_integrals(band)?;
    velocity_pair(band, u, v)
}

/// Type of the Whitham system at a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WhithamType {
    /// `J J'' < 0`: real characteristic velocities.
    Hyperbolic,
    /// `J J'' > 0`: complex-conjugate characteristic velocities.
    Elliptic,
    /// `J J'' = 0` or not finite.
    Degenerate,
}

/// Classification together with its discriminant `J J''`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    /// Type of the system.
    pub kind: WhithamType,
    /// `J(E) J''(E)`.
    pub discriminant: f64,
}

/// Classify the Whitham system at energy `e` evaluated with the `J` of `case`.
pub fn classify(e: f64, case: CaseTag) -> Result<Classification> {
    let (j, _, jpp) = j_and_derivatives(e, case)?;
    let d = j * jpp;
    let kind = if !d.is_finite() || d == 0.0 {
        WhithamType::Degenerate
    } else if d < 0.0 {
        WhithamType::Hyperbolic
    } else {
        WhithamType::Elliptic
    };
    Ok(Classification { kind, discriminant: d })
}

/// Coefficient matrix `A(n_p, E)` of the quasilinear system.
pub fn system_matrix(n_p: f64, e: f64, case: CaseTag) -> Result<Matrix2<f64>> {
    let (j, jp, jpp) = j_and_derivatives(e, case)?;
    let n = n_p * n_p * j * jpp + jp * jp;
    let diag = n_p * (j * jpp + jp * jp);
    let w = 1.0 - n_p * n_p;
    Ok(Matrix2::new(diag, -w * w * jp * jpp, j * jp, diag) / n)
}

/// Modulation states on a tensor grid, indexed `[ix][it]`.
#[derive(Debug, Clone)]
pub struct FieldTable {
    /// Uniform `x` grid.
    pub xs: Vec<f64>,
    /// Uniform `t` grid (sorted, non-negative).
    pub ts: Vec<f64>,
    /// States, one column per `x`.
    pub states: Vec<Vec<ModulationState>>,
}

/// Solve the modulation conditions on a tensor grid; the `x` columns are
/// continued independently on separate threads.
pub fn field_table(
    profile: &ImpulseProfile,
    xs: &[f64],
    ts: &[f64],
    options: &ModulationOptions,
) -> Result<FieldTable> {
    let columns: Vec<Result<Vec<ModulationState>>> = thread::scope(|scope| {
        let handles: Vec<_> = xs
            .iter()
            .map(|&x| scope.spawn(move || solve_column(profile, x, ts, options)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(crate::error::numeric("field table", "worker panicked"))))
            .collect()
    });
    let states = columns.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(FieldTable { xs: xs.to_vec(), ts: ts.to_vec(), states })
}

/// One row of a residual table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    /// Position.
    pub x: f64,
    /// Time.
    pub t: f64,
    /// Max-norm of `d_t U + A d_x U`, `U = (n_p, E)`.
    pub system: f64,
    /// Max over `j` of `|d_t w_j + c_j d_x w_j|`.
    pub riemann: f64,
}

fn residual_from_stencil(
    c: &ModulationState,
    xm: &ModulationState,
    xp: &ModulationState,
    tm: &ModulationState,
    tp: &ModulationState,
) -> Result<ResidualRow> {
    let dx = |f: fn(&ModulationState) -> f64| (f(xp) - f(xm)) / (xp.x - xm.x);
    let dt = |f: fn(&ModulationState) -> f64| (f(tp) - f(tm)) / (tp.t - tm.t);
    let a = system_matrix(c.n_p, c.energy_e, c.case_tag)?;
    let ux = nalgebra::Vector2::new(dx(|s| s.n_p), dx(|s| s.energy_e));
    let ut = nalgebra::Vector2::new(dt(|s| s.n_p), dt(|s| s.energy_e));
    let system = (ut + a * ux).amax();
    let (c0, c1) = characteristic_velocities(&c.band())?;
    let r0 = (tp.w0 - tm.w0) / (tp.t - tm.t) + c0 * (xp.w0 - xm.w0) / (xp.x - xm.x);
    let r1 = (tp.w1 - tm.w1) / (tp.t - tm.t) + c1 * (xp.w1 - xm.w1) / (xp.x - xm.x);
    Ok(ResidualRow { x: c.x, t: c.t, system, riemann: r0.norm().max(r1.norm()) })
}

/// Centred-difference residuals of the Whitham system at every interior
/// node of a field table.
pub fn whitham_residual(table: &FieldTable) -> Result<Vec<ResidualRow>> {
    let (nx, nt) = (table.xs.len(), table.ts.len());
    if nx < 3 || nt < 3 {
        return Err(FluxonError::InvalidParameter("residual needs at least 3x3 nodes".into()));
    }
    let mut rows = Vec::new();
    for i in 1..nx - 1 {
        for j in 1..nt - 1 {
            let s = &table.states;
            rows.push(residual_from_stencil(
                &s[i][j],
                &s[i - 1][j],
                &s[i + 1][j],
                &s[i][j - 1],
                &s[i][j + 1],
            )?);
        }
    }
    Ok(rows)
}

/// Residuals at a single point from a five-point stencil of spacing `h`
/// (requires `t >= h`).
pub fn whitham_residual_at(
    profile: &ImpulseProfile,
    x: f64,
    t: f64,
    h: f64,
    options: &ModulationOptions,
) -> Result<ResidualRow> {
    if t < h {
        return Err(FluxonError::InvalidParameter(format!("stencil needs t >= h, got t = {t}, h = {h}")));
    }
    let col = |x: f64| solve_column(profile, x, &[t - h, t, t + h], options);
    let c = col(x)?;
    let xm = solve_at(profile, x - h, t, options)?;
    let xp = solve_at(profile, x + h, t, options)?;
    residual_from_stencil(&c[1], &xm, &xp, &c[0], &c[2])
}
