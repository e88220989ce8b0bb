//! Exact fluxon condensates from the reflectionless Riemann–Hilbert problem.
//!
//! The unknown matrix is rational in the unfolded variable `s = sqrt(-w)`
//! (equivalently `z = i s`, `z^2 = w`); the jump on the positive `w` axis
//! disappears and the symmetry `J(-s) = sigma_2 J(s) sigma_2` pairs every
//! pole `s_y` (with `Re s_y > 0`) with a mirror pole at `-s_y`:
//!
//! ```text
//! J(s) = I + sum_y [ R_y / (s - s_y) - sigma_2 R_y sigma_2 / (s + s_y) ]
//! ```
//!
//! For a `Nabla` pole only the first column of `R_y` is unknown, for a
//! `Delta` pole only the second. The residue conditions give one 2-vector
//! equation per pole,
//!
//! ```text
//! Nabla:  u_y - c_y J(s_y) e_2 = 0,   c_y = alpha_y / b_y^2
//! Delta:  u_y - c_y J(s_y) e_1 = 0,   c_y = 4 s_y^2 b_y^2 / alpha_y
//! alpha_y = (-1)^{k+1} exp(2 i Q(s_y)/eps) 2 s_y prod_{i != y} (s_y + s_i)/(s_y - s_i)
//! b_y     = prod_{i in Delta, i != y} (s_y + s_i)/(s_y - s_i)
//! ```
//!
//! a dense `4N x 4N` complex system. Coefficients are accumulated in
//! logarithmic form and each row is divided by `c_y` whenever `|c_y| > 1`,
//! so entries stay bounded even when `exp(2iQ/eps)` over- or underflows.
//!
//! The wave fields are read off from the expansions of `J` at `s = 0` and
//! `s = infinity`:
//!
//! ```text
//! J(s) = J0 + J1 s + O(s^2),  J(s) = I + Jinf / s + O(s^-2)
//! cos(u/2) = (-1)^{#Delta} (J0)_11,   sin(u/2) = (-1)^{#Delta} (J0)_21
//! eps u_t  = (J0^-1 J1)_12 + (Jinf)_12
//! ```

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FluxonError, Result};
use crate::spectra::{q_of_s, DeltaConfig, ScatteringData};

type C = Complex64;
type M2 = [[C; 2]; 2];

/// Default cap on the one-norm condition estimate.
pub const DEFAULT_COND_CAP: f64 = 1e14;

/// One sample of the wave field at a point `(x, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveSample {
    /// Position.
    pub x: f64,
    /// Time.
    pub t: f64,
    /// `cos(u/2)`.
    pub cos_half: f64,
    /// `sin(u/2)`.
    pub sin_half: f64,
    /// `eps u_t`.
    pub eps_ut: f64,
    /// `u` reduced to `[-2 pi, 2 pi)`.
    pub u_mod4pi: f64,
}

impl WaveSample {
    /// Build a sample, deriving `u mod 4 pi` from the half-angle pair.
    pub fn new(x: f64, t: f64, cos_half: f64, sin_half: f64, eps_ut: f64) -> Self {
        let mut u = 2.0 * sin_half.atan2(cos_half);
        if u >= 2.0 * PI {
            u -= 4.0 * PI;
        }
        WaveSample { x, t, cos_half, sin_half, eps_ut, u_mod4pi: u }
    }
}

/// How the `Delta/Nabla` split is chosen for a solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum DeltaPolicy {
    /// `Delta` empty for `x >= 0`, `Nabla` empty for `x < 0`.
    SignOfX,
    /// Use the flags stored in the scattering data.
    Stored,
}

/// Options of the exact solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    /// Reject systems whose condition estimate exceeds this value.
    pub cond_cap: f64,
    /// Choice of the `Delta/Nabla` split.
    pub policy: DeltaPolicy,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { cond_cap: DEFAULT_COND_CAP, policy: DeltaPolicy::SignOfX }
    }
}

/// The assembled (and, after [`ResidueSystem::solve`], solved) linear system.
#[derive(Debug, Clone)]
pub struct ResidueSystem {
    /// Pole coordinates `s_y = sqrt(-y)`.
    pub s: Vec<C>,
    /// Membership of each pole in `Delta`.
    pub in_delta: Vec<bool>,
    /// Row-scaled `4N x 4N` matrix.
    pub matrix: DMatrix<C>,
    /// Right-hand side.
    pub rhs: DVector<C>,
    /// One-norm condition estimate `||A||_1 ||A^-1||_1`.
    pub cond_estimate: f64,
    /// Solution 2-vectors, filled by [`ResidueSystem::solve`].
    pub unknowns: Vec<[C; 2]>,
    inverse: Option<DMatrix<C>>,
}

/// Extra outputs of a solve, used by invariance checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    /// Condition estimate of the solved system.
    pub cond_estimate: f64,
    /// Largest imaginary part among the extracted quantities.
    pub max_imag: f64,
    /// Number of poles in `Delta`.
    pub delta_count: usize,
}

fn log_ratio_sum(s: &[C], j: usize, include: impl Fn(usize) -> bool) -> C {
    let sy = s[j];
    let mut acc = C::new(0.0, 0.0);
    for (i, &si) in s.iter().enumerate() {
        if i != j && include(i) {
            acc += ((sy + si) / (sy - si)).ln();
        }
    }
    acc
}

fn check_distinct(s: &[C]) -> Result<()> {
    for i in 0..s.len() {
        for j in i + 1..s.len() {
            if (s[i] - s[j]).norm() < 1e-12 {
                return Err(FluxonError::DegenerateSpectrum(format!(
                    "poles {i} and {j} coincide (s = {})",
                    s[i]
                )));
            }
        }
    }
    Ok(())
}

/// Residue of the Blaschke product `Pi_N(w) = prod_y (s + s_y)/(s - s_y)` at
/// the pole with index `pole_index`.
///
/// ```text
/// Res_{w=y} Pi_N = -4 s_y^2 prod_{i != y} (s_y + s_i)/(s_y - s_i)
/// ```
///
/// The product is accumulated as a sum of logarithms.
pub fn blaschke_residue(data: &ScatteringData, pole_index: usize) -> Result<C> {
    let s: Vec<C> = data.poles.iter().map(|p| p.s()).collect();
    if pole_index >= s.len() {
        return Err(FluxonError::InvalidParameter(format!(
            "pole index {pole_index} out of range (2N = {})",
            s.len()
        )));
    }
    check_distinct(&s)?;
    let sy = s[pole_index];
    Ok(-(sy * sy) * 4.0 * log_ratio_sum(&s, pole_index, |_| true).exp())
}

fn effective_delta(data: &ScatteringData, x: f64, policy: DeltaPolicy) -> Vec<bool> {
    match policy {
        DeltaPolicy::Stored => data.poles.iter().map(|p| p.in_delta).collect(),
        DeltaPolicy::SignOfX => {
            let all = matches!(DeltaConfig::sign_of_x(x), DeltaConfig::NablaEmpty);
            vec![all; data.poles.len()]
        }
    }
}

/// Assemble the residue system using the `Delta` flags stored in `data`.
pub fn assemble_system(data: &ScatteringData, x: f64, t: f64) -> Result<ResidueSystem> {
    let delta = effective_delta(data, x, DeltaPolicy::Stored);
    assemble_with(data, x, t, delta)
}

fn assemble_with(data: &ScatteringData, x: f64, t: f64, delta: Vec<bool>) -> Result<ResidueSystem> {
    if !(x.is_finite() && t.is_finite()) {
        return Err(FluxonError::InvalidParameter(format!("non-finite (x, t) = ({x}, {t})")));
    }
    let s: Vec<C> = data.poles.iter().map(|p| p.s()).collect();
    check_distinct(&s)?;
    let n = s.len();
    let mut a = DMatrix::<C>::zeros(2 * n, 2 * n);
    let mut rhs = DVector::<C>::zeros(2 * n);
    let eps = data.eps;
    for j in 0..n {
        let sy = s[j];
        let sign_log = if data.poles[j].sign < 0 { C::new(0.0, PI) } else { C::new(0.0, 0.0) };
        let log_alpha = sign_log
            + C::i() * q_of_s(sy, x, t) * (2.0 / eps)
            + (sy * 2.0).ln()
            + log_ratio_sum(&s, j, |_| true);
        let log_bd = log_ratio_sum(&s, j, |i| delta[i]);
        let log_c = if delta[j] {
            (sy * sy * 4.0).ln() + log_bd * 2.0 - log_alpha
        } else {
            log_alpha - log_bd * 2.0
        };
        // Row scaling: u/c - [coupling] = e  when |c| > 1, else u - c [coupling] = c e.
        let (diag, coupling, rhs_val) = if log_c.re > 0.0 {
            ((-log_c).exp(), C::new(1.0, 0.0), C::new(1.0, 0.0))
        } else {
            let c = log_c.exp();
            (C::new(1.0, 0.0), c, c)
        };
        a[(2 * j, 2 * j)] += diag;
        a[(2 * j + 1, 2 * j + 1)] += diag;
        if delta[j] {
            rhs[2 * j] += rhs_val;
        } else {
            rhs[2 * j + 1] += rhs_val;
        }
        for i in 0..n {
            let si = s[i];
            // Same-type poles enter through the mirrored term, the other type
            // through the direct term.
            if delta[i] != delta[j] {
                let d = coupling / (sy - si);
                a[(2 * j, 2 * i)] -= d;
                a[(2 * j + 1, 2 * i + 1)] -= d;
            } else {
                let d = coupling / (sy + si);
                let sgn = if delta[j] { -1.0 } else { 1.0 };
                a[(2 * j, 2 * i + 1)] -= d * sgn;
                a[(2 * j + 1, 2 * i)] += d * sgn;
            }
        }
    }
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(FluxonError::Numeric {
            context: "residue system assembly".into(),
            detail: "non-finite matrix entry".into(),
        });
    }
    let inverse = a.clone().lu().try_inverse();
    let cond_estimate = match &inverse {
        Some(inv) => one_norm(&a) * one_norm(inv),
        None => f64::INFINITY,
    };
    Ok(ResidueSystem {
        s,
        in_delta: delta,
        matrix: a,
        rhs,
        cond_estimate: cond_estimate.max(1.0),
        unknowns: Vec::new(),
        inverse,
    })
}

fn one_norm(a: &DMatrix<C>) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

impl ResidueSystem {
    /// Solve for the residue vectors, rejecting systems above `cond_cap`.
    pub fn solve(&mut self, cond_cap: f64) -> Result<()> {
        if !(self.cond_estimate <= cond_cap) {
            return Err(FluxonError::Conditioning { cond: self.cond_estimate, cap: cond_cap });
        }
        let lu = self.matrix.clone().lu();
        let sol = lu.solve(&self.rhs).ok_or(FluxonError::Conditioning {
            cond: f64::INFINITY,
            cap: cond_cap,
        })?;
        self.unknowns = (0..self.s.len()).map(|j| [sol[2 * j], sol[2 * j + 1]]).collect();
        self.inverse = None;
        Ok(())
    }

    /// Expansion coefficients `(J0, J1, Jinf)` of the solved ansatz.
    pub fn expansions(&self) -> (M2, M2, M2) {
        let z = C::new(0.0, 0.0);
        let one = C::new(1.0, 0.0);
        let mut j0: M2 = [[one, z], [z, one]];
        let mut j1: M2 = [[z; 2]; 2];
        let mut jinf: M2 = [[z; 2]; 2];
        for (j, u) in self.unknowns.iter().enumerate() {
            let r: M2 = if self.in_delta[j] { [[z, u[0]], [z, u[1]]] } else { [[u[0], z], [u[1], z]] };
            let rt = sigma2_conj(&r);
            let sy = self.s[j];
            for a in 0..2 {
                for b in 0..2 {
                    j0[a][b] -= (r[a][b] + rt[a][b]) / sy;
                    j1[a][b] += (rt[a][b] - r[a][b]) / (sy * sy);
                    jinf[a][b] += r[a][b] - rt[a][b];
                }
            }
        }
        (j0, j1, jinf)
    }
}

fn sigma2_conj(r: &M2) -> M2 {
    // sigma_2 R sigma_2 with sigma_2 = [[0, -i], [i, 0]]
    [[r[1][1], -r[1][0]], [-r[0][1], r[0][0]]]
}

/// Solve the condensate at `(x, t)` with default options (sign-of-`x` split,
/// condition cap `1e14`).
pub fn solve_exact(data: &ScatteringData, x: f64, t: f64) -> Result<WaveSample> {
    solve_exact_with(data, x, t, &SolveOptions::default()).map(|(w, _)| w)
}

/// Solve the condensate at `(x, t)` and return diagnostics.
pub fn solve_exact_with(
    data: &ScatteringData,
    x: f64,
    t: f64,
    options: &SolveOptions,
) -> Result<(WaveSample, SolveDiagnostics)> {
    let delta = effective_delta(data, x, options.policy);
    let delta_count = delta.iter().filter(|&&d| d).count();
    let mut sys = assemble_with(data, x, t, delta)?;
    sys.solve(options.cond_cap)?;
    let (j0, j1, jinf) = sys.expansions();
    let sg = if delta_count % 2 == 0 { 1.0 } else { -1.0 };
    let cos_half = j0[0][0] * sg;
    let sin_half = j0[1][0] * sg;
    let det = j0[0][0] * j0[1][1] - j0[0][1] * j0[1][0];
    // (J0^-1 J1)_12 = (J0_22 J1_12 - J0_12 J1_22) / det
    let b12 = (j0[1][1] * j1[0][1] - j0[0][1] * j1[1][1]) / det;
    let eps_ut = b12 + jinf[0][1];
    let max_imag = cos_half.im.abs().max(sin_half.im.abs()).max(eps_ut.im.abs());
    let sample = WaveSample::new(x, t, cos_half.re, sin_half.re, eps_ut.re);
    Ok((sample, SolveDiagnostics { cond_estimate: sys.cond_estimate, max_imag, delta_count }))
}

/// Samples of the condensate on a tensor grid.
#[derive(Debug, Clone)]
pub struct FieldGrid {
    /// Sorted abscissae.
    pub x: Vec<f64>,
    /// Sorted times.
    pub t: Vec<f64>,
    /// `samples[ix][it]`; failures are recorded, not fatal.
    pub samples: Vec<Vec<Result<WaveSample>>>,
    /// `u` unwrapped continuously along increasing `t` in each `x` column.
    pub u_unwrapped: Vec<Vec<Option<f64>>>,
}

/// Solve on every node of `x_grid x t_grid`.
pub fn field_grid(
    data: &ScatteringData,
    x_grid: &[f64],
    t_grid: &[f64],
    options: &SolveOptions,
) -> Result<FieldGrid> {
    let sorted = |g: &[f64]| g.windows(2).all(|w| w[0] <= w[1]) && g.iter().all(|v| v.is_finite());
    if x_grid.is_empty() || t_grid.is_empty() || !sorted(x_grid) || !sorted(t_grid) {
        return Err(FluxonError::InvalidParameter("grids must be nonempty, finite and sorted".into()));
    }
    let mut samples = Vec::with_capacity(x_grid.len());
    let mut unwrapped = Vec::with_capacity(x_grid.len());
    for &x in x_grid {
        let column: Vec<Result<WaveSample>> = t_grid
            .iter()
            .map(|&t| solve_exact_with(data, x, t, options).map(|(w, _)| w))
            .collect();
        let mut prev: Option<f64> = None;
        let mut col_u = Vec::with_capacity(t_grid.len());
        for s in &column {
            let u = s.as_ref().ok().map(|w| {
                let raw = w.u_mod4pi;
                match prev {
                    Some(p) => raw + 4.0 * PI * ((p - raw) / (4.0 * PI)).round(),
                    None => raw,
                }
            });
            if u.is_some() {
                prev = u;
            }
            col_u.push(u);
        }
        samples.push(column);
        unwrapped.push(col_u);
    }
    Ok(FieldGrid { x: x_grid.to_vec(), t: t_grid.to_vec(), samples, u_unwrapped: unwrapped })
}

/// Five-point stencil of samples with spacing `h` in both `x` and `t`.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    /// Sample at `(x, t)`.
    pub center: WaveSample,
    /// Sample at `(x - h, t)`.
    pub x_minus: WaveSample,
    /// Sample at `(x + h, t)`.
    pub x_plus: WaveSample,
    /// Sample at `(x, t - h)`.
    pub t_minus: WaveSample,
    /// Sample at `(x, t + h)`.
    pub t_plus: WaveSample,
    /// Spacing.
    pub h: f64,
}

impl Stencil {
    /// Solve the five stencil nodes around `(x, t)`.
    pub fn solve(data: &ScatteringData, x: f64, t: f64, h: f64, options: &SolveOptions) -> Result<Self> {
        let at = |xx: f64, tt: f64| solve_exact_with(data, xx, tt, options).map(|(w, _)| w);
        Ok(Stencil {
            center: at(x, t)?,
            x_minus: at(x - h, t)?,
            x_plus: at(x + h, t)?,
            t_minus: at(x, t - h)?,
            t_plus: at(x, t + h)?,
            h,
        })
    }
}

/// Residual `|eps^2 (u_tt - u_xx) + sin u|` by centred second differences.
///
/// Neighbouring values of `u` are unwrapped relative to the centre.
pub fn sine_gordon_residual(stencil: &Stencil, eps: f64) -> f64 {
    let uc = stencil.center.u_mod4pi;
    let near = |w: &WaveSample| {
        let raw = w.u_mod4pi;
        raw + 4.0 * PI * ((uc - raw) / (4.0 * PI)).round()
    };
    let h2 = stencil.h * stencil.h;
    let utt = (near(&stencil.t_plus) - 2.0 * uc + near(&stencil.t_minus)) / h2;
    let uxx = (near(&stencil.x_plus) - 2.0 * uc + near(&stencil.x_minus)) / h2;
    (eps * eps * (utt - uxx) + uc.sin()).abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma2_conjugation_matches_matrix_product() {
        let r: M2 = [[C::new(1.0, 2.0), C::new(0.5, 0.0)], [C::new(-3.0, 1.0), C::new(0.0, 4.0)]];
        let s2: M2 = [[C::new(0.0, 0.0), C::new(0.0, -1.0)], [C::new(0.0, 1.0), C::new(0.0, 0.0)]];
        let mul = |a: &M2, b: &M2| -> M2 {
            let mut o = [[C::new(0.0, 0.0); 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    for k in 0..2 {
                        o[i][j] += a[i][k] * b[k][j];
                    }
                }
            }
            o
        };
        let direct = mul(&mul(&s2, &r), &s2);
        let fast = sigma2_conj(&r);
        for i in 0..2 {
            for j in 0..2 {
                assert!((direct[i][j] - fast[i][j]).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn wave_sample_range() {
        let w = WaveSample::new(0.0, 0.0, -1.0, -0.0, 0.0);
        assert!(w.u_mod4pi >= -2.0 * PI && w.u_mod4pi < 2.0 * PI);
    }
}
