//! Moment and integral conditions for the genus-one band, their Newton
//! continuation in time, and the derived modulation fields.
//!
//! The band endpoints `w0, w1` are the roots of
//!
//! ```text
//! R(w; p, q)^2 = (w - p)^2 - q,    p = (w0 + w1)/2,   q = ((w0 - w1)/2)^2
//! ```
//!
//! and are determined at each `(x, t)` by the two real conditions `M = 0`,
//! `I = 0`:
//!
//! ```text
//! f(xi)   = theta0'(xi) sqrt(-xi)                       (contour weight)
//! M       = (x - t)/sqrt(Pi) + x + t + (4/pi) S_gamma,   Pi = w0 w1
//! H(w)    = -1/(4 sqrt(-w)) [ (x - t)/(w sqrt(Pi)) - (4/pi) S_gamma(w) ]
//! I       = Re int_path R(xi) H(xi) dxi  (+ endpoint term in case L)
//! ```
//!
//! where `S_gamma(w)` is the oriented sum of `int f(xi) / (R(xi)(xi - w))`
//! over the gap contour `gamma` and `S_gamma = S_gamma(infinity)` drops the
//! kernel.  Two geometries occur:
//!
//! * **case R** (real roots, `a <= w0 < w1 <= b`): `gamma = [a, w0] u [w1, b]`
//!   with orientation signs `sigma_prec`, `sigma_succ`; `I` is integrated
//!   over the upper half of the circle through `1` and the band midpoint.
//! * **case L** (`w1 = conj(w0)`): `gamma` consists of the arcs of the circle
//!   through `w0, conj(w0), 1` (centred on the real axis) that pass through
//!   its leftmost point, plus the real segments from that point to `a` and
//!   `b`; `I` is integrated along the complementary arc from `w0` to `1`.
//!
//! Near the origin of the `(x, t)` plane the band endpoints collide with
//! `a` and `b`; there the square-root coordinates
//!
//! ```text
//! w0 = a + k_prec^2,    w1 = b - k_succ^2
//! ```
//!
//! give a chart in which the conditions are smooth across sign changes of
//! `k_prec`, `k_succ` (the signs select the Delta configuration).
//!
//! The derived fields follow from the roots alone:
//!
//! ```text
//! n_p = (1 - sqrt(Pi)) / (1 + sqrt(Pi)),    E = -p / sqrt(Pi)
//! m   = (1 + E)/2  (case L),                m = 2/(1 + E)  (case R)
//! D   = K(m) / Pi^{1/4}  (L),               D = 2K(m) / (sqrt(-w0) + sqrt(-w1))  (R)
//! dPhi/dt = pi/(4D) (1 + 1/sqrt(Pi)),       dPhi/dx = pi/(4D) (1 - 1/sqrt(Pi))
//! ```

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::elliptic::complete_k;
use crate::error::{numeric, FluxonError, Result};
use crate::profiles::{ImpulseProfile, KinkInterval};
use crate::quadrature::{gauss_kronrod, gauss_legendre};
use crate::roots::brent;
use crate::spectra::{theta0, theta0_prime, theta0_weight};

type C = Complex64;

/// Half-width of the excluded neighbourhood of `|x| = x_crit`.
pub const SEPARATRIX_DELTA: f64 = 1e-3;

/// Below this magnitude a square-root coordinate is treated as lying on an
/// excluded curve `t = t_pm(x)`.
pub const EXCLUDED_CURVE_MARGIN: f64 = 1e-4;

/// Fraction of `b - a` below which the continuation switches to the
/// square-root chart.
pub const CHART_SWITCH_FRACTION: f64 = 0.05;

/// Which elliptic regime the band endpoints describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    /// Complex-conjugate endpoints: librational waves.
    L,
    /// Real endpoints in `[a, b]`: rotational waves.
    R,
}

impl std::fmt::Display for CaseTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CaseTag::L => write!(f, "L"),
            CaseTag::R => write!(f, "R"),
        }
    }
}

/// Coordinates in which the moment/integral conditions are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Chart {
    /// Root midpoint and squared half-separation `(p, q)`.
    Pq,
    /// Square-root coordinates `(k_prec, k_succ)` near the kink interval ends.
    Origin,
}

/// Orientation signs of the gap contour pieces.
///
/// `+1` corresponds to an empty `Delta`, `-1` to an empty `Nabla`; in case
/// R the two pieces `[a, w0]` and `[w1, b]` carry independent signs, in case
/// L only `prec` is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orientation {
    /// Sign attached to the piece adjacent to `a` (and to all of case L).
    pub prec: f64,
    /// Sign attached to the piece adjacent to `b`.
    pub succ: f64,
}

impl Orientation {
    /// Both pieces carry the same sign.
    pub fn uniform(sigma: f64) -> Self {
        Orientation { prec: sigma, succ: sigma }
    }

    /// Default orientation at `t = 0`: `+1` for `x >= 0`, `-1` otherwise.
    pub fn from_x(x: f64) -> Self {
        Orientation::uniform(if x >= 0.0 { 1.0 } else { -1.0 })
    }

    /// Signs read off square-root coordinates (zero keeps the fallback).
    pub fn from_k(k_prec: f64, k_succ: f64, fallback: Orientation) -> Self {
        let pick = |k: f64, f: f64| if k > 0.0 { 1.0 } else if k < 0.0 { -1.0 } else { f };
        Orientation { prec: pick(k_prec, fallback.prec), succ: pick(k_succ, fallback.succ) }
    }
}

/// Band endpoints with the conventions of the two cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    /// `w0` (upper endpoint in case L, left endpoint in case R).
    pub w0: C,
    /// `w1 = conj(w0)` in case L, right endpoint in case R.
    pub w1: C,
}

impl Band {
    /// Roots of `(w - p)^2 - q`; `q < 0` gives case L with `Im w0 > 0`.
    pub fn from_pq(p: f64, q: f64) -> Self {
        if q >= 0.0 {
            let r = q.sqrt();
            Band { w0: C::new(p - r, 0.0), w1: C::new(p + r, 0.0) }
        } else {
            let r = (-q).sqrt();
            Band { w0: C::new(p, r), w1: C::new(p, -r) }
        }
    }

    /// Real endpoints `w0 = a + k_prec^2`, `w1 = b - k_succ^2`.
    pub fn from_k(ki: &KinkInterval, k_prec: f64, k_succ: f64) -> Self {
        Band {
            w0: C::new(ki.a + k_prec * k_prec, 0.0),
            w1: C::new(ki.b - k_succ * k_succ, 0.0),
        }
    }

    /// Case of the band.
    pub fn case(&self) -> CaseTag {
        if self.w0.im.abs() > 0.0 {
            CaseTag::L
        } else {
            CaseTag::R
        }
    }

    /// `p = (w0 + w1)/2`.
    pub fn p(&self) -> f64 {
        0.5 * (self.w0 + self.w1).re
    }

    /// `q = ((w0 - w1)/2)^2` (negative in case L).
    pub fn q(&self) -> f64 {
        let h = 0.5 * (self.w0 - self.w1);
        (h * h).re
    }

    /// `sqrt(Pi) = sqrt(w0 w1)`, positive in both cases.
    pub fn sqrt_pi(&self) -> f64 {
        (self.w0 * self.w1).norm().sqrt()
    }

    /// `R(w)` with its cut on the segment joining the roots, `R ~ w` at infinity.
    pub fn r(&self, w: C) -> C {
        match self.case() {
            CaseTag::R => (w - self.w0).sqrt() * (w - self.w1).sqrt(),
            CaseTag::L => {
                let d = w - self.p();
                d * (C::new(1.0, 0.0) - self.q() / (d * d)).sqrt()
            }
        }
    }

    /// Circle centred on the real axis through `w0`, `conj(w0)` and `1`
    /// (case L), as `(centre, radius)`.
    pub fn circle(&self) -> (f64, f64) {
        let c = (self.w0.norm_sqr() - 1.0) / (2.0 * (self.w0.re - 1.0));
        (c, (1.0 - c).abs())
    }

    /// Branch of `R` whose cut runs along the band arc through `1` (case
    /// L); it differs from [`Band::r`] by a sign inside the lens between the
    /// arc and the straight cut.
    pub fn r_beta(&self, w: C) -> C {
        let r = self.r(w);
        if self.case() == CaseTag::R {
            return r;
        }
        let (c, rho) = self.circle();
        if (w - c).norm() < rho && w.re > self.p() {
            -r
        } else {
            r
        }
    }
}

/// One oriented piece of the gap contour, parametrized by `u in [0, 1]`.
#[derive(Debug, Clone, Copy)]
enum Piece {
    /// Straight segment `z0 -> z1`; `singular` clusters nodes at `z0`.
    Seg { z0: C, z1: C, singular: bool, mult: f64, beta: bool },
    /// Circular arc `c + rho e^{i phi}`, `phi: ph0 -> ph1`.
    Arc { c: f64, rho: f64, ph0: f64, ph1: f64, singular: bool, mult: f64, beta: bool },
    /// `[a, w0]` in square-root coordinates.
    HatPrec { a: f64, b: f64, k1: f64, k2: f64 },
    /// `[w1, b]` in square-root coordinates.
    HatSucc { a: f64, b: f64, k1: f64, k2: f64 },
}

/// Gap contour with orientation data for one band.
#[derive(Debug, Clone)]
pub struct GapGeometry {
    /// Band endpoints.
    pub band: Band,
    /// Orientation signs.
    pub orientation: Orientation,
    pieces: Vec<Piece>,
}

impl GapGeometry {
    /// Geometry in `(p, q)` form.
    pub fn new(profile: &ImpulseProfile, band: Band, orientation: Orientation) -> Result<Self> {
        let mut pieces = Vec::new();
        match band.case() {
            CaseTag::R => {
                let ki = kink_interval(profile)?;
                pieces.push(Piece::Seg {
                    z0: band.w0,
                    z1: C::new(ki.a, 0.0),
                    singular: true,
                    mult: -orientation.prec,
                    beta: false,
                });
                pieces.push(Piece::Seg {
                    z0: band.w1,
                    z1: C::new(ki.b, 0.0),
                    singular: true,
                    mult: orientation.succ,
                    beta: false,
                });
            }
            CaseTag::L => {
                let (c, rho) = band.circle();
                let ph0 = (band.w0 - c).arg();
                let mult = -orientation.prec;
                pieces.push(Piece::Arc { c, rho, ph0, ph1: PI, singular: true, mult, beta: true });
                pieces.push(Piece::Arc {
                    c,
                    rho,
                    ph0: -ph0,
                    ph1: -PI,
                    singular: true,
                    mult,
                    beta: true,
                });
                if let Some(ki) = profile.kink_interval {
                    let xm = C::new(c - rho, 0.0);
                    for end in [ki.a, ki.b] {
                        pieces.push(Piece::Seg {
                            z0: xm,
                            z1: C::new(end, 0.0),
                            singular: false,
                            mult,
                            beta: true,
                        });
                    }
                }
            }
        }
        Ok(GapGeometry { band, orientation, pieces })
    }

    /// Geometry in square-root coordinates (always case R).
    pub fn from_k(profile: &ImpulseProfile, k_prec: f64, k_succ: f64) -> Result<Self> {
        let ki = kink_interval(profile)?;
        let band = Band::from_k(&ki, k_prec, k_succ);
        let orientation = Orientation::from_k(k_prec, k_succ, Orientation::uniform(1.0));
        let (a, b) = (ki.a, ki.b);
        Ok(GapGeometry {
            band,
            orientation,
            pieces: vec![
                Piece::HatPrec { a, b, k1: k_prec, k2: k_succ },
                Piece::HatSucc { a, b, k1: k_prec, k2: k_succ },
            ],
        })
    }

    /// Point and density of a piece: the piece contributes
    /// `int_0^1 density(u) / (xi(u) - w) du` to `S_gamma(w)`.
    fn sample(&self, profile: &ImpulseProfile, piece: &Piece, u: f64) -> (C, C) {
        let r_of = |xi: C, beta: bool| if beta { self.band.r_beta(xi) } else { self.band.r(xi) };
        match *piece {
            Piece::Seg { z0, z1, singular, mult, beta } => {
                let u = if singular { u.max(singular_floor(z0.norm(), (z1 - z0).norm())) } else { u };
                let (xi, d) = if singular {
                    (z0 + (z1 - z0) * (u * u), (z1 - z0) * (2.0 * u))
                } else {
                    (z0 + (z1 - z0) * u, z1 - z0)
                };
                (xi, theta0_weight(profile, xi) / r_of(xi, beta) * d * mult)
            }
            Piece::Arc { c, rho, ph0, ph1, singular, mult, beta } => {
                let u = if singular {
                    u.max(singular_floor(c.abs() + rho, rho * (ph1 - ph0).abs()))
                } else {
                    u
                };
                let (ph, dph) = if singular {
                    (ph0 + (ph1 - ph0) * u * u, (ph1 - ph0) * 2.0 * u)
                } else {
                    (ph0 + (ph1 - ph0) * u, ph1 - ph0)
                };
                let e = C::from_polar(1.0, ph);
                let xi = c + e * rho;
                let d = C::i() * e * (rho * dph);
                (xi, theta0_weight(profile, xi) / r_of(xi, beta) * d * mult)
            }
            Piece::HatPrec { a, b, k1, k2 } => {
                let s = 1.0 - u * u;
                let xi = C::new(a + k1 * k1 * s, 0.0);
                let d1 = C::new(b - a - k2 * k2 - k1 * k1 * s, 0.0).sqrt();
                (xi, -theta0_weight(profile, xi) * (2.0 * k1) / d1)
            }
            Piece::HatSucc { a, b, k1, k2 } => {
                let s = 1.0 - u * u;
                let xi = C::new(b - k2 * k2 * s, 0.0);
                let d2 = C::new(b - a - k1 * k1 - k2 * k2 * s, 0.0).sqrt();
                (xi, theta0_weight(profile, xi) * (2.0 * k2) / d2)
            }
        }
    }

    /// Tabulate the Gauss–Legendre rule of order `order` on every piece.
    pub fn rule(&self, profile: &ImpulseProfile, order: usize) -> GapRule {
        let gl = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(order * self.pieces.len());
        let mut dens = Vec::with_capacity(order * self.pieces.len());
        for piece in &self.pieces {
            for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                let (xi, d) = self.sample(profile, piece, 0.5 * (x + 1.0));
                nodes.push(xi);
                dens.push(d * (0.5 * w));
            }
        }
        GapRule { nodes, dens }
    }

    /// Adaptive evaluation of `S_gamma(w)` (for `w` close to the contour).
    fn s_gamma_adaptive(&self, profile: &ImpulseProfile, w: C) -> Result<C> {
        let mut total = C::new(0.0, 0.0);
        for piece in &self.pieces {
            total += gauss_kronrod(
                |u| {
                    let (xi, d) = self.sample(profile, piece, u);
                    d / (xi - w)
                },
                0.0,
                1.0,
                1e-12,
                1e-10,
                2000,
            )?;
        }
        Ok(total)
    }

    /// Sign `chi` of the residue correction that continues `H` analytically
    /// from the gap side to the band side at `w`.
    fn correction_sign(&self, w: C) -> f64 {
        let up = w.im >= 0.0;
        match self.band.case() {
            CaseTag::R => {
                let s = if w.re < self.band.p() { self.orientation.prec } else { self.orientation.succ };
                if up {
                    s
                } else {
                    -s
                }
            }
            CaseTag::L => {
                let (c, rho) = self.band.circle();
                let inside = (w - c).norm() < rho;
                if inside == up {
                    -self.orientation.prec
                } else {
                    self.orientation.prec
                }
            }
        }
    }
}

/// Smallest parameter at which a root-endpoint piece is sampled.
///
/// The density is bounded at the root, but `f / R` evaluates as 0/0 once
/// `xi - root` drops below rounding; sampling is clamped where the offset
/// is still resolved, which perturbs the integral by `O(1e-12)`.
fn singular_floor(scale: f64, length: f64) -> f64 {
    (1e-12 * scale.max(1.0) / length.max(1e-300)).sqrt()
}

/// Gauss–Legendre tabulation of the gap contour: nodes and densities.
#[derive(Debug, Clone)]
pub struct GapRule {
    nodes: Vec<C>,
    dens: Vec<C>,
}

impl GapRule {
    /// `S_gamma = sum of densities`.
    pub fn total(&self) -> C {
        self.dens.iter().sum()
    }

    /// `S_gamma(w) = sum density / (xi - w)`.
    pub fn kernel(&self, w: C) -> C {
        self.nodes.iter().zip(&self.dens).map(|(xi, d)| d / (xi - w)).sum()
    }
}

fn kink_interval(profile: &ImpulseProfile) -> Result<KinkInterval> {
    profile.kink_interval.ok_or_else(|| {
        FluxonError::Domain("case R requires a profile with G(0) < -2 (nonempty kink interval)".into())
    })
}

/// Quadrature and Newton settings of the modulation solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationOptions {
    /// Gauss–Legendre order per contour piece and along the `I` path.
    pub order: usize,
    /// Newton stopping tolerance on `max(|M|, |I|)`.
    pub newton_tol: f64,
    /// Maximum Newton iterations per step.
    pub max_iter: usize,
    /// Central finite-difference step of the Jacobian.
    pub fd_step: f64,
    /// Largest time step of the continuation.
    pub max_step: f64,
    /// Maximum number of step halvings before giving up.
    pub max_halvings: usize,
    /// Compare the finite-difference Jacobian once per continuation with the
    /// closed forms, logging a warning on disagreement.
    pub cross_check: bool,
}

impl Default for ModulationOptions {
    fn default() -> Self {
        ModulationOptions {
            order: 120,
            newton_tol: 1e-11,
            max_iter: 30,
            fd_step: 1e-6,
            max_step: 0.01,
            max_halvings: 8,
            cross_check: false,
        }
    }
}

/// Solution of the moment/integral conditions at one `(x, t)` together with
/// the derived modulation fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationState {
    /// Position.
    pub x: f64,
    /// Time.
    pub t: f64,
    /// Elliptic regime.
    pub case_tag: CaseTag,
    /// Band endpoint `w0`.
    pub w0: C,
    /// Band endpoint `w1`.
    pub w1: C,
    /// `(w0 + w1)/2`.
    pub p: f64,
    /// `((w0 - w1)/2)^2`.
    pub q: f64,
    /// Zero of `H` between the real endpoints (case R, when computed).
    pub w_plus: Option<f64>,
    /// Reciprocal phase velocity.
    pub n_p: f64,
    /// Wavetrain energy.
    pub energy_e: f64,
    /// Elliptic parameter.
    pub m: f64,
    /// Normalization `D` of the phase derivatives.
    pub d_cal: f64,
    /// `dPhi/dx`.
    pub dphi_dx: f64,
    /// `dPhi/dt`.
    pub dphi_dt: f64,
    /// Phase accumulated from `t = 0`.
    pub phi: f64,
    /// Orientation of the gap contour.
    pub orientation: Orientation,
    /// Chart in which the state was computed.
    pub chart: Chart,
    /// Square-root coordinates `(k_prec, k_succ)` in case R.
    pub k: Option<(f64, f64)>,
}

impl ModulationState {
    /// Band of the state.
    pub fn band(&self) -> Band {
        Band { w0: self.w0, w1: self.w1 }
    }

    /// Header of the state CSV table.
    pub const CSV_HEADER: [&'static str; 14] = [
        "x", "t", "case", "w0_re", "w0_im", "w1_re", "w1_im", "n_p", "E", "m", "Phi", "dPhi_dx",
        "dPhi_dt", "w_plus",
    ];

    /// Row of the state CSV table (17 significant digits).
    pub fn csv_row(&self) -> Vec<String> {
        let f = |v: f64| format!("{v:.16e}");
        vec![
            f(self.x),
            f(self.t),
            self.case_tag.to_string(),
            f(self.w0.re),
            f(self.w0.im),
            f(self.w1.re),
            f(self.w1.im),
            f(self.n_p),
            f(self.energy_e),
            f(self.m),
            f(self.phi),
            f(self.dphi_dx),
            f(self.dphi_dt),
            self.w_plus.map(f).unwrap_or_default(),
        ]
    }
}

/// Closed-form state at `t = 0`.
///
/// ```text
/// p = 1 - G(x)^2/2,   q = p^2 - 1,   Phi = 0
/// ```
///
/// Case R iff `|x| < x_crit`. Points within [`SEPARATRIX_DELTA`] of
/// `|x| = x_crit` are rejected.
pub fn initial_state(profile: &ImpulseProfile, x: f64) -> Result<ModulationState> {
    if let Some(xc) = profile.x_crit {
        if (x.abs() - xc).abs() < SEPARATRIX_DELTA {
            return Err(FluxonError::SeparatrixExclusion { x, x_crit: xc, delta: SEPARATRIX_DELTA });
        }
    }
    let g = profile.g(x);
    let p = 1.0 - 0.5 * g * g;
    let q = p * p - 1.0;
    let band = Band::from_pq(p, q);
    let orientation = Orientation::from_x(x);
    let mut state = state_from_band(x, 0.0, band, orientation, Chart::Pq)?;
    if state.case_tag == CaseTag::R {
        let ki = kink_interval(profile)?;
        let sg = if x >= 0.0 { 1.0 } else { -1.0 };
        state.k = Some((
            sg * (band.w0.re - ki.a).max(0.0).sqrt(),
            sg * (ki.b - band.w1.re).max(0.0).sqrt(),
        ));
        state.w_plus = Some(-1.0);
    }
    Ok(state)
}

fn state_from_band(
    x: f64,
    t: f64,
    band: Band,
    orientation: Orientation,
    chart: Chart,
) -> Result<ModulationState> {
    let mut s = ModulationState {
        x,
        t,
        case_tag: band.case(),
        w0: band.w0,
        w1: band.w1,
        p: band.p(),
        q: band.q(),
        w_plus: None,
        n_p: 0.0,
        energy_e: 0.0,
        m: 0.0,
        d_cal: 0.0,
        dphi_dx: 0.0,
        dphi_dt: 0.0,
        phi: 0.0,
        orientation,
        chart,
        k: None,
    };
    derived_fields(&mut s)?;
    Ok(s)
}

/// Populate `n_p`, `E`, `m`, `D`, `dPhi/dx`, `dPhi/dt` from the roots.
pub fn derived_fields(state: &mut ModulationState) -> Result<()> {
    let band = state.band();
    let sp = band.sqrt_pi();
    let e = -band.p() / sp;
    let case = band.case();
    let m = match case {
        CaseTag::L => 0.5 * (1.0 + e),
        CaseTag::R => 2.0 / (1.0 + e),
    };
    if !(m > 0.0 && m < 1.0) {
        return Err(FluxonError::StateInvariant(format!(
            "elliptic parameter m = {m} outside (0,1) at (x,t) = ({}, {})",
            state.x, state.t
        )));
    }
    let k = complete_k(m)?;
    let d = match case {
        CaseTag::L => k / sp.sqrt(),
        CaseTag::R => 2.0 * k / ((-band.w0.re).sqrt() + (-band.w1.re).sqrt()),
    };
    state.case_tag = case;
    state.p = band.p();
    state.q = band.q();
    state.n_p = (1.0 - sp) / (1.0 + sp);
    state.energy_e = e;
    state.m = m;
    state.d_cal = d;
    state.dphi_dt = PI / (4.0 * d) * (1.0 + 1.0 / sp);
    state.dphi_dx = PI / (4.0 * d) * (1.0 - 1.0 / sp);
    Ok(())
}

/// Frequency `omega` in the form stated by the asymptotic theorems.
///
/// ```text
/// case L:  omega = -pi / (2 K(m) sqrt(1 - n_p^2))
/// case R:  omega = -pi / (2 K(m)) (sqrt(E + sqrt(E^2-1)) + sqrt(E - sqrt(E^2-1))) / (2 sqrt(1 - n_p^2))
/// ```
pub fn omega_theorem(state: &ModulationState) -> Result<f64> {
    let k = complete_k(state.m)?;
    let root = (1.0 - state.n_p * state.n_p).sqrt();
    Ok(match state.case_tag {
        CaseTag::L => -PI / (2.0 * k * root),
        CaseTag::R => {
            let e = state.energy_e;
            let s = (e * e - 1.0).sqrt();
            -PI / (2.0 * k) * ((e + s).sqrt() + (e - s).sqrt()) / (2.0 * root)
        }
    })
}

/// The two `(x,t)`-independent rotational inequalities, evaluated as
/// `(0 <= X_plus < -a, X_minus > -b)` with
/// `X_pm = (1 - n_p)/(1 + n_p) (E pm sqrt(E^2 - 1))`.
pub fn rotational_inequalities(profile: &ImpulseProfile, state: &ModulationState) -> Result<(bool, bool)> {
    let ki = kink_interval(profile)?;
    let e = state.energy_e;
    let s = (e * e - 1.0).sqrt();
    let ratio = (1.0 - state.n_p) / (1.0 + state.n_p);
    let plus = ratio * (e + s);
    let minus = ratio * (e - s);
    Ok((plus >= 0.0 && plus < -ki.a, minus > -ki.b))
}

/// Evaluator of `M`, `H`, `I` for one profile and quadrature order.
#[derive(Clone, Copy)]
pub struct Conditions<'a> {
    /// Impulse profile.
    pub profile: &'a ImpulseProfile,
    /// Gauss–Legendre order.
    pub order: usize,
}

impl<'a> Conditions<'a> {
    /// Evaluator with the given quadrature order.
    pub fn new(profile: &'a ImpulseProfile, order: usize) -> Self {
        if !profile.has_exact_continuation() {
            log::warn!(
                "modulation contour integrals use an interpolated continuation of the WKB phase; \
                 results are not validated for this profile"
            );
        }
        Conditions { profile, order }
    }

    /// `M` for the tabulated geometry.
    pub fn m_value(&self, geom: &GapGeometry, rule: &GapRule, x: f64, t: f64) -> f64 {
        let sp = geom.band.sqrt_pi();
        ((x - t) / sp + x + t) + 4.0 / PI * rule.total().re
    }

    /// `H` from the gap-side representation (no residue correction).
    pub fn h_gamma(&self, geom: &GapGeometry, rule: &GapRule, x: f64, t: f64, w: C) -> C {
        let sp = geom.band.sqrt_pi();
        let s = (-w).sqrt();
        -(((x - t) / sp) / w - rule.kernel(w) * (4.0 / PI)) / (s * 4.0)
    }

    /// `H` continued to the band side: the gap representation plus the
    /// residue of the deformation, `chi theta0'(w) / (i R(w))`.
    pub fn h_band(&self, geom: &GapGeometry, rule: &GapRule, x: f64, t: f64, w: C) -> C {
        self.h_gamma(geom, rule, x, t, w) + self.correction(geom, w)
    }

    fn correction(&self, geom: &GapGeometry, w: C) -> C {
        let r = match geom.band.case() {
            CaseTag::R => geom.band.r(w),
            CaseTag::L => geom.band.r_beta(w),
        };
        theta0_prime(self.profile, w) / (C::i() * r) * geom.correction_sign(w)
    }

    fn h_band_adaptive(&self, geom: &GapGeometry, x: f64, t: f64, w: C) -> Result<C> {
        let sp = geom.band.sqrt_pi();
        let s = (-w).sqrt();
        let sg = geom.s_gamma_adaptive(self.profile, w)?;
        let h = -(((x - t) / sp) / w - sg * (4.0 / PI)) / (s * 4.0);
        Ok(h + self.correction(geom, w))
    }

    /// `H` at (or within `1e-6` of) a band endpoint by averaging the
    /// analytic continuation over a circle around the endpoint.
    pub fn h_at_endpoint(&self, geom: &GapGeometry, x: f64, t: f64, wk: C) -> Result<C> {
        let mut others: Vec<C> = vec![C::new(0.0, 0.0)];
        for w in [geom.band.w0, geom.band.w1] {
            if (w - wk).norm() > 1e-12 {
                others.push(w);
            }
        }
        if let Some(ki) = self.profile.kink_interval {
            for e in [ki.a, ki.b] {
                if (C::new(e, 0.0) - wk).norm() > 1e-12 {
                    others.push(C::new(e, 0.0));
                }
            }
        }
        let dist = others.iter().map(|z| (z - wk).norm()).fold(f64::INFINITY, f64::min);
        let r = (0.4 * dist).min(0.05);
        let n = 32;
        let mut acc = C::new(0.0, 0.0);
        for j in 0..n {
            let ang = 2.0 * PI * (j as f64 + 0.5) / n as f64;
            acc += self.h_band_adaptive(geom, x, t, wk + C::from_polar(r, ang))?;
        }
        Ok(acc / n as f64)
    }

    /// `I` for the tabulated geometry.
    pub fn i_value(&self, geom: &GapGeometry, rule: &GapRule, x: f64, t: f64) -> f64 {
        let band = &geom.band;
        let gl = gauss_legendre(self.order);
        match band.case() {
            CaseTag::R => {
                let mid = band.p();
                let c = 0.5 * (1.0 + mid);
                let rho = 0.5 * (1.0 - mid);
                let mut acc = C::new(0.0, 0.0);
                for (u, wt) in gl.nodes.iter().zip(&gl.weights) {
                    let ph = 0.5 * PI * (u + 1.0);
                    let e = C::from_polar(1.0, ph);
                    let xi = c + e * rho;
                    let d = C::i() * e * (rho * PI);
                    acc += band.r(xi) * self.h_gamma(geom, rule, x, t, xi) * d * (0.5 * wt);
                }
                -acc.re
            }
            CaseTag::L => {
                let (c, rho) = band.circle();
                let ph0 = (band.w0 - c).arg();
                let mut acc = C::new(0.0, 0.0);
                for (u, wt) in gl.nodes.iter().zip(&gl.weights) {
                    let v = 0.5 * (u + 1.0);
                    let ph = ph0 * (1.0 - v * v);
                    let e = C::from_polar(1.0, ph);
                    let xi = c + e * rho;
                    let d = C::i() * e * (rho * (-2.0 * ph0 * v));
                    acc += band.r(xi) * self.h_gamma(geom, rule, x, t, xi) * d * (0.5 * wt);
                }
                acc.re - geom.orientation.prec * theta0(self.profile, band.w0).im
            }
        }
    }

    /// `(M, I)` for a geometry.
    pub fn mi(&self, geom: &GapGeometry, x: f64, t: f64) -> (f64, f64) {
        let rule = geom.rule(self.profile, self.order);
        (self.m_value(geom, &rule, x, t), self.i_value(geom, &rule, x, t))
    }

    /// `(M, I)` in `(p, q)` coordinates.
    pub fn mi_pq(&self, p: f64, q: f64, x: f64, t: f64, orientation: Orientation) -> Result<(f64, f64)> {
        let geom = GapGeometry::new(self.profile, Band::from_pq(p, q), orientation)?;
        Ok(self.mi(&geom, x, t))
    }

    /// `(M, I)` in square-root coordinates.
    pub fn mi_k(&self, k_prec: f64, k_succ: f64, x: f64, t: f64) -> Result<(f64, f64)> {
        let geom = GapGeometry::from_k(self.profile, k_prec, k_succ)?;
        Ok(self.mi(&geom, x, t))
    }

    /// Central finite-difference Jacobian of `(M, I)` in `(p, q)`.
    pub fn jacobian_pq(
        &self,
        p: f64,
        q: f64,
        x: f64,
        t: f64,
        orientation: Orientation,
        h: f64,
    ) -> Result<Matrix2<f64>> {
        let (mp, ip) = self.mi_pq(p + h, q, x, t, orientation)?;
        let (mm, im) = self.mi_pq(p - h, q, x, t, orientation)?;
        let (mqp, iqp) = self.mi_pq(p, q + h, x, t, orientation)?;
        let (mqm, iqm) = self.mi_pq(p, q - h, x, t, orientation)?;
        let s = 0.5 / h;
        Ok(Matrix2::new((mp - mm) * s, (mqp - mqm) * s, (ip - im) * s, (iqp - iqm) * s))
    }

    /// Central finite-difference Jacobian of `(M, I)` in `(k_prec, k_succ)`.
    pub fn jacobian_k(&self, k_prec: f64, k_succ: f64, x: f64, t: f64, h: f64) -> Result<Matrix2<f64>> {
        let (m1p, i1p) = self.mi_k(k_prec + h, k_succ, x, t)?;
        let (m1m, i1m) = self.mi_k(k_prec - h, k_succ, x, t)?;
        let (m2p, i2p) = self.mi_k(k_prec, k_succ + h, x, t)?;
        let (m2m, i2m) = self.mi_k(k_prec, k_succ - h, x, t)?;
        let s = 0.5 / h;
        Ok(Matrix2::new((m1p - m1m) * s, (m2p - m2m) * s, (i1p - i1m) * s, (i2p - i2m) * s))
    }
}

/// `M` at candidate roots.
pub fn moment_m(
    profile: &ImpulseProfile,
    band: Band,
    x: f64,
    t: f64,
    orientation: Orientation,
    options: &ModulationOptions,
) -> Result<f64> {
    let geom = GapGeometry::new(profile, band, orientation)?;
    let cond = Conditions::new(profile, options.order);
    let rule = geom.rule(profile, options.order);
    Ok(cond.m_value(&geom, &rule, x, t))
}

/// `I` at candidate roots.
pub fn integral_i(
    profile: &ImpulseProfile,
    band: Band,
    x: f64,
    t: f64,
    orientation: Orientation,
    options: &ModulationOptions,
) -> Result<f64> {
    let geom = GapGeometry::new(profile, band, orientation)?;
    let cond = Conditions::new(profile, options.order);
    let rule = geom.rule(profile, options.order);
    Ok(cond.i_value(&geom, &rule, x, t))
}

/// `H(w)` continued to the band side; points within `1e-6` of a band
/// endpoint are evaluated by the Cauchy average.
pub fn h_function(
    profile: &ImpulseProfile,
    w: C,
    band: Band,
    x: f64,
    t: f64,
    orientation: Orientation,
    options: &ModulationOptions,
) -> Result<C> {
    if w.im == 0.0 && w.re >= 0.0 {
        return Err(FluxonError::Domain(format!("H is not defined on the positive axis (w = {w})")));
    }
    let geom = GapGeometry::new(profile, band, orientation)?;
    let cond = Conditions::new(profile, options.order);
    for wk in [band.w0, band.w1] {
        if (w - wk).norm() < 1e-6 {
            return cond.h_at_endpoint(&geom, x, t, wk);
        }
    }
    let h = cond.h_band_adaptive(&geom, x, t, w)?;
    if !(h.re.is_finite() && h.im.is_finite()) {
        return Err(numeric("H evaluation", format!("non-finite value at w = {w}")));
    }
    Ok(h)
}

/// The zero `w+` of `H` between the real band endpoints (case R).
pub fn find_w_plus(
    profile: &ImpulseProfile,
    band: Band,
    x: f64,
    t: f64,
    orientation: Orientation,
    options: &ModulationOptions,
) -> Result<f64> {
    if band.case() != CaseTag::R {
        return Err(FluxonError::CaseMismatch("w+ exists only in case R".into()));
    }
    let geom = GapGeometry::new(profile, band, orientation)?;
    let cond = Conditions::new(profile, options.order);
    let rule = geom.rule(profile, options.order);
    let (lo, hi) = (band.w0.re, band.w1.re);
    let delta = 1e-6 * (hi - lo);
    let h = |w: f64| cond.h_band(&geom, &rule, x, t, C::new(w, 0.0)).re;
    // Scan outward from -1 for the nearest sign change.
    let n = 64;
    let grid: Vec<f64> = (0..=n)
        .map(|j| lo + delta + (hi - lo - 2.0 * delta) * j as f64 / n as f64)
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&w| h(w)).collect();
    let mut best: Option<(f64, f64, f64)> = None;
    for j in 0..n {
        if vals[j] == 0.0 {
            return Ok(grid[j]);
        }
        if vals[j].signum() != vals[j + 1].signum() {
            let dist = (0.5 * (grid[j] + grid[j + 1]) + 1.0).abs();
            if best.is_none_or(|b| dist < b.2) {
                best = Some((grid[j], grid[j + 1], dist));
            }
        }
    }
    let (a, b, _) = best.ok_or_else(|| {
        FluxonError::RootBracket(format!("H has no sign change on ({lo}, {hi}) at (x,t) = ({x}, {t})"))
    })?;
    brent(h, a, b, 1e-14, 200)
}

/// Closed-form pieces of the Jacobian of `(M, I)` with respect to the roots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticJacobian {
    /// `H(w0)`, `H(w1)` by Cauchy averaging.
    pub h_endpoints: [C; 2],
    /// `dM/dw_k = 2 sqrt(-w_k) H(w_k)`.
    pub dm_dw: [C; 2],
    /// `dM/dp`, `dM/dq` from the chain rule.
    pub dm_dpq: [f64; 2],
    /// `dI/dp`, `dI/dq` from the chain rule.
    pub di_dpq: [f64; 2],
    /// Determinant `-2 D sqrt(-w0) sqrt(-w1) H(w0) H(w1)` of the
    /// `(p, q)`-Jacobian.
    pub det_formula: f64,
}

/// Closed-form Jacobian data at a state (for cross-checking the
/// finite-difference Jacobian).
///
/// ```text
/// dM/dw_k = 2 sqrt(-w_k) H(w_k)
/// dI/dw_k = 1/2 sqrt(-w_k) H(w_k) int_path R(xi) / (sqrt(-xi)(xi - w_k)) dxi
/// d/dp = d/dw0 + d/dw1,   d/dq = (d/dw0 - d/dw1) / (2 (w0 - p))
/// det d(M,I)/d(p,q) = -2 D sqrt(-w0) sqrt(-w1) H(w0) H(w1)
/// ```
pub fn analytic_jacobian(
    profile: &ImpulseProfile,
    state: &ModulationState,
    options: &ModulationOptions,
) -> Result<AnalyticJacobian> {
    let band = state.band();
    let geom = GapGeometry::new(profile, band, state.orientation)?;
    let cond = Conditions::new(profile, options.order);
    let (x, t) = (state.x, state.t);
    let hs = [cond.h_at_endpoint(&geom, x, t, band.w0)?, cond.h_at_endpoint(&geom, x, t, band.w1)?];
    let ws = [band.w0, band.w1];
    let sq = [(-ws[0]).sqrt(), (-ws[1]).sqrt()];
    let dm = [sq[0] * hs[0] * 2.0, sq[1] * hs[1] * 2.0];
    let r = band.w0 - band.p();
    let dm_dp = (dm[0] + dm[1]).re;
    let dm_dq = ((dm[0] - dm[1]) / (r * 2.0)).re;

    // dI/dw_k: path integral of R / (sqrt(-xi)(xi - w_k)) times the endpoint value.
    let gl = gauss_legendre(options.order);
    let mut path = [C::new(0.0, 0.0); 2];
    let sign = match band.case() {
        CaseTag::R => {
            let mid = band.p();
            let c = 0.5 * (1.0 + mid);
            let rho = 0.5 * (1.0 - mid);
            for (u, wt) in gl.nodes.iter().zip(&gl.weights) {
                let e = C::from_polar(1.0, 0.5 * PI * (u + 1.0));
                let xi = c + e * rho;
                let d = C::i() * e * (rho * PI) * (0.5 * wt);
                for k in 0..2 {
                    path[k] += band.r(xi) / ((-xi).sqrt() * (xi - ws[k])) * d;
                }
            }
            -1.0
        }
        CaseTag::L => {
            let (c, rho) = band.circle();
            let ph0 = (band.w0 - c).arg();
            for (u, wt) in gl.nodes.iter().zip(&gl.weights) {
                let v = 0.5 * (u + 1.0);
                let ph = ph0 * (1.0 - v * v);
                let e = C::from_polar(1.0, ph);
                let xi = c + e * rho;
                let d = C::i() * e * (rho * (-2.0 * ph0 * v)) * (0.5 * wt);
                for k in 0..2 {
                    path[k] += band.r(xi) / ((-xi).sqrt() * (xi - ws[k])) * d;
                }
            }
            1.0
        }
    };
    let di = [
        -sq[0] * hs[0] * path[0] * 0.5 * sign,
        -sq[1] * hs[1] * path[1] * 0.5 * sign,
    ];
    let di_dp = (di[0] + di[1]).re;
    let di_dq = ((di[0] - di[1]) / (r * 2.0)).re;
    let det = (-(sq[0] * sq[1] * hs[0] * hs[1]) * (2.0 * state.d_cal)).re;
    Ok(AnalyticJacobian {
        h_endpoints: hs,
        dm_dw: dm,
        dm_dpq: [dm_dp, dm_dq],
        di_dpq: [di_dp, di_dq],
        det_formula: det,
    })
}

fn solve2(j: &Matrix2<f64>, f: Vector2<f64>) -> Option<Vector2<f64>> {
    j.try_inverse().map(|inv| -(inv * f))
}

/// Damped Newton iteration on a two-dimensional system.
fn newton2<F, J>(mut z: Vector2<f64>, eval: F, jac: J, options: &ModulationOptions) -> Result<(Vector2<f64>, f64)>
where
    F: Fn(Vector2<f64>) -> Result<Vector2<f64>>,
    J: Fn(Vector2<f64>) -> Result<Matrix2<f64>>,
{
    let mut f = eval(z)?;
    let mut res = f.amax();
    for _ in 0..options.max_iter {
        if res <= options.newton_tol {
            return Ok((z, res));
        }
        let jm = jac(z)?;
        let dz = solve2(&jm, f).ok_or_else(|| numeric("Newton", "singular Jacobian"))?;
        let mut lambda = 1.0;
        loop {
            let trial = z + dz * lambda;
            let ft = eval(trial).ok().filter(|ft| ft.amax().is_finite());
            match ft {
                Some(ft) if ft.amax() < res || lambda <= 1.0 / 64.0 => {
                    z = trial;
                    f = ft;
                    res = ft.amax();
                    break;
                }
                None if lambda <= 1.0 / 64.0 => {
                    return Err(numeric("Newton", "line search left the admissible region"));
                }
                _ => lambda *= 0.5,
            }
        }
    }
    if res <= options.newton_tol {
        Ok((z, res))
    } else {
        Err(numeric("Newton", format!("no convergence, residual {res:.3e}")))
    }
}

/// Solve `M = I = 0` in `(p, q)` from an initial guess.
pub fn newton_pq(
    profile: &ImpulseProfile,
    guess: (f64, f64),
    x: f64,
    t: f64,
    orientation: Orientation,
    options: &ModulationOptions,
) -> Result<(f64, f64)> {
    let cond = Conditions::new(profile, options.order);
    let case = if guess.1 < 0.0 { CaseTag::L } else { CaseTag::R };
    let eval = |z: Vector2<f64>| -> Result<Vector2<f64>> {
        if (z[1] < 0.0) != (case == CaseTag::L) {
            return Err(numeric("Newton (p,q)", "iterate left its case"));
        }
        let (m, i) = cond.mi_pq(z[0], z[1], x, t, orientation)?;
        Ok(Vector2::new(m, i))
    };
    let jac = |z: Vector2<f64>| cond.jacobian_pq(z[0], z[1], x, t, orientation, options.fd_step);
    let (z, _) = newton2(Vector2::new(guess.0, guess.1), eval, jac, options)?;
    Ok((z[0], z[1]))
}

/// Solve `M^ = I^ = 0` in square-root coordinates from an initial guess.
pub fn newton_k(
    profile: &ImpulseProfile,
    guess: (f64, f64),
    x: f64,
    t: f64,
    options: &ModulationOptions,
) -> Result<(f64, f64)> {
    let cond = Conditions::new(profile, options.order);
    let eval = |z: Vector2<f64>| -> Result<Vector2<f64>> {
        let (m, i) = cond.mi_k(z[0], z[1], x, t)?;
        Ok(Vector2::new(m, i))
    };
    let jac = |z: Vector2<f64>| cond.jacobian_k(z[0], z[1], x, t, options.fd_step);
    let (z, _) = newton2(Vector2::new(guess.0, guess.1), eval, jac, options)?;
    Ok((z[0], z[1]))
}

/// `(M^, I^)` in square-root coordinates.
pub fn hat_mi(
    profile: &ImpulseProfile,
    k_prec: f64,
    k_succ: f64,
    x: f64,
    t: f64,
    options: &ModulationOptions,
) -> Result<(f64, f64)> {
    Conditions::new(profile, options.order).mi_k(k_prec, k_succ, x, t)
}

fn needs_origin_chart(profile: &ImpulseProfile, state: &ModulationState) -> bool {
    match (state.case_tag, profile.kink_interval) {
        (CaseTag::R, Some(ki)) => {
            let gap = (state.w0.re - ki.a).min(ki.b - state.w1.re);
            gap < CHART_SWITCH_FRACTION * (ki.b - ki.a)
        }
        _ => false,
    }
}

/// Advance a solved state to time `t`, choosing the chart automatically.
///
/// The previous two states (if any) provide a linear predictor. `Phi` is
/// accumulated by the trapezoid rule.
fn step_to(
    profile: &ImpulseProfile,
    prev: &ModulationState,
    before: Option<&ModulationState>,
    t: f64,
    options: &ModulationOptions,
    force: Option<Chart>,
) -> Result<ModulationState> {
    let chart = force.unwrap_or(if needs_origin_chart(profile, prev) { Chart::Origin } else { Chart::Pq });
    let frac = match before {
        Some(b) if (prev.t - b.t).abs() > 0.0 => (t - prev.t) / (prev.t - b.t),
        _ => 0.0,
    };
    let mut next = match chart {
        Chart::Pq => {
            let mut g = (prev.p, prev.q);
            if let Some(b) = before {
                g = (prev.p + frac * (prev.p - b.p), prev.q + frac * (prev.q - b.q));
                if (g.1 < 0.0) != (prev.q < 0.0) {
                    g = (prev.p, prev.q);
                }
            }
            let (p, q) = newton_pq(profile, g, prev.x, t, prev.orientation, options)?;
            let mut s = state_from_band(prev.x, t, Band::from_pq(p, q), prev.orientation, Chart::Pq)?;
            if s.case_tag == CaseTag::R {
                let ki = kink_interval(profile)?;
                s.k = Some((
                    prev.orientation.prec * (s.w0.re - ki.a).max(0.0).sqrt(),
                    prev.orientation.succ * (ki.b - s.w1.re).max(0.0).sqrt(),
                ));
            }
            s
        }
        Chart::Origin => {
            let ki = kink_interval(profile)?;
            let k_prev = prev.k.unwrap_or((
                prev.orientation.prec * (prev.w0.re - ki.a).max(0.0).sqrt(),
                prev.orientation.succ * (ki.b - prev.w1.re).max(0.0).sqrt(),
            ));
            let mut g = k_prev;
            if let Some((k1b, k2b)) = before.and_then(|b| b.k) {
                g = (k_prev.0 + frac * (k_prev.0 - k1b), k_prev.1 + frac * (k_prev.1 - k2b));
            }
            let (k1, k2) = newton_k(profile, g, prev.x, t, options)?;
            let orientation = Orientation::from_k(k1, k2, prev.orientation);
            let mut s = state_from_band(prev.x, t, Band::from_k(&ki, k1, k2), orientation, Chart::Origin)?;
            s.k = Some((k1, k2));
            s
        }
    };
    next.phi = prev.phi + 0.5 * (prev.dphi_dt + next.dphi_dt) * (t - prev.t);
    Ok(next)
}

/// Continue a solved state from `state.t` to `target_t` in `steps` equal
/// steps of the `(p, q)` chart.
///
/// Steps that fail are halved up to `options.max_halvings` times; a
/// persistent failure is reported with the last good time.
pub fn newton_continue(
    profile: &ImpulseProfile,
    state: &ModulationState,
    target_t: f64,
    steps: usize,
    options: &ModulationOptions,
) -> Result<ModulationState> {
    let path = continue_path(profile, state, target_t, steps, Some(Chart::Pq), options)?;
    Ok(*path.last().expect("path contains the initial state"))
}

/// All intermediate states of a continuation from `state.t` to `target_t`
/// in `steps` equal steps (the first element is `state` itself).
///
/// `chart = None` switches automatically between the `(p, q)` and the
/// square-root chart.
pub fn continue_path(
    profile: &ImpulseProfile,
    state: &ModulationState,
    target_t: f64,
    steps: usize,
    chart: Option<Chart>,
    options: &ModulationOptions,
) -> Result<Vec<ModulationState>> {
    let path = continue_path_from(profile, state, None, target_t, steps.max(1), chart, options)?;
    if options.cross_check {
        if let Some(s) = path.get(1) {
            cross_check_jacobian(profile, s, options);
        }
    }
    Ok(path)
}

fn cross_check_jacobian(profile: &ImpulseProfile, state: &ModulationState, options: &ModulationOptions) {
    if state.chart != Chart::Pq {
        return;
    }
    let cond = Conditions::new(profile, options.order);
    let fd = cond.jacobian_pq(state.p, state.q, state.x, state.t, state.orientation, 1e-5);
    let an = analytic_jacobian(profile, state, options);
    if let (Ok(fd), Ok(an)) = (fd, an) {
        let rel = (fd.determinant() - an.det_formula).abs() / an.det_formula.abs();
        if rel > 1e-4 {
            log::warn!(
                "Jacobian cross-check at (x,t)=({},{}): FD det {} vs closed form {} (rel {rel:.2e})",
                state.x,
                state.t,
                fd.determinant(),
                an.det_formula
            );
        } else {
            log::debug!("Jacobian cross-check passed (rel {rel:.2e})");
        }
    }
}

/// Solve the conditions at `(x, t)` by continuation from `t = 0` with steps
/// of at most `options.max_step`, switching charts as needed.
pub fn solve_at(
    profile: &ImpulseProfile,
    x: f64,
    t: f64,
    options: &ModulationOptions,
) -> Result<ModulationState> {
    let s0 = initial_state(profile, x)?;
    if t == 0.0 {
        return Ok(s0);
    }
    let steps = (t.abs() / options.max_step).ceil() as usize;
    let path = continue_path(profile, &s0, t, steps, None, options)?;
    Ok(*path.last().unwrap())
}

/// States at every time of `ts` (sorted, non-negative) for fixed `x`.
///
/// The continuation inserts intermediate steps so that no step exceeds
/// `options.max_step`; `Phi` is accumulated along the whole path.
pub fn solve_column(
    profile: &ImpulseProfile,
    x: f64,
    ts: &[f64],
    options: &ModulationOptions,
) -> Result<Vec<ModulationState>> {
    if ts.windows(2).any(|w| w[1] < w[0]) || ts.iter().any(|&t| t < 0.0) {
        return Err(FluxonError::InvalidParameter("time grid must be sorted and non-negative".into()));
    }
    let mut cur = initial_state(profile, x)?;
    let mut before: Option<ModulationState> = None;
    let mut out = Vec::with_capacity(ts.len());
    for &t in ts {
        if t > cur.t {
            let n = ((t - cur.t) / options.max_step).ceil() as usize;
            let path = continue_path_from(profile, &cur, before.as_ref(), t, n, None, options)?;
            before = Some(path[path.len() - 2]);
            cur = *path.last().unwrap();
        }
        out.push(cur);
    }
    Ok(out)
}

fn continue_path_from(
    profile: &ImpulseProfile,
    state: &ModulationState,
    before: Option<&ModulationState>,
    target_t: f64,
    steps: usize,
    chart: Option<Chart>,
    options: &ModulationOptions,
) -> Result<Vec<ModulationState>> {
    let dt = (target_t - state.t) / steps as f64;
    let mut out = vec![*state];
    let mut b = before.copied();
    for j in 1..=steps {
        // the last step lands exactly on the requested time
        let t_goal = if j == steps { target_t } else { state.t + dt * j as f64 };
        let prev = *out.last().unwrap();
        let mut halvings: usize = 0;
        let mut cur = prev;
        let mut cur_before = b;
        while cur.t != t_goal {
            let sub = (t_goal - cur.t) / (1u64 << halvings) as f64;
            let t_next = if halvings == 0 { t_goal } else { cur.t + sub };
            match step_to(profile, &cur, cur_before.as_ref(), t_next, options, chart) {
                Ok(s) => {
                    cur_before = Some(cur);
                    cur = s;
                    halvings = halvings.saturating_sub(1);
                }
                Err(e) => {
                    halvings += 1;
                    if halvings > options.max_halvings {
                        return Err(FluxonError::Continuation {
                            t_failed: cur.t + sub,
                            t_last_good: cur.t,
                            detail: e.to_string(),
                        });
                    }
                }
            }
        }
        b = cur_before;
        out.push(cur);
    }
    Ok(out)
}

/// State near the origin of the `(x, t)` plane in square-root coordinates.
///
/// At `t = 0` the closed form is returned. Otherwise the square-root chart
/// is continued from the closed form at `t = 0`; a result with
/// `|k_prec|` or `|k_succ|` below [`EXCLUDED_CURVE_MARGIN`] is rejected as
/// lying on an excluded curve.
pub fn origin_continue(
    profile: &ImpulseProfile,
    x: f64,
    t: f64,
    options: &ModulationOptions,
) -> Result<ModulationState> {
    let s0 = initial_state(profile, x)?;
    if s0.case_tag != CaseTag::R {
        return Err(FluxonError::CaseMismatch(format!(
            "square-root chart requires case R at t = 0 (x = {x})"
        )));
    }
    if t == 0.0 {
        let mut s = s0;
        s.chart = Chart::Origin;
        return Ok(s);
    }
    let steps = (t.abs() / options.max_step).ceil() as usize;
    let path = continue_path(profile, &s0, t, steps, Some(Chart::Origin), options)?;
    let s = *path.last().unwrap();
    let (k1, k2) = s.k.expect("origin chart states carry k");
    if k1.abs() < EXCLUDED_CURVE_MARGIN || k2.abs() < EXCLUDED_CURVE_MARGIN {
        return Err(FluxonError::ExcludedCurve(format!(
            "(x,t) = ({x}, {t}) gives k_prec = {k1:.3e}, k_succ = {k2:.3e}"
        )));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::make_sech_profile;

    #[test]
    fn band_roundtrip() {
        let b = Band::from_pq(-0.3, -0.5);
        assert_eq!(b.case(), CaseTag::L);
        assert!((b.p() + 0.3).abs() < 1e-15 && (b.q() + 0.5).abs() < 1e-15);
        let b = Band::from_pq(-3.5, 11.25);
        assert_eq!(b.case(), CaseTag::R);
        assert!((b.sqrt_pi() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn r_behaves_like_w_at_infinity() {
        for b in [Band::from_pq(-0.3, -0.5), Band::from_pq(-3.5, 11.25)] {
            let w = C::new(1e6, 3e5);
            assert!((b.r(w) / w - 1.0).norm() < 1e-5);
        }
    }

    #[test]
    fn separatrix_is_rejected() {
        let prof = make_sech_profile(0.75).unwrap();
        let xc = prof.x_crit.unwrap();
        assert!(matches!(
            initial_state(&prof, xc + 1e-4),
            Err(FluxonError::SeparatrixExclusion { .. })
        ));
    }
}
