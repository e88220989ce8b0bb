//! Quadrature rules used by the spectral and modulation modules.
//!
//! Three families are provided, each generic over real and complex
//! integrands:
//!
//! * [`GaussLegendre`]: fixed-order rules for smooth integrands, cached per
//!   order so hot loops pay for node generation only once;
//! * [`tanh_sinh`]: double-exponential quadrature with level refinement,
//!   the workhorse for integrands with algebraic endpoint singularities;
//! * [`gauss_kronrod`]: globally adaptive 7/15-point Gauss–Kronrod, used
//!   where the integrand has a nearby (but not on-path) singularity.

use std::collections::HashMap;
use std::ops::{Add, Mul, Sub};
use std::sync::{Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{numeric, Result};

/// Values that can be integrated: reals and complex numbers.
pub trait Scalar:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    /// Additive identity.
    fn zero() -> Self;
    /// Magnitude used for error estimates.
    fn magnitude(self) -> f64;
    /// Whether every component is finite.
    fn is_finite_value(self) -> bool;
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
    fn is_finite_value(self) -> bool {
        self.is_finite()
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
    fn is_finite_value(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// An `n`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    /// Nodes in increasing order.
    pub nodes: Vec<f64>,
    /// Positive weights summing to 2.
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// Build the rule by Newton iteration on the Legendre recurrence.
    ///
    /// ```text
    /// P_0 = 1, P_1 = x, k P_k = (2k-1) x P_{k-1} - (k-1) P_{k-2}
    /// w_i = 2 / ((1 - x_i^2) P_n'(x_i)^2)
    /// ```
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre order must be positive");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_and_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_and_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<T: Scalar, F: Fn(f64) -> T>(&self, f: F, a: f64, b: f64) -> T {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = T::zero();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(mid + half * x) * (w * half);
        }
        acc
    }
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared, lazily built Gauss–Legendre rule of order `n`.
pub fn gauss_legendre(n: usize) -> &'static GaussLegendre {
    static CACHE: OnceLock<Mutex<HashMap<usize, &'static GaussLegendre>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| Box::leak(Box::new(GaussLegendre::new(n))))
}

/// Tanh-sinh (double-exponential) quadrature of `f` over `[a, b]`.
///
/// The step is halved until two successive levels agree to `tol` relative to
/// the larger of 1 and the integral magnitude. Abscissae are generated from
/// the distance to the nearer endpoint, so a singularity at an endpoint equal
/// to zero is sampled without cancellation; elsewhere the integrand should be
/// written in the distance to the singular point (e.g. by substitution).
/// Nodes that round onto an endpoint are skipped.
///
/// ```text
/// x(t) = (a+b)/2 + (b-a)/2 * tanh(pi/2 sinh t)
/// w(t) = (b-a)/2 * (pi/2) cosh t / cosh^2(pi/2 sinh t)
/// ```
pub fn tanh_sinh<T: Scalar, F: Fn(f64) -> T>(f: F, a: f64, b: f64, tol: f64) -> Result<T> {
    if a == b {
        return Ok(T::zero());
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let half = 0.5 * (hi - lo);
    let t_max = 4.0;
    let eval = |t: f64| -> T {
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        // distance to the nearer endpoint: half * (1 - tanh|u|) = half * 2 / (1 + e^{2|u|})
        let d = half * 2.0 / (1.0 + (2.0 * u.abs()).exp());
        if d <= 0.0 {
            return T::zero();
        }
        let x = if u < 0.0 { lo + d } else { hi - d };
        // nodes that round onto an endpoint carry negligible weight
        if x <= lo || x >= hi {
            return T::zero();
        }
        let cu = u.cosh();
        let w = half * std::f64::consts::FRAC_PI_2 * t.cosh() / (cu * cu);
        if w == 0.0 {
            return T::zero();
        }
        f(x) * w
    };
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        let t = k as f64 * h;
        sum = sum + eval(t) + eval(-t);
        k += 1;
    }
    let mut estimate = sum * h;
    for _level in 0..12 {
        h *= 0.5;
        // only the new odd nodes are evaluated
        let mut k = 1;
        while (k as f64) * h <= t_max {
            let t = k as f64 * h;
            sum = sum + eval(t) + eval(-t);
            k += 2;
        }
        let next = sum * h;
        if !next.is_finite_value() {
            return Err(numeric("tanh-sinh quadrature", "non-finite integrand value"));
        }
        let diff = (next - estimate).magnitude();
        estimate = next;
        if diff <= tol * estimate.magnitude().max(1.0) {
            return Ok(estimate * sign);
        }
    }
    Err(numeric(
        "tanh-sinh quadrature",
        format!("no convergence to {tol:e} on [{lo}, {hi}] after 12 refinements"),
    ))
}

const GK_X: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const GK_WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Scalar, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut k = fc * GK_WK[7];
    let mut g = fc * GK_WG[3];
    for i in 0..7 {
        let dx = half * GK_X[i];
        let fs = f(mid - dx) + f(mid + dx);
        k = k + fs * GK_WK[i];
        if i % 2 == 1 {
            g = g + fs * GK_WG[i / 2];
        }
    }
    let k = k * half;
    let g = g * half;
    (k, (k - g).magnitude())
}

/// Globally adaptive Gauss–Kronrod (7/15) quadrature of `f` over `[a, b]`.
///
/// The subinterval with the largest error estimate is bisected until the
/// summed estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn gauss_kronrod<T: Scalar, F: Fn(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_intervals: usize,
) -> Result<T> {
    let (v, e) = gk15(&f, a, b);
    let mut parts: Vec<(f64, f64, T, f64)> = vec![(a, b, v, e)];
    loop {
        let mut total = T::zero();
        let mut err = 0.0;
        let mut worst = 0;
        for (i, p) in parts.iter().enumerate() {
            total = total + p.2;
            err += p.3;
            if p.3 > parts[worst].3 {
                worst = i;
            }
        }
        if !total.is_finite_value() {
            return Err(numeric("Gauss-Kronrod quadrature", "non-finite integrand value"));
        }
        if err <= abs_tol.max(rel_tol * total.magnitude()) {
            return Ok(total);
        }
        if parts.len() >= max_intervals {
            return Err(numeric(
                "Gauss-Kronrod quadrature",
                format!("error estimate {err:e} after {max_intervals} subintervals"),
            ));
        }
        let (lo, hi, _, _) = parts.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
}
