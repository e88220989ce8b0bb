//! Scenario configuration: a single JSON document describing the profile,
//! grids, tolerances, outputs and optional acceptance checks.
//!
//! ```text
//! {
//!   "mode": "compare",
//!   "profile": { "kind": "sech", "amplitude": 0.75 },
//!   "n_list": [8, 16],
//!   "x_grid": { "min": 1.5, "max": 1.5, "count": 1 },
//!   "t_grid": { "min": 0.05, "max": 0.45, "count": 40 },
//!   "checks": { "max_sup_err_cos": 0.15, "ratio_range": [0.3, 0.8] }
//! }
//! ```

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use fluxon::exact_ist::{DeltaPolicy, SolveOptions};
use fluxon::modulation::ModulationOptions;
use fluxon::profiles::{make_sech_profile, profile_from_scr_g, ImpulseProfile};

use crate::error::{HarnessError, Result};

/// What a scenario computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Bohr–Sommerfeld spectra for every `N`.
    Spectrum,
    /// Exact condensate samples on the grid.
    Exact,
    /// Elliptic asymptotic samples on the grid.
    Asymptotic,
    /// Exact and asymptotic samples with per-node errors.
    Compare,
    /// Modulation fields, characteristic velocities and Whitham residuals.
    Whitham,
    /// Exact `cos(u)` rendered as an SVG heatmap per `N`.
    Heatmap,
}

impl Mode {
    /// Lower-case name used for subcommands and file names.
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Spectrum => "spectrum",
            Mode::Exact => "exact",
            Mode::Asymptotic => "asymptotic",
            Mode::Compare => "compare",
            Mode::Whitham => "whitham",
            Mode::Heatmap => "heatmap",
        }
    }
}

/// Impulse profile family and parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProfileSpec {
    /// `G(x) = -4 A sech(x)`.
    Sech {
        /// Amplitude `A > 0`.
        amplitude: f64,
    },
    /// Profile generated by a constant generating function `c` with peak `g0`.
    ConstantGenerator {
        /// Constant value of the generating function.
        c: f64,
        /// Peak value `G(0) < 0`.
        g0: f64,
    },
}

impl ProfileSpec {
    /// Build the library profile.
    pub fn build(&self) -> Result<ImpulseProfile> {
        Ok(match *self {
            ProfileSpec::Sech { amplitude } => make_sech_profile(amplitude)?,
            ProfileSpec::ConstantGenerator { c, g0 } => {
                if !(c > 0.0) {
                    return Err(HarnessError::Config(format!("generator constant must be positive, got {c}")));
                }
                profile_from_scr_g(Arc::new(move |_| c), g0)?
            }
        })
    }
}

/// Uniform grid `min, ..., max` with `count` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// First point.
    pub min: f64,
    /// Last point.
    pub max: f64,
    /// Number of points (a single point requires `min == max`).
    pub count: usize,
}

impl GridSpec {
    /// Grid values in increasing order.
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|j| {
                if j + 1 == self.count {
                    self.max
                } else {
                    self.min + (self.max - self.min) * j as f64 / (self.count - 1) as f64
                }
            })
            .collect()
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.count == 0 {
            return Err(HarnessError::Config(format!("{name} is empty")));
        }
        if !(self.min.is_finite() && self.max.is_finite()) || self.max < self.min {
            return Err(HarnessError::Config(format!(
                "{name} must satisfy min <= max with finite bounds, got [{}, {}]",
                self.min, self.max
            )));
        }
        if self.count == 1 && self.min != self.max {
            return Err(HarnessError::Config(format!("{name} with one point needs min == max")));
        }
        Ok(())
    }
}

/// `Delta/Nabla` split used by the exact solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySpec {
    /// `Delta` empty for `x >= 0`, `Nabla` empty otherwise.
    #[default]
    SignOfX,
    /// Split stored in the scattering data.
    Stored,
}

/// Numerical tolerances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Gauss–Legendre order of the modulation contour integrals.
    pub quadrature_order: usize,
    /// Newton tolerance of the modulation conditions.
    pub newton: f64,
    /// Largest admissible condition estimate of the exact solver.
    pub cond_cap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let m = ModulationOptions::default();
        Tolerances {
            quadrature_order: m.order,
            newton: m.newton_tol,
            cond_cap: SolveOptions::default().cond_cap,
        }
    }
}

/// SVG heatmap geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvgSpec {
    /// Width of one grid cell in pixels.
    pub cell_width: f64,
    /// Height of one grid cell in pixels.
    pub cell_height: f64,
}

impl Default for SvgSpec {
    fn default() -> Self {
        SvgSpec { cell_width: 4.0, cell_height: 4.0 }
    }
}

/// Output locations.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Outputs {
    /// Output directory (overridden by `--out`).
    pub dir: Option<PathBuf>,
    /// Heatmap geometry (heatmap mode).
    pub svg: Option<SvgSpec>,
}

/// Optional acceptance checks evaluated after the run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Checks {
    /// Bound on the sup error of `cos(u/2)` at the smallest `N`.
    pub max_sup_err_cos: Option<f64>,
    /// Admissible range of the sup-error ratio between consecutive `N`.
    pub ratio_range: Option<[f64; 2]>,
    /// Bound on the Whitham system residual.
    pub max_whitham_residual: Option<f64>,
    /// Bound on `|c_j - c^_j|`.
    pub max_velocity_gap: Option<f64>,
}

/// Complete scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    /// Computation to run (overridden by the CLI subcommand).
    #[serde(default)]
    pub mode: Option<Mode>,
    /// Impulse profile.
    pub profile: ProfileSpec,
    /// Condensate indices `N`.
    #[serde(default)]
    pub n_list: Vec<usize>,
    /// Spatial grid.
    pub x_grid: GridSpec,
    /// Temporal grid.
    pub t_grid: GridSpec,
    /// `Delta/Nabla` policy of the exact solver.
    #[serde(default)]
    pub delta_policy: PolicySpec,
    /// Numerical tolerances.
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Output locations.
    #[serde(default)]
    pub outputs: Outputs,
    /// Acceptance checks.
    #[serde(default)]
    pub checks: Checks,
}

impl ScenarioConfig {
    /// Parse a JSON document (without validating it).
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Read and parse a JSON file.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    /// Mode, which must be set by the document or the command line.
    pub fn mode(&self) -> Result<Mode> {
        self.mode.ok_or_else(|| HarnessError::Config("no mode given".into()))
    }

    /// Check the structural invariants of the configuration.
    pub fn validate(&self) -> Result<()> {
        let mode = self.mode()?;
        self.x_grid.validate("x_grid")?;
        self.t_grid.validate("t_grid")?;
        let t = &self.tolerances;
        if t.quadrature_order < 8 || !(t.newton > 0.0) || !(t.cond_cap > 0.0) {
            return Err(HarnessError::Config(
                "tolerances must be positive (quadrature_order >= 8)".into(),
            ));
        }
        if mode != Mode::Whitham && self.n_list.is_empty() {
            return Err(HarnessError::Config(format!("mode {} needs a nonempty n_list", mode.name())));
        }
        if self.n_list.contains(&0) {
            return Err(HarnessError::Config("n_list entries must be positive".into()));
        }
        if self.n_list.windows(2).any(|w| w[1] <= w[0]) {
            return Err(HarnessError::Config("n_list must be strictly increasing".into()));
        }
        if matches!(mode, Mode::Asymptotic | Mode::Compare | Mode::Whitham) && self.t_grid.min < 0.0 {
            return Err(HarnessError::Config("modulation modes need t >= 0".into()));
        }
        if mode == Mode::Whitham && (self.x_grid.count < 3 || self.t_grid.count < 3) {
            return Err(HarnessError::Config("whitham mode needs at least 3 points per grid".into()));
        }
        if let Some([lo, hi]) = self.checks.ratio_range {
            if !(lo <= hi) {
                return Err(HarnessError::Config("ratio_range must be [low, high]".into()));
            }
        }
        Ok(())
    }

    /// Exact-solver options.
    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            cond_cap: self.tolerances.cond_cap,
            policy: match self.delta_policy {
                PolicySpec::SignOfX => DeltaPolicy::SignOfX,
                PolicySpec::Stored => DeltaPolicy::Stored,
            },
        }
    }

    /// Modulation options.
    pub fn modulation_options(&self) -> ModulationOptions {
        ModulationOptions {
            order: self.tolerances.quadrature_order,
            newton_tol: self.tolerances.newton,
            ..ModulationOptions::default()
        }
    }
}
