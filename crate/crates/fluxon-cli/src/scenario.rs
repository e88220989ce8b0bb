//! Running a scenario: computing the requested tables, writing artifacts
//! and evaluating acceptance checks.
//!
//! Work is split by `x` column across threads; results are gathered in grid
//! order, so reruns with the same configuration produce identical files.

use std::path::Path;
use std::thread;

use serde::{Deserialize, Serialize};

use fluxon::asymptotics::evaluate;
use fluxon::exact_ist::{solve_exact_with, SolveOptions, WaveSample};
use fluxon::modulation::{solve_column, ModulationOptions, ModulationState};
use fluxon::profiles::ImpulseProfile;
use fluxon::spectra::{bohr_sommerfeld, PoleKind, ScatteringData};
use fluxon::whitham::{characteristic_velocities, classify, hat_velocities, whitham_residual, FieldTable, WhithamType};
use fluxon::FluxonError;

use crate::compare::{compare, error_ratios, error_stats, ComparisonRecord, ErrorRatio, ErrorStats, TableRow};
use crate::config::{Mode, ScenarioConfig};
use crate::error::{Result, EXIT_CHECK, EXIT_NUMERIC, EXIT_OK};
use crate::output::{fmt, heatmap_svg, write_comparison, write_samples};

/// A node at which a computation failed (the run continues).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFailure {
    /// Position.
    pub x: f64,
    /// Time.
    pub t: f64,
    /// Condensate index, when the failure is index specific.
    pub n: Option<usize>,
    /// `"exact"`, `"modulation"` or `"asymptotic"`.
    pub stage: String,
    /// Error message.
    pub error: String,
}

/// Spectrum summary for one condensate index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumInfo {
    /// Condensate index.
    pub n: usize,
    /// `eps_N`.
    pub eps: f64,
    /// Number of breather eigenvalues.
    pub breathers: usize,
    /// Number of kink eigenvalues.
    pub kinks: usize,
}

/// Whitham audit summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhithamSummary {
    /// Number of nodes with a residual.
    pub residual_nodes: usize,
    /// Largest system residual.
    pub max_system: f64,
    /// Largest Riemann-invariant residual.
    pub max_riemann: f64,
    /// Largest `|c_j - c^_j|`.
    pub max_velocity_gap: f64,
    /// Hyperbolic nodes.
    pub hyperbolic: usize,
    /// Elliptic nodes.
    pub elliptic: usize,
}

/// Outcome of one acceptance check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    /// Check name.
    pub name: String,
    /// Whether it passed.
    pub passed: bool,
    /// Measured value and bound.
    pub detail: String,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    /// Mode that ran.
    pub mode: Mode,
    /// Number of grid nodes per condensate index (spectra in spectrum mode).
    pub nodes: usize,
    /// Number of successfully computed samples or states.
    pub successes: usize,
    /// Spectra used.
    pub spectra: Vec<SpectrumInfo>,
    /// Largest exact-solver condition estimate.
    pub max_condition: Option<f64>,
    /// Error statistics (compare mode).
    pub errors: Vec<ErrorStats>,
    /// Consecutive error ratios (compare mode).
    pub ratios: Vec<ErrorRatio>,
    /// Whitham audit (whitham mode).
    pub whitham: Option<WhithamSummary>,
    /// Failed nodes.
    pub failures: Vec<NodeFailure>,
    /// Acceptance checks.
    pub checks: Vec<CheckResult>,
    /// Artifacts written, relative to the output directory.
    pub files: Vec<String>,
}

impl RunSummary {
    /// Whether every check passed.
    pub fn checks_pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Exit status: numeric failure if nothing was computed, check failure
    /// if a check failed, success otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.successes == 0 && self.nodes > 0 {
            EXIT_NUMERIC
        } else if !self.checks_pass() {
            EXIT_CHECK
        } else {
            EXIT_OK
        }
    }
}

/// Everything computed by a run, kept in memory for callers and tests.
#[derive(Debug, Clone, Default)]
pub struct RunTables {
    /// Exact samples.
    pub exact: Vec<TableRow>,
    /// Asymptotic samples.
    pub asymptotic: Vec<TableRow>,
    /// Modulation states, `[ix][it]`.
    pub states: Vec<Vec<Option<ModulationState>>>,
    /// Joined comparison.
    pub comparison: Vec<ComparisonRecord>,
}

fn par_columns<T: Send>(xs: &[f64], f: impl Fn(f64) -> T + Sync) -> Vec<T> {
    thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = xs.iter().map(|&x| scope.spawn(move || f(x))).collect();
        handles.into_iter().map(|h| h.join().expect("column worker panicked")).collect()
    })
}

/// Scattering data for every `N` of the configuration.
pub fn spectra(profile: &ImpulseProfile, n_list: &[usize]) -> Result<Vec<ScatteringData>> {
    Ok(n_list.iter().map(|&n| bohr_sommerfeld(profile, n)).collect::<fluxon::Result<_>>()?)
}

/// Exact samples on the grid for every spectrum, with failures and the
/// largest condition estimate.
pub fn exact_table(
    data: &[ScatteringData],
    xs: &[f64],
    ts: &[f64],
    options: &SolveOptions,
) -> (Vec<TableRow>, Vec<NodeFailure>, Option<f64>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut cond: Option<f64> = None;
    for d in data {
        let columns = par_columns(xs, |x| {
            ts.iter()
                .map(|&t| solve_exact_with(d, x, t, options).map_err(|e| (x, t, e)))
                .collect::<Vec<_>>()
        });
        for col in columns {
            for r in col {
                match r {
                    Ok((sample, diag)) => {
                        cond = Some(cond.map_or(diag.cond_estimate, |c| c.max(diag.cond_estimate)));
                        rows.push(TableRow { n: d.n, sample });
                    }
                    Err((x, t, e)) => failures.push(NodeFailure {
                        x,
                        t,
                        n: Some(d.n),
                        stage: "exact".into(),
                        error: e.to_string(),
                    }),
                }
            }
        }
    }
    (rows, failures, cond)
}

fn column_states(
    profile: &ImpulseProfile,
    x: f64,
    ts: &[f64],
    options: &ModulationOptions,
) -> (Vec<Option<ModulationState>>, Option<String>) {
    match solve_column(profile, x, ts, options) {
        Ok(states) => (states.into_iter().map(Some).collect(), None),
        Err(e) => {
            let msg = e.to_string();
            let good = match e {
                FluxonError::Continuation { t_last_good, .. } => {
                    let prefix: Vec<f64> = ts.iter().copied().filter(|&t| t <= t_last_good).collect();
                    solve_column(profile, x, &prefix, options).unwrap_or_default()
                }
                _ => Vec::new(),
            };
            let mut out: Vec<Option<ModulationState>> = good.into_iter().map(Some).collect();
            out.resize(ts.len(), None);
            (out, Some(msg))
        }
    }
}

/// Modulation states on the grid, `[ix][it]`, continuing each column in `t`.
pub fn state_table(
    profile: &ImpulseProfile,
    xs: &[f64],
    ts: &[f64],
    options: &ModulationOptions,
) -> (Vec<Vec<Option<ModulationState>>>, Vec<NodeFailure>) {
    let columns = par_columns(xs, |x| column_states(profile, x, ts, options));
    let mut failures = Vec::new();
    let mut table = Vec::with_capacity(xs.len());
    for (&x, (col, msg)) in xs.iter().zip(columns) {
        if let Some(msg) = msg {
            for (&t, s) in ts.iter().zip(&col) {
                if s.is_none() {
                    failures.push(NodeFailure { x, t, n: None, stage: "modulation".into(), error: msg.clone() });
                }
            }
        }
        table.push(col);
    }
    (table, failures)
}

/// Asymptotic samples for every spectrum from a state table.
pub fn asymptotic_table(
    data: &[ScatteringData],
    states: &[Vec<Option<ModulationState>>],
) -> (Vec<TableRow>, Vec<NodeFailure>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for d in data {
        for s in states.iter().flatten().flatten() {
            match evaluate(s, d.eps) {
                Ok(sample) => rows.push(TableRow { n: d.n, sample }),
                Err(e) => failures.push(NodeFailure {
                    x: s.x,
                    t: s.t,
                    n: Some(d.n),
                    stage: "asymptotic".into(),
                    error: e.to_string(),
                }),
            }
        }
    }
    (rows, failures)
}

fn write_states(path: &Path, states: &[Vec<Option<ModulationState>>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ModulationState::CSV_HEADER)?;
    for s in states.iter().flatten().flatten() {
        w.write_record(s.csv_row())?;
    }
    w.flush()?;
    Ok(())
}

fn write_spectrum(path: &Path, data: &[ScatteringData]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["N", "k", "v", "kind", "w_re", "w_im", "sign", "in_delta"])?;
    for d in data {
        for p in &d.poles {
            let kind = match p.kind {
                PoleKind::Kink => "kink",
                PoleKind::Breather => "breather",
            };
            w.write_record([
                d.n.to_string(),
                p.k.to_string(),
                fmt(d.v[p.k]),
                kind.to_string(),
                fmt(p.w.re),
                fmt(p.w.im),
                p.sign.to_string(),
                p.in_delta.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn whitham_audit(
    path: &Path,
    xs: &[f64],
    ts: &[f64],
    states: &[Vec<Option<ModulationState>>],
) -> Result<WhithamSummary> {
    let mut summary = WhithamSummary {
        residual_nodes: 0,
        max_system: 0.0,
        max_riemann: 0.0,
        max_velocity_gap: 0.0,
        hyperbolic: 0,
        elliptic: 0,
    };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "x",
        "t",
        "case",
        "n_p",
        "E",
        "c0_re",
        "c0_im",
        "c1_re",
        "c1_im",
        "c0hat_re",
        "c0hat_im",
        "c1hat_re",
        "c1hat_im",
        "velocity_gap",
        "type",
        "discriminant",
        "residual_system",
        "residual_riemann",
    ])?;
    let (nx, nt) = (xs.len(), ts.len());
    for ix in 0..nx {
        for it in 0..nt {
            let Some(s) = states[ix][it] else { continue };
            let band = s.band();
            let (c0, c1) = characteristic_velocities(&band)?;
            let (h0, h1) = hat_velocities(&band)?;
            let gap = (c0 - h0).norm().max((c1 - h1).norm());
            summary.max_velocity_gap = summary.max_velocity_gap.max(gap);
            let class = classify(s.energy_e, s.case_tag)?;
            match class.kind {
                WhithamType::Hyperbolic => summary.hyperbolic += 1,
                WhithamType::Elliptic => summary.elliptic += 1,
                WhithamType::Degenerate => {}
            }
            let interior = ix > 0 && ix + 1 < nx && it > 0 && it + 1 < nt;
            let residual = if interior {
                let col = |i: usize| states[i][it - 1..=it + 1].iter().copied().collect::<Option<Vec<_>>>();
                match (col(ix - 1), col(ix), col(ix + 1)) {
                    (Some(a), Some(b), Some(c)) => {
                        let table = FieldTable {
                            xs: xs[ix - 1..=ix + 1].to_vec(),
                            ts: ts[it - 1..=it + 1].to_vec(),
                            states: vec![a, b, c],
                        };
                        whitham_residual(&table)?.first().copied()
                    }
                    _ => None,
                }
            } else {
                None
            };
            if let Some(r) = residual {
                summary.residual_nodes += 1;
                summary.max_system = summary.max_system.max(r.system);
                summary.max_riemann = summary.max_riemann.max(r.riemann);
            }
            let kind = match class.kind {
                WhithamType::Hyperbolic => "hyperbolic",
                WhithamType::Elliptic => "elliptic",
                WhithamType::Degenerate => "degenerate",
            };
            w.write_record([
                fmt(s.x),
                fmt(s.t),
                s.case_tag.to_string(),
                fmt(s.n_p),
                fmt(s.energy_e),
                fmt(c0.re),
                fmt(c0.im),
                fmt(c1.re),
                fmt(c1.im),
                fmt(h0.re),
                fmt(h0.im),
                fmt(h1.re),
                fmt(h1.im),
                fmt(gap),
                kind.to_string(),
                fmt(class.discriminant),
                residual.map_or(String::new(), |r| fmt(r.system)),
                residual.map_or(String::new(), |r| fmt(r.riemann)),
            ])?;
        }
    }
    w.flush()?;
    Ok(summary)
}

fn evaluate_checks(config: &ScenarioConfig, summary: &RunSummary) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let c = &config.checks;
    if let Some(bound) = c.max_sup_err_cos {
        let (passed, detail) = match summary.errors.first() {
            Some(s) => (s.sup_err_cos <= bound, format!("N = {}: sup err {:.6e} <= {bound:e}", s.n, s.sup_err_cos)),
            None => (false, "no compared nodes".to_string()),
        };
        out.push(CheckResult { name: "max_sup_err_cos".into(), passed, detail });
    }
    if let Some([lo, hi]) = c.ratio_range {
        let passed = !summary.ratios.is_empty() && summary.ratios.iter().all(|r| r.ratio >= lo && r.ratio <= hi);
        let detail = summary
            .ratios
            .iter()
            .map(|r| format!("{}->{}: {:.4}", r.n_from, r.n_to, r.ratio))
            .collect::<Vec<_>>()
            .join(", ");
        out.push(CheckResult { name: "ratio_range".into(), passed, detail: format!("[{detail}] in [{lo}, {hi}]") });
    }
    if let Some(bound) = c.max_whitham_residual {
        let (passed, detail) = match summary.whitham {
            Some(w) if w.residual_nodes > 0 => (w.max_system <= bound, format!("{:.6e} <= {bound:e}", w.max_system)),
            _ => (false, "no residual nodes".to_string()),
        };
        out.push(CheckResult { name: "max_whitham_residual".into(), passed, detail });
    }
    if let Some(bound) = c.max_velocity_gap {
        let (passed, detail) = match summary.whitham {
            Some(w) => (w.max_velocity_gap <= bound, format!("{:.6e} <= {bound:e}", w.max_velocity_gap)),
            None => (false, "no whitham audit".to_string()),
        };
        out.push(CheckResult { name: "max_velocity_gap".into(), passed, detail });
    }
    out
}

/// Run a validated scenario, writing artifacts into `out_dir`.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<(RunSummary, RunTables)> {
    config.validate()?;
    let mode = config.mode()?;
    std::fs::create_dir_all(out_dir)?;
    let profile = config.profile.build()?;
    let xs = config.x_grid.values();
    let ts = config.t_grid.values();
    let data = spectra(&profile, &config.n_list)?;
    let solve_opts = config.solve_options();
    let mod_opts = config.modulation_options();

    let mut summary = RunSummary {
        mode,
        nodes: if mode == Mode::Spectrum { data.len() } else { xs.len() * ts.len() },
        successes: 0,
        spectra: data
            .iter()
            .map(|d| SpectrumInfo { n: d.n, eps: d.eps, breathers: d.breather_count(), kinks: d.kink_count() })
            .collect(),
        max_condition: None,
        errors: Vec::new(),
        ratios: Vec::new(),
        whitham: None,
        failures: Vec::new(),
        checks: Vec::new(),
        files: Vec::new(),
    };
    let mut tables = RunTables::default();
    let mut file = |name: &str| {
        summary.files.push(name.to_string());
        out_dir.join(name)
    };

    let needs_exact = matches!(mode, Mode::Exact | Mode::Compare | Mode::Heatmap);
    let needs_states = matches!(mode, Mode::Asymptotic | Mode::Compare | Mode::Whitham);
    let mut failures = Vec::new();
    let mut successes = 0;
    let mut max_condition = None;
    let mut whitham = None;

    if mode == Mode::Spectrum {
        write_spectrum(&file("spectrum.csv"), &data)?;
        successes = data.len();
    }
    if needs_exact {
        let (rows, f, cond) = exact_table(&data, &xs, &ts, &solve_opts);
        write_samples(&file("exact.csv"), &rows)?;
        successes += rows.len();
        failures.extend(f);
        max_condition = cond;
        tables.exact = rows;
    }
    if needs_states {
        let (states, f) = state_table(&profile, &xs, &ts, &mod_opts);
        write_states(&file("states.csv"), &states)?;
        failures.extend(f);
        if mode == Mode::Whitham {
            successes += states.iter().flatten().flatten().count();
            whitham = Some(whitham_audit(&file("whitham.csv"), &xs, &ts, &states)?);
        } else {
            let (rows, f) = asymptotic_table(&data, &states);
            write_samples(&file("asymptotic.csv"), &rows)?;
            if mode == Mode::Asymptotic {
                successes += rows.len();
            }
            failures.extend(f);
            tables.asymptotic = rows;
        }
        tables.states = states;
    }
    if mode == Mode::Compare {
        // Only nodes present in both tables are compared; the others are
        // recorded so that no node disappears silently.
        let key = |r: &TableRow| (r.n, r.sample.x.to_bits(), r.sample.t.to_bits());
        let akeys: std::collections::BTreeSet<_> = tables.asymptotic.iter().map(key).collect();
        let ekeys: std::collections::BTreeSet<_> = tables.exact.iter().map(key).collect();
        for (rows, other, missing) in [
            (&tables.exact, &akeys, "asymptotic"),
            (&tables.asymptotic, &ekeys, "exact"),
        ] {
            for r in rows.iter().filter(|r| !other.contains(&key(r))) {
                failures.push(NodeFailure {
                    x: r.sample.x,
                    t: r.sample.t,
                    n: Some(r.n),
                    stage: "compare".into(),
                    error: format!("no {missing} sample at this node"),
                });
            }
        }
        let exact: Vec<TableRow> = tables.exact.iter().copied().filter(|r| akeys.contains(&key(r))).collect();
        let asymp: Vec<TableRow> =
            tables.asymptotic.iter().copied().filter(|r| ekeys.contains(&key(r))).collect();
        tables.comparison = compare(&exact, &asymp)?;
        write_comparison(&file("comparison.csv"), &tables.comparison)?;
        successes = tables.comparison.len();
    }
    if mode == Mode::Heatmap {
        let svg = config.outputs.svg.unwrap_or_default();
        for d in &data {
            let mut grid: Vec<Vec<Option<WaveSample>>> = vec![vec![None; ts.len()]; xs.len()];
            let mut it = tables.exact.iter().filter(|r| r.n == d.n).peekable();
            for (ix, &x) in xs.iter().enumerate() {
                for (jt, &t) in ts.iter().enumerate() {
                    if let Some(r) = it.peek() {
                        if r.sample.x == x && r.sample.t == t {
                            grid[ix][jt] = Some(r.sample);
                            it.next();
                        }
                    }
                }
            }
            std::fs::write(file(&format!("heatmap_N{}.svg", d.n)), heatmap_svg(&grid, &svg))?;
        }
    }

    summary.successes = successes;
    summary.failures = failures;
    summary.max_condition = max_condition;
    summary.whitham = whitham;
    if mode == Mode::Compare {
        summary.errors = error_stats(&tables.comparison);
        summary.ratios = error_ratios(&summary.errors);
    }
    summary.checks = evaluate_checks(config, &summary);
    summary.files.push("summary.json".into());
    std::fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    if summary.failures.iter().any(|f| f.stage == "exact" && f.error.contains("condition")) {
        log::warn!("some exact solves exceeded the condition cap");
    }
    Ok((summary, tables))
}
