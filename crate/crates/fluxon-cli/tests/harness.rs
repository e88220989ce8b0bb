use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use fluxon::exact_ist::WaveSample;
use fluxon_cli::config::GridSpec;
use fluxon_cli::output::colormap;
use fluxon_cli::{compare, run_scenario, HarnessError, Mode, ScenarioConfig, TableRow};
use proptest::prelude::*;
use serde_json::{json, Value};

fn scenario(mode: &str) -> Value {
    json!({
        "mode": mode,
        "profile": { "kind": "sech", "amplitude": 0.75 },
        "n_list": [4, 8],
        "x_grid": { "min": 1.2, "max": 2.0, "count": 3 },
        "t_grid": { "min": 0.0, "max": 0.3, "count": 4 }
    })
}

fn write_config(dir: &Path, value: &Value) -> std::path::PathBuf {
    let path = dir.join("scenario.json");
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn fluxon(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fluxon")).args(args).output().unwrap()
}

#[test]
fn invalid_configs_exit_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut bad = scenario("compare");
    bad["t_grid"]["count"] = json!(0);
    let path = write_config(dir.path(), &bad);
    let out = fluxon(&["compare", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("t_grid is empty"));

    let missing = dir.path().join("missing.json");
    let out = fluxon(&["exact", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    for (field, value) in [("n_list", json!([8, 4])), ("n_list", json!([])), ("x_grid", json!({"min": 1.0, "max": 0.0, "count": 3}))] {
        let mut c = scenario("exact");
        c[field] = value;
        let cfg = ScenarioConfig::from_json(&c.to_string()).unwrap();
        assert!(matches!(cfg.validate(), Err(HarnessError::Config(_))), "{field}");
    }
    let mut c = scenario("exact");
    c.as_object_mut().unwrap().remove("mode");
    assert!(ScenarioConfig::from_json(&c.to_string()).unwrap().validate().is_err());
}

#[test]
fn failed_checks_exit_with_check_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = scenario("compare");
    c["checks"] = json!({ "max_sup_err_cos": 1e-12 });
    let path = write_config(dir.path(), &c);
    let out = fluxon(&["compare", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stdout).lines().any(|l| l.starts_with("FAIL ")));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &scenario("compare"));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = fluxon(&["compare", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["exact.csv", "asymptotic.csv", "states.csv", "comparison.csv", "summary.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn summary_statistics_follow_from_comparison_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ScenarioConfig::from_json(&scenario("compare").to_string()).unwrap();
    let (summary, tables) = run_scenario(&cfg, dir.path()).unwrap();
    assert_eq!(summary.mode, Mode::Compare);
    assert_eq!(tables.comparison.len(), 2 * 12);
    assert!(summary.failures.is_empty(), "{:?}", summary.failures);

    let mut reader = csv::Reader::from_path(dir.path().join("comparison.csv")).unwrap();
    let headers = reader.headers().unwrap().clone();
    let col = |name: &str| headers.iter().position(|h| h == name).unwrap();
    let (ni, ei) = (col("N"), col("err_cos"));
    let mut per_n: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for rec in reader.records() {
        let rec = rec.unwrap();
        per_n.entry(rec[ni].parse().unwrap()).or_default().push(rec[ei].parse().unwrap());
    }
    let sups: Vec<f64> = per_n.values().map(|v| v.iter().cloned().fold(0.0, f64::max)).collect();
    for (stats, (n, errs)) in summary.errors.iter().zip(&per_n) {
        assert_eq!(stats.n, *n);
        assert_eq!(stats.count, errs.len());
        let sup = errs.iter().cloned().fold(0.0, f64::max);
        assert!((stats.sup_err_cos - sup).abs() <= 1e-15 * sup.max(1.0));
        assert!(stats.sup_err_cos <= stats.mean_err_cos * stats.count as f64 + 1e-15);
        assert!(stats.mean_err_cos <= stats.sup_err_cos);
    }
    assert_eq!(summary.ratios.len(), 1);
    assert!((summary.ratios[0].ratio - sups[1] / sups[0]).abs() < 1e-12);

    let on_disk: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(on_disk["errors"].as_array().unwrap().len(), 2);
}

#[test]
fn heatmap_has_one_cell_per_node() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = scenario("heatmap");
    c["n_list"] = json!([4]);
    c["x_grid"] = json!({ "min": -2.0, "max": 2.0, "count": 9 });
    c["t_grid"] = json!({ "min": 0.0, "max": 1.0, "count": 5 });
    let cfg = ScenarioConfig::from_json(&c.to_string()).unwrap();
    let (summary, _) = run_scenario(&cfg, dir.path()).unwrap();
    assert!(summary.files.iter().any(|f| f == "heatmap_N4.svg"));
    let svg = fs::read_to_string(dir.path().join("heatmap_N4.svg")).unwrap();
    assert_eq!(svg.matches("<rect").count(), 45);
    assert!(svg.trim_end().ends_with("</svg>"));
}

fn row(n: usize, x: f64, t: f64, c: f64) -> TableRow {
    TableRow { n, sample: WaveSample::new(x, t, c, (1.0 - c * c).sqrt(), 0.1) }
}

#[test]
fn comparison_join_semantics() {
    let a = vec![row(4, 0.0, 0.0, 1.0), row(4, 0.5, 0.1, 0.8), row(8, 0.5, 0.1, 0.6)];
    let same = compare(&a, &a).unwrap();
    assert_eq!(same.len(), 3);
    assert!(same.iter().all(|r| r.err_cos == 0.0 && r.err_sin == 0.0 && r.err_ut == 0.0));

    let mut shuffled = a.clone();
    shuffled.reverse();
    shuffled[0].sample.cos_half = 0.5;
    let recs = compare(&a, &shuffled).unwrap();
    assert!((recs[2].err_cos - 0.1).abs() < 1e-15);

    let mut other = a.clone();
    other[1].sample.x = 0.75;
    assert!(matches!(compare(&a, &other), Err(HarnessError::Join(_))));
    assert!(matches!(compare(&a, &a[..2]), Err(HarnessError::Join(_))));
    let dup = vec![a[0], a[0]];
    assert!(matches!(compare(&dup, &dup), Err(HarnessError::Join(_))));
}

proptest! {
    #[test]
    fn colormap_is_monotone_between_endpoints(v in -1.0f64..1.0, w in -1.0f64..1.0) {
        prop_assert_eq!(colormap(-1.0), (0, 0, 255));
        prop_assert_eq!(colormap(0.0), (255, 255, 255));
        prop_assert_eq!(colormap(1.0), (255, 0, 0));
        prop_assert_eq!(colormap(f64::NAN), colormap(0.0));
        let (lo, hi) = if v < w { (v, w) } else { (w, v) };
        // red never decreases, blue never increases along the scale
        prop_assert!(colormap(lo).0 <= colormap(hi).0 && colormap(lo).2 >= colormap(hi).2);
    }

    #[test]
    fn grid_values_are_sorted_with_exact_ends(min in -10.0f64..10.0, span in 0.0f64..10.0, count in 2usize..200) {
        let g = GridSpec { min, max: min + span, count };
        let v = g.values();
        prop_assert_eq!(v.len(), count);
        prop_assert_eq!(v[0], min);
        prop_assert_eq!(v[count - 1], min + span);
        prop_assert!(v.windows(2).all(|w| w[0] <= w[1]));
    }
}
