use std::f64::consts::PI;

use num_complex::Complex64 as C;

use fluxon::exact_ist::{
    blaschke_residue, field_grid, sine_gordon_residual, solve_exact, solve_exact_with, SolveOptions, Stencil,
};
use fluxon::profiles::make_sech_profile;
use fluxon::spectra::{bohr_sommerfeld, ScatteringData};
use fluxon::FluxonError;
use proptest::prelude::*;

fn data(a: f64, n: usize) -> ScatteringData {
    bohr_sommerfeld(&make_sech_profile(a).unwrap(), n).unwrap()
}

/// `Pi_N(w) = prod (s + s_y) / (s - s_y)`, `s = sqrt(-w)`.
fn blaschke(d: &ScatteringData, w: C) -> C {
    let s = (-w).sqrt();
    d.poles.iter().map(|p| (s + p.s()) / (s - p.s())).product()
}

#[test]
fn residue_matches_contour_integral() {
    let d = data(0.75, 3);
    for idx in 0..d.poles.len() {
        let y = d.poles[idx].w;
        let gap = d
            .poles
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != idx)
            .map(|(_, p)| (p.w - y).norm())
            .fold(y.norm(), f64::min);
        let r = 0.3 * gap;
        let n = 4000;
        let mut acc = C::new(0.0, 0.0);
        for k in 0..n {
            let e = C::from_polar(1.0, 2.0 * PI * k as f64 / n as f64);
            acc += blaschke(&d, y + e * r) * e * r;
        }
        let numeric = acc / n as f64;
        let res = blaschke_residue(&d, idx).unwrap();
        assert!((res - numeric).norm() < 1e-9 * res.norm().max(1.0), "pole {idx}: {res} vs {numeric}");
    }
    assert!(matches!(blaschke_residue(&d, 99), Err(FluxonError::InvalidParameter(_))));
}

#[test]
fn initial_data_is_reproduced() {
    // sech data with eps = A/N is reflectionless: the condensate is exact at t = 0
    for (a, n) in [(0.75, 1), (0.75, 4), (0.25, 3), (1.25, 6)] {
        let p = make_sech_profile(a).unwrap();
        let d = bohr_sommerfeld(&p, n).unwrap();
        for x in [-2.0, -0.4, 0.0, 0.3, 1.5] {
            let w = solve_exact(&d, x, 0.0).unwrap();
            assert!((w.eps_ut - p.g(x)).abs() < 1e-9, "A = {a}, N = {n}, x = {x}");
            assert!((w.cos_half - 1.0).abs() < 1e-9 && w.sin_half.abs() < 1e-9);
        }
    }
}

#[test]
fn solution_satisfies_sine_gordon() {
    let d = data(0.75, 4);
    let opts = SolveOptions::default();
    for (x, t) in [(0.5, 0.3), (-1.2, 0.8), (2.0, 1.5)] {
        let st = Stencil::solve(&d, x, t, 1e-3, &opts).unwrap();
        let r = sine_gordon_residual(&st, d.eps);
        assert!(r < 1e-4, "({x}, {t}): residual {r}");
        let c = st.center;
        assert!((c.cos_half.powi(2) + c.sin_half.powi(2) - 1.0).abs() < 1e-10);
    }
}

#[test]
fn field_grid_agrees_with_pointwise_solves() {
    let d = data(0.75, 4);
    let xs = [-0.5, 0.25, 1.0];
    let ts: Vec<f64> = (0..=20).map(|i| 0.1 * i as f64).collect();
    let g = field_grid(&d, &xs, &ts, &SolveOptions::default()).unwrap();
    for (ix, &x) in xs.iter().enumerate() {
        for (it, &t) in ts.iter().enumerate() {
            assert_eq!(*g.samples[ix][it].as_ref().unwrap(), solve_exact(&d, x, t).unwrap());
        }
        let u = &g.u_unwrapped[ix];
        for w in u.windows(2) {
            assert!((w[1].unwrap() - w[0].unwrap()).abs() < 2.0 * PI);
        }
    }
    assert!(field_grid(&d, &[1.0, 0.0], &ts, &SolveOptions::default()).is_err());
    assert!(field_grid(&d, &[], &ts, &SolveOptions::default()).is_err());
}

#[test]
fn condition_grows_with_n_and_cap_is_enforced() {
    let opts = SolveOptions::default();
    let conds: Vec<f64> = [2, 4, 8]
        .iter()
        .map(|&n| solve_exact_with(&data(0.75, n), 0.5, 0.2, &opts).unwrap().1.cond_estimate)
        .collect();
    assert!(conds.windows(2).all(|w| w[1] > w[0]), "{conds:?}");
    let tight = SolveOptions { cond_cap: 1.0, ..opts };
    assert!(matches!(
        solve_exact_with(&data(0.75, 4), 0.5, 0.2, &tight),
        Err(FluxonError::Conditioning { .. })
    ));
}

#[test]
fn far_field_is_vacuum() {
    let w = solve_exact(&data(0.75, 8), 50.0, 0.5).unwrap();
    assert!((w.cos_half - 1.0).abs() < 1e-12 && w.eps_ut.abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn solution_is_even_in_x(x in 0.05f64..3.0, t in 0.0f64..2.0) {
        let d = data(0.75, 4);
        let p = solve_exact(&d, x, t).unwrap();
        let m = solve_exact(&d, -x, t).unwrap();
        prop_assert!((p.cos_half - m.cos_half).abs() < 1e-8);
        prop_assert!((p.sin_half - m.sin_half).abs() < 1e-8);
        prop_assert!((p.eps_ut - m.eps_ut).abs() < 1e-8);
    }
}
