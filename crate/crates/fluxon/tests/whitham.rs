use std::f64::consts::PI;

use fluxon::modulation::{initial_state, solve_at, Band, CaseTag, ModulationOptions};
use fluxon::profiles::make_sech_profile;
use fluxon::whitham::{
    characteristic_velocities, classify, hat_velocities, j_and_derivatives, system_matrix, whitham_residual,
    whitham_residual_at, FieldTable, WhithamType,
};
use fluxon::FluxonError;
use num_complex::Complex64 as C;
use proptest::prelude::*;

/// Trapezoidal rule for a periodic integrand (spectrally accurate).
fn periodic_trapezoid(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let n = 2000;
    let h = (b - a) / n as f64;
    (0..n).map(|i| f(a + h * i as f64)).sum::<f64>() * h
}

/// Pendulum action `(1/2pi) oint sqrt(2 (E + cos theta)) dtheta`.
fn action(e: f64) -> f64 {
    if e > 1.0 {
        periodic_trapezoid(|th| (2.0 * (e + th.cos())).sqrt(), 0.0, 2.0 * PI) / (2.0 * PI)
    } else {
        // closed libration orbit, sin(theta/2) = sqrt(m) sin(psi)
        let m = 0.5 * (1.0 + e);
        let f = |ps: f64| 4.0 * m * ps.cos().powi(2) / (1.0 - m * ps.sin().powi(2)).sqrt();
        periodic_trapezoid(f, -0.5 * PI, 0.5 * PI) / PI
    }
}

#[test]
fn action_matches_pendulum_integral() {
    for e in [-0.8, -0.2, 0.3, 0.9] {
        let (j, _, _) = j_and_derivatives(e, CaseTag::L).unwrap();
        assert!((j - action(e)).abs() < 1e-12, "E = {e}");
    }
    for e in [1.1, 1.5, 3.0, 10.0] {
        let (j, _, _) = j_and_derivatives(e, CaseTag::R).unwrap();
        assert!((j - action(e)).abs() < 1e-12, "E = {e}");
    }
}

#[test]
fn action_limits_and_domains() {
    let (j, _, _) = j_and_derivatives(1.0 + 1e-13, CaseTag::R).unwrap();
    assert!((j - 4.0 / PI).abs() < 1e-6);
    let (j, _, _) = j_and_derivatives(-1.0 + 1e-13, CaseTag::L).unwrap();
    assert!(j.abs() < 1e-6);
    assert!(matches!(j_and_derivatives(0.5, CaseTag::R), Err(FluxonError::Domain(_))));
    assert!(j_and_derivatives(1.5, CaseTag::L).is_err());
}

#[test]
fn constant_field_has_zero_residual() {
    let s = solve_at(&make_sech_profile(0.75).unwrap(), 1.5, 0.2, &ModulationOptions::default()).unwrap();
    let xs = vec![1.4, 1.5, 1.6];
    let ts = vec![0.1, 0.2, 0.3];
    let states = xs
        .iter()
        .map(|&x| {
            ts.iter()
                .map(|&t| {
                    let mut c = s;
                    c.x = x;
                    c.t = t;
                    c
                })
                .collect()
        })
        .collect();
    let rows = whitham_residual(&FieldTable { xs, ts, states }).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!((rows[0].system, rows[0].riemann), (0.0, 0.0));
}

#[test]
fn computed_field_residual_is_second_order() {
    let p = make_sech_profile(0.75).unwrap();
    let opts = ModulationOptions::default();
    let coarse = whitham_residual_at(&p, 1.5, 0.2, 0.02, &opts).unwrap();
    let fine = whitham_residual_at(&p, 1.5, 0.2, 0.01, &opts).unwrap();
    assert!(fine.system < 1e-3 && fine.riemann < 1e-3, "{fine:?}");
    assert!(coarse.system / fine.system > 3.0, "{coarse:?} vs {fine:?}");
    assert!(whitham_residual_at(&p, 1.5, 0.005, 0.01, &opts).is_err());
}

#[test]
fn initial_velocities_are_opposite() {
    let p = make_sech_profile(0.75).unwrap();
    for x in [0.3, 1.5, 2.5] {
        let s = initial_state(&p, x).unwrap();
        let (c0, c1) = characteristic_velocities(&s.band()).unwrap();
        assert!((c0 + c1).norm() < 1e-12, "x = {x}");
        let (h0, h1) = hat_velocities(&s.band()).unwrap();
        assert!((h0 - c0).norm() < 1e-8 * c0.norm().max(1.0) && (h1 - c1).norm() < 1e-8 * c1.norm().max(1.0));
    }
}

fn eigenvalues(a: &nalgebra::Matrix2<f64>) -> (C, C) {
    let half = 0.5 * a.trace();
    let disc = C::new(half * half - a.determinant(), 0.0).sqrt();
    (half + disc, half - disc)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn j_derivatives_match_finite_differences(e in prop_oneof![-0.9f64..0.9, 1.1f64..6.0]) {
        let case = if e > 1.0 { CaseTag::R } else { CaseTag::L };
        let (j, jp, jpp) = j_and_derivatives(e, case).unwrap();
        let h = 1e-5;
        let (jm, jpm, _) = j_and_derivatives(e - h, case).unwrap();
        let (jq, jpq, _) = j_and_derivatives(e + h, case).unwrap();
        prop_assert!((jp - (jq - jm) / (2.0 * h)).abs() < 1e-7 * jp.abs().max(1.0));
        prop_assert!((jpp - (jpq - jpm) / (2.0 * h)).abs() < 1e-6 * jpp.abs().max(1.0));
        prop_assert!(j > 0.0);
        let kind = classify(e, case).unwrap().kind;
        prop_assert_eq!(kind, if e > 1.0 { WhithamType::Hyperbolic } else { WhithamType::Elliptic });
    }

    #[test]
    fn riemann_velocities_are_system_eigenvalues(re in -6.5f64..-0.2, width in 0.05f64..0.9, arg in 0.2f64..2.9) {
        // a real band inside the kink interval or a conjugate pair off the axis
        for band in [
            Band { w0: C::new(re, 0.0), w1: C::new(re * (1.0 - width), 0.0) },
            Band { w0: C::from_polar(width + 0.3, arg), w1: C::from_polar(width + 0.3, -arg) },
        ] {
            let sp = band.sqrt_pi();
            let e = -band.p() / sp;
            let case = band.case();
            let valid = match case { CaseTag::R => e > 1.0, CaseTag::L => e.abs() < 1.0 };
            if !valid { continue; }
            let n_p = (1.0 - sp) / (1.0 + sp);
            let a = system_matrix(n_p, e, case).unwrap();
            let (l0, l1) = eigenvalues(&a);
            let (c0, c1) = characteristic_velocities(&band).unwrap();
            let scale = c0.norm().max(c1.norm()).max(1.0);
            let same = (l0 - c0).norm().max((l1 - c1).norm());
            let swapped = (l0 - c1).norm().max((l1 - c0).norm());
            prop_assert!(same.min(swapped) < 1e-8 * scale, "band {:?}: {:?} vs {:?}", band, (l0, l1), (c0, c1));
            match case {
                CaseTag::R => prop_assert!(c0.im.abs() < 1e-12 && c1.im.abs() < 1e-12),
                CaseTag::L => prop_assert!((c0 - c1.conj()).norm() < 1e-10 * scale),
            }
        }
    }
}
