//! Randomized and sweep checks of the value function, subgradient tests and traces.

use std::sync::Arc;

use hjlab_core::action::action_between;
use hjlab_core::chartrace::{
    classical_char_from_subgradient, classical_time_bound, extract_subgradient_from_char, generalized_char, SampleStatus,
};
use hjlab_core::datum::{DatumSpec, FnDatum, InitialDatum};
use hjlab_core::problem::{Problem, Settings};
use hjlab_core::scenarios::{catalog, example1, example2, example4, semiconcave_abs, Scenario};
use hjlab_core::subdiff::{least_certificate, test_proximal_subgradient, ShellSampler};
use hjlab_core::value::{hopf_1d, solve_grid, value_at, GridSpec};
use proptest::prelude::*;

fn problem(sc: &Scenario) -> Problem {
    sc.problem(Settings::default()).unwrap()
}

fn data() -> Vec<DatumSpec> {
    catalog().into_iter().map(|s| s.datum).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn value_matches_dense_minimization(which in 0usize..5, tf in 0.0..1.0f64, xf in 0.0..1.0f64) {
        let sc = &catalog()[which];
        let p = problem(sc);
        let t = p.settings.search.t_min + tf * (sc.horizon - p.settings.search.t_min);
        let x = sc.smoke_x.0 + xf * (sc.smoke_x.1 - sc.smoke_x.0);
        let r = p.search_radius(t);
        let dense = hopf_1d(&sc.datum, t, x, (x - r, x + r), 200_001);
        let v = value_at(&p, t, &[x]).unwrap().u;
        prop_assert!((v - dense).abs() <= 1e-6, "{} at ({t}, {x}): {v} vs {dense}", sc.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn adding_a_constant_shifts_the_value(which in 0usize..5, c in -10.0..10.0f64, tf in 0.05..1.0f64, x in -1.0..1.0f64) {
        let sc = &catalog()[which];
        let mut shifted = sc.clone();
        shifted.datum = DatumSpec::Shifted { base: Box::new(sc.datum.clone()), offset: c };
        let t = tf * sc.horizon;
        let a = value_at(&problem(sc), t, &[x]).unwrap().u;
        let b = value_at(&problem(&shifted), t, &[x]).unwrap().u;
        prop_assert!((b - a - c).abs() <= 1e-12, "{}: {a} + {c} vs {b}", sc.name);
    }

    #[test]
    fn subgradient_verdicts_are_monotone_in_k(which in 0usize..5, y0 in -1.0..1.0f64, p0 in -2.0..2.0f64,
                                              k in 0.0..1e4f64, factor in 1.0..100.0f64) {
        let d = &data()[which];
        let s = ShellSampler::default();
        let lo = test_proximal_subgradient(d, &[y0], &[p0], k, 0.5, &s);
        let hi = test_proximal_subgradient(d, &[y0], &[p0], k * factor, 0.5, &s);
        prop_assert!(!lo.verified() || hi.verified());
    }

    #[test]
    fn refutations_persist_on_larger_balls(which in 0usize..5, y0 in -1.0..1.0f64, p0 in -2.0..2.0f64,
                                          k in 0.0..1e3f64, r in 0.01..1.0f64, factor in 1.0..4.0f64) {
        let d = &data()[which];
        let s = ShellSampler::default();
        let small = test_proximal_subgradient(d, &[y0], &[p0], k, r, &s);
        let large = test_proximal_subgradient(d, &[y0], &[p0], k, r * factor, &s);
        prop_assert!(small.verified() || !large.verified());
    }

    #[test]
    fn smooth_datum_gradient_is_a_proximal_subgradient(y0 in -2.0..2.0f64) {
        let d = FnDatum::new("sin(2y)", 2.0, |y: &[f64]| (2.0 * y[0]).sin());
        // sup |u0''| = 4
        let c = test_proximal_subgradient(&d, &[y0], &[2.0 * (2.0 * y0).cos()], 4.0 + 1e-6, 0.5, &ShellSampler::default());
        prop_assert!(c.verified(), "{c:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn dynamic_programming_principle(which in 0usize..5, sf in 0.1..0.6f64, x in -1.0..1.0f64) {
        let sc = &catalog()[which];
        let p = problem(sc);
        let t = sc.horizon;
        let s = sf * t;
        let r = p.search_radius(t - s);
        let n = 4001;
        let cfg = &p.settings.shooting;
        let best = (0..n)
            .map(|i| {
                let y = x - r + 2.0 * r * i as f64 / (n - 1) as f64;
                value_at(&p, s, &[y]).unwrap().u + action_between(&p.model, cfg, s, t, &[y], &[x], None).unwrap().value
            })
            .fold(f64::INFINITY, f64::min);
        let u = value_at(&p, t, &[x]).unwrap().u;
        prop_assert!(best - u >= -1e-9 && best - u <= 1e-4, "{}: u = {u}, grid minimum {best}", sc.name);
    }
}

#[test]
fn values_are_semiconcave_in_space() {
    for sc in catalog() {
        let p = problem(&sc);
        let grid = GridSpec { lo: vec![sc.smoke_x.0], hi: vec![sc.smoke_x.1], nodes: 201 };
        let h = 2.0 * (sc.smoke_x.1 - sc.smoke_x.0) / 200.0;
        for f in solve_grid(&p, &[sc.smoke_t0, 0.5 * sc.horizon, sc.horizon], &grid).unwrap() {
            // Each kernel (x - y)^2 / 2t has second difference h^2 / t.
            let c = 1.0 / f.t;
            for i in 2..f.u.len() - 2 {
                let d2 = f.u[i + 2] - 2.0 * f.u[i] + f.u[i - 2];
                assert!(d2 <= c * h * h + 1e-9, "{} at t = {}, x = {:?}: {d2}", sc.name, f.t, f.points[i]);
            }
        }
    }
}

#[test]
fn subgradients_round_trip_through_classical_traces() {
    let cases: [(Scenario, Vec<f64>); 2] = [
        (example1(), (0..21).map(|i| -1.0 + 0.1 * i as f64).collect()),
        (example4(), (0..9).map(|i| -1.0 + 0.1 * i as f64).collect()),
    ];
    for (sc, ps) in cases {
        let p = problem(&sc);
        for p0 in ps {
            let cert = least_certificate(&p, &[0.0], &[p0]).unwrap_or_else(|| panic!("{} rejects {p0}", sc.name));
            let tr = classical_char_from_subgradient(&p, &cert, classical_time_bound(&p, &cert)).unwrap();
            let back = extract_subgradient_from_char(&p, &tr).unwrap();
            assert!((back.p0[0] - p0).abs() <= 1e-6, "{}: {p0} -> {:?}", sc.name, back.p0);
            assert!(tr.max_speed() <= p.speed.lambda0);
        }
    }
}

#[test]
fn generalized_traces_respect_speed_bound_and_stay_singular() {
    for (sc, x0) in [(example2(), 0.0), (example2(), 0.4), (example4(), 0.0), (example4(), -0.3), (semiconcave_abs(), 0.0), (example1(), 0.1)] {
        let p = problem(&sc);
        let tr = generalized_char(&p, 0.0, &[x0], p.horizon).unwrap();
        assert!(tr.max_speed() <= p.speed.lambda0 * (1.0 + 1e-12), "{} from {x0}", sc.name);
        let first = tr.samples.iter().position(|s| s.status == SampleStatus::Singular);
        if let Some(i) = first {
            assert!(
                tr.samples[i..].iter().all(|s| s.status == SampleStatus::Singular),
                "{} from {x0}: singularity not persistent",
                sc.name
            );
        }
    }
}

#[test]
fn closure_datum_matches_catalog_datum() {
    let sc = example4();
    let spec = sc.datum.clone();
    let lip = spec.lipschitz(sc.domain());
    let f: Arc<dyn InitialDatum> = Arc::new(FnDatum::new("kink", lip, move |y: &[f64]| spec.eval(y)));
    let p = Problem::new(sc.model.clone(), f, sc.horizon, Settings::default()).unwrap();
    for (t, x) in [(0.3, 0.1), (1.2, -0.7)] {
        assert_eq!(value_at(&p, t, &[x]).unwrap().u, value_at(&problem(&sc), t, &[x]).unwrap().u);
    }
}
