use approx::assert_abs_diff_eq;
use hjlab_core::chartrace::{
    classical_char_from_subgradient, classical_time_bound, classify_trace, dichotomy_check, extract_subgradient_from_char, fan,
    generalized_char, singular_char_from_empty_subdiff, Classification, SampleStatus,
};
use hjlab_core::datum::DatumSpec;
use hjlab_core::problem::{Problem, Settings};
use hjlab_core::scenarios::{example1, example2, example2_with_alpha, example3, example4, semiconcave_abs};
use hjlab_core::subdiff::{test_proximal_subgradient, ShellSampler};
use hjlab_core::value::value_at;
use hjlab_core::Error;

fn cert(p: &Problem, y0: f64, p0: f64, k: f64, r: f64) -> hjlab_core::subdiff::ProximalCertificate {
    let c = test_proximal_subgradient(p.datum.as_ref(), &[y0], &[p0], k, r, &ShellSampler::default());
    assert!(c.verified(), "{c:?}");
    c
}

#[test]
fn example1_classical_line() {
    let p = example1().problem(Settings::default()).unwrap();
    let tr = classical_char_from_subgradient(&p, &cert(&p, 0.0, 0.5, 0.1, 1.0), 0.5).unwrap();
    assert_eq!(tr.classification, Classification::Classical);
    for s in &tr.samples {
        assert_abs_diff_eq!(s.x[0], 0.5 * s.t, epsilon = 1e-12);
    }
    let back = extract_subgradient_from_char(&p, &tr).unwrap();
    assert_abs_diff_eq!(back.p0[0], 0.5, epsilon = 1e-9);
}

#[test]
fn classical_tau_above_bound_is_rejected() {
    let p = example1().problem(Settings::default()).unwrap();
    let c = cert(&p, 0.0, 0.5, 0.1, 1.0);
    let bound = classical_time_bound(&p, &c);
    assert!(matches!(
        classical_char_from_subgradient(&p, &c, bound * 1.01),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn example4_classical_and_example3_stationary() {
    let p4 = example4().problem(Settings::default()).unwrap();
    let c = cert(&p4, 0.0, -0.5, 1.0, 0.5);
    let tr = classical_char_from_subgradient(&p4, &c, classical_time_bound(&p4, &c)).unwrap();
    assert_eq!(tr.classification, Classification::Classical);
    assert_abs_diff_eq!(tr.end().x[0], -0.5 * tr.end().t, epsilon = 1e-12);

    let p3 = example3().problem(Settings::default()).unwrap();
    let c = cert(&p3, 0.0, 0.0, 2.0, 2.5);
    let tau = classical_time_bound(&p3, &c);
    assert!(tau > 0.37);
    let tr = classical_char_from_subgradient(&p3, &c, tau).unwrap();
    assert_eq!(tr.classification, Classification::Classical);
    assert!(tr.samples.iter().all(|s| s.x[0] == 0.0));
    assert_eq!(extract_subgradient_from_char(&p3, &tr).unwrap().p0, vec![0.0]);
}

#[test]
fn example2_generalized_is_strongly_singular() {
    let p = example2().problem(Settings::default()).unwrap();
    let tr = generalized_char(&p, 0.0, &[0.0], p.horizon).unwrap();
    assert_eq!(tr.classification, Classification::StronglySingular);
    assert!(tr.max_excursion() <= 1e-3);
    assert_eq!(tr.samples[0].status, SampleStatus::Unknown);
    assert!(tr.samples[1..].iter().all(|s| s.status == SampleStatus::Singular));
    assert!(tr.ladder.as_ref().unwrap().cauchy);
}

#[test]
fn example1_generalized_is_classical() {
    let p = example1().problem(Settings::default()).unwrap();
    let tr = generalized_char(&p, 0.0, &[0.2], p.horizon).unwrap();
    assert_eq!(tr.classification, Classification::Classical, "{:?}", tr.ladder);
    assert!(tr.samples[1..].iter().all(|s| s.status == SampleStatus::Regular));
    let l = tr.ladder.as_ref().unwrap();
    assert!(l.cauchy, "{l:?}");
    // Straight line of slope one from near 0.2.
    for s in &tr.samples[1..] {
        assert_abs_diff_eq!(s.x[0], 0.2 + s.t, epsilon = 1e-3);
    }
}

#[test]
fn semiconcave_datum_gives_stationary_singular_trace() {
    let p = semiconcave_abs().problem(Settings::default()).unwrap();
    let tr = generalized_char(&p, 0.0, &[0.0], p.horizon).unwrap();
    assert_eq!(tr.classification, Classification::StronglySingular);
    assert!(tr.max_excursion() <= 1e-8);
}

#[test]
fn example3_stationary_trace_is_weakly_singular() {
    let p = example3().problem(Settings::default()).unwrap();
    let tr = generalized_char(&p, 0.0, &[0.0], p.horizon).unwrap();
    assert_eq!(tr.classification, Classification::WeaklySingular);
    assert!(tr.samples.iter().all(|s| s.x[0].abs() <= 1e-14));
}

#[test]
fn example1_stationary_trace_is_classical() {
    let p = example1().problem(Settings::default()).unwrap();
    let c = cert(&p, 0.0, 0.0, 1.0, 1.0);
    let tr = classical_char_from_subgradient(&p, &c, 0.5).unwrap();
    let out = classify_trace(&p, &tr, p.settings.trace.window).unwrap();
    assert_eq!(out.classification, Classification::Classical);
    assert_eq!(out.arc_match, Some(true));
}

/// Tie between the left branch (kink at 0, or the linear part once x < -t) and the power branch.
fn example4_shock(t: f64) -> f64 {
    let left = |x: f64| if x >= -t { x * x / (2.0 * t) } else { -x - t / 2.0 };
    let gap = |x: f64| {
        let s = (1.5 * t + (2.25 * t * t + 4.0 * x).max(0.0).sqrt()) / 2.0;
        -s.powi(3) + (x - s * s).powi(2) / (2.0 * t) - left(x)
    };
    // gap > 0 left of the shock.
    let (mut lo, mut hi) = (-0.5625 * t * t, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) > 0.0 { lo = mid } else { hi = mid }
    }
    0.5 * (lo + hi)
}

#[test]
fn example4_fan_and_shock() {
    let p = example4().problem(Settings::default()).unwrap();
    let ps: Vec<Vec<f64>> = [-1.0, -0.9, -0.5, -0.2, -0.1].iter().map(|v| vec![*v]).collect();
    let members = fan(&p, &[0.0], &ps).unwrap();
    for m in &members {
        // Tie between y = 0 and y = t^2 meets the line x = p0 t when t = -2 p0.
        let t = m.lifetime.expect("every fan member is absorbed before the horizon");
        assert_abs_diff_eq!(t, -2.0 * m.p0[0], epsilon = 1e-3);
    }
    let life = |i: usize| members[i].lifetime.unwrap();
    assert!(life(3) < life(2) && life(2) < life(1));

    let tr = generalized_char(&p, 0.0, &[0.0], p.horizon).unwrap();
    assert_eq!(tr.classification, Classification::StronglySingular);
    for s in &tr.samples[1..] {
        assert_abs_diff_eq!(s.x[0], example4_shock(s.t), epsilon = 1e-6);
    }
    assert!(tr.max_speed() <= p.speed.lambda0);
}

#[test]
fn empty_subdifferential_forces_singular_traces() {
    let p = example2().problem(Settings::default()).unwrap();
    let (tr, est) = singular_char_from_empty_subdiff(&p, &[0.0], p.horizon).unwrap();
    assert!(est.is_empty());
    assert!(tr.max_excursion() <= 1e-8);

    let p = semiconcave_abs().problem(Settings::default()).unwrap();
    assert!(singular_char_from_empty_subdiff(&p, &[0.0], p.horizon).is_ok());

    // Minimizers +-(1.9 t)^10 only separate beyond the cluster radius for t >~ 0.23.
    let sc = example2_with_alpha(1.9);
    let mut s = Settings::default();
    s.trace.steps = 2;
    let p = sc.problem(s).unwrap();
    let (tr, _) = singular_char_from_empty_subdiff(&p, &[0.0], p.horizon).unwrap();
    assert!(tr.max_excursion() <= 1e-8);

    let p = example1().problem(Settings::default()).unwrap();
    assert!(matches!(
        singular_char_from_empty_subdiff(&p, &[0.0], p.horizon),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn dichotomy_on_scenarios() {
    for sc in [example1(), example2(), example3(), example4(), semiconcave_abs()] {
        let p = sc.problem(Settings::default()).unwrap();
        for y0 in [-0.5, 0.0, 0.5] {
            let r = dichotomy_check(&p, &[y0]).unwrap();
            assert!(r.consistent, "{}: {r:?}", sc.name);
            let expect_empty = y0 == 0.0 && matches!(sc.datum, DatumSpec::NegPower { .. } | DatumSpec::NegAbs);
            assert_eq!(r.empty, expect_empty, "{} at {y0}", sc.name);
        }
    }
}

#[test]
fn classical_trace_satisfies_variational_identity() {
    let p = example4().problem(Settings::default()).unwrap();
    let c = cert(&p, 0.0, -0.7, 1.0, 0.5);
    let tr = classical_char_from_subgradient(&p, &c, classical_time_bound(&p, &c)).unwrap();
    let end = tr.end();
    let u = value_at(&p, end.t, &end.x).unwrap().u;
    let direct = p.datum.eval(&tr.samples[0].x) + p.action(end.t, &tr.samples[0].x, &end.x).unwrap();
    assert_abs_diff_eq!(u, direct, epsilon = 1e-6);
}

#[test]
fn trace_json_round_trip() {
    let p = example2().problem(Settings::default()).unwrap();
    let tr = generalized_char(&p, 0.0, &[0.0], p.horizon).unwrap();
    let back = hjlab_core::chartrace::CharacteristicTrace::from_json(&tr.to_json()).unwrap();
    assert_eq!(back, tr);
    let csv = tr.to_csv();
    assert!(csv.starts_with("t,x_1,p_1,status\n"));
    assert!(csv.lines().nth(1).unwrap().ends_with(",unknown"));
}
