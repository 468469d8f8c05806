//! Randomized checks of the Hamiltonian, flow and action layers.

use std::sync::Arc;

use hjlab_core::action::{action_between, action_value, check_action_convexity};
use hjlab_core::flow::{integrate_flow, shoot_bvp, ShootingConfig};
use hjlab_core::hamiltonian::{Coefficient, HamiltonianModel, Potential, ValidityBox};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn line(half: f64, t_max: f64) -> ValidityBox {
    ValidityBox::symmetric(1, half, t_max)
}

fn spd(a: f64, b: f64, c: f64) -> DMatrix<f64> {
    // L L^T with a positive diagonal
    let l = DMatrix::from_row_slice(2, 2, &[a, 0.0, b, c]);
    &l * l.transpose()
}

fn quartic() -> HamiltonianModel {
    HamiltonianModel::generic(line(10.0, 1.0), Arc::new(|_, _, p: &[f64]| 0.25 * p[0].powi(4) + 0.5 * p[0] * p[0]), true)
}

/// Closed-form models exercised by the duality checks.
fn closed_form_models() -> Vec<HamiltonianModel> {
    let plane = ValidityBox::symmetric(2, 10.0, 1.0);
    vec![
        HamiltonianModel::eikonal(line(10.0, 1.0)),
        HamiltonianModel::eikonal(plane.clone()),
        HamiltonianModel::quadratic(plane.clone(), Coefficient::Constant(spd(1.2, 0.4, 0.8)), Potential::Harmonic { omega: 2.0 })
            .unwrap(),
        HamiltonianModel::quadratic(plane, Coefficient::Modulated { base: 1.0, amplitude: 0.4 }, Potential::Linear(vec![0.5, -1.0]))
            .unwrap(),
    ]
}

/// Maximum of a concave function on `[lo, hi]` by golden-section search.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > 1e-11 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        }
    }
    f(0.5 * (lo + hi))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn legendre_duality_closed_form(which in 0usize..4, t in 0.0..1.0f64, x in prop::array::uniform2(-5.0..5.0f64),
                                    q in prop::array::uniform2(-8.0..8.0f64)) {
        let m = &closed_form_models()[which];
        let (x, q) = (&x[..m.dim()], &q[..m.dim()]);
        let l = m.legendre(t, x, q).unwrap();
        let p = &l.maximizer;
        let pq: f64 = p.iter().zip(q).map(|(a, b)| a * b).sum();
        let residual = l.lagrangian_value + m.eval_h(t, x, p).unwrap() - pq;
        prop_assert!(residual.abs() <= 1e-9 * (1.0 + pq.abs()), "residual {residual:e}");
    }

    #[test]
    fn dp_h_is_monotone(which in 0usize..4, t in 0.0..1.0f64, x in prop::array::uniform2(-5.0..5.0f64),
                        p1 in prop::array::uniform2(-5.0..5.0f64), p2 in prop::array::uniform2(-5.0..5.0f64)) {
        let m = &closed_form_models()[which];
        let d = m.dim();
        prop_assume!(p1[..d] != p2[..d]);
        let (v1, _) = m.phase_velocity(t, &x[..d], &p1[..d]).unwrap();
        let (v2, _) = m.phase_velocity(t, &x[..d], &p2[..d]).unwrap();
        let s: f64 = (0..d).map(|i| (v1[i] - v2[i]) * (p1[i] - p2[i])).sum();
        prop_assert!(s > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn legendre_duality_generic(t in 0.0..1.0f64, x in -5.0..5.0f64, q in -6.0..6.0f64) {
        let m = quartic();
        let l = m.legendre(t, &[x], &[q]).unwrap();
        let p = l.maximizer[0];
        let residual = l.lagrangian_value + m.eval_h(t, &[x], &[p]).unwrap() - p * q;
        prop_assert!(residual.abs() <= 1e-6, "residual {residual:e}");
    }

    #[test]
    fn conjugate_round_trip(which in 0usize..3, x in -5.0..5.0f64, p in -2.0..2.0f64) {
        let m = match which {
            0 => HamiltonianModel::eikonal(line(10.0, 1.0)),
            1 => HamiltonianModel::quadratic(line(10.0, 1.0), Coefficient::Modulated { base: 1.5, amplitude: 0.5 },
                                             Potential::Harmonic { omega: 1.0 }).unwrap(),
            _ => quartic(),
        };
        let h = m.eval_h(0.3, &[x], &[p]).unwrap();
        let back = golden_max(|q| p * q - m.legendre(0.3, &[x], &[q]).unwrap().lagrangian_value, -20.0, 20.0);
        prop_assert!((back - h).abs() <= 1e-6, "H = {h}, bi-conjugate = {back}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn harmonic_energy_drift_is_fourth_order(omega in 10.0..25.0f64, amp in 0.05..0.2f64, phase in 0.0..std::f64::consts::TAU) {
        let m = HamiltonianModel::quadratic(line(5.0, 1.0), Coefficient::Constant(DMatrix::identity(1, 1)),
                                            Potential::Harmonic { omega }).unwrap();
        let (x0, p0) = (amp * phase.cos(), amp * omega * phase.sin());
        let coarse = integrate_flow(&m, 0.0, &[x0], &[p0], 1.0, 1000).unwrap().energy_drift(&m).unwrap();
        let fine = integrate_flow(&m, 0.0, &[x0], &[p0], 1.0, 2000).unwrap().energy_drift(&m).unwrap();
        prop_assert!(coarse <= 1e-6, "drift {coarse:e}");
        prop_assert!(coarse >= 8.0 * fine, "drift {coarse:e} -> {fine:e}");
    }

    #[test]
    fn shooting_rehits_target(y in -1.0..1.0f64, t in 0.1..1.0f64, frac in -1.0..1.0f64) {
        let m = HamiltonianModel::quadratic(line(10.0, 1.0), Coefficient::Modulated { base: 1.0, amplitude: 0.3 },
                                            Potential::Linear(vec![0.7])).unwrap();
        let x = y + frac * t;
        let cfg = ShootingConfig::default();
        let shot = shoot_bvp(&m, 0.0, t, &[y], &[x], None, &cfg, None).unwrap();
        let arc = integrate_flow(&m, 0.0, &[y], &shot.p0, t, cfg.steps).unwrap();
        prop_assert!((arc.end_position()[0] - x).abs() <= 1e-8);
    }

    #[test]
    fn flow_map_is_injective_for_smooth_data(t in 0.01..0.2f64, y1 in -1.0..1.0f64, y2 in -1.0..1.0f64) {
        prop_assume!((y1 - y2).abs() > 1e-6);
        // u0 = sin(2y), gradient 2 cos(2y); caustics only after t = 1/4.
        let m = HamiltonianModel::eikonal(line(10.0, 1.0));
        let end = |y: f64| integrate_flow(&m, 0.0, &[y], &[2.0 * (2.0 * y).cos()], t, 16).unwrap().end_position()[0];
        prop_assert!(end(y1) != end(y2));
        prop_assert!((end(y1) - end(y2)) * (y1 - y2) > 0.0);
    }

    #[test]
    fn eikonal_action_matches_hopf_kernel(t in 0.1..1.0f64, y in -2.0..2.0f64, frac in -2.0..2.0f64) {
        let m = HamiltonianModel::eikonal(line(10.0, 1.0));
        let x = y + frac * t;
        let a = action_value(&m, &ShootingConfig::default(), t, &[y], &[x]).unwrap().value;
        prop_assert!((a - (x - y).powi(2) / (2.0 * t)).abs() <= 1e-8);
    }

    #[test]
    fn action_gradient_matches_differences(y in -1.0..1.0f64, t in 0.2..1.0f64, frac in -1.0..1.0f64) {
        let m = HamiltonianModel::quadratic(line(10.0, 1.0), Coefficient::Modulated { base: 1.0, amplitude: 0.3 },
                                            Potential::Harmonic { omega: 1.5 }).unwrap();
        let cfg = ShootingConfig::default();
        let x = y + frac * t;
        let g = action_value(&m, &cfg, t, &[y], &[x]).unwrap().grad_y[0];
        let h = 1e-4;
        let a = |y: f64| action_value(&m, &cfg, t, &[y], &[x]).unwrap().value;
        let fd = (a(y + h) - a(y - h)) / (2.0 * h);
        prop_assert!((g - fd).abs() <= 1e-5, "gradient {g}, difference {fd}");
    }

    #[test]
    fn even_lagrangian_gives_symmetric_action(t in 0.2..1.0f64, y in prop::array::uniform2(-1.0..1.0f64),
                                               x in prop::array::uniform2(-1.0..1.0f64)) {
        let m = HamiltonianModel::quadratic(ValidityBox::symmetric(2, 10.0, 1.0), Coefficient::Constant(spd(1.1, 0.3, 0.7)),
                                            Potential::Zero).unwrap();
        let cfg = ShootingConfig::default();
        let a = action_value(&m, &cfg, t, &y, &x).unwrap().value;
        let b = action_value(&m, &cfg, t, &x, &y).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-8);
    }

    #[test]
    fn eikonal_action_is_uniformly_convex(t in 0.05..1.0f64, x in -3.0..3.0f64) {
        let m = HamiltonianModel::eikonal(line(10.0, 1.0));
        let r = check_action_convexity(&m, &ShootingConfig::default(), t, &[x], t, 0.4, 9).unwrap();
        prop_assert!(r.ok && r.worst_violation >= -1e-9, "{r:?}");
    }

    #[test]
    fn time_shifted_action_depends_on_duration_only(s in 0.0..0.5f64, d in 0.1..0.5f64, y in -1.0..1.0f64, x in -1.0..1.0f64) {
        let m = HamiltonianModel::quadratic(line(10.0, 1.0), Coefficient::Constant(DMatrix::identity(1, 1) * 2.0),
                                            Potential::Harmonic { omega: 1.0 }).unwrap();
        let cfg = ShootingConfig::default();
        let a = action_between(&m, &cfg, s, s + d, &[y], &[x], None).unwrap().value;
        let b = action_value(&m, &cfg, d, &[y], &[x]).unwrap().value;
        prop_assert!((a - b).abs() <= 1e-10);
    }
}
