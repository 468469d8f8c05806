//! The action functional between two points and checks of its small-time regularity.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{shoot_bvp, PhaseArc, ShootingConfig, SpeedBound};
use crate::hamiltonian::{HamiltonianKind, HamiltonianModel};
use crate::vecops::{axpy, dist, dot, norm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionResult {
    pub value: f64,
    pub arc: PhaseArc,
    pub grad_y: Vec<f64>,
}

/// Small-time regime in which the action is smooth and uniformly convex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionRegime {
    pub lambda0: f64,
    pub t0: f64,
    pub c0: f64,
}

/// Action from `(0, y)` to `(t, x)`.
pub fn action_value(model: &HamiltonianModel, cfg: &ShootingConfig, t: f64, y: &[f64], x: &[f64]) -> Result<ActionResult> {
    action_between(model, cfg, 0.0, t, y, x, None)
}

/// Action from `(t_from, y)` to `(t_to, x)`: shooting plus composite Simpson quadrature of `L = p.xi' - H`.
pub fn action_between(
    model: &HamiltonianModel,
    cfg: &ShootingConfig,
    t_from: f64,
    t_to: f64,
    y: &[f64],
    x: &[f64],
    guess: Option<&[f64]>,
) -> Result<ActionResult> {
    if cfg.steps < 7 || cfg.steps % 2 == 1 {
        return Err(Error::Config(format!(
            "action quadrature needs an even number of steps and at least 8 nodes, got {} steps",
            cfg.steps
        )));
    }
    let shot = shoot_bvp(model, t_from, t_to, y, x, guess, cfg, None)?;
    let arc = shot.arc;
    let mut integrand = Vec::with_capacity(arc.len());
    let mut v0 = Vec::new();
    for i in 0..arc.len() {
        let (t, xi, p) = (arc.times[i], &arc.positions[i], &arc.momenta[i]);
        let (v, _) = model.phase_velocity(t, xi, p)?;
        integrand.push(dot(p, &v) - model.eval_h(t, xi, p)?);
        if i == 0 {
            v0 = v;
        }
    }
    let value = simpson(&integrand, arc.step);
    let grad_y = model
        .dual_momentum(arc.times[0], &arc.positions[0], &v0)?
        .into_iter()
        .map(|v| -v)
        .collect();
    Ok(ActionResult { value, arc, grad_y })
}

fn simpson(f: &[f64], h: f64) -> f64 {
    let n = f.len() - 1;
    let mut s = f[0] + f[n];
    for (i, v) in f.iter().enumerate().take(n).skip(1) {
        s += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    s * h / 3.0
}

fn line_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        dirs.push(e);
    }
    for i in 0..dim {
        for j in 0..i {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; dim];
                e[i] = std::f64::consts::FRAC_1_SQRT_2;
                e[j] = s * std::f64::consts::FRAC_1_SQRT_2;
                dirs.push(e);
            }
        }
    }
    dirs
}

fn line_nodes(x: &[f64], dir: &[f64], radius: f64, samples: usize) -> Vec<Vec<f64>> {
    (0..samples)
        .map(|j| {
            let s = -radius + 2.0 * radius * j as f64 / (samples - 1) as f64;
            axpy(x, s, dir)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub ok: bool,
    pub worst_violation: f64,
}

/// Midpoint convexity of `y -> A_t(y, x) - (c0/t)|y|^2` on collinear triples in the ball.
pub fn check_action_convexity(
    model: &HamiltonianModel,
    cfg: &ShootingConfig,
    t: f64,
    x: &[f64],
    radius: f64,
    c0: f64,
    samples: usize,
) -> Result<ConvexityReport> {
    if samples < 3 {
        return Err(Error::Precondition("convexity check needs at least 3 samples".into()));
    }
    let mut worst = f64::INFINITY;
    if radius > 0.0 {
        for dir in line_directions(x.len()) {
            let nodes = line_nodes(x, &dir, radius, samples);
            let mut phi = Vec::with_capacity(samples);
            for y in &nodes {
                phi.push(action_value(model, cfg, t, y, x)?.value - c0 / t * dot(y, y));
            }
            for i in 0..samples {
                for j in (i + 2..samples).step_by(2) {
                    let k = (i + j) / 2;
                    worst = worst.min(0.5 * (phi[i] + phi[j]) - phi[k]);
                }
            }
        }
    }
    Ok(ConvexityReport {
        ok: !(worst < -1e-9),
        worst_violation: if worst.is_finite() { worst.min(0.0) } else { 0.0 },
    })
}

/// Estimate of the Lipschitz constant of `y -> D_y A_t(y, x)` on sampled pairs in the ball.
pub fn check_action_c11(
    model: &HamiltonianModel,
    cfg: &ShootingConfig,
    t: f64,
    x: &[f64],
    radius: f64,
    samples: usize,
) -> Result<f64> {
    if radius <= 0.0 || samples < 2 {
        return Ok(0.0);
    }
    let mut best: f64 = 0.0;
    for dir in line_directions(x.len()) {
        let nodes = line_nodes(x, &dir, radius, samples);
        let grads = nodes
            .iter()
            .map(|y| action_value(model, cfg, t, y, x).map(|a| a.grad_y))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..samples {
            for j in i + 1..samples {
                best = best.max(dist(&grads[i], &grads[j]) / dist(&nodes[i], &nodes[j]));
            }
        }
    }
    Ok(best)
}

impl ActionRegime {
    /// `c0 = 0.4 / c2` and `t0 = min(horizon, R / (2 lambda0))`.
    pub fn derive(model: &HamiltonianModel, speed: &SpeedBound, horizon: f64) -> Result<Self> {
        let c2 = match model.convexity_bounds() {
            Some((_, c2)) => c2,
            None => sampled_hessian_max(model, speed)?,
        };
        let t0 = horizon.min(model.domain().radius() / (2.0 * speed.lambda0));
        let regime = Self {
            lambda0: speed.lambda0,
            t0,
            c0: 0.4 / c2,
        };
        if !(regime.t0 > 0.0 && regime.c0 > 0.0) {
            return Err(Error::Config(format!("degenerate action regime {regime:?}")));
        }
        Ok(regime)
    }

    /// Convexity check at `t0` around the box centre.
    pub fn validate(&self, model: &HamiltonianModel, cfg: &ShootingConfig) -> Result<ConvexityReport> {
        let center = model.domain().center();
        let radius = 0.5 * (self.lambda0 * self.t0).min(model.domain().radius());
        let report = check_action_convexity(model, cfg, self.t0, &center, radius, self.c0, 9)?;
        if report.ok {
            Ok(report)
        } else {
            Err(Error::Config(format!(
                "action convexity fails at t0 = {} (gap {:.3e}); shorten the horizon",
                self.t0, report.worst_violation
            )))
        }
    }
}

fn sampled_hessian_max(model: &HamiltonianModel, speed: &SpeedBound) -> Result<f64> {
    let dom = model.domain();
    let mut best: f64 = 0.0;
    let dim = model.dim();
    for ti in 0..3 {
        let t = dom.t_max * ti as f64 / 2.0;
        for xi in 0..3 {
            let x: Vec<f64> = (0..dim)
                .map(|k| dom.lo[k] + (dom.hi[k] - dom.lo[k]) * xi as f64 / 2.0)
                .collect();
            for pi in 0..5 {
                let s = -speed.lipschitz_u + 2.0 * speed.lipschitz_u * pi as f64 / 4.0;
                let p = vec![s / (dim as f64).sqrt(); dim];
                let g = model.grads_h(t, &x, &p)?;
                best = best.max(g.dpp.symmetric_eigen().eigenvalues.max());
            }
        }
    }
    if model.kind() == HamiltonianKind::GenericConvex && !(best > 0.0) {
        return Err(Error::Config("sampled Hessian is not positive".into()));
    }
    Ok(best)
}

/// `|grad_y|` norm helper for reports.
pub fn gradient_norm(r: &ActionResult) -> f64 {
    norm(&r.grad_y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::ValidityBox;
    use approx::assert_abs_diff_eq;

    fn eik() -> HamiltonianModel {
        HamiltonianModel::eikonal(ValidityBox::symmetric(1, 6.0, 2.0))
    }

    #[test]
    fn action_examples() {
        let cfg = ShootingConfig::default();
        let a = action_value(&eik(), &cfg, 1.0, &[0.0], &[1.0]).unwrap();
        assert_abs_diff_eq!(a.value, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(a.grad_y[0], -1.0, epsilon = 1e-12);
        for t in [0.1, 0.5, 1.0] {
            assert_abs_diff_eq!(action_value(&eik(), &cfg, t, &[0.3], &[0.3]).unwrap().value, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn too_few_quadrature_nodes() {
        let cfg = ShootingConfig { steps: 6, ..Default::default() };
        assert!(matches!(action_value(&eik(), &cfg, 1.0, &[0.0], &[1.0]), Err(Error::Config(_))));
    }

    #[test]
    fn convexity_examples() {
        let cfg = ShootingConfig::default();
        for t in [0.2, 1.0] {
            assert!(check_action_convexity(&eik(), &cfg, t, &[0.0], 1.5 * t, 0.4, 9).unwrap().ok);
            let bad = check_action_convexity(&eik(), &cfg, t, &[0.0], 1.5 * t, 0.6, 9).unwrap();
            assert!(!bad.ok && bad.worst_violation < 0.0);
        }
        assert!(check_action_convexity(&eik(), &cfg, 1.0, &[0.0], 0.0, 0.6, 9).unwrap().ok);
    }

    #[test]
    fn c11_examples() {
        let cfg = ShootingConfig::default();
        assert_abs_diff_eq!(check_action_c11(&eik(), &cfg, 1.0, &[0.0], 1.0, 7).unwrap(), 1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(check_action_c11(&eik(), &cfg, 0.5, &[0.0], 0.5, 7).unwrap(), 2.0, epsilon = 1e-9);
        assert_eq!(check_action_c11(&eik(), &cfg, 0.5, &[0.0], 0.0, 7).unwrap(), 0.0);
    }

    #[test]
    fn regime_defaults_for_eikonal() {
        let speed = SpeedBound { lambda0: 2.0, lipschitz_u: 1.0 };
        let r = ActionRegime::derive(&eik(), &speed, 1.0).unwrap();
        assert_eq!((r.t0, r.c0), (1.0, 0.4));
        assert!(r.validate(&eik(), &ShootingConfig::default()).unwrap().ok);
        let r = ActionRegime::derive(&eik(), &speed, 5.0).unwrap();
        assert_abs_diff_eq!(r.t0, 1.5, epsilon = 1e-15);
    }
}
