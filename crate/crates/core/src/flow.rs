//! Forward integration of the characteristic system and two-point shooting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::io::fmt_num;
use crate::vecops::{axpy, dist, norm, sub};

/// Sampled solution `(xi, p)` of `xi' = D_p H`, `p' = -D_x H`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseArc {
    pub times: Vec<f64>,
    pub positions: Vec<Vec<f64>>,
    pub momenta: Vec<Vec<f64>>,
    pub step: f64,
}

impl PhaseArc {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_position(&self) -> &[f64] {
        self.positions.last().expect("arc has at least one sample")
    }

    pub fn end_momentum(&self) -> &[f64] {
        self.momenta.last().expect("arc has at least one sample")
    }

    /// Largest `|D_p H|` along the samples.
    pub fn max_speed(&self, model: &HamiltonianModel) -> Result<f64> {
        let mut best: f64 = 0.0;
        for i in 0..self.len() {
            let (v, _) = model.phase_velocity(self.times[i], &self.positions[i], &self.momenta[i])?;
            best = best.max(norm(&v));
        }
        Ok(best)
    }

    /// `max_i |H(t_i, z_i) - H(t_0, z_0)|`.
    pub fn energy_drift(&self, model: &HamiltonianModel) -> Result<f64> {
        let h0 = model.eval_h(self.times[0], &self.positions[0], &self.momenta[0])?;
        let mut drift: f64 = 0.0;
        for i in 1..self.len() {
            let h = model.eval_h(self.times[i], &self.positions[i], &self.momenta[i])?;
            drift = drift.max((h - h0).abs());
        }
        Ok(drift)
    }

    /// Largest residual of the difference quotient against the vector field at interval midpoints.
    pub fn midpoint_residual(&self, model: &HamiltonianModel) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.len().saturating_sub(1) {
            let dt = self.times[i + 1] - self.times[i];
            let tm = 0.5 * (self.times[i] + self.times[i + 1]);
            let xm: Vec<f64> = self.positions[i].iter().zip(&self.positions[i + 1]).map(|(a, b)| 0.5 * (a + b)).collect();
            let pm: Vec<f64> = self.momenta[i].iter().zip(&self.momenta[i + 1]).map(|(a, b)| 0.5 * (a + b)).collect();
            let (v, f) = model.phase_velocity(tm, &xm, &pm)?;
            let dx = sub(&self.positions[i + 1], &self.positions[i]);
            let dp = sub(&self.momenta[i + 1], &self.momenta[i]);
            for k in 0..v.len() {
                worst = worst.max((dx[k] / dt - v[k]).abs());
                worst = worst.max((dp[k] / dt + f[k]).abs());
            }
        }
        Ok(worst)
    }

    /// CSV with columns `t, x_1..x_n, p_1..p_n`.
    pub fn to_csv(&self) -> String {
        let n = self.positions.first().map_or(0, Vec::len);
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",x_{i}"));
        }
        for i in 1..=n {
            out.push_str(&format!(",p_{i}"));
        }
        out.push('\n');
        for k in 0..self.len() {
            out.push_str(&fmt_num(self.times[k]));
            for v in self.positions[k].iter().chain(&self.momenta[k]) {
                out.push(',');
                out.push_str(&fmt_num(*v));
            }
            out.push('\n');
        }
        out
    }
}

fn field(model: &HamiltonianModel, t: f64, x: &[f64], p: &[f64], exit_time: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    match model.phase_velocity(t, x, p) {
        Ok((v, f)) => Ok((v, f.into_iter().map(|g| -g).collect())),
        Err(Error::Domain(_)) => Err(Error::BoundaryExit { time: exit_time }),
        Err(e) => Err(e),
    }
}

/// Classical fourth-order Runge-Kutta on `[t0, t1]` with `steps` equal steps.
pub fn integrate_flow(
    model: &HamiltonianModel,
    t0: f64,
    y0: &[f64],
    p0: &[f64],
    t1: f64,
    steps: usize,
) -> Result<PhaseArc> {
    if !(t1 > t0) {
        return Err(Error::Precondition(format!("integration interval [{t0}, {t1}] is empty")));
    }
    if steps == 0 {
        return Err(Error::Config("at least one integration step is required".into()));
    }
    if y0.len() != model.dim() || p0.len() != model.dim() {
        return Err(Error::Domain("initial point has the wrong dimension".into()));
    }
    model.domain().check(t0, y0)?;
    let dt = (t1 - t0) / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut positions = Vec::with_capacity(steps + 1);
    let mut momenta = Vec::with_capacity(steps + 1);
    let (mut x, mut p) = (y0.to_vec(), p0.to_vec());
    times.push(t0);
    positions.push(x.clone());
    momenta.push(p.clone());
    for k in 0..steps {
        let t = t0 + k as f64 * dt;
        let (k1x, k1p) = field(model, t, &x, &p, t)?;
        let (k2x, k2p) = field(model, t + 0.5 * dt, &axpy(&x, 0.5 * dt, &k1x), &axpy(&p, 0.5 * dt, &k1p), t)?;
        let (k3x, k3p) = field(model, t + 0.5 * dt, &axpy(&x, 0.5 * dt, &k2x), &axpy(&p, 0.5 * dt, &k2p), t)?;
        let tn = if k + 1 == steps { t1 } else { t0 + (k + 1) as f64 * dt };
        let (k4x, k4p) = field(model, tn, &axpy(&x, dt, &k3x), &axpy(&p, dt, &k3p), t)?;
        for i in 0..x.len() {
            x[i] += dt / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            p[i] += dt / 6.0 * (k1p[i] + 2.0 * k2p[i] + 2.0 * k3p[i] + k4p[i]);
        }
        if !model.domain().contains_point(&x) {
            return Err(Error::BoundaryExit { time: tn });
        }
        if !x.iter().chain(&p).all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!("flow blew up at t = {tn}")));
        }
        times.push(tn);
        positions.push(x.clone());
        momenta.push(p.clone());
    }
    Ok(PhaseArc {
        times,
        positions,
        momenta,
        step: dt,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShootingConfig {
    pub steps: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        Self {
            steps: 128,
            tolerance: 1e-9,
            max_iterations: 60,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Shot {
    pub p0: Vec<f64>,
    pub arc: PhaseArc,
    pub iterations: usize,
    /// Set when `|x - y| > lambda0 * t`, i.e. the root may not be the unique one.
    pub outside_uniqueness_ball: bool,
}

/// Finds `p0` with `xi(t_to; y, p0) = x` by damped Newton on the endpoint map.
#[allow(clippy::too_many_arguments)]
pub fn shoot_bvp(
    model: &HamiltonianModel,
    t_from: f64,
    t_to: f64,
    y: &[f64],
    x: &[f64],
    guess: Option<&[f64]>,
    cfg: &ShootingConfig,
    lambda0: Option<f64>,
) -> Result<Shot> {
    let tau = t_to - t_from;
    if !(tau > 0.0) {
        return Err(Error::Precondition(format!("shooting interval [{t_from}, {t_to}] is empty")));
    }
    model.domain().check(t_to, x)?;
    let outside = lambda0.is_some_and(|l| dist(x, y) > l * tau * (1.0 + 1e-12));
    let mut p = match guess {
        Some(g) => g.to_vec(),
        None => {
            let q: Vec<f64> = sub(x, y).into_iter().map(|v| v / tau).collect();
            model.dual_momentum(t_from, y, &q).unwrap_or(q)
        }
    };
    let endpoint = |p: &[f64]| -> Result<(Vec<f64>, PhaseArc)> {
        let arc = integrate_flow(model, t_from, y, p, t_to, cfg.steps)?;
        Ok((sub(arc.end_position(), x), arc))
    };
    let (mut miss, mut arc) = endpoint(&p)?;
    let n = p.len();
    let mut residual = norm(&miss);
    for it in 0..=cfg.max_iterations {
        if residual <= cfg.tolerance {
            return Ok(Shot {
                p0: p,
                arc,
                iterations: it,
                outside_uniqueness_ball: outside,
            });
        }
        if it == cfg.max_iterations {
            break;
        }
        let mut jac = DMatrix::zeros(n, n);
        let delta = 1e-6 * (1.0 + norm(&p));
        for j in 0..n {
            let mut pp = p.clone();
            let mut pm = p.clone();
            pp[j] += delta;
            pm[j] -= delta;
            let fp = endpoint(&pp).map_err(|_| Error::Shooting { iterations: it, residual })?.0;
            let fm = endpoint(&pm).map_err(|_| Error::Shooting { iterations: it, residual })?.0;
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * delta);
            }
        }
        let rhs = -DVector::from_column_slice(&miss);
        let step = jac
            .lu()
            .solve(&rhs)
            .ok_or(Error::Shooting { iterations: it, residual })?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand = axpy(&p, alpha, step.as_slice());
            if let Ok((m, a)) = endpoint(&cand) {
                let r = norm(&m);
                if r < residual {
                    p = cand;
                    miss = m;
                    arc = a;
                    residual = r;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::Shooting {
        iterations: cfg.max_iterations,
        residual,
    })
}

/// Velocity bound `lambda0 = 2 sup |D_p H|` over the box and the momentum ball of radius `lipschitz_u`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedBound {
    pub lambda0: f64,
    pub lipschitz_u: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpeedSampling {
    pub space_nodes: usize,
    pub time_nodes: usize,
    pub radial_nodes: usize,
}

impl Default for SpeedSampling {
    fn default() -> Self {
        Self {
            space_nodes: 9,
            time_nodes: 5,
            radial_nodes: 5,
        }
    }
}

fn unit_directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = s;
            dirs.push(e);
        }
    }
    if (2..=6).contains(&dim) {
        let c = 1.0 / (dim as f64).sqrt();
        for mask in 0..(1usize << dim) {
            dirs.push((0..dim).map(|i| if mask >> i & 1 == 1 { -c } else { c }).collect());
        }
    }
    dirs
}

fn lattice(lo: &[f64], hi: &[f64], per_axis: usize) -> Vec<Vec<f64>> {
    let dim = lo.len();
    let per_axis = per_axis.max(2);
    let total = per_axis.pow(dim as u32);
    (0..total)
        .map(|idx| {
            let mut rem = idx;
            (0..dim)
                .map(|k| {
                    let i = rem % per_axis;
                    rem /= per_axis;
                    lo[k] + (hi[k] - lo[k]) * i as f64 / (per_axis - 1) as f64
                })
                .collect()
        })
        .collect()
}

impl SpeedBound {
    /// Samples `D_p H` on `[0, horizon] x box x B(0, L)`; `L` adds the momentum growth `horizon * sup |D_x H|`.
    pub fn compute(
        model: &HamiltonianModel,
        datum_lipschitz: f64,
        horizon: f64,
        sampling: &SpeedSampling,
    ) -> Result<Self> {
        let dom = model.domain();
        let per_axis = if model.dim() <= 2 { sampling.space_nodes } else { 3 };
        let points = lattice(&dom.lo, &dom.hi, per_axis);
        let times: Vec<f64> = (0..sampling.time_nodes.max(2))
            .map(|i| horizon * i as f64 / (sampling.time_nodes.max(2) - 1) as f64)
            .collect();
        let dirs = unit_directions(model.dim());
        let momenta = |radius: f64| -> Vec<Vec<f64>> {
            let mut out = vec![vec![0.0; model.dim()]];
            for j in 1..=sampling.radial_nodes.max(1) {
                let r = radius * j as f64 / sampling.radial_nodes.max(1) as f64;
                out.extend(dirs.iter().map(|d| d.iter().map(|v| v * r).collect::<Vec<f64>>()));
            }
            out
        };
        let mut force: f64 = 0.0;
        for &t in &times {
            for x in &points {
                for p in momenta(datum_lipschitz) {
                    force = force.max(norm(&model.phase_velocity(t, x, &p)?.1));
                }
            }
        }
        let lipschitz_u = datum_lipschitz + horizon * force;
        let mut speed: f64 = 0.0;
        for &t in &times {
            for x in &points {
                for p in momenta(lipschitz_u) {
                    speed = speed.max(norm(&model.phase_velocity(t, x, &p)?.0));
                }
            }
        }
        Ok(Self {
            lambda0: (2.0 * speed).max(1e-9),
            lipschitz_u,
        })
    }
}
