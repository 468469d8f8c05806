//! Evaluation of the viscosity solution through its variational representation.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::brent::BrentOpt;
use argmin::solver::neldermead::NelderMead;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::io::{csv_header, fmt_num};
use crate::problem::Problem;
use crate::vecops::{axpy, dist, sub};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Minimizer {
    pub y: Vec<f64>,
    pub value: f64,
    /// Momentum of the minimizing arc at the arrival point.
    pub momentum: Vec<f64>,
}

/// Clustered global minimizers of `y -> u0(y) + A_t(y, x)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizerSet {
    pub minimizers: Vec<Minimizer>,
    pub cluster_radius: f64,
    pub value_gap: f64,
}

impl MinimizerSet {
    pub fn least_value(&self) -> f64 {
        self.minimizers[0].value
    }

    pub fn multiplicity(&self) -> usize {
        self.minimizers.len()
    }

    pub fn is_singular(&self) -> bool {
        self.minimizers.len() >= 2
    }

    pub fn momenta(&self) -> Vec<Vec<f64>> {
        self.minimizers.iter().map(|m| m.momentum.clone()).collect()
    }

    /// Smallest and largest first coordinate among the minimizers.
    pub fn span_1d(&self) -> (f64, f64) {
        self.minimizers.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), m| {
            (lo.min(m.y[0]), hi.max(m.y[0]))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueSample {
    pub u: f64,
    pub mins: MinimizerSet,
}

struct Objective<'a> {
    problem: &'a Problem,
    t: f64,
    x: &'a [f64],
}

impl Objective<'_> {
    fn at(&self, y: &[f64]) -> f64 {
        match self.problem.action(self.t, y, self.x) {
            Ok(a) => {
                let v = self.problem.datum.eval(y) + a;
                if v.is_finite() {
                    v
                } else {
                    f64::INFINITY
                }
            }
            Err(_) => f64::INFINITY,
        }
    }
}

struct LineCost<'a, 'b>(&'a Objective<'b>);

impl CostFunction for LineCost<'_, '_> {
    type Param = f64;
    type Output = f64;

    fn cost(&self, y: &f64) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.0.at(&[*y]))
    }
}

struct BallCost<'a, 'b> {
    obj: &'a Objective<'b>,
    radius: f64,
}

impl CostFunction for BallCost<'_, '_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, y: &Vec<f64>) -> std::result::Result<f64, argmin::core::Error> {
        if dist(y, self.obj.x) > self.radius {
            return Ok(f64::INFINITY);
        }
        Ok(self.obj.at(y))
    }
}

/// Regular lattice `origin + step * (i_1, .., i_n)` with `n` nodes per axis.
struct Lattice {
    origin: Vec<f64>,
    step: f64,
    n: usize,
}

impl Lattice {
    fn dim(&self) -> usize {
        self.origin.len()
    }

    fn len(&self) -> usize {
        self.n.pow(self.dim() as u32)
    }

    fn point(&self, mut idx: usize) -> Vec<f64> {
        self.origin
            .iter()
            .map(|o| {
                let i = idx % self.n;
                idx /= self.n;
                o + self.step * i as f64
            })
            .collect()
    }

    /// Forward neighbours along each axis.
    fn forward(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).filter_map(move |k| {
            let stride = self.n.pow(k as u32);
            ((idx / stride) % self.n + 1 < self.n).then_some(idx + stride)
        })
    }

    fn neighbours(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim()).flat_map(move |k| {
            let stride = self.n.pow(k as u32);
            let i = (idx / stride) % self.n;
            let lo = (i > 0).then(|| idx - stride);
            let hi = (i + 1 < self.n).then_some(idx + stride);
            lo.into_iter().chain(hi)
        })
    }
}

/// Maximal node ranges `[a, b]` covering every cell next to a node within twice the largest
/// neighbour jump of the best node (1-D lattices).
fn near_best_runs(f: &[f64]) -> Vec<(usize, usize)> {
    let n = f.len();
    let mut jump: f64 = 0.0;
    let mut best = f64::INFINITY;
    for i in 0..n {
        if f[i].is_finite() {
            best = best.min(f[i]);
            if i + 1 < n && f[i + 1].is_finite() {
                jump = jump.max((f[i] - f[i + 1]).abs());
            }
        }
    }
    let mut runs: Vec<(usize, usize)> = Vec::new();
    for i in (0..n).filter(|&i| f[i].is_finite() && f[i] <= best + 2.0 * jump) {
        let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
        match runs.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => runs.push((a, b)),
        }
    }
    runs
}

/// Discrete local minima whose value is within twice the largest neighbour jump of the best node.
fn basin_candidates(lat: &Lattice, f: &[f64]) -> Vec<usize> {
    let mut jump: f64 = 0.0;
    let mut best = f64::INFINITY;
    for i in 0..f.len() {
        if !f[i].is_finite() {
            continue;
        }
        best = best.min(f[i]);
        for j in lat.forward(i) {
            if f[j].is_finite() {
                jump = jump.max((f[i] - f[j]).abs());
            }
        }
    }
    let mut out: Vec<usize> = (0..f.len())
        .filter(|&i| {
            f[i].is_finite()
                && f[i] <= best + 2.0 * jump
                && lat.neighbours(i).all(|j| !f[j].is_finite() || f[i] <= f[j])
        })
        .collect();
    out.sort_by(|a, b| f[*a].total_cmp(&f[*b]).then(a.cmp(b)));
    out.truncate(256);
    out
}

fn scan(obj: &Objective<'_>, lat: &Lattice, radius: f64) -> Vec<f64> {
    (0..lat.len())
        .map(|i| {
            let y = lat.point(i);
            if lat.dim() > 1 && dist(&y, obj.x) > radius * (1.0 + 1e-12) {
                f64::INFINITY
            } else {
                obj.at(&y)
            }
        })
        .collect()
}

fn polish(obj: &Objective<'_>, y: &[f64], fy: f64, h: f64, radius: f64) -> (Vec<f64>, f64) {
    let x = obj.x;
    let best = if y.len() == 1 {
        let lo = (y[0] - h).max(x[0] - radius);
        let hi = (y[0] + h).min(x[0] + radius);
        if !(hi > lo) {
            return (y.to_vec(), fy);
        }
        let solver = BrentOpt::new(lo, hi).set_tolerance(1e-12, 1e-15);
        Executor::new(LineCost(obj), solver)
            .configure(|s| s.max_iters(200))
            .run()
            .ok()
            .map(|r| (vec![*r.state().get_best_param().unwrap_or(&y[0])], r.state().get_best_cost()))
    } else {
        let mut simplex = vec![y.to_vec()];
        for k in 0..y.len() {
            let mut v = y.to_vec();
            v[k] += h;
            simplex.push(v);
        }
        NelderMead::new(simplex)
            .with_sd_tolerance(1e-15)
            .ok()
            .and_then(|solver| {
                Executor::new(BallCost { obj, radius }, solver)
                    .configure(|s| s.max_iters(600))
                    .run()
                    .ok()
            })
            .and_then(|r| {
                let p = r.state().get_best_param()?.clone();
                Some((p, r.state().get_best_cost()))
            })
    };
    match best {
        Some((p, c)) if c < fy => (p, c),
        _ => (y.to_vec(), fy),
    }
}

/// Global minimizers of the variational objective at `(t, x)`.
pub fn minimizers(problem: &Problem, t: f64, x: &[f64]) -> Result<MinimizerSet> {
    let s = &problem.settings.search;
    let dim = problem.dim();
    if x.len() != dim {
        return Err(Error::Domain(format!("expected a {dim}-dimensional point")));
    }
    if t < s.t_min * (1.0 - 1e-12) {
        return Err(Error::Precondition(format!(
            "t = {t} is below t_min = {}; initial-time questions belong to the subdifferential tests",
            s.t_min
        )));
    }
    if t > problem.regime.t0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "t = {t} exceeds the small-time horizon t0 = {}",
            problem.regime.t0
        )));
    }
    let radius = problem.search_radius(t);
    if !problem.model.domain().contains_ball(x, radius) {
        return Err(Error::Domain(format!(
            "search ball of radius {radius} around {x:?} leaves the validity box; enlarge the box"
        )));
    }
    let obj = Objective { problem, t, x };
    let (coarse_n, fine_n) = if dim == 1 {
        (s.coarse_nodes_1d | 1, s.fine_nodes_1d | 1)
    } else {
        (s.coarse_nodes_nd | 1, s.fine_nodes_nd | 1)
    };
    let h = 2.0 * radius / (coarse_n - 1) as f64;
    let coarse = Lattice {
        origin: x.iter().map(|v| v - radius).collect(),
        step: h,
        n: coarse_n,
    };
    let f = scan(&obj, &coarse, radius);
    let hf = 2.0 * h / (fine_n - 1) as f64;
    let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
    if dim == 1 {
        // Refine whole runs of near-best cells: a basin narrower than one cell (a kink of the
        // datum, say) need not produce a discrete local minimum of its own.
        let steps_per_cell = (fine_n - 1) / 2;
        for (a, b) in near_best_runs(&f) {
            let fine = Lattice {
                origin: coarse.point(a),
                step: hf,
                n: (b - a) * steps_per_cell + 1,
            };
            let ff = scan(&obj, &fine, radius);
            for k in basin_candidates(&fine, &ff) {
                let yk = fine.point(k);
                found.push((yk.clone(), ff[k]));
                found.push(polish(&obj, &yk, ff[k], hf, radius));
            }
        }
    }
    for c in if dim == 1 { Vec::new() } else { basin_candidates(&coarse, &f) } {
        let yc = coarse.point(c);
        let fine = Lattice {
            origin: yc.iter().map(|v| v - h).collect(),
            step: hf,
            n: fine_n,
        };
        let ff = scan(&obj, &fine, radius);
        found.push((yc, f[c]));
        for k in basin_candidates(&fine, &ff) {
            let yk = fine.point(k);
            if dim == 1 && (yk[0] - x[0]).abs() > radius * (1.0 + 1e-12) {
                continue;
            }
            found.push(polish(&obj, &yk, ff[k], hf, radius));
        }
    }
    if found.is_empty() {
        return Err(Error::Numerical(format!("objective is not finite anywhere near {x:?} at t = {t}")));
    }
    found.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal)));
    let best = found[0].1;
    let value_gap = s.value_gap_rel * (1.0 + best.abs());
    let cluster_radius = 2.0 * hf;
    let mut reps: Vec<(Vec<f64>, f64)> = Vec::new();
    for (y, v) in found.into_iter().take_while(|(_, v)| *v <= best + value_gap) {
        if reps.iter().all(|(r, _)| dist(r, &y) > cluster_radius) {
            reps.push((y, v));
        }
    }
    let minimizers = reps
        .into_iter()
        .map(|(y, value)| {
            let (_, momentum) = problem.action_and_momentum(0.0, t, &y, x, None)?;
            Ok(Minimizer { y, value, momentum })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MinimizerSet {
        minimizers,
        cluster_radius,
        value_gap,
    })
}

pub fn value_at(problem: &Problem, t: f64, x: &[f64]) -> Result<ValueSample> {
    let mins = minimizers(problem, t, x)?;
    Ok(ValueSample {
        u: mins.least_value(),
        mins,
    })
}

/// Singular iff the objective has at least two separated global minimizers.
pub fn is_singular(problem: &Problem, t: f64, x: &[f64]) -> Result<(bool, MinimizerSet)> {
    let mins = minimizers(problem, t, x)?;
    Ok((mins.is_singular(), mins))
}

/// Extreme points of the spatial superdifferential: one momentum per minimizer.
pub fn superdiff_x(problem: &Problem, t: f64, x: &[f64]) -> Result<Vec<Vec<f64>>> {
    Ok(minimizers(problem, t, x)?.momenta())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Nodes per axis.
    pub nodes: usize,
}

impl GridSpec {
    pub fn points(&self) -> Result<Vec<Vec<f64>>> {
        if self.nodes < 2 || self.lo.len() != self.hi.len() || self.lo.is_empty() {
            return Err(Error::Config("grid needs at least 2 nodes per axis and matching bounds".into()));
        }
        let step: Vec<f64> = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| (b - a) / (self.nodes - 1) as f64)
            .collect();
        let total = self.nodes.pow(self.lo.len() as u32);
        Ok((0..total)
            .map(|mut idx| {
                (0..self.lo.len())
                    .map(|k| {
                        let i = idx % self.nodes;
                        idx /= self.nodes;
                        if i + 1 == self.nodes {
                            self.hi[k]
                        } else {
                            self.lo[k] + step[k] * i as f64
                        }
                    })
                    .collect()
            })
            .collect())
    }
}

/// Solution values on a grid at one time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueField {
    pub t: f64,
    pub points: Vec<Vec<f64>>,
    pub u: Vec<f64>,
    pub singular: Vec<bool>,
    /// Spatial gradient where the minimizer is unique.
    pub gradient: Vec<Option<Vec<f64>>>,
    pub multiplicity: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldSummary {
    pub t: f64,
    pub nodes: usize,
    pub min_u: f64,
    pub max_u: f64,
    pub singular_count: usize,
}

impl ValueField {
    pub fn summary(&self) -> FieldSummary {
        FieldSummary {
            t: self.t,
            nodes: self.u.len(),
            min_u: self.u.iter().copied().fold(f64::INFINITY, f64::min),
            max_u: self.u.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            singular_count: self.singular.iter().filter(|s| **s).count(),
        }
    }

    /// CSV with columns `t, x_1..x_n, u, singular, du_1..du_n`.
    pub fn to_csv(&self) -> String {
        let n = self.points.first().map_or(0, Vec::len);
        let mut out = format!("t,{},u,singular,{}\n", csv_header("x", n), csv_header("du", n));
        for i in 0..self.u.len() {
            let mut row = vec![fmt_num(self.t)];
            row.extend(self.points[i].iter().map(|v| fmt_num(*v)));
            row.push(fmt_num(self.u[i]));
            row.push(u8::from(self.singular[i]).to_string());
            match &self.gradient[i] {
                Some(g) => row.extend(g.iter().map(|v| fmt_num(*v))),
                None => row.extend(std::iter::repeat_n(String::new(), n)),
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Parallel sweep of `value_at` over the grid, one field per time.
pub fn solve_grid(problem: &Problem, times: &[f64], grid: &GridSpec) -> Result<Vec<ValueField>> {
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let points = grid.points()?;
    times
        .iter()
        .map(|&t| {
            let samples = points
                .par_iter()
                .map(|x| value_at(problem, t, x))
                .collect::<Result<Vec<_>>>()?;
            Ok(ValueField {
                t,
                points: points.clone(),
                u: samples.iter().map(|s| s.u).collect(),
                singular: samples.iter().map(|s| s.mins.is_singular()).collect(),
                gradient: samples
                    .iter()
                    .map(|s| (!s.mins.is_singular()).then(|| s.mins.minimizers[0].momentum.clone()))
                    .collect(),
                multiplicity: samples.iter().map(|s| s.mins.multiplicity()).collect(),
            })
        })
        .collect()
}

/// Gnuplot script drawing each CSV (line plot in 1-D, heat map in 2-D).
pub fn plot_script(csv_files: &[String], dim: usize) -> String {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\n");
    if dim == 1 {
        s.push_str("set xlabel 'x'\nset ylabel 'u'\nplot ");
        let parts: Vec<String> = csv_files
            .iter()
            .map(|f| format!("'{f}' using 2:3 with lines title '{f}'"))
            .collect();
        s.push_str(&parts.join(", \\\n     "));
        s.push('\n');
    } else {
        s.push_str("set view map\nset xlabel 'x_1'\nset ylabel 'x_2'\n");
        for f in csv_files {
            s.push_str(&format!("splot '{f}' using 2:3:{} with points palette pointtype 5\npause -1\n", 2 + dim));
        }
    }
    s
}

/// Dense-scan plus golden-section minimization of `u0(y) + (x - y)^2 / 2t` on an interval.
pub fn hopf_1d(u0: &dyn InitialDatum, t: f64, x: f64, interval: (f64, f64), resolution: usize) -> f64 {
    let f = |y: f64| u0.eval(&[y]) + (x - y) * (x - y) / (2.0 * t);
    let n = resolution.max(3);
    let (a, b) = interval;
    let h = (b - a) / (n - 1) as f64;
    let nodes: Vec<f64> = (0..n).map(|i| if i + 1 == n { b } else { a + h * i as f64 }).collect();
    let vals: Vec<f64> = nodes.iter().map(|&y| f(y)).collect();
    let mut minima: Vec<usize> = (0..n)
        .filter(|&i| (i == 0 || vals[i] <= vals[i - 1]) && (i + 1 == n || vals[i] <= vals[i + 1]))
        .collect();
    minima.sort_by(|p, q| vals[*p].total_cmp(&vals[*q]));
    let mut best = f64::INFINITY;
    for &i in minima.iter().take(8) {
        let lo = nodes[i.saturating_sub(1)];
        let hi = nodes[(i + 1).min(n - 1)];
        best = best.min(vals[i]).min(golden_section(&f, lo, hi));
    }
    best
}

fn golden_section(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    let mut best = fc.min(fd).min(f(a)).min(f(b));
    for _ in 0..120 {
        if b - a <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
        best = best.min(fc).min(fd);
    }
    best
}

/// A certified singular point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    pub t: f64,
    pub x: Vec<f64>,
    pub mins: MinimizerSet,
}

/// Outcome of scanning a segment at a fixed time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SegmentProbe {
    pub hit: Option<SingularPoint>,
    /// Largest gradient difference quotient between adjacent regular nodes.
    pub gradient_lipschitz: f64,
}

/// Scans `[a, b]` at time `t` and bisects every jump of the minimizer map down to a certified tie.
pub fn probe_segment(problem: &Problem, t: f64, a: &[f64], b: &[f64], nodes: usize) -> Result<SegmentProbe> {
    let nodes = nodes.max(2);
    let d = sub(b, a);
    let pts: Vec<Vec<f64>> = (0..nodes)
        .map(|i| axpy(a, i as f64 / (nodes - 1) as f64, &d))
        .collect();
    let samples = pts
        .par_iter()
        .map(|x| minimizers(problem, t, x))
        .collect::<Result<Vec<_>>>()?;
    let mut lip: f64 = 0.0;
    for i in 0..nodes - 1 {
        let (ma, mb) = (&samples[i], &samples[i + 1]);
        if !ma.is_singular() && !mb.is_singular() {
            lip = lip.max(dist(&ma.minimizers[0].momentum, &mb.minimizers[0].momentum) / dist(&pts[i], &pts[i + 1]));
        }
    }
    let jump_ratio = problem.settings.trace.jump_ratio;
    for i in 0..nodes {
        if samples[i].is_singular() {
            return Ok(SegmentProbe {
                hit: Some(SingularPoint { t, x: pts[i].clone(), mins: samples[i].clone() }),
                gradient_lipschitz: lip,
            });
        }
        if i + 1 == nodes {
            break;
        }
        let (ya, yb) = (&samples[i].minimizers[0].y, &samples[i + 1].minimizers[0].y);
        let threshold = (4.0 * samples[i].cluster_radius).max(jump_ratio * dist(&pts[i], &pts[i + 1]));
        if dist(ya, yb) > threshold {
            if let Some(hit) = bisect_jump(problem, t, &pts[i], &pts[i + 1], ya, yb)? {
                return Ok(SegmentProbe { hit: Some(hit), gradient_lipschitz: lip });
            }
        }
    }
    Ok(SegmentProbe { hit: None, gradient_lipschitz: lip })
}

fn bisect_jump(problem: &Problem, t: f64, a: &[f64], b: &[f64], ya: &[f64], yb: &[f64]) -> Result<Option<SingularPoint>> {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    let (mut ya, mut yb) = (ya.to_vec(), yb.to_vec());
    for _ in 0..100 {
        let m: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
        let mins = minimizers(problem, t, &m)?;
        if mins.is_singular() {
            return Ok(Some(SingularPoint { t, x: m, mins }));
        }
        if dist(&ya, &yb) <= 4.0 * mins.cluster_radius {
            return Ok(None);
        }
        let ym = mins.minimizers[0].y.clone();
        if dist(&ym, &ya) < dist(&ym, &yb) {
            a = m;
            ya = ym;
        } else {
            b = m;
            yb = ym;
        }
        let scale = 1.0 + a.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if dist(&a, &b) <= 1e-14 * scale {
            return Ok(None);
        }
    }
    Ok(None)
}
