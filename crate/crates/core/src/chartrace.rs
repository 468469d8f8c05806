//! Classical and generalized characteristics, and their classification.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::integrate_flow;
use crate::io::{csv_header, fmt_num};
use crate::problem::Problem;
use crate::subdiff::{least_certificate, subdiff_at, ProximalCertificate, SubdiffEstimate};
use crate::value::{minimizers, probe_segment, MinimizerSet, SingularPoint};
use crate::vecops::{axpy, dist, min_norm_in_hull, norm};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleStatus {
    Regular,
    Singular,
    SingularClosure,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    Classical,
    WeaklySingular,
    StronglySingular,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Origin {
    pub t: f64,
    pub x: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub x: Vec<f64>,
    pub p: Option<Vec<f64>>,
    pub status: SampleStatus,
}

/// Start-time ladder used for traces leaving the initial time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderSummary {
    pub start_times: Vec<f64>,
    /// Sup distance between consecutive levels on the common grid.
    pub sup_distances: Vec<f64>,
    pub cauchy: bool,
    /// Whether every grid sample of each level is singular.
    pub all_singular: Vec<bool>,
    /// Final position of each level.
    pub limits: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicTrace {
    pub origin: Origin,
    pub dt: f64,
    pub samples: Vec<TraceSample>,
    pub classification: Classification,
    /// Time at which the trace left the box, if it did.
    pub exit_time: Option<f64>,
    /// First time a classical verification failed.
    pub failure_time: Option<f64>,
    pub ladder: Option<LadderSummary>,
}

impl CharacteristicTrace {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("bad trace JSON: {e}")))
    }

    pub fn to_csv(&self) -> String {
        let dim = self.origin.x.len();
        let mut out = format!("t,{},{},status\n", csv_header("x", dim), csv_header("p", dim));
        for s in &self.samples {
            let xs: Vec<String> = s.x.iter().map(|v| fmt_num(*v)).collect();
            let ps: Vec<String> = match &s.p {
                Some(p) => p.iter().map(|v| fmt_num(*v)).collect(),
                None => vec![String::new(); dim],
            };
            let status = serde_json::to_value(s.status).expect("status serializes");
            out.push_str(&format!(
                "{},{},{},{}\n",
                fmt_num(s.t),
                xs.join(","),
                ps.join(","),
                status.as_str().unwrap_or_default()
            ));
        }
        out
    }

    pub fn end(&self) -> &TraceSample {
        self.samples.last().expect("trace has samples")
    }

    /// Largest `|x|` deviation from the origin point over the samples.
    pub fn max_excursion(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| dist(&s.x, &self.origin.x))
            .fold(0.0, f64::max)
    }

    /// Largest displacement per unit time between consecutive samples.
    pub fn max_speed(&self) -> f64 {
        self.samples
            .windows(2)
            .filter(|w| w[1].t > w[0].t)
            .map(|w| dist(&w[1].x, &w[0].x) / (w[1].t - w[0].t))
            .fold(0.0, f64::max)
    }
}

fn status_of(mins: &MinimizerSet) -> SampleStatus {
    if mins.is_singular() {
        SampleStatus::Singular
    } else {
        SampleStatus::Regular
    }
}

fn regular_momentum(mins: &MinimizerSet) -> Option<Vec<f64>> {
    (!mins.is_singular()).then(|| mins.minimizers[0].momentum.clone())
}

/// Position at time `t` of the characteristic launched from `(0, y0)` with momentum `p0`.
fn arc_position(problem: &Problem, y0: &[f64], p0: &[f64], t: f64) -> Result<Vec<f64>> {
    if t <= 0.0 {
        return Ok(y0.to_vec());
    }
    let steps = ((256.0 * t / problem.horizon).ceil() as usize).max(16);
    Ok(integrate_flow(&problem.model, 0.0, y0, p0, t, steps)?.end_position().to_vec())
}

/// Largest admissible duration for a classical trace backed by `cert`.
pub fn classical_time_bound(problem: &Problem, cert: &ProximalCertificate) -> f64 {
    let reg = &problem.regime;
    let margin = problem.settings.trace.tau_margin;
    let by_k = if cert.k > 0.0 {
        2.0 * reg.c0 / cert.k * (1.0 - margin)
    } else {
        f64::INFINITY
    };
    reg.t0.min(cert.r / problem.speed.lambda0).min(by_k)
}

/// Characteristic launched from a certified proximal subgradient, checked against the minimizers.
pub fn classical_char_from_subgradient(
    problem: &Problem,
    cert: &ProximalCertificate,
    tau: f64,
) -> Result<CharacteristicTrace> {
    if !cert.verified() {
        return Err(Error::Precondition("the certificate refutes the subgradient".into()));
    }
    let bound = classical_time_bound(problem, cert);
    if !(tau > 0.0) || tau > bound * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "tau = {tau} must lie in (0, {bound}] for K = {}, r = {}",
            cert.k, cert.r
        )));
    }
    let steps = problem.settings.trace.steps.max(1);
    let arc = integrate_flow(&problem.model, 0.0, &cert.point, &cert.p, tau, steps)?;
    let t_min = problem.settings.search.t_min;
    let checks = (1..arc.len())
        .into_par_iter()
        .map(|i| {
            let t = arc.times[i];
            if t < t_min {
                return Ok(None);
            }
            minimizers(problem, t, &arc.positions[i]).map(Some)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut samples = vec![TraceSample {
        t: 0.0,
        x: cert.point.clone(),
        p: Some(cert.p.clone()),
        status: SampleStatus::Unknown,
    }];
    let mut failure_time = None;
    for (i, mins) in checks.into_iter().enumerate() {
        let (t, x, p) = (arc.times[i + 1], &arc.positions[i + 1], &arc.momenta[i + 1]);
        let status = match &mins {
            None => SampleStatus::Unknown,
            Some(m) => {
                let ok = !m.is_singular() && dist(&m.minimizers[0].y, &cert.point) <= m.cluster_radius;
                if !ok && failure_time.is_none() {
                    failure_time = Some(t);
                }
                status_of(m)
            }
        };
        samples.push(TraceSample {
            t,
            x: x.clone(),
            p: Some(p.clone()),
            status,
        });
    }
    Ok(CharacteristicTrace {
        origin: Origin {
            t: 0.0,
            x: cert.point.clone(),
        },
        dt: tau / steps as f64,
        samples,
        classification: if failure_time.is_none() {
            Classification::Classical
        } else {
            Classification::Inconclusive
        },
        exit_time: None,
        failure_time,
        ladder: None,
    })
}

/// First time the characteristic from `(y0, p0)` stops being the unique minimizing arc.
pub fn classical_lifetime(problem: &Problem, y0: &[f64], p0: &[f64], t_end: f64) -> Result<Option<f64>> {
    let ts = &problem.settings.trace;
    let t_min = problem.settings.search.t_min;
    let holds = |t: f64| -> Result<bool> {
        if t < t_min {
            return Ok(true);
        }
        let x = arc_position(problem, y0, p0, t)?;
        let m = minimizers(problem, t, &x)?;
        Ok(!m.is_singular() && dist(&m.minimizers[0].y, y0) <= m.cluster_radius)
    };
    let n = ts.classical_samples.max(2);
    let grid: Vec<f64> = (1..=n).map(|i| t_end * i as f64 / n as f64).collect();
    let ok = grid.par_iter().map(|&t| holds(t)).collect::<Result<Vec<_>>>()?;
    let Some(first) = ok.iter().position(|v| !v) else {
        return Ok(None);
    };
    let (mut lo, mut hi) = (if first == 0 { 0.0 } else { grid[first - 1] }, grid[first]);
    while hi - lo > ts.lifetime_tol {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanMember {
    pub p0: Vec<f64>,
    pub lifetime: Option<f64>,
}

/// Lifetimes of the classical characteristics leaving `y0` with each momentum in `p0s`.
pub fn fan(problem: &Problem, y0: &[f64], p0s: &[Vec<f64>]) -> Result<Vec<FanMember>> {
    p0s.iter()
        .map(|p0| {
            Ok(FanMember {
                p0: p0.clone(),
                lifetime: classical_lifetime(problem, y0, p0, problem.horizon)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedSubgradient {
    pub p0: Vec<f64>,
    pub certificate: ProximalCertificate,
}

/// Initial momentum of a classical trace, re-certified as a proximal subgradient.
pub fn extract_subgradient_from_char(problem: &Problem, trace: &CharacteristicTrace) -> Result<ExtractedSubgradient> {
    if trace.classification != Classification::Classical {
        return Err(Error::Precondition("only classical traces carry an initial subgradient".into()));
    }
    let start = &trace.samples[0];
    let end = trace.end();
    let tau = end.t - start.t;
    if start.t != 0.0 || !(tau > 0.0) {
        return Err(Error::Precondition("trace must start at t = 0 and have positive length".into()));
    }
    let p0 = problem
        .launch_momentum(tau, &start.x, &end.x)
        .map_err(|e| Error::Inconsistency(format!("boundary value problem failed: {e}")))?;
    let certificate = least_certificate(problem, &start.x, &p0).ok_or_else(|| {
        Error::Inconsistency(format!(
            "extracted momentum {p0:?} is not a proximal subgradient at {:?}",
            start.x
        ))
    })?;
    Ok(ExtractedSubgradient { p0, certificate })
}

/// Which side of the anchor a minimizer set lies on, along the monotone 1-D minimizer map.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Side {
    Hit,
    Below,
    Above,
}

fn side(mins: &MinimizerSet, anchor: f64, regular_anchor: bool) -> Side {
    let ys: Vec<f64> = mins.minimizers.iter().map(|m| m.y[0]).collect();
    let lo = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // Tight on purpose: inside a rarefaction fan the minimizer map is flat, so a loose match
    // would accept any point of the fan.
    if regular_anchor && ys.iter().any(|y| (y - anchor).abs() <= 1e-9 * (1.0 + anchor.abs())) {
        return Side::Hit;
    }
    if ys.len() > 1 && lo < anchor && anchor < hi {
        Side::Hit
    } else if hi < anchor {
        Side::Below
    } else {
        Side::Above
    }
}

struct State {
    t: f64,
    x: Vec<f64>,
    mins: MinimizerSet,
}

/// Locates the point at `t` where the minimizer map passes `anchor`, starting near `guess`.
fn locate_crossing(problem: &Problem, t: f64, guess: f64, anchor: f64, regular_anchor: bool, reach: f64) -> Result<State> {
    let eval = |x: f64| -> Result<(MinimizerSet, Side)> {
        let m = minimizers(problem, t, &[x])?;
        let s = side(&m, anchor, regular_anchor);
        Ok((m, s))
    };
    let (m0, s0) = eval(guess)?;
    if s0 == Side::Hit {
        return Ok(State { t, x: vec![guess], mins: m0 });
    }
    // Minimizers increase with x, so a point below the anchor needs a larger x.
    let dir = if s0 == Side::Below { 1.0 } else { -1.0 };
    let mut step = reach.max(1e-12);
    let (mut a, mut b) = (guess, guess);
    let mut found = None;
    for _ in 0..40 {
        let c = guess + dir * step;
        let (m, s) = eval(c)?;
        if s == Side::Hit {
            return Ok(State { t, x: vec![c], mins: m });
        }
        if s != s0 {
            found = Some(c);
            break;
        }
        a = c;
        step *= 2.0;
    }
    let Some(c) = found else {
        return Err(Error::Numerical(format!("no minimizer crossing of {anchor} near x = {guess} at t = {t}")));
    };
    b = if dir > 0.0 { c } else { b };
    if dir < 0.0 {
        // keep a < b with `a` below the anchor
        b = a;
        a = c;
    }
    let mut last = None;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if !(m > a && m < b) {
            break;
        }
        let (ms, s) = eval(m)?;
        match s {
            Side::Hit => return Ok(State { t, x: vec![m], mins: ms }),
            Side::Below => a = m,
            Side::Above => b = m,
        }
        last = Some((m, ms));
    }
    match last {
        Some((x, mins)) => Ok(State { t, x: vec![x], mins }),
        None => {
            let (mins, _) = eval(a)?;
            Ok(State { t, x: vec![a], mins })
        }
    }
}

fn advance(problem: &Problem, st: &State, t_next: f64) -> Result<State> {
    let dt = t_next - st.t;
    let model = &problem.model;
    if !st.mins.is_singular() {
        let m = &st.mins.minimizers[0];
        let arc = integrate_flow(model, st.t, &st.x, &m.momentum, t_next, 8)?;
        let guess = arc.end_position().to_vec();
        if problem.dim() == 1 {
            return locate_crossing(problem, t_next, guess[0], m.y[0], true, problem.speed.lambda0 * dt);
        }
        let mins = minimizers(problem, t_next, &guess)?;
        return Ok(State { t: t_next, x: guess, mins });
    }
    let velocities = st
        .mins
        .minimizers
        .iter()
        .map(|m| model.phase_velocity(st.t, &st.x, &m.momentum).map(|(v, _)| v))
        .collect::<Result<Vec<_>>>()?;
    if problem.dim() == 1 {
        // Predict with the hull midpoint, then follow the jump across the midpoint of the gap.
        let (lo, hi) = st.mins.span_1d();
        let vlo = velocities.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
        let vhi = velocities.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
        let guess = st.x[0] + dt * 0.5 * (vlo + vhi);
        return locate_crossing(problem, t_next, guess, 0.5 * (lo + hi), false, problem.speed.lambda0 * dt);
    }
    let v = min_norm_in_hull(&velocities);
    let x = axpy(&st.x, dt, &v);
    let mins = minimizers(problem, t_next, &x)?;
    Ok(State { t: t_next, x, mins })
}

struct RawTrace {
    samples: Vec<TraceSample>,
    exit_time: Option<f64>,
}

/// Steps from `(t_start, x0)` through `times` (all later than `t_start`).
fn march(problem: &Problem, t_start: f64, x0: &[f64], times: &[f64]) -> Result<RawTrace> {
    let mut st = State {
        t: t_start,
        x: x0.to_vec(),
        mins: minimizers(problem, t_start, x0)?,
    };
    let mut samples = Vec::with_capacity(times.len());
    let mut exit_time = None;
    for &t in times {
        match advance(problem, &st, t) {
            Ok(next) => st = next,
            Err(Error::Domain(_)) | Err(Error::BoundaryExit { .. }) => {
                exit_time = Some(t);
                break;
            }
            Err(e) => return Err(e),
        }
        samples.push(TraceSample {
            t,
            x: st.x.clone(),
            p: regular_momentum(&st.mins),
            status: status_of(&st.mins),
        });
    }
    Ok(RawTrace { samples, exit_time })
}

/// Generalized characteristic from `(t_start, x0)` up to `t_end`, classified.
pub fn generalized_char(problem: &Problem, t_start: f64, x0: &[f64], t_end: f64) -> Result<CharacteristicTrace> {
    let trace = generalized_char_unclassified(problem, t_start, x0, t_end)?;
    let outcome = classify_trace(problem, &trace, problem.settings.trace.window)?;
    Ok(outcome.apply(trace))
}

/// The trace alone; the classification field is left inconclusive.
pub fn generalized_char_unclassified(problem: &Problem, t_start: f64, x0: &[f64], t_end: f64) -> Result<CharacteristicTrace> {
    if x0.len() != problem.dim() {
        return Err(Error::Domain(format!("expected a {}-dimensional point", problem.dim())));
    }
    if !(t_start >= 0.0) || !(t_end > t_start) || t_end > problem.regime.t0 * (1.0 + 1e-12) {
        return Err(Error::Domain(format!(
            "need 0 <= t_start < t_end <= {}",
            problem.regime.t0
        )));
    }
    problem.model.domain().check(t_start, x0)?;
    let ts = &problem.settings.trace;
    let dt = problem.dt();
    let n = ((t_end - t_start) / dt - 1e-9).ceil().max(1.0) as usize;
    let grid: Vec<f64> = (1..=n).map(|k| (t_start + k as f64 * dt).min(t_end)).collect();
    let start = TraceSample {
        t: t_start,
        x: x0.to_vec(),
        p: None,
        status: SampleStatus::Unknown,
    };
    if t_start > 0.0 {
        let mins = minimizers(problem, t_start, x0)?;
        let raw = march(problem, t_start, x0, &grid)?;
        let mut samples = vec![TraceSample {
            p: regular_momentum(&mins),
            status: status_of(&mins),
            ..start
        }];
        samples.extend(raw.samples);
        return Ok(CharacteristicTrace {
            origin: Origin { t: t_start, x: x0.to_vec() },
            dt,
            samples,
            classification: Classification::Inconclusive,
            exit_time: raw.exit_time,
            failure_time: None,
            ladder: None,
        });
    }
    // Limit of traces started at t_h -> 0, compared on grid times after the coarsest start.
    let levels = ts.ladder_levels.max(2);
    let starts: Vec<f64> = (0..levels).map(|j| ts.ladder_h0 * 2f64.powi(-(j as i32))).collect();
    if starts.last().copied().unwrap_or(0.0) < problem.settings.search.t_min || starts[0] >= t_end {
        return Err(Error::Config(format!(
            "ladder start times {starts:?} must lie in [t_min, t_end) = [{}, {t_end})",
            problem.settings.search.t_min
        )));
    }
    let raws = starts
        .par_iter()
        .map(|&th| {
            let times: Vec<f64> = grid.iter().copied().filter(|t| *t > th).collect();
            march(problem, th, x0, &times)
        })
        .collect::<Result<Vec<_>>>()?;
    let at = |r: &RawTrace, t: f64| r.samples.iter().find(|s| s.t == t).map(|s| s.x.clone());
    let common: Vec<f64> = grid.iter().copied().filter(|t| *t > starts[0]).collect();
    let sup_distances: Vec<f64> = raws
        .windows(2)
        .map(|w| {
            common
                .iter()
                .filter_map(|&t| Some(dist(&at(&w[0], t)?, &at(&w[1], t)?)))
                .fold(0.0, f64::max)
        })
        .collect();
    let cauchy = sup_distances.last().is_some_and(|d| *d <= ts.cauchy_tol)
        && sup_distances.windows(2).all(|w| w[1] <= w[0] + 1e-9);
    let ladder = LadderSummary {
        start_times: starts,
        sup_distances,
        cauchy,
        all_singular: raws
            .iter()
            .map(|r| !r.samples.is_empty() && r.samples.iter().all(|s| s.status == SampleStatus::Singular))
            .collect(),
        limits: raws
            .iter()
            .map(|r| r.samples.last().map(|s| s.x.clone()).unwrap_or_else(|| x0.to_vec()))
            .collect(),
    };
    let finest = raws.into_iter().last().expect("ladder has levels");
    let mut samples = vec![start];
    samples.extend(finest.samples);
    Ok(CharacteristicTrace {
        origin: Origin { t: 0.0, x: x0.to_vec() },
        dt,
        samples,
        classification: Classification::Inconclusive,
        exit_time: finest.exit_time,
        failure_time: None,
        ladder: Some(ladder),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowProbe {
    pub t: f64,
    pub x: Vec<f64>,
    pub hit: Option<SingularPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifyOutcome {
    pub classification: Classification,
    pub statuses: Vec<SampleStatus>,
    pub windows: Vec<WindowProbe>,
    /// Largest gradient difference quotient seen by the window probes.
    pub c11_estimate: f64,
    /// Whether the minimizing arc through the last sample reproduces the trace.
    pub arc_match: Option<bool>,
}

impl ClassifyOutcome {
    pub fn apply(&self, mut trace: CharacteristicTrace) -> CharacteristicTrace {
        trace.classification = self.classification;
        for (s, st) in trace.samples.iter_mut().zip(&self.statuses) {
            s.status = *st;
        }
        trace
    }
}

fn probe_window(problem: &Problem, t: f64, x: &[f64], w: f64) -> Result<(Option<SingularPoint>, f64)> {
    let t0 = problem.regime.t0;
    let t_min = problem.settings.search.t_min;
    let nodes = problem.settings.trace.window_nodes;
    let mut times = vec![t, t - 0.5 * w, t + 0.5 * w];
    for s in times.iter_mut() {
        *s = s.clamp((0.5 * t).max(t_min), t0);
    }
    let mut lip: f64 = 0.0;
    for s in times {
        let r = problem.search_radius(s);
        let dom = problem.model.domain();
        let lo: Vec<f64> = x.iter().zip(&dom.lo).map(|(xi, l)| (xi - w).max(l + r)).collect();
        let hi: Vec<f64> = x.iter().zip(&dom.hi).map(|(xi, h)| (xi + w).min(h - r)).collect();
        if lo.iter().zip(&hi).any(|(a, b)| a > b) {
            continue;
        }
        // 1-D windows are segments; higher dimensions probe each axis through the sample.
        for k in 0..x.len() {
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[k] = lo[k];
            b[k] = hi[k];
            let probe = probe_segment(problem, s, &a, &b, nodes)?;
            lip = lip.max(probe.gradient_lipschitz);
            if probe.hit.is_some() {
                return Ok((probe.hit, lip));
            }
        }
    }
    Ok((None, lip))
}

/// Classifies a trace from fresh singularity certificates at its samples.
pub fn classify_trace(problem: &Problem, trace: &CharacteristicTrace, window: f64) -> Result<ClassifyOutcome> {
    let t_min = problem.settings.search.t_min;
    let t_start = trace.origin.t;
    let mins: Vec<Option<MinimizerSet>> = trace
        .samples
        .par_iter()
        .map(|s| {
            if s.t <= t_start || s.t < t_min {
                Ok(None)
            } else {
                minimizers(problem, s.t, &s.x).map(Some)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut statuses: Vec<SampleStatus> = mins
        .iter()
        .map(|m| m.as_ref().map_or(SampleStatus::Unknown, status_of))
        .collect();
    let checked: Vec<usize> = (0..mins.len()).filter(|&i| mins[i].is_some()).collect();
    if checked.is_empty() {
        return Ok(ClassifyOutcome {
            classification: Classification::Inconclusive,
            statuses,
            windows: Vec::new(),
            c11_estimate: 0.0,
            arc_match: None,
        });
    }
    if checked.iter().all(|&i| statuses[i] == SampleStatus::Singular) {
        return Ok(ClassifyOutcome {
            classification: Classification::StronglySingular,
            statuses,
            windows: Vec::new(),
            c11_estimate: 0.0,
            arc_match: None,
        });
    }
    let probes = checked
        .iter()
        .map(|&i| {
            let s = &trace.samples[i];
            probe_window(problem, s.t, &s.x, window).map(|(hit, lip)| (WindowProbe { t: s.t, x: s.x.clone(), hit }, lip))
        })
        .collect::<Result<Vec<_>>>()?;
    let c11 = probes.iter().map(|(_, l)| *l).fold(0.0, f64::max);
    let windows: Vec<WindowProbe> = probes.into_iter().map(|(w, _)| w).collect();
    if windows.iter().all(|w| w.hit.is_some()) {
        for &i in &checked {
            if statuses[i] == SampleStatus::Regular {
                statuses[i] = SampleStatus::SingularClosure;
            }
        }
        return Ok(ClassifyOutcome {
            classification: Classification::WeaklySingular,
            statuses,
            windows,
            c11_estimate: c11,
            arc_match: None,
        });
    }
    let all_regular = checked.iter().all(|&i| statuses[i] == SampleStatus::Regular);
    let arc_match = if all_regular {
        Some(matches_minimizing_arc(problem, trace, &checked, &mins)?)
    } else {
        None
    };
    let classical = all_regular && arc_match == Some(true) && c11 <= problem.settings.trace.c11_max;
    Ok(ClassifyOutcome {
        classification: if classical {
            Classification::Classical
        } else {
            Classification::Inconclusive
        },
        statuses,
        windows,
        c11_estimate: c11,
        arc_match,
    })
}

/// The trace coincides with the minimizing arc through its last sample, and shares its minimizer.
fn matches_minimizing_arc(problem: &Problem, trace: &CharacteristicTrace, checked: &[usize], mins: &[Option<MinimizerSet>]) -> Result<bool> {
    let last = *checked.last().expect("non-empty");
    let end = &trace.samples[last];
    let m_end = mins[last].as_ref().expect("checked sample");
    let y = m_end.minimizers[0].y.clone();
    let p0 = problem.launch_momentum(end.t, &y, &end.x)?;
    let tol = problem.settings.trace.match_tol;
    for &i in checked {
        let s = &trace.samples[i];
        let m = mins[i].as_ref().expect("checked sample");
        if dist(&m.minimizers[0].y, &y) > m.cluster_radius {
            return Ok(false);
        }
        let x = arc_position(problem, &y, &p0, s.t)?;
        if dist(&x, &s.x) > tol * (1.0 + norm(&s.x)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Singular characteristic from a point without proximal subgradients.
pub fn singular_char_from_empty_subdiff(problem: &Problem, y0: &[f64], t_end: f64) -> Result<(CharacteristicTrace, SubdiffEstimate)> {
    if !problem.model.is_quadratic() {
        return Err(Error::Precondition("forward uniqueness needs a quadratic Hamiltonian".into()));
    }
    let est = subdiff_at(problem, y0);
    if !est.is_empty() {
        return Err(Error::Precondition(format!(
            "the proximal subdifferential at {y0:?} is not empty ({} candidates verified)",
            est.entries.len()
        )));
    }
    let trace = generalized_char(problem, 0.0, y0, t_end)?;
    let ladder = trace.ladder.as_ref().expect("initial-time traces carry a ladder");
    if trace.classification != Classification::StronglySingular {
        return Err(Error::TheoremViolation(format!(
            "trace from {y0:?} with empty proximal subdifferential classified {:?}",
            trace.classification
        )));
    }
    if !ladder.cauchy || !ladder.all_singular.iter().all(|s| *s) {
        return Err(Error::TheoremViolation(format!(
            "ladder traces from {y0:?} do not converge to one singular limit: {:?}",
            ladder.sup_distances
        )));
    }
    Ok((trace, est))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DichotomyReport {
    pub point: Vec<f64>,
    pub empty: bool,
    /// Empty case: every ladder trace is singular at every grid sample.
    pub ladder_all_singular: Option<bool>,
    /// Nonempty case: a verified candidate whose characteristic checked out as classical.
    pub classical_witness: Option<Vec<f64>>,
    pub consistent: bool,
}

/// Empty subdifferential at `y0` versus the behaviour of characteristics leaving it.
pub fn dichotomy_check(problem: &Problem, y0: &[f64]) -> Result<DichotomyReport> {
    let est = subdiff_at(problem, y0);
    if est.is_empty() {
        let trace = generalized_char_unclassified(problem, 0.0, y0, problem.horizon)?;
        let all = trace.ladder.as_ref().is_some_and(|l| l.all_singular.iter().all(|s| *s));
        return Ok(DichotomyReport {
            point: y0.to_vec(),
            empty: true,
            ladder_all_singular: Some(all),
            classical_witness: None,
            consistent: all,
        });
    }
    // Try the most robust candidates first: smallest K.
    let mut entries = est.entries.clone();
    entries.sort_by(|a, b| a.k.total_cmp(&b.k));
    let mut witness = None;
    for e in entries.iter().take(5) {
        let Some(cert) = least_certificate(problem, y0, &e.p) else {
            continue;
        };
        let tau = classical_time_bound(problem, &cert);
        let trace = classical_char_from_subgradient(problem, &cert, tau)?;
        if trace.classification == Classification::Classical {
            witness = Some(e.p.clone());
            break;
        }
    }
    Ok(DichotomyReport {
        point: y0.to_vec(),
        empty: false,
        ladder_all_singular: None,
        consistent: witness.is_some(),
        classical_witness: witness,
    })
}
