//! `solve`, `char`, `subdiff` and `classify`.

use std::path::Path;

use hjlab_core::chartrace::{
    classical_char_from_subgradient, classical_time_bound, classify_trace, generalized_char_unclassified, CharacteristicTrace,
    Classification, ClassifyOutcome, Origin, SampleStatus, TraceSample,
};
use hjlab_core::problem::Problem;
use hjlab_core::subdiff::{
    least_certificate, subdiff_at, test_proximal_subgradient, ProximalCertificate, ShellSampler, SubdiffEstimate,
};
use hjlab_core::value::{plot_script, solve_grid, FieldSummary, GridSpec};
use hjlab_core::{Error, Result};
use serde::Serialize;

use crate::config::{RunConfig, Resolved};

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("report types serialize");
    s.push('\n');
    s
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolveSummary {
    pub scenario: String,
    pub grid: GridSpec,
    pub files: Vec<String>,
    pub fields: Vec<FieldSummary>,
}

pub fn grid_for(cfg: &RunConfig, r: &Resolved) -> Result<GridSpec> {
    let dim = r.problem.dim();
    let dom = r.problem.model.domain();
    let default_lo = if dim == 1 { vec![r.smoke_x.0] } else { dom.lo.iter().zip(&dom.hi).map(|(a, b)| 0.75 * a + 0.25 * b).collect() };
    let default_hi = if dim == 1 { vec![r.smoke_x.1] } else { dom.lo.iter().zip(&dom.hi).map(|(a, b)| 0.25 * a + 0.75 * b).collect() };
    let grid = GridSpec {
        lo: cfg.grid.lo.clone().unwrap_or(default_lo),
        hi: cfg.grid.hi.clone().unwrap_or(default_hi),
        nodes: cfg.grid.nodes.unwrap_or(201),
    };
    if grid.lo.len() != dim || grid.hi.len() != dim {
        return Err(Error::Config(format!("grid bounds must have {dim} components")));
    }
    Ok(grid)
}

pub fn cmd_solve(cfg: &RunConfig, r: &Resolved, out: &Path) -> Result<SolveSummary> {
    let grid = grid_for(cfg, r)?;
    let times = if cfg.grid.times.is_empty() { vec![0.5 * r.problem.horizon] } else { cfg.grid.times.clone() };
    let fields = solve_grid(&r.problem, &times, &grid)?;
    let mut files = Vec::new();
    for f in &fields {
        let name = format!("u_t{}.csv", f.t);
        write_file(out, &name, &f.to_csv())?;
        files.push(name);
    }
    write_file(out, "plot.gp", &plot_script(&files, r.problem.dim()))?;
    let summary = SolveSummary {
        scenario: r.name.clone(),
        grid,
        files,
        fields: fields.iter().map(|f| f.summary()).collect(),
    };
    write_file(out, "summary.json", &to_json(&summary))?;
    Ok(summary)
}

/// How a trace is produced.
#[derive(Clone, Debug, PartialEq)]
pub enum TraceMode {
    Generalized,
    Classical(Vec<f64>),
    /// The constant curve at the origin.
    Stationary,
}

impl TraceMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim() {
            "generalized" => Ok(Self::Generalized),
            "stationary" => Ok(Self::Stationary),
            other => {
                let p = other
                    .strip_prefix("classical:")
                    .ok_or_else(|| Error::Config(format!("unknown trace mode '{other}'")))?;
                let p0 = p
                    .split(',')
                    .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad momentum '{v}': {e}"))))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Self::Classical(p0))
            }
        }
    }
}

impl std::fmt::Display for TraceMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Generalized => write!(f, "generalized"),
            Self::Stationary => write!(f, "stationary"),
            Self::Classical(p) => {
                let parts: Vec<String> = p.iter().map(|v| v.to_string()).collect();
                write!(f, "classical:{}", parts.join(","))
            }
        }
    }
}

/// The constant curve `x0` sampled on the trace grid of `[t_start, t_end]`.
pub fn stationary_trace(problem: &Problem, t_start: f64, x0: &[f64], t_end: f64) -> Result<CharacteristicTrace> {
    let steps = problem.settings.trace.steps;
    if !(t_end > t_start) {
        return Err(Error::Precondition(format!("empty time interval [{t_start}, {t_end}]")));
    }
    let dt = (t_end - t_start) / steps as f64;
    let samples = (0..=steps)
        .map(|k| TraceSample {
            t: if k == steps { t_end } else { t_start + dt * k as f64 },
            x: x0.to_vec(),
            p: None,
            status: SampleStatus::Unknown,
        })
        .collect();
    Ok(CharacteristicTrace {
        origin: Origin { t: t_start, x: x0.to_vec() },
        dt,
        samples,
        classification: Classification::Inconclusive,
        exit_time: None,
        failure_time: None,
        ladder: None,
    })
}

fn classical_certificate(problem: &Problem, y0: &[f64], p0: &[f64]) -> Result<ProximalCertificate> {
    if p0.len() != problem.dim() {
        return Err(Error::Config(format!("momentum needs {} components", problem.dim())));
    }
    least_certificate(problem, y0, p0).ok_or_else(|| {
        Error::Precondition(format!(
            "{p0:?} is not a proximal subgradient at {y0:?} for any K up to {}",
            problem.settings.subdiff.k_max
        ))
    })
}

/// Builds the requested trace without classification, except classical traces which verify themselves.
pub fn build_trace(cfg: &RunConfig, problem: &Problem, origin: &[f64], mode: &TraceMode) -> Result<CharacteristicTrace> {
    if origin.len() != problem.dim() {
        return Err(Error::Config(format!("origin needs {} components", problem.dim())));
    }
    let t_end = cfg.trace.t_end.unwrap_or(problem.horizon);
    match mode {
        TraceMode::Generalized => generalized_char_unclassified(problem, cfg.trace.t_start, origin, t_end),
        TraceMode::Stationary => stationary_trace(problem, cfg.trace.t_start, origin, t_end),
        TraceMode::Classical(p0) => {
            let cert = classical_certificate(problem, origin, p0)?;
            let tau = cfg.trace.tau.unwrap_or_else(|| classical_time_bound(problem, &cert));
            classical_char_from_subgradient(problem, &cert, tau)
        }
    }
}

/// Window-probe classification; classical traces keep their own verdict unless `probe_classical`.
fn classify(
    problem: &Problem,
    trace: CharacteristicTrace,
    mode: &TraceMode,
    probe_classical: bool,
) -> Result<(CharacteristicTrace, Option<ClassifyOutcome>)> {
    if matches!(mode, TraceMode::Classical(_)) && !probe_classical {
        return Ok((trace, None));
    }
    let outcome = classify_trace(problem, &trace, problem.settings.trace.window)?;
    Ok((outcome.apply(trace), Some(outcome)))
}

pub fn cmd_char(cfg: &RunConfig, r: &Resolved, origin: &[f64], mode: &TraceMode, out: &Path) -> Result<CharacteristicTrace> {
    let trace = build_trace(cfg, &r.problem, origin, mode)?;
    let (trace, _) = classify(&r.problem, trace, mode, false)?;
    write_file(out, "trace.json", &format!("{}\n", trace.to_json()))?;
    write_file(out, "trace.csv", &trace.to_csv())?;
    Ok(trace)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClassificationReport {
    pub scenario: String,
    pub origin: Vec<f64>,
    pub mode: String,
    pub classification: Classification,
    pub outcome: Option<ClassifyOutcome>,
    pub trace: CharacteristicTrace,
}

pub fn cmd_classify(cfg: &RunConfig, r: &Resolved, origin: &[f64], mode: &TraceMode, out: &Path) -> Result<ClassificationReport> {
    let trace = build_trace(cfg, &r.problem, origin, mode)?;
    let (trace, outcome) = classify(&r.problem, trace, mode, true)?;
    let report = ClassificationReport {
        scenario: r.name.clone(),
        origin: origin.to_vec(),
        mode: mode.to_string(),
        classification: trace.classification,
        outcome,
        trace,
    };
    write_file(out, "classification.json", &to_json(&report))?;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeReport {
    pub p: Vec<f64>,
    /// One certificate per ladder constant.
    pub certificates: Vec<ProximalCertificate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubdiffReport {
    pub scenario: String,
    pub point: Vec<f64>,
    pub empty: bool,
    /// Range of verified momenta along the first axis.
    pub interval: Option<(f64, f64)>,
    pub estimate: SubdiffEstimate,
    pub probes: Vec<ProbeReport>,
}

pub fn cmd_subdiff(cfg: &RunConfig, r: &Resolved, point: &[f64], out: &Path) -> Result<SubdiffReport> {
    let p = &r.problem;
    if point.len() != p.dim() {
        return Err(Error::Config(format!("point needs {} components", p.dim())));
    }
    p.model.domain().check(0.0, point)?;
    let estimate = subdiff_at(p, point);
    let s = &p.settings.subdiff;
    let sampler = ShellSampler::from_settings(s);
    let probes = cfg
        .subdiff
        .probe_p
        .iter()
        .filter(|q| q.len() == p.dim())
        .map(|q| ProbeReport {
            p: q.clone(),
            certificates: estimate
                .k_ladder
                .iter()
                .map(|&k| test_proximal_subgradient(p.datum.as_ref(), point, q, k, s.cert_radius, &sampler))
                .collect(),
        })
        .collect();
    let report = SubdiffReport {
        scenario: r.name.clone(),
        point: point.to_vec(),
        empty: estimate.is_empty(),
        interval: estimate.span_1d(),
        estimate,
        probes,
    };
    write_file(out, "subdiff.json", &to_json(&report))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_parse() {
        assert_eq!(TraceMode::parse("generalized").unwrap(), TraceMode::Generalized);
        assert_eq!(TraceMode::parse("classical:0.7").unwrap(), TraceMode::Classical(vec![0.7]));
        assert_eq!(TraceMode::parse("classical:1, -2").unwrap(), TraceMode::Classical(vec![1.0, -2.0]));
        assert!(TraceMode::parse("classical:x").is_err());
        assert!(TraceMode::parse("sideways").is_err());
        assert_eq!(TraceMode::Classical(vec![-0.5]).to_string(), "classical:-0.5");
    }
}
