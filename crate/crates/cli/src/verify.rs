//! Acceptance runner behind `hjlab verify`.

use std::fmt::Write as _;
use std::path::Path;

use hjlab_core::action::check_action_convexity;
use hjlab_core::chartrace::{
    classical_char_from_subgradient, classical_time_bound, classify_trace, dichotomy_check, extract_subgradient_from_char, fan,
    generalized_char, Classification,
};
use hjlab_core::flow::{integrate_flow, ShootingConfig};
use hjlab_core::hamiltonian::{Coefficient, HamiltonianModel, Potential, ValidityBox};
use hjlab_core::problem::{Problem, Settings};
use hjlab_core::scenarios::{catalog, example1, example2, example3, example4, Scenario};
use hjlab_core::subdiff::{default_p_grid, k_ladder, least_certificate, uniform_k_check, NeighbourhoodSampler, ShellSampler};
use hjlab_core::value::{hopf_1d, is_singular, minimizers, solve_grid, value_at, GridSpec};
use hjlab_core::{Error, Result};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::commands::{cmd_char, cmd_solve, cmd_subdiff, stationary_trace, to_json, write_file, TraceMode};
use crate::config::{RunConfig, VerifyConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, value: f64, limit: f64, detail: String) -> Self {
        Self { name: name.into(), passed: value <= limit, value, limit, detail }
    }

    fn at_least(name: &str, value: f64, limit: f64, detail: String) -> Self {
        Self { name: name.into(), passed: value >= limit, value, limit, detail }
    }

    fn flag(name: &str, ok: bool, detail: String) -> Self {
        Self { name: name.into(), passed: ok, value: if ok { 1.0 } else { 0.0 }, limit: 1.0, detail }
    }

    fn failed(name: &str, e: &Error) -> Self {
        Self::flag(name, false, e.to_string())
    }

    /// Runs `f`, turning an error into a failed check of the same name.
    fn guard(name: &str, f: impl FnOnce() -> Result<Check>) -> Self {
        f().unwrap_or_else(|e| Self::failed(name, &e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub target: String,
    pub seed: u64,
    pub passed: bool,
    pub criteria: Vec<CriterionReport>,
}

impl VerifyReport {
    pub fn failing_checks(&self) -> Vec<String> {
        self.criteria
            .iter()
            .flat_map(|c| c.checks.iter().filter(|k| !k.passed).map(move |k| format!("{}:{}", c.id, k.name)))
            .collect()
    }

    pub fn table(&self) -> String {
        let mut s = String::new();
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        for c in &self.criteria {
            let _ = writeln!(s, "criterion {} {} {}", c.id, verdict(c.passed), c.title);
            for k in &c.checks {
                let _ = writeln!(s, "    {} {:<36} value {:>12.4e}  limit {:>10.3e}  {}", verdict(k.passed), k.name, k.value, k.limit, k.detail);
            }
        }
        let _ = writeln!(s, "overall {}", verdict(self.passed));
        s
    }
}

pub const TITLES: [&str; 8] = [
    "example1 reproduction",
    "example2 singular generation",
    "example3 weak singularity",
    "example4 fan",
    "subgradient round trip",
    "property suites",
    "dichotomy",
    "determinism",
];

struct Ctx<'a> {
    cfg: &'a RunConfig,
    tol: &'a VerifyConfig,
    settings: Settings,
    scenarios: Vec<Scenario>,
    out: &'a Path,
}

impl Ctx<'_> {
    fn problem(&self, sc: &Scenario) -> Result<Problem> {
        sc.problem(self.settings.clone())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.cfg.run.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream))
    }
}

fn selected(target: &str) -> Result<Vec<Scenario>> {
    if target == "all" {
        return Ok(catalog());
    }
    catalog()
        .into_iter()
        .find(|s| s.name == target)
        .map(|s| vec![s])
        .ok_or_else(|| Error::Config(format!("unknown scenario '{target}'")))
}

fn relevant(id: u8, names: &[String]) -> bool {
    let has = |n: &str| names.iter().any(|s| s == n);
    match id {
        1 => has("example1"),
        2 => has("example2"),
        3 => has("example3"),
        4 => has("example4"),
        5 => has("example1") || has("example4"),
        _ => true,
    }
}

/// Runs the selected criteria on `target` ("all" or a scenario name) and writes `report.json` and `report.txt`.
pub fn run(cfg: &RunConfig, target: &str, out: &Path) -> Result<VerifyReport> {
    let scenarios = selected(target)?;
    let names: Vec<String> = scenarios.iter().map(|s| s.name.clone()).collect();
    let ctx = Ctx {
        cfg,
        tol: &cfg.verify,
        settings: cfg.settings.clone(),
        scenarios,
        out,
    };
    let mut criteria = Vec::new();
    for id in cfg.criteria().into_iter().filter(|id| relevant(*id, &names)) {
        let checks = match id {
            1 => criterion1(&ctx),
            2 => criterion2(&ctx),
            3 => criterion3(&ctx),
            4 => criterion4(&ctx),
            5 => criterion5(&ctx),
            6 => criterion6(&ctx),
            7 => criterion7(&ctx),
            _ => criterion8(&ctx),
        };
        criteria.push(CriterionReport {
            id,
            title: TITLES[id as usize - 1].into(),
            passed: checks.iter().all(|c| c.passed),
            checks,
        });
    }
    let report = VerifyReport {
        target: target.into(),
        seed: cfg.run.seed,
        passed: criteria.iter().all(|c| c.passed),
        criteria,
    };
    write_file(out, "report.json", &to_json(&report))?;
    write_file(out, "report.txt", &report.table())?;
    Ok(report)
}

fn label(c: Classification) -> String {
    serde_json::to_string(&c).expect("enum serializes").trim_matches('"').to_string()
}

fn criterion1(ctx: &Ctx) -> Vec<Check> {
    let sc = example1();
    let run = || -> Result<(f64, usize)> {
        let p = ctx.problem(&sc)?;
        let grid = GridSpec { lo: vec![-2.0], hi: vec![2.0], nodes: 401 };
        let fields = solve_grid(&p, &[0.25, 0.5, 1.0], &grid)?;
        let mut err: f64 = 0.0;
        let mut singular = 0;
        for f in &fields {
            singular += f.summary().singular_count;
            for (x, u) in f.points.iter().zip(&f.u) {
                let exact = sc.oracle.value(f.t, x[0]).expect("closed form on the whole line");
                err = err.max((u - exact).abs());
            }
        }
        Ok((err, singular))
    };
    match run() {
        Ok((err, singular)) => vec![
            Check::at_most("example1-values", err, ctx.tol.value_tol, "3 times x 401 nodes on [-2, 2]".into()),
            Check::at_most("example1-no-singular-points", singular as f64, 0.0, format!("{singular} singular nodes")),
        ],
        Err(e) => vec![Check::failed("example1-values", &e)],
    }
}

fn criterion2(ctx: &Ctx) -> Vec<Check> {
    let sc = example2();
    let p = match ctx.problem(&sc) {
        Ok(p) => p,
        Err(e) => return vec![Check::failed("example2-problem", &e)],
    };
    let alpha = 1.5f64;
    let mut pair_err: f64 = 0.0;
    let mut all_singular = true;
    let mut detail = String::new();
    for t in [0.25, 0.5, 1.0] {
        match is_singular(&p, t, &[0.0]) {
            Ok((sing, mins)) => {
                let m = (t * alpha).powf(1.0 / (2.0 - alpha));
                let (lo, hi) = mins.span_1d();
                let e = if mins.multiplicity() == 2 { (lo + m).abs().max((hi - m).abs()) } else { f64::INFINITY };
                pair_err = pair_err.max(e);
                all_singular &= sing;
                let _ = write!(detail, "t={t}: [{lo:.6}, {hi:.6}] ");
            }
            Err(e) => {
                pair_err = f64::INFINITY;
                all_singular = false;
                let _ = write!(detail, "t={t}: {e} ");
            }
        }
    }
    let mut checks = vec![
        Check::at_most("example2-minimizer-pair", pair_err, ctx.tol.minimizer_tol, detail.trim_end().into()),
        Check::flag("example2-origin-singular", all_singular, "t in {0.25, 0.5, 1}".into()),
    ];
    match generalized_char(&p, 0.0, &[0.0], p.horizon) {
        Ok(tr) => {
            checks.push(Check::at_most("example2-trace-excursion", tr.max_excursion(), ctx.tol.excursion_tol, "trace from (0, 0)".into()));
            checks.push(Check::flag(
                "example2-trace-strongly-singular",
                tr.classification == Classification::StronglySingular,
                label(tr.classification),
            ));
        }
        Err(e) => checks.push(Check::failed("example2-trace-strongly-singular", &e)),
    }
    checks
}

fn criterion3(ctx: &Ctx) -> Vec<Check> {
    let sc = example3();
    let p = match ctx.problem(&sc) {
        Ok(p) => p,
        Err(e) => return vec![Check::failed("example3-problem", &e)],
    };
    let values = Check::guard("example3-origin-values", || {
        let mut worst: f64 = 0.0;
        for t in [0.1, 0.25, 0.4] {
            worst = worst.max(value_at(&p, t, &[0.0])?.u.abs());
        }
        Ok(Check::at_most("example3-origin-values", worst, ctx.tol.origin_value_tol, "t in {0.1, 0.25, 0.4}".into()))
    });
    let s = &p.settings.subdiff;
    let ys = NeighbourhoodSampler::from_settings(s);
    let cert = ShellSampler::from_settings(s);
    let grid = default_p_grid(&p);
    let ladder = k_ladder(ctx.tol.uniform_k_max);
    let reports: Vec<_> = ladder
        .par_iter()
        .map(|&k| uniform_k_check(p.datum.as_ref(), &[0.0], 0.5, k, &ys, &grid, &cert))
        .collect();
    let held = reports.iter().filter(|r| r.ok || r.witness_y.is_none()).count();
    let witnesses: Vec<String> = reports
        .iter()
        .map(|r| format!("K={}: {}", r.k, r.witness_y.as_ref().map_or("none".into(), |w| format!("{:.3e}", w[0]))))
        .collect();
    let uniform = Check::at_most("example3-uniform-k-fails", held as f64, 0.0, witnesses.join("; "));
    let stationary = Check::guard("example3-stationary-weakly-singular", || {
        let tr = stationary_trace(&p, 0.0, &[0.0], p.horizon)?;
        let out = classify_trace(&p, &tr, p.settings.trace.window)?;
        let hits = out.windows.iter().filter(|w| w.hit.is_some()).count();
        Ok(Check::flag(
            "example3-stationary-weakly-singular",
            out.classification == Classification::WeaklySingular && hits == out.windows.len(),
            format!("{}, singular points in {hits}/{} windows", label(out.classification), out.windows.len()),
        ))
    });
    vec![values, uniform, stationary]
}

fn criterion4(ctx: &Ctx) -> Vec<Check> {
    let sc = example4();
    let p = match ctx.problem(&sc) {
        Ok(p) => p,
        Err(e) => return vec![Check::failed("example4-problem", &e)],
    };
    let p0s = [-1.0, -0.9, -0.5, -0.2, -0.1];
    let members = match fan(&p, &[0.0], &p0s.iter().map(|v| vec![*v]).collect::<Vec<_>>()) {
        Ok(m) => m,
        Err(e) => return vec![Check::failed("example4-fan", &e)],
    };
    let life = |q: f64| members.iter().find(|m| m.p0[0] == q).and_then(|m| m.lifetime);
    // Unique minimizer y = 0 along x = p0 t strictly before the lifetime.
    let verified = Check::guard("example4-fan-unique-minimizers", || {
        let mut failures = 0;
        let mut detail = Vec::new();
        for q in [-1.0, -0.5, -0.1] {
            let Some(ts) = life(q) else {
                failures += 1;
                detail.push(format!("p0={q}: no lifetime"));
                continue;
            };
            let t_min = p.settings.search.t_min;
            for j in 1..20 {
                let t = (ts * j as f64 / 20.0).max(t_min);
                let m = minimizers(&p, t, &[q * t])?;
                if m.multiplicity() != 1 || m.minimizers[0].y[0].abs() > m.cluster_radius {
                    failures += 1;
                }
            }
            detail.push(format!("p0={q}: t*={ts:.6}"));
        }
        Ok(Check::at_most("example4-fan-unique-minimizers", failures as f64, 0.0, detail.join(", ")))
    });
    let oracle = {
        let err = p0s.iter().map(|&q| life(q).map_or(f64::INFINITY, |t| (t + 2.0 * q).abs())).fold(0.0, f64::max);
        Check::at_most("example4-lifetimes-match-tie-oracle", err, ctx.tol.lifetime_tol, "t*(p0) = -2 p0".into())
    };
    let ordering = match (life(-0.2), life(-0.5), life(-0.9)) {
        (Some(a), Some(b), Some(c)) => Check::flag(
            "example4-lifetime-ordering",
            a < b && b < c,
            format!("t*(-0.2)={a:.6} < t*(-0.5)={b:.6} < t*(-0.9)={c:.6}"),
        ),
        _ => Check::flag("example4-lifetime-ordering", false, "missing lifetime".into()),
    };
    let trace = Check::guard("example4-zero-speed-strongly-singular", || {
        let tr = generalized_char(&p, 0.0, &[0.0], p.horizon)?;
        Ok(Check::flag(
            "example4-zero-speed-strongly-singular",
            tr.classification == Classification::StronglySingular,
            format!("{}, end x = {:.6e}", label(tr.classification), tr.end().x[0]),
        ))
    });
    vec![verified, oracle, ordering, trace]
}

fn round_trip(ctx: &Ctx, sc: &Scenario, p0s: &[f64]) -> Result<f64> {
    let p = ctx.problem(sc)?;
    let errs = p0s
        .par_iter()
        .map(|&q| {
            let cert = least_certificate(&p, &[0.0], &[q])
                .ok_or_else(|| Error::Inconsistency(format!("{q} is not certified at 0")))?;
            let tr = classical_char_from_subgradient(&p, &cert, classical_time_bound(&p, &cert))?;
            if tr.classification != Classification::Classical {
                return Err(Error::Inconsistency(format!("trace for {q} is {}", label(tr.classification))));
            }
            Ok((extract_subgradient_from_char(&p, &tr)?.p0[0] - q).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(errs.into_iter().fold(0.0, f64::max))
}

fn criterion5(ctx: &Ctx) -> Vec<Check> {
    let names: Vec<&str> = ctx.scenarios.iter().map(|s| s.name.as_str()).collect();
    let mut checks = Vec::new();
    if names.contains(&"example1") {
        let ps: Vec<f64> = (0..21).map(|i| -1.0 + 0.1 * i as f64).collect();
        checks.push(Check::guard("example1-round-trip", || {
            Ok(Check::at_most("example1-round-trip", round_trip(ctx, &example1(), &ps)?, ctx.tol.round_trip_tol, "21 momenta in [-1, 1]".into()))
        }));
    }
    if names.contains(&"example4") {
        let ps: Vec<f64> = (0..9).map(|i| -1.0 + 0.1 * i as f64).collect();
        checks.push(Check::guard("example4-round-trip", || {
            Ok(Check::at_most("example4-round-trip", round_trip(ctx, &example4(), &ps)?, ctx.tol.round_trip_tol, "9 momenta in [-1, -0.2]".into()))
        }));
    }
    checks
}

fn duality_models() -> Result<Vec<HamiltonianModel>> {
    let plane = ValidityBox::symmetric(2, 10.0, 1.0);
    let a = DMatrix::from_row_slice(2, 2, &[1.44, 0.48, 0.48, 0.8]);
    Ok(vec![
        HamiltonianModel::eikonal(ValidityBox::symmetric(1, 10.0, 1.0)),
        HamiltonianModel::quadratic(plane.clone(), Coefficient::Constant(a), Potential::Harmonic { omega: 2.0 })?,
        HamiltonianModel::quadratic(plane, Coefficient::Modulated { base: 1.0, amplitude: 0.4 }, Potential::Linear(vec![0.5, -1.0]))?,
    ])
}

fn legendre_check(ctx: &Ctx) -> Result<Check> {
    let models = duality_models()?;
    let mut rng = ctx.rng(61);
    let mut worst: f64 = 0.0;
    for i in 0..ctx.tol.duality_samples {
        let m = &models[i % models.len()];
        let t = rng.random_range(0.0..1.0);
        let x: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-5.0..5.0)).collect();
        let q: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-8.0..8.0)).collect();
        let l = m.legendre(t, &x, &q)?;
        let pq: f64 = l.maximizer.iter().zip(&q).map(|(a, b)| a * b).sum();
        let r = (l.lagrangian_value + m.eval_h(t, &x, &l.maximizer)? - pq).abs() / (1.0 + pq.abs());
        worst = worst.max(r);
    }
    Ok(Check::at_most(
        "legendre-duality",
        worst,
        ctx.tol.duality_tol,
        format!("{} random triples, residual relative to 1 + |p.q|", ctx.tol.duality_samples),
    ))
}

fn energy_checks(ctx: &Ctx) -> Result<Vec<Check>> {
    let mut rng = ctx.rng(62);
    // One fixed stiff case, then random ones.
    let mut cases = vec![(25.0, 0.2, 0.3)];
    for _ in 0..4 {
        cases.push((rng.random_range(10.0..25.0), rng.random_range(0.05..0.2), rng.random_range(0.0..std::f64::consts::TAU)));
    }
    let (mut drift, mut ratio) = (0.0f64, f64::INFINITY);
    for (omega, amp, phase) in cases {
        let m = HamiltonianModel::quadratic(
            ValidityBox::symmetric(1, 5.0, 1.0),
            Coefficient::Constant(DMatrix::identity(1, 1)),
            Potential::Harmonic { omega },
        )?;
        let (x0, p0) = (amp * f64::cos(phase), amp * omega * f64::sin(phase));
        let coarse = integrate_flow(&m, 0.0, &[x0], &[p0], 1.0, 1000)?.energy_drift(&m)?;
        let fine = integrate_flow(&m, 0.0, &[x0], &[p0], 1.0, 2000)?.energy_drift(&m)?;
        drift = drift.max(coarse);
        ratio = ratio.min(coarse / fine);
    }
    Ok(vec![
        Check::at_most("energy-drift", drift, ctx.tol.energy_drift_tol, "harmonic oscillator, unit time, dt = 1e-3".into()),
        Check::at_least("energy-order", ratio, ctx.tol.energy_order_ratio, "drift reduction when dt is halved".into()),
    ])
}

fn convexity_check(ctx: &Ctx) -> Result<Check> {
    let m = HamiltonianModel::eikonal(ValidityBox::symmetric(1, 10.0, 1.0));
    let mut rng = ctx.rng(63);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let t = rng.random_range(0.05..1.0);
        let x = rng.random_range(-3.0..3.0);
        worst = worst.min(check_action_convexity(&m, &ShootingConfig::default(), t, &[x], t, 0.4, 9)?.worst_violation);
    }
    Ok(Check::at_least("action-convexity", worst, -ctx.tol.convexity_tol, "eikonal, c0 = 0.4, 20 random (t, x)".into()))
}

fn semiconcavity_check(ctx: &Ctx) -> Result<Check> {
    let mut worst = f64::NEG_INFINITY;
    for sc in &ctx.scenarios {
        let p = ctx.problem(sc)?;
        let grid = GridSpec { lo: vec![sc.smoke_x.0], hi: vec![sc.smoke_x.1], nodes: 201 };
        let h = 2.0 * (sc.smoke_x.1 - sc.smoke_x.0) / 200.0;
        for f in solve_grid(&p, &[sc.smoke_t0, 0.5 * sc.horizon, sc.horizon], &grid)? {
            let c = 1.0 / f.t;
            for i in 2..f.u.len() - 2 {
                worst = worst.max(f.u[i + 2] - 2.0 * f.u[i] + f.u[i - 2] - c * h * h);
            }
        }
    }
    Ok(Check::at_most(
        "semiconcavity",
        worst,
        ctx.tol.semiconcavity_tol,
        "second difference minus h^2 / t, h = 2 cells".into(),
    ))
}

fn hopf_check(ctx: &Ctx) -> Result<Check> {
    let mut rng = ctx.rng(64);
    let problems = ctx.scenarios.iter().map(|sc| ctx.problem(sc)).collect::<Result<Vec<_>>>()?;
    let n = ctx.scenarios.len();
    let samples: Vec<(usize, f64, f64)> = (0..ctx.tol.hopf_samples)
        .map(|i| {
            let k = i % n;
            let sc = &ctx.scenarios[k];
            let t_min = problems[k].settings.search.t_min;
            (k, rng.random_range(t_min..sc.horizon), rng.random_range(sc.smoke_x.0..sc.smoke_x.1))
        })
        .collect();
    let errs = samples
        .par_iter()
        .map(|&(k, t, x)| {
            let p = &problems[k];
            let r = p.search_radius(t);
            let dense = hopf_1d(&ctx.scenarios[k].datum, t, x, (x - r, x + r), 200_001);
            Ok((value_at(p, t, &[x])?.u - dense).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Check::at_most(
        "hopf-equivalence",
        errs.into_iter().fold(0.0, f64::max),
        ctx.tol.hopf_tol,
        format!("{} random (t, x) against dense minimization", ctx.tol.hopf_samples),
    ))
}

fn criterion6(ctx: &Ctx) -> Vec<Check> {
    let mut checks = vec![Check::guard("legendre-duality", || legendre_check(ctx))];
    match energy_checks(ctx) {
        Ok(c) => checks.extend(c),
        Err(e) => checks.push(Check::failed("energy-drift", &e)),
    }
    checks.push(Check::guard("action-convexity", || convexity_check(ctx)));
    checks.push(Check::guard("semiconcavity", || semiconcavity_check(ctx)));
    checks.push(Check::guard("hopf-equivalence", || hopf_check(ctx)));
    checks
}

fn criterion7(ctx: &Ctx) -> Vec<Check> {
    ctx.scenarios
        .iter()
        .map(|sc| {
            let name = format!("dichotomy-{}", sc.name);
            Check::guard(&name, || {
                let p = ctx.problem(sc)?;
                let reports = [-0.5, 0.0, 0.5]
                    .par_iter()
                    .map(|&y| dichotomy_check(&p, &[y]))
                    .collect::<Result<Vec<_>>>()?;
                let bad = reports.iter().filter(|r| !r.consistent).count();
                let detail = reports
                    .iter()
                    .map(|r| format!("y0={}: {}", r.point[0], if r.empty { "empty" } else { "nonempty" }))
                    .collect::<Vec<_>>()
                    .join(", ");
                Ok(Check::at_most(&name, bad as f64, 0.0, detail))
            })
        })
        .collect()
}

/// Produces the artifacts of `solve`, `char` and `subdiff` into `dir` using `workers` threads.
fn artifacts(ctx: &Ctx, sc: &Scenario, dir: &Path, workers: usize) -> Result<()> {
    let mut cfg = ctx.cfg.clone();
    cfg.problem.scenario = sc.name.clone();
    cfg.problem.alpha = None;
    cfg.problem.inline = None;
    cfg.grid.times = vec![0.5 * sc.horizon];
    cfg.grid.nodes = Some(41);
    cfg.grid.lo = None;
    cfg.grid.hi = None;
    let r = cfg.resolve()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    pool.install(|| {
        cmd_solve(&cfg, &r, dir)?;
        cmd_char(&cfg, &r, &[0.0], &TraceMode::Generalized, dir)?;
        cmd_subdiff(&cfg, &r, &[0.0], dir)?;
        Ok(())
    })
}

/// Names and contents of every file below `dir`, sorted.
pub fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>> {
    let mut files = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| Error::Config(format!("{}: {e}", dir.display())))?;
    for e in entries {
        let path = e.map_err(|e| Error::Config(e.to_string()))?.path();
        if path.is_file() {
            let bytes = std::fs::read(&path).map_err(|e| Error::Config(e.to_string()))?;
            files.push((path.file_name().unwrap().to_string_lossy().into_owned(), bytes));
        }
    }
    files.sort();
    Ok(files)
}

fn criterion8(ctx: &Ctx) -> Vec<Check> {
    let sc = ctx.scenarios.iter().find(|s| s.name == "example2").unwrap_or(&ctx.scenarios[0]).clone();
    vec![Check::guard("artifacts-byte-identical", || {
        let base = ctx.out.join("determinism");
        let (a, b) = (base.join("workers-1"), base.join("workers-4"));
        artifacts(ctx, &sc, &a, 1)?;
        artifacts(ctx, &sc, &b, 4)?;
        let (sa, sb) = (snapshot(&a)?, snapshot(&b)?);
        let differing: Vec<&str> = sa
            .iter()
            .zip(&sb)
            .filter(|(x, y)| x != y)
            .map(|(x, _)| x.0.as_str())
            .collect();
        let ok = sa.len() == sb.len() && differing.is_empty() && !sa.is_empty();
        Ok(Check::flag(
            "artifacts-byte-identical",
            ok,
            format!("{}: {} files from 1 and 4 workers{}", sc.name, sa.len(), if differing.is_empty() { String::new() } else { format!(", differing {differing:?}") }),
        ))
    })]
}

