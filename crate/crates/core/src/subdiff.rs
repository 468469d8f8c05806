//! Proximal subgradient tests for the initial datum.
//!
//! A vector `p` is a proximal `K`-subgradient of `u0` at `y0` on `B_r(y0)` when
//! `u0(y) - u0(y0) - <p, y - y0> + K/2 |y - y0|^2 >= 0` for every `y` in the ball.

use serde::{Deserialize, Serialize};

use crate::datum::InitialDatum;
use crate::problem::{Problem, SubdiffSettings};
use crate::vecops::{axpy, dot, norm, sub};

/// Relative size of the rounding allowance in the minorant inequality.
const SLACK_REL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Verified,
    Refuted,
}

/// Worst sample of a certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    /// Smallest value of the minorant gap (negative means violated).
    pub gap: f64,
    pub slack: f64,
}

impl Witness {
    pub fn violation(&self) -> f64 {
        (-self.gap).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProximalCertificate {
    pub point: Vec<f64>,
    pub p: Vec<f64>,
    pub k: f64,
    pub r: f64,
    pub verdict: Verdict,
    pub witness: Witness,
    pub samples: usize,
    pub sampler: String,
}

impl ProximalCertificate {
    pub fn verified(&self) -> bool {
        self.verdict == Verdict::Verified
    }
}

/// Offsets on absolute dyadic shells `2^k (1 + i/m)`, nested in the radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShellSampler {
    pub per_shell: usize,
    pub finest_exponent: i32,
}

impl Default for ShellSampler {
    fn default() -> Self {
        Self {
            per_shell: 8,
            finest_exponent: -200,
        }
    }
}

pub(crate) fn directions(dim: usize) -> Vec<Vec<f64>> {
    let mut dirs = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[i] = s;
            dirs.push(e);
        }
    }
    let c = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..dim {
        for j in 0..i {
            for (a, b) in [(c, c), (c, -c), (-c, c), (-c, -c)] {
                let mut e = vec![0.0; dim];
                e[i] = a;
                e[j] = b;
                dirs.push(e);
            }
        }
    }
    dirs
}

impl ShellSampler {
    pub fn from_settings(s: &SubdiffSettings) -> Self {
        Self {
            per_shell: s.per_shell,
            finest_exponent: s.finest_exponent,
        }
    }

    /// Every offset of norm at most `r`; the set for a smaller radius is a subset.
    pub fn offsets(&self, dim: usize, r: f64) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        if !(r > 0.0) {
            return out;
        }
        let top = r.log2().floor() as i32;
        let m = self.per_shell.max(1);
        let dirs = directions(dim);
        for k in self.finest_exponent..=top {
            for i in 0..m {
                let rho = 2f64.powi(k) * (1.0 + i as f64 / m as f64);
                if rho > r {
                    break;
                }
                out.extend(dirs.iter().map(|d| d.iter().map(|v| v * rho).collect::<Vec<f64>>()));
            }
        }
        out
    }

    pub fn describe(&self) -> String {
        format!(
            "dyadic shells 2^k(1+i/{}) for k >= {}, axis and diagonal directions",
            self.per_shell, self.finest_exponent
        )
    }
}

/// Points `y0 + r 2^-j (1 - i/(2m)) e` used to scan a neighbourhood of `y0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighbourhoodSampler {
    pub shells: usize,
    pub per_shell: usize,
}

impl Default for NeighbourhoodSampler {
    fn default() -> Self {
        Self {
            shells: 40,
            per_shell: 4,
        }
    }
}

impl NeighbourhoodSampler {
    pub fn from_settings(s: &SubdiffSettings) -> Self {
        Self {
            shells: s.y_shells,
            per_shell: s.y_per_shell,
        }
    }

    pub fn points(&self, y0: &[f64], radius: f64) -> Vec<Vec<f64>> {
        let mut out = vec![y0.to_vec()];
        let m = self.per_shell.max(1);
        let dirs = directions(y0.len());
        for j in 0..=self.shells {
            for i in 0..m {
                let rho = radius * 2f64.powi(-(j as i32)) * (1.0 - i as f64 / (2 * m) as f64);
                out.extend(dirs.iter().map(|d| axpy(y0, rho, d)));
            }
        }
        out
    }
}

/// Checks the minorant inequality at every sampled offset.
pub fn test_proximal_subgradient(
    u0: &dyn InitialDatum,
    y0: &[f64],
    p0: &[f64],
    k: f64,
    r: f64,
    sampler: &ShellSampler,
) -> ProximalCertificate {
    let offsets = sampler.offsets(y0.len(), r);
    certify(u0, y0, p0, k, r, &offsets, sampler.describe())
}

fn certify(
    u0: &dyn InitialDatum,
    y0: &[f64],
    p0: &[f64],
    k: f64,
    r: f64,
    offsets: &[Vec<f64>],
    sampler: String,
) -> ProximalCertificate {
    let base = u0.eval(y0);
    let mut worst = Witness {
        point: y0.to_vec(),
        gap: 0.0,
        slack: SLACK_REL * base.abs(),
    };
    let mut refuted = false;
    for off in offsets {
        let y: Vec<f64> = y0.iter().zip(off).map(|(a, b)| a + b).collect();
        let d = sub(&y, y0);
        let uy = u0.eval(&y);
        let lin = dot(p0, &d);
        let quad = 0.5 * k * dot(&d, &d);
        let gap = uy - base - lin + quad;
        let slack = SLACK_REL * (uy.abs() + base.abs() + lin.abs() + quad);
        let violated = gap < -slack;
        // Report the most violated sample, otherwise the tightest one.
        let better = if refuted {
            violated && gap + slack < worst.gap + worst.slack
        } else {
            violated || gap < worst.gap
        };
        if better {
            worst = Witness { point: y, gap, slack };
        }
        refuted |= violated;
    }
    ProximalCertificate {
        point: y0.to_vec(),
        p: p0.to_vec(),
        k,
        r,
        verdict: if refuted { Verdict::Refuted } else { Verdict::Verified },
        witness: worst,
        samples: offsets.len(),
        sampler,
    }
}

/// `{1, 4, 16, ...}` up to and including `k_max`.
pub fn k_ladder(k_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 1.0;
    while k < k_max {
        out.push(k);
        k *= 4.0;
    }
    out.push(k_max);
    out
}

/// Uniform momentum grid on the cube `[-radius, radius]^n` with `nodes` per axis.
pub fn momentum_grid(dim: usize, radius: f64, nodes: usize) -> Vec<Vec<f64>> {
    let nodes = nodes.max(2);
    let total = nodes.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            (0..dim)
                .map(|_| {
                    let i = idx % nodes;
                    idx /= nodes;
                    -radius + 2.0 * radius * i as f64 / (nodes - 1) as f64
                })
                .collect()
        })
        .collect()
}

/// One-sided and central difference quotients of `u0` at `y` on several scales.
pub fn slope_candidates(u0: &dyn InitialDatum, y: &[f64]) -> Vec<Vec<f64>> {
    let dim = y.len();
    let scale = 1.0 + norm(y);
    let mut steps = vec![1e-7 * scale, 1e-10 * scale];
    let ny = norm(y);
    if ny > 0.0 {
        steps.push(1e-4 * ny);
    }
    let f0 = u0.eval(y);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for h in steps {
        let mut fwd = vec![0.0; dim];
        let mut bwd = vec![0.0; dim];
        let mut cen = vec![0.0; dim];
        for i in 0..dim {
            let mut yp = y.to_vec();
            let mut ym = y.to_vec();
            yp[i] += h;
            ym[i] -= h;
            let (fp, fm) = (u0.eval(&yp), u0.eval(&ym));
            let (hp, hm) = (yp[i] - y[i], y[i] - ym[i]);
            fwd[i] = (fp - f0) / hp;
            bwd[i] = (f0 - fm) / hm;
            cen[i] = (fp - fm) / (hp + hm);
        }
        for c in [cen, fwd, bwd] {
            if c.iter().all(|v| v.is_finite()) && !out.contains(&c) {
                out.push(c);
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CandidateSource {
    Grid,
    Slope,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubdiffEntry {
    pub p: Vec<f64>,
    /// Least verifying constant in the ladder.
    pub k: f64,
    pub source: CandidateSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubdiffEstimate {
    pub point: Vec<f64>,
    pub radius: f64,
    pub k_ladder: Vec<f64>,
    pub entries: Vec<SubdiffEntry>,
    /// Grid momenta refuted at the largest ladder constant.
    pub refuted_grid: Vec<Vec<f64>>,
    pub sampler: String,
}

impl SubdiffEstimate {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Verified grid momenta only.
    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        self.entries
            .iter()
            .filter(|e| e.source == CandidateSource::Grid)
            .map(|e| e.p.clone())
            .collect()
    }

    /// Range of all verified momenta along the first axis.
    pub fn span_1d(&self) -> Option<(f64, f64)> {
        if self.entries.is_empty() {
            return None;
        }
        Some(self.entries.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), e| {
            (lo.min(e.p[0]), hi.max(e.p[0]))
        }))
    }
}

/// Grid momenta and local slopes verified for some `K` in the ladder up to `k_max`.
pub fn estimate_proximal_subdifferential(
    u0: &dyn InitialDatum,
    y0: &[f64],
    k_max: f64,
    r: f64,
    p_grid: &[Vec<f64>],
    sampler: &ShellSampler,
) -> SubdiffEstimate {
    let ladder = k_ladder(k_max);
    let offsets = sampler.offsets(y0.len(), r);
    let desc = sampler.describe();
    let mut entries: Vec<SubdiffEntry> = Vec::new();
    let mut refuted_grid = Vec::new();
    let candidates = p_grid
        .iter()
        .map(|p| (p.clone(), CandidateSource::Grid))
        .chain(slope_candidates(u0, y0).into_iter().map(|p| (p, CandidateSource::Slope)));
    for (p, source) in candidates {
        if entries.iter().any(|e| norm(&sub(&e.p, &p)) <= 1e-12 * (1.0 + norm(&p))) {
            continue;
        }
        // Refutation at the top of the ladder implies refutation below it.
        if !certify(u0, y0, &p, k_max, r, &offsets, desc.clone()).verified() {
            if source == CandidateSource::Grid {
                refuted_grid.push(p);
            }
            continue;
        }
        let k = ladder
            .iter()
            .copied()
            .find(|&k| certify(u0, y0, &p, k, r, &offsets, desc.clone()).verified())
            .unwrap_or(k_max);
        entries.push(SubdiffEntry { p, k, source });
    }
    SubdiffEstimate {
        point: y0.to_vec(),
        radius: r,
        k_ladder: ladder,
        entries,
        refuted_grid,
        sampler: desc,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformReport {
    pub ok: bool,
    pub witness_y: Option<Vec<f64>>,
    pub checked: usize,
    pub k: f64,
    pub radius: f64,
}

/// Whether every sampled `y` near `y0` has some verified proximal `K`-subgradient.
pub fn uniform_k_check(
    u0: &dyn InitialDatum,
    y0: &[f64],
    radius: f64,
    k: f64,
    y_sampler: &NeighbourhoodSampler,
    p_grid: &[Vec<f64>],
    cert_sampler: &ShellSampler,
) -> UniformReport {
    let offsets = cert_sampler.offsets(y0.len(), radius);
    let desc = cert_sampler.describe();
    let points = y_sampler.points(y0, radius);
    for (n, y) in points.iter().enumerate() {
        let ok = slope_candidates(u0, y)
            .iter()
            .chain(p_grid)
            .any(|p| certify(u0, y, p, k, radius, &offsets, desc.clone()).verified());
        if !ok {
            return UniformReport {
                ok: false,
                witness_y: Some(y.clone()),
                checked: n + 1,
                k,
                radius,
            };
        }
    }
    UniformReport {
        ok: true,
        witness_y: None,
        checked: points.len(),
        k,
        radius,
    }
}

/// Momentum grid over the cube of half-width `1.25 L0` used by default.
pub fn default_p_grid(problem: &Problem) -> Vec<Vec<f64>> {
    let l0 = problem.datum.lipschitz(problem.model.domain());
    momentum_grid(problem.dim(), 1.25 * l0, problem.settings.subdiff.p_nodes)
}

/// Estimate at `y0` with the problem's own settings.
pub fn subdiff_at(problem: &Problem, y0: &[f64]) -> SubdiffEstimate {
    let s = &problem.settings.subdiff;
    estimate_proximal_subdifferential(
        problem.datum.as_ref(),
        y0,
        s.k_max,
        s.cert_radius,
        &default_p_grid(problem),
        &ShellSampler::from_settings(s),
    )
}

/// Certificate for `p0` at the least ladder constant that verifies it.
pub fn least_certificate(problem: &Problem, y0: &[f64], p0: &[f64]) -> Option<ProximalCertificate> {
    let s = &problem.settings.subdiff;
    let sampler = ShellSampler::from_settings(s);
    k_ladder(s.k_max)
        .into_iter()
        .map(|k| test_proximal_subgradient(problem.datum.as_ref(), y0, p0, k, s.cert_radius, &sampler))
        .find(|c| c.verified())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datum::DatumSpec;

    fn neg_power() -> DatumSpec {
        DatumSpec::NegPower { alpha: 1.5, clamp: 4.0 }
    }

    #[test]
    fn certificate_examples() {
        let s = ShellSampler::default();
        assert!(test_proximal_subgradient(&DatumSpec::Abs, &[0.0], &[0.5], 0.1, 1.0, &s).verified());
        let c = test_proximal_subgradient(&neg_power(), &[0.0], &[0.0], 100.0, 1.0, &s);
        assert_eq!(c.verdict, Verdict::Refuted);
        assert!(c.witness.point[0].abs() < 4e-4);
        assert!(c.witness.violation() > c.witness.slack);
        let k4 = DatumSpec::KinkPower { clamp: 16.0 };
        assert!(test_proximal_subgradient(&k4, &[0.0], &[-0.5], 1.0, 0.5, &s).verified());
    }

    #[test]
    fn shells_are_nested_and_bounded() {
        let s = ShellSampler::default();
        let small = s.offsets(1, 0.3);
        let big = s.offsets(1, 1.7);
        assert!(small.iter().all(|o| big.contains(o)));
        assert!(big.iter().all(|o| o[0].abs() <= 1.7));
        assert!(small.iter().any(|o| o[0].abs() < 1e-17));
    }

    #[test]
    fn estimate_examples() {
        let s = ShellSampler::default();
        let grid = momentum_grid(1, 1.25, 41);
        let e = estimate_proximal_subdifferential(&DatumSpec::Abs, &[0.0], 1e6, 0.5, &grid, &s);
        let pts: Vec<f64> = e.grid_points().into_iter().map(|p| p[0]).collect();
        let expect: Vec<f64> = grid.iter().map(|p| p[0]).filter(|p| p.abs() <= 1.0 + 1e-12).collect();
        assert_eq!(pts, expect);
        let e = estimate_proximal_subdifferential(&neg_power(), &[0.0], 1e6, 0.5, &momentum_grid(1, 3.75, 41), &s);
        assert!(e.is_empty(), "{:?}", e.entries);
        let q = DatumSpec::Quadratic { curvature: 1.0, center: vec![0.0] };
        let e = estimate_proximal_subdifferential(&q, &[1.0], 1e6, 0.5, &momentum_grid(1, 2.0, 81), &s);
        assert_eq!(e.grid_points(), vec![vec![1.0]]);
        // Off-gradient slopes only survive within the rounding allowance, at large K.
        for en in &e.entries {
            let miss = (en.p[0] - 1.0).abs();
            assert!(miss * miss <= 2e-12 * (en.k + 1.0) * 4.0, "{en:?}");
        }
    }

    #[test]
    fn uniform_examples() {
        let cert = ShellSampler::default();
        let ys = NeighbourhoodSampler::default();
        let grid = momentum_grid(1, 1.25, 41);
        assert!(uniform_k_check(&DatumSpec::Abs, &[0.0], 0.5, 1.0, &ys, &grid, &cert).ok);
        let k3 = DatumSpec::Oscillating { clamp: 1.0 };
        let r3 = uniform_k_check(&k3, &[0.0], 0.5, 1e4, &ys, &momentum_grid(1, 3.75, 41), &cert);
        assert!(!r3.ok);
        let k4 = DatumSpec::KinkPower { clamp: 16.0 };
        let grid4 = momentum_grid(1, 7.5, 41);
        let mut last = f64::INFINITY;
        for k in [1.0, 1e2, 1e4, 1e6] {
            let r = uniform_k_check(&k4, &[0.0], 0.5, k, &ys, &grid4, &cert);
            assert!(!r.ok, "K = {k}");
            let w = r.witness_y.unwrap()[0];
            // Concavity -0.75/sqrt(y) beats -K only for y < (0.75/K)^2.
            assert!(w > 0.0 && w <= last && w <= 4.0 * (0.75 / k).powi(2), "K = {k}: witness {w}");
            last = w;
        }
    }

    #[test]
    fn ladder_shape() {
        assert_eq!(k_ladder(100.0), vec![1.0, 4.0, 16.0, 64.0, 100.0]);
        assert_eq!(k_ladder(16.0), vec![1.0, 4.0, 16.0]);
    }
}
