//! Hamiltonian models, their derivatives, and the Legendre transform.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::{axpy, dot, norm, sub};

const BOX_SLACK: f64 = 1e-12;

/// Declared hyper-rectangle `[0, t_max] x [lo, hi]` on which a model may be evaluated.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityBox {
    pub t_max: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl ValidityBox {
    pub fn new(t_max: f64, lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::Config("box bounds must be non-empty and of equal length".into()));
        }
        if !(t_max > 0.0) || lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::Config("box must have t_max > 0 and lo < hi on every axis".into()));
        }
        Ok(Self { t_max, lo, hi })
    }

    /// Cube `[-half_width, half_width]^dim`.
    pub fn symmetric(dim: usize, half_width: f64, t_max: f64) -> Self {
        Self {
            t_max,
            lo: vec![-half_width; dim],
            hi: vec![half_width; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Half of the shortest side.
    pub fn radius(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(a, b)| 0.5 * (b - a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (a, b))| *v >= a - BOX_SLACK * (1.0 + a.abs()) && *v <= b + BOX_SLACK * (1.0 + b.abs()))
    }

    pub fn contains(&self, t: f64, x: &[f64]) -> bool {
        t >= -BOX_SLACK && t <= self.t_max * (1.0 + BOX_SLACK) + BOX_SLACK && self.contains_point(x)
    }

    /// True when the closed cube of half-width `r` around `x` fits in the box.
    pub fn contains_ball(&self, x: &[f64], r: f64) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| v - r >= a - BOX_SLACK * (1.0 + a.abs()) && v + r <= b + BOX_SLACK * (1.0 + b.abs()))
    }

    pub fn check(&self, t: f64, x: &[f64]) -> Result<()> {
        if self.contains(t, x) {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "(t, x) = ({t}, {x:?}) lies outside the validity box [0, {}] x {:?}..{:?}",
                self.t_max, self.lo, self.hi
            )))
        }
    }
}

/// Matrix-valued field `A(t, x)` for user-defined quadratic models.
pub trait MatrixField: Send + Sync {
    fn value(&self, t: f64, x: &[f64]) -> DMatrix<f64>;

    /// `dA/dx_i`; central differences unless overridden.
    fn partial_x(&self, t: f64, x: &[f64], i: usize) -> DMatrix<f64> {
        let h = 1e-6 * (1.0 + x[i].abs());
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        (self.value(t, &xp) - self.value(t, &xm)) / (2.0 * h)
    }

    fn time_independent(&self) -> bool {
        false
    }
}

/// Scalar field `V(t, x)` for user-defined potentials.
pub trait ScalarField: Send + Sync {
    fn value(&self, t: f64, x: &[f64]) -> f64;

    fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let h = 1e-6 * (1.0 + x[i].abs());
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                (self.value(t, &xp) - self.value(t, &xm)) / (2.0 * h)
            })
            .collect()
    }

    fn time_independent(&self) -> bool {
        false
    }
}

/// Coefficient matrix of a quadratic-form Hamiltonian.
#[derive(Clone)]
pub enum Coefficient {
    Constant(DMatrix<f64>),
    /// `(base + amplitude * sin(x_1)) * I`
    Modulated { base: f64, amplitude: f64 },
    Custom(Arc<dyn MatrixField>),
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(a) => write!(f, "Constant({:?})", a.as_slice()),
            Self::Modulated { base, amplitude } => {
                write!(f, "Modulated {{ base: {base}, amplitude: {amplitude} }}")
            }
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Coefficient {
    fn value(&self, t: f64, x: &[f64], dim: usize) -> DMatrix<f64> {
        match self {
            Self::Constant(a) => a.clone(),
            Self::Modulated { base, amplitude } => {
                DMatrix::identity(dim, dim) * (base + amplitude * x[0].sin())
            }
            Self::Custom(m) => m.value(t, x),
        }
    }

    fn partial_x(&self, t: f64, x: &[f64], i: usize, dim: usize) -> DMatrix<f64> {
        match self {
            Self::Constant(_) => DMatrix::zeros(dim, dim),
            Self::Modulated { amplitude, .. } => {
                if i == 0 {
                    DMatrix::identity(dim, dim) * (amplitude * x[0].cos())
                } else {
                    DMatrix::zeros(dim, dim)
                }
            }
            Self::Custom(m) => m.partial_x(t, x, i),
        }
    }

    fn time_independent(&self) -> bool {
        match self {
            Self::Constant(_) | Self::Modulated { .. } => true,
            Self::Custom(m) => m.time_independent(),
        }
    }
}

/// Potential term of a quadratic-form Hamiltonian.
#[derive(Clone)]
pub enum Potential {
    Zero,
    /// `V(x) = <slope, x>`
    Linear(Vec<f64>),
    /// `V(x) = omega^2 |x|^2 / 2`
    Harmonic { omega: f64 },
    Custom(Arc<dyn ScalarField>),
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Linear(s) => write!(f, "Linear({s:?})"),
            Self::Harmonic { omega } => write!(f, "Harmonic {{ omega: {omega} }}"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl Potential {
    fn value(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Linear(s) => dot(s, x),
            Self::Harmonic { omega } => 0.5 * omega * omega * dot(x, x),
            Self::Custom(v) => v.value(t, x),
        }
    }

    fn gradient(&self, t: f64, x: &[f64]) -> Vec<f64> {
        match self {
            Self::Zero => vec![0.0; x.len()],
            Self::Linear(s) => s.clone(),
            Self::Harmonic { omega } => x.iter().map(|v| omega * omega * v).collect(),
            Self::Custom(v) => v.gradient(t, x),
        }
    }

    fn time_independent(&self) -> bool {
        match self {
            Self::Custom(v) => v.time_independent(),
            _ => true,
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }
}

/// `H(t, x, p)` supplied as a closure.
pub type GenericFn = Arc<dyn Fn(f64, &[f64], &[f64]) -> f64 + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HamiltonianKind {
    Eikonal,
    QuadraticForm,
    GenericConvex,
}

#[derive(Clone)]
enum Form {
    Eikonal,
    Quadratic {
        coefficient: Coefficient,
        potential: Potential,
        c1: f64,
        c2: f64,
    },
    Generic {
        h: GenericFn,
        autonomous: bool,
    },
}

/// A Hamiltonian together with its validity box.
#[derive(Clone)]
pub struct HamiltonianModel {
    dim: usize,
    domain: ValidityBox,
    form: Form,
    label: String,
}

impl fmt::Debug for HamiltonianModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("HamiltonianModel")
            .field("kind", &self.kind())
            .field("label", &self.label)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .finish()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianGrads {
    pub dp: Vec<f64>,
    pub dx: Vec<f64>,
    pub dpp: DMatrix<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LegendreResult {
    pub lagrangian_value: f64,
    pub maximizer: Vec<f64>,
}

impl HamiltonianModel {
    /// `H = |p|^2 / 2`
    pub fn eikonal(domain: ValidityBox) -> Self {
        Self {
            dim: domain.dim(),
            domain,
            form: Form::Eikonal,
            label: "eikonal".into(),
        }
    }

    /// `H = <A(t,x) p, p> / 2 + V(t,x)` with convexity bounds taken from `A`.
    pub fn quadratic(domain: ValidityBox, coefficient: Coefficient, potential: Potential) -> Result<Self> {
        let dim = domain.dim();
        let (c1, c2) = match &coefficient {
            Coefficient::Constant(a) => {
                if a.nrows() != dim || a.ncols() != dim {
                    return Err(Error::Config(format!("coefficient must be {dim}x{dim}")));
                }
                if (a - a.transpose()).abs().max() > 1e-12 * (1.0 + a.abs().max()) {
                    return Err(Error::Config("coefficient matrix must be symmetric".into()));
                }
                let eig = a.clone().symmetric_eigen().eigenvalues;
                (eig.min(), eig.max())
            }
            Coefficient::Modulated { base, amplitude } => (base - amplitude.abs(), base + amplitude.abs()),
            Coefficient::Custom(m) => sampled_bounds(m.as_ref(), &domain),
        };
        if !(c1 > 0.0) {
            return Err(Error::Config(format!(
                "coefficient must be positive definite (smallest eigenvalue {c1})"
            )));
        }
        if let Potential::Linear(s) = &potential {
            if s.len() != dim {
                return Err(Error::Config("linear potential slope has wrong dimension".into()));
            }
        }
        Ok(Self {
            dim,
            domain,
            form: Form::Quadratic {
                coefficient,
                potential,
                c1,
                c2,
            },
            label: "quadratic-form".into(),
        })
    }

    /// Strictly convex `H` given as a closure; derivatives by central differences.
    pub fn generic(domain: ValidityBox, h: GenericFn, autonomous: bool) -> Self {
        Self {
            dim: domain.dim(),
            domain,
            form: Form::Generic { h, autonomous },
            label: "generic-convex".into(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn kind(&self) -> HamiltonianKind {
        match self.form {
            Form::Eikonal => HamiltonianKind::Eikonal,
            Form::Quadratic { .. } => HamiltonianKind::QuadraticForm,
            Form::Generic { .. } => HamiltonianKind::GenericConvex,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &ValidityBox {
        &self.domain
    }

    /// Eikonal and quadratic-form models both satisfy the quadratic structure assumption.
    pub fn is_quadratic(&self) -> bool {
        !matches!(self.form, Form::Generic { .. })
    }

    /// Bounds `c1 |v|^2 <= <A v, v> <= c2 |v|^2` for quadratic kinds.
    pub fn convexity_bounds(&self) -> Option<(f64, f64)> {
        match &self.form {
            Form::Eikonal => Some((1.0, 1.0)),
            Form::Quadratic { c1, c2, .. } => Some((*c1, *c2)),
            Form::Generic { .. } => None,
        }
    }

    pub fn is_autonomous(&self) -> bool {
        match &self.form {
            Form::Eikonal => true,
            Form::Quadratic {
                coefficient,
                potential,
                ..
            } => coefficient.time_independent() && potential.time_independent(),
            Form::Generic { autonomous, .. } => *autonomous,
        }
    }

    /// `A` when the action has the closed form `<A^-1 (x-y), x-y> / 2t`.
    pub fn constant_metric(&self) -> Option<DMatrix<f64>> {
        match &self.form {
            Form::Eikonal => Some(DMatrix::identity(self.dim, self.dim)),
            Form::Quadratic {
                coefficient: Coefficient::Constant(a),
                potential,
                ..
            } if potential.is_zero() => Some(a.clone()),
            _ => None,
        }
    }

    /// `A(t, x)` for quadratic kinds.
    pub fn coefficient_at(&self, t: f64, x: &[f64]) -> Option<DMatrix<f64>> {
        match &self.form {
            Form::Eikonal => Some(DMatrix::identity(self.dim, self.dim)),
            Form::Quadratic { coefficient, .. } => Some(coefficient.value(t, x, self.dim)),
            Form::Generic { .. } => None,
        }
    }

    /// The same eikonal Hamiltonian written as a quadratic-form model.
    pub fn eikonal_as_quadratic(&self) -> Option<Self> {
        match self.form {
            Form::Eikonal => Some(
                Self::quadratic(
                    self.domain.clone(),
                    Coefficient::Constant(DMatrix::identity(self.dim, self.dim)),
                    Potential::Zero,
                )
                .expect("identity is positive definite"),
            ),
            _ => None,
        }
    }

    fn check_args(&self, t: f64, x: &[f64], p: &[f64]) -> Result<()> {
        if x.len() != self.dim || p.len() != self.dim {
            return Err(Error::Domain(format!(
                "expected {}-dimensional arguments, got x: {}, p: {}",
                self.dim,
                x.len(),
                p.len()
            )));
        }
        self.domain.check(t, x)
    }

    fn raw_h(&self, t: f64, x: &[f64], p: &[f64]) -> f64 {
        match &self.form {
            Form::Eikonal => 0.5 * dot(p, p),
            Form::Quadratic {
                coefficient,
                potential,
                ..
            } => {
                let a = coefficient.value(t, x, self.dim);
                let pv = DVector::from_column_slice(p);
                0.5 * (&a * &pv).dot(&pv) + potential.value(t, x)
            }
            Form::Generic { h, .. } => h(t, x, p),
        }
    }

    pub fn eval_h(&self, t: f64, x: &[f64], p: &[f64]) -> Result<f64> {
        self.check_args(t, x, p)?;
        let v = self.raw_h(t, x, p);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical(format!("H({t}, {x:?}, {p:?}) is not finite")))
        }
    }

    /// `(D_p H, D_x H)` without the Hessian; used by the flow integrator.
    pub fn phase_velocity(&self, t: f64, x: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_args(t, x, p)?;
        let (dp, dx) = match &self.form {
            Form::Eikonal => (p.to_vec(), vec![0.0; self.dim]),
            Form::Quadratic {
                coefficient,
                potential,
                ..
            } => {
                let a = coefficient.value(t, x, self.dim);
                let pv = DVector::from_column_slice(p);
                let dp = (&a * &pv).as_slice().to_vec();
                let grad_v = potential.gradient(t, x);
                let dx = (0..self.dim)
                    .map(|i| {
                        let da = coefficient.partial_x(t, x, i, self.dim);
                        0.5 * (&da * &pv).dot(&pv) + grad_v[i]
                    })
                    .collect();
                (dp, dx)
            }
            Form::Generic { h, .. } => (fd_grad_p(h, t, x, p), fd_grad_x(h, t, x, p)),
        };
        if dp.iter().chain(&dx).all(|v| v.is_finite()) {
            Ok((dp, dx))
        } else {
            Err(Error::Numerical(format!("non-finite derivative of H at ({t}, {x:?}, {p:?})")))
        }
    }

    pub fn grads_h(&self, t: f64, x: &[f64], p: &[f64]) -> Result<HamiltonianGrads> {
        let (dp, dx) = self.phase_velocity(t, x, p)?;
        let dpp = match &self.form {
            Form::Eikonal => DMatrix::identity(self.dim, self.dim),
            Form::Quadratic { coefficient, .. } => coefficient.value(t, x, self.dim),
            Form::Generic { h, .. } => fd_hess_p(h, t, x, p),
        };
        if dpp.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("non-finite Hessian of H at ({t}, {x:?}, {p:?})")));
        }
        Ok(HamiltonianGrads { dp, dx, dpp })
    }

    /// `L(t,x,q) = sup_p [p.q - H(t,x,p)]` and its maximizer.
    pub fn legendre(&self, t: f64, x: &[f64], q: &[f64]) -> Result<LegendreResult> {
        self.check_args(t, x, q)?;
        if !q.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!("velocity {q:?} is not finite")));
        }
        match &self.form {
            Form::Eikonal => Ok(LegendreResult {
                lagrangian_value: 0.5 * dot(q, q),
                maximizer: q.to_vec(),
            }),
            Form::Quadratic {
                coefficient,
                potential,
                ..
            } => {
                let a = coefficient.value(t, x, self.dim);
                let chol = a.cholesky().ok_or_else(|| {
                    Error::Numerical(format!("coefficient not positive definite at ({t}, {x:?})"))
                })?;
                let p = chol.solve(&DVector::from_column_slice(q));
                let p = p.as_slice().to_vec();
                Ok(LegendreResult {
                    lagrangian_value: 0.5 * dot(&p, q) - potential.value(t, x),
                    maximizer: p,
                })
            }
            Form::Generic { h, .. } => generic_legendre(h, t, x, q),
        }
    }

    /// `D_q L(t, x, q)`, the maximizer of the Legendre problem.
    pub fn dual_momentum(&self, t: f64, x: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.legendre(t, x, q)?.maximizer)
    }
}

fn sampled_bounds(m: &dyn MatrixField, domain: &ValidityBox) -> (f64, f64) {
    let dim = domain.dim();
    let per_axis: usize = if dim <= 2 { 9 } else { 3 };
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let total = per_axis.pow(dim as u32);
    for ti in 0..3 {
        let t = domain.t_max * ti as f64 / 2.0;
        for idx in 0..total {
            let mut rem = idx;
            let x: Vec<f64> = (0..dim)
                .map(|k| {
                    let i = rem % per_axis;
                    rem /= per_axis;
                    domain.lo[k] + (domain.hi[k] - domain.lo[k]) * i as f64 / (per_axis - 1) as f64
                })
                .collect();
            let eig = m.value(t, &x).symmetric_eigen().eigenvalues;
            lo = lo.min(eig.min());
            hi = hi.max(eig.max());
        }
    }
    (lo, hi)
}

fn fd_step(v: &[f64]) -> f64 {
    1e-5 * (1.0 + norm(v))
}

fn fd_grad_p(h: &GenericFn, t: f64, x: &[f64], p: &[f64]) -> Vec<f64> {
    let s = fd_step(p);
    let mut pp = p.to_vec();
    (0..p.len())
        .map(|i| {
            pp[i] = p[i] + s;
            let f1 = h(t, x, &pp);
            pp[i] = p[i] - s;
            let f0 = h(t, x, &pp);
            pp[i] = p[i];
            (f1 - f0) / (2.0 * s)
        })
        .collect()
}

fn fd_grad_x(h: &GenericFn, t: f64, x: &[f64], p: &[f64]) -> Vec<f64> {
    let s = fd_step(x);
    let mut xx = x.to_vec();
    (0..x.len())
        .map(|i| {
            xx[i] = x[i] + s;
            let f1 = h(t, &xx, p);
            xx[i] = x[i] - s;
            let f0 = h(t, &xx, p);
            xx[i] = x[i];
            (f1 - f0) / (2.0 * s)
        })
        .collect()
}

fn fd_hess_p(h: &GenericFn, t: f64, x: &[f64], p: &[f64]) -> DMatrix<f64> {
    let n = p.len();
    let s = fd_step(p);
    let f0 = h(t, x, p);
    let eval = |di: &[(usize, f64)]| {
        let mut q = p.to_vec();
        for &(i, d) in di {
            q[i] += d;
        }
        h(t, x, &q)
    };
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = (eval(&[(i, s)]) - 2.0 * f0 + eval(&[(i, -s)])) / (s * s);
        for j in 0..i {
            let v = (eval(&[(i, s), (j, s)]) - eval(&[(i, s), (j, -s)]) - eval(&[(i, -s), (j, s)])
                + eval(&[(i, -s), (j, -s)]))
                / (4.0 * s * s);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn generic_legendre(h: &GenericFn, t: f64, x: &[f64], q: &[f64]) -> Result<LegendreResult> {
    const MAX_STEPS: usize = 100;
    let objective = |p: &[f64]| dot(p, q) - h(t, x, p);
    let tol = 1e-10 * (1.0 + norm(q));
    let mut p = q.to_vec();
    let mut phi = objective(&p);
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_STEPS {
        let grad = sub(q, &fd_grad_p(h, t, x, &p));
        residual = norm(&grad);
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(LegendreResult {
                lagrangian_value: phi,
                maximizer: p,
            });
        }
        let hess = fd_hess_p(h, t, x, &p);
        let step = match hess.cholesky() {
            Some(c) => c.solve(&DVector::from_column_slice(&grad)).as_slice().to_vec(),
            None => grad.clone(),
        };
        let mut alpha = 1.0;
        let mut moved = false;
        while alpha > 1e-12 {
            let cand = axpy(&p, alpha, &step);
            let val = objective(&cand);
            if val.is_finite() && val >= phi - 1e-15 * (1.0 + phi.abs()) {
                p = cand;
                phi = val;
                moved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !moved || norm(&step) * alpha <= 1e-15 * (1.0 + norm(&p)) {
            // Stalled at rounding level of the difference quotients.
            if residual <= 1e-6 * (1.0 + norm(q)) {
                return Ok(LegendreResult {
                    lagrangian_value: phi,
                    maximizer: p,
                });
            }
            break;
        }
    }
    Err(Error::Convergence {
        what: "Legendre maximization",
        iterations: MAX_STEPS,
        residual,
    })
}
