//! Built-in one-dimensional eikonal problems with closed-form reference solutions.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::datum::{DatumSpec, InitialDatum};
use crate::error::Result;
use crate::hamiltonian::{HamiltonianModel, ValidityBox};
use crate::problem::{Problem, Settings};

/// Qualitative behaviour a scenario is expected to show.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expectation {
    NoSingularities,
    SingularColumnAtOrigin,
    WeaklySingularAtOrigin,
    FanWithSingularTrace,
    StronglySingularAtOrigin,
}

/// Reference solution of a catalog scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Oracle {
    /// `u0 = |x|`
    AbsValue,
    /// `u0 = -|x|^alpha` (full formula for alpha = 1.5, the origin otherwise).
    NegPower { alpha: f64, clamp: f64 },
    /// `u0 = y^2 sin(1/y)`; only the origin is known.
    Oscillating,
    /// One-sided linear / power datum.
    KinkPower { clamp: f64 },
    /// `u0 = -|x|`
    NegAbs,
}

fn quadratic_roots(b: f64, c: f64) -> Vec<f64> {
    // s^2 + b s + c = 0
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let r = disc.sqrt();
    vec![(-b - r) / 2.0, (-b + r) / 2.0]
}

impl Oracle {
    /// `u(t, x)` where a closed form is available.
    pub fn value(&self, t: f64, x: f64) -> Option<f64> {
        let hopf = |u0: &dyn Fn(f64) -> f64, ys: &[f64]| {
            ys.iter()
                .map(|&y| u0(y) + (x - y) * (x - y) / (2.0 * t))
                .fold(f64::INFINITY, f64::min)
        };
        match self {
            Self::AbsValue => Some(if x < -t {
                -x - t / 2.0
            } else if x > t {
                x - t / 2.0
            } else {
                x * x / (2.0 * t)
            }),
            Self::NegAbs => Some(-x.abs() - t / 2.0),
            Self::Oscillating => (x == 0.0 && t < 0.5).then_some(0.0),
            Self::NegPower { alpha, clamp } => {
                if (alpha - 1.5).abs() < 1e-15 {
                    let d = DatumSpec::NegPower { alpha: *alpha, clamp: *clamp };
                    let slope = alpha * clamp.powf(alpha - 1.0);
                    let mut ys = vec![0.0, x + t * slope, x - t * slope];
                    // y = s^2 > 0: s^2 - 1.5 t s - x = 0 ; y = -s^2 < 0: s^2 - 1.5 t s + x = 0
                    for s in quadratic_roots(-1.5 * t, -x).into_iter().filter(|s| *s >= 0.0) {
                        ys.push(s * s);
                    }
                    for s in quadratic_roots(-1.5 * t, x).into_iter().filter(|s| *s >= 0.0) {
                        ys.push(-s * s);
                    }
                    Some(hopf(&|y| d.eval(&[y]), &ys))
                } else if x == 0.0 {
                    let m = (t * alpha).powf(1.0 / (2.0 - alpha));
                    (m <= *clamp).then(|| -m.powf(*alpha) + m * m / (2.0 * t))
                } else {
                    None
                }
            }
            Self::KinkPower { clamp } => {
                let d = DatumSpec::KinkPower { clamp: *clamp };
                let mut ys = vec![0.0, x + 1.5 * clamp.sqrt() * t];
                if x + t <= 0.0 {
                    ys.push(x + t);
                }
                for s in quadratic_roots(-1.5 * t, -x).into_iter().filter(|s| *s >= 0.0) {
                    ys.push(s * s);
                }
                Some(hopf(&|y| d.eval(&[y]), &ys))
            }
        }
    }

    /// Global minimizers where the reference formula gives them.
    pub fn minimizers(&self, t: f64, x: f64) -> Option<Vec<f64>> {
        match self {
            Self::NegPower { alpha, .. } if x == 0.0 => {
                let m = (t * alpha).powf(1.0 / (2.0 - alpha));
                Some(vec![-m, m])
            }
            Self::NegAbs if x == 0.0 => Some(vec![-t, t]),
            Self::AbsValue => Some(vec![if x < -t {
                x + t
            } else if x > t {
                x - t
            } else {
                0.0
            }]),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub model: HamiltonianModel,
    pub datum: DatumSpec,
    pub horizon: f64,
    /// Spatial range of the smoke grid.
    pub smoke_x: (f64, f64),
    /// Earliest time of the smoke grid.
    pub smoke_t0: f64,
    pub oracle: Oracle,
    pub expectation: Expectation,
    /// Note on where the clamped datum reproduces the unclamped one.
    pub validity: String,
}

impl Scenario {
    pub fn problem(&self, settings: Settings) -> Result<Problem> {
        let datum: Arc<dyn InitialDatum> = Arc::new(self.datum.clone());
        Problem::new(self.model.clone(), datum, self.horizon, settings)
    }

    pub fn domain(&self) -> &ValidityBox {
        self.model.domain()
    }
}

fn eikonal(half_width: f64, horizon: f64) -> HamiltonianModel {
    HamiltonianModel::eikonal(ValidityBox::symmetric(1, half_width, horizon))
}

pub fn example1() -> Scenario {
    Scenario {
        name: "example1".into(),
        model: eikonal(6.0, 1.0),
        datum: DatumSpec::Abs,
        horizon: 1.0,
        smoke_x: (-2.0, 2.0),
        smoke_t0: 0.05,
        oracle: Oracle::AbsValue,
        expectation: Expectation::NoSingularities,
        validity: "exact on the whole box".into(),
    }
}

/// `-|x|^alpha` clamped at `|x| = 4`; the horizon keeps the origin minimizers within `|y| <= 3`.
pub fn example2_with_alpha(alpha: f64) -> Scenario {
    let clamp: f64 = 4.0;
    let lipschitz = alpha * clamp.powf(alpha - 1.0);
    let lambda0 = 2.0 * lipschitz;
    let horizon = 1f64.min(3f64.powf(2.0 - alpha) / alpha);
    let half = (2.0 * lambda0 * horizon).max(1.5 * lambda0 * horizon + 2.0) + 2.0;
    Scenario {
        name: "example2".into(),
        model: eikonal(half, horizon),
        datum: DatumSpec::NegPower { alpha, clamp },
        horizon,
        smoke_x: (-1.0, 1.0),
        smoke_t0: 0.05,
        oracle: Oracle::NegPower { alpha, clamp },
        expectation: Expectation::SingularColumnAtOrigin,
        validity: format!("datum exact for |y| <= {clamp}; origin minimizers stay within |y| <= 3 up to t = {horizon}"),
    }
}

pub fn example2() -> Scenario {
    example2_with_alpha(1.5)
}

pub fn example3() -> Scenario {
    Scenario {
        name: "example3".into(),
        model: eikonal(5.0, 0.4),
        datum: DatumSpec::Oscillating { clamp: 1.0 },
        horizon: 0.4,
        smoke_x: (-0.5, 0.5),
        smoke_t0: 0.05,
        oracle: Oracle::Oscillating,
        expectation: Expectation::WeaklySingularAtOrigin,
        validity: "datum exact for |y| <= 1".into(),
    }
}

pub fn example4() -> Scenario {
    Scenario {
        name: "example4".into(),
        model: eikonal(56.0, 2.2),
        datum: DatumSpec::KinkPower { clamp: 16.0 },
        horizon: 2.2,
        smoke_x: (-2.0, 2.0),
        smoke_t0: 0.05,
        oracle: Oracle::KinkPower { clamp: 16.0 },
        expectation: Expectation::FanWithSingularTrace,
        validity: "datum exact for y <= 16".into(),
    }
}

pub fn semiconcave_abs() -> Scenario {
    Scenario {
        name: "semiconcave_abs".into(),
        model: eikonal(6.0, 1.0),
        datum: DatumSpec::NegAbs,
        horizon: 1.0,
        smoke_x: (-2.0, 2.0),
        smoke_t0: 0.05,
        oracle: Oracle::NegAbs,
        expectation: Expectation::StronglySingularAtOrigin,
        validity: "exact on the whole box".into(),
    }
}

pub fn catalog() -> Vec<Scenario> {
    vec![example1(), example2(), example3(), example4(), semiconcave_abs()]
}

pub fn by_name(name: &str) -> Option<Scenario> {
    catalog().into_iter().find(|s| s.name == name)
}
