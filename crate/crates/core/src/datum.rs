//! Initial data `u0` for the Cauchy problem.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::ValidityBox;
use crate::vecops::{dot, norm, sub};

/// Locally Lipschitz initial datum.
pub trait InitialDatum: Send + Sync {
    fn eval(&self, y: &[f64]) -> f64;

    /// Lipschitz constant of the datum on the box.
    fn lipschitz(&self, domain: &ValidityBox) -> f64;

    fn label(&self) -> String;
}

/// Catalog of closed-form data; the 1-D entries act on the first coordinate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatumSpec {
    /// `|y|`
    Abs,
    /// `-|y|`
    NegAbs,
    /// `-|y|^alpha`, continued linearly beyond `|y| = clamp`.
    NegPower { alpha: f64, clamp: f64 },
    /// `y^2 sin(1/y)`, odd linear continuation beyond `|y| = clamp`.
    Oscillating { clamp: f64 },
    /// `-y` for `y <= 0`, `-y^1.5` on `[0, clamp]`, linear beyond.
    KinkPower { clamp: f64 },
    Linear { slope: Vec<f64> },
    /// `curvature / 2 * |y - center|^2`
    Quadratic { curvature: f64, center: Vec<f64> },
    Constant { value: f64 },
    Shifted { base: Box<DatumSpec>, offset: f64 },
}

fn oscillating(y: f64) -> f64 {
    if y == 0.0 {
        0.0
    } else {
        y * y * (1.0 / y).sin()
    }
}

fn oscillating_slope(y: f64) -> f64 {
    2.0 * y * (1.0 / y).sin() - (1.0 / y).cos()
}

impl DatumSpec {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            Self::NegPower { alpha, clamp } if !(*alpha > 1.0 && *alpha < 2.0 && *clamp > 0.0) => Err(
                Error::Config(format!("power datum needs 1 < alpha < 2 and clamp > 0 (got {alpha}, {clamp})")),
            ),
            Self::Oscillating { clamp } | Self::KinkPower { clamp } if !(*clamp > 0.0) => {
                Err(Error::Config("clamp radius must be positive".into()))
            }
            Self::Oscillating { .. } | Self::KinkPower { .. } if dim != 1 => {
                Err(Error::Config(format!("{} is a one-dimensional datum", self.label())))
            }
            Self::Linear { slope } if slope.len() != dim => {
                Err(Error::Config("linear datum slope has the wrong dimension".into()))
            }
            Self::Quadratic { center, .. } if center.len() != dim => {
                Err(Error::Config("quadratic datum centre has the wrong dimension".into()))
            }
            Self::Shifted { base, .. } => base.validate(dim),
            _ => Ok(()),
        }
    }
}

impl InitialDatum for DatumSpec {
    fn eval(&self, y: &[f64]) -> f64 {
        match self {
            Self::Abs => norm(y),
            Self::NegAbs => -norm(y),
            Self::NegPower { alpha, clamp } => {
                let r = norm(y);
                if r <= *clamp {
                    -r.powf(*alpha)
                } else {
                    -clamp.powf(*alpha) - alpha * clamp.powf(alpha - 1.0) * (r - clamp)
                }
            }
            Self::Oscillating { clamp } => {
                let (s, a) = (y[0].signum(), y[0].abs());
                if a <= *clamp {
                    oscillating(y[0])
                } else {
                    s * (oscillating(*clamp) + oscillating_slope(*clamp) * (a - clamp))
                }
            }
            Self::KinkPower { clamp } => {
                let v = y[0];
                if v <= 0.0 {
                    -v
                } else if v <= *clamp {
                    -v.powf(1.5)
                } else {
                    -clamp.powf(1.5) - 1.5 * clamp.sqrt() * (v - clamp)
                }
            }
            Self::Linear { slope } => dot(slope, y),
            Self::Quadratic { curvature, center } => {
                let d = sub(y, center);
                0.5 * curvature * dot(&d, &d)
            }
            Self::Constant { value } => *value,
            Self::Shifted { base, offset } => base.eval(y) + offset,
        }
    }

    fn lipschitz(&self, domain: &ValidityBox) -> f64 {
        match self {
            Self::Abs | Self::NegAbs => 1.0,
            Self::NegPower { alpha, clamp } => alpha * clamp.powf(alpha - 1.0),
            Self::Oscillating { clamp } => 2.0 * clamp + 1.0,
            Self::KinkPower { clamp } => (1.5 * clamp.sqrt()).max(1.0),
            Self::Linear { slope } => norm(slope),
            Self::Quadratic { curvature, center } => {
                let far: f64 = domain
                    .lo
                    .iter()
                    .zip(&domain.hi)
                    .zip(center)
                    .map(|((a, b), c)| (c - a).abs().max((b - c).abs()).powi(2))
                    .sum::<f64>()
                    .sqrt();
                curvature.abs() * far
            }
            Self::Constant { .. } => 0.0,
            Self::Shifted { base, .. } => base.lipschitz(domain),
        }
    }

    fn label(&self) -> String {
        match self {
            Self::Abs => "|y|".into(),
            Self::NegAbs => "-|y|".into(),
            Self::NegPower { alpha, .. } => format!("-|y|^{alpha}"),
            Self::Oscillating { .. } => "y^2 sin(1/y)".into(),
            Self::KinkPower { .. } => "-y (y<=0), -y^1.5 (y>=0)".into(),
            Self::Linear { slope } => format!("<{slope:?}, y>"),
            Self::Quadratic { curvature, .. } => format!("{curvature}/2 |y - c|^2"),
            Self::Constant { value } => format!("{value}"),
            Self::Shifted { base, offset } => format!("{} + {offset}", base.label()),
        }
    }
}

type DatumFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Datum given by a closure and a declared Lipschitz constant.
#[derive(Clone)]
pub struct FnDatum {
    f: DatumFn,
    lipschitz: f64,
    label: String,
}

impl FnDatum {
    pub fn new(label: impl Into<String>, lipschitz: f64, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            f: Arc::new(f),
            lipschitz,
            label: label.into(),
        }
    }
}

impl fmt::Debug for FnDatum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnDatum({})", self.label)
    }
}

impl InitialDatum for FnDatum {
    fn eval(&self, y: &[f64]) -> f64 {
        (self.f)(y)
    }

    fn lipschitz(&self, _domain: &ValidityBox) -> f64 {
        self.lipschitz
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}
