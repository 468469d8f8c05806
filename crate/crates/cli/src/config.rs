//! Run configuration read from a sectioned TOML file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use hjlab_core::datum::{DatumSpec, InitialDatum};
use hjlab_core::hamiltonian::{Coefficient, HamiltonianModel, Potential, ValidityBox};
use hjlab_core::problem::{Problem, Settings};
use hjlab_core::scenarios::{self, Oracle, Scenario};
use hjlab_core::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub grid: GridConfig,
    #[serde(rename = "char")]
    pub trace: CharConfig,
    pub subdiff: SubdiffConfig,
    pub settings: Settings,
    pub verify: VerifyConfig,
    pub output: OutputConfig,
    pub run: RunSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    /// Catalog name; ignored when `inline` is present.
    pub scenario: String,
    /// Exponent of the example2 datum.
    pub alpha: Option<f64>,
    pub inline: Option<InlineProblem>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            scenario: "example1".into(),
            alpha: None,
            inline: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineProblem {
    #[serde(default = "InlineProblem::default_name")]
    pub name: String,
    pub model: ModelConfig,
    pub datum: DatumSpec,
    pub horizon: f64,
}

impl InlineProblem {
    fn default_name() -> String {
        "inline".into()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// `eikonal` or `quadratic`
    pub kind: String,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    #[serde(default)]
    pub coefficient: CoefficientConfig,
    #[serde(default)]
    pub potential: PotentialConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    #[default]
    Identity,
    Matrix {
        rows: Vec<Vec<f64>>,
    },
    Modulated {
        base: f64,
        amplitude: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    #[default]
    Zero,
    Linear {
        slope: Vec<f64>,
    },
    Harmonic {
        omega: f64,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Output times; defaults to half the horizon.
    pub times: Vec<f64>,
    /// Defaults to the scenario's smoke range.
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
    /// Nodes per axis; 201 when absent.
    pub nodes: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CharConfig {
    pub origin: Vec<f64>,
    pub t_start: f64,
    /// Defaults to the horizon.
    pub t_end: Option<f64>,
    /// `generalized` or `classical:<p0>` (components separated by commas).
    pub mode: String,
    /// Length of a classical trace; defaults to the certified bound.
    pub tau: Option<f64>,
}

impl Default for CharConfig {
    fn default() -> Self {
        Self {
            origin: vec![0.0],
            t_start: 0.0,
            t_end: None,
            mode: "generalized".into(),
            tau: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubdiffConfig {
    pub point: Vec<f64>,
    /// Momenta certified at every constant of the ladder.
    pub probe_p: Vec<Vec<f64>>,
}

impl Default for SubdiffConfig {
    fn default() -> Self {
        Self {
            point: vec![0.0],
            probe_p: vec![vec![0.0]],
        }
    }
}

/// Acceptance tolerances and sample counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    /// Criteria to run; all eight when empty.
    pub criteria: Vec<u8>,
    pub value_tol: f64,
    pub minimizer_tol: f64,
    pub excursion_tol: f64,
    pub origin_value_tol: f64,
    pub uniform_k_max: f64,
    pub lifetime_tol: f64,
    pub round_trip_tol: f64,
    pub duality_tol: f64,
    pub energy_drift_tol: f64,
    pub energy_order_ratio: f64,
    pub convexity_tol: f64,
    pub semiconcavity_tol: f64,
    pub hopf_tol: f64,
    pub duality_samples: usize,
    pub hopf_samples: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            criteria: Vec::new(),
            value_tol: 1e-6,
            minimizer_tol: 1e-4,
            excursion_tol: 1e-3,
            origin_value_tol: 1e-8,
            uniform_k_max: 1e4,
            lifetime_tol: 1e-3,
            round_trip_tol: 1e-6,
            duality_tol: 1e-9,
            energy_drift_tol: 1e-6,
            energy_order_ratio: 8.0,
            convexity_tol: 1e-9,
            semiconcavity_tol: 1e-9,
            hopf_tol: 1e-6,
            duality_samples: 200,
            hopf_samples: 500,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub workers: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { workers: 1, seed: 0 }
    }
}

/// A problem ready to solve, with the reference data a catalog entry carries.
pub struct Resolved {
    pub name: String,
    pub problem: Problem,
    pub smoke_x: (f64, f64),
    pub oracle: Option<Oracle>,
    pub datum: Option<DatumSpec>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let v = &self.verify;
        let tols = [
            ("value_tol", v.value_tol),
            ("minimizer_tol", v.minimizer_tol),
            ("excursion_tol", v.excursion_tol),
            ("origin_value_tol", v.origin_value_tol),
            ("uniform_k_max", v.uniform_k_max),
            ("lifetime_tol", v.lifetime_tol),
            ("round_trip_tol", v.round_trip_tol),
            ("duality_tol", v.duality_tol),
            ("energy_drift_tol", v.energy_drift_tol),
            ("energy_order_ratio", v.energy_order_ratio),
            ("convexity_tol", v.convexity_tol),
            ("semiconcavity_tol", v.semiconcavity_tol),
            ("hopf_tol", v.hopf_tol),
            ("shooting.tolerance", self.settings.shooting.tolerance),
            ("search.value_gap_rel", self.settings.search.value_gap_rel),
            ("trace.cauchy_tol", self.settings.trace.cauchy_tol),
            ("trace.match_tol", self.settings.trace.match_tol),
        ];
        if let Some((name, _)) = tols.iter().find(|(_, x)| !(*x > 0.0)) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        let s = &self.settings;
        let resolutions = [
            ("grid.nodes", self.grid.nodes.unwrap_or(2)),
            ("search.coarse_nodes_1d", s.search.coarse_nodes_1d),
            ("search.coarse_nodes_nd", s.search.coarse_nodes_nd),
            ("search.fine_nodes_1d", s.search.fine_nodes_1d),
            ("search.fine_nodes_nd", s.search.fine_nodes_nd),
            ("trace.steps", s.trace.steps + 1),
            ("trace.window_nodes", s.trace.window_nodes),
        ];
        if let Some((name, _)) = resolutions.iter().find(|(_, n)| *n < 2) {
            return Err(Error::Config(format!("{name} must be at least 2")));
        }
        if s.search.fine_nodes_1d.is_multiple_of(2) {
            return Err(Error::Config("search.fine_nodes_1d must be odd".into()));
        }
        if self.run.workers == 0 {
            return Err(Error::Config("run.workers must be at least 1".into()));
        }
        if let Some(c) = v.criteria.iter().find(|c| !(1..=8).contains(*c)) {
            return Err(Error::Config(format!("unknown acceptance criterion {c}")));
        }
        if self.grid.times.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("grid.times must be positive".into()));
        }
        Ok(())
    }

    pub fn criteria(&self) -> Vec<u8> {
        if self.verify.criteria.is_empty() {
            (1..=8).collect()
        } else {
            let mut c = self.verify.criteria.clone();
            c.sort_unstable();
            c.dedup();
            c
        }
    }

    /// Catalog scenario named in the config, honouring the example2 exponent.
    pub fn scenario(&self) -> Result<Scenario> {
        scenario_by_name(&self.problem.scenario, self.problem.alpha)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        if let Some(inline) = &self.problem.inline {
            return inline.resolve(self.settings.clone());
        }
        let sc = self.scenario()?;
        Ok(Resolved {
            name: sc.name.clone(),
            problem: sc.problem(self.settings.clone())?,
            smoke_x: sc.smoke_x,
            oracle: Some(sc.oracle.clone()),
            datum: Some(sc.datum.clone()),
        })
    }
}

pub fn scenario_by_name(name: &str, alpha: Option<f64>) -> Result<Scenario> {
    match (name, alpha) {
        ("example2", Some(a)) => {
            if !(a > 1.0 && a < 2.0) {
                return Err(Error::Config(format!("example2 exponent {a} must lie in (1, 2)")));
            }
            Ok(scenarios::example2_with_alpha(a))
        }
        (_, Some(_)) => Err(Error::Config("alpha only applies to example2".into())),
        _ => scenarios::by_name(name).ok_or_else(|| {
            let known: Vec<String> = scenarios::catalog().into_iter().map(|s| s.name).collect();
            Error::Config(format!("unknown scenario '{name}' (known: {})", known.join(", ")))
        }),
    }
}

impl InlineProblem {
    fn resolve(&self, settings: Settings) -> Result<Resolved> {
        let m = &self.model;
        let domain = ValidityBox::new(self.horizon, m.lo.clone(), m.hi.clone())?;
        let dim = domain.dim();
        let model = match m.kind.as_str() {
            "eikonal" => HamiltonianModel::eikonal(domain),
            "quadratic" => {
                let coefficient = match &m.coefficient {
                    CoefficientConfig::Identity => Coefficient::Constant(DMatrix::identity(dim, dim)),
                    CoefficientConfig::Matrix { rows } => {
                        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                            return Err(Error::Config(format!("coefficient must be {dim}x{dim}")));
                        }
                        Coefficient::Constant(DMatrix::from_row_iterator(dim, dim, rows.iter().flatten().copied()))
                    }
                    CoefficientConfig::Modulated { base, amplitude } => Coefficient::Modulated {
                        base: *base,
                        amplitude: *amplitude,
                    },
                };
                let potential = match &m.potential {
                    PotentialConfig::Zero => Potential::Zero,
                    PotentialConfig::Linear { slope } => Potential::Linear(slope.clone()),
                    PotentialConfig::Harmonic { omega } => Potential::Harmonic { omega: *omega },
                };
                HamiltonianModel::quadratic(domain, coefficient, potential)?
            }
            other => return Err(Error::Config(format!("unknown model kind '{other}'"))),
        };
        self.datum.validate(dim)?;
        let datum: Arc<dyn InitialDatum> = Arc::new(self.datum.clone());
        let problem = Problem::new(model, datum, self.horizon, settings)?;
        let c = 0.5 * (m.lo[0] + m.hi[0]);
        let w = 0.25 * (m.hi[0] - m.lo[0]);
        Ok(Resolved {
            name: self.name.clone(),
            problem,
            smoke_x: (c - w, c + w),
            oracle: None,
            datum: Some(self.datum.clone()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c.problem.scenario, "example1");
        assert_eq!(c.criteria(), (1..=8).collect::<Vec<_>>());
        assert_eq!(c.run.workers, 1);
    }

    #[test]
    fn sections_override_fields() {
        let c = RunConfig::parse(
            "[problem]\nscenario = \"example4\"\n[grid]\ntimes = [0.5]\nnodes = 11\n\
             [settings.trace]\nsteps = 20\n[verify]\nenergy_drift_tol = 1e-8\ncriteria = [6]\n",
        )
        .unwrap();
        assert_eq!(c.settings.trace.steps, 20);
        assert_eq!(c.settings.trace.window_nodes, 201);
        assert_eq!(c.verify.energy_drift_tol, 1e-8);
        assert_eq!(c.resolve().unwrap().name, "example4");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("[verify]\nhopf_tol = 0.0\n").is_err());
        assert!(RunConfig::parse("[grid]\nnodes = 1\n").is_err());
        assert!(RunConfig::parse("[nonsense]\nx = 1\n").is_err());
        let c = RunConfig::parse("[problem]\nscenario = \"nope\"\n").unwrap();
        assert!(matches!(c.resolve(), Err(Error::Config(_))));
    }

    #[test]
    fn inline_problem() {
        let c = RunConfig::parse(
            "[problem.inline]\nhorizon = 1.0\ndatum = { kind = \"abs\" }\n\
             [problem.inline.model]\nkind = \"quadratic\"\nlo = [-6.0]\nhi = [6.0]\n\
             coefficient = { kind = \"matrix\", rows = [[2.0]] }\n",
        )
        .unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.name, "inline");
        assert!(r.problem.model.is_quadratic());
    }
}
