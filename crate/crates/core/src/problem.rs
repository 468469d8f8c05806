//! A configured Cauchy problem: model, datum, horizon and solver settings.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::action::{action_between, ActionRegime};
use crate::datum::InitialDatum;
use crate::error::{Error, Result};
use crate::flow::{ShootingConfig, SpeedBound, SpeedSampling};
use crate::hamiltonian::HamiltonianModel;
use crate::vecops::sub;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSettings {
    pub coarse_nodes_1d: usize,
    pub coarse_nodes_nd: usize,
    pub fine_nodes_1d: usize,
    pub fine_nodes_nd: usize,
    /// Relative value gap for ties: `gap = value_gap_rel * (1 + |u|)`.
    pub value_gap_rel: f64,
    /// Search ball radius is `safety * lambda0 * t`.
    pub safety: f64,
    pub t_min: f64,
}

impl Default for SearchSettings {
    fn default() -> Self {
        Self {
            coarse_nodes_1d: 2001,
            coarse_nodes_nd: 61,
            fine_nodes_1d: 41,
            fine_nodes_nd: 9,
            value_gap_rel: 1e-9,
            safety: 1.5,
            t_min: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubdiffSettings {
    pub k_max: f64,
    /// Samples per dyadic shell when certifying a single subgradient.
    pub per_shell: usize,
    /// Smallest shell is `2^finest_exponent`.
    pub finest_exponent: i32,
    /// Shell count and density of the neighbourhood sampler used by the uniform check.
    pub y_shells: usize,
    pub y_per_shell: usize,
    pub cert_radius: f64,
    pub p_nodes: usize,
}

impl Default for SubdiffSettings {
    fn default() -> Self {
        Self {
            k_max: 1e6,
            per_shell: 8,
            finest_exponent: -200,
            y_shells: 40,
            y_per_shell: 4,
            cert_radius: 0.5,
            p_nodes: 41,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceSettings {
    /// Trace step is `horizon / steps` unless overridden per call.
    pub steps: usize,
    pub ladder_h0: f64,
    pub ladder_levels: usize,
    pub cauchy_tol: f64,
    pub classical_samples: usize,
    pub match_tol: f64,
    pub window: f64,
    pub window_nodes: usize,
    pub jump_ratio: f64,
    pub c11_max: f64,
    pub tau_margin: f64,
    pub lifetime_tol: f64,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self {
            steps: 50,
            ladder_h0: 1e-2,
            ladder_levels: 6,
            cauchy_tol: 1e-3,
            classical_samples: 40,
            match_tol: 1e-6,
            window: 0.05,
            window_nodes: 201,
            jump_ratio: 4.0,
            c11_max: 1e4,
            tau_margin: 0.05,
            lifetime_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub shooting: ShootingConfig,
    pub speed: SpeedSampling,
    pub search: SearchSettings,
    pub subdiff: SubdiffSettings,
    pub trace: TraceSettings,
}

#[derive(Clone, Debug)]
enum Kernel {
    /// `A^{-1}` for the closed-form action `<A^{-1}(x-y), x-y> / 2t`.
    Metric(DMatrix<f64>),
    Shooting,
}

/// Everything needed to evaluate the solution and trace characteristics.
#[derive(Clone)]
pub struct Problem {
    pub model: HamiltonianModel,
    pub datum: Arc<dyn InitialDatum>,
    pub horizon: f64,
    pub settings: Settings,
    pub speed: SpeedBound,
    pub regime: ActionRegime,
    kernel: Kernel,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("model", &self.model)
            .field("datum", &self.datum.label())
            .field("horizon", &self.horizon)
            .field("speed", &self.speed)
            .field("regime", &self.regime)
            .finish()
    }
}

impl Problem {
    pub fn new(model: HamiltonianModel, datum: Arc<dyn InitialDatum>, horizon: f64, settings: Settings) -> Result<Self> {
        if !(horizon > 0.0) || horizon > model.domain().t_max * (1.0 + 1e-12) {
            return Err(Error::Config(format!(
                "horizon {horizon} must lie in (0, {}]",
                model.domain().t_max
            )));
        }
        let search = &settings.search;
        if search.coarse_nodes_1d < 3 || search.coarse_nodes_nd < 3 || search.fine_nodes_1d < 3 || search.fine_nodes_nd < 3 {
            return Err(Error::Config("search resolutions must be at least 3".into()));
        }
        if !(search.value_gap_rel > 0.0 && search.safety >= 1.0 && search.t_min > 0.0) {
            return Err(Error::Config("search tolerances must be positive (safety >= 1)".into()));
        }
        if !(settings.shooting.tolerance > 0.0) {
            return Err(Error::Config("endpoint tolerance must be positive".into()));
        }
        let speed = SpeedBound::compute(&model, datum.lipschitz(model.domain()), horizon, &settings.speed)?;
        let regime = ActionRegime::derive(&model, &speed, horizon)?;
        regime.validate(&model, &settings.shooting)?;
        let kernel = match model.constant_metric() {
            Some(a) => Kernel::Metric(
                a.try_inverse()
                    .ok_or_else(|| Error::Config("coefficient matrix is singular".into()))?,
            ),
            None => Kernel::Shooting,
        };
        Ok(Self {
            model,
            datum,
            horizon,
            settings,
            speed,
            regime,
            kernel,
        })
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn has_closed_form_action(&self) -> bool {
        matches!(self.kernel, Kernel::Metric(_))
    }

    /// Action from `(t_from, y)` to `(t_to, x)` and the momentum at the arrival point.
    pub fn action_and_momentum(
        &self,
        t_from: f64,
        t_to: f64,
        y: &[f64],
        x: &[f64],
        guess: Option<&[f64]>,
    ) -> Result<(f64, Vec<f64>)> {
        let tau = t_to - t_from;
        match &self.kernel {
            Kernel::Metric(inv) => {
                let d = DVector::from_vec(sub(x, y));
                let w = inv * &d;
                let value = 0.5 * w.dot(&d) / tau;
                Ok((value, (w / tau).as_slice().to_vec()))
            }
            Kernel::Shooting => {
                let r = action_between(&self.model, &self.settings.shooting, t_from, t_to, y, x, guess)?;
                Ok((r.value, r.arc.end_momentum().to_vec()))
            }
        }
    }

    /// Action only, for objectives.
    pub fn action(&self, t: f64, y: &[f64], x: &[f64]) -> Result<f64> {
        self.action_and_momentum(0.0, t, y, x, None).map(|(v, _)| v)
    }

    /// Initial momentum of the minimizing arc from `(0, y)` to `(t, x)`.
    pub fn launch_momentum(&self, t: f64, y: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        match &self.kernel {
            Kernel::Metric(inv) => {
                let d = DVector::from_vec(sub(x, y));
                Ok((inv * d / t).as_slice().to_vec())
            }
            Kernel::Shooting => Ok(crate::flow::shoot_bvp(
                &self.model,
                0.0,
                t,
                y,
                x,
                None,
                &self.settings.shooting,
                Some(self.speed.lambda0),
            )?
            .p0),
        }
    }

    /// Search ball radius at time `t`.
    pub fn search_radius(&self, t: f64) -> f64 {
        self.settings.search.safety * self.speed.lambda0 * t
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.settings.trace.steps.max(1) as f64
    }
}
