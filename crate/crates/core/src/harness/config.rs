//! TOML scenario description. Every field has a default; the defaults are the
//! obstacle-avoidance scenario shipped in `configs/unicycle_obstacle.toml`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::barrier::{eval_h, ClassK, ObstacleSpec};
use crate::dynamics::BoxSet;
use crate::error::{Error, Result};
use crate::filter::FilterKind;
use crate::reach::ReachMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemKind {
    #[default]
    Unicycle,
    SingleIntegrator,
}

impl SystemKind {
    pub fn state_dim(self) -> usize {
        match self {
            SystemKind::Unicycle => 4,
            SystemKind::SingleIntegrator => 2,
        }
    }

    pub fn input_dim(self) -> usize {
        2
    }

    pub fn dist_dim(self) -> usize {
        2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub system: SystemKind,
    pub seed: u64,
    /// Sampling period in seconds.
    pub period: f64,
    /// Episode length in seconds; a multiple of `period`.
    pub horizon: f64,
    pub start: Vec<f64>,
    pub goal: [f64; 2],
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            system: SystemKind::Unicycle,
            seed: 0,
            period: 0.1,
            horizon: 25.0,
            start: vec![5.0, 25.0, 0.0, 0.0],
            goal: [45.0, 21.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ObstacleSection {
    pub center: [f64; 2],
    pub safe_distance: f64,
}

impl Default for ObstacleSection {
    fn default() -> Self {
        Self {
            center: [32.5, 25.0],
            safe_distance: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputSection {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Default for InputSection {
    fn default() -> Self {
        Self {
            lo: vec![-1.0, -2.0],
            hi: vec![1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UncertaintySection {
    pub dist_lo: Vec<f64>,
    pub dist_hi: Vec<f64>,
    pub meas_lo: Vec<f64>,
    pub meas_hi: Vec<f64>,
    /// Norm bound on the disturbance; the largest box-vertex norm when absent.
    pub gamma: Option<f64>,
    /// Norm bound on the estimate error; the largest box-vertex norm when absent.
    pub epsilon: Option<f64>,
}

impl Default for UncertaintySection {
    fn default() -> Self {
        Self {
            dist_lo: vec![-0.3, -0.3],
            dist_hi: vec![0.3, 0.3],
            meas_lo: vec![-0.5, -0.5, 0.0, 0.0],
            meas_hi: vec![0.5, 0.5, 0.0, 0.0],
            gamma: None,
            epsilon: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierSection {
    /// One class-K function per chain level.
    pub alpha: Vec<ClassK>,
}

impl Default for BarrierSection {
    fn default() -> Self {
        Self {
            alpha: vec![ClassK::default(), ClassK::default()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    #[default]
    Proportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    pub k_theta: f64,
    pub k_v: f64,
    pub v_max: f64,
    pub k_d: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self {
            kind: ControllerKind::Proportional,
            k_theta: 2.0,
            k_v: 1.0,
            v_max: 2.0,
            k_d: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub kind: FilterKind,
    /// Substeps of the interval enclosure per sampling period.
    pub reach_substeps: usize,
    pub reach_mode: ReachMode,
}

impl Default for FilterSection {
    fn default() -> Self {
        Self {
            kind: FilterKind::Reach,
            reach_substeps: 10,
            reach_mode: ReachMode::Tube,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    /// Points per period at which the true state is checked.
    pub dense_samples: usize,
    /// RK4 steps per dense interval.
    pub integration_substeps: usize,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            dense_samples: 10,
            integration_substeps: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConstantsSection {
    /// Pre-computed Lipschitz constants, relative to the config file.
    pub sidecar: Option<PathBuf>,
    pub domain_lo: Vec<f64>,
    pub domain_hi: Vec<f64>,
    pub samples: usize,
    pub safety_factor: f64,
    pub seed: u64,
}

impl Default for ConstantsSection {
    fn default() -> Self {
        Self {
            sidecar: None,
            domain_lo: vec![0.0, 5.0, -std::f64::consts::PI, -2.5],
            domain_hi: vec![50.0, 45.0, std::f64::consts::PI, 2.5],
            samples: 20_000,
            safety_factor: 1.2,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub times: Vec<f64>,
    /// Enclosure substep length; every sweep time must be a multiple of it.
    pub substep: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            times: (1..=10).map(|k| k as f64 / 100.0).collect(),
            substep: 0.001,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Scenario {
    pub scenario: ScenarioSection,
    pub obstacle: ObstacleSection,
    pub inputs: InputSection,
    pub uncertainty: UncertaintySection,
    pub barrier: BarrierSection,
    pub controller: ControllerSection,
    pub filter: FilterSection,
    pub simulation: SimulationSection,
    pub constants: ConstantsSection,
    pub sweep: SweepSection,
}

/// Number of `step`s in `span` if it is a whole number.
pub(crate) fn whole_multiple(span: f64, step: f64) -> Option<usize> {
    let n = span / step;
    let r = n.round();
    ((n - r).abs() <= 1e-9 * r.max(1.0) && r >= 0.0).then_some(r as usize)
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let s: Scenario = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    /// Loads and validates; a relative sidecar path is resolved against the config's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut s = Self::from_toml_str(&text)?;
        if let (Some(side), Some(dir)) = (&s.constants.sidecar, path.parent()) {
            if side.is_relative() {
                s.constants.sidecar = Some(dir.join(side));
            }
        }
        Ok(s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn obstacle_spec(&self) -> Result<ObstacleSpec> {
        ObstacleSpec::new(self.obstacle.center, self.obstacle.safe_distance)
    }

    pub fn input_box(&self) -> Result<BoxSet> {
        BoxSet::new(self.inputs.lo.clone(), self.inputs.hi.clone())
    }

    pub fn steps(&self) -> usize {
        whole_multiple(self.scenario.horizon, self.scenario.period).unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let sc = &self.scenario;
        let kind = sc.system;
        let dim = |what: &str, v: &[f64], n: usize| -> Result<()> {
            if v.len() != n {
                return Err(config_err(format!("{what} needs {n} entries, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(config_err(format!("{what} has non-finite entries")));
            }
            Ok(())
        };
        dim("scenario.start", &sc.start, kind.state_dim())?;
        dim("inputs.lo", &self.inputs.lo, kind.input_dim())?;
        dim("inputs.hi", &self.inputs.hi, kind.input_dim())?;
        dim("uncertainty.dist_lo", &self.uncertainty.dist_lo, kind.dist_dim())?;
        dim("uncertainty.dist_hi", &self.uncertainty.dist_hi, kind.dist_dim())?;
        dim("uncertainty.meas_lo", &self.uncertainty.meas_lo, kind.state_dim())?;
        dim("uncertainty.meas_hi", &self.uncertainty.meas_hi, kind.state_dim())?;

        if !(sc.period > 0.0) || !sc.period.is_finite() {
            return Err(config_err(format!("period must be positive, got {}", sc.period)));
        }
        match whole_multiple(sc.horizon, sc.period) {
            Some(n) if n >= 1 => {}
            _ => {
                return Err(config_err(format!(
                    "horizon {} is not a positive multiple of the period {}",
                    sc.horizon, sc.period
                )))
            }
        }
        let obstacle = self.obstacle_spec().map_err(|e| config_err(e.to_string()))?;
        if eval_h(&obstacle, &sc.start) <= 0.0 {
            return Err(config_err("start lies inside the unsafe disk"));
        }
        let ib = self.input_box().map_err(|e| config_err(e.to_string()))?;
        if ib.is_degenerate() {
            return Err(config_err("input box must have positive width in every component"));
        }
        for (lo, hi, what) in [
            (&self.uncertainty.dist_lo, &self.uncertainty.dist_hi, "disturbance"),
            (&self.uncertainty.meas_lo, &self.uncertainty.meas_hi, "measurement"),
        ] {
            let b = BoxSet::new(lo.clone(), hi.clone()).map_err(|e| config_err(format!("{what} box: {e}")))?;
            if !b.contains_origin() {
                return Err(config_err(format!("{what} box must contain the origin")));
            }
        }

        let levels = match kind {
            SystemKind::Unicycle => 2,
            SystemKind::SingleIntegrator => 1,
        };
        if self.barrier.alpha.len() != levels {
            return Err(config_err(format!(
                "barrier.alpha needs {levels} class-K functions, got {}",
                self.barrier.alpha.len()
            )));
        }
        for a in &self.barrier.alpha {
            a.validate().map_err(|e| config_err(e.to_string()))?;
        }

        let c = &self.controller;
        if [c.k_theta, c.k_v, c.v_max, c.k_d].iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
            return Err(config_err("controller gains must be finite and non-negative"));
        }
        if self.filter.reach_substeps == 0 {
            return Err(config_err("filter.reach_substeps must be at least 1"));
        }
        if self.simulation.dense_samples == 0 || self.simulation.integration_substeps == 0 {
            return Err(config_err("simulation sample counts must be at least 1"));
        }
        if !(self.sweep.substep > 0.0) {
            return Err(config_err("sweep.substep must be positive"));
        }
        let mut prev = 0.0;
        for &t in &self.sweep.times {
            if !(t > prev) {
                return Err(config_err("sweep.times must be positive and strictly increasing"));
            }
            if whole_multiple(t, self.sweep.substep).is_none() {
                return Err(config_err(format!(
                    "sweep time {t} is not a multiple of the substep {}",
                    self.sweep.substep
                )));
            }
            prev = t;
        }
        Ok(())
    }
}
