use crate::barrier::{BarrierChain, SingleIntegratorObstacleChain, UnicycleObstacleChain};
use crate::dynamics::{BoxSet, ControlAffineSystem, SingleIntegrator, Unicycle, UncertaintyModel};
use crate::error::{Error, Result};
use crate::margins::{
    estimate_constants, EstimationSettings, LipschitzEstimates, MarginMethod, MarginSpec,
};

use super::config::{Scenario, SystemKind};
use crate::filter::FilterKind;

/// A validated scenario with everything the episode loop needs built once.
pub struct Setup {
    pub scenario: Scenario,
    pub system: Box<dyn ControlAffineSystem>,
    pub chain: Box<dyn BarrierChain>,
    pub input_box: BoxSet,
    pub uncertainty: UncertaintyModel,
    pub margin_spec: MarginSpec,
    pub steps: usize,
}

fn config(e: Error) -> Error {
    match e {
        Error::Config(_) => e,
        other => Error::Config(other.to_string()),
    }
}

impl Setup {
    /// Builds the runtime objects. Lipschitz constants are loaded from the
    /// sidecar when one is configured, estimated when the filter needs them,
    /// and zero otherwise.
    pub fn new(scenario: Scenario) -> Result<Self> {
        scenario.validate()?;
        let obstacle = scenario.obstacle_spec().map_err(config)?;
        let (system, chain): (Box<dyn ControlAffineSystem>, Box<dyn BarrierChain>) =
            match scenario.scenario.system {
                SystemKind::Unicycle => {
                    let a = &scenario.barrier.alpha;
                    (
                        Box::new(Unicycle),
                        Box::new(UnicycleObstacleChain::new(obstacle, [a[0], a[1]]).map_err(config)?),
                    )
                }
                SystemKind::SingleIntegrator => (
                    Box::new(SingleIntegrator),
                    Box::new(
                        SingleIntegratorObstacleChain::new(obstacle, scenario.barrier.alpha[0])
                            .map_err(config)?,
                    ),
                ),
            };
        let input_box = scenario.input_box().map_err(config)?;
        let u = &scenario.uncertainty;
        let dist_box = BoxSet::new(u.dist_lo.clone(), u.dist_hi.clone()).map_err(config)?;
        let meas_box = BoxSet::new(u.meas_lo.clone(), u.meas_hi.clone()).map_err(config)?;
        let gamma = u.gamma.unwrap_or_else(|| dist_box.max_norm());
        let epsilon = u.epsilon.unwrap_or_else(|| meas_box.max_norm());
        let uncertainty =
            UncertaintyModel::with_bounds(dist_box, gamma, meas_box, epsilon).map_err(config)?;

        let estimates = match &scenario.constants.sidecar {
            Some(path) if path.exists() => LipschitzEstimates::load(path).map_err(config)?,
            _ if matches!(scenario.filter.kind, FilterKind::Ct | FilterKind::Sd) => {
                estimate_for(&scenario, system.as_ref(), chain.as_ref(), &input_box)?
            }
            _ => LipschitzEstimates::zero(),
        };
        let method = match scenario.filter.kind {
            FilterKind::Ct => MarginMethod::LipschitzCt,
            FilterKind::Sd => MarginMethod::LipschitzSd,
            _ => MarginMethod::Reach,
        };
        let margin_spec =
            MarginSpec::new(estimates, scenario.scenario.period, uncertainty.clone(), method).map_err(config)?;
        let steps = scenario.steps();
        Ok(Self {
            scenario,
            system,
            chain,
            input_box,
            uncertainty,
            margin_spec,
            steps,
        })
    }

    /// Samples the Lipschitz constants on the configured domain.
    pub fn estimate_constants(&self) -> Result<LipschitzEstimates> {
        estimate_for(&self.scenario, self.system.as_ref(), self.chain.as_ref(), &self.input_box)
    }
}

fn estimate_for(
    scenario: &Scenario,
    system: &dyn ControlAffineSystem,
    chain: &dyn BarrierChain,
    input_box: &BoxSet,
) -> Result<LipschitzEstimates> {
    let c = &scenario.constants;
    let domain = BoxSet::new(c.domain_lo.clone(), c.domain_hi.clone()).map_err(config)?;
    let settings = EstimationSettings {
        samples: c.samples,
        safety_factor: c.safety_factor,
        seed: c.seed,
    };
    estimate_constants(system, chain, &domain, input_box, &settings).map_err(config)
}
