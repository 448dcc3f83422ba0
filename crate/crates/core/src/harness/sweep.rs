use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reach::reach_tube;

use super::config::whole_multiple;
use super::setup::Setup;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub t: f64,
    /// Lower bound of `psi_m(y, u, d) - psi_m(x_hat, u, 0)` over the tube,
    /// input box and disturbance box; its magnitude is the robust margin.
    pub margin: f64,
}

/// Reach margins at the start state for growing look-ahead times.
///
/// All tubes share one substep length, so a longer tube contains every
/// shorter one and the margins are ordered.
pub fn margin_sweep(setup: &Setup, times: &[f64]) -> Result<Vec<SweepRow>> {
    let sc = &setup.scenario;
    let step = sc.sweep.substep;
    let x_hat = &sc.scenario.start;
    let mut prev = 0.0;
    times
        .iter()
        .map(|&t| {
            if !(t > prev) {
                return Err(Error::InvalidArgument(
                    "sweep times must be positive and ascending".into(),
                ));
            }
            prev = t;
            let n_sub = whole_multiple(t, step).ok_or_else(|| {
                Error::InvalidArgument(format!("sweep time {t} is not a multiple of {step}"))
            })?;
            let tube = reach_tube(
                setup.system.as_ref(),
                x_hat,
                &setup.uncertainty.meas_box,
                &setup.input_box,
                &setup.uncertainty.dist_box,
                t,
                n_sub,
            )?;
            let enclosure = setup.chain.margin_enclosure(
                x_hat,
                &tube.intervals,
                &setup.input_box.intervals(),
                &setup.uncertainty.dist_box.intervals(),
            );
            Ok(SweepRow { t, margin: enclosure.lo })
        })
        .collect()
}
