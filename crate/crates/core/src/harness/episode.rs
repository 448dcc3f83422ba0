use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::{apply_measurement, rk4_zoh_step};
use crate::error::Result;
use crate::filter::{build_constraint, solve_safety_filter, AffineConstraint, FilterMode};
use crate::reach::{reach_set, reach_tube, ReachBox, ReachMode};

use super::controller::perf_controller;
use super::setup::Setup;

/// One control step. The true state, estimate and input are those at `t`;
/// `dense` holds the true states at the intra-period check points, ending
/// with the state at `t + T` (empty for the final record).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub state: Vec<f64>,
    pub estimate: Vec<f64>,
    pub disturbance: Vec<f64>,
    pub u_perf: Vec<f64>,
    pub u_safe: Vec<f64>,
    pub h: f64,
    pub psi1: f64,
    pub slack: f64,
    pub feasible: bool,
    pub mode: FilterMode,
    pub constraint: Option<AffineConstraint>,
    /// Enclosure of every state reachable over `[t, t + T]`.
    pub reach_box: ReachBox,
    /// Smallest `h` over `t` and the dense points of this period.
    pub min_h_step: f64,
    #[serde(skip)]
    pub dense: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub seed: u64,
    pub records: Vec<StepRecord>,
}

impl Trajectory {
    /// Minimum of `h` over every record and dense point.
    pub fn min_h(&self) -> f64 {
        self.records.iter().map(|r| r.min_h_step).fold(f64::INFINITY, f64::min)
    }

    pub fn infeasible_steps(&self) -> usize {
        self.records.iter().filter(|r| !r.feasible).count()
    }

    pub fn mode_count(&self, mode: FilterMode) -> usize {
        self.records.iter().filter(|r| r.mode == mode).count()
    }

    pub fn final_state(&self) -> &[f64] {
        &self.records.last().expect("trajectories are never empty").state
    }

    /// Dense points (and step ends) that leave the logged reach box of their period.
    pub fn reach_violations(&self) -> usize {
        self.records
            .iter()
            .map(|r| r.dense.iter().filter(|x| !r.reach_box.contains(x)).count())
            .sum()
    }
}

/// Runs one closed-loop episode; deterministic in `seed`.
///
/// Per step: draw the estimate error, compute the performance input, build and
/// solve the configured filter, draw one disturbance held over the period, and
/// integrate the true state with RK4.
pub fn run_episode(setup: &Setup, seed: u64) -> Result<Trajectory> {
    let sc = &setup.scenario;
    let sys = setup.system.as_ref();
    let chain = setup.chain.as_ref();
    let period = sc.scenario.period;
    let dense_n = sc.simulation.dense_samples;
    let kind = sc.filter.kind.constraint_kind();
    let meas_box = &setup.uncertainty.meas_box;
    let dist_box = &setup.uncertainty.dist_box;
    let n_sub = sc.filter.reach_substeps;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = sc.scenario.start.clone();
    let mut records = Vec::with_capacity(setup.steps + 1);

    for k in 0..=setup.steps {
        let t = k as f64 * period;
        let e = setup.uncertainty.sample_measurement_error(&mut rng);
        let x_hat = apply_measurement(&x, &e)?;
        let u_perf = perf_controller(sc.scenario.system, &sc.controller, &x_hat, sc.scenario.goal, &setup.input_box);

        let tube = reach_tube(sys, &x_hat, meas_box, &setup.input_box, dist_box, period, n_sub)?;
        let (u_safe, slack, feasible, mode, constraint) = match kind {
            None => (u_perf.clone(), f64::NAN, true, FilterMode::Inactive, None),
            Some(kind) => {
                let margin_set = match sc.filter.reach_mode {
                    ReachMode::Tube => tube.clone(),
                    mode => reach_set(mode, sys, &x_hat, meas_box, &setup.input_box, dist_box, period, n_sub)?,
                };
                let c = build_constraint(kind, chain, &setup.margin_spec, &setup.input_box, &x_hat, Some(&margin_set))?;
                let r = solve_safety_filter(&u_perf, &c, &setup.input_box);
                (r.u_safe, r.slack, r.feasible, r.mode, Some(c))
            }
        };

        let d = setup.uncertainty.sample_disturbance(&mut rng);
        let h = chain.h(&x);
        let psi1 = chain.psi(&x, &u_safe, &d)[1];
        let mut min_h_step = h;
        let mut dense = Vec::new();
        if k < setup.steps {
            let sig = [d.clone()];
            for j in 1..=dense_n {
                let tj = period * j as f64 / dense_n as f64;
                let xj = rk4_zoh_step(sys, &x, &u_safe, &sig, tj, j * sc.simulation.integration_substeps)?;
                min_h_step = min_h_step.min(chain.h(&xj));
                dense.push(xj);
            }
        }
        let next = dense.last().cloned();
        records.push(StepRecord {
            t,
            state: x.clone(),
            estimate: x_hat,
            disturbance: d,
            u_perf,
            u_safe,
            h,
            psi1,
            slack,
            feasible,
            mode,
            constraint,
            reach_box: tube,
            min_h_step,
            dense,
        });
        if let Some(next) = next {
            x = next;
        }
    }
    Ok(Trajectory { seed, records })
}
