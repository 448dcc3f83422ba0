//! Robust safety constraints and the minimally invasive input correction.
//!
//! Every constraint flavour reduces to one affine inequality `a . u + b >= 0`:
//! norm terms in `|u|` are replaced by the largest input norm on the box.
//! The correction then minimises `|u - u_perf|^2 / 2` over that half-space
//! intersected with the input box, solved exactly by enumerating active sets.

use serde::{Deserialize, Serialize};

use crate::barrier::BarrierChain;
use crate::dynamics::{dot, norm, BoxSet};
use crate::error::{check_dim, Error, Result};
use crate::margins::{
    disturbance_bound, lipschitz_margin_ct, lipschitz_margin_sd, state_deviation_bound, MarginSpec,
};
use crate::reach::ReachBox;

/// Half-space `a . u + b >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineConstraint {
    pub a: Vec<f64>,
    pub b: f64,
    /// Amount subtracted from the nominal offset.
    pub margin: f64,
}

impl AffineConstraint {
    pub fn slack(&self, u: &[f64]) -> f64 {
        dot(&self.a, u) + self.b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Vanilla,
    CtRobust,
    SdRobust,
    ReachRobust,
}

/// Filter selection as exposed to configs and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    None,
    Vanilla,
    Ct,
    Sd,
    #[default]
    Reach,
}

impl FilterKind {
    pub fn constraint_kind(self) -> Option<ConstraintKind> {
        match self {
            FilterKind::None => None,
            FilterKind::Vanilla => Some(ConstraintKind::Vanilla),
            FilterKind::Ct => Some(ConstraintKind::CtRobust),
            FilterKind::Sd => Some(ConstraintKind::SdRobust),
            FilterKind::Reach => Some(ConstraintKind::ReachRobust),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::None => "none",
            FilterKind::Vanilla => "vanilla",
            FilterKind::Ct => "ct",
            FilterKind::Sd => "sd",
            FilterKind::Reach => "reach",
        }
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FilterKind::None),
            "vanilla" => Ok(FilterKind::Vanilla),
            "ct" => Ok(FilterKind::Ct),
            "sd" => Ok(FilterKind::Sd),
            "reach" => Ok(FilterKind::Reach),
            other => Err(Error::Config(format!("unknown filter kind `{other}`"))),
        }
    }
}

/// Builds the constraint of the requested flavour at the estimate `x_hat`.
///
/// `tube` must be given for [`ConstraintKind::ReachRobust`] and is ignored otherwise.
pub fn build_constraint(
    kind: ConstraintKind,
    chain: &dyn BarrierChain,
    spec: &MarginSpec,
    input_box: &BoxSet,
    x_hat: &[f64],
    tube: Option<&ReachBox>,
) -> Result<AffineConstraint> {
    check_dim("state estimate", chain.state_dim(), x_hat.len())?;
    let lie = chain.lie(x_hat);
    check_dim("input box", lie.lg.len(), input_box.dim())?;
    let b_nominal = lie.lf + chain.alpha_last().eval(lie.psi);
    let u_max = input_box.max_norm();
    let gamma = spec.uncertainty.gamma;
    let l_lp = spec.estimates.l_lp;

    let margin = match kind {
        ConstraintKind::Vanilla => 0.0,
        ConstraintKind::CtRobust => {
            let eps = spec.uncertainty.epsilon;
            lipschitz_margin_ct(spec, u_max)
                + disturbance_bound(chain, x_hat, gamma, u_max)
                + l_lp * eps * gamma
        }
        ConstraintKind::SdRobust => {
            let dev = state_deviation_bound(spec);
            lipschitz_margin_sd(spec, u_max)
                + disturbance_bound(chain, x_hat, gamma, u_max)
                + l_lp * dev * gamma
        }
        ConstraintKind::ReachRobust => {
            let tube = tube.ok_or(Error::MissingTube)?;
            check_dim("reach tube", chain.state_dim(), tube.dim())?;
            reach_margin(chain, x_hat, tube, input_box, &spec.uncertainty.dist_box)
        }
    };
    Ok(AffineConstraint {
        a: lie.lg,
        b: b_nominal - margin,
        margin,
    })
}

/// Worst-case loss `-inf (psi_m(y, u, d) - psi_m(x_hat, u, 0))` over the reach
/// set, the input box and the disturbance box. Never negative because the
/// estimate itself with `d = 0` is admissible.
pub fn reach_margin(
    chain: &dyn BarrierChain,
    x_hat: &[f64],
    tube: &ReachBox,
    input_box: &BoxSet,
    dist_box: &BoxSet,
) -> f64 {
    let enclosure = chain.margin_enclosure(
        x_hat,
        &tube.intervals,
        &input_box.intervals(),
        &dist_box.intervals(),
    );
    (-enclosure.lo).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterMode {
    Inactive,
    Active,
    ClampedInfeasible,
}

impl FilterMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterMode::Inactive => "inactive",
            FilterMode::Active => "active",
            FilterMode::ClampedInfeasible => "clamped_infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterResult {
    pub u_safe: Vec<f64>,
    pub slack: f64,
    pub feasible: bool,
    pub mode: FilterMode,
}

pub fn objective(u: &[f64], u_perf: &[f64]) -> f64 {
    0.5 * u.iter().zip(u_perf).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
}

/// Input in the box with the largest slack; free coordinates stay at the
/// projection of `u_perf`.
fn max_slack_point(u_perf: &[f64], c: &AffineConstraint, bx: &BoxSet) -> Vec<f64> {
    let proj = bx.project(u_perf);
    (0..proj.len())
        .map(|i| {
            if c.a[i] > 0.0 {
                bx.hi()[i]
            } else if c.a[i] < 0.0 {
                bx.lo()[i]
            } else {
                proj[i]
            }
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq)]
enum Face {
    Free,
    Lower,
    Upper,
}

/// Active-face assignments ordered by number of fixed coordinates, then lexicographically.
fn face_assignments(q: usize) -> Vec<Vec<Face>> {
    let mut all: Vec<Vec<Face>> = (0..3usize.pow(q as u32))
        .map(|mut code| {
            (0..q)
                .map(|_| {
                    let f = match code % 3 {
                        0 => Face::Free,
                        1 => Face::Lower,
                        _ => Face::Upper,
                    };
                    code /= 3;
                    f
                })
                .collect()
        })
        .collect();
    let key = |v: &Vec<Face>| -> (usize, Vec<u8>) {
        let fixed = v.iter().filter(|f| **f != Face::Free).count();
        (fixed, v.iter().map(|f| *f as u8).collect())
    };
    all.sort_by_key(key);
    all
}

const FEAS_TOL: f64 = 1e-12;

/// Exact minimiser of `|u - u_perf|^2 / 2` subject to `a . u + b >= 0` and the box.
///
/// Infeasible instances return the point of largest slack with
/// [`FilterMode::ClampedInfeasible`] rather than an error.
pub fn solve_safety_filter(u_perf: &[f64], c: &AffineConstraint, bx: &BoxSet) -> FilterResult {
    let q = u_perf.len();
    debug_assert_eq!(c.a.len(), q);
    debug_assert_eq!(bx.dim(), q);

    let best_effort = max_slack_point(u_perf, c, bx);
    if c.slack(&best_effort) < 0.0 {
        return FilterResult {
            slack: c.slack(&best_effort),
            u_safe: best_effort,
            feasible: false,
            mode: FilterMode::ClampedInfeasible,
        };
    }

    let proj = bx.project(u_perf);
    if c.slack(&proj) >= 0.0 {
        return FilterResult {
            slack: c.slack(&proj),
            u_safe: proj,
            feasible: true,
            mode: FilterMode::Inactive,
        };
    }

    let scale = 1.0 + c.b.abs() + norm(&c.a) * bx.max_norm();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for faces in face_assignments(q) {
        let mut u: Vec<f64> = (0..q)
            .map(|i| match faces[i] {
                Face::Free => u_perf[i],
                Face::Lower => bx.lo()[i],
                Face::Upper => bx.hi()[i],
            })
            .collect();
        let a_free: f64 = (0..q)
            .filter(|i| faces[*i] == Face::Free)
            .map(|i| c.a[i] * c.a[i])
            .sum();
        let s0 = c.slack(&u);
        if a_free > 0.0 {
            let lambda = -s0 / a_free;
            for i in 0..q {
                if faces[i] == Face::Free {
                    u[i] += lambda * c.a[i];
                }
            }
        } else if s0.abs() > FEAS_TOL * scale {
            continue;
        }
        let in_box = (0..q).all(|i| {
            let tol = FEAS_TOL * (1.0 + bx.lo()[i].abs().max(bx.hi()[i].abs()));
            u[i] >= bx.lo()[i] - tol && u[i] <= bx.hi()[i] + tol
        });
        if !in_box || c.slack(&u) < -FEAS_TOL * scale {
            continue;
        }
        let u = bx.project(&u);
        let obj = objective(&u, u_perf);
        let better = match &best {
            None => true,
            Some((b, _)) => obj < *b - 1e-14 * (1.0 + b.abs()),
        };
        if better {
            best = Some((obj, u));
        }
    }

    // The maximal-slack point is feasible, so some active set always is.
    let mut u = best.map(|(_, u)| u).unwrap_or(best_effort);
    restore_slack(&mut u, c, bx);
    FilterResult {
        slack: c.slack(&u),
        u_safe: u,
        feasible: true,
        mode: FilterMode::Active,
    }
}

/// Removes a rounding-level deficit by moving along `a` inside the box; the
/// step doubles until it survives rounding.
fn restore_slack(u: &mut [f64], c: &AffineConstraint, bx: &BoxSet) {
    let deficit = -c.slack(u);
    if deficit <= 0.0 {
        return;
    }
    let a2: f64 = c.a.iter().map(|v| v * v).sum();
    if a2 == 0.0 {
        return;
    }
    let mut step = deficit / a2;
    for _ in 0..64 {
        let cand: Vec<f64> = (0..u.len())
            .map(|i| (u[i] + step * c.a[i]).clamp(bx.lo()[i], bx.hi()[i]))
            .collect();
        if c.slack(&cand) >= 0.0 {
            u.copy_from_slice(&cand);
            return;
        }
        step *= 2.0;
    }
}

/// Brute-force reference for [`solve_safety_filter`] on a regular grid.
pub mod oracle {
    use super::*;

    fn axis(lo: f64, hi: f64, res: f64) -> Vec<f64> {
        let n = ((hi - lo) / res).round() as usize;
        (0..=n).map(|k| (lo + k as f64 * res).min(hi)).collect()
    }

    /// Grid minimiser of the filter objective among feasible grid points; if no
    /// grid point is feasible, the grid point of largest slack.
    ///
    /// All but the last coordinate are enumerated; along the last one the
    /// feasible grid points form a contiguous run, so only the points near
    /// `u_perf` and near the ends of the run need checking.
    pub fn grid_oracle(u_perf: &[f64], c: &AffineConstraint, bx: &BoxSet, resolution: f64) -> Vec<f64> {
        assert!(resolution > 0.0, "grid resolution must be positive");
        let q = u_perf.len();
        let axes: Vec<Vec<f64>> = (0..q)
            .map(|i| axis(bx.lo()[i], bx.hi()[i], resolution))
            .collect();

        let mut best: Option<(f64, Vec<f64>)> = None;
        let mut prefix = vec![0.0; q];
        search(0, &axes, u_perf, c, &mut prefix, &mut best);
        match best {
            Some((_, u)) => u,
            None => {
                let target = max_slack_point(u_perf, c, bx);
                (0..q).map(|i| nearest(&axes[i], target[i])).collect()
            }
        }
    }

    fn nearest(axis: &[f64], t: f64) -> f64 {
        *axis
            .iter()
            .min_by(|a, b| (*a - t).abs().total_cmp(&(*b - t).abs()))
            .expect("non-empty axis")
    }

    fn search(
        level: usize,
        axes: &[Vec<f64>],
        u_perf: &[f64],
        c: &AffineConstraint,
        u: &mut Vec<f64>,
        best: &mut Option<(f64, Vec<f64>)>,
    ) {
        let q = axes.len();
        if level + 1 < q {
            for &v in &axes[level] {
                u[level] = v;
                search(level + 1, axes, u_perf, c, u, best);
            }
            return;
        }
        let last = &axes[level];
        let n = last.len();
        let lo = last[0];
        u[level] = 0.0;
        let rest = c.slack(u);
        let aj = c.a[level];
        // feasible values of the last coordinate form one interval [tl, th]
        let (tl, th) = if aj > 0.0 {
            (-rest / aj, f64::INFINITY)
        } else if aj < 0.0 {
            (f64::NEG_INFINITY, -rest / aj)
        } else if rest >= 0.0 {
            (f64::NEG_INFINITY, f64::INFINITY)
        } else {
            return;
        };
        let index_of = |t: f64| -> isize {
            let k = if t.is_finite() {
                ((t - lo) / (last[n - 1] - lo).max(f64::MIN_POSITIVE) * (n - 1) as f64).round()
            } else if t > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            k.clamp(0.0, (n - 1) as f64) as isize
        };
        let target = u_perf[level].max(tl).min(th);
        let mut pick: Option<(usize, f64)> = None;
        for centre in [index_of(target), index_of(tl), index_of(th)] {
            for k in (centre - 2)..=(centre + 2) {
                if k < 0 || k >= n as isize {
                    continue;
                }
                let k = k as usize;
                u[level] = last[k];
                if c.slack(u) < 0.0 {
                    continue;
                }
                let d = (last[k] - u_perf[level]).abs();
                if pick.is_none_or(|(_, bd)| d < bd) {
                    pick = Some((k, d));
                }
            }
        }
        if let Some((k, _)) = pick {
            u[level] = last[k];
            let obj = objective(u, u_perf);
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                *best = Some((obj, u.clone()));
            }
        }
    }
}
