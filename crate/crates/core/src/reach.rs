//! Interval over-approximation of the states reachable during one sampling period.
//!
//! Each substep of length `h` first finds an a priori enclosure `C` with
//! `X + [0, h] F(C) ⊆ C`, where `F` is the interval extension of the vector
//! field over the input and disturbance boxes. Every solution starting in `X`
//! then stays in `X + [0, h] F(C)` over the whole substep and ends in
//! `X + h F(C)`. The disturbance may vary arbitrarily inside its box.

use serde::{Deserialize, Serialize};

use crate::dynamics::{BoxSet, ControlAffineSystem};
use crate::error::{check_dim, Error, Result};
use crate::interval::Interval;

const MAX_ENCLOSURE_ITERS: usize = 40;

/// Product of intervals, one per state component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachBox {
    pub intervals: Vec<Interval>,
}

impl ReachBox {
    pub fn new(intervals: Vec<Interval>) -> Self {
        Self { intervals }
    }

    pub fn point(x: &[f64]) -> Self {
        Self::new(x.iter().map(|v| Interval::point(*v)).collect())
    }

    /// `x_hat - E`: the true states compatible with an estimate `x_hat = x + e`, `e ∈ E`.
    pub fn from_estimate(x_hat: &[f64], meas_box: &BoxSet) -> Result<Self> {
        check_dim("measurement box", x_hat.len(), meas_box.dim())?;
        Ok(Self::new(
            x_hat
                .iter()
                .zip(meas_box.lo().iter().zip(meas_box.hi()))
                .map(|(x, (lo, hi))| Interval::new(x - hi, x - lo))
                .collect(),
        ))
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && self.intervals.iter().zip(x).all(|(i, v)| i.contains(*v))
    }

    pub fn contains_box(&self, other: &ReachBox) -> bool {
        self.dim() == other.dim()
            && self
                .intervals
                .iter()
                .zip(&other.intervals)
                .all(|(a, b)| a.contains_interval(b))
    }

    pub fn widths(&self) -> Vec<f64> {
        self.intervals.iter().map(Interval::width).collect()
    }

    pub fn to_box(&self) -> BoxSet {
        BoxSet::from_intervals(&self.intervals)
    }
}

/// Component-wise hull of a non-empty list of boxes.
pub fn hull(boxes: &[ReachBox]) -> Result<ReachBox> {
    let (first, rest) = boxes
        .split_first()
        .ok_or_else(|| Error::InvalidArgument("hull of an empty list".into()))?;
    let mut out = first.clone();
    for b in rest {
        check_dim("hull operand", out.dim(), b.dim())?;
        for (o, i) in out.intervals.iter_mut().zip(&b.intervals) {
            *o = o.hull(i);
        }
    }
    Ok(out)
}

/// Which reach set feeds the margin: the whole-period tube or only the
/// set at the end of the period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReachMode {
    #[default]
    Tube,
    Endpoint,
}

fn widen(b: &[Interval], frac: f64) -> Vec<Interval> {
    b.iter()
        .map(|i| {
            let pad = frac * i.width() + 1e-12 * (1.0 + i.mag());
            Interval::new(i.lo - pad, i.hi + pad)
        })
        .collect()
}

fn contains_all(outer: &[Interval], inner: &[Interval]) -> bool {
    outer.iter().zip(inner).all(|(o, i)| o.contains_interval(i))
}

fn sweep(x: &[Interval], rate: &[Interval], h: f64) -> Vec<Interval> {
    let span = Interval::new(0.0, h);
    x.iter().zip(rate).map(|(a, r)| *a + span * *r).collect()
}

/// One substep: returns `(enclosure over [0, h], enclosure at h)`.
fn substep(
    sys: &dyn ControlAffineSystem,
    x: &[Interval],
    u: &[Interval],
    d: &[Interval],
    h: f64,
) -> Result<(Vec<Interval>, Vec<Interval>)> {
    let mut candidate = sweep(x, &sys.field_enclosure(x, u, d), h);
    for iter in 0..MAX_ENCLOSURE_ITERS {
        let swept = sweep(x, &sys.field_enclosure(&candidate, u, d), h);
        if contains_all(&candidate, &swept) {
            let rate = sys.field_enclosure(&swept, u, d);
            let tube = sweep(x, &rate, h);
            let end = x.iter().zip(&rate).map(|(a, r)| *a + r.scale(h)).collect();
            return Ok((tube, end));
        }
        candidate = widen(&swept, 0.1 * (iter + 1) as f64);
    }
    Err(Error::EnclosureDiverged(MAX_ENCLOSURE_ITERS))
}

struct Propagation {
    tube: ReachBox,
    end: ReachBox,
}

fn propagate(
    sys: &dyn ControlAffineSystem,
    init: ReachBox,
    inputs: &BoxSet,
    dist_box: &BoxSet,
    t: f64,
    substeps: usize,
) -> Result<Propagation> {
    check_dim("reach initial set", sys.state_dim(), init.dim())?;
    check_dim("input box", sys.input_dim(), inputs.dim())?;
    check_dim("disturbance box", sys.dist_dim(), dist_box.dim())?;
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidArgument(format!("reach time must be >= 0, got {t}")));
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("need at least one substep".into()));
    }
    let u = inputs.intervals();
    let d = dist_box.intervals();
    let h = t / substeps as f64;
    let mut current = init.intervals.clone();
    let mut tube = init;
    if t == 0.0 {
        return Ok(Propagation {
            end: tube.clone(),
            tube,
        });
    }
    for _ in 0..substeps {
        let (piece, end) = substep(sys, &current, &u, &d, h)?;
        for (o, i) in tube.intervals.iter_mut().zip(&piece) {
            *o = o.hull(i);
        }
        current = end;
    }
    Ok(Propagation {
        tube,
        end: ReachBox::new(current),
    })
}

/// Enclosure of the states at time `t` from every `x ∈ x_hat - meas_box`,
/// every input in `inputs` held constant and every disturbance signal in
/// `dist_box`.
pub fn reach_step(
    sys: &dyn ControlAffineSystem,
    x_hat: &[f64],
    meas_box: &BoxSet,
    inputs: &BoxSet,
    dist_box: &BoxSet,
    t: f64,
    substeps: usize,
) -> Result<ReachBox> {
    let init = ReachBox::from_estimate(x_hat, meas_box)?;
    Ok(propagate(sys, init, inputs, dist_box, t, substeps)?.end)
}

/// Enclosure of every state visited over `[0, period]`.
pub fn reach_tube(
    sys: &dyn ControlAffineSystem,
    x_hat: &[f64],
    meas_box: &BoxSet,
    inputs: &BoxSet,
    dist_box: &BoxSet,
    period: f64,
    n_sub: usize,
) -> Result<ReachBox> {
    let init = ReachBox::from_estimate(x_hat, meas_box)?;
    Ok(propagate(sys, init, inputs, dist_box, period, n_sub)?.tube)
}

/// The reach set selected by `mode`.
#[allow(clippy::too_many_arguments)]
pub fn reach_set(
    mode: ReachMode,
    sys: &dyn ControlAffineSystem,
    x_hat: &[f64],
    meas_box: &BoxSet,
    inputs: &BoxSet,
    dist_box: &BoxSet,
    period: f64,
    n_sub: usize,
) -> Result<ReachBox> {
    match mode {
        ReachMode::Tube => reach_tube(sys, x_hat, meas_box, inputs, dist_box, period, n_sub),
        ReachMode::Endpoint => reach_step(sys, x_hat, meas_box, inputs, dist_box, period, n_sub),
    }
}
