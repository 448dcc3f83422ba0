//! Control-affine disturbed dynamics `x' = f(x) + g(x) u + p(x) d`,
//! zero-order-hold integration and the additive noise models.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::interval::Interval;

/// Axis-aligned box `{ z : lo <= z <= hi }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxSet {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxSet {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        check_dim("box upper bound", lo.len(), hi.len())?;
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidArgument(format!(
                "box bounds must satisfy lo <= hi, got {lo:?} / {hi:?}"
            )));
        }
        Ok(Self { lo, hi })
    }

    /// Box `[-r_i, r_i]` per component.
    pub fn symmetric(radius: &[f64]) -> Result<Self> {
        Self::new(radius.iter().map(|r| -r).collect(), radius.to_vec())
    }

    pub fn point(x: &[f64]) -> Self {
        Self {
            lo: x.to_vec(),
            hi: x.to_vec(),
        }
    }

    pub fn from_intervals(ivs: &[Interval]) -> Self {
        Self {
            lo: ivs.iter().map(|i| i.lo).collect(),
            hi: ivs.iter().map(|i| i.hi).collect(),
        }
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn intervals(&self) -> Vec<Interval> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| Interval::new(l, h))
            .collect()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim()
            && z
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn contains_origin(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| *l <= 0.0 && 0.0 <= *h)
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l == h)
    }

    /// Component-wise clamp onto the box.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(v, (l, h))| v.clamp(*l, *h))
            .collect()
    }

    /// All `2^dim` vertices, in binary counting order (bit i set = upper bound on axis i).
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| {
                        if mask & (1 << i) != 0 {
                            self.hi[i]
                        } else {
                            self.lo[i]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Largest Euclidean norm over the vertices, i.e. over the whole box.
    pub fn max_norm(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| l.abs().max(h.abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(&l, &h)| if l == h { l } else { rng.gen_range(l..=h) })
            .collect()
    }
}

/// Dense row-major matrix, only as large as the vector fields need.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        Self {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * v[c]).sum())
            .collect()
    }

    /// Spectral norm, by power iteration on `A^T A`.
    pub fn operator_norm(&self) -> f64 {
        if self.cols == 0 || self.data.iter().all(|v| *v == 0.0) {
            return 0.0;
        }
        let mut w = vec![1.0 / (self.cols as f64).sqrt(); self.cols];
        let mut sigma2 = 0.0;
        for _ in 0..200 {
            let aw = self.mul_vec(&w);
            let ata_w: Vec<f64> = (0..self.cols)
                .map(|c| (0..self.rows).map(|r| self.get(r, c) * aw[r]).sum())
                .collect();
            let n = norm(&ata_w);
            if n == 0.0 {
                break;
            }
            sigma2 = n;
            w = ata_w.iter().map(|v| v / n).collect();
        }
        sigma2.sqrt()
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A control-affine system with an additive disturbance channel.
pub trait ControlAffineSystem: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn dist_dim(&self) -> usize;

    fn drift(&self, x: &[f64]) -> Vec<f64>;
    /// `n x q` input matrix.
    fn input_matrix(&self, x: &[f64]) -> Matrix;
    /// `n x v` disturbance matrix.
    fn disturbance_matrix(&self, x: &[f64]) -> Matrix;

    /// Interval enclosure of `f(x) + g(x) u + p(x) d` over boxes of states,
    /// inputs and disturbances.
    fn field_enclosure(&self, x: &[Interval], u: &[Interval], d: &[Interval]) -> Vec<Interval>;

    fn state_names(&self) -> Vec<&'static str>;

    /// Components whose estimates are logged (the ones a sensor measures with error).
    fn measured_components(&self) -> Vec<usize> {
        (0..self.state_dim()).collect()
    }
}

/// Kinematic unicycle with states `(x, y, heading, speed)`, inputs
/// `(turn rate, acceleration)` and a planar velocity disturbance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Unicycle;

impl ControlAffineSystem for Unicycle {
    fn state_dim(&self) -> usize {
        4
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn dist_dim(&self) -> usize {
        2
    }

    fn drift(&self, x: &[f64]) -> Vec<f64> {
        let (theta, v) = (x[2], x[3]);
        vec![v * theta.cos(), v * theta.sin(), 0.0, 0.0]
    }

    fn input_matrix(&self, _x: &[f64]) -> Matrix {
        Matrix::from_rows(&[&[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]])
    }

    fn disturbance_matrix(&self, _x: &[f64]) -> Matrix {
        Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]])
    }

    fn field_enclosure(&self, x: &[Interval], u: &[Interval], d: &[Interval]) -> Vec<Interval> {
        let (theta, v) = (x[2], x[3]);
        vec![v * theta.cos() + d[0], v * theta.sin() + d[1], u[0], u[1]]
    }

    fn state_names(&self) -> Vec<&'static str> {
        vec!["x", "y", "theta", "v"]
    }

    fn measured_components(&self) -> Vec<usize> {
        vec![0, 1]
    }
}

/// Planar single integrator `p' = u + d`; the relative-degree-one case.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SingleIntegrator;

impl ControlAffineSystem for SingleIntegrator {
    fn state_dim(&self) -> usize {
        2
    }
    fn input_dim(&self) -> usize {
        2
    }
    fn dist_dim(&self) -> usize {
        2
    }

    fn drift(&self, _x: &[f64]) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    fn input_matrix(&self, _x: &[f64]) -> Matrix {
        Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]])
    }

    fn disturbance_matrix(&self, _x: &[f64]) -> Matrix {
        Matrix::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]])
    }

    fn field_enclosure(&self, _x: &[Interval], u: &[Interval], d: &[Interval]) -> Vec<Interval> {
        vec![u[0] + d[0], u[1] + d[1]]
    }

    fn state_names(&self) -> Vec<&'static str> {
        vec!["x", "y"]
    }
}

/// `f(x) + g(x) u + p(x) d`.
pub fn eval_dynamics(
    sys: &dyn ControlAffineSystem,
    x: &[f64],
    u: &[f64],
    d: &[f64],
) -> Result<Vec<f64>> {
    check_dim("state", sys.state_dim(), x.len())?;
    check_dim("input", sys.input_dim(), u.len())?;
    check_dim("disturbance", sys.dist_dim(), d.len())?;
    Ok(field(sys, x, u, d))
}

fn field(sys: &dyn ControlAffineSystem, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64> {
    let mut out = sys.drift(x);
    let gu = sys.input_matrix(x).mul_vec(u);
    let pd = sys.disturbance_matrix(x).mul_vec(d);
    for ((o, a), b) in out.iter_mut().zip(gu).zip(pd) {
        *o += a + b;
    }
    out
}

fn axpy(x: &[f64], k: f64, dx: &[f64]) -> Vec<f64> {
    x.iter().zip(dx).map(|(a, b)| a + k * b).collect()
}

fn rk4(sys: &dyn ControlAffineSystem, x: &[f64], u: &[f64], d: &[f64], h: f64) -> Vec<f64> {
    let k1 = field(sys, x, u, d);
    let k2 = field(sys, &axpy(x, 0.5 * h, &k1), u, d);
    let k3 = field(sys, &axpy(x, 0.5 * h, &k2), u, d);
    let k4 = field(sys, &axpy(x, h, &k3), u, d);
    x.iter()
        .enumerate()
        .map(|(i, xi)| xi + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect()
}

/// Integrates over `[0, period]` with the input held, using `substeps` equal
/// classical RK4 steps. `d_signal` holds one disturbance per substep, or a
/// single entry held over the whole period.
pub fn rk4_zoh_step(
    sys: &dyn ControlAffineSystem,
    x: &[f64],
    u: &[f64],
    d_signal: &[Vec<f64>],
    period: f64,
    substeps: usize,
) -> Result<Vec<f64>> {
    check_dim("state", sys.state_dim(), x.len())?;
    check_dim("input", sys.input_dim(), u.len())?;
    if !(period >= 0.0) || substeps == 0 {
        return Err(Error::InvalidArgument(format!(
            "need period >= 0 and substeps >= 1, got {period} / {substeps}"
        )));
    }
    if d_signal.len() != 1 && d_signal.len() != substeps {
        return Err(Error::Dimension {
            what: "disturbance signal length",
            expected: substeps,
            got: d_signal.len(),
        });
    }
    for d in d_signal {
        check_dim("disturbance", sys.dist_dim(), d.len())?;
    }
    let h = period / substeps as f64;
    let mut state = x.to_vec();
    for k in 0..substeps {
        let d = if d_signal.len() == 1 {
            &d_signal[0]
        } else {
            &d_signal[k]
        };
        state = rk4(sys, &state, u, d, h);
    }
    Ok(state)
}

/// State estimate `x + e`.
pub fn apply_measurement(x: &[f64], e: &[f64]) -> Result<Vec<f64>> {
    check_dim("measurement error", x.len(), e.len())?;
    Ok(x.iter().zip(e).map(|(a, b)| a + b).collect())
}

/// Bounded disturbance and measurement-error sets with their norm bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyModel {
    pub dist_box: BoxSet,
    /// Bound on the Euclidean norm of every admissible disturbance.
    pub gamma: f64,
    pub meas_box: BoxSet,
    /// Bound on the Euclidean norm of every admissible estimate error.
    pub epsilon: f64,
}

impl UncertaintyModel {
    /// Uses the tightest valid norm bounds, the largest vertex norms of each box.
    pub fn from_boxes(dist_box: BoxSet, meas_box: BoxSet) -> Result<Self> {
        let gamma = dist_box.max_norm();
        let epsilon = meas_box.max_norm();
        Self::with_bounds(dist_box, gamma, meas_box, epsilon)
    }

    pub fn with_bounds(dist_box: BoxSet, gamma: f64, meas_box: BoxSet, epsilon: f64) -> Result<Self> {
        if !dist_box.contains_origin() || !meas_box.contains_origin() {
            return Err(Error::InvalidArgument(
                "uncertainty boxes must contain the origin".into(),
            ));
        }
        if gamma < dist_box.max_norm() || epsilon < meas_box.max_norm() {
            return Err(Error::InvalidArgument(format!(
                "norm bounds ({gamma}, {epsilon}) smaller than the box vertex norms ({}, {})",
                dist_box.max_norm(),
                meas_box.max_norm()
            )));
        }
        Ok(Self {
            dist_box,
            gamma,
            meas_box,
            epsilon,
        })
    }

    /// No disturbance and exact state measurements.
    pub fn none(state_dim: usize, dist_dim: usize) -> Self {
        Self {
            dist_box: BoxSet::point(&vec![0.0; dist_dim]),
            gamma: 0.0,
            meas_box: BoxSet::point(&vec![0.0; state_dim]),
            epsilon: 0.0,
        }
    }

    pub fn sample_disturbance<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.dist_box.sample(rng)
    }

    pub fn sample_measurement_error<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.meas_box.sample(rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn unicycle_field_examples() {
        let sys = Unicycle;
        let z = eval_dynamics(&sys, &[0.0; 4], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(z, vec![0.0; 4]);
        let z = eval_dynamics(&sys, &[0.0, 0.0, 0.0, 1.0], &[0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(z, vec![1.0, 0.0, 0.0, 0.0]);
        let z = eval_dynamics(&sys, &[0.0, 0.0, 0.0, 1.0], &[0.5, 1.0], &[0.1, -0.1]).unwrap();
        assert_close(&z, &[1.1, -0.1, 0.5, 1.0], 1e-15);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let err = eval_dynamics(&Unicycle, &[0.0; 3], &[0.0; 2], &[0.0; 2]).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
        assert!(rk4_zoh_step(&Unicycle, &[0.0; 4], &[0.0; 2], &vec![vec![0.0; 2]; 3], 0.1, 2).is_err());
    }

    #[test]
    fn rk4_examples() {
        let sys = Unicycle;
        let x = rk4_zoh_step(&sys, &[0.0, 0.0, 0.0, 1.0], &[0.0, 0.0], &[vec![0.0, 0.0]], 0.1, 1).unwrap();
        assert_close(&x, &[0.1, 0.0, 0.0, 1.0], 1e-15);
        // x(t) = t + t^2/2 is a quadratic, integrated exactly by RK4.
        let x = rk4_zoh_step(&sys, &[0.0, 0.0, 0.0, 1.0], &[0.0, 1.0], &[vec![0.0, 0.0]], 0.1, 1).unwrap();
        assert_close(&x, &[0.105, 0.0, 0.0, 1.1], 1e-15);
        let x = rk4_zoh_step(&sys, &[0.0; 4], &[0.0, 0.0], &[vec![0.3, 0.3]], 0.1, 1).unwrap();
        assert_close(&x, &[0.03, 0.03, 0.0, 0.0], 1e-15);
    }

    #[test]
    fn measurement_is_additive() {
        let x = [5.0, 25.0, 0.0, 1.0];
        assert_eq!(apply_measurement(&x, &[0.0; 4]).unwrap(), x.to_vec());
        assert_eq!(
            apply_measurement(&x, &[0.5, -0.5, 0.0, 0.0]).unwrap(),
            vec![5.5, 24.5, 0.0, 1.0]
        );
    }

    #[test]
    fn sampled_errors_stay_in_box() {
        let meas = BoxSet::new(vec![-0.5, -0.5, 0.0, 0.0], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let model = UncertaintyModel::from_boxes(BoxSet::symmetric(&[0.3, 0.3]).unwrap(), meas).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let e = model.sample_measurement_error(&mut rng);
            assert!(model.meas_box.contains(&e));
            assert_eq!((e[2], e[3]), (0.0, 0.0));
            assert!(model.dist_box.contains(&model.sample_disturbance(&mut rng)));
        }
    }

    #[test]
    fn norm_bounds_from_corners() {
        let meas = BoxSet::new(vec![-0.5, -0.5, 0.0, 0.0], vec![0.5, 0.5, 0.0, 0.0]).unwrap();
        let m = UncertaintyModel::from_boxes(BoxSet::symmetric(&[0.3, 0.3]).unwrap(), meas).unwrap();
        assert!((m.gamma - 0.3 * 2f64.sqrt()).abs() < 1e-15);
        assert!((m.epsilon - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        for c in m.dist_box.corners() {
            assert!(norm(&c) <= m.gamma);
        }
    }

    #[test]
    fn invalid_uncertainty_rejected() {
        let off = BoxSet::new(vec![0.1, 0.1], vec![0.3, 0.3]).unwrap();
        let meas = BoxSet::symmetric(&[0.5, 0.5]).unwrap();
        assert!(UncertaintyModel::from_boxes(off, meas.clone()).is_err());
        let d = BoxSet::symmetric(&[0.3, 0.3]).unwrap();
        assert!(UncertaintyModel::with_bounds(d, 0.3, meas, 1.0).is_err());
        assert!(BoxSet::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn operator_norm_of_selector_is_one() {
        let p = Unicycle.disturbance_matrix(&[0.0; 4]);
        assert!((p.operator_norm() - 1.0).abs() < 1e-12);
        let m = Matrix::from_rows(&[&[3.0, 0.0], &[4.0, 0.0]]);
        assert!((m.operator_norm() - 5.0).abs() < 1e-12);
    }
}
