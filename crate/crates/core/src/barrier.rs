//! High-order barrier chains `psi_0 = h`, `psi_i = d/dt psi_{i-1} + alpha_i(psi_{i-1})`.
//!
//! Lie derivatives are closed forms per system/barrier pair. Two chains are
//! provided: the disk obstacle for the unicycle (input relative degree 2,
//! disturbance relative degree 1) and the disk obstacle for a planar single
//! integrator (relative degree 1, matched disturbance).

use serde::{Deserialize, Serialize};

use crate::dynamics::{dot, Matrix};
use crate::error::{Error, Result};
use crate::interval::{self, Interval};

/// Extended class-K function `alpha(s) = p * sign(s) * |s|^q`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum ClassK {
    Linear { p: f64 },
    Power { p: f64, q: f64 },
}

impl Default for ClassK {
    fn default() -> Self {
        ClassK::Linear { p: 1.0 }
    }
}

impl ClassK {
    pub fn linear(p: f64) -> Result<Self> {
        let k = ClassK::Linear { p };
        k.validate()?;
        Ok(k)
    }

    pub fn power(p: f64, q: f64) -> Result<Self> {
        let k = ClassK::Power { p, q };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let (p, q) = self.params();
        if !(p > 0.0 && p.is_finite()) || !(q >= 1.0 && q.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "class-K parameters need p > 0 and q >= 1, got p = {p}, q = {q}"
            )));
        }
        Ok(())
    }

    pub fn params(&self) -> (f64, f64) {
        match *self {
            ClassK::Linear { p } => (p, 1.0),
            ClassK::Power { p, q } => (p, q),
        }
    }

    pub fn is_linear(&self) -> bool {
        self.params().1 == 1.0
    }

    pub fn eval(&self, s: f64) -> f64 {
        match *self {
            ClassK::Linear { p } => p * s,
            ClassK::Power { p, q } => p * s.signum() * s.abs().powf(q),
        }
    }

    pub fn derivative(&self, s: f64) -> f64 {
        match *self {
            ClassK::Linear { p } => p,
            ClassK::Power { p, q } => p * q * s.abs().powf(q - 1.0),
        }
    }

    pub fn eval_interval(&self, s: Interval) -> Interval {
        match *self {
            ClassK::Linear { p } => s.scale(p),
            ClassK::Power { .. } => s.map_monotone(|v| self.eval(v)),
        }
    }

    pub fn derivative_interval(&self, s: Interval) -> Interval {
        match *self {
            ClassK::Linear { p } => Interval::point(p),
            ClassK::Power { p, q } => s.abs().powf_nonneg(q - 1.0).scale(p * q),
        }
    }
}

/// Disk obstacle of radius `safe_distance` around `center`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleSpec {
    pub center: [f64; 2],
    pub safe_distance: f64,
}

impl ObstacleSpec {
    pub fn new(center: [f64; 2], safe_distance: f64) -> Result<Self> {
        if !(safe_distance > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "safe distance must be positive, got {safe_distance}"
            )));
        }
        Ok(Self {
            center,
            safe_distance,
        })
    }
}

/// `h(x) = (x - x_o)^2 + (y - y_o)^2 - D^2`, read from the first two state components.
pub fn eval_h(spec: &ObstacleSpec, x: &[f64]) -> f64 {
    let dx = x[0] - spec.center[0];
    let dy = x[1] - spec.center[1];
    dx * dx + dy * dy - spec.safe_distance * spec.safe_distance
}

/// Terms that appear only when the disturbance enters one derivative before
/// the input (`drd = m - 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchTerms {
    /// Coefficients `c` with `L_f[L_p psi_{m-2} d] = c . d`.
    pub lf_lp: Vec<f64>,
    /// Matrix `M` with `L_p[L_p psi_{m-2} d] d = d^T M d`.
    pub lp_lp: Matrix,
    /// Matrix `N` with `L_g[L_p psi_{m-2} d] u = d^T N u`; zero whenever the
    /// disturbance does not reach the input channel.
    pub lg_lp: Matrix,
}

/// Lie derivatives of the last chain member `psi_{m-1}` (with the disturbance set to zero).
#[derive(Debug, Clone, PartialEq)]
pub struct LieBundle {
    pub psi: f64,
    pub lf: f64,
    pub lg: Vec<f64>,
    pub lp: Vec<f64>,
    /// `L_p psi_{m-2}`, the disturbance gain entering `psi_{m-1}`; equals
    /// `L_p h` for the two-step chain and is empty when the disturbance is matched.
    pub lp_prev: Vec<f64>,
    pub mismatch: Option<MismatchTerms>,
}

/// A barrier chain with closed-form Lie derivatives for one system.
pub trait BarrierChain: Send + Sync {
    /// Input relative degree `m`.
    fn relative_degree(&self) -> usize;
    fn disturbance_relative_degree(&self) -> usize;
    fn state_dim(&self) -> usize;
    /// `alpha_1 .. alpha_m`.
    fn class_k(&self) -> &[ClassK];

    fn h(&self, x: &[f64]) -> f64;
    /// `L_p h(x)`.
    fn lp_h(&self, x: &[f64]) -> Vec<f64>;

    /// `psi_0 .. psi_m` at `(x, u, d)`, with `d` held constant.
    fn psi(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64>;

    fn lie(&self, x: &[f64]) -> LieBundle;

    /// Enclosure of `psi_m(y, u, d) - psi_m(x_hat, u, 0)` over `y` in `states`,
    /// `u` in `inputs` and `d` in `dist`.
    fn margin_enclosure(
        &self,
        x_hat: &[f64],
        states: &[Interval],
        inputs: &[Interval],
        dist: &[Interval],
    ) -> Interval;

    fn alpha_last(&self) -> ClassK {
        *self.class_k().last().expect("chain has at least one class-K function")
    }

    fn is_mismatched(&self) -> bool {
        self.disturbance_relative_degree() < self.relative_degree()
    }
}

fn validate_alphas(alphas: &[ClassK]) -> Result<()> {
    alphas.iter().try_for_each(ClassK::validate)
}

/// Unicycle `(x, y, heading, speed)` kept outside a disk.
#[derive(Debug, Clone, PartialEq)]
pub struct UnicycleObstacleChain {
    obstacle: ObstacleSpec,
    alphas: [ClassK; 2],
}

/// Polynomial pieces of `h` and its derivatives along the unicycle fields.
struct UnicycleTerms<T> {
    h: T,
    lfh: T,
    lph: [T; 2],
    lf2h: T,
    lglfh: [T; 2],
    lplfh: [T; 2],
    lf_lp: [T; 2],
}

impl UnicycleObstacleChain {
    pub fn new(obstacle: ObstacleSpec, alphas: [ClassK; 2]) -> Result<Self> {
        validate_alphas(&alphas)?;
        Ok(Self { obstacle, alphas })
    }

    /// `p_1 = q_1 = p_2 = q_2 = 1`.
    pub fn with_unit_gains(obstacle: ObstacleSpec) -> Self {
        Self {
            obstacle,
            alphas: [ClassK::default(); 2],
        }
    }

    pub fn obstacle(&self) -> &ObstacleSpec {
        &self.obstacle
    }

    fn terms(&self, x: &[f64]) -> UnicycleTerms<f64> {
        let dx = x[0] - self.obstacle.center[0];
        let dy = x[1] - self.obstacle.center[1];
        let (s, c) = x[2].sin_cos();
        let v = x[3];
        let d2 = self.obstacle.safe_distance * self.obstacle.safe_distance;
        UnicycleTerms {
            h: dx * dx + dy * dy - d2,
            lfh: 2.0 * v * (c * dx + s * dy),
            lph: [2.0 * dx, 2.0 * dy],
            lf2h: 2.0 * v * v,
            lglfh: [2.0 * v * (c * dy - s * dx), 2.0 * (c * dx + s * dy)],
            lplfh: [2.0 * v * c, 2.0 * v * s],
            lf_lp: [2.0 * v * c, 2.0 * v * s],
        }
    }

    fn terms_interval(&self, x: &[Interval]) -> UnicycleTerms<Interval> {
        let dx = x[0] - self.obstacle.center[0];
        let dy = x[1] - self.obstacle.center[1];
        let (s, c) = (x[2].sin(), x[2].cos());
        let v = x[3];
        let d2 = self.obstacle.safe_distance * self.obstacle.safe_distance;
        let vc = v * c;
        let vs = v * s;
        UnicycleTerms {
            h: dx.sqr() + dy.sqr() - d2,
            lfh: (vc * dx + vs * dy).scale(2.0),
            lph: [dx.scale(2.0), dy.scale(2.0)],
            lf2h: v.sqr().scale(2.0),
            lglfh: [(vc * dy - vs * dx).scale(2.0), (c * dx + s * dy).scale(2.0)],
            lplfh: [vc.scale(2.0), vs.scale(2.0)],
            lf_lp: [vc.scale(2.0), vs.scale(2.0)],
        }
    }

    /// Nominal part of `psi_2`: everything that survives with `d = 0`.
    pub fn f_v(&self, x: &[f64], u: &[f64]) -> f64 {
        let lie = self.lie(x);
        lie.lf + dot(&lie.lg, u) + self.alphas[1].eval(lie.psi)
    }

    /// Disturbance part of `psi_2`, so that `f_v + f_d = psi_2`.
    pub fn f_d(&self, x: &[f64], d: &[f64]) -> f64 {
        let t = self.terms(x);
        let a1 = self.alphas[0];
        let a2 = self.alphas[1];
        let psi1 = t.lfh + a1.eval(t.h);
        let slope = a1.derivative(t.h);
        let lin: f64 = (0..2)
            .map(|j| (t.lplfh[j] + t.lf_lp[j] + slope * t.lph[j]) * d[j])
            .sum();
        let quad = 2.0 * (d[0] * d[0] + d[1] * d[1]);
        let shift = t.lph[0] * d[0] + t.lph[1] * d[1];
        let alpha_part = if a2.is_linear() {
            a2.derivative(0.0) * shift
        } else {
            a2.eval(psi1 + shift) - a2.eval(psi1)
        };
        lin + quad + alpha_part
    }

    /// Interval value of the nominal drift part `psi_2(y, 0, 0)`.
    fn drift_interval(&self, t: &UnicycleTerms<Interval>) -> Interval {
        let a1 = self.alphas[0];
        let a2 = self.alphas[1];
        let psi1 = t.lfh + a1.eval_interval(t.h);
        t.lf2h + a1.derivative_interval(t.h) * t.lfh + a2.eval_interval(psi1)
    }
}

impl BarrierChain for UnicycleObstacleChain {
    fn relative_degree(&self) -> usize {
        2
    }
    fn disturbance_relative_degree(&self) -> usize {
        1
    }
    fn state_dim(&self) -> usize {
        4
    }
    fn class_k(&self) -> &[ClassK] {
        &self.alphas
    }

    fn h(&self, x: &[f64]) -> f64 {
        eval_h(&self.obstacle, x)
    }

    fn lp_h(&self, x: &[f64]) -> Vec<f64> {
        self.terms(x).lph.to_vec()
    }

    fn psi(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64> {
        let t = self.terms(x);
        let hdot = t.lfh + t.lph[0] * d[0] + t.lph[1] * d[1];
        let psi1 = hdot + self.alphas[0].eval(t.h);
        let hddot = t.lf2h
            + t.lglfh[0] * u[0]
            + t.lglfh[1] * u[1]
            + (t.lplfh[0] + t.lf_lp[0]) * d[0]
            + (t.lplfh[1] + t.lf_lp[1]) * d[1]
            + 2.0 * (d[0] * d[0] + d[1] * d[1]);
        let psi1_dot = hddot + self.alphas[0].derivative(t.h) * hdot;
        let psi2 = psi1_dot + self.alphas[1].eval(psi1);
        vec![t.h, psi1, psi2]
    }

    fn lie(&self, x: &[f64]) -> LieBundle {
        let t = self.terms(x);
        let a1 = self.alphas[0];
        let slope = a1.derivative(t.h);
        LieBundle {
            psi: t.lfh + a1.eval(t.h),
            lf: t.lf2h + slope * t.lfh,
            lg: t.lglfh.to_vec(),
            lp: vec![t.lplfh[0] + slope * t.lph[0], t.lplfh[1] + slope * t.lph[1]],
            lp_prev: t.lph.to_vec(),
            mismatch: Some(MismatchTerms {
                lf_lp: t.lf_lp.to_vec(),
                lp_lp: Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]]),
                // L_p h depends on position only and g drives heading/speed.
                lg_lp: Matrix::zeros(2, 2),
            }),
        }
    }

    fn margin_enclosure(
        &self,
        x_hat: &[f64],
        states: &[Interval],
        inputs: &[Interval],
        dist: &[Interval],
    ) -> Interval {
        let point: Vec<Interval> = x_hat.iter().map(|v| Interval::point(*v)).collect();
        let tp = self.terms_interval(&point);
        let ty = self.terms_interval(states);

        let drift = self.drift_interval(&ty) - self.drift_interval(&tp).lo;
        let input_part = (0..2).fold(Interval::zero(), |acc, j| {
            acc + (ty.lglfh[j] - tp.lglfh[j].lo) * inputs[j]
        });

        let a1 = self.alphas[0];
        let a2 = self.alphas[1];
        let slope1 = a1.derivative_interval(ty.h);
        let mut lin: Vec<Interval> = (0..2)
            .map(|j| ty.lplfh[j] + ty.lf_lp[j] + slope1 * ty.lph[j])
            .collect();
        let quad = (dist[0].sqr() + dist[1].sqr()).scale(2.0);
        let shift = interval::dot(&ty.lph, dist);
        let alpha_part = if a2.is_linear() {
            let p2 = a2.params().0;
            for (l, g) in lin.iter_mut().zip(&ty.lph) {
                *l = *l + g.scale(p2);
            }
            Interval::zero()
        } else {
            // mean value form of alpha_2(psi_1 + shift) - alpha_2(psi_1)
            let psi1 = ty.lfh + a1.eval_interval(ty.h);
            let between = psi1 + shift.hull(&Interval::zero());
            a2.derivative_interval(between) * shift
        };
        let dist_part = interval::dot(&lin, dist) + quad + alpha_part;

        drift + input_part + dist_part
    }
}

/// Planar single integrator kept outside a disk; relative degree one.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleIntegratorObstacleChain {
    obstacle: ObstacleSpec,
    alphas: [ClassK; 1],
}

impl SingleIntegratorObstacleChain {
    pub fn new(obstacle: ObstacleSpec, alpha: ClassK) -> Result<Self> {
        alpha.validate()?;
        Ok(Self {
            obstacle,
            alphas: [alpha],
        })
    }
}

impl BarrierChain for SingleIntegratorObstacleChain {
    fn relative_degree(&self) -> usize {
        1
    }
    fn disturbance_relative_degree(&self) -> usize {
        1
    }
    fn state_dim(&self) -> usize {
        2
    }
    fn class_k(&self) -> &[ClassK] {
        &self.alphas
    }

    fn h(&self, x: &[f64]) -> f64 {
        eval_h(&self.obstacle, x)
    }

    fn lp_h(&self, x: &[f64]) -> Vec<f64> {
        vec![
            2.0 * (x[0] - self.obstacle.center[0]),
            2.0 * (x[1] - self.obstacle.center[1]),
        ]
    }

    fn psi(&self, x: &[f64], u: &[f64], d: &[f64]) -> Vec<f64> {
        let h = self.h(x);
        let grad = self.lp_h(x);
        let hdot = grad[0] * (u[0] + d[0]) + grad[1] * (u[1] + d[1]);
        vec![h, hdot + self.alphas[0].eval(h)]
    }

    fn lie(&self, x: &[f64]) -> LieBundle {
        let grad = self.lp_h(x);
        LieBundle {
            psi: self.h(x),
            lf: 0.0,
            lg: grad.clone(),
            lp: grad,
            lp_prev: Vec::new(),
            mismatch: None,
        }
    }

    fn margin_enclosure(
        &self,
        x_hat: &[f64],
        states: &[Interval],
        inputs: &[Interval],
        dist: &[Interval],
    ) -> Interval {
        let c = self.obstacle.center;
        let d2 = self.obstacle.safe_distance * self.obstacle.safe_distance;
        let grad_y = [(states[0] - c[0]).scale(2.0), (states[1] - c[1]).scale(2.0)];
        let grad_x = self.lp_h(x_hat);
        let h_y = (states[0] - c[0]).sqr() + (states[1] - c[1]).sqr() - d2;
        let h_x = Interval::point(self.h(x_hat));
        let alpha = self.alphas[0];
        let input_part = (0..2).fold(Interval::zero(), |acc, j| {
            acc + (grad_y[j] - grad_x[j]) * inputs[j]
        });
        let alpha_part = alpha.eval_interval(h_y) - alpha.eval_interval(h_x).lo;
        input_part + interval::dot(&grad_y, dist) + alpha_part
    }
}
