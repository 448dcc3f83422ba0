//! Robustness margins subtracted from the nominal barrier condition.
//!
//! Lipschitz-based margins need constants for the chain's Lie derivatives on
//! a working domain. They are estimated by sampling (see
//! [`estimate_constants`]) and can be stored in a TOML sidecar so later runs
//! reuse exactly the same numbers.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::barrier::BarrierChain;
use crate::dynamics::{norm, BoxSet, ControlAffineSystem, UncertaintyModel};
use crate::error::{Error, Result};

/// Lipschitz constants and suprema over the working domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimates {
    /// `L_f psi_{m-1}`.
    pub l_lf: f64,
    /// `L_g psi_{m-1}`.
    pub l_lg: f64,
    /// `alpha_m o psi_{m-1}`.
    pub l_alpha: f64,
    /// Disturbance gain of `psi_m`, see [`disturbance_gain`].
    pub l_lp: f64,
    /// `sup |f(x) + g(x) u|` over domain and input box.
    pub delta: f64,
    /// `sup |p(x)|` (operator norm).
    pub p_norm_sup: f64,
    /// `sup |L_p h(x)|`.
    pub lp_h_sup: f64,
}

impl LipschitzEstimates {
    pub fn zero() -> Self {
        Self {
            l_lf: 0.0,
            l_lg: 0.0,
            l_alpha: 0.0,
            l_lp: 0.0,
            delta: 0.0,
            p_norm_sup: 0.0,
            lp_h_sup: 0.0,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("plain float struct serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let est: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        est.validate()?;
        Ok(est)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.l_lf,
            self.l_lg,
            self.l_alpha,
            self.l_lp,
            self.delta,
            self.p_norm_sup,
            self.lp_h_sup,
        ];
        if all.iter().all(|v| v.is_finite() && *v >= 0.0) {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "Lipschitz estimates must be finite and non-negative: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarginMethod {
    LipschitzCt,
    LipschitzSd,
    Reach,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginSpec {
    pub estimates: LipschitzEstimates,
    /// Sampling period; zero is allowed as the continuous-time limit.
    pub period: f64,
    pub uncertainty: UncertaintyModel,
    pub method: MarginMethod,
}

impl MarginSpec {
    pub fn new(
        estimates: LipschitzEstimates,
        period: f64,
        uncertainty: UncertaintyModel,
        method: MarginMethod,
    ) -> Result<Self> {
        if !(period >= 0.0) || !period.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "sampling period must be non-negative, got {period}"
            )));
        }
        estimates.validate()?;
        Ok(Self {
            estimates,
            period,
            uncertainty,
            method,
        })
    }
}

/// Worst-case distance between the true state and the held estimate over one
/// period: `eps + T * (Delta + sup|p| * gamma)`.
pub fn state_deviation_bound(spec: &MarginSpec) -> f64 {
    let e = &spec.estimates;
    spec.uncertainty.epsilon
        + spec.period * (e.delta + e.p_norm_sup * spec.uncertainty.gamma)
}

/// Continuous-time estimate-error margin `eps (l_Lf + l_alpha) + eps l_Lg |u|`.
pub fn lipschitz_margin_ct(spec: &MarginSpec, u_norm: f64) -> f64 {
    let e = &spec.estimates;
    let eps = spec.uncertainty.epsilon;
    eps * (e.l_lf + e.l_alpha) + eps * e.l_lg * u_norm
}

/// Sampled-data margin `(l_Lf + l_Lg |u| + l_alpha) v(z)`.
pub fn lipschitz_margin_sd(spec: &MarginSpec, u_norm: f64) -> f64 {
    let e = &spec.estimates;
    (e.l_lf + e.l_lg * u_norm + e.l_alpha) * state_deviation_bound(spec)
}

/// `|L_p psi_{m-1}(x)| gamma`, the matched-disturbance margin.
pub fn disturbance_margin(chain: &dyn BarrierChain, x: &[f64], gamma: f64) -> f64 {
    norm(&chain.lie(x).lp) * gamma
}

/// Coefficient vector `w(x)` of the part of `psi_m` that is linear in `d`.
///
/// Matched chains give `L_p psi_{m-1}`. Mismatched chains add `L_f[L_p psi_{m-2} .]`
/// and, when `alpha_m` is linear, its slope times `L_p psi_{m-2}`.
pub fn disturbance_gain(chain: &dyn BarrierChain, x: &[f64]) -> Vec<f64> {
    let lie = chain.lie(x);
    let Some(m) = &lie.mismatch else {
        return lie.lp;
    };
    let alpha = chain.alpha_last();
    let slope = if alpha.is_linear() { alpha.params().0 } else { 0.0 };
    lie.lp
        .iter()
        .zip(&m.lf_lp)
        .zip(&lie.lp_prev)
        .map(|((a, b), c)| a + b + slope * c)
        .collect()
}

/// Bound on `-(terms of psi_m involving d)` over `|d| <= gamma`, `|u| <= u_max`.
///
/// Equals [`disturbance_margin`] for matched chains. For mismatched chains every
/// term carrying `d` is bounded in norm.
pub fn disturbance_bound(chain: &dyn BarrierChain, x: &[f64], gamma: f64, u_max: f64) -> f64 {
    let lie = chain.lie(x);
    let Some(m) = &lie.mismatch else {
        return norm(&lie.lp) * gamma;
    };
    let linear = norm(&disturbance_gain(chain, x)) * gamma;

    let alpha = chain.alpha_last();
    let alpha_part = if alpha.is_linear() {
        0.0
    } else {
        let shift = norm(&lie.lp_prev) * gamma;
        let reach = lie.psi.abs() + shift;
        alpha.derivative(reach) * shift
    };

    // Gershgorin lower bound on the smallest eigenvalue of the quadratic form.
    let n = m.lp_lp.rows();
    let lambda_min = (0..n)
        .map(|i| {
            let off: f64 = (0..n)
                .filter(|j| *j != i)
                .map(|j| 0.5 * (m.lp_lp.get(i, j) + m.lp_lp.get(j, i)).abs())
                .sum();
            m.lp_lp.get(i, i) - off
        })
        .fold(f64::INFINITY, f64::min);
    let quad = (-lambda_min).max(0.0) * gamma * gamma;

    let mut frob = 0.0;
    for r in 0..m.lg_lp.rows() {
        for c in 0..m.lg_lp.cols() {
            frob += m.lg_lp.get(r, c).powi(2);
        }
    }
    let coupling = frob.sqrt() * gamma * u_max;

    linear + alpha_part + quad + coupling
}

/// Largest difference quotient `|F(a) - F(b)| / |a - b|` over sampled pairs.
///
/// Pairs alternate between two independent uniform points and a uniform
/// point with a neighbour at most 1% of the domain width away, so both
/// global and local slopes are seen.
pub fn max_difference_quotient<R, F>(f: F, domain: &BoxSet, samples: usize, rng: &mut R) -> f64
where
    R: Rng + ?Sized,
    F: Fn(&[f64]) -> Vec<f64>,
{
    let widths: Vec<f64> = domain
        .lo()
        .iter()
        .zip(domain.hi())
        .map(|(l, h)| h - l)
        .collect();
    let mut best: f64 = 0.0;
    for i in 0..samples {
        let a = domain.sample(rng);
        let b = if i % 2 == 0 {
            domain.sample(rng)
        } else {
            let near: Vec<f64> = a
                .iter()
                .zip(&widths)
                .map(|(x, w)| x + 0.01 * w * rng.gen_range(-1.0..=1.0))
                .collect();
            domain.project(&near)
        };
        let dist = norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
        if dist <= 0.0 {
            continue;
        }
        let fa = f(&a);
        let fb = f(&b);
        let diff = norm(&fa.iter().zip(&fb).map(|(x, y)| x - y).collect::<Vec<_>>());
        best = best.max(diff / dist);
    }
    best
}

/// Settings for [`estimate_constants`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationSettings {
    pub samples: usize,
    pub safety_factor: f64,
    pub seed: u64,
}

impl Default for EstimationSettings {
    fn default() -> Self {
        Self {
            samples: 20_000,
            safety_factor: 1.2,
            seed: 0x5eed,
        }
    }
}

/// Samples every constant of [`LipschitzEstimates`] on `domain` and scales it
/// by the safety factor. Deterministic for a fixed seed.
pub fn estimate_constants(
    sys: &dyn ControlAffineSystem,
    chain: &dyn BarrierChain,
    domain: &BoxSet,
    input_box: &BoxSet,
    settings: &EstimationSettings,
) -> Result<LipschitzEstimates> {
    if settings.samples < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 samples, got {}",
            settings.samples
        )));
    }
    if !(settings.safety_factor >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "safety factor must be >= 1, got {}",
            settings.safety_factor
        )));
    }
    if domain.dim() != sys.state_dim() || domain.dim() == 0 {
        return Err(Error::DegenerateDomain(format!(
            "domain has dimension {}, system has {}",
            domain.dim(),
            sys.state_dim()
        )));
    }
    if domain
        .lo()
        .iter()
        .zip(domain.hi())
        .any(|(l, h)| !(h > l) || !l.is_finite() || !h.is_finite())
    {
        return Err(Error::DegenerateDomain(format!(
            "every component needs a finite, non-empty range: {domain:?}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let n = settings.samples;
    let alpha = chain.alpha_last();
    let l_lf = max_difference_quotient(|x| vec![chain.lie(x).lf], domain, n, &mut rng);
    let l_lg = max_difference_quotient(|x| chain.lie(x).lg, domain, n, &mut rng);
    let l_alpha = max_difference_quotient(|x| vec![alpha.eval(chain.lie(x).psi)], domain, n, &mut rng);
    let l_lp = max_difference_quotient(|x| disturbance_gain(chain, x), domain, n, &mut rng);

    let corners = input_box.corners();
    let mut delta: f64 = 0.0;
    let mut p_norm_sup: f64 = 0.0;
    let mut lp_h_sup: f64 = 0.0;
    for _ in 0..n {
        let x = domain.sample(&mut rng);
        let f = sys.drift(&x);
        let g = sys.input_matrix(&x);
        // |f + g u| is convex in u, so the box maximum sits on a vertex.
        for u in &corners {
            let gu = g.mul_vec(u);
            let v: Vec<f64> = f.iter().zip(&gu).map(|(a, b)| a + b).collect();
            delta = delta.max(norm(&v));
        }
        p_norm_sup = p_norm_sup.max(sys.disturbance_matrix(&x).operator_norm());
        lp_h_sup = lp_h_sup.max(norm(&chain.lp_h(&x)));
    }

    let k = settings.safety_factor;
    Ok(LipschitzEstimates {
        l_lf: k * l_lf,
        l_lg: k * l_lg,
        l_alpha: k * l_alpha,
        l_lp: k * l_lp,
        delta: k * delta,
        p_norm_sup: k * p_norm_sup,
        lp_h_sup: k * lp_h_sup,
    })
}
