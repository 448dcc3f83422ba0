#![allow(dead_code)]

use std::path::PathBuf;

use drcbf::dynamics::{eval_dynamics, BoxSet, ControlAffineSystem};
use drcbf::filter::FilterKind;
use drcbf::harness::{Scenario, Setup};
use rand::Rng;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn scenario() -> Scenario {
    Scenario::load(&repo_root().join("configs/unicycle_obstacle.toml")).expect("shipped config loads")
}

pub fn setup_with(filter: FilterKind) -> Setup {
    let mut sc = scenario();
    sc.filter.kind = filter;
    Setup::new(sc).expect("setup")
}

/// The same scenario with exact measurements and no disturbance.
pub fn without_uncertainty(mut sc: Scenario) -> Scenario {
    let u = &mut sc.uncertainty;
    u.dist_lo = vec![0.0; u.dist_lo.len()];
    u.dist_hi = vec![0.0; u.dist_hi.len()];
    u.meas_lo = vec![0.0; u.meas_lo.len()];
    u.meas_hi = vec![0.0; u.meas_hi.len()];
    u.gamma = None;
    u.epsilon = None;
    sc
}

pub fn unicycle_domain() -> BoxSet {
    BoxSet::new(
        vec![0.0, 5.0, -std::f64::consts::PI, -2.5],
        vec![50.0, 45.0, std::f64::consts::PI, 2.5],
    )
    .unwrap()
}

pub fn sample_in<R: Rng>(b: &BoxSet, rng: &mut R) -> Vec<f64> {
    b.sample(rng)
}

const STEP: f64 = 1e-3;

/// Five-point central-difference gradient.
pub fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let at = |s: f64| {
                let mut y = x.to_vec();
                y[i] += s;
                f(&y)
            };
            (-at(2.0 * STEP) + 8.0 * at(STEP) - 8.0 * at(-STEP) + at(-2.0 * STEP)) / (12.0 * STEP)
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Time derivative of `f` along the closed-loop field with `u`, `d` held.
pub fn fd_lie(
    sys: &dyn ControlAffineSystem,
    f: &dyn Fn(&[f64]) -> f64,
    x: &[f64],
    u: &[f64],
    d: &[f64],
) -> f64 {
    dot(&fd_grad(f, x), &eval_dynamics(sys, x, u, d).unwrap())
}

/// Column `j` of a matrix-valued field as a vector field.
pub fn column(m: &drcbf::dynamics::Matrix, j: usize) -> Vec<f64> {
    (0..m.rows()).map(|i| m.get(i, j)).collect()
}

/// `|a - b| <= tol * max(|a|, |b|, 1)`.
pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
