use std::f64::consts::PI;

use crate::dynamics::BoxSet;

use super::config::{ControllerSection, SystemKind};

/// Wraps an angle to `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// Goal-seeking proportional law, clipped to the input box.
///
/// Unicycle: `u1 = k_theta * wrap(bearing - theta)`, `u2 = k_v * (v_ref - v)`
/// with `v_ref = min(v_max, k_d * distance)`. Single integrator: velocity
/// `k_d * (goal - pos)` capped at `v_max` in norm.
pub fn perf_controller(
    system: SystemKind,
    gains: &ControllerSection,
    estimate: &[f64],
    goal: [f64; 2],
    input_box: &BoxSet,
) -> Vec<f64> {
    let ex = goal[0] - estimate[0];
    let ey = goal[1] - estimate[1];
    let dist = ex.hypot(ey);
    let u = match system {
        SystemKind::Unicycle => {
            let (theta, v) = (estimate[2], estimate[3]);
            let heading_err = if dist > 0.0 { wrap_angle(ey.atan2(ex) - theta) } else { 0.0 };
            let v_ref = gains.v_max.min(gains.k_d * dist);
            vec![gains.k_theta * heading_err, gains.k_v * (v_ref - v)]
        }
        SystemKind::SingleIntegrator => {
            let speed = gains.k_d * dist;
            let scale = if speed > gains.v_max { gains.v_max / speed } else { 1.0 };
            vec![gains.k_d * ex * scale, gains.k_d * ey * scale]
        }
    };
    input_box.project(&u)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ubox() -> BoxSet {
        BoxSet::new(vec![-1.0, -2.0], vec![1.0, 2.0]).unwrap()
    }

    fn ctl(x: &[f64]) -> Vec<f64> {
        perf_controller(SystemKind::Unicycle, &ControllerSection::default(), x, [45.0, 21.0], &ubox())
    }

    #[test]
    fn at_goal_at_rest() {
        assert_eq!(ctl(&[45.0, 21.0, 0.4, 0.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn aligned_speeds_up() {
        let u = ctl(&[5.0, 21.0, 0.0, 0.5]);
        assert_eq!(u[0], 0.0);
        assert!(u[1] > 0.0);
    }

    #[test]
    fn large_heading_error_is_clipped() {
        // goal straight ahead along +x, robot facing -y: error +pi/2
        let u = ctl(&[5.0, 21.0, -PI / 2.0, 0.0]);
        assert_eq!(u[0], 1.0);
    }

    #[test]
    fn wrapping() {
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(-0.25) + 0.25).abs() < 1e-15);
    }
}
