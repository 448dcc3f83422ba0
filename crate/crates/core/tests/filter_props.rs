use drcbf::dynamics::BoxSet;
use drcbf::filter::{objective, oracle::grid_oracle, solve_safety_filter, AffineConstraint, FilterMode};
use proptest::prelude::*;

fn input_box() -> BoxSet {
    BoxSet::new(vec![-1.0, -2.0], vec![1.0, 2.0]).unwrap()
}

fn coef() -> impl Strategy<Value = f64> {
    prop_oneof![1 => Just(0.0), 9 => -3.0..3.0f64]
}

fn instance() -> impl Strategy<Value = (Vec<f64>, AffineConstraint)> {
    (
        prop::collection::vec(-3.0..3.0f64, 2),
        coef(),
        coef(),
        -6.0..4.0f64,
    )
        .prop_map(|(u, a1, a2, b)| {
            (
                u,
                AffineConstraint {
                    a: vec![a1, a2],
                    b,
                    margin: 0.0,
                },
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn output_stays_in_box_with_consistent_mode((u, c) in instance()) {
        let bx = input_box();
        let r = solve_safety_filter(&u, &c, &bx);
        prop_assert!(bx.contains(&r.u_safe));
        prop_assert_eq!(r.slack, c.slack(&r.u_safe));
        prop_assert_eq!(r.feasible, r.mode != FilterMode::ClampedInfeasible);
        if r.feasible {
            prop_assert!(r.slack >= 0.0, "slack {}", r.slack);
        }
    }

    #[test]
    fn feasible_projection_is_returned_unchanged((u, c) in instance()) {
        let bx = input_box();
        let proj = bx.project(&u);
        let r = solve_safety_filter(&u, &c, &bx);
        if c.slack(&proj) >= 0.0 {
            prop_assert_eq!(r.u_safe, proj);
            prop_assert_eq!(r.mode, FilterMode::Inactive);
        } else {
            prop_assert_ne!(r.mode, FilterMode::Inactive);
        }
    }

    #[test]
    fn no_sampled_feasible_point_does_better(
        (u, c) in instance(),
        probes in prop::collection::vec((-1.0..1.0f64, -2.0..2.0f64), 200),
    ) {
        let r = solve_safety_filter(&u, &c, &input_box());
        prop_assume!(r.feasible);
        let best = objective(&r.u_safe, &u);
        for (p1, p2) in probes {
            let p = [p1, p2];
            if c.slack(&p) >= 0.0 {
                prop_assert!(best <= objective(&p, &u) + 1e-12);
            }
        }
    }

    #[test]
    fn infeasible_result_maximises_slack((u, mut c) in instance()) {
        let bx = input_box();
        // push the half-space past the box
        c.b = -(c.a[0].abs() + 2.0 * c.a[1].abs()) - c.b.abs() - 1e-3;
        let r = solve_safety_filter(&u, &c, &bx);
        prop_assert!(!r.feasible);
        for v in bx.corners() {
            prop_assert!(r.slack >= c.slack(&v));
        }
    }

    #[test]
    fn agrees_with_coarse_grid((u, c) in instance()) {
        let bx = input_box();
        let r = solve_safety_filter(&u, &c, &bx);
        let g = grid_oracle(&u, &c, &bx, 1e-2);
        if r.feasible && c.slack(&g) >= 0.0 {
            let (fo, go) = (objective(&r.u_safe, &u), objective(&g, &u));
            prop_assert!(fo <= go + 1e-4);
            // the grid optimum is no further than one cell diagonal away in cost
            let reach = (fo.sqrt() * 2f64.sqrt() + 2e-2).powi(2) / 2.0;
            prop_assert!(go <= reach.max(fo) + 1e-9, "grid {} solver {}", go, fo);
        }
    }
}

#[test]
fn oracle_inactive_instance_snaps_to_nearest_grid_point() {
    let c = AffineConstraint {
        a: vec![1.0, 0.0],
        b: 5.0,
        margin: 0.0,
    };
    let g = grid_oracle(&[0.1234, -0.9876], &c, &input_box(), 0.01);
    assert!((g[0] - 0.12).abs() < 1e-12);
    assert!((g[1] + 0.99).abs() < 1e-12);
}

#[test]
fn zero_coefficient_keeps_performance_component() {
    let c = AffineConstraint {
        a: vec![0.0, 1.0],
        b: -1.5,
        margin: 0.0,
    };
    let r = solve_safety_filter(&[0.4, 0.0], &c, &input_box());
    assert_eq!(r.mode, FilterMode::Active);
    assert_eq!(r.u_safe[0], 0.4);
    assert!((r.u_safe[1] - 1.5).abs() < 1e-15);
}

#[test]
fn solver_is_deterministic() {
    let c = AffineConstraint {
        a: vec![1.0, 1.0],
        b: -2.5,
        margin: 0.0,
    };
    let a = solve_safety_filter(&[-1.0, -1.0], &c, &input_box());
    let b = solve_safety_filter(&[-1.0, -1.0], &c, &input_box());
    assert_eq!(a, b);
}
