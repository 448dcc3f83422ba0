//! Acceptance suite: one line per criterion, non-zero exit if any fails.

mod common;

use std::time::Instant;

use drcbf::barrier::{BarrierChain, ObstacleSpec, UnicycleObstacleChain};
use drcbf::dynamics::{norm, rk4_zoh_step, BoxSet, ControlAffineSystem, Unicycle, UncertaintyModel};
use drcbf::filter::{
    build_constraint, objective, oracle::grid_oracle, solve_safety_filter, AffineConstraint,
    ConstraintKind, FilterKind, FilterMode,
};
use drcbf::harness::{episode_seed, margin_sweep, run_episode, Setup, Trajectory};
use drcbf::margins::{state_deviation_bound, LipschitzEstimates, MarginMethod, MarginSpec};
use drcbf::reach::reach_tube;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

const RUNS: usize = 100;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn episodes(setup: &Setup) -> Vec<Trajectory> {
    let base = setup.scenario.scenario.seed;
    (0..RUNS)
        .map(|i| run_episode(setup, episode_seed(base, i)).expect("episode runs"))
        .collect()
}

fn sidecar() -> LipschitzEstimates {
    LipschitzEstimates::load(&repo_root().join("configs/unicycle_obstacle.constants.toml")).expect("sidecar")
}

struct Runs {
    reach: Vec<Trajectory>,
    reach_secs: f64,
    vanilla: Vec<Trajectory>,
}

fn safety(r: &Runs) -> Outcome {
    let mins: Vec<f64> = r.reach.iter().map(Trajectory::min_h).collect();
    let worst = mins.iter().copied().fold(f64::INFINITY, f64::min);
    let safe = mins.iter().filter(|m| **m > 0.0).count();
    let dense_ok = r.reach.iter().all(|t| {
        t.records[..t.records.len() - 1]
            .iter()
            .all(|rec| rec.dense.len() == 10)
    });
    outcome(
        safe == RUNS && dense_ok && r.reach_secs < 60.0,
        format!(
            "{safe}/{RUNS} reach-filter episodes with min h > 0 on 10 points per period (worst {worst:.3}); {:.2} s",
            r.reach_secs
        ),
    )
}

fn baseline_failure(r: &Runs) -> Outcome {
    let collisions = r.vanilla.iter().filter(|t| t.min_h() < 0.0).count();
    let worst = r.vanilla.iter().map(Trajectory::min_h).fold(f64::INFINITY, f64::min);
    outcome(
        collisions >= 1,
        format!("{collisions}/{RUNS} vanilla episodes collide (worst min h {worst:.3})"),
    )
}

fn conservatism_gap(r: &Runs) -> Outcome {
    let mean = r.reach.iter().map(Trajectory::min_h).sum::<f64>() / RUNS as f64;
    let mut sc = without_uncertainty(scenario());
    sc.filter.kind = FilterKind::Vanilla;
    let setup = Setup::new(sc).unwrap();
    let baseline = run_episode(&setup, 0).unwrap().min_h();
    outcome(
        mean > baseline,
        format!("robust mean of min h {mean:.3} vs exact-information vanilla min h {baseline:.3}"),
    )
}

fn margin_monotonicity() -> Outcome {
    let setup = setup_with(FilterKind::Reach);
    let rows = margin_sweep(&setup, &setup.scenario.sweep.times).unwrap();
    let times_ok = rows.len() == 10
        && rows
            .iter()
            .enumerate()
            .all(|(k, r)| (r.t - (k + 1) as f64 * 0.01).abs() < 1e-12);
    let mono = rows.windows(2).all(|w| w[1].margin.abs() >= w[0].margin.abs());
    outcome(
        times_ok && mono,
        format!(
            "{} rows, |margin| {:.3} -> {:.3}, nondecreasing: {mono}",
            rows.len(),
            rows.first().map_or(f64::NAN, |r| r.margin.abs()),
            rows.last().map_or(f64::NAN, |r| r.margin.abs())
        ),
    )
}

fn deviation_bound() -> Outcome {
    let setup = setup_with(FilterKind::Sd);
    let spec = MarginSpec::new(
        sidecar(),
        0.1,
        setup.uncertainty.clone(),
        MarginMethod::LipschitzSd,
    )
    .unwrap();
    let bound = state_deviation_bound(&spec);
    // keep each period inside the domain the constants were sampled on
    let starts = BoxSet::new(vec![2.0, 7.0, -3.2, -2.2], vec![48.0, 43.0, 3.2, 2.2]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let x = starts.sample(&mut rng);
        let e = setup.uncertainty.sample_measurement_error(&mut rng);
        let x_hat: Vec<f64> = x.iter().zip(&e).map(|(a, b)| a + b).collect();
        let u = setup.input_box.sample(&mut rng);
        let d = vec![setup.uncertainty.sample_disturbance(&mut rng)];
        let mut check = |y: &[f64]| {
            let dev = norm(&y.iter().zip(&x_hat).map(|(a, b)| a - b).collect::<Vec<_>>());
            worst = worst.max(dev);
            if dev > bound {
                violations += 1;
            }
        };
        check(&x);
        for j in 1..=10 {
            let y = rk4_zoh_step(&Unicycle, &x, &u, &d, 0.01 * j as f64, j).unwrap();
            check(&y);
        }
    }
    outcome(
        violations == 0,
        format!("{violations} violations in 10^4 periods; largest deviation {worst:.4} vs bound {bound:.4}"),
    )
}

fn reach_soundness(r: &Runs) -> Outcome {
    let points: usize = r
        .reach
        .iter()
        .chain(&r.vanilla)
        .map(|t| t.records.iter().map(|rec| rec.dense.len() + 1).sum::<usize>())
        .sum();
    let outside: usize = r
        .reach
        .iter()
        .chain(&r.vanilla)
        .map(|t| {
            t.reach_violations()
                + t.records.iter().filter(|rec| !rec.reach_box.contains(&rec.state)).count()
        })
        .sum();
    outcome(
        outside == 0,
        format!("{outside} of {points} trajectory points outside the logged tubes ({} episodes)", 2 * RUNS),
    )
}

fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, AffineConstraint) {
    let mut coef = || if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(-3.0..3.0) };
    let a = vec![coef(), coef()];
    let b = rng.gen_range(-6.0..4.0);
    let u_perf = vec![rng.gen_range(-2.0..2.0), rng.gen_range(-4.0..4.0)];
    (u_perf, AffineConstraint { a, b, margin: 0.0 })
}

fn filter_exactness() -> Outcome {
    let bx = BoxSet::new(vec![-1.0, -2.0], vec![1.0, 2.0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let (mut compared, mut projections, mut infeasible, mut failures) = (0, 0, 0, 0);
    let mut worst_gap = f64::NEG_INFINITY;
    for _ in 0..1000 {
        let (u_perf, c) = random_instance(&mut rng);
        let r = solve_safety_filter(&u_perf, &c, &bx);
        let g = grid_oracle(&u_perf, &c, &bx, 1e-3);
        let proj = bx.project(&u_perf);
        if !bx.contains(&r.u_safe) {
            failures += 1;
        }
        if c.slack(&proj) >= 0.0 {
            projections += 1;
            if r.u_safe != proj || r.mode != FilterMode::Inactive {
                failures += 1;
            }
        }
        if !r.feasible {
            infeasible += 1;
            if c.slack(&g) >= 0.0 || c.slack(&r.u_safe) < c.slack(&g) {
                failures += 1;
            }
            continue;
        }
        if r.slack < 0.0 {
            failures += 1;
        }
        if c.slack(&g) >= 0.0 {
            compared += 1;
            let gap = objective(&r.u_safe, &u_perf) - objective(&g, &u_perf);
            worst_gap = worst_gap.max(gap);
            if gap > 1e-5 {
                failures += 1;
            }
        }
    }
    outcome(
        failures == 0,
        format!(
            "{failures} failures; {compared} objective comparisons (max solver - grid {worst_gap:.2e}), \
             {projections} projections, {infeasible} infeasible"
        ),
    )
}

fn derivative_correctness() -> Outcome {
    let chain = UnicycleObstacleChain::with_unit_gains(ObstacleSpec::new([32.5, 25.0], 5.0).unwrap());
    let sys = Unicycle;
    let domain = unicycle_domain();
    let ubox = BoxSet::new(vec![-1.0, -2.0], vec![1.0, 2.0]).unwrap();
    let dbox = BoxSet::symmetric(&[0.3, 0.3]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let tol = 1e-6;
    let mut checks = 0;
    let mut bad = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        checks += 1;
        if !close(got, want, tol) {
            bad.push(format!("{name}: {got} vs {want}"));
        }
    };
    let zero = [0.0, 0.0];
    for _ in 0..100 {
        let x = domain.sample(&mut rng);
        let u = ubox.sample(&mut rng);
        let d = dbox.sample(&mut rng);
        let h = |y: &[f64]| chain.h(y);
        let a1 = chain.class_k()[0];
        let a2 = chain.class_k()[1];
        let (ch, sy) = (&chain, &sys);
        let psi1_of =
            |dd: [f64; 2]| move |y: &[f64]| fd_lie(sy, &|z: &[f64]| ch.h(z), y, &zero, &dd) + a1.eval(ch.h(y));
        let psi1_fd = psi1_of([d[0], d[1]]);
        let psi = chain.psi(&x, &u, &d);
        check("psi1", psi[1], psi1_fd(&x));
        let psi2_fd = fd_lie(&sys, &psi1_fd, &x, &u, &d) + a2.eval(psi1_fd(&x));
        check("psi2", psi[2], psi2_fd);
        check("f_v + f_d", chain.f_v(&x, &u) + chain.f_d(&x, &d), psi2_fd);

        let lie = chain.lie(&x);
        let psi1_0 = psi1_of(zero);
        let grad = fd_grad(&psi1_0, &x);
        check("psi_{m-1}", lie.psi, psi1_0(&x));
        check("L_f psi", lie.lf, dot(&grad, &sys.drift(&x)));
        let g = sys.input_matrix(&x);
        let p = sys.disturbance_matrix(&x);
        for j in 0..2 {
            check("L_g psi", lie.lg[j], dot(&grad, &column(&g, j)));
            check("L_p psi", lie.lp[j], dot(&grad, &column(&p, j)));
            let lph_j = |y: &[f64]| dot(&fd_grad(&h, y), &column(&sys.disturbance_matrix(y), j));
            check("L_p h", lie.lp_prev[j], lph_j(&x));
            check("L_p h (chain)", chain.lp_h(&x)[j], lph_j(&x));
            let grad_lph = fd_grad(&lph_j, &x);
            let m = lie.mismatch.as_ref().expect("mismatched chain");
            check("L_f L_p h", m.lf_lp[j], dot(&grad_lph, &sys.drift(&x)));
            for k in 0..2 {
                check("L_p L_p h", m.lp_lp.get(j, k), dot(&grad_lph, &column(&p, k)));
                check("L_g L_p h", m.lg_lp.get(j, k), dot(&grad_lph, &column(&g, k)));
            }
        }
    }
    let n_bad = bad.len();
    let first = bad.first().cloned().unwrap_or_default();
    outcome(
        n_bad == 0,
        format!("{n_bad} of {checks} closed-form values off by more than 1e-6 relative at 100 states {first}"),
    )
}

fn collapse() -> Outcome {
    let chain = UnicycleObstacleChain::with_unit_gains(ObstacleSpec::new([32.5, 25.0], 5.0).unwrap());
    let ubox = BoxSet::new(vec![-1.0, -2.0], vec![1.0, 2.0]).unwrap();
    let none = UncertaintyModel::none(4, 2);
    let spec = MarginSpec::new(sidecar(), 0.0, none.clone(), MarginMethod::LipschitzSd).unwrap();
    let domain = unicycle_domain();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatches = 0;
    for _ in 0..100 {
        let x = domain.sample(&mut rng);
        let tube = reach_tube(&Unicycle, &x, &none.meas_box, &ubox, &none.dist_box, 0.0, 1).unwrap();
        let vanilla = build_constraint(ConstraintKind::Vanilla, &chain, &spec, &ubox, &x, None).unwrap();
        for kind in [ConstraintKind::CtRobust, ConstraintKind::SdRobust, ConstraintKind::ReachRobust] {
            let c = build_constraint(kind, &chain, &spec, &ubox, &x, Some(&tube)).unwrap();
            let same = c.b.to_bits() == vanilla.b.to_bits()
                && c.a.iter().zip(&vanilla.a).all(|(p, q)| p.to_bits() == q.to_bits());
            if !same {
                mismatches += 1;
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{mismatches} of 300 robust constraints differ bitwise from vanilla with gamma = eps = T = 0"),
    )
}

fn main() {
    let reach_setup = setup_with(FilterKind::Reach);
    let started = Instant::now();
    let reach = episodes(&reach_setup);
    let reach_secs = started.elapsed().as_secs_f64();
    let runs = Runs {
        reach,
        reach_secs,
        vanilla: episodes(&setup_with(FilterKind::Vanilla)),
    };

    let results = [
        ("safety under double uncertainty", safety(&runs)),
        ("vanilla baseline collides", baseline_failure(&runs)),
        ("conservatism gap", conservatism_gap(&runs)),
        ("margin monotonicity", margin_monotonicity()),
        ("state deviation bound", deviation_bound()),
        ("reach soundness", reach_soundness(&runs)),
        ("filter exactness", filter_exactness()),
        ("derivative correctness", derivative_correctness()),
        ("collapse to vanilla", collapse()),
    ];
    let mut failed = 0;
    for (i, (name, o)) in results.iter().enumerate() {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] {}. {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
