//! CSV and JSON emission. Numbers are written with 9 significant digits.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::filter::FilterMode;

use super::episode::Trajectory;
use super::montecarlo::SummaryStats;
use super::setup::Setup;
use super::sweep::SweepRow;

/// `%.9g`-style formatting.
pub fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.8e}");
    let (mant, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mant.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn push_row(out: &mut String, cells: &[String]) {
    out.push_str(&cells.join(","));
    out.push('\n');
}

pub fn trajectory_header(setup: &Setup) -> Vec<String> {
    let names = setup.system.state_names();
    let q = setup.input_box.dim();
    let mut h: Vec<String> = names.iter().map(|n| n.to_string()).collect();
    h.insert(0, "t".into());
    for i in setup.system.measured_components() {
        h.push(format!("{}hat", names[i]));
    }
    h.extend((1..=q).map(|i| format!("u{i}")));
    h.extend(["h", "psi1", "slack", "mode"].map(String::from));
    for n in &names {
        h.push(format!("box_{n}lo"));
        h.push(format!("box_{n}hi"));
    }
    h.extend((1..=q).map(|i| format!("uperf{i}")));
    h.extend((1..=q).map(|i| format!("a{i}")));
    h.push("b".into());
    h.push("min_h_step".into());
    h
}

pub fn trajectory_csv(setup: &Setup, traj: &Trajectory) -> String {
    let q = setup.input_box.dim();
    let measured = setup.system.measured_components();
    let mut out = String::new();
    push_row(&mut out, &trajectory_header(setup));
    for r in &traj.records {
        let mut row = vec![fmt_num(r.t)];
        row.extend(r.state.iter().map(|v| fmt_num(*v)));
        row.extend(measured.iter().map(|i| fmt_num(r.estimate[*i])));
        row.extend(r.u_safe.iter().map(|v| fmt_num(*v)));
        row.extend([fmt_num(r.h), fmt_num(r.psi1), fmt_num(r.slack), r.mode.as_str().to_string()]);
        for iv in &r.reach_box.intervals {
            row.push(fmt_num(iv.lo));
            row.push(fmt_num(iv.hi));
        }
        row.extend(r.u_perf.iter().map(|v| fmt_num(*v)));
        match &r.constraint {
            Some(c) => {
                row.extend(c.a.iter().map(|v| fmt_num(*v)));
                row.push(fmt_num(c.b));
            }
            None => row.extend(std::iter::repeat_n("nan".to_string(), q + 1)),
        }
        row.push(fmt_num(r.min_h_step));
        push_row(&mut out, &row);
    }
    out
}

/// Per-step reach boxes only.
pub fn reach_csv(setup: &Setup, traj: &Trajectory) -> String {
    let mut header = vec!["t".to_string()];
    for n in setup.system.state_names() {
        header.push(format!("box_{n}lo"));
        header.push(format!("box_{n}hi"));
    }
    let mut out = String::new();
    push_row(&mut out, &header);
    for r in &traj.records {
        let mut row = vec![fmt_num(r.t)];
        for iv in &r.reach_box.intervals {
            row.push(fmt_num(iv.lo));
            row.push(fmt_num(iv.hi));
        }
        push_row(&mut out, &row);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeCounts {
    pub inactive: usize,
    pub active: usize,
    pub clamped_infeasible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeReport {
    pub seed: u64,
    pub filter: String,
    pub records: usize,
    pub min_h: f64,
    pub final_goal_distance: f64,
    pub infeasible_steps: usize,
    pub modes: ModeCounts,
}

impl EpisodeReport {
    pub fn new(setup: &Setup, traj: &Trajectory) -> Self {
        let goal = setup.scenario.scenario.goal;
        let end = traj.final_state();
        Self {
            seed: traj.seed,
            filter: setup.scenario.filter.kind.as_str().into(),
            records: traj.records.len(),
            min_h: traj.min_h(),
            final_goal_distance: (end[0] - goal[0]).hypot(end[1] - goal[1]),
            infeasible_steps: traj.infeasible_steps(),
            modes: ModeCounts {
                inactive: traj.mode_count(FilterMode::Inactive),
                active: traj.mode_count(FilterMode::Active),
                clamped_infeasible: traj.mode_count(FilterMode::ClampedInfeasible),
            },
        }
    }
}

pub fn min_h_csv(stats: &SummaryStats) -> String {
    let mut out = String::from("episode,seed,min_h,final_goal_distance,infeasible_steps\n");
    for e in &stats.episodes {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            e.episode,
            e.seed,
            fmt_num(e.min_h),
            fmt_num(e.final_goal_distance),
            e.infeasible_steps
        );
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("t,margin\n");
    for r in rows {
        let _ = writeln!(out, "{},{}", fmt_num(r.t), fmt_num(r.margin));
    }
    out
}
