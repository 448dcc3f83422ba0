use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::episode::run_episode;
use super::setup::Setup;

/// SplitMix64 finaliser; spreads consecutive integers into unrelated seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn episode_seed(base: u64, episode: usize) -> u64 {
    splitmix64(base.wrapping_add(episode as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub episode: usize,
    pub seed: u64,
    pub min_h: f64,
    pub final_goal_distance: f64,
    pub infeasible_steps: usize,
}

/// Aggregates over the per-episode minima of `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub runs: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub collisions: usize,
    pub infeasible_steps: usize,
    pub episodes: Vec<EpisodeSummary>,
}

impl SummaryStats {
    pub fn from_episodes(episodes: Vec<EpisodeSummary>) -> Result<Self> {
        if episodes.is_empty() {
            return Err(Error::InvalidArgument("no episodes to summarise".into()));
        }
        let mins: Vec<f64> = episodes.iter().map(|e| e.min_h).collect();
        Ok(Self {
            runs: episodes.len(),
            min: mins.iter().copied().fold(f64::INFINITY, f64::min),
            max: mins.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: mins.iter().sum::<f64>() / mins.len() as f64,
            collisions: mins.iter().filter(|m| **m < 0.0).count(),
            infeasible_steps: episodes.iter().map(|e| e.infeasible_steps).sum(),
            episodes,
        })
    }
}

/// Runs `n_runs` independent episodes in parallel; episode `i` uses
/// `episode_seed(scenario seed, i)`.
pub fn monte_carlo(setup: &Setup, n_runs: usize) -> Result<SummaryStats> {
    if n_runs == 0 {
        return Err(Error::InvalidArgument("need at least one run".into()));
    }
    let goal = setup.scenario.scenario.goal;
    let base = setup.scenario.scenario.seed;
    let episodes = (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let seed = episode_seed(base, i);
            let traj = run_episode(setup, seed)?;
            let end = traj.final_state();
            Ok(EpisodeSummary {
                episode: i,
                seed,
                min_h: traj.min_h(),
                final_goal_distance: (end[0] - goal[0]).hypot(end[1] - goal[1]),
                infeasible_steps: traj.infeasible_steps(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SummaryStats::from_episodes(episodes)
}
