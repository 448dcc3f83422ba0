//! Scenario configuration, closed-loop episodes, Monte Carlo studies, margin
//! sweeps and their CSV/JSON output.

pub mod config;
pub mod controller;
pub mod episode;
pub mod montecarlo;
pub mod output;
pub mod setup;
pub mod sweep;

pub use config::{Scenario, SystemKind};
pub use controller::{perf_controller, wrap_angle};
pub use episode::{run_episode, StepRecord, Trajectory};
pub use montecarlo::{episode_seed, monte_carlo, SummaryStats};
pub use setup::Setup;
pub use sweep::{margin_sweep, SweepRow};
