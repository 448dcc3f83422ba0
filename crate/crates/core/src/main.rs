use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use drcbf::filter::FilterKind;
use drcbf::harness::{margin_sweep, monte_carlo, output, run_episode, Scenario, Setup};
use drcbf::Error;

#[derive(Parser)]
#[command(name = "drcbf", version, about = "Robust barrier-function safety filters under sampling, disturbance and estimation error")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Scenario file (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the filter kind.
    #[arg(long, value_parser = parse_filter)]
    filter: Option<FilterKind>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode; writes trajectory.csv and summary.json.
    Simulate(Common),
    /// Run many episodes; writes stats.json and min_h.csv.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// Reach margins at the start state; writes margins.csv.
    Margins(Common),
    /// Per-step reach boxes of one episode; writes reach.csv.
    Reach(Common),
    /// Estimate the Lipschitz constants; writes the sidecar.
    Constants(Common),
}

fn parse_filter(s: &str) -> Result<FilterKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load(common: &Common) -> drcbf::Result<Scenario> {
    let mut sc = match &common.config {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(seed) = common.seed {
        sc.scenario.seed = seed;
    }
    if let Some(f) = common.filter {
        sc.filter.kind = f;
    }
    Ok(sc)
}

fn write(dir: &Path, name: &str, contents: &str) -> drcbf::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

fn run(cmd: Command) -> drcbf::Result<()> {
    match cmd {
        Command::Simulate(c) => {
            let setup = Setup::new(load(&c)?)?;
            let traj = run_episode(&setup, setup.scenario.scenario.seed)?;
            let report = output::EpisodeReport::new(&setup, &traj);
            write(&c.out, "trajectory.csv", &output::trajectory_csv(&setup, &traj))?;
            write(&c.out, "summary.json", &(serde_json::to_string_pretty(&report)? + "\n"))?;
            println!(
                "min h {:.4}, {} infeasible steps, final distance {:.3}",
                report.min_h, report.infeasible_steps, report.final_goal_distance
            );
        }
        Command::Montecarlo { common, runs } => {
            let setup = Setup::new(load(&common)?)?;
            let stats = monte_carlo(&setup, runs)?;
            write(&common.out, "stats.json", &(serde_json::to_string_pretty(&stats)? + "\n"))?;
            write(&common.out, "min_h.csv", &output::min_h_csv(&stats))?;
            println!(
                "{} runs: min {:.4} max {:.4} mean {:.4}, {} collisions",
                stats.runs, stats.min, stats.max, stats.mean, stats.collisions
            );
        }
        Command::Margins(c) => {
            let setup = Setup::new(load(&c)?)?;
            let rows = margin_sweep(&setup, &setup.scenario.sweep.times)?;
            let path = write(&c.out, "margins.csv", &output::sweep_csv(&rows))?;
            println!("{} rows -> {}", rows.len(), path.display());
        }
        Command::Reach(c) => {
            let setup = Setup::new(load(&c)?)?;
            let traj = run_episode(&setup, setup.scenario.scenario.seed)?;
            let path = write(&c.out, "reach.csv", &output::reach_csv(&setup, &traj))?;
            println!("{} boxes -> {}", traj.records.len(), path.display());
        }
        Command::Constants(c) => {
            let mut sc = load(&c)?;
            let target = sc.constants.sidecar.take().unwrap_or_else(|| c.out.join("constants.toml"));
            let setup = Setup::new(sc)?;
            let est = setup.estimate_constants()?;
            if let Some(dir) = target.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            est.save(&target)?;
            print!("{}", est.to_toml());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
