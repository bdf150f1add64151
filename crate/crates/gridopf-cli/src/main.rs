//! Batch command-line harness: `code1`, `code2`, `evaluate`, `score`.
//!
//! Exit codes: 0 success, 1 success via a fallback path, 2 input error.
//! `GRIDOPF_WORKERS` overrides the default worker count (a `--workers`
//! flag still wins); `GRIDOPF_LOG` or `RUST_LOG` set the log level.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use gridopf::harness::{
    leaderboard_csv, run_code1, run_code2, run_evaluate, run_score, RunArgs,
    RunLabels, RunManifest, RunMode,
};

#[derive(Parser)]
#[command(name = "gridopf", version, about = "Security-constrained AC-OPF batch harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Instance document (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Optional JSON list of contingencies replacing the instance's own.
    #[arg(long)]
    contingencies: Option<PathBuf>,
    /// Worker count for contingency solves (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Write the run manifest (JSON) here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the base case under the time limit and write solution1.
    Code1 {
        #[command(flatten)]
        common: CommonArgs,
        /// Timing category: rt (10 min) or offline (45 min).
        #[arg(long, default_value = "offline", value_parser = parse_mode)]
        mode: RunMode,
        /// Override the category time limit, in seconds.
        #[arg(long)]
        time_limit: Option<f64>,
        /// Prior operating point in base-solution format.
        #[arg(long)]
        seedpoint: Option<PathBuf>,
        /// Output solution file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Produce every post-contingency state from the base solution.
    Code2 {
        #[command(flatten)]
        common: CommonArgs,
        /// Base solution written by code1 (read-only input).
        #[arg(long)]
        solution1: PathBuf,
        /// Per-contingency time limit, in seconds.
        #[arg(long, default_value_t = 2.0)]
        per_contingency_limit: f64,
        /// Output solution file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate one deliverable and emit a score record.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        solution1: PathBuf,
        #[arg(long)]
        solution2: PathBuf,
        /// Labels for the leaderboard.
        #[arg(long, default_value = "solver")]
        team: String,
        /// Defaults to the instance file stem.
        #[arg(long)]
        network_name: Option<String>,
        #[arg(long, default_value = "s1")]
        scenario: String,
    },
    /// Aggregate a directory of evaluate outputs into a leaderboard.
    Score {
        /// Directory of evaluate report JSON files.
        #[arg(long)]
        dir: PathBuf,
        /// Performance-profile integration cap.
        #[arg(long, default_value_t = 10.0)]
        tau_max: f64,
        /// Leaderboard JSON output.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Leaderboard CSV output.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    match s {
        "rt" | "real-time" | "realtime" => Ok(RunMode::RealTime),
        "offline" => Ok(RunMode::Offline),
        other => Err(format!("unknown mode {other:?} (expected rt or offline)")),
    }
}

fn env_workers() -> Option<usize> {
    std::env::var("GRIDOPF_WORKERS").ok()?.parse().ok()
}

fn to_run_args(common: &CommonArgs, out: PathBuf) -> RunArgs {
    let mut args = RunArgs::new(&common.network, out);
    args.contingency_path = common.contingencies.clone();
    args.workers = common.workers.or_else(env_workers).unwrap_or(0);
    args
}

fn write_manifest(path: &Option<PathBuf>, manifest: &RunManifest) -> anyhow::Result<()> {
    if let Some(path) = path {
        std::fs::write(path, serde_json::to_string_pretty(manifest)?)?;
    }
    Ok(())
}

fn run() -> anyhow::Result<u8> {
    let cli = Cli::parse();
    match cli.command {
        Command::Code1 {
            common,
            mode,
            time_limit,
            seedpoint,
            out,
        } => {
            let mut args = to_run_args(&common, out);
            args.mode = mode;
            args.time_limit = time_limit.map(Duration::from_secs_f64);
            args.seedpoint_path = seedpoint;
            let manifest = run_code1(&args)?;
            write_manifest(&common.report, &manifest)?;
            log::info!(
                "code1 done: objective {:?}, fallback {}",
                manifest.claimed_objective,
                manifest.fallback
            );
            Ok(manifest.exit_status as u8)
        }
        Command::Code2 {
            common,
            solution1,
            per_contingency_limit,
            out,
        } => {
            let mut args = to_run_args(&common, out);
            args.per_contingency_limit = Duration::from_secs_f64(per_contingency_limit);
            let manifest = run_code2(&args, &solution1)?;
            write_manifest(&common.report, &manifest)?;
            log::info!(
                "code2 done: objective {:?}, degraded {:?}",
                manifest.claimed_objective,
                manifest.degraded_contingencies
            );
            Ok(manifest.exit_status as u8)
        }
        Command::Evaluate {
            common,
            solution1,
            solution2,
            team,
            network_name,
            scenario,
        } => {
            let network_name = network_name.unwrap_or_else(|| {
                common
                    .network
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "network".into())
            });
            let args = to_run_args(&common, PathBuf::from("unused"));
            let output = run_evaluate(
                &args,
                &solution1,
                &solution2,
                RunLabels {
                    team,
                    network: network_name,
                    scenario,
                },
            )?;
            match &output.report {
                Some(r) => println!(
                    "total {:.6} $/h (cost {:.6}, base penalty {:.6}, contingency avg {:.6}); \
                     feasible: {}; score {:.6}; worst case {:.6}",
                    r.total,
                    r.base_cost,
                    r.base_penalty,
                    r.contingency_penalty_avg,
                    r.feasible,
                    output.score,
                    output.worst_case
                ),
                None => println!(
                    "solution unreadable; worst-case score {:.6} assigned",
                    output.worst_case
                ),
            }
            if let Some(r) = &output.report {
                for v in &r.hard_violations {
                    println!("violation: {} at {} ({:.3e})", v.constraint, v.element, v.magnitude);
                }
            }
            if let Some(path) = &common.report {
                std::fs::write(path, serde_json::to_string_pretty(&output)?)?;
            }
            Ok(0)
        }
        Command::Score {
            dir,
            tau_max,
            out,
            csv,
        } => {
            let board = run_score(&dir, tau_max)?;
            for (t, team) in board.teams.iter().enumerate() {
                let area = board
                    .profile_areas
                    .as_ref()
                    .map(|a| format!("{:.4}", a[t]))
                    .unwrap_or_else(|| "-".into());
                println!(
                    "{team}: geometric-mean {:.6}, profile area {area}",
                    board.overall_scores[t]
                );
            }
            if let Some(path) = out {
                std::fs::write(path, serde_json::to_string_pretty(&board)?)?;
            }
            if let Some(path) = csv {
                std::fs::write(path, leaderboard_csv(&board))?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(
        env_logger::Env::new()
            .filter_or("GRIDOPF_LOG", "info")
            .write_style("GRIDOPF_LOG_STYLE"),
    )
    .init();

    match run() {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
    }
}
