//! Batch entry points for the two-phase solve-and-evaluate workflow:
//! `code1` solves the base case under a time limit, `code2` produces every
//! post-contingency state from the (read-only) base solution, `evaluate`
//! scores one deliverable, and `score` aggregates a results directory.
//!
//! Both code phases guarantee a well-formed output file on exit: solver
//! trouble degrades to the projected worst-case point (code1) or to
//! fallback states (code2), never to a missing file.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc;
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::acpf::BaseState;
use crate::contingency::solve_contingency;
use crate::evaluator::{
    evaluate_full, score_or_worst_case, worst_case_point, worst_case_score, EvalConfig,
    EvaluationReport,
};
use crate::io::{
    parse_instance, read_base_solution, scan_contingency_solutions, write_base_solution,
    write_contingency_solutions, ContingencyBlock,
};
use crate::model::{Contingency, Network, SeedBus, SeedGen, SeedPoint};
use crate::opf::{evaluated_full_objective, solve_sc, SolveConfig};
use crate::scoring::{ScoreRecord, ScoreTable};

/// Grace period past the time limit before the watchdog writes the
/// fallback file.
pub const TIME_GRACE: Duration = Duration::from_secs(5);

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Unusable inputs: exit code 2, no output file.
    #[error("input error: {0}")]
    Input(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    RealTime,
    Offline,
}

/// What a batch phase did: inputs, limits, outputs, timings, and status.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub instance: String,
    pub contingency_list: Option<String>,
    pub mode: RunMode,
    pub time_limit_secs: f64,
    pub per_contingency_limit_secs: f64,
    pub workers: usize,
    pub output: String,
    /// 0 = clean solve, 1 = output produced via fallback.
    pub exit_status: i32,
    pub fallback: bool,
    /// Wall-clock seconds per phase.
    pub timings: Vec<(String, f64)>,
    /// The solver's own exact objective claim for the written deliverable.
    pub claimed_objective: Option<f64>,
    /// Contingency ids whose state came from the fallback path (code2).
    pub degraded_contingencies: Vec<String>,
}

/// Inputs shared by the batch phases.
#[derive(Debug, Clone)]
pub struct RunArgs {
    pub instance_path: PathBuf,
    pub contingency_path: Option<PathBuf>,
    pub seedpoint_path: Option<PathBuf>,
    pub mode: RunMode,
    /// Overrides the mode's default Code 1 limit.
    pub time_limit: Option<Duration>,
    pub per_contingency_limit: Duration,
    pub workers: usize,
    pub out_path: PathBuf,
}

impl RunArgs {
    pub fn new(instance: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        Self {
            instance_path: instance.into(),
            contingency_path: None,
            seedpoint_path: None,
            mode: RunMode::Offline,
            time_limit: None,
            per_contingency_limit: Duration::from_secs(2),
            workers: 0,
            out_path: out.into(),
        }
    }

    fn code1_limit(&self) -> Duration {
        self.time_limit.unwrap_or(match self.mode {
            RunMode::RealTime => Duration::from_secs(600),
            RunMode::Offline => Duration::from_secs(2700),
        })
    }
}

/// Load the instance, applying the optional contingency-list and seed-point
/// overrides.
pub fn load_network(args: &RunArgs) -> Result<Network, HarnessError> {
    let text = fs::read_to_string(&args.instance_path)
        .map_err(|e| HarnessError::Input(format!("{}: {e}", args.instance_path.display())))?;
    let net = parse_instance(&text).map_err(|e| HarnessError::Input(e.to_string()))?;

    let mut parts = net.to_parts();
    if let Some(path) = &args.contingency_path {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
        let list: Vec<Contingency> = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Input(format!("contingency list: {e}")))?;
        parts.contingencies = list;
    }
    if let Some(path) = &args.seedpoint_path {
        let text = fs::read_to_string(path)
            .map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
        let interim = parts.clone().build();
        let state = read_base_solution(&interim, &text)
            .map_err(|e| HarnessError::Input(format!("seed point: {e}")))?;
        parts.seed_point = Some(SeedPoint {
            buses: interim
                .buses()
                .iter()
                .enumerate()
                .map(|(i, b)| SeedBus {
                    id: b.id,
                    v: state.v[i],
                    theta: state.theta[i],
                    b: state.b[i],
                })
                .collect(),
            generators: interim
                .generators()
                .iter()
                .enumerate()
                .map(|(i, g)| SeedGen {
                    id: g.id,
                    p: state.p_g[i],
                    q: state.q_g[i],
                })
                .collect(),
        });
    }
    let net = parts.build();
    let violations = net.validate();
    if !violations.is_empty() {
        return Err(HarnessError::Input(violations.join("; ")));
    }
    Ok(net)
}

fn thread_pool(workers: usize) -> rayon::ThreadPool {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if workers > 0 {
        builder = builder.num_threads(workers);
    }
    builder.build().expect("worker pool")
}

/// Code 1: solve the base case and write a base solution file. A file is
/// always written on a parseable instance, via the projected worst-case
/// point if the solver fails or the watchdog fires.
pub fn run_code1(args: &RunArgs) -> Result<RunManifest, HarnessError> {
    let t0 = Instant::now();
    let net = Arc::new(load_network(args)?);
    let parse_secs = t0.elapsed().as_secs_f64();

    let limit = args.code1_limit();
    let cfg = SolveConfig {
        time_budget: limit,
        ..SolveConfig::offline()
    };

    // The solver runs on its own thread; the watchdog writes the fallback
    // file if no result lands within limit + grace. No thread is killed; a
    // straggler is simply abandoned (the cooperative deadlines inside the
    // solver make that unlikely).
    let t_solve = Instant::now();
    let (tx, rx) = mpsc::channel();
    let solver_net = Arc::clone(&net);
    let solver_cfg = cfg.clone();
    let workers = args.workers;
    std::thread::spawn(move || {
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| {
            thread_pool(workers).install(|| solve_sc(&solver_net, &solver_cfg))
        }));
        let _ = tx.send(result.ok());
    });

    let outcome = rx.recv_timeout(limit + TIME_GRACE).ok().flatten();
    let solve_secs = t_solve.elapsed().as_secs_f64();
    if outcome.is_none() {
        log::warn!("code1 solver missed the deadline; writing the fallback point");
    }

    let t_write = Instant::now();
    let (state, fallback): (BaseState, bool) = match outcome {
        Some(sc) => (sc.base, false),
        None => (worst_case_point(&net), true),
    };
    let text = match write_base_solution(&net, &state) {
        Ok(t) => t,
        // Non-finite solver output: fall back to the worst-case point.
        Err(_) => write_base_solution(&net, &worst_case_point(&net))
            .expect("worst-case point is always writable"),
    };
    fs::write(&args.out_path, &text)?;
    let write_secs = t_write.elapsed().as_secs_f64();

    let claimed = evaluated_full_objective(&net, &state, &cfg);
    Ok(RunManifest {
        instance: args.instance_path.display().to_string(),
        contingency_list: args.contingency_path.as_ref().map(|p| p.display().to_string()),
        mode: args.mode,
        time_limit_secs: limit.as_secs_f64(),
        per_contingency_limit_secs: args.per_contingency_limit.as_secs_f64(),
        workers: args.workers,
        output: args.out_path.display().to_string(),
        exit_status: i32::from(fallback),
        fallback,
        timings: vec![
            ("parse".into(), parse_secs),
            ("solve".into(), solve_secs),
            ("write".into(), write_secs),
        ],
        claimed_objective: Some(claimed),
        degraded_contingencies: Vec::new(),
    })
}

/// Code 2: solve every contingency from the base solution written by
/// code 1. The base file is read-only input; a digest check confirms it was
/// not touched. Output is deterministic for any worker count.
pub fn run_code2(args: &RunArgs, solution1_path: &Path) -> Result<RunManifest, HarnessError> {
    let t0 = Instant::now();
    let net = Arc::new(load_network(args)?);
    let sol1_bytes = fs::read(solution1_path)
        .map_err(|e| HarnessError::Input(format!("{}: {e}", solution1_path.display())))?;
    let digest_before = Sha256::digest(&sol1_bytes);
    let base = read_base_solution(&net, &String::from_utf8_lossy(&sol1_bytes))
        .map_err(|e| HarnessError::Input(format!("base solution: {e}")))?;
    let parse_secs = t0.elapsed().as_secs_f64();

    let cfg = SolveConfig::offline();
    let per_limit = args.per_contingency_limit;
    let t_solve = Instant::now();
    let overran = AtomicBool::new(false);

    let states: Vec<(ContingencyBlock, bool)> = thread_pool(args.workers).install(|| {
        use rayon::prelude::*;
        net.contingencies()
            .par_iter()
            .map(|k| {
                let started = Instant::now();
                let state = solve_contingency(&net, &base, k, &cfg.contingency)
                    .expect("contingency elements validated");
                if started.elapsed() > per_limit {
                    overran.store(true, Ordering::Relaxed);
                }
                (
                    ContingencyBlock {
                        label: k.id.clone(),
                        delta: state.delta,
                        point: state.point.clone(),
                    },
                    state.degraded,
                )
            })
            .collect()
    });
    let solve_secs = t_solve.elapsed().as_secs_f64();

    let t_write = Instant::now();
    let blocks: Vec<ContingencyBlock> = states.iter().map(|(b, _)| b.clone()).collect();
    let degraded: Vec<String> = states
        .iter()
        .filter(|(_, d)| *d)
        .map(|(b, _)| b.label.clone())
        .collect();
    let text = write_contingency_solutions(&net, &blocks)
        .map_err(|e| HarnessError::Input(format!("contingency solutions: {e}")))?;
    fs::write(&args.out_path, &text)?;
    let write_secs = t_write.elapsed().as_secs_f64();

    if !degraded.is_empty() {
        log::warn!("code2 fallback states for {degraded:?}");
    }
    let digest_after = Sha256::digest(fs::read(solution1_path)?);
    if digest_before != digest_after {
        return Err(HarnessError::Input(
            "base solution file changed while code2 was running".into(),
        ));
    }

    // Claim the full objective of the deliverable as written.
    let report = evaluate_full(&net, &base, &blocks, &EvalConfig::default())
        .map_err(|e| HarnessError::Input(e.to_string()))?;
    let fallback = !degraded.is_empty();
    Ok(RunManifest {
        instance: args.instance_path.display().to_string(),
        contingency_list: args.contingency_path.as_ref().map(|p| p.display().to_string()),
        mode: args.mode,
        time_limit_secs: args.code1_limit().as_secs_f64(),
        per_contingency_limit_secs: per_limit.as_secs_f64(),
        workers: args.workers,
        output: args.out_path.display().to_string(),
        exit_status: i32::from(fallback || overran.load(Ordering::Relaxed)),
        fallback,
        timings: vec![
            ("parse".into(), parse_secs),
            ("solve".into(), solve_secs),
            ("write".into(), write_secs),
        ],
        claimed_objective: Some(report.total),
        degraded_contingencies: degraded,
    })
}

/// Identity labels attached to one evaluated deliverable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunLabels {
    pub team: String,
    pub network: String,
    pub scenario: String,
}

/// Everything the evaluate phase knows about one deliverable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluateOutput {
    pub labels: RunLabels,
    pub worst_case: f64,
    /// Final score after worst-case substitution.
    pub score: f64,
    /// None when a solution file was missing or unreadable.
    pub report: Option<EvaluationReport>,
}

/// Evaluate one deliverable (base and contingency solution files) against
/// the instance. Unreadable or missing solutions score as the worst case;
/// only a bad instance is an error.
pub fn run_evaluate(
    args: &RunArgs,
    solution1_path: &Path,
    solution2_path: &Path,
    labels: RunLabels,
) -> Result<EvaluateOutput, HarnessError> {
    let net = load_network(args)?;
    let worst_case = worst_case_score(&net);

    let report = (|| {
        let base_text = fs::read_to_string(solution1_path).ok()?;
        let base = read_base_solution(&net, &base_text).ok()?;
        let cont_text = fs::read_to_string(solution2_path).ok()?;
        let blocks = scan_contingency_solutions(&net, &cont_text).ok()?;
        evaluate_full(&net, &base, &blocks, &EvalConfig::default()).ok()
    })();

    let score = score_or_worst_case(&net, report.as_ref());
    Ok(EvaluateOutput {
        labels,
        worst_case,
        score,
        report,
    })
}

/// Leaderboard assembled from a results directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Leaderboard {
    pub teams: Vec<String>,
    /// Geometric-mean overall score per team (lower is better).
    pub overall_scores: Vec<f64>,
    /// Per-network geometric means, teams × networks.
    pub network_scores: Vec<Vec<f64>>,
    /// Performance-profile area per team (higher is better); None with a
    /// single team.
    pub profile_areas: Option<Vec<f64>>,
    pub tau_max: f64,
    /// Difficulty gap ε per (network, scenario) where at least two teams
    /// scored.
    pub gaps: Vec<(String, String, Option<f64>)>,
    pub networks: Vec<String>,
}

/// Aggregate the evaluate outputs (`*.json`) found in a directory into a
/// leaderboard under both scoring methods.
pub fn run_score(results_dir: &Path, tau_max: f64) -> Result<Leaderboard, HarnessError> {
    let mut records: Vec<ScoreRecord> = Vec::new();
    let mut entries: Vec<PathBuf> = fs::read_dir(results_dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    entries.sort();
    for path in entries {
        let text = fs::read_to_string(&path)?;
        let output: EvaluateOutput = serde_json::from_str(&text)
            .map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
        records.push(ScoreRecord {
            team: output.labels.team,
            network: output.labels.network,
            scenario: output.labels.scenario,
            score: output.score,
        });
    }
    if records.is_empty() {
        return Err(HarnessError::Input(format!(
            "no evaluation outputs in {}",
            results_dir.display()
        )));
    }
    let table = ScoreTable::from_records(&records)
        .map_err(|e| HarnessError::Input(e.to_string()))?;
    let profile_areas = (table.teams.len() >= 2)
        .then(|| table.profile_areas(tau_max))
        .transpose()
        .map_err(|e| HarnessError::Input(e.to_string()))?;
    Ok(Leaderboard {
        overall_scores: table.overall_scores(),
        network_scores: table.network_scores(),
        gaps: table.scenario_gaps(),
        teams: table.teams,
        profile_areas,
        tau_max,
        networks: table.networks,
    })
}

/// Render the leaderboard as CSV (one row per team).
pub fn leaderboard_csv(board: &Leaderboard) -> String {
    let mut out = String::from("team,overall_score");
    for n in &board.networks {
        out.push_str(&format!(",net:{n}"));
    }
    out.push_str(",profile_area\n");
    for (t, team) in board.teams.iter().enumerate() {
        out.push_str(&format!("{team},{}", board.overall_scores[t]));
        for n in 0..board.networks.len() {
            out.push_str(&format!(",{}", board.network_scores[t][n]));
        }
        match &board.profile_areas {
            Some(a) => out.push_str(&format!(",{}\n", a[t])),
            None => out.push_str(",\n"),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_instance;
    use crate::samples;

    fn write_sample_instance(dir: &Path, net: &Network) -> PathBuf {
        let path = dir.join("instance.json");
        fs::write(&path, write_instance(net, 100.0)).unwrap();
        path
    }

    #[test]
    fn code1_then_code2_produce_valid_files() {
        let dir = tempfile::tempdir().unwrap();
        let net = samples::three_gen_ring();
        let instance = write_sample_instance(dir.path(), &net);

        let mut args = RunArgs::new(&instance, dir.path().join("solution1.txt"));
        args.time_limit = Some(Duration::from_secs(20));
        let m1 = run_code1(&args).unwrap();
        assert_eq!(m1.exit_status, 0, "{m1:?}");

        let sol1 = dir.path().join("solution1.txt");
        let mut args2 = RunArgs::new(&instance, dir.path().join("solution2.txt"));
        args2.workers = 2;
        let m2 = run_code2(&args2, &sol1).unwrap();
        assert_eq!(m2.exit_status, 0, "{m2:?}");

        let out = run_evaluate(
            &args2,
            &sol1,
            &dir.path().join("solution2.txt"),
            RunLabels {
                team: "solver".into(),
                network: "ring".into(),
                scenario: "s1".into(),
            },
        )
        .unwrap();
        let report = out.report.expect("files readable");
        assert!(report.feasible, "{:?}", report.hard_violations);
        assert!(out.score <= out.worst_case);

        // The solver's claim and the file-based evaluation agree.
        let claimed = m2.claimed_objective.unwrap();
        assert!(
            (claimed - report.total).abs() <= 1e-6 * (1.0 + report.total.abs()),
            "claimed {claimed} vs evaluated {}",
            report.total
        );
    }

    #[test]
    fn worker_count_does_not_change_the_output() {
        let dir = tempfile::tempdir().unwrap();
        let net = samples::three_gen_ring();
        let instance = write_sample_instance(dir.path(), &net);
        let mut args = RunArgs::new(&instance, dir.path().join("solution1.txt"));
        args.time_limit = Some(Duration::from_secs(20));
        run_code1(&args).unwrap();
        let sol1 = dir.path().join("solution1.txt");

        let mut texts = Vec::new();
        for workers in [1, 4] {
            let out = dir.path().join(format!("solution2_{workers}.txt"));
            let mut args2 = RunArgs::new(&instance, &out);
            args2.workers = workers;
            run_code2(&args2, &sol1).unwrap();
            texts.push(fs::read(&out).unwrap());
        }
        assert_eq!(texts[0], texts[1]);
    }

    #[test]
    fn tight_time_limit_still_writes_a_file_quickly() {
        let dir = tempfile::tempdir().unwrap();
        let net = samples::random_network(77, 9, 3);
        let instance = write_sample_instance(dir.path(), &net);
        let out = dir.path().join("solution1.txt");
        let mut args = RunArgs::new(&instance, &out);
        args.time_limit = Some(Duration::from_secs(1));
        let started = Instant::now();
        let m = run_code1(&args).unwrap();
        let wall = started.elapsed();
        assert!(wall <= Duration::from_secs(6), "took {wall:?}");
        assert!(out.exists());
        assert!(m.exit_status <= 1);
        // Whatever was written must parse back.
        let net = load_network(&args).unwrap();
        read_base_solution(&net, &fs::read_to_string(&out).unwrap()).unwrap();
    }

    #[test]
    fn seedpoint_file_feeds_the_warm_start() {
        let dir = tempfile::tempdir().unwrap();
        let net = samples::three_gen_ring();
        let instance = write_sample_instance(dir.path(), &net);
        // Use a converged power flow as the prior point.
        let prior = crate::acpf::proportional_powerflow_start(&net).unwrap().point;
        let seed_path = dir.path().join("prior.txt");
        fs::write(&seed_path, write_base_solution(&net, &prior).unwrap()).unwrap();

        let mut args = RunArgs::new(&instance, dir.path().join("solution1.txt"));
        args.seedpoint_path = Some(seed_path);
        args.time_limit = Some(Duration::from_secs(10));
        let loaded = load_network(&args).unwrap();
        let seed = loaded.seed_point().expect("seed installed");
        assert_eq!(seed.generators.len(), net.generators().len());
        let m = run_code1(&args).unwrap();
        assert_eq!(m.exit_status, 0);
    }

    #[test]
    fn corrupt_instance_is_an_input_error_without_output() {
        let dir = tempfile::tempdir().unwrap();
        let instance = dir.path().join("bad.json");
        fs::write(&instance, "{ definitely not json").unwrap();
        let out = dir.path().join("solution1.txt");
        let err = run_code1(&RunArgs::new(&instance, &out)).unwrap_err();
        assert!(matches!(err, HarnessError::Input(_)));
        assert!(!out.exists());
    }

    #[test]
    fn code2_without_solution1_is_an_input_error() {
        let dir = tempfile::tempdir().unwrap();
        let net = samples::two_bus();
        let instance = write_sample_instance(dir.path(), &net);
        let args = RunArgs::new(&instance, dir.path().join("solution2.txt"));
        let err = run_code2(&args, &dir.path().join("missing.txt")).unwrap_err();
        assert!(matches!(err, HarnessError::Input(_)));
    }

    #[test]
    fn empty_contingency_list_yields_empty_but_valid_file() {
        let dir = tempfile::tempdir().unwrap();
        let net = samples::two_bus(); // no contingencies
        let instance = write_sample_instance(dir.path(), &net);
        let mut args = RunArgs::new(&instance, dir.path().join("solution1.txt"));
        args.time_limit = Some(Duration::from_secs(10));
        run_code1(&args).unwrap();
        let args2 = RunArgs::new(&instance, dir.path().join("solution2.txt"));
        let m = run_code2(&args2, &dir.path().join("solution1.txt")).unwrap();
        assert_eq!(m.exit_status, 0);
        assert_eq!(fs::read_to_string(dir.path().join("solution2.txt")).unwrap(), "");
    }

    #[test]
    fn diverging_contingency_is_flagged_but_still_written() {
        // Two weak circuits at 0.6 p.u. load: either circuit alone has no
        // power-flow solution, so the outage takes the fallback path.
        let mut parts = samples::two_bus_parts();
        let weak = |id: usize| crate::model::Line {
            id,
            origin: 1,
            destination: 2,
            g: 0.0,
            b: -1.0,
            b_ch: 0.0,
            rating: 2.0,
            rating_e: 2.0,
        };
        parts.lines = vec![weak(1), weak(2)];
        parts.buses[1].p_load = 0.6;
        parts.buses[1].q_load = 0.0;
        parts.contingencies = vec![crate::model::Contingency {
            id: "E1".into(),
            kind: crate::model::ContingencyKind::LineOut,
            element: 1,
        }];
        let net = parts.build();

        let dir = tempfile::tempdir().unwrap();
        let instance = write_sample_instance(dir.path(), &net);
        let mut args = RunArgs::new(&instance, dir.path().join("solution1.txt"));
        args.time_limit = Some(Duration::from_secs(15));
        run_code1(&args).unwrap();

        let args2 = RunArgs::new(&instance, dir.path().join("solution2.txt"));
        let m = run_code2(&args2, &dir.path().join("solution1.txt")).unwrap();
        assert_eq!(m.degraded_contingencies, vec!["E1".to_string()]);
        assert_eq!(m.exit_status, 1);
        // The fallback block is present and well-formed.
        let loaded = load_network(&args2).unwrap();
        let text = fs::read_to_string(dir.path().join("solution2.txt")).unwrap();
        let blocks = crate::io::read_contingency_solutions(&loaded, &text).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(blocks[0].label, "E1");
    }

    #[test]
    fn missing_solution_files_score_as_worst_case() {
        let dir = tempfile::tempdir().unwrap();
        let net = samples::three_gen_ring();
        let instance = write_sample_instance(dir.path(), &net);
        let args = RunArgs::new(&instance, dir.path().join("unused.txt"));
        let out = run_evaluate(
            &args,
            &dir.path().join("nope1.txt"),
            &dir.path().join("nope2.txt"),
            RunLabels {
                team: "t".into(),
                network: "n".into(),
                scenario: "s".into(),
            },
        )
        .unwrap();
        assert!(out.report.is_none());
        assert_eq!(out.score, out.worst_case);
    }

    #[test]
    fn score_directory_reproduces_scoring_module() {
        let dir = tempfile::tempdir().unwrap();
        let mk = |team: &str, network: &str, scenario: &str, score: f64| EvaluateOutput {
            labels: RunLabels {
                team: team.into(),
                network: network.into(),
                scenario: scenario.into(),
            },
            worst_case: 1e6,
            score,
            report: None,
        };
        let outputs = [
            mk("a", "n1", "s1", 10.0),
            mk("a", "n1", "s2", 1000.0),
            mk("b", "n1", "s1", 20.0),
            mk("b", "n1", "s2", 500.0),
        ];
        for (i, o) in outputs.iter().enumerate() {
            fs::write(
                dir.path().join(format!("r{i}.json")),
                serde_json::to_string(o).unwrap(),
            )
            .unwrap();
        }
        let board = run_score(dir.path(), 10.0).unwrap();
        assert_eq!(board.teams, vec!["a", "b"]);
        // Both teams have geomean 100; profile areas from ratios
        // a=(1,2), b=(2,1).
        assert!((board.overall_scores[0] - 100.0).abs() < 1e-9);
        assert!((board.overall_scores[1] - 100.0).abs() < 1e-9);
        let areas = board.profile_areas.clone().unwrap();
        assert!((areas[0] - areas[1]).abs() < 1e-12);
        let csv = leaderboard_csv(&board);
        assert!(csv.starts_with("team,overall_score,net:n1,profile_area\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
