//! `fcp`: run planning cycles, episodes, Monte Carlo studies and solve-time
//! benchmarks from JSON scenario files.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fcp_core::optimizer::{SolutionRow, SolveStatus};
use fcp_core::pipeline::PipelineError;
use fcp_harness::io::{write_csv, write_json};
use fcp_harness::montecarlo::Summary;
use fcp_harness::{
    bench_solves, compute_metrics, monte_carlo, plan_initial, run_episode, Outcome, PlannerKind,
    Scenario,
};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "fcp", version, about = "Frenet corridor planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// One planning cycle from the initial state; writes solution.json.
    Plan(Common),
    /// Closed-loop episode; writes episode.json and metrics.json.
    Episode {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "fcp")]
        planner: PlannerKind,
    },
    /// Randomized trials; writes aggregate.json, aggregate.csv, trials.csv, runtime.json.
    Montecarlo {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "fcp")]
        planner: PlannerKind,
        #[arg(long, default_value_t = 50)]
        trials: usize,
    },
    /// Cold-start solve timings; writes histogram.csv, samples.csv, bench.json.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1000)]
        runs: usize,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Restrict work to one thread.
    #[arg(long)]
    single_thread: bool,
    /// Parameter override `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// Failure classes mapped to exit codes.
enum Failure {
    Config(anyhow::Error),
    Run(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Config(e.into())
    }
}

fn load(common: &Common) -> Result<Scenario> {
    let mut sc = Scenario::load(&common.scenario)?;
    for item in &common.overrides {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| anyhow!("override '{item}' is not key=value"))?;
        let value: f64 = value
            .trim()
            .parse()
            .with_context(|| format!("override '{item}' has a non-numeric value"))?;
        sc.set(key.trim(), value)?;
    }
    sc.validate()?;
    if common.single_thread {
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build_global();
    }
    Ok(sc)
}

#[derive(Serialize)]
struct Diagnostics {
    cost: f64,
    iterations: usize,
    status: SolveStatus,
    solve_time: f64,
    max_violation: f64,
    slack_sum: f64,
}

#[derive(Serialize)]
struct SolutionFile {
    scenario: String,
    seed: u64,
    diagnostics: Diagnostics,
    rows: Vec<SolutionRow>,
}

fn plan(common: &Common) -> Result<(), Failure> {
    let sc = load(common)?;
    let output = match plan_initial(&sc, common.seed)? {
        Ok(out) => out,
        Err(PipelineError::Infeasible(out)) => *out,
        Err(e) => return Err(Failure::Run(e.to_string())),
    };
    let sol = &output.solution;
    let file = SolutionFile {
        scenario: sc.name.clone(),
        seed: common.seed,
        diagnostics: Diagnostics {
            cost: sol.cost,
            iterations: sol.iterations,
            status: sol.status,
            solve_time: sol.solve_time,
            max_violation: sol.max_violation,
            slack_sum: sol.slack_sum(),
        },
        rows: sol.rows(&output.prepared.corridor),
    };
    let path = common.out.join("solution.json");
    write_json(&path, &file)?;
    println!(
        "{}: status {:?}, cost {:.6}, {} iterations, {:.4} s",
        path.display(),
        sol.status,
        sol.cost,
        sol.iterations,
        sol.solve_time
    );
    if sol.status == SolveStatus::Infeasible {
        return Err(Failure::Run(format!(
            "infeasible: corridor violated by {:.3} m",
            sol.max_violation
        )));
    }
    Ok(())
}

fn episode(common: &Common, planner: PlannerKind) -> Result<(), Failure> {
    let sc = load(common)?;
    let log = run_episode(&sc, planner, common.seed)?;
    let metrics = compute_metrics(&log);
    write_json(&common.out.join("episode.json"), &log)?;
    write_json(&common.out.join("metrics.json"), &metrics)?;
    println!("{}", serde_json::to_string_pretty(&metrics)?);
    match log.outcome {
        Outcome::Completed => Ok(()),
        Outcome::Aborted { cause } => Err(Failure::Run(cause)),
    }
}

#[derive(Serialize)]
struct SummaryRow {
    metric: &'static str,
    mean: Option<f64>,
    std: Option<f64>,
}

fn montecarlo(common: &Common, planner: PlannerKind, trials: usize) -> Result<(), Failure> {
    let sc = load(common)?;
    let report = monte_carlo(&sc, planner, trials, common.seed, !common.single_thread)?;
    let a = &report.aggregate;
    write_json(&common.out.join("aggregate.json"), a)?;
    let row = |metric, s: Option<Summary>| SummaryRow {
        metric,
        mean: s.map(|s| s.mean),
        std: s.map(|s| s.std),
    };
    write_csv(
        &common.out.join("aggregate.csv"),
        &[
            row("max_delta_yaw", a.max_delta_yaw),
            row("mean_delta_yaw", a.mean_delta_yaw),
            row("mean_lateral", a.mean_lateral),
            row("min_distance", a.min_distance),
            row("mean_distance", a.mean_distance),
        ],
    )?;
    write_csv(&common.out.join("trials.csv"), &report.trials)?;
    write_json(&common.out.join("runtime.json"), &report.runtime)?;
    println!(
        "{} trials: {} passed, {} collisions, {} road exits, {} aborted; mean runtime {:.4} s",
        a.trials, a.passed, a.collisions, a.road_exits, a.aborted, report.runtime.mean_runtime
    );
    Ok(())
}

fn bench(common: &Common, runs: usize) -> Result<(), Failure> {
    let sc = load(common)?;
    let report = bench_solves(&sc, runs, common.seed)?;
    write_csv(&common.out.join("histogram.csv"), &report.histogram())?;
    write_csv(&common.out.join("samples.csv"), &report.samples)?;
    #[derive(Serialize)]
    struct BenchSummary {
        runs: usize,
        skipped: usize,
        infeasible: usize,
        mean: f64,
        max: f64,
    }
    write_json(
        &common.out.join("bench.json"),
        &BenchSummary {
            runs: report.runs,
            skipped: report.skipped,
            infeasible: report.infeasible,
            mean: report.mean,
            max: report.max,
        },
    )?;
    println!(
        "{} runs: mean {:.4} s, max {:.4} s ({} infeasible, {} layouts skipped)",
        report.runs, report.mean, report.max, report.infeasible, report.skipped
    );
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Plan(common) => plan(common),
        Command::Episode { common, planner } => episode(common, *planner),
        Command::Montecarlo {
            common,
            planner,
            trials,
        } => montecarlo(common, *planner, *trials),
        Command::Bench { common, runs } => bench(common, *runs),
    }
}

fn init_logging() -> Result<()> {
    let level = std::env::var("FCP_LOG_LEVEL").unwrap_or_else(|_| "error".into());
    let filter = match level.as_str() {
        "error" | "info" | "debug" => level,
        other => bail!("FCP_LOG_LEVEL must be error, info or debug, got '{other}'"),
    };
    env_logger::Builder::new().parse_filters(&filter).init();
    Ok(())
}

fn main() -> ExitCode {
    if let Err(e) = init_logging() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Run(cause)) => {
            eprintln!("aborted: {cause}");
            ExitCode::from(1)
        }
    }
}
