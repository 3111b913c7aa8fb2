//! `tapf`: solve, benchmark, verify and generate target assignment and
//! pathfinding instances.

mod bench;
mod duration;
mod load;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use tapf_core::grid::VertexId;
use tapf_core::instance::{write_scenario, TapfInstance};
use tapf_core::mapf::{format_solution, parse_solution, verify_solution, Solution};
use tapf_core::refine::{refine, FeedbackKind, ReassignKind, RefineConfig, RefineError};
use tapf_core::stats::{fill_from_outcome, trace_rows, write_rows, StatsRow};

use duration::parse_duration;
use load::{load_instance, InstanceSpec, ScenarioSource};

#[derive(Parser)]
#[command(
    name = "tapf",
    version,
    about = "Target assignment and pathfinding by iterative refinement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one instance.
    Solve(SolveArgs),
    /// Run a sweep of agent counts, seeds and strategies.
    Bench(bench::BenchArgs),
    /// Check a solution file against its instance.
    Verify(VerifyArgs),
    /// Generate a scenario file.
    Gen(GenArgs),
}

#[derive(Args, Clone)]
pub struct InstanceArgs {
    #[arg(long)]
    pub map: Option<PathBuf>,
    /// `random`, `hotspot`, or a scenario file.
    #[arg(long, default_value = "random")]
    pub scenario: String,
    #[arg(long)]
    pub agents: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub targets_per_agent: usize,
}

#[derive(Args, Clone)]
pub struct SolverArgs {
    /// Refinement budget.
    #[arg(long, default_value = "10s", value_parser = parse_duration)]
    pub time: Duration,
    /// Anytime pathfinding on the best assignment after refinement.
    #[arg(long, default_value = "0", value_parser = parse_duration)]
    pub final_opt: Duration,
    /// Budget for the first pathfinding call.
    #[arg(long, default_value = "60s", value_parser = parse_duration)]
    pub init_time: Duration,
    /// Pathfinding budget per reassignment candidate.
    #[arg(long, default_value = "200ms", value_parser = parse_duration)]
    pub candidate_time: Duration,
    /// Stop after this many iterations.
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub pool: usize,
    #[arg(long, default_value_t = 100)]
    pub subsample: usize,
    /// Threads evaluating reassignment candidates.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Write zeros in every timing column.
    #[arg(long)]
    pub no_timing: bool,
}

impl SolverArgs {
    pub fn config(
        &self,
        feedback: FeedbackKind,
        reassign: ReassignKind,
        k: usize,
        seed: u64,
    ) -> RefineConfig {
        RefineConfig {
            feedback,
            reassign,
            k,
            m: self.pool,
            s: self.subsample,
            refine_budget: self.time,
            final_opt_budget: self.final_opt,
            seed,
            workers: self.workers,
            max_iters: self.iters,
            candidate_budget: self.candidate_time,
            initial_budget: self.init_time,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "dbs")]
    feedback: FeedbackKind,
    #[arg(long, default_value = "hungarian")]
    reassign: ReassignKind,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Solution file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stats: Option<PathBuf>,
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    solution: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Failure classes mapped to exit codes.
pub enum Failure {
    Input(anyhow::Error),
    InitialSolve(anyhow::Error),
    Violations(usize),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Bench(a) => bench::run_bench(a),
        Command::Verify(a) => run_verify(a),
        Command::Gen(a) => run_gen(a).map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::InitialSolve(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Violations(n)) => {
            eprintln!("{n} violation(s)");
            ExitCode::from(3)
        }
    }
}

pub fn instance_spec(args: &InstanceArgs, seed: u64) -> InstanceSpec {
    InstanceSpec {
        map: args.map.clone(),
        scenario: ScenarioSource::parse(&args.scenario),
        agents: args.agents,
        targets_per_agent: args.targets_per_agent,
        seed,
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn run_solve(args: SolveArgs) -> Result<(), Failure> {
    let spec = instance_spec(&args.instance, args.seed);
    let loaded = load_instance(&spec)?;
    let inst = &loaded.instance;
    let cfg = args
        .solver
        .config(args.feedback, args.reassign, args.k, args.seed);
    let outcome = match refine(inst, &cfg) {
        Ok(o) => o,
        Err(e @ RefineError::InitialSolveFailure) => return Err(Failure::InitialSolve(e.into())),
        Err(e) => return Err(Failure::Input(e.into())),
    };
    let timing = !args.solver.no_timing;

    if let Some(out) = &args.out {
        write_file(out, &format_solution(inst.map(), &outcome.solution))?;
    }
    if let Some(path) = &args.stats {
        let mut row = StatsRow {
            run_id: format!("solve-s{}", args.seed),
            map: loaded.map_path.display().to_string(),
            scenario: spec.scenario.label(),
            agents: inst.num_agents(),
            seed: args.seed,
            feedback: args.feedback.to_string(),
            reassign: args.reassign.to_string(),
            k: args.k,
            status: String::new(),
            init_flowtime: None,
            best_flowtime: None,
            normalized_cost: None,
            imprv_pct: None,
            iters: 0,
            elapsed_ms: 0,
            pathfind_ms: 0,
            reassign_ms: 0,
        };
        fill_from_outcome(&mut row, &outcome, timing);
        write_csv(path, &[row])?;
    }
    if let Some(path) = &args.trace {
        write_csv(path, &trace_rows(&outcome.records, timing))?;
    }
    println!(
        "cost={:.4} flowtime={} iters={} imprv={:.2}",
        outcome.solution.normalized_cost,
        outcome.solution.flowtime,
        outcome.iterations(),
        outcome.improvement_rate()
    );
    Ok(())
}

pub fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file =
        fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    write_rows(file, rows).with_context(|| format!("cannot write {}", path.display()))
}

fn run_verify(args: VerifyArgs) -> Result<(), Failure> {
    let loaded = load_instance(&instance_spec(&args.instance, args.seed))?;
    let inst = &loaded.instance;
    let text = fs::read_to_string(&args.solution)
        .with_context(|| format!("cannot read solution file {}", args.solution.display()))?;
    let solution = parse_solution(inst.map(), &text)
        .with_context(|| format!("invalid solution file {}", args.solution.display()))?;
    let goals = goals_from_paths(inst, &solution);
    let violations = verify_solution(inst, &goals, &solution);
    if violations.is_empty() {
        println!("ok");
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    Err(Failure::Violations(violations.len()))
}

/// The goal of each agent is where its path ends when that is one of its
/// targets, and otherwise its target nearest to that end.
fn goals_from_paths(inst: &TapfInstance, solution: &Solution) -> Vec<VertexId> {
    (0..inst.num_agents())
        .map(|i| {
            let end = solution.paths.get(i).and_then(|p| p.last().copied());
            match end {
                Some(v) if inst.is_feasible(i, v) => v,
                Some(v) if inst.map().contains(v) => *inst
                    .targets(i)
                    .iter()
                    .min_by_key(|&&g| (inst.map().manhattan(g, v), g))
                    .expect("every agent has a target"),
                _ => inst.targets(i)[0],
            }
        })
        .collect()
}

fn run_gen(args: GenArgs) -> Result<()> {
    let spec = instance_spec(&args.instance, args.seed);
    if matches!(spec.scenario, ScenarioSource::File(_)) {
        anyhow::bail!("gen needs --scenario random or hotspot");
    }
    let loaded = load_instance(&spec)?;
    // Scenario files name their map relative to their own directory.
    let map_abs = fs::canonicalize(&loaded.map_path)
        .with_context(|| format!("cannot resolve {}", loaded.map_path.display()))?;
    let out_dir = match &args.out {
        Some(p) => p
            .parent()
            .filter(|d| !d.as_os_str().is_empty())
            .map(fs::canonicalize)
            .transpose()?,
        None => Some(std::env::current_dir()?),
    };
    let map_ref = match (out_dir, map_abs.parent(), map_abs.file_name()) {
        (Some(d), Some(m), Some(name)) if d == m => name.to_string_lossy().into_owned(),
        (None, _, _) if args.out.is_some() => {
            let cwd = std::env::current_dir()?;
            map_abs
                .strip_prefix(&cwd)
                .unwrap_or(&map_abs)
                .display()
                .to_string()
        }
        _ => map_abs.display().to_string(),
    };
    let text = write_scenario(&loaded.instance, &map_ref);
    match &args.out {
        Some(p) => write_file(p, &text)?,
        None => print!("{text}"),
    }
    Ok(())
}
