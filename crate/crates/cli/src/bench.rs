use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use tapf_core::refine::{refine, FeedbackKind, ReassignKind, RefineError};
use tapf_core::stats::{fill_from_outcome, StatsRow, STATUS_INFEASIBLE, STATUS_INITIAL_FAILURE};

use crate::load::{load_instance, InstanceSpec, ScenarioSource};
use crate::{write_csv, Failure, SolverArgs};

#[derive(Args)]
pub struct BenchArgs {
    #[arg(long)]
    map: Option<PathBuf>,
    /// `random`, `hotspot`, or a scenario file.
    #[arg(long, default_value = "random")]
    scenario: String,
    /// Agent counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    agents: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    targets_per_agent: usize,
    /// Seeds, comma separated; each seeds both the scenario and the solver.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, value_delimiter = ',', default_value = "dbs")]
    feedback: Vec<FeedbackKind>,
    #[arg(long, value_delimiter = ',', default_value = "hungarian")]
    reassign: Vec<ReassignKind>,
    #[arg(long, value_delimiter = ',', default_value = "3")]
    k: Vec<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    /// Per-run rows.
    #[arg(long)]
    stats: PathBuf,
    /// Aggregate rows; defaults to the stats path with a `.summary.csv` suffix.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Runs executed concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Debug, Clone)]
struct RunSpec {
    agents: usize,
    seed: u64,
    feedback: FeedbackKind,
    reassign: ReassignKind,
    k: usize,
}

/// One line per (agents, feedback, reassign, k) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub map: String,
    pub scenario: String,
    pub agents: usize,
    pub feedback: String,
    pub reassign: String,
    pub k: usize,
    pub runs: usize,
    pub ok: usize,
    pub iters_mean: f64,
    pub imprv_mean: f64,
    pub imprv_min: f64,
    pub imprv_max: f64,
    pub normalized_cost_mean: f64,
}

pub fn run_bench(args: BenchArgs) -> Result<(), Failure> {
    let mut specs = Vec::new();
    for &agents in &args.agents {
        for &feedback in &args.feedback {
            for &reassign in &args.reassign {
                for &k in &args.k {
                    for &seed in &args.seeds {
                        specs.push(RunSpec {
                            agents,
                            seed,
                            feedback,
                            reassign,
                            k,
                        });
                    }
                }
            }
        }
    }
    if let Some(map) = &args.map {
        crate::load::read_map(map)?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .context("cannot start worker threads")?;
    let rows: Vec<StatsRow> =
        pool.install(|| specs.par_iter().map(|s| run_one(&args, s)).collect());
    write_csv(&args.stats, &rows)?;
    let summary_path = args.summary.clone().unwrap_or_else(|| {
        let mut p = args.stats.clone().into_os_string();
        p.push(".summary.csv");
        PathBuf::from(p)
    });
    let summary = summarize(&rows);
    write_csv(&summary_path, &summary)?;
    for s in &summary {
        println!(
            "agents={} feedback={} reassign={} k={} ok={}/{} iters={:.1} imprv={:.2}",
            s.agents, s.feedback, s.reassign, s.k, s.ok, s.runs, s.iters_mean, s.imprv_mean
        );
    }
    Ok(())
}

fn run_one(args: &BenchArgs, run: &RunSpec) -> StatsRow {
    let scenario = ScenarioSource::parse(&args.scenario);
    let spec = InstanceSpec {
        map: args.map.clone(),
        scenario: scenario.clone(),
        agents: Some(run.agents),
        targets_per_agent: args.targets_per_agent,
        seed: run.seed,
    };
    let mut row = StatsRow {
        run_id: format!(
            "a{}-s{}-{}-{}-k{}",
            run.agents, run.seed, run.feedback, run.reassign, run.k
        ),
        map: args
            .map
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default(),
        scenario: scenario.label(),
        agents: run.agents,
        seed: run.seed,
        feedback: run.feedback.to_string(),
        reassign: run.reassign.to_string(),
        k: run.k,
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
    let loaded = match load_instance(&spec) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("{}: {e:#}", row.run_id);
            row.status = STATUS_INFEASIBLE.into();
            return row;
        }
    };
    let cfg = args
        .solver
        .config(run.feedback, run.reassign, run.k, run.seed);
    match refine(&loaded.instance, &cfg) {
        Ok(outcome) => fill_from_outcome(&mut row, &outcome, !args.solver.no_timing),
        Err(RefineError::InitialSolveFailure) => row.status = STATUS_INITIAL_FAILURE.into(),
        Err(e) => {
            eprintln!("{}: {e}", row.run_id);
            row.status = STATUS_INFEASIBLE.into();
        }
    }
    row
}

pub fn summarize(rows: &[StatsRow]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    let mut groups: Vec<Vec<&StatsRow>> = Vec::new();
    for r in rows {
        let key = |s: &SummaryRow| {
            s.agents == r.agents
                && s.feedback == r.feedback
                && s.reassign == r.reassign
                && s.k == r.k
        };
        match out.iter().position(key) {
            Some(i) => groups[i].push(r),
            None => {
                out.push(SummaryRow {
                    map: r.map.clone(),
                    scenario: r.scenario.clone(),
                    agents: r.agents,
                    feedback: r.feedback.clone(),
                    reassign: r.reassign.clone(),
                    k: r.k,
                    runs: 0,
                    ok: 0,
                    iters_mean: 0.0,
                    imprv_mean: 0.0,
                    imprv_min: 0.0,
                    imprv_max: 0.0,
                    normalized_cost_mean: 0.0,
                });
                groups.push(vec![r]);
            }
        }
    }
    for (s, group) in out.iter_mut().zip(&groups) {
        let ok: Vec<&&StatsRow> = group.iter().filter(|r| r.imprv_pct.is_some()).collect();
        s.runs = group.len();
        s.ok = ok.len();
        if ok.is_empty() {
            continue;
        }
        let n = ok.len() as f64;
        let imprv: Vec<f64> = ok.iter().map(|r| r.imprv_pct.unwrap()).collect();
        s.iters_mean = ok.iter().map(|r| r.iters as f64).sum::<f64>() / n;
        s.imprv_mean = imprv.iter().sum::<f64>() / n;
        s.imprv_min = imprv.iter().copied().fold(f64::INFINITY, f64::min);
        s.imprv_max = imprv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        s.normalized_cost_mean = ok.iter().map(|r| r.normalized_cost.unwrap()).sum::<f64>() / n;
    }
    out
}
