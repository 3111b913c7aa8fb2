//! The refinement loop: solve, find bottlenecks, reassign them, re-solve,
//! and keep the best solution seen.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::feedback::{
    compute_delays, dbs_select, random_select, sbs_select, SbsMode, SbsParams, DEFAULT_DBS_POOL,
    DEFAULT_SBS_SUBSAMPLE,
};
use crate::instance::{AgentId, TapfInstance};
use crate::mapf::{solve_mapf, solve_mapf_anytime, verify_solution, MapfOptions, Solution};
use crate::matching::{initial_assignment, Assignment};
use crate::reassign::{local_hungarian_shuffled, pibt_displacement};
use crate::time::Deadline;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackKind {
    Dbs,
    Sbs,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReassignKind {
    Pibt,
    Hungarian,
}

impl fmt::Display for FeedbackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeedbackKind::Dbs => "dbs",
            FeedbackKind::Sbs => "sbs",
            FeedbackKind::Random => "random",
        })
    }
}

impl FromStr for FeedbackKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dbs" => Ok(FeedbackKind::Dbs),
            "sbs" => Ok(FeedbackKind::Sbs),
            "random" => Ok(FeedbackKind::Random),
            other => Err(format!("unknown feedback strategy '{other}'")),
        }
    }
}

impl fmt::Display for ReassignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ReassignKind::Pibt => "pibt",
            ReassignKind::Hungarian => "hungarian",
        })
    }
}

impl FromStr for ReassignKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "pibt" => Ok(ReassignKind::Pibt),
            "hungarian" => Ok(ReassignKind::Hungarian),
            other => Err(format!("unknown reassignment strategy '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefineConfig {
    pub feedback: FeedbackKind,
    pub reassign: ReassignKind,
    /// Bottlenecks per iteration.
    pub k: usize,
    /// Delay-based selection pool.
    pub m: usize,
    /// Spectral selection subsample.
    pub s: usize,
    pub refine_budget: Duration,
    /// Anytime pathfinding on the best assignment; zero disables it.
    pub final_opt_budget: Duration,
    pub seed: u64,
    pub workers: usize,
    /// Stop after this many iterations even if budget remains.
    pub max_iters: Option<usize>,
    /// Pathfinding cap per candidate.
    pub candidate_budget: Duration,
    /// Pathfinding cap for the initial assignment.
    pub initial_budget: Duration,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            feedback: FeedbackKind::Dbs,
            reassign: ReassignKind::Hungarian,
            k: 3,
            m: DEFAULT_DBS_POOL,
            s: DEFAULT_SBS_SUBSAMPLE,
            refine_budget: Duration::from_secs(10),
            final_opt_budget: Duration::ZERO,
            seed: 0,
            workers: 1,
            max_iters: None,
            candidate_budget: Duration::from_millis(200),
            initial_budget: Duration::from_secs(60),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RefineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("instance admits no feasible assignment")]
    Infeasible,
    #[error("no initial solution within the budget")]
    InitialSolveFailure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Initial,
    Iteration,
    FinalOptimization,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IterationRecord {
    pub index: usize,
    pub kind: RecordKind,
    /// Since the start of the call.
    pub elapsed: Duration,
    pub bottlenecks: Vec<AgentId>,
    /// Flowtime per candidate; `None` for failed reassignments or timeouts.
    pub candidate_costs: Vec<Option<u64>>,
    /// Candidate that became the continuation.
    pub chosen: Option<usize>,
    pub best_flowtime: u64,
    /// Cumulative wall time spent in pathfinding.
    pub time_in_pathfinding: Duration,
    /// Cumulative wall time spent selecting bottlenecks and reassigning.
    pub time_in_reassignment: Duration,
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub assignment: Assignment,
    pub solution: Solution,
    pub records: Vec<IterationRecord>,
}

impl RefineOutcome {
    pub fn initial_flowtime(&self) -> u64 {
        self.records[0].best_flowtime
    }

    /// Refinement iterations, excluding the initial solve and the final
    /// optimization pass.
    pub fn iterations(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.kind == RecordKind::Iteration)
            .count()
    }

    pub fn improvement_rate(&self) -> f64 {
        improvement_rate(&self.records)
    }
}

/// `100 * (initial - best) / initial` over the records of one run.
pub fn improvement_rate(records: &[IterationRecord]) -> f64 {
    let first = records
        .first()
        .expect("at least the initial record")
        .best_flowtime;
    let last = records.last().unwrap().best_flowtime;
    if first == 0 {
        return 0.0;
    }
    100.0 * (first - last) as f64 / first as f64
}

mod stream {
    pub const FEEDBACK: u64 = 1;
    pub const SELECTION: u64 = 2;
    pub const MAPF: u64 = 3;
    pub const REASSIGN: u64 = 4;
}

/// Independent generator for one named purpose under a master seed.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct Incumbent {
    assignment: Assignment,
    solution: Solution,
}

pub fn refine(inst: &TapfInstance, cfg: &RefineConfig) -> Result<RefineOutcome, RefineError> {
    refine_observed(inst, cfg, |_| {})
}

/// [`refine`] that hands every assignment it builds (the initial one and
/// each reassignment candidate) to `observe`, in creation order.
pub fn refine_observed(
    inst: &TapfInstance,
    cfg: &RefineConfig,
    mut observe: impl FnMut(&Assignment),
) -> Result<RefineOutcome, RefineError> {
    let start = Instant::now();
    let n = inst.num_agents();
    if cfg.k == 0 {
        return Err(RefineError::InvalidConfig("k must be at least 1".into()));
    }
    if cfg.workers == 0 {
        return Err(RefineError::InvalidConfig(
            "workers must be at least 1".into(),
        ));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| RefineError::InvalidConfig(e.to_string()))?;

    let mut feedback_rng = rng_stream(cfg.seed, stream::FEEDBACK);
    let mut selection_rng = rng_stream(cfg.seed, stream::SELECTION);
    let mut reassign_rng = rng_stream(cfg.seed, stream::REASSIGN);
    let mut mapf_rng = rng_stream(cfg.seed, stream::MAPF);

    let initial = initial_assignment(inst).map_err(|_| RefineError::Infeasible)?;
    observe(&initial);
    let t = Instant::now();
    let opts =
        MapfOptions::new(mapf_rng.next_u64()).with_deadline(Deadline::after(cfg.initial_budget));
    let solution =
        solve_mapf(inst, &initial, &opts).map_err(|_| RefineError::InitialSolveFailure)?;
    let mut pathfinding = t.elapsed();
    let mut reassigning = Duration::ZERO;
    debug_assert!(verify_solution(inst, initial.targets(), &solution).is_empty());

    let mut records = vec![IterationRecord {
        index: 0,
        kind: RecordKind::Initial,
        elapsed: start.elapsed(),
        bottlenecks: vec![],
        candidate_costs: vec![Some(solution.flowtime)],
        chosen: Some(0),
        best_flowtime: solution.flowtime,
        time_in_pathfinding: pathfinding,
        time_in_reassignment: reassigning,
    }];
    let mut best = Incumbent {
        assignment: initial.clone(),
        solution: solution.clone(),
    };
    let mut current = Incumbent {
        assignment: initial,
        solution,
    };
    let deadline = Deadline::after(cfg.refine_budget);
    let k = cfg.k.min(n);
    let mut prev_bottlenecks: Vec<AgentId> = Vec::new();

    while n > 0 && !deadline.expired() && cfg.max_iters.is_none_or(|m| records.len() <= m) {
        let t = Instant::now();
        let delays = compute_delays(inst, &current.assignment, &current.solution);
        let bottlenecks = select_bottlenecks(
            inst,
            cfg,
            k,
            &current.assignment,
            delays.as_slice(),
            &prev_bottlenecks,
            &mut feedback_rng,
        );
        let candidates: Vec<Option<Assignment>> = match cfg.reassign {
            ReassignKind::Pibt => bottlenecks
                .iter()
                .map(|&b| pibt_displacement(inst, &current.assignment, b).ok())
                .collect(),
            ReassignKind::Hungarian => {
                let a = local_hungarian_shuffled(
                    inst,
                    &current.assignment,
                    &bottlenecks,
                    &mut reassign_rng,
                );
                vec![a.ok()]
            }
        };
        candidates.iter().flatten().for_each(&mut observe);
        reassigning += t.elapsed();

        // Every call gets its own seed, so an unchanged assignment can
        // still yield a different solution. Seeds are drawn here, in
        // candidate order, to keep results independent of the worker count.
        let t = Instant::now();
        let cap = deadline.capped(cfg.candidate_budget);
        let jobs: Vec<(Option<Assignment>, MapfOptions)> = candidates
            .into_iter()
            .map(|c| {
                let opts = MapfOptions::new(mapf_rng.next_u64()).with_deadline(cap);
                (c, opts)
            })
            .collect();
        let evaluate = |(cand, opts): &(Option<Assignment>, MapfOptions)| -> Option<Solution> {
            let a = cand.as_ref()?;
            let sol = solve_mapf(inst, a, opts).ok()?;
            verify_solution(inst, a.targets(), &sol)
                .is_empty()
                .then_some(sol)
        };
        let solved: Vec<Option<Solution>> = if cfg.workers > 1 && jobs.len() > 1 {
            pool.install(|| jobs.par_iter().map(evaluate).collect())
        } else {
            jobs.iter().map(evaluate).collect()
        };
        let candidates: Vec<Option<Assignment>> = jobs.into_iter().map(|(c, _)| c).collect();
        pathfinding += t.elapsed();

        let costs: Vec<Option<u64>> = solved
            .iter()
            .map(|s| s.as_ref().map(|s| s.flowtime))
            .collect();
        let ok: Vec<usize> = (0..solved.len()).filter(|&i| solved[i].is_some()).collect();
        let mut pairs: Vec<Option<(Assignment, Solution)>> = candidates
            .into_iter()
            .zip(solved)
            .map(|(a, s)| Some((a?, s?)))
            .collect();
        if let Some(&i) = ok.iter().min_by_key(|&&i| (costs[i], i)) {
            if costs[i].unwrap() < best.solution.flowtime {
                let (a, s) = pairs[i].clone().unwrap();
                best = Incumbent {
                    assignment: a,
                    solution: s,
                };
            }
        }
        let chosen = (!ok.is_empty()).then(|| ok[selection_rng.random_range(0..ok.len())]);
        if let Some(c) = chosen {
            let (a, s) = pairs[c].take().unwrap();
            current = Incumbent {
                assignment: a,
                solution: s,
            };
        }
        records.push(IterationRecord {
            index: records.len(),
            kind: RecordKind::Iteration,
            elapsed: start.elapsed(),
            bottlenecks: bottlenecks.clone(),
            candidate_costs: costs,
            chosen,
            best_flowtime: best.solution.flowtime,
            time_in_pathfinding: pathfinding,
            time_in_reassignment: reassigning,
        });
        prev_bottlenecks = bottlenecks;
    }

    if !cfg.final_opt_budget.is_zero() {
        let t = Instant::now();
        let opts = MapfOptions::new(mapf_rng.next_u64())
            .with_deadline(Deadline::after(cfg.final_opt_budget));
        let result = solve_mapf_anytime(inst, &best.assignment, &opts, None).ok();
        pathfinding += t.elapsed();
        let cost = result.as_ref().map(|s| s.flowtime);
        if let Some(sol) = result {
            if sol.flowtime < best.solution.flowtime
                && verify_solution(inst, best.assignment.targets(), &sol).is_empty()
            {
                best.solution = sol;
            }
        }
        records.push(IterationRecord {
            index: records.len(),
            kind: RecordKind::FinalOptimization,
            elapsed: start.elapsed(),
            bottlenecks: vec![],
            candidate_costs: vec![cost],
            chosen: cost.map(|_| 0),
            best_flowtime: best.solution.flowtime,
            time_in_pathfinding: pathfinding,
            time_in_reassignment: reassigning,
        });
    }

    Ok(RefineOutcome {
        assignment: best.assignment,
        solution: best.solution,
        records,
    })
}

fn select_bottlenecks(
    inst: &TapfInstance,
    cfg: &RefineConfig,
    k: usize,
    assignment: &Assignment,
    delays: &[u64],
    prev: &[AgentId],
    rng: &mut ChaCha8Rng,
) -> Vec<AgentId> {
    let n = inst.num_agents();
    let result = match cfg.feedback {
        FeedbackKind::Dbs => dbs_select(delays, cfg.m.clamp(k, n), k, rng),
        FeedbackKind::Random => random_select(n, k, rng),
        FeedbackKind::Sbs => {
            let mode = match cfg.reassign {
                ReassignKind::Pibt => SbsMode::GroupPerMode,
                ReassignKind::Hungarian => SbsMode::TopKFirst,
            };
            let params = SbsParams {
                subsample: cfg.s.max(k),
                dbs_pool: cfg.m,
                ..SbsParams::new(k, mode)
            };
            sbs_select(inst, assignment, delays, &params, prev, rng)
        }
    };
    result.expect("k is clamped to the agent count")
}
