//! Bottleneck selection from the previous solution: delay-based selection,
//! spectral bottleneck sampling and a uniform random baseline.

mod lanczos;

use std::collections::HashMap;

use rand::seq::index;
use rand::Rng;
use thiserror::Error;

use crate::grid::VertexId;
use crate::instance::{AgentId, TapfInstance};
use crate::mapf::{effective_cost, position, Solution};
use crate::matching::Assignment;

pub use lanczos::{
    default_lanczos_cap, top_eigenpairs, SparseSymmetric, SpectralResult, RESIDUAL_TOLERANCE,
};

/// Pool size for delay-based selection.
pub const DEFAULT_DBS_POOL: usize = 10;
/// Subsample size for spectral selection.
pub const DEFAULT_SBS_SUBSAMPLE: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeedbackError {
    #[error("cannot pick {k} agents from a pool of {pool} out of {n}")]
    InvalidK { k: usize, pool: usize, n: usize },
    #[error("Lanczos converged for only {0} eigenpairs")]
    ConvergenceFailure(usize),
}

/// `delay[i] = effective_cost(path_i) - dist(start_i, target_i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayVector(pub Vec<u64>);

impl DelayVector {
    pub fn as_slice(&self) -> &[u64] {
        &self.0
    }

    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }
}

pub fn compute_delays(
    inst: &TapfInstance,
    assignment: &Assignment,
    solution: &Solution,
) -> DelayVector {
    DelayVector(
        solution
            .paths
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let goal = assignment.target(i);
                let cost =
                    effective_cost(p, goal).expect("solution ends at assigned targets") as u64;
                let ideal = u64::from(inst.dist(i, goal).expect("assignment is feasible"));
                cost.checked_sub(ideal)
                    .expect("no path beats the shortest distance")
            })
            .collect(),
    )
}

/// Picks `k` agents uniformly from the `m` most delayed ones (ties broken
/// toward lower ids).
pub fn dbs_select<R: Rng + ?Sized>(
    delays: &[u64],
    m: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<AgentId>, FeedbackError> {
    let n = delays.len();
    if k == 0 || k > m || m > n {
        return Err(FeedbackError::InvalidK { k, pool: m, n });
    }
    let mut order: Vec<AgentId> = (0..n).collect();
    order.sort_by(|&a, &b| delays[b].cmp(&delays[a]).then(a.cmp(&b)));
    order.truncate(m);
    Ok(index::sample(rng, m, k)
        .into_iter()
        .map(|p| order[p])
        .collect())
}

/// `k` distinct agents drawn uniformly from `0..n`.
pub fn random_select<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<Vec<AgentId>, FeedbackError> {
    if k > n {
        return Err(FeedbackError::InvalidK { k, pool: n, n });
    }
    Ok(index::sample(rng, n, k).into_vec())
}

/// Pairwise conflict counts between ideal paths, indexed by position in
/// the agent subset it was built from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictMatrix {
    dim: usize,
    counts: Vec<u32>,
}

impl ConflictMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            counts: vec![0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.counts[i * self.dim + j]
    }

    fn bump(&mut self, i: usize, j: usize) {
        self.counts[i * self.dim + j] += 1;
        self.counts[j * self.dim + i] += 1;
    }

    pub fn nnz(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }
}

/// Counts vertex and edge conflicts between `paths[a]` and `paths[b]` for
/// every pair, holding each path at its last vertex once it ends.
pub fn conflict_counts(paths: &[Vec<VertexId>]) -> ConflictMatrix {
    let s = paths.len();
    let mut m = ConflictMatrix::zeros(s);
    let horizon = paths.iter().map(Vec::len).max().unwrap_or(0);
    let mut at: HashMap<VertexId, Vec<usize>> = HashMap::new();
    let mut moves: HashMap<(VertexId, VertexId), Vec<usize>> = HashMap::new();
    for t in 0..horizon {
        at.clear();
        for (a, p) in paths.iter().enumerate() {
            at.entry(position(p, t)).or_default().push(a);
        }
        for group in at.values() {
            for (x, &a) in group.iter().enumerate() {
                for &b in &group[x + 1..] {
                    m.bump(a, b);
                }
            }
        }
        if t + 1 < horizon {
            moves.clear();
            for (a, p) in paths.iter().enumerate() {
                let (u, w) = (position(p, t), position(p, t + 1));
                if u != w {
                    moves.entry((u, w)).or_default().push(a);
                }
            }
            for (&(u, w), group) in &moves {
                if u < w {
                    if let Some(back) = moves.get(&(w, u)) {
                        for &a in group {
                            for &b in back {
                                m.bump(a, b);
                            }
                        }
                    }
                }
            }
        }
    }
    m
}

/// Conflict matrix over the canonical shortest paths of `agents` to their
/// assigned targets.
pub fn potential_conflict_matrix(
    inst: &TapfInstance,
    assignment: &Assignment,
    agents: &[AgentId],
) -> ConflictMatrix {
    let paths: Vec<Vec<VertexId>> = agents
        .iter()
        .map(|&i| {
            inst.dist_table(assignment.target(i))
                .canonical_path(inst.map(), inst.start(i))
                .expect("assigned targets are reachable")
        })
        .collect();
    conflict_counts(&paths)
}

/// `D[a][b] = M[a][b] * (delay[agents[a]] + delay[agents[b]])`.
pub fn discrepancy_matrix(
    m: &ConflictMatrix,
    delays: &[u64],
    agents: &[AgentId],
) -> SparseSymmetric {
    assert_eq!(m.dim(), agents.len(), "matrix and agent subset disagree");
    let s = m.dim();
    let entries = (0..s).flat_map(|a| {
        (a + 1..s).filter_map(move |b| {
            let c = m.get(a, b);
            let w = delays[agents[a]] + delays[agents[b]];
            (c > 0 && w > 0).then(|| (a, b, f64::from(c) * w as f64))
        })
    });
    SparseSymmetric::from_entries(s, entries)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbsMode {
    /// One agent per eigenvector: the largest component of each of the top
    /// `k` modes.
    GroupPerMode,
    /// The `k` largest components of the dominant eigenvector.
    TopKFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SbsParams {
    pub k: usize,
    pub mode: SbsMode,
    pub subsample: usize,
    pub dbs_pool: usize,
    /// Lanczos basis size; `None` uses [`default_lanczos_cap`].
    pub lanczos_cap: Option<usize>,
}

impl SbsParams {
    pub fn new(k: usize, mode: SbsMode) -> Self {
        Self {
            k,
            mode,
            subsample: DEFAULT_SBS_SUBSAMPLE,
            dbs_pool: DEFAULT_DBS_POOL,
            lanczos_cap: None,
        }
    }
}

/// Agents whose starts lie closest (Manhattan) to the previous
/// bottlenecks' starts fill half of the subsample, uniform draws fill the
/// rest. Returned ascending by id.
pub fn sbs_subsample<R: Rng + ?Sized>(
    inst: &TapfInstance,
    size: usize,
    prev_bottlenecks: &[AgentId],
    rng: &mut R,
) -> Vec<AgentId> {
    let n = inst.num_agents();
    if n <= size {
        return (0..n).collect();
    }
    let map = inst.map();
    let mut chosen = Vec::with_capacity(size);
    let mut taken = vec![false; n];
    if !prev_bottlenecks.is_empty() {
        let mut near: Vec<(usize, AgentId)> = (0..n)
            .map(|i| {
                let d = prev_bottlenecks
                    .iter()
                    .map(|&b| map.manhattan(inst.start(i), inst.start(b)))
                    .min()
                    .unwrap();
                (d, i)
            })
            .collect();
        near.sort_unstable();
        for &(_, i) in near.iter().take(size / 2) {
            chosen.push(i);
            taken[i] = true;
        }
    }
    let rest: Vec<AgentId> = (0..n).filter(|&i| !taken[i]).collect();
    for p in index::sample(rng, rest.len(), size - chosen.len()) {
        chosen.push(rest[p]);
    }
    chosen.sort_unstable();
    chosen
}

/// Picks `k` agents from the spectrum of `d`, whose rows correspond to
/// `agents`. Returns `None` when `d` is zero or the eigensolver fails, so
/// the caller can fall back.
pub fn select_from_spectrum(
    d: &SparseSymmetric,
    agents: &[AgentId],
    k: usize,
    mode: SbsMode,
    lanczos_cap: Option<usize>,
) -> Option<Vec<AgentId>> {
    if d.is_zero() || k == 0 || k > agents.len() {
        return None;
    }
    let dim = d.dim();
    let modes = match mode {
        SbsMode::TopKFirst => 1,
        SbsMode::GroupPerMode => k,
    };
    let cap = lanczos_cap.unwrap_or_else(|| default_lanczos_cap(modes, dim));
    let by_magnitude = |v: &[f64]| {
        let mut order: Vec<usize> = (0..v.len()).collect();
        order.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
        order
    };
    match mode {
        SbsMode::TopKFirst => {
            let spec = top_eigenpairs(d, modes, cap).ok()?;
            Some(
                by_magnitude(&spec.vectors[0])
                    .into_iter()
                    .take(k)
                    .map(|p| agents[p])
                    .collect(),
            )
        }
        SbsMode::GroupPerMode => {
            let spec = top_eigenpairs(d, modes, cap).ok()?;
            let mut picked = vec![false; dim];
            let mut out = Vec::with_capacity(k);
            for v in &spec.vectors {
                let p = by_magnitude(v).into_iter().find(|&p| !picked[p])?;
                picked[p] = true;
                out.push(agents[p]);
            }
            Some(out)
        }
    }
}

/// Spectral bottleneck sampling. Falls back to [`dbs_select`] when the
/// discrepancy matrix carries no signal.
pub fn sbs_select<R: Rng + ?Sized>(
    inst: &TapfInstance,
    assignment: &Assignment,
    delays: &[u64],
    params: &SbsParams,
    prev_bottlenecks: &[AgentId],
    rng: &mut R,
) -> Result<Vec<AgentId>, FeedbackError> {
    let n = inst.num_agents();
    let s = params.subsample.min(n);
    if params.k == 0 || params.k > s {
        return Err(FeedbackError::InvalidK {
            k: params.k,
            pool: s,
            n,
        });
    }
    let agents = sbs_subsample(inst, s, prev_bottlenecks, rng);
    let m = potential_conflict_matrix(inst, assignment, &agents);
    let d = discrepancy_matrix(&m, delays, &agents);
    if let Some(picks) =
        select_from_spectrum(&d, &agents, params.k, params.mode, params.lanczos_cap)
    {
        return Ok(picks);
    }
    dbs_select(delays, params.dbs_pool.clamp(params.k, n), params.k, rng)
}
