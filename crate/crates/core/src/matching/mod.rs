//! Agent-to-target assignments: the matching type itself, a Hungarian
//! solver for small cost matrices and the greedy initial assignment.

pub mod bipartite;

use thiserror::Error;

use crate::grid::VertexId;
use crate::instance::{AgentId, TapfInstance};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchingError {
    #[error("cost matrix has {rows} rows but only {cols} columns")]
    TooManyRows { rows: usize, cols: usize },
    #[error("every complete matching uses a forbidden entry")]
    NoFeasibleMatching,
    #[error("instance admits no feasible assignment")]
    InfeasibleInstance,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssignmentError {
    #[error("expected {expected} targets, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("agents {0} and {1} share target {2}")]
    NotInjective(AgentId, AgentId, VertexId),
    #[error("target {1} is not feasible for agent {0}")]
    Infeasible(AgentId, VertexId),
}

/// Injective agent -> target map with its inverse.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    target_of: Vec<VertexId>,
    agent_at: Vec<Option<AgentId>>,
}

impl Assignment {
    pub fn new(inst: &TapfInstance, target_of: Vec<VertexId>) -> Result<Self, AssignmentError> {
        if target_of.len() != inst.num_agents() {
            return Err(AssignmentError::WrongLength {
                expected: inst.num_agents(),
                got: target_of.len(),
            });
        }
        let mut agent_at = vec![None; inst.map().num_vertices()];
        for (i, &v) in target_of.iter().enumerate() {
            if !inst.is_feasible(i, v) {
                return Err(AssignmentError::Infeasible(i, v));
            }
            if let Some(j) = agent_at[v].replace(i) {
                return Err(AssignmentError::NotInjective(j, i, v));
            }
        }
        Ok(Self {
            target_of,
            agent_at,
        })
    }

    pub fn target(&self, agent: AgentId) -> VertexId {
        self.target_of[agent]
    }

    pub fn targets(&self) -> &[VertexId] {
        &self.target_of
    }

    pub fn agent_at(&self, v: VertexId) -> Option<AgentId> {
        self.agent_at.get(v).copied().flatten()
    }

    pub fn num_agents(&self) -> usize {
        self.target_of.len()
    }

    /// Moves `agent` onto the currently unassigned vertex `v`.
    pub(crate) fn move_to_free(&mut self, agent: AgentId, v: VertexId) {
        debug_assert!(self.agent_at[v].is_none());
        let old = self.target_of[agent];
        self.agent_at[old] = None;
        self.agent_at[v] = Some(agent);
        self.target_of[agent] = v;
    }

    /// Gives `agents[k]` the target `targets[k]`. The new targets must be
    /// free or held by agents within the group.
    pub(crate) fn reassign_group(&mut self, agents: &[AgentId], targets: &[VertexId]) {
        debug_assert_eq!(agents.len(), targets.len());
        for &a in agents {
            self.agent_at[self.target_of[a]] = None;
        }
        for (&a, &v) in agents.iter().zip(targets) {
            debug_assert!(
                self.agent_at[v].is_none(),
                "target {v} taken outside the group"
            );
            self.agent_at[v] = Some(a);
            self.target_of[a] = v;
        }
    }

    pub(crate) fn swap(&mut self, a: AgentId, b: AgentId) {
        self.target_of.swap(a, b);
        self.agent_at[self.target_of[a]] = Some(a);
        self.agent_at[self.target_of[b]] = Some(b);
    }

    /// Re-checks injectivity, the inverse index and target feasibility.
    pub fn validate(&self, inst: &TapfInstance) -> Result<(), AssignmentError> {
        let rebuilt = Self::new(inst, self.target_of.clone())?;
        assert_eq!(rebuilt.agent_at, self.agent_at, "inverse index out of sync");
        Ok(())
    }

    /// Sum of start-to-target distances.
    pub fn total_distance(&self, inst: &TapfInstance) -> u64 {
        self.target_of
            .iter()
            .enumerate()
            .map(|(i, &v)| u64::from(inst.dist(i, v).expect("assignment is feasible")))
            .sum()
    }
}

/// Dense cost matrix where `None` marks a forbidden pairing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    cost: Vec<Option<u32>>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, cost: Vec<Option<u32>>) -> Self {
        assert_eq!(cost.len(), rows * cols);
        Self { rows, cols, cost }
    }

    pub fn from_rows(rows: &[Vec<Option<u32>>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged cost matrix");
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Distances from each agent's start to each candidate vertex, forbidden
    /// where the vertex is not one of the agent's reachable targets.
    pub fn for_agents(inst: &TapfInstance, agents: &[AgentId], candidates: &[VertexId]) -> Self {
        let cost = agents
            .iter()
            .flat_map(|&i| candidates.iter().map(move |&v| inst.dist(i, v)))
            .collect();
        Self::new(agents.len(), candidates.len(), cost)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Option<u32> {
        self.cost[r * self.cols + c]
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HungarianResult {
    pub row_to_col: Vec<usize>,
    pub total: u64,
}

/// Minimum-cost complete matching of rows to distinct columns.
///
/// Shortest augmenting paths with row/column potentials, O(rows^2 * cols).
/// Rows are inserted in index order and columns scanned in ascending order
/// with strict-improvement updates, so the optimum returned among ties is a
/// fixed function of the input.
pub fn hungarian(cost: &CostMatrix) -> Result<HungarianResult, MatchingError> {
    const INF: i64 = i64::MAX / 4;
    let (n, m) = (cost.rows, cost.cols);
    if n > m {
        return Err(MatchingError::TooManyRows { rows: n, cols: m });
    }
    // 1-based, index 0 is the virtual root column.
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![INF; m + 1];
    let mut used = vec![false; m + 1];

    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = INF);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                if let Some(c) = cost.get(i0 - 1, j - 1) {
                    let reduced = i64::from(c) - u[i0] - v[j];
                    if reduced < minv[j] {
                        minv[j] = reduced;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if delta >= INF {
                return Err(MatchingError::NoFeasibleMatching);
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else if minv[j] < INF {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    let total = row_to_col
        .iter()
        .enumerate()
        .map(|(r, &c)| u64::from(cost.get(r, c).expect("matching avoids forbidden entries")))
        .sum();
    Ok(HungarianResult { row_to_col, total })
}

/// Greedy by ascending `(distance, agent, vertex)`, completed with
/// augmenting paths when the greedy pass strands an agent.
pub fn greedy_assignment(inst: &TapfInstance) -> Result<Assignment, MatchingError> {
    let n = inst.num_agents();
    let mut pairs: Vec<(u32, AgentId, VertexId)> = (0..n)
        .flat_map(|i| {
            inst.targets(i)
                .iter()
                .zip(inst.target_distances(i))
                .map(move |(&v, &d)| (d, i, v))
        })
        .collect();
    pairs.sort_unstable();

    let mut target_of: Vec<Option<VertexId>> = vec![None; n];
    let mut taken = vec![false; inst.map().num_vertices()];
    let mut assigned = 0;
    for (_, i, v) in pairs {
        if target_of[i].is_none() && !taken[v] {
            target_of[i] = Some(v);
            taken[v] = true;
            assigned += 1;
            if assigned == n {
                break;
            }
        }
    }
    if assigned < n {
        let adj: Vec<Vec<VertexId>> = (0..n).map(|i| inst.targets(i).to_vec()).collect();
        let completed = bipartite::augment_matching(&adj, inst.map().num_vertices(), target_of);
        if !completed.is_perfect() {
            return Err(MatchingError::InfeasibleInstance);
        }
        target_of = completed.left;
    }
    let targets = target_of
        .into_iter()
        .map(|t| t.expect("complete"))
        .collect();
    Assignment::new(inst, targets).map_err(|_| MatchingError::InfeasibleInstance)
}

/// Pairwise-swap local search: repeated passes over agent pairs `(i, j)`,
/// `i < j`, swapping whenever both agents can take the other's target and
/// the summed distance strictly drops. `on_swap` sees the new total after
/// every executed swap. Returns the number of swaps.
pub fn improve_by_swaps(
    inst: &TapfInstance,
    assignment: &mut Assignment,
    mut on_swap: impl FnMut(u64),
) -> usize {
    let n = inst.num_agents();
    let mut total = assignment.total_distance(inst);
    let mut swaps = 0;
    let mut partners = Vec::new();
    loop {
        let mut changed = false;
        for i in 0..n {
            // Only holders of i's feasible targets can take part in a swap.
            partners.clear();
            partners.extend(
                inst.targets(i)
                    .iter()
                    .filter_map(|&v| assignment.agent_at(v))
                    .filter(|&j| j > i),
            );
            partners.sort_unstable();
            for &j in &partners {
                let (ti, tj) = (assignment.target(i), assignment.target(j));
                let (Some(i_to_tj), Some(j_to_ti)) = (inst.dist(i, tj), inst.dist(j, ti)) else {
                    continue;
                };
                let before = inst.dist(i, ti).unwrap() + inst.dist(j, tj).unwrap();
                let after = i_to_tj + j_to_ti;
                if after < before {
                    assignment.swap(i, j);
                    total -= u64::from(before - after);
                    swaps += 1;
                    changed = true;
                    on_swap(total);
                }
            }
        }
        if !changed {
            return swaps;
        }
    }
}

/// Greedy nearest-pair assignment followed by pairwise-swap improvement.
pub fn initial_assignment(inst: &TapfInstance) -> Result<Assignment, MatchingError> {
    let mut assignment = greedy_assignment(inst)?;
    improve_by_swaps(inst, &mut assignment, |_| {});
    Ok(assignment)
}

/// Denominator of the normalized cost.
pub fn assignment_lower_bound(inst: &TapfInstance) -> u64 {
    inst.lower_bound()
}
