//! Target reassignment around bottleneck agents.

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::grid::VertexId;
use crate::instance::{AgentId, TapfInstance};
use crate::matching::{hungarian, Assignment, CostMatrix};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReassignError {
    #[error("no displacement chain frees an alternative target for agent {0}")]
    NoChain(AgentId),
    #[error("subgroup is empty")]
    EmptySubgroup,
    #[error("agent {0} appears twice in the subgroup")]
    DuplicateAgent(AgentId),
}

/// Moves `bottleneck` to another feasible target, displacing holders
/// recursively in the style of priority inheritance.
///
/// Alternatives are tried nearest first (lower vertex id on ties). A free
/// target is claimed outright; an occupied one is claimed by asking its
/// holder to move elsewhere. Every agent is asked at most once per call, and
/// a target contested by an agent up the chain is off limits to those
/// below, so the chain never cycles and its length is at most `n`.
pub fn pibt_displacement(
    inst: &TapfInstance,
    assignment: &Assignment,
    bottleneck: AgentId,
) -> Result<Assignment, ReassignError> {
    let mut work = assignment.clone();
    let mut visited = vec![false; inst.num_agents()];
    let mut taken = vec![false; inst.map().num_vertices()];
    if displace(inst, &mut work, bottleneck, &mut visited, &mut taken) {
        Ok(work)
    } else {
        Err(ReassignError::NoChain(bottleneck))
    }
}

fn displace(
    inst: &TapfInstance,
    work: &mut Assignment,
    a: AgentId,
    visited: &mut [bool],
    taken: &mut [bool],
) -> bool {
    visited[a] = true;
    let current = work.target(a);
    let mut candidates: Vec<(u32, VertexId)> = inst
        .targets(a)
        .iter()
        .zip(inst.target_distances(a))
        .filter(|&(&v, _)| v != current)
        .map(|(&v, &d)| (d, v))
        .collect();
    candidates.sort_unstable();

    for (_, g) in candidates {
        if taken[g] {
            continue;
        }
        match work.agent_at(g) {
            None => {
                work.move_to_free(a, g);
                return true;
            }
            Some(b) if visited[b] => continue,
            Some(b) => {
                taken[g] = true;
                let moved = displace(inst, work, b, visited, taken);
                taken[g] = false;
                if moved {
                    work.move_to_free(a, g);
                    return true;
                }
            }
        }
    }
    false
}

/// Re-solves the subgroup's targets optimally over their current targets
/// plus every unassigned target feasible for some member. Agents outside
/// the subgroup keep their targets. Among equal-cost optima the one found
/// first over the pool in vertex-id order wins.
pub fn local_hungarian(
    inst: &TapfInstance,
    assignment: &Assignment,
    subgroup: &[AgentId],
) -> Result<Assignment, ReassignError> {
    let pool = candidate_pool(inst, assignment, subgroup)?;
    Ok(solve_subgroup(inst, assignment, subgroup, &pool))
}

/// [`local_hungarian`] with the pool order shuffled, which picks among
/// equal-cost optimal matchings at random. Grid distances tie often, and
/// a fixed tie-break tends to hand back the current matching.
pub fn local_hungarian_shuffled<R: Rng + ?Sized>(
    inst: &TapfInstance,
    assignment: &Assignment,
    subgroup: &[AgentId],
    rng: &mut R,
) -> Result<Assignment, ReassignError> {
    let mut pool = candidate_pool(inst, assignment, subgroup)?;
    pool.shuffle(rng);
    Ok(solve_subgroup(inst, assignment, subgroup, &pool))
}

fn candidate_pool(
    inst: &TapfInstance,
    assignment: &Assignment,
    subgroup: &[AgentId],
) -> Result<Vec<VertexId>, ReassignError> {
    if subgroup.is_empty() {
        return Err(ReassignError::EmptySubgroup);
    }
    let mut seen = vec![false; inst.num_agents()];
    for &a in subgroup {
        if std::mem::replace(&mut seen[a], true) {
            return Err(ReassignError::DuplicateAgent(a));
        }
    }
    let mut pool: Vec<VertexId> = subgroup.iter().map(|&a| assignment.target(a)).collect();
    for &a in subgroup {
        pool.extend(
            inst.targets(a)
                .iter()
                .filter(|&&v| assignment.agent_at(v).is_none()),
        );
    }
    pool.sort_unstable();
    pool.dedup();
    Ok(pool)
}

fn solve_subgroup(
    inst: &TapfInstance,
    assignment: &Assignment,
    subgroup: &[AgentId],
    pool: &[VertexId],
) -> Assignment {
    let cost = CostMatrix::for_agents(inst, subgroup, pool);
    let matching =
        hungarian(&cost).expect("the current targets always form a complete feasible matching");
    let targets: Vec<VertexId> = matching.row_to_col.iter().map(|&c| pool[c]).collect();
    let mut out = assignment.clone();
    out.reassign_group(subgroup, &targets);
    out
}
