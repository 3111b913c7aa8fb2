//! Multi-agent pathfinding for a fixed assignment: path and solution types,
//! flowtime accounting, a solution verifier and the LaCAM/PIBT engine.

mod dump;
mod lacam;

use std::fmt;

use thiserror::Error;

use crate::grid::VertexId;
use crate::instance::{AgentId, TapfInstance};
use crate::matching::Assignment;
use crate::time::Deadline;

pub use dump::{format_solution, parse_solution, DumpError};
pub use lacam::{solve_mapf, solve_mapf_anytime};

/// Vertices visited at timesteps `0..=T`.
pub type Path = Vec<VertexId>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapfError {
    /// No solution before the deadline, the horizon cap or exhaustion of the
    /// search space. The engine does not tell these apart.
    #[error("no solution found within the budget")]
    Timeout,
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("path ends at {end:?}, not at goal {goal}")]
pub struct GoalMismatch {
    pub end: Option<VertexId>,
    pub goal: VertexId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MapfOptions {
    pub deadline: Deadline,
    pub seed: u64,
    /// Maximum number of timesteps; `None` means `10 * (width + height)`.
    pub horizon: Option<usize>,
    /// Break ties between equally good moves at random (from `seed`)
    /// instead of by vertex id.
    pub random_ties: bool,
}

impl MapfOptions {
    pub fn new(seed: u64) -> Self {
        Self {
            deadline: Deadline::none(),
            seed,
            horizon: None,
            random_ties: false,
        }
    }

    pub fn with_deadline(mut self, deadline: Deadline) -> Self {
        self.deadline = deadline;
        self
    }

    pub fn with_random_ties(mut self, on: bool) -> Self {
        self.random_ties = on;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub paths: Vec<Path>,
    pub flowtime: u64,
    pub normalized_cost: f64,
}

impl Solution {
    /// Wraps paths, charging each its effective cost against its own final
    /// vertex.
    pub fn from_paths(inst: &TapfInstance, paths: Vec<Path>) -> Self {
        let flowtime = paths
            .iter()
            .map(|p| {
                p.last()
                    .map_or(0, |&g| effective_cost(p, g).unwrap() as u64)
            })
            .sum();
        Self {
            paths,
            flowtime,
            normalized_cost: normalized_cost(flowtime, inst.lower_bound()),
        }
    }

    /// Length of the longest path in timesteps.
    pub fn makespan(&self) -> usize {
        self.paths
            .iter()
            .map(|p| p.len().saturating_sub(1))
            .max()
            .unwrap_or(0)
    }
}

pub fn normalized_cost(flowtime: u64, lower_bound: u64) -> f64 {
    if lower_bound == 0 {
        1.0
    } else {
        flowtime as f64 / lower_bound as f64
    }
}

/// Smallest `t` such that the path stays on `goal` from `t` onward.
pub fn effective_cost(path: &[VertexId], goal: VertexId) -> Result<usize, GoalMismatch> {
    match path.last() {
        Some(&g) if g == goal => {}
        end => {
            return Err(GoalMismatch {
                end: end.copied(),
                goal,
            })
        }
    }
    Ok(path.iter().rposition(|&v| v != goal).map_or(0, |t| t + 1))
}

/// Vertex at timestep `t`, holding the final vertex after the path ends.
#[inline]
pub fn position(path: &[VertexId], t: usize) -> VertexId {
    path[t.min(path.len() - 1)]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    PathCount {
        expected: usize,
        got: usize,
    },
    EmptyPath {
        agent: AgentId,
    },
    WrongStart {
        agent: AgentId,
        expected: VertexId,
        got: VertexId,
    },
    WrongGoal {
        agent: AgentId,
        expected: VertexId,
        got: VertexId,
    },
    InvalidMove {
        agent: AgentId,
        t: usize,
        from: VertexId,
        to: VertexId,
    },
    VertexConflict {
        agents: (AgentId, AgentId),
        t: usize,
        v: VertexId,
    },
    /// Opposite traversals of the edge during the step from `t` to `t + 1`.
    EdgeConflict {
        agents: (AgentId, AgentId),
        t: usize,
        from: VertexId,
        to: VertexId,
    },
    InfeasibleTarget {
        agent: AgentId,
        v: VertexId,
    },
    SharedTarget {
        agents: (AgentId, AgentId),
        v: VertexId,
    },
    FlowtimeMismatch {
        reported: u64,
        actual: u64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::PathCount { expected, got } => {
                write!(f, "PathCount expected={expected} got={got}")
            }
            Violation::EmptyPath { agent } => write!(f, "EmptyPath agent={agent}"),
            Violation::WrongStart {
                agent,
                expected,
                got,
            } => {
                write!(f, "WrongStart agent={agent} expected={expected} got={got}")
            }
            Violation::WrongGoal {
                agent,
                expected,
                got,
            } => {
                write!(f, "WrongGoal agent={agent} expected={expected} got={got}")
            }
            Violation::InvalidMove { agent, t, from, to } => {
                write!(f, "InvalidMove agent={agent} t={t} from={from} to={to}")
            }
            Violation::VertexConflict {
                agents: (a, b),
                t,
                v,
            } => {
                write!(f, "VertexConflict agents=({a},{b}) t={t} v={v}")
            }
            Violation::EdgeConflict {
                agents: (a, b),
                t,
                from,
                to,
            } => {
                write!(f, "EdgeConflict agents=({a},{b}) t={t} from={from} to={to}")
            }
            Violation::InfeasibleTarget { agent, v } => {
                write!(f, "InfeasibleTarget agent={agent} v={v}")
            }
            Violation::SharedTarget { agents: (a, b), v } => {
                write!(f, "SharedTarget agents=({a},{b}) v={v}")
            }
            Violation::FlowtimeMismatch { reported, actual } => {
                write!(f, "FlowtimeMismatch reported={reported} actual={actual}")
            }
        }
    }
}

/// Checks every solution invariant and reports all violations found.
/// An empty list means the solution is valid for this assignment.
pub fn verify_solution(
    inst: &TapfInstance,
    goals: &[VertexId],
    solution: &Solution,
) -> Vec<Violation> {
    let map = inst.map();
    let n = inst.num_agents();
    let mut out = Vec::new();

    if goals.len() != n {
        out.push(Violation::PathCount {
            expected: n,
            got: goals.len(),
        });
        return out;
    }
    let mut holder = vec![None; map.num_vertices()];
    for (i, &g) in goals.iter().enumerate() {
        if !inst.is_feasible(i, g) {
            out.push(Violation::InfeasibleTarget { agent: i, v: g });
        }
        if let Some(slot) = holder.get_mut(g) {
            if let Some(j) = slot.replace(i) {
                out.push(Violation::SharedTarget {
                    agents: (j, i),
                    v: g,
                });
            }
        }
    }

    let paths = &solution.paths;
    if paths.len() != n {
        out.push(Violation::PathCount {
            expected: n,
            got: paths.len(),
        });
        return out;
    }
    let mut structurally_ok = true;
    for (i, p) in paths.iter().enumerate() {
        let (Some(&first), Some(&last)) = (p.first(), p.last()) else {
            out.push(Violation::EmptyPath { agent: i });
            structurally_ok = false;
            continue;
        };
        if first != inst.start(i) {
            out.push(Violation::WrongStart {
                agent: i,
                expected: inst.start(i),
                got: first,
            });
        }
        if last != goals[i] {
            out.push(Violation::WrongGoal {
                agent: i,
                expected: goals[i],
                got: last,
            });
        }
        if let Some(&bad) = p.iter().find(|&&v| !map.contains(v)) {
            out.push(Violation::InvalidMove {
                agent: i,
                t: 0,
                from: bad,
                to: bad,
            });
            structurally_ok = false;
            continue;
        }
        for (t, w) in p.windows(2).enumerate() {
            if w[0] != w[1] && map.neighbors(w[0]).binary_search(&w[1]).is_err() {
                out.push(Violation::InvalidMove {
                    agent: i,
                    t,
                    from: w[0],
                    to: w[1],
                });
            }
        }
    }
    if !structurally_ok {
        return out;
    }

    let horizon = paths.iter().map(Vec::len).max().unwrap_or(0);
    let mut occ: Vec<Option<AgentId>> = vec![None; map.num_vertices()];
    let mut prev: Vec<Option<AgentId>> = vec![None; map.num_vertices()];
    for t in 0..horizon {
        for (i, p) in paths.iter().enumerate() {
            let v = position(p, t);
            if let Some(j) = occ[v] {
                out.push(Violation::VertexConflict {
                    agents: (j, i),
                    t,
                    v,
                });
            } else {
                occ[v] = Some(i);
            }
        }
        if t > 0 {
            for (i, p) in paths.iter().enumerate() {
                let (from, to) = (position(p, t - 1), position(p, t));
                if from == to {
                    continue;
                }
                if let Some(j) = prev[to] {
                    if j > i && position(&paths[j], t) == from {
                        out.push(Violation::EdgeConflict {
                            agents: (i, j),
                            t: t - 1,
                            from,
                            to,
                        });
                    }
                }
            }
            for p in paths {
                prev[position(p, t - 1)] = None;
            }
        }
        std::mem::swap(&mut occ, &mut prev);
    }

    let actual = Solution::from_paths(inst, paths.clone()).flowtime;
    if actual != solution.flowtime {
        out.push(Violation::FlowtimeMismatch {
            reported: solution.flowtime,
            actual,
        });
    }
    out
}

/// [`verify_solution`] against the targets of an [`Assignment`].
pub fn verify_assignment_solution(
    inst: &TapfInstance,
    assignment: &Assignment,
    solution: &Solution,
) -> Vec<Violation> {
    verify_solution(inst, assignment.targets(), solution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::synth;
    use std::sync::Arc;

    #[test]
    fn effective_cost_examples() {
        assert_eq!(effective_cost(&[7], 7), Ok(0));
        assert_eq!(effective_cost(&[1, 7, 7, 7], 7), Ok(1));
        assert_eq!(effective_cost(&[7, 1, 7, 1, 7], 7), Ok(4));
        assert_eq!(effective_cost(&[1, 7, 1, 7], 7), Ok(3));
        assert_eq!(
            effective_cost(&[1, 2], 7),
            Err(GoalMismatch {
                end: Some(2),
                goal: 7
            })
        );
        assert_eq!(
            effective_cost(&[], 7),
            Err(GoalMismatch { end: None, goal: 7 })
        );
    }

    fn line(n: usize) -> Arc<crate::grid::GridMap> {
        Arc::new(synth::empty(n, 1))
    }

    #[test]
    fn valid_single_agent() {
        let inst = TapfInstance::new(line(4), vec![0], vec![vec![3]]).unwrap();
        let sol = Solution::from_paths(&inst, vec![vec![0, 1, 2, 3]]);
        assert_eq!(sol.flowtime, 3);
        assert_eq!(sol.normalized_cost, 1.0);
        assert!(verify_solution(&inst, &[3], &sol).is_empty());
    }

    #[test]
    fn detects_edge_conflict() {
        let inst = TapfInstance::new(line(5), vec![0, 4], vec![vec![4], vec![0]]).unwrap();
        // Agent 0 is on 1 and agent 1 on 2 at t=2; they trade places.
        let sol = Solution::from_paths(&inst, vec![vec![0, 0, 1, 2, 3, 4], vec![4, 3, 2, 1, 0, 0]]);
        let v = verify_solution(&inst, &[4, 0], &sol);
        assert!(
            v.contains(&Violation::EdgeConflict {
                agents: (0, 1),
                t: 2,
                from: 1,
                to: 2
            }),
            "{v:?}"
        );
        assert_eq!(
            v.iter()
                .filter(|x| matches!(x, Violation::EdgeConflict { .. }))
                .count(),
            1
        );
    }

    #[test]
    fn detects_wrong_goal_and_vertex_conflict() {
        let inst = TapfInstance::new(line(4), vec![0, 3], vec![vec![1, 2], vec![1, 2]]).unwrap();
        let sol = Solution::from_paths(&inst, vec![vec![0, 1], vec![3, 2, 1]]);
        let v = verify_solution(&inst, &[1, 2], &sol);
        assert!(v.contains(&Violation::WrongGoal {
            agent: 1,
            expected: 2,
            got: 1
        }));
        assert!(v.contains(&Violation::VertexConflict {
            agents: (0, 1),
            t: 2,
            v: 1
        }));
        assert_eq!(v[0].to_string(), "WrongGoal agent=1 expected=2 got=1");
    }

    #[test]
    fn detects_structural_problems() {
        let inst = TapfInstance::new(line(4), vec![0, 3], vec![vec![1, 2], vec![1, 2]]).unwrap();
        let sol = Solution::from_paths(&inst, vec![vec![0, 2], vec![3, 2]]);
        let v = verify_solution(&inst, &[2, 2], &sol);
        assert!(v.contains(&Violation::SharedTarget {
            agents: (0, 1),
            v: 2
        }));
        assert!(v.contains(&Violation::InvalidMove {
            agent: 0,
            t: 0,
            from: 0,
            to: 2
        }));

        let mut sol = Solution::from_paths(&inst, vec![vec![0, 1], vec![3, 2]]);
        assert!(verify_solution(&inst, &[1, 2], &sol).is_empty());
        sol.flowtime = 7;
        assert_eq!(
            verify_solution(&inst, &[1, 2], &sol),
            vec![Violation::FlowtimeMismatch {
                reported: 7,
                actual: 2
            }]
        );
        sol.paths.pop();
        assert!(matches!(
            verify_solution(&inst, &[1, 2], &sol)[0],
            Violation::PathCount { .. }
        ));
    }
}
