#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tapf_core::grid::{GridMap, VertexId};
use tapf_core::instance::TapfInstance;
use tapf_core::matching::Assignment;

/// Optimal flowtime by uniform-cost search over joint states.
///
/// A state is the joint position plus the set of agents that have
/// committed to resting on their goal for good. Each step costs the number
/// of uncommitted agents, so an agent pays exactly its effective cost.
/// Returns `None` when no collision-free plan exists.
pub fn optimal_flowtime(map: &GridMap, starts: &[VertexId], goals: &[VertexId]) -> Option<u64> {
    let n = starts.len();
    assert!(n <= 8);
    let full = (1u32 << n) - 1;
    type State = (Vec<VertexId>, u32);
    let mut best: HashMap<State, u64> = HashMap::new();
    let mut heap = BinaryHeap::new();
    let start: State = (starts.to_vec(), 0);
    best.insert(start.clone(), 0);
    heap.push(Reverse((0u64, start)));

    while let Some(Reverse((cost, (pos, mask)))) = heap.pop() {
        if best.get(&(pos.clone(), mask)).is_some_and(|&c| c < cost) {
            continue;
        }
        if mask == full {
            return Some(cost);
        }
        let mut push = |state: State, c: u64, heap: &mut BinaryHeap<Reverse<(u64, State)>>| {
            if best.get(&state).is_none_or(|&old| c < old) {
                best.insert(state.clone(), c);
                heap.push(Reverse((c, state)));
            }
        };
        for i in 0..n {
            if mask & (1 << i) == 0 && pos[i] == goals[i] {
                push((pos.clone(), mask | (1 << i)), cost, &mut heap);
            }
        }
        let step = u64::from(n as u32 - mask.count_ones());
        if step == 0 {
            continue;
        }
        let options: Vec<Vec<VertexId>> = (0..n)
            .map(|i| {
                if mask & (1 << i) != 0 {
                    vec![pos[i]]
                } else {
                    let mut o = map.neighbors(pos[i]).to_vec();
                    o.push(pos[i]);
                    o
                }
            })
            .collect();
        let mut choice = vec![0usize; n];
        'outer: loop {
            let next: Vec<VertexId> = (0..n).map(|i| options[i][choice[i]]).collect();
            let valid = (0..n).all(|a| {
                (a + 1..n).all(|b| next[a] != next[b] && !(next[a] == pos[b] && next[b] == pos[a]))
            });
            if valid {
                push((next, mask), cost + step, &mut heap);
            }
            for i in 0..n {
                choice[i] += 1;
                if choice[i] < options[i].len() {
                    continue 'outer;
                }
                choice[i] = 0;
            }
            break;
        }
    }
    None
}

/// Random instance on a small map with one goal per agent. Starts and goals
/// are distinct and every goal is reachable from its start.
pub struct SmallCase {
    pub inst: TapfInstance,
    pub assignment: Assignment,
}

pub fn random_small_case(rng: &mut ChaCha8Rng, max_side: usize, max_agents: usize) -> SmallCase {
    loop {
        let w = rng.random_range(2..=max_side);
        let h = rng.random_range(1..=max_side);
        let passable: Vec<bool> = (0..w * h).map(|_| !rng.random_bool(0.2)).collect();
        let map = Arc::new(GridMap::from_passable(w, h, passable));
        let comp = map.largest_component();
        let n = rng.random_range(1..=max_agents);
        if comp.len() < n + 1 {
            continue;
        }
        let starts: Vec<VertexId> = index::sample(rng, comp.len(), n)
            .into_iter()
            .map(|k| comp[k])
            .collect();
        let goals: Vec<VertexId> = index::sample(rng, comp.len(), n)
            .into_iter()
            .map(|k| comp[k])
            .collect();
        let targets = goals.iter().map(|&g| vec![g]).collect();
        let inst = TapfInstance::new(map, starts, targets).expect("valid by construction");
        let assignment = Assignment::new(&inst, goals).unwrap();
        return SmallCase { inst, assignment };
    }
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn map_from_rows(rows: &[&str]) -> Arc<GridMap> {
    let text = format!(
        "type octile\nheight {}\nwidth {}\nmap\n{}\n",
        rows.len(),
        rows[0].len(),
        rows.join("\n")
    );
    Arc::new(GridMap::parse(&text).unwrap())
}
