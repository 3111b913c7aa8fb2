//! LaCAM with PIBT as the configuration generator.
//!
//! The high level is a depth-first search over joint configurations. Each
//! high-level node lazily enumerates constraints of the form "agent `i`
//! moves to `v`", one agent deeper per expansion, and PIBT completes the
//! configuration for the unconstrained agents. Revisited configurations are
//! pushed back onto the stack instead of being duplicated, which makes the
//! search complete in the limit while PIBT keeps the common case fast.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{verify_solution, MapfError, MapfOptions, Path, Solution};
use crate::grid::{GridMap, VertexId};
use crate::instance::TapfInstance;
use crate::matching::Assignment;

const NONE: u32 = u32::MAX;

/// Upper bound on stored configuration entries (nodes times agents), so a
/// hopeless search degrades into a timeout instead of exhausting memory.
const MAX_STORED_ENTRIES: usize = 1 << 25;
/// Same for constraint-tree nodes.
const MAX_LOW_NODES: usize = 1 << 25;

/// Solves MAPF for the goals of `assignment`.
///
/// Initial priorities follow agent index (agent 0 first). Equal-distance
/// moves are ordered at random from `opts.seed`, except that unless
/// `opts.random_ties` is set the canonical next hop (lowest vertex id among
/// the nearest) is tried first, so a lone agent follows the canonical
/// shortest path. The seed also drives the constraint enumeration order.
pub fn solve_mapf(
    inst: &TapfInstance,
    assignment: &Assignment,
    opts: &MapfOptions,
) -> Result<Solution, MapfError> {
    let n = inst.num_agents();
    let frac: Vec<f64> = (0..n).map(|i| (n - i) as f64 / (n + 1) as f64).collect();
    Engine::new(inst, assignment.targets(), opts, frac, opts.random_ties).run()
}

/// Runs [`solve_mapf`] once, then restarts the engine with random priority
/// orders and random tie-breaking until the deadline or `max_restarts`,
/// keeping the cheapest verified solution. Without a deadline the restart
/// count defaults to 16.
pub fn solve_mapf_anytime(
    inst: &TapfInstance,
    assignment: &Assignment,
    opts: &MapfOptions,
    max_restarts: Option<usize>,
) -> Result<Solution, MapfError> {
    let mut best = solve_mapf(inst, assignment, opts)?;
    let limit = match (max_restarts, opts.deadline.instant()) {
        (Some(r), _) => r,
        (None, Some(_)) => usize::MAX,
        (None, None) => 16,
    };
    let n = inst.num_agents();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5eed_a11c_e0de_d00d);
    let mut order: Vec<usize> = (0..n).collect();
    for _ in 0..limit {
        if opts.deadline.expired() || best.flowtime == inst.lower_bound() {
            break;
        }
        order.shuffle(&mut rng);
        let mut frac = vec![0.0; n];
        for (rank, &i) in order.iter().enumerate() {
            frac[i] = (n - rank) as f64 / (n + 1) as f64;
        }
        let restart = MapfOptions {
            seed: rng.next_u64(),
            ..*opts
        };
        let Ok(sol) = Engine::new(inst, assignment.targets(), &restart, frac, true).run() else {
            continue;
        };
        if sol.flowtime < best.flowtime
            && verify_solution(inst, assignment.targets(), &sol).is_empty()
        {
            best = sol;
        }
    }
    Ok(best)
}

/// Constraint-tree node: agent `who` must move to `at`; `depth` counts the
/// constraints on the chain up to the root.
#[derive(Clone, Copy)]
struct LowNode {
    parent: u32,
    who: u32,
    at: u32,
    depth: u32,
}

struct HighNode {
    config: Box<[u32]>,
    parent: Option<usize>,
    /// Integer part of each agent's priority; the fractional part is fixed
    /// per run.
    urgency: Box<[u32]>,
    order: Box<[u32]>,
    tree: VecDeque<u32>,
    depth: usize,
}

struct Engine<'a> {
    map: &'a GridMap,
    n: usize,
    goals: Box<[u32]>,
    goal_dist: Vec<&'a [u32]>,
    frac: Vec<f64>,
    rng: ChaCha8Rng,
    random_ties: bool,
    /// Random tie-breaking for the configuration being generated.
    shuffle_now: bool,
    horizon: usize,
    opts: MapfOptions,
    inst: &'a TapfInstance,

    low: Vec<LowNode>,
    nodes: Vec<HighNode>,
    explored: HashMap<Box<[u32]>, usize>,

    now: Vec<u32>,
    occupied_now: Vec<u32>,
    occupied_next: Vec<u32>,
    next: Vec<u32>,
    touched: Vec<u32>,
    constraints: Vec<(u32, u32)>,
}

impl<'a> Engine<'a> {
    fn new(
        inst: &'a TapfInstance,
        goals: &[VertexId],
        opts: &MapfOptions,
        frac: Vec<f64>,
        random_ties: bool,
    ) -> Self {
        let map = inst.map();
        let n = inst.num_agents();
        assert_eq!(goals.len(), n, "one goal per agent");
        let goal_dist = goals
            .iter()
            .map(|&g| inst.dist_table(g).as_slice())
            .collect();
        Self {
            map,
            n,
            goals: goals.iter().map(|&g| g as u32).collect(),
            goal_dist,
            frac,
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            random_ties,
            shuffle_now: random_ties,
            horizon: opts.horizon.unwrap_or(10 * (map.width() + map.height())),
            opts: *opts,
            inst,
            low: Vec::new(),
            nodes: Vec::new(),
            explored: HashMap::new(),
            now: vec![NONE; n],
            occupied_now: vec![NONE; map.num_vertices()],
            occupied_next: vec![NONE; map.num_vertices()],
            next: vec![NONE; n],
            touched: Vec::new(),
            constraints: Vec::new(),
        }
    }

    fn new_root_low(&mut self) -> u32 {
        self.low.push(LowNode {
            parent: NONE,
            who: NONE,
            at: NONE,
            depth: 0,
        });
        (self.low.len() - 1) as u32
    }

    fn push_node(&mut self, config: Box<[u32]>, parent: Option<usize>) -> usize {
        let urgency: Box<[u32]> = match parent {
            None => config
                .iter()
                .zip(self.goals.iter())
                .map(|(v, g)| u32::from(v != g))
                .collect(),
            Some(p) => config
                .iter()
                .zip(self.goals.iter())
                .zip(self.nodes[p].urgency.iter())
                .map(|((v, g), &u)| if v != g { u + 1 } else { 0 })
                .collect(),
        };
        let mut order: Vec<u32> = (0..self.n as u32).collect();
        order.sort_by(|&a, &b| {
            let pa = urgency[a as usize] as f64 + self.frac[a as usize];
            let pb = urgency[b as usize] as f64 + self.frac[b as usize];
            pb.total_cmp(&pa)
        });
        let root = self.new_root_low();
        let depth = parent.map_or(0, |p| self.nodes[p].depth + 1);
        let id = self.nodes.len();
        self.explored.insert(config.clone(), id);
        self.nodes.push(HighNode {
            config,
            parent,
            urgency,
            order: order.into_boxed_slice(),
            tree: VecDeque::from([root]),
            depth,
        });
        id
    }

    fn run(mut self) -> Result<Solution, MapfError> {
        let starts: Box<[u32]> = self.inst.starts().iter().map(|&s| s as u32).collect();
        let root = self.push_node(starts, None);
        let mut open = vec![root];
        let max_nodes = (MAX_STORED_ENTRIES / self.n.max(1)).max(1);

        while let Some(&top) = open.last() {
            if self.opts.deadline.expired() {
                return Err(MapfError::Timeout);
            }
            if *self.nodes[top].config == *self.goals {
                return Ok(self.extract(top));
            }
            let Some(m) = self.nodes[top].tree.pop_front() else {
                open.pop();
                continue;
            };
            if self.low.len() >= MAX_LOW_NODES {
                return Err(MapfError::Timeout);
            }
            self.expand_low(top, m);
            if !self.generate(top, m) {
                continue;
            }
            let config: Box<[u32]> = self.next.clone().into_boxed_slice();
            if let Some(&seen) = self.explored.get(&config) {
                open.push(seen);
                continue;
            }
            if self.nodes[top].depth + 1 > self.horizon || self.nodes.len() >= max_nodes {
                continue;
            }
            let id = self.push_node(config, Some(top));
            open.push(id);
        }
        Err(MapfError::Timeout)
    }

    /// Adds the children of constraint `m`: the next agent in priority order
    /// fixed to each of its possible moves.
    fn expand_low(&mut self, node: usize, m: u32) {
        let lm = self.low[m as usize];
        if lm.depth as usize >= self.n {
            return;
        }
        let who = self.nodes[node].order[lm.depth as usize];
        let v = self.nodes[node].config[who as usize] as usize;
        let mut cands: Vec<u32> = self.map.neighbors(v).iter().map(|&u| u as u32).collect();
        cands.push(v as u32);
        cands.shuffle(&mut self.rng);
        for at in cands {
            self.low.push(LowNode {
                parent: m,
                who,
                at,
                depth: lm.depth + 1,
            });
            let child = (self.low.len() - 1) as u32;
            self.nodes[node].tree.push_back(child);
        }
    }

    /// Builds the successor configuration of `node` under constraint `m`
    /// into `self.next`. Returns false when the constraint is
    /// self-contradictory or PIBT cannot place a top-level agent.
    fn generate(&mut self, node: usize, m: u32) -> bool {
        let n = self.n;
        // The first successor of a node prefers canonical hops; later ones
        // (reached after revisits) are fully randomized so that PIBT does
        // not replay the same local deadlock.
        self.shuffle_now = self.random_ties || self.low[m as usize].depth > 0;
        self.now.copy_from_slice(&self.nodes[node].config);
        for i in 0..n {
            self.occupied_now[self.now[i] as usize] = i as u32;
        }
        self.next.iter_mut().for_each(|x| *x = NONE);

        self.constraints.clear();
        let mut cur = m;
        while self.low[cur as usize].depth > 0 {
            let l = self.low[cur as usize];
            self.constraints.push((l.who, l.at));
            cur = l.parent;
        }

        let mut ok = true;
        for k in (0..self.constraints.len()).rev() {
            let (i, l) = self.constraints[k];
            if self.occupied_next[l as usize] != NONE {
                ok = false;
                break;
            }
            let pre = self.now[i as usize];
            let j = self.occupied_now[l as usize];
            if j != NONE && self.occupied_next[pre as usize] == j {
                ok = false;
                break;
            }
            self.next[i as usize] = l;
            self.reserve(l, i);
        }

        if ok {
            for k in 0..n {
                let i = self.nodes[node].order[k] as usize;
                if self.next[i] == NONE && !self.pibt(i) {
                    ok = false;
                    break;
                }
            }
        }

        for i in 0..n {
            self.occupied_now[self.now[i] as usize] = NONE;
        }
        for &v in &self.touched {
            self.occupied_next[v as usize] = NONE;
        }
        self.touched.clear();
        ok
    }

    /// One PIBT step for agent `i`: try moves in increasing goal distance,
    /// pushing any agent in the way with inherited priority. On failure the
    /// agent stays put.
    fn pibt(&mut self, i: usize) -> bool {
        let v = self.now[i];
        let mut cands = [NONE; 5];
        let nbrs = self.map.neighbors(v as usize);
        for (k, &u) in nbrs.iter().enumerate() {
            cands[k] = u as u32;
        }
        cands[nbrs.len()] = v;
        let cands = &mut cands[..=nbrs.len()];
        let dist = self.goal_dist[i];
        let len = nbrs.len() + 1;
        cands.shuffle(&mut self.rng);
        cands.sort_by_key(|&u| dist[u as usize]);
        if !self.shuffle_now {
            // The canonical next hop (lowest id among the nearest) leads;
            // the remaining order stays random.
            let nearest = cands
                .iter()
                .take_while(|&&u| dist[u as usize] == dist[cands[0] as usize])
                .count();
            let lowest = (0..nearest).min_by_key(|&k| cands[k]).unwrap();
            cands[..=lowest].rotate_right(1);
        }
        let partner = self.swap_partner(i, cands[0]);
        if partner != NONE {
            cands[..len].reverse();
        }

        for (k, &u) in cands[..len].iter().enumerate() {
            if self.occupied_next[u as usize] != NONE {
                continue;
            }
            let j = self.occupied_now[u as usize];
            if j != NONE && self.next[j as usize] == v {
                continue;
            }
            self.reserve(u, i as u32);
            self.next[i] = u;
            if j != NONE && u != v && self.next[j as usize] == NONE && !self.pibt(j as usize) {
                continue;
            }
            if k == 0
                && partner != NONE
                && self.next[partner as usize] == NONE
                && self.occupied_next[v as usize] == NONE
            {
                self.reserve(v, partner);
                self.next[partner as usize] = v;
            }
            return true;
        }
        self.reserve(v, i as u32);
        self.next[i] = v;
        false
    }

    /// Detects a head-on meeting in a corridor that plain PIBT cannot
    /// resolve and returns the agent that `i` should pull behind itself
    /// while backing out. `best` is the preferred move of `i`.
    fn swap_partner(&self, i: usize, best: u32) -> u32 {
        let v = self.now[i];
        if best == v {
            return NONE;
        }
        let j = self.occupied_now[best as usize];
        if j != NONE
            && self.next[j as usize] == NONE
            && self.swap_required(i, j as usize, v, best)
            && self.swap_possible(best, v)
        {
            return j;
        }
        // Clearing: an agent behind `i` needs `i` out of its way.
        for &u in self.map.neighbors(v as usize) {
            let k = self.occupied_now[u];
            if k != NONE
                && best != self.now[k as usize]
                && self.swap_required(k as usize, i, v, best)
                && self.swap_possible(best, v)
            {
                return k;
            }
        }
        NONE
    }

    /// Open neighbors of `at` other than `from` and other than dead ends
    /// holding an agent already home, plus the last such neighbor seen.
    fn corridor_step(&self, from: u32, at: u32) -> (usize, u32) {
        let mut open = 0;
        let mut last = NONE;
        for &u in self.map.neighbors(at as usize) {
            let a = self.occupied_now[u];
            let parked =
                self.map.neighbors(u).len() == 1 && a != NONE && self.goals[a as usize] == u as u32;
            if u as u32 != from && !parked {
                open += 1;
                last = u as u32;
            }
        }
        (open, last)
    }

    fn swap_required(&self, pusher: usize, puller: usize, pusher_at: u32, puller_at: u32) -> bool {
        let dp = self.goal_dist[pusher];
        let dq = self.goal_dist[puller];
        let (mut vp, mut vq) = (pusher_at, puller_at);
        while dp[vq as usize] < dp[vp as usize] {
            match self.corridor_step(vp, vq) {
                (0, _) => break,
                (1, next) => {
                    vp = vq;
                    vq = next;
                }
                _ => return false,
            }
        }
        dq[vp as usize] < dq[vq as usize]
            && (dp[vp as usize] == 0 || dp[vq as usize] < dp[vp as usize])
    }

    fn swap_possible(&self, pusher_at: u32, puller_at: u32) -> bool {
        let (mut vp, mut vq) = (pusher_at, puller_at);
        for _ in 0..self.map.num_vertices() {
            if vq == pusher_at {
                return false;
            }
            match self.corridor_step(vp, vq) {
                (0, _) => return false,
                (1, next) => {
                    vp = vq;
                    vq = next;
                }
                _ => return true,
            }
        }
        false
    }

    #[inline]
    fn reserve(&mut self, v: u32, agent: u32) {
        self.occupied_next[v as usize] = agent;
        self.touched.push(v);
    }

    fn extract(&self, goal_node: usize) -> Solution {
        let mut chain = Vec::new();
        let mut cur = Some(goal_node);
        while let Some(c) = cur {
            chain.push(c);
            cur = self.nodes[c].parent;
        }
        chain.reverse();
        let paths: Vec<Path> = (0..self.n)
            .map(|i| {
                let mut p: Path = chain
                    .iter()
                    .map(|&c| self.nodes[c].config[i] as VertexId)
                    .collect();
                let goal = self.goals[i] as VertexId;
                let keep = p.iter().rposition(|&v| v != goal).map_or(1, |t| t + 2);
                p.truncate(keep);
                p
            })
            .collect();
        Solution::from_paths(self.inst, paths)
    }
}
