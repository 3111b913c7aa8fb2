//! TAPF instances: starts plus per-agent feasible target sets, scenario
//! generation and the plain-text scenario format.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::grid::{DistanceCache, DistanceTable, GridMap, VertexId, UNREACHABLE};
use crate::matching::bipartite::hopcroft_karp;

pub type AgentId = usize;

/// Regeneration attempts for agents left unmatched by a feasibility check.
pub const FEASIBILITY_RETRIES: usize = 100;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("agent {0} starts on an invalid vertex")]
    InvalidStart(AgentId),
    #[error("agents {0} and {1} share a start vertex")]
    DuplicateStart(AgentId, AgentId),
    #[error("agent {0} lists invalid target vertex {1}")]
    InvalidTarget(AgentId, VertexId),
    #[error("agent {0} has no reachable target")]
    NoFeasibleTargets(AgentId),
    #[error("no injective assignment of agents to feasible targets exists")]
    Infeasible,
    #[error("not enough vertices: need {needed}, found {available}")]
    InsufficientVertices { needed: usize, available: usize },
    #[error("no region of the map can hold a hotspot of {0} vertices")]
    NoSuitableRegion(usize),
    #[error("instance still infeasible after {0} regeneration attempts")]
    InfeasibleAfterRetries(usize),
    #[error("invalid scenario configuration: {0}")]
    InvalidConfig(String),
}

/// A TAPF problem: a map, one start per agent and each agent's sorted list
/// of admissible targets.
pub struct TapfInstance {
    map: Arc<GridMap>,
    cache: DistanceCache,
    starts: Vec<VertexId>,
    targets: Vec<Vec<VertexId>>,
    target_dist: Vec<Vec<u32>>,
    lower_bound: u64,
}

impl std::fmt::Debug for TapfInstance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TapfInstance")
            .field("map", &self.map)
            .field("agents", &self.starts.len())
            .finish()
    }
}

impl PartialEq for TapfInstance {
    fn eq(&self, other: &Self) -> bool {
        *self.map == *other.map && self.starts == other.starts && self.targets == other.targets
    }
}

impl TapfInstance {
    /// Builds and validates an instance, including the existence of a
    /// feasible assignment.
    pub fn new(
        map: Arc<GridMap>,
        starts: Vec<VertexId>,
        targets: Vec<Vec<VertexId>>,
    ) -> Result<Self, InstanceError> {
        let inst = Self::new_unchecked(map, starts, targets)?;
        if !check_feasibility(&inst) {
            return Err(InstanceError::Infeasible);
        }
        Ok(inst)
    }

    /// Structural validation only: distinct valid starts, valid targets.
    /// Targets unreachable from the agent's start are dropped, and an agent
    /// left with no target is an error.
    pub fn new_unchecked(
        map: Arc<GridMap>,
        starts: Vec<VertexId>,
        mut targets: Vec<Vec<VertexId>>,
    ) -> Result<Self, InstanceError> {
        assert_eq!(starts.len(), targets.len(), "one target list per agent");
        let mut seen = std::collections::HashMap::new();
        for (i, &s) in starts.iter().enumerate() {
            if !map.contains(s) {
                return Err(InstanceError::InvalidStart(i));
            }
            if let Some(j) = seen.insert(s, i) {
                return Err(InstanceError::DuplicateStart(j, i));
            }
        }
        let mut target_dist = Vec::with_capacity(starts.len());
        for (i, list) in targets.iter_mut().enumerate() {
            if let Some(&bad) = list.iter().find(|&&v| !map.contains(v)) {
                return Err(InstanceError::InvalidTarget(i, bad));
            }
            list.sort_unstable();
            list.dedup();
            let from_start = map.bfs_distance(starts[i]).expect("start validated");
            list.retain(|&v| from_start.raw(v) != UNREACHABLE);
            if list.is_empty() {
                return Err(InstanceError::NoFeasibleTargets(i));
            }
            target_dist.push(list.iter().map(|&v| from_start.raw(v)).collect::<Vec<_>>());
        }
        let lower_bound = target_dist
            .iter()
            .map(|d| u64::from(*d.iter().min().expect("non-empty")))
            .sum();
        Ok(Self {
            cache: DistanceCache::new(&map),
            map,
            starts,
            targets,
            target_dist,
            lower_bound,
        })
    }

    pub fn map(&self) -> &GridMap {
        &self.map
    }

    pub fn shared_map(&self) -> Arc<GridMap> {
        Arc::clone(&self.map)
    }

    pub fn num_agents(&self) -> usize {
        self.starts.len()
    }

    pub fn starts(&self) -> &[VertexId] {
        &self.starts
    }

    pub fn start(&self, agent: AgentId) -> VertexId {
        self.starts[agent]
    }

    /// Feasible targets of `agent`, ascending by vertex id.
    pub fn targets(&self, agent: AgentId) -> &[VertexId] {
        &self.targets[agent]
    }

    /// `dist(start, target)` aligned with [`TapfInstance::targets`].
    pub fn target_distances(&self, agent: AgentId) -> &[u32] {
        &self.target_dist[agent]
    }

    pub fn is_feasible(&self, agent: AgentId, v: VertexId) -> bool {
        self.targets[agent].binary_search(&v).is_ok()
    }

    /// Distance from the agent's start to `v` if `v` is one of its targets.
    pub fn dist(&self, agent: AgentId, v: VertexId) -> Option<u32> {
        self.targets[agent]
            .binary_search(&v)
            .ok()
            .map(|k| self.target_dist[agent][k])
    }

    /// Cached BFS table rooted at `v`.
    pub fn dist_table(&self, v: VertexId) -> &DistanceTable {
        self.cache.get(&self.map, v)
    }

    /// Sum over agents of the distance to their nearest feasible target.
    pub fn lower_bound(&self) -> u64 {
        self.lower_bound
    }

    /// Mean pairwise Jaccard similarity of the target lists; 1 for a
    /// single agent.
    pub fn target_overlap(&self) -> f64 {
        let n = self.targets.len();
        if n < 2 {
            return 1.0;
        }
        let mut holders: HashMap<VertexId, Vec<AgentId>> = HashMap::new();
        for (i, list) in self.targets.iter().enumerate() {
            for &v in list {
                holders.entry(v).or_default().push(i);
            }
        }
        let mut shared: HashMap<(AgentId, AgentId), usize> = HashMap::new();
        for agents in holders.values() {
            for (x, &i) in agents.iter().enumerate() {
                for &j in &agents[x + 1..] {
                    *shared.entry((i, j)).or_default() += 1;
                }
            }
        }
        let sum: f64 = shared
            .iter()
            .map(|(&(i, j), &c)| {
                c as f64 / (self.targets[i].len() + self.targets[j].len() - c) as f64
            })
            .sum();
        sum / (n * (n - 1) / 2) as f64
    }
}

/// True iff every agent can be matched to a distinct feasible target.
pub fn check_feasibility(inst: &TapfInstance) -> bool {
    hopcroft_karp(&inst.targets, inst.map.num_vertices()).is_perfect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Random,
    Hotspot,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub kind: ScenarioKind,
    pub targets_per_agent: usize,
    /// `[d_min, d_max]` for random targets; `None` picks
    /// `[0.25 (w + h), 0.5 (w + h)]`.
    pub distance_band: Option<(u32, u32)>,
    pub hotspot_overlap: f64,
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn random(seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Random,
            targets_per_agent: 10,
            distance_band: None,
            hotspot_overlap: 0.8,
            seed,
        }
    }

    pub fn hotspot(seed: u64) -> Self {
        Self {
            kind: ScenarioKind::Hotspot,
            ..Self::random(seed)
        }
    }

    pub fn band_for(&self, map: &GridMap) -> (u32, u32) {
        self.distance_band.unwrap_or_else(|| {
            let span = (map.width() + map.height()) as f64;
            ((0.25 * span).round() as u32, (0.5 * span).round() as u32)
        })
    }

    fn validate(&self) -> Result<(), InstanceError> {
        if self.targets_per_agent == 0 {
            return Err(InstanceError::InvalidConfig(
                "targets_per_agent must be >= 1".into(),
            ));
        }
        if let Some((lo, hi)) = self.distance_band {
            if lo > hi {
                return Err(InstanceError::InvalidConfig(format!(
                    "empty distance band [{lo}, {hi}]"
                )));
            }
        }
        if !(self.hotspot_overlap > 0.0 && self.hotspot_overlap <= 1.0) {
            return Err(InstanceError::InvalidConfig(format!(
                "hotspot overlap {} outside (0, 1]",
                self.hotspot_overlap
            )));
        }
        Ok(())
    }
}

pub fn generate_scenario(
    map: Arc<GridMap>,
    n: usize,
    cfg: &ScenarioConfig,
) -> Result<TapfInstance, InstanceError> {
    match cfg.kind {
        ScenarioKind::Random => generate_random_scenario(map, n, cfg),
        ScenarioKind::Hotspot => generate_hotspot_scenario(map, n, cfg),
    }
}

fn sample_starts(
    component: &[VertexId],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<VertexId>, InstanceError> {
    if component.len() < n {
        return Err(InstanceError::InsufficientVertices {
            needed: n,
            available: component.len(),
        });
    }
    Ok(index::sample(rng, component.len(), n)
        .into_iter()
        .map(|k| component[k])
        .collect())
}

fn sample_from(pool: &[VertexId], count: usize, rng: &mut ChaCha8Rng) -> Vec<VertexId> {
    let count = count.min(pool.len());
    let mut out: Vec<_> = index::sample(rng, pool.len(), count)
        .into_iter()
        .map(|k| pool[k])
        .collect();
    out.sort_unstable();
    out
}

/// Re-draws the lists of agents left unmatched by a maximum matching until
/// the instance is feasible.
fn repair_until_feasible(
    map: &GridMap,
    targets: &mut [Vec<VertexId>],
    mut redraw: impl FnMut(AgentId) -> Vec<VertexId>,
) -> Result<(), InstanceError> {
    for _ in 0..=FEASIBILITY_RETRIES {
        let matching = hopcroft_karp(targets, map.num_vertices());
        if matching.is_perfect() {
            return Ok(());
        }
        let unmatched: Vec<_> = matching.unmatched_left().collect();
        for agent in unmatched {
            targets[agent] = redraw(agent);
        }
    }
    Err(InstanceError::InfeasibleAfterRetries(FEASIBILITY_RETRIES))
}

/// Random scenario: each agent's targets are drawn uniformly among vertices
/// whose distance from its start lies in the configured band.
pub fn generate_random_scenario(
    map: Arc<GridMap>,
    n: usize,
    cfg: &ScenarioConfig,
) -> Result<TapfInstance, InstanceError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let component = map.largest_component();
    let starts = sample_starts(&component, n, &mut rng)?;
    let (lo, hi) = cfg.band_for(&map);

    let in_band = |agent: AgentId| -> Vec<VertexId> {
        let table = map.bfs_distance(starts[agent]).expect("start on map");
        (0..map.num_vertices())
            .filter(|&v| (lo..=hi).contains(&table.raw(v)))
            .collect()
    };
    let mut targets = Vec::with_capacity(n);
    for agent in 0..n {
        let band = in_band(agent);
        if band.is_empty() {
            return Err(InstanceError::InsufficientVertices {
                needed: 1,
                available: 0,
            });
        }
        targets.push(sample_from(&band, cfg.targets_per_agent, &mut rng));
    }
    repair_until_feasible(&map, &mut targets, |agent| {
        sample_from(&in_band(agent), cfg.targets_per_agent, &mut rng)
    })?;
    TapfInstance::new(map, starts, targets)
}

/// Shape of a hotspot scenario: every list holds the same `core` targets
/// plus `unique` targets of its own, which puts the pairwise Jaccard
/// overlap of two lists at `core / (2 t - core)`, about the requested
/// overlap. `region` is the number of vertices the hotspot window must hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HotspotLayout {
    pub core: usize,
    pub unique: usize,
    pub region: usize,
}

pub fn hotspot_layout(n: usize, targets_per_agent: usize, overlap: f64) -> HotspotLayout {
    let t = targets_per_agent;
    let mut core = ((2.0 * t as f64 * overlap / (1.0 + overlap)).round() as usize).clamp(1, t);
    // With identical lists only `t` agents could be served.
    if core == t && n > t {
        core = t - 1;
    }
    let unique = t - core;
    let spread = n + ((1.0 - overlap) * (n * t) as f64).ceil() as usize;
    HotspotLayout {
        core,
        unique,
        region: spread.max(core + n * unique),
    }
}

/// Hotspot scenario: all targets lie in one square window around a random
/// center, and the lists overlap heavily through a shared core.
pub fn generate_hotspot_scenario(
    map: Arc<GridMap>,
    n: usize,
    cfg: &ScenarioConfig,
) -> Result<TapfInstance, InstanceError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let component = map.largest_component();
    let layout = hotspot_layout(n, cfg.targets_per_agent, cfg.hotspot_overlap);
    if component.len() < layout.region {
        return Err(InstanceError::NoSuitableRegion(layout.region));
    }

    let center = component[rng.random_range(0..component.len())];
    let (cx, cy) = map.coords(center);
    let mut region = Vec::new();
    for radius in 0..=map.width().max(map.height()) {
        region = component
            .iter()
            .copied()
            .filter(|&v| {
                let (x, y) = map.coords(v);
                x.abs_diff(cx) <= radius && y.abs_diff(cy) <= radius
            })
            .collect();
        if region.len() >= layout.region {
            break;
        }
    }
    if region.len() < layout.region {
        return Err(InstanceError::NoSuitableRegion(layout.region));
    }
    let starts = sample_starts(&component, n, &mut rng)?;
    let drawn: Vec<VertexId> =
        index::sample(&mut rng, region.len(), layout.core + n * layout.unique)
            .into_iter()
            .map(|k| region[k])
            .collect();
    let (core, rest) = drawn.split_at(layout.core);
    let with_core = |own: &[VertexId]| {
        let mut list: Vec<VertexId> = core.iter().chain(own).copied().collect();
        list.sort_unstable();
        list
    };
    let mut targets: Vec<_> = (0..n)
        .map(|i| with_core(&rest[i * layout.unique..(i + 1) * layout.unique]))
        .collect();
    // Only a core-only layout (overlap 1) can be infeasible; then the
    // redraw cannot help and the retries run out.
    let others: Vec<VertexId> = region
        .iter()
        .copied()
        .filter(|v| !core.contains(v))
        .collect();
    repair_until_feasible(&map, &mut targets, |_| {
        with_core(&sample_from(&others, layout.unique, &mut rng))
    })?;
    TapfInstance::new(map, starts, targets)
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("scenario line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

/// Parsed scenario file, in cell coordinates `(x, y)` = (column, row).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioFile {
    pub map_path: String,
    pub agents: Vec<ScenarioAgent>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioAgent {
    pub line: usize,
    pub start: (usize, usize),
    pub targets: Vec<(usize, usize)>,
}

fn parse_xy(text: &str, line: usize) -> Result<(usize, usize), ParseError> {
    let parts: Vec<_> = text.split_whitespace().collect();
    match parts.as_slice() {
        [x, y] => {
            let x = x
                .parse()
                .map_err(|_| ParseError::new(line, format!("bad x coordinate {x:?}")))?;
            let y = y
                .parse()
                .map_err(|_| ParseError::new(line, format!("bad y coordinate {y:?}")))?;
            Ok((x, y))
        }
        _ => Err(ParseError::new(
            line,
            format!("expected `x y`, found {text:?}"),
        )),
    }
}

impl ScenarioFile {
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        let mut records = text.lines().enumerate().filter_map(|(k, raw)| {
            let content = raw.split('#').next().unwrap_or("").trim();
            (!content.is_empty()).then_some((k + 1, content))
        });

        let (line, first) = records
            .next()
            .ok_or_else(|| ParseError::new(1, "missing `map` line"))?;
        let map_path = first
            .strip_prefix("map ")
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .ok_or_else(|| ParseError::new(line, "expected `map <path>`"))?
            .to_string();

        let (line, second) = records
            .next()
            .ok_or_else(|| ParseError::new(line + 1, "missing `agents` line"))?;
        let n: usize = second
            .strip_prefix("agents ")
            .and_then(|c| c.trim().parse().ok())
            .ok_or_else(|| ParseError::new(line, "expected `agents <n>`"))?;

        let mut agents = Vec::with_capacity(n);
        let mut last_line = line;
        for (line, content) in records {
            last_line = line;
            if agents.len() == n {
                return Err(ParseError::new(
                    line,
                    format!("more than {n} agent records"),
                ));
            }
            let (start, rest) = content
                .split_once(':')
                .ok_or_else(|| ParseError::new(line, "expected `sx sy : tx ty , ...`"))?;
            let start = parse_xy(start, line)?;
            let targets = rest
                .split(',')
                .map(|t| parse_xy(t, line))
                .collect::<Result<Vec<_>, _>>()?;
            agents.push(ScenarioAgent {
                line,
                start,
                targets,
            });
        }
        if agents.len() != n {
            return Err(ParseError::new(
                last_line,
                format!("declared {n} agents, found {}", agents.len()),
            ));
        }
        Ok(Self { map_path, agents })
    }

    /// Resolves coordinates against `map` and builds a checked instance.
    pub fn to_instance(&self, map: Arc<GridMap>) -> Result<TapfInstance, ParseError> {
        let resolve = |(x, y): (usize, usize), line: usize| {
            map.vertex_at(x, y).ok_or_else(|| {
                let why = if x >= map.width() || y >= map.height() {
                    "out of bounds"
                } else {
                    "blocked"
                };
                ParseError::new(line, format!("cell ({x}, {y}) is {why}"))
            })
        };
        let mut starts = Vec::with_capacity(self.agents.len());
        let mut targets = Vec::with_capacity(self.agents.len());
        let mut seen = HashSet::new();
        for agent in &self.agents {
            let s = resolve(agent.start, agent.line)?;
            if !seen.insert(s) {
                return Err(ParseError::new(
                    agent.line,
                    format!("duplicate start cell {:?}", agent.start),
                ));
            }
            starts.push(s);
            targets.push(
                agent
                    .targets
                    .iter()
                    .map(|&xy| resolve(xy, agent.line))
                    .collect::<Result<Vec<_>, _>>()?,
            );
        }
        TapfInstance::new(map, starts, targets).map_err(|e| {
            let line = match e {
                InstanceError::NoFeasibleTargets(i) | InstanceError::InvalidTarget(i, _) => {
                    self.agents[i].line
                }
                _ => 0,
            };
            ParseError::new(line, e.to_string())
        })
    }
}

pub fn write_scenario(inst: &TapfInstance, map_path: &str) -> String {
    let map = inst.map();
    let mut out = format!("map {map_path}\nagents {}\n", inst.num_agents());
    for agent in 0..inst.num_agents() {
        let (sx, sy) = map.coords(inst.start(agent));
        let _ = write!(out, "{sx} {sy} :");
        for (k, &t) in inst.targets(agent).iter().enumerate() {
            let (x, y) = map.coords(t);
            let sep = if k == 0 { "" } else { " ," };
            let _ = write!(out, "{sep} {x} {y}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::synth;

    fn line_map(width: usize) -> Arc<GridMap> {
        Arc::new(synth::empty(width, 1))
    }

    #[test]
    fn feasibility_pigeonhole_and_forced() {
        let map = line_map(5);
        let shared =
            TapfInstance::new_unchecked(map.clone(), vec![0, 1], vec![vec![3], vec![3]]).unwrap();
        assert!(!check_feasibility(&shared));
        let forced =
            TapfInstance::new_unchecked(map.clone(), vec![0, 1], vec![vec![2, 3], vec![3]])
                .unwrap();
        assert!(check_feasibility(&forced));
        assert_eq!(
            TapfInstance::new(map, vec![0, 1], vec![vec![3], vec![3]]).unwrap_err(),
            InstanceError::Infeasible
        );
    }

    #[test]
    fn construction_validates_starts() {
        let map = line_map(4);
        assert_eq!(
            TapfInstance::new(map.clone(), vec![1, 1], vec![vec![2], vec![3]]).unwrap_err(),
            InstanceError::DuplicateStart(0, 1)
        );
        assert_eq!(
            TapfInstance::new(map.clone(), vec![9], vec![vec![2]]).unwrap_err(),
            InstanceError::InvalidStart(0)
        );
        assert_eq!(
            TapfInstance::new(map, vec![0], vec![vec![7]]).unwrap_err(),
            InstanceError::InvalidTarget(0, 7)
        );
    }

    #[test]
    fn unreachable_targets_are_dropped() {
        let map = Arc::new(GridMap::parse("type octile\nheight 1\nwidth 4\nmap\n..@.\n").unwrap());
        let inst = TapfInstance::new(map.clone(), vec![0], vec![vec![1, 2]]).unwrap();
        assert_eq!(inst.targets(0), &[1]);
        assert_eq!(
            TapfInstance::new(map, vec![0], vec![vec![2]]).unwrap_err(),
            InstanceError::NoFeasibleTargets(0)
        );
    }

    #[test]
    fn lower_bound_sums_nearest_targets() {
        let map = line_map(10);
        let inst = TapfInstance::new(map, vec![0, 5], vec![vec![7, 9], vec![5, 6]]).unwrap();
        assert_eq!(inst.lower_bound(), 7);
        assert_eq!(inst.dist(0, 9), Some(9));
        assert_eq!(inst.dist(0, 5), None);
    }

    #[test]
    fn random_single_agent_band() {
        let map = Arc::new(synth::empty(5, 5));
        let cfg = ScenarioConfig {
            distance_band: Some((1, 2)),
            ..ScenarioConfig::random(3)
        };
        let inst = generate_random_scenario(map.clone(), 1, &cfg).unwrap();
        let table = map.bfs_distance(inst.start(0)).unwrap();
        let available = (0..25).filter(|&v| (1..=2).contains(&table.raw(v))).count();
        assert_eq!(inst.targets(0).len(), available.min(10));
        for &t in inst.targets(0) {
            assert!((1..=2).contains(&table.raw(t)));
        }
    }

    #[test]
    fn hotspot_full_overlap_two_agents() {
        let map = Arc::new(synth::empty(6, 6));
        let cfg = ScenarioConfig {
            targets_per_agent: 2,
            hotspot_overlap: 1.0,
            ..ScenarioConfig::hotspot(5)
        };
        let inst = generate_hotspot_scenario(map, 2, &cfg).unwrap();
        assert_eq!(inst.targets(0), inst.targets(1));
        assert_eq!(inst.targets(0).len(), 2);
        assert_ne!(inst.targets(0)[0], inst.targets(0)[1]);
    }

    #[test]
    fn generation_errors() {
        let map = Arc::new(synth::empty(2, 2));
        assert!(matches!(
            generate_random_scenario(map.clone(), 5, &ScenarioConfig::random(0)),
            Err(InstanceError::InsufficientVertices {
                needed: 5,
                available: 4
            })
        ));
        assert_eq!(
            generate_hotspot_scenario(map.clone(), 2, &ScenarioConfig::hotspot(0)).unwrap_err(),
            InstanceError::NoSuitableRegion(11)
        );
        let bad = ScenarioConfig {
            distance_band: Some((3, 1)),
            ..ScenarioConfig::random(0)
        };
        assert!(matches!(
            generate_random_scenario(map, 1, &bad),
            Err(InstanceError::InvalidConfig(_))
        ));
    }

    #[test]
    fn layout_formula() {
        // 2 * 10 * 0.8 / 1.8 = 8.9 -> 9 shared, Jaccard 9 / 11.
        let l = hotspot_layout(200, 10, 0.8);
        assert_eq!((l.core, l.unique, l.region), (9, 1, 600));
        let l = hotspot_layout(2, 2, 1.0);
        assert_eq!((l.core, l.unique, l.region), (2, 0, 2));
        let l = hotspot_layout(50, 10, 0.3);
        assert_eq!((l.core, l.unique), (5, 5));
        assert_eq!(l.region, 50 + 350);
        // Three targets would all be shared; one is kept per agent instead.
        let l = hotspot_layout(20, 3, 0.8);
        assert_eq!((l.core, l.unique, l.region), (2, 1, 32));
        let l = hotspot_layout(5, 1, 0.8);
        assert_eq!((l.core, l.unique), (0, 1));
    }

    #[test]
    fn scenario_round_trip() {
        let map = Arc::new(synth::random_obstacles(16, 16, 20, 1));
        let inst = generate_scenario(map.clone(), 12, &ScenarioConfig::hotspot(9)).unwrap();
        let text = write_scenario(&inst, "maps/x.map");
        let file = ScenarioFile::parse(&text).unwrap();
        assert_eq!(file.map_path, "maps/x.map");
        let back = file.to_instance(map).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn scenario_parse_errors_carry_lines() {
        let map = Arc::new(synth::empty(4, 4));
        let oob = "map m.map\nagents 1\n# comment\n0 0 : 9 9\n";
        let err = ScenarioFile::parse(oob)
            .unwrap()
            .to_instance(map.clone())
            .unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.message.contains("out of bounds"));

        let dup = "map m.map\nagents 2\n0 0 : 1 1\n0 0 : 2 2\n";
        let err = ScenarioFile::parse(dup)
            .unwrap()
            .to_instance(map)
            .unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.message.contains("duplicate"));

        assert_eq!(ScenarioFile::parse("agents 1\n").unwrap_err().line, 1);
        assert_eq!(
            ScenarioFile::parse("map m\nagents 2\n0 0 : 1 1\n")
                .unwrap_err()
                .line,
            3
        );
        assert_eq!(
            ScenarioFile::parse("map m\nagents 1\n0 0 1 1\n")
                .unwrap_err()
                .line,
            3
        );
        assert_eq!(
            ScenarioFile::parse("map m\nagents 1\n0 0 : 1 x\n")
                .unwrap_err()
                .line,
            3
        );
    }
}
