//! Four-connected grid graphs, MovingAI map parsing and shortest-path
//! distance services.
//!
//! Vertices are the passable cells, numbered densely in row-major order.
//! Because of that numbering the neighbor lists are sorted by vertex id,
//! which the tie-breaking rules elsewhere in the crate rely on.

pub mod synth;

use std::collections::VecDeque;
use std::fmt;
use std::sync::OnceLock;

use thiserror::Error;

/// Dense index of a passable cell.
pub type VertexId = usize;

/// Distance value used for vertices that cannot reach the table source.
pub const UNREACHABLE: u32 = u32::MAX;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MapError {
    #[error("malformed map header: {0}")]
    MalformedHeader(String),
    #[error("map dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown cell character {0:?} at row {1}, column {2}")]
    UnknownCell(char, usize, usize),
    #[error("vertex {0} is not a passable vertex of the map")]
    InvalidVertex(VertexId),
    #[error("vertex {0} is unreachable from the table source")]
    Unreachable(VertexId),
}

#[derive(Clone, PartialEq, Eq)]
pub struct GridMap {
    width: usize,
    height: usize,
    passable: Vec<bool>,
    cell_vertex: Vec<Option<VertexId>>,
    vertex_cell: Vec<usize>,
    neighbors: Vec<Vec<VertexId>>,
}

impl fmt::Debug for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridMap")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("vertices", &self.vertex_cell.len())
            .finish()
    }
}

impl GridMap {
    /// Builds a map from a row-major passability mask.
    pub fn from_passable(width: usize, height: usize, passable: Vec<bool>) -> Self {
        assert_eq!(
            passable.len(),
            width * height,
            "mask size must be width * height"
        );
        let mut cell_vertex = vec![None; passable.len()];
        let mut vertex_cell = Vec::new();
        for (cell, &open) in passable.iter().enumerate() {
            if open {
                cell_vertex[cell] = Some(vertex_cell.len());
                vertex_cell.push(cell);
            }
        }
        let neighbors = vertex_cell
            .iter()
            .map(|&cell| {
                let (x, y) = (cell % width, cell / width);
                // up, left, right, down: ascending cell index, hence ascending vertex id
                let mut out = Vec::with_capacity(4);
                if y > 0 {
                    out.extend(cell_vertex[cell - width]);
                }
                if x > 0 {
                    out.extend(cell_vertex[cell - 1]);
                }
                if x + 1 < width {
                    out.extend(cell_vertex[cell + 1]);
                }
                if y + 1 < height {
                    out.extend(cell_vertex[cell + width]);
                }
                out
            })
            .collect();
        Self {
            width,
            height,
            passable,
            cell_vertex,
            vertex_cell,
            neighbors,
        }
    }

    /// Parses a MovingAI `.map` file.
    pub fn parse(text: &str) -> Result<Self, MapError> {
        let mut lines = text.lines();
        let mut header = |key: &str| -> Result<String, MapError> {
            let line = lines
                .next()
                .ok_or_else(|| MapError::MalformedHeader(format!("missing `{key}` line")))?;
            let mut parts = line.split_whitespace();
            match parts.next() {
                Some(k) if k == key => Ok(parts.collect::<Vec<_>>().join(" ")),
                _ => Err(MapError::MalformedHeader(format!(
                    "expected `{key}`, found {line:?}"
                ))),
            }
        };
        let kind = header("type")?;
        if kind.is_empty() {
            return Err(MapError::MalformedHeader("empty map type".into()));
        }
        let parse_dim = |key: &str, value: String| -> Result<usize, MapError> {
            match value.parse::<usize>() {
                Ok(v) if v > 0 => Ok(v),
                _ => Err(MapError::MalformedHeader(format!(
                    "bad {key} value {value:?}"
                ))),
            }
        };
        let height = parse_dim("height", header("height")?)?;
        let width = parse_dim("width", header("width")?)?;
        let map_line = header("map")?;
        if !map_line.is_empty() {
            return Err(MapError::MalformedHeader(
                "unexpected text after `map`".into(),
            ));
        }

        let rows: Vec<&str> = lines
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.is_empty())
            .collect();
        if rows.len() != height {
            return Err(MapError::DimensionMismatch(format!(
                "header declares {height} rows, found {}",
                rows.len()
            )));
        }
        let mut passable = Vec::with_capacity(width * height);
        for (r, row) in rows.iter().enumerate() {
            let count = row.chars().count();
            if count != width {
                return Err(MapError::DimensionMismatch(format!(
                    "row {r} has {count} cells, header declares width {width}"
                )));
            }
            for (c, ch) in row.chars().enumerate() {
                passable.push(match ch {
                    '.' | 'G' | 'S' => true,
                    '@' | 'O' | 'T' | 'W' => false,
                    other => return Err(MapError::UnknownCell(other, r, c)),
                });
            }
        }
        Ok(Self::from_passable(width, height, passable))
    }

    /// Renders the map back into MovingAI text (`.` and `@` only).
    pub fn to_movingai(&self) -> String {
        let mut out = format!(
            "type octile\nheight {}\nwidth {}\nmap\n",
            self.height, self.width
        );
        for row in self.passable.chunks(self.width) {
            out.extend(row.iter().map(|&p| if p { '.' } else { '@' }));
            out.push('\n');
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_vertices(&self) -> usize {
        self.vertex_cell.len()
    }

    pub fn is_passable(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.passable[y * self.width + x]
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v < self.vertex_cell.len()
    }

    /// Passable neighbors of `v`, sorted by vertex id.
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.neighbors[v]
    }

    /// Vertex at column `x`, row `y`, if that cell is passable.
    pub fn vertex_at(&self, x: usize, y: usize) -> Option<VertexId> {
        if x < self.width && y < self.height {
            self.cell_vertex[y * self.width + x]
        } else {
            None
        }
    }

    /// `(x, y)` = (column, row) of a vertex.
    pub fn coords(&self, v: VertexId) -> (usize, usize) {
        let cell = self.vertex_cell[v];
        (cell % self.width, cell / self.width)
    }

    pub fn manhattan(&self, u: VertexId, v: VertexId) -> usize {
        let (ux, uy) = self.coords(u);
        let (vx, vy) = self.coords(v);
        ux.abs_diff(vx) + uy.abs_diff(vy)
    }

    /// Connected-component label for every vertex.
    pub fn components(&self) -> Vec<usize> {
        let mut label = vec![usize::MAX; self.num_vertices()];
        let mut next = 0;
        let mut queue = VecDeque::new();
        for s in 0..self.num_vertices() {
            if label[s] != usize::MAX {
                continue;
            }
            label[s] = next;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in self.neighbors(u) {
                    if label[w] == usize::MAX {
                        label[w] = next;
                        queue.push_back(w);
                    }
                }
            }
            next += 1;
        }
        label
    }

    /// Vertices of the largest connected component, ascending. Ties go to
    /// the component containing the lowest vertex id.
    pub fn largest_component(&self) -> Vec<VertexId> {
        let label = self.components();
        let count = label.iter().copied().max().map_or(0, |m| m + 1);
        let mut size = vec![0usize; count];
        for &l in &label {
            size[l] += 1;
        }
        let best = (0..count).max_by_key(|&c| (size[c], std::cmp::Reverse(c)));
        match best {
            Some(best) => (0..self.num_vertices())
                .filter(|&v| label[v] == best)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Single-source BFS distances.
    pub fn bfs_distance(&self, source: VertexId) -> Result<DistanceTable, MapError> {
        if !self.contains(source) {
            return Err(MapError::InvalidVertex(source));
        }
        let mut dist = vec![UNREACHABLE; self.num_vertices()];
        dist[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let next = dist[u] + 1;
            for &w in self.neighbors(u) {
                if dist[w] == UNREACHABLE {
                    dist[w] = next;
                    queue.push_back(w);
                }
            }
        }
        Ok(DistanceTable { source, dist })
    }
}

/// Exact unweighted distances from one source vertex.
///
/// Parent pointers are not stored: the parent of `v` is its lowest-id
/// neighbor one step closer to the source, which [`DistanceTable::parent`]
/// recomputes in O(degree).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DistanceTable {
    source: VertexId,
    dist: Vec<u32>,
}

impl DistanceTable {
    pub fn source(&self) -> VertexId {
        self.source
    }

    /// Distance to the source, or `None` when unreachable.
    pub fn get(&self, v: VertexId) -> Option<u32> {
        match self.dist.get(v) {
            Some(&d) if d != UNREACHABLE => Some(d),
            _ => None,
        }
    }

    /// Raw distance, `UNREACHABLE` for unreachable vertices.
    #[inline]
    pub fn raw(&self, v: VertexId) -> u32 {
        self.dist[v]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.dist
    }

    /// Predecessor of `v` toward the source.
    pub fn parent(&self, map: &GridMap, v: VertexId) -> Option<VertexId> {
        let d = self.get(v)?;
        if d == 0 {
            return None;
        }
        map.neighbors(v)
            .iter()
            .copied()
            .find(|&u| self.dist[u] == d - 1)
    }

    /// Deterministic shortest path from `from` to the table source, following
    /// lowest-id parents.
    pub fn canonical_path(&self, map: &GridMap, from: VertexId) -> Result<Vec<VertexId>, MapError> {
        if !map.contains(from) {
            return Err(MapError::InvalidVertex(from));
        }
        let d = self.get(from).ok_or(MapError::Unreachable(from))?;
        let mut path = Vec::with_capacity(d as usize + 1);
        let mut v = from;
        path.push(v);
        while let Some(p) = self.parent(map, v) {
            path.push(p);
            v = p;
        }
        Ok(path)
    }
}

/// Lazily filled per-vertex distance tables. Lookups are lock-free once a
/// table exists; concurrent first requests for the same source block on a
/// single BFS.
pub struct DistanceCache {
    tables: Vec<OnceLock<DistanceTable>>,
}

impl DistanceCache {
    pub fn new(map: &GridMap) -> Self {
        Self {
            tables: (0..map.num_vertices()).map(|_| OnceLock::new()).collect(),
        }
    }

    /// Table sourced at `v`, computing it on first use.
    pub fn get(&self, map: &GridMap, v: VertexId) -> &DistanceTable {
        self.tables[v].get_or_init(|| map.bfs_distance(v).expect("cache is sized to the map"))
    }

    pub fn len_cached(&self) -> usize {
        self.tables.iter().filter(|t| t.get().is_some()).count()
    }
}

impl fmt::Debug for DistanceCache {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DistanceCache")
            .field("cached", &self.len_cached())
            .finish()
    }
}
