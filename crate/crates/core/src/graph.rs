//! Scattering graphs, finite rails, and the flattened lattices the
//! propagators run on.
//!
//! Vertex numbering is deterministic: the core keeps its own indices and
//! rail `j` occupies the contiguous block that follows the core and all
//! earlier rails, ordered outward from its terminal.

use std::collections::{BTreeSet, VecDeque};
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite simple graph with an ordered list of terminal vertices where
/// rails may be attached.
///
/// A vertex may carry more than one terminal: a single vertex with two
/// terminals is the core of a bare infinite line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScatterGraph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    terminals: Vec<usize>,
}

impl ScatterGraph {
    pub fn new(
        vertex_count: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        terminals: Vec<usize>,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (u, v) in edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::Graph(format!(
                    "edge ({u}, {v}) out of range for {vertex_count} vertices"
                )));
            }
            if u == v {
                return Err(Error::Graph(format!("self-loop at vertex {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::Graph(format!("duplicate edge ({u}, {v})")));
            }
        }
        if let Some(&t) = terminals.iter().find(|&&t| t >= vertex_count) {
            return Err(Error::Graph(format!(
                "terminal {t} out of range for {vertex_count} vertices"
            )));
        }
        Ok(ScatterGraph {
            vertex_count,
            edges: seen.into_iter().collect(),
            terminals,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Edges as `(u, v)` with `u < v`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn terminals(&self) -> &[usize] {
        &self.terminals
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    /// Dense 0/1 adjacency matrix, row-major.
    pub fn adjacency_dense(&self) -> Vec<Vec<u8>> {
        let mut a = vec![vec![0u8; self.vertex_count]; self.vertex_count];
        for &(u, v) in &self.edges {
            a[u][v] = 1;
            a[v][u] = 1;
        }
        a
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.binary_search(&(u.min(v), u.max(v))).is_ok()
    }
}

/// Path graph on `n` vertices with terminals at both ends. For `n == 1`
/// the two coincident end terminals collapse into one.
pub fn build_path(n: usize) -> Result<ScatterGraph> {
    if n == 0 {
        return Err(Error::InvalidArgument("a path needs at least one vertex".into()));
    }
    let terminals = if n == 1 { vec![0] } else { vec![0, n - 1] };
    ScatterGraph::new(n, (1..n).map(|i| (i - 1, i)), terminals)
}

/// A core graph with a finite path ("rail") hanging off every terminal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RailedGraph {
    core: ScatterGraph,
    rail_length: usize,
    rails: Vec<Range<usize>>,
}

pub fn attach_rails(core: &ScatterGraph, rail_length: usize) -> Result<RailedGraph> {
    if rail_length == 0 {
        return Err(Error::InvalidArgument("rail_length must be positive".into()));
    }
    let base = core.vertex_count();
    let rails = (0..core.terminals().len())
        .map(|j| {
            let start = base + j * rail_length;
            start..start + rail_length
        })
        .collect();
    Ok(RailedGraph {
        core: core.clone(),
        rail_length,
        rails,
    })
}

impl RailedGraph {
    pub fn core(&self) -> &ScatterGraph {
        &self.core
    }

    pub fn rail_length(&self) -> usize {
        self.rail_length
    }

    pub fn vertex_count(&self) -> usize {
        self.core.vertex_count() + self.rails.len() * self.rail_length
    }

    /// Vertex indices of rail `j`, nearest the terminal first.
    pub fn rail(&self, j: usize) -> Range<usize> {
        self.rails[j].clone()
    }

    pub fn rail_count(&self) -> usize {
        self.rails.len()
    }

    /// Rail `j` as a track running *toward* its terminal and on into the
    /// terminal vertex: far end first, terminal last. Packets placed on this
    /// track with positive momentum travel into the core.
    pub fn incoming_track(&self, j: usize) -> Vec<usize> {
        let mut track: Vec<usize> = self.rail(j).rev().collect();
        track.push(self.core.terminals()[j]);
        track
    }

    /// Rail `j` as a track running away from the core: terminal first.
    pub fn outgoing_track(&self, j: usize) -> Vec<usize> {
        let mut track = vec![self.core.terminals()[j]];
        track.extend(self.rail(j));
        track
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges = self.core.edges().to_vec();
        for (j, rail) in self.rails.iter().enumerate() {
            let t = self.core.terminals()[j];
            edges.push((t, rail.start));
            edges.extend((rail.start + 1..rail.end).map(|v| (v - 1, v)));
        }
        edges
    }

    /// Flatten into a lattice whose boundary window is the outermost
    /// `end_window` sites of every rail.
    pub fn lattice(&self, end_window: usize) -> Lattice {
        let boundary = self
            .rails
            .iter()
            .flat_map(|r| r.end.saturating_sub(end_window.min(self.rail_length))..r.end)
            .collect();
        Lattice::from_edges(self.vertex_count(), &self.edges(), boundary)
    }
}

/// A finite graph ready for time evolution: adjacency lists plus the set of
/// boundary sites whose occupation signals truncation artefacts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    neighbors: Vec<Vec<usize>>,
    boundary: Vec<usize>,
}

impl Lattice {
    pub fn from_edges(vertex_count: usize, edges: &[(usize, usize)], boundary: Vec<usize>) -> Self {
        let mut neighbors = vec![Vec::new(); vertex_count];
        for &(u, v) in edges {
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Lattice { neighbors, boundary }
    }

    /// Open chain of `n` sites; the outermost `end_window` sites on each side
    /// form the boundary.
    pub fn line(n: usize, end_window: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        let w = end_window.min(n / 2);
        let boundary = (0..w).chain(n - w..n).collect();
        Lattice::from_edges(n, &edges, boundary)
    }

    pub fn vertex_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (u, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    /// Graph distances from `source`, truncated at `max_depth`
    /// (`usize::MAX` marks unreached vertices).
    pub fn distances_from(&self, source: usize, max_depth: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.vertex_count()];
        let mut queue = VecDeque::from([source]);
        dist[source] = 0;
        while let Some(u) = queue.pop_front() {
            if dist[u] == max_depth {
                continue;
            }
            for &v in &self.neighbors[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct GraphFile {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    description: Option<String>,
    vertices: usize,
    edges: Vec<[usize; 2]>,
    terminals: Vec<usize>,
}

/// Parse the TOML graph format:
///
/// ```toml
/// vertices = 3
/// edges = [[0, 1], [1, 2]]
/// terminals = [0, 2]
/// ```
///
/// Out-of-range indices, self-loops, duplicate edges and duplicate terminals
/// are rejected with the offending field named.
pub fn parse_graph_file(text: &str) -> Result<ScatterGraph> {
    let file: GraphFile = toml::from_str(text).map_err(|e| Error::GraphFile {
        field: e
            .span()
            .map(|s| {
                let line = text[..s.start.min(text.len())].lines().count().max(1);
                format!("line {line}")
            })
            .unwrap_or_else(|| "document".into()),
        message: e.message().to_string(),
    })?;
    let n = file.vertices;
    let mut seen = BTreeSet::new();
    for (i, &[u, v]) in file.edges.iter().enumerate() {
        let field = format!("edges[{i}]");
        if u >= n || v >= n {
            return Err(Error::GraphFile {
                field,
                message: format!("[{u}, {v}] out of range for {n} vertices"),
            });
        }
        if u == v {
            return Err(Error::GraphFile {
                field,
                message: format!("self-loop at vertex {u}"),
            });
        }
        if !seen.insert((u.min(v), u.max(v))) {
            return Err(Error::GraphFile {
                field,
                message: format!("duplicate edge [{u}, {v}]"),
            });
        }
    }
    let mut seen_terminals = BTreeSet::new();
    for (i, &t) in file.terminals.iter().enumerate() {
        let field = format!("terminals[{i}]");
        if t >= n {
            return Err(Error::GraphFile {
                field,
                message: format!("{t} out of range for {n} vertices"),
            });
        }
        if !seen_terminals.insert(t) {
            return Err(Error::GraphFile {
                field,
                message: format!("duplicate terminal {t}"),
            });
        }
    }
    ScatterGraph::new(n, file.edges.iter().map(|&[u, v]| (u, v)), file.terminals)
}

/// Serialise a graph back into the TOML file format.
pub fn write_graph_file(graph: &ScatterGraph, name: Option<&str>) -> String {
    let file = GraphFile {
        name: name.map(str::to_owned),
        description: None,
        vertices: graph.vertex_count(),
        edges: graph.edges().iter().map(|&(u, v)| [u, v]).collect(),
        terminals: graph.terminals().to_vec(),
    };
    toml::to_string(&file).expect("graph file serialisation cannot fail")
}
