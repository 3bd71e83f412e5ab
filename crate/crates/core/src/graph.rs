//! Finite windows of locally finite simple graphs.
//!
//! Vertices are dense ids `0..n`. Adjacency lists are kept sorted so every
//! iteration order (and with it the order in which randomness is consumed) is
//! deterministic.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = usize;

/// Undirected simple graph without self-loops.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<VertexId>>,
}

/// On-disk form: `{"n": int, "edges": [[u, v], ...]}` with `u < v`, edges sorted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[VertexId; 2]>,
}

impl Graph {
    pub fn edgeless(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
        }
    }

    /// Builds a graph from an edge list. Duplicate edges are merged; self-loops
    /// and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(VertexId, VertexId)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({u},{v}) has an endpoint outside 0..{n}"
                )));
            }
            if u == v {
                return Err(Error::InvalidGraph(format!("self-loop at {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Graph { adjacency })
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, &edges).expect("path edges are valid")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a simple cycle needs at least 3 vertices");
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
        Graph::from_edges(n, &edges).expect("cycle edges are valid")
    }

    pub fn complete(n: usize) -> Self {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Graph::from_edges(n, &edges).expect("complete edges are valid")
    }

    /// Star with center 0 and leaves `1..=leaves`.
    pub fn star(leaves: usize) -> Self {
        let edges: Vec<_> = (1..=leaves).map(|l| (0, l)).collect();
        Graph::from_edges(leaves + 1, &edges).expect("star edges are valid")
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn vertices(&self) -> std::ops::Range<VertexId> {
        0..self.n()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        v < self.n()
    }

    pub fn check_vertex(&self, v: VertexId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::UnknownVertex(v))
        }
    }

    /// Sorted neighbors of `v` (excluding `v`). Panics on an unknown vertex.
    pub fn neighbors(&self, v: VertexId) -> &[VertexId] {
        &self.adjacency[v]
    }

    pub fn degree(&self, v: VertexId) -> usize {
        self.adjacency[v].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: VertexId, v: VertexId) -> bool {
        u < self.n() && self.adjacency[u].binary_search(&v).is_ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    /// Edges with `u < v`, lexicographically sorted.
    pub fn edges(&self) -> Vec<(VertexId, VertexId)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (u, list) in self.adjacency.iter().enumerate() {
            out.extend(list.iter().filter(|&&v| v > u).map(|&v| (u, v)));
        }
        out
    }

    /// Common neighbors of `u` and `v`, sorted.
    pub fn common_neighbors(&self, u: VertexId, v: VertexId) -> Vec<VertexId> {
        let (a, b) = (&self.adjacency[u], &self.adjacency[v]);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    /// The 2-step graph: same vertices, `u ~ v` whenever the graph distance is 1 or 2.
    pub fn two_step_graph(&self) -> Graph {
        let mut adjacency = Vec::with_capacity(self.n());
        for v in self.vertices() {
            let mut list: Vec<VertexId> = self.adjacency[v].clone();
            for &w in &self.adjacency[v] {
                list.extend(self.adjacency[w].iter().copied().filter(|&u| u != v));
            }
            list.sort_unstable();
            list.dedup();
            adjacency.push(list);
        }
        Graph { adjacency }
    }

    /// `N_v = {v} ∪ {w : v ~ w}`, sorted.
    pub fn neighborhood(&self, v: VertexId) -> Result<Vec<VertexId>> {
        self.check_vertex(v)?;
        Ok(self.closed_neighborhood(v))
    }

    pub(crate) fn closed_neighborhood(&self, v: VertexId) -> Vec<VertexId> {
        let list = &self.adjacency[v];
        let pos = list.partition_point(|&w| w < v);
        let mut out = Vec::with_capacity(list.len() + 1);
        out.extend_from_slice(&list[..pos]);
        out.push(v);
        out.extend_from_slice(&list[pos..]);
        out
    }

    /// `N_v^+ = {w : N_v ∩ N_w ≠ ∅}`, sorted.
    pub fn two_neighborhood(&self, v: VertexId) -> Result<Vec<VertexId>> {
        self.check_vertex(v)?;
        Ok(self.closed_two_neighborhood(v))
    }

    pub(crate) fn closed_two_neighborhood(&self, v: VertexId) -> Vec<VertexId> {
        let mut out = self.closed_neighborhood(v);
        for &w in &self.adjacency[v] {
            out.extend_from_slice(&self.adjacency[w]);
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// `N_W = ∪_{v∈W} N_v`, sorted.
    pub fn neighborhood_of_set(&self, set: &[VertexId]) -> Result<Vec<VertexId>> {
        let mut out = Vec::new();
        for &v in set {
            out.extend(self.neighborhood(v)?);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// `N_W^+ = ∪_{v∈W} N_v^+`, sorted.
    pub fn two_neighborhood_of_set(&self, set: &[VertexId]) -> Result<Vec<VertexId>> {
        let mut out = Vec::new();
        for &v in set {
            out.extend(self.two_neighborhood(v)?);
        }
        out.sort_unstable();
        out.dedup();
        Ok(out)
    }

    /// Breadth-first distances from `source`; `None` marks unreachable vertices.
    pub fn distances_from(&self, source: VertexId) -> Result<Vec<Option<usize>>> {
        self.check_vertex(source)?;
        let mut dist = vec![None; self.n()];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].expect("queued vertices have a distance");
            for &w in &self.adjacency[u] {
                if dist[w].is_none() {
                    dist[w] = Some(d + 1);
                    queue.push_back(w);
                }
            }
        }
        Ok(dist)
    }

    /// Shortest-path length, or `None` when `u` and `v` are disconnected.
    pub fn graph_distance(&self, u: VertexId, v: VertexId) -> Result<Option<usize>> {
        self.check_vertex(v)?;
        Ok(self.distances_from(u)?[v])
    }

    /// Subgraph induced on `keep` (ids renumbered in the order given).
    pub fn induced(&self, keep: &[VertexId]) -> Result<Graph> {
        let mut index = vec![usize::MAX; self.n()];
        for (i, &v) in keep.iter().enumerate() {
            self.check_vertex(v)?;
            index[v] = i;
        }
        let mut edges = Vec::new();
        for (i, &v) in keep.iter().enumerate() {
            for &w in &self.adjacency[v] {
                let j = index[w];
                if j != usize::MAX && i < j {
                    edges.push((i, j));
                }
            }
        }
        Graph::from_edges(keep.len(), &edges)
    }

    pub fn to_json_value(&self) -> GraphJson {
        GraphJson {
            n: self.n(),
            edges: self.edges().into_iter().map(|(u, v)| [u, v]).collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_json_value()).expect("graph serialization cannot fail")
    }

    pub fn from_json_value(value: &GraphJson) -> Result<Graph> {
        let edges: Vec<_> = value.edges.iter().map(|e| (e[0], e[1])).collect();
        Graph::from_edges(value.n, &edges)
    }

    pub fn from_json(text: &str) -> Result<Graph> {
        let value: GraphJson = serde_json::from_str(text)?;
        Graph::from_json_value(&value)
    }
}

/// A finite core `W` together with the ambient set needed to evaluate rates
/// and updates at every core vertex. The ambient set is the 2-neighborhood
/// `N_W^+`, so both `N_v` and `N_v^+` of every core vertex lie inside it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    core: Vec<VertexId>,
    ambient: Vec<VertexId>,
    in_core: Vec<bool>,
    in_ambient: Vec<bool>,
}

impl Window {
    pub fn new(g: &Graph, core: &[VertexId]) -> Result<Self> {
        let mut core = core.to_vec();
        core.sort_unstable();
        core.dedup();
        let ambient = g.two_neighborhood_of_set(&core)?;
        let mut in_core = vec![false; g.n()];
        let mut in_ambient = vec![false; g.n()];
        for &v in &core {
            in_core[v] = true;
        }
        for &v in &ambient {
            in_ambient[v] = true;
        }
        Ok(Window {
            core,
            ambient,
            in_core,
            in_ambient,
        })
    }

    /// Window whose core is the whole graph.
    pub fn full(g: &Graph) -> Self {
        let all: Vec<_> = g.vertices().collect();
        Window::new(g, &all).expect("all vertices are valid")
    }

    pub fn core(&self) -> &[VertexId] {
        &self.core
    }

    pub fn ambient(&self) -> &[VertexId] {
        &self.ambient
    }

    pub fn in_core(&self, v: VertexId) -> bool {
        self.in_core.get(v).copied().unwrap_or(false)
    }

    pub fn in_ambient(&self, v: VertexId) -> bool {
        self.in_ambient.get(v).copied().unwrap_or(false)
    }

    pub fn contains_all(&self, set: &[VertexId]) -> bool {
        set.iter().all(|&v| self.in_core(v))
    }
}
