//! Finite simple graphs with a fixed edge orientation.
//!
//! The edge list order is the edge indexing and each `(source, target)` pair
//! is the orientation. Every trace convention downstream (incidence matrix,
//! endpoint slots of a metric graph) inherits it.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest vertex count accepted by [`enumerate_connected_graphs`].
pub const ENUMERATION_CAP: usize = 7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("graph needs at least one vertex")]
    Empty,
    #[error("edge {edge}: vertex index {index} out of range for {vertices} vertices")]
    IndexOutOfRange {
        edge: usize,
        index: usize,
        vertices: usize,
    },
    #[error("edge {edge}: loop at vertex {vertex}")]
    LoopEdge { edge: usize, vertex: usize },
    #[error("edge {edge} duplicates edge {first} ({a}, {b})")]
    DuplicateEdge {
        edge: usize,
        first: usize,
        a: usize,
        b: usize,
    },
    #[error("graph is disconnected: vertex {unreachable} is not reachable from vertex 0")]
    Disconnected { unreachable: usize },
    #[error("preset {kind} needs n >= {min}, got {n}")]
    SizeTooSmall {
        kind: &'static str,
        n: usize,
        min: usize,
    },
    #[error("enumeration is capped at {cap} vertices, got {n}")]
    SizeCapExceeded { n: usize, cap: usize },
    #[error("expected {expected} edge lengths, got {got}")]
    LengthCountMismatch { expected: usize, got: usize },
    #[error("edge {edge}: length must be positive and finite, got {length}")]
    NonpositiveLength { edge: usize, length: f64 },
}

/// A connected graph without loops or multiple edges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Result<Self, GraphError> {
        if vertex_count == 0 {
            return Err(GraphError::Empty);
        }
        let mut seen: Vec<Option<usize>> = vec![None; vertex_count * vertex_count];
        for (e, &(s, t)) in edges.iter().enumerate() {
            for index in [s, t] {
                if index >= vertex_count {
                    return Err(GraphError::IndexOutOfRange {
                        edge: e,
                        index,
                        vertices: vertex_count,
                    });
                }
            }
            if s == t {
                return Err(GraphError::LoopEdge { edge: e, vertex: s });
            }
            let (a, b) = (s.min(t), s.max(t));
            let slot = &mut seen[a * vertex_count + b];
            if let Some(first) = *slot {
                return Err(GraphError::DuplicateEdge {
                    edge: e,
                    first,
                    a,
                    b,
                });
            }
            *slot = Some(e);
        }
        let graph = Graph {
            vertex_count,
            edges,
        };
        if let Some(unreachable) = graph.first_unreachable() {
            return Err(GraphError::Disconnected { unreachable });
        }
        Ok(graph)
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count];
        for &(s, t) in &self.edges {
            deg[s] += 1;
            deg[t] += 1;
        }
        deg
    }

    /// Sorted neighbour lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for &(s, t) in &self.edges {
            adj[s].push(t);
            adj[t].push(s);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn adjacency(&self) -> Vec<Vec<bool>> {
        let mut adj = vec![vec![false; self.vertex_count]; self.vertex_count];
        for &(s, t) in &self.edges {
            adj[s][t] = true;
            adj[t][s] = true;
        }
        adj
    }

    pub fn is_complete(&self) -> bool {
        let v = self.vertex_count;
        self.edges.len() == v * (v - 1) / 2
    }

    /// Edge indices incident with each vertex, in edge order.
    pub fn incident_edges(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.vertex_count];
        for (e, &(s, t)) in self.edges.iter().enumerate() {
            inc[s].push(e);
            inc[t].push(e);
        }
        inc
    }

    /// The same graph with edge `e` reversed.
    pub fn with_reversed_edge(&self, e: usize) -> Graph {
        let mut edges = self.edges.clone();
        let (s, t) = edges[e];
        edges[e] = (t, s);
        Graph {
            vertex_count: self.vertex_count,
            edges,
        }
    }

    fn first_unreachable(&self) -> Option<usize> {
        let adj = self.neighbors();
        let mut seen = vec![false; self.vertex_count];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.iter().position(|&s| !s)
    }
}

/// A graph whose edges are intervals `[0, length]`, oriented source to target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricGraph {
    graph: Graph,
    lengths: Vec<f64>,
}

impl MetricGraph {
    pub fn new(graph: Graph, lengths: Vec<f64>) -> Result<Self, GraphError> {
        if lengths.len() != graph.edge_count() {
            return Err(GraphError::LengthCountMismatch {
                expected: graph.edge_count(),
                got: lengths.len(),
            });
        }
        for (edge, &length) in lengths.iter().enumerate() {
            if !(length.is_finite() && length > 0.0) {
                return Err(GraphError::NonpositiveLength { edge, length });
            }
        }
        Ok(MetricGraph { graph, lengths })
    }

    /// Every edge gets the same length.
    pub fn equilateral(graph: Graph, length: f64) -> Result<Self, GraphError> {
        let lengths = vec![length; graph.edge_count()];
        Self::new(graph, lengths)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn edge_count(&self) -> usize {
        self.graph.edge_count()
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn total_length(&self) -> f64 {
        self.lengths.iter().sum()
    }
}

/// Signed vertex-edge incidence matrix (V x E): -1 at the source, +1 at the target.
pub fn incidence_matrix(graph: &Graph) -> DMatrix<i64> {
    let mut inc = DMatrix::zeros(graph.vertex_count(), graph.edge_count());
    for (e, &(s, t)) in graph.edges().iter().enumerate() {
        inc[(s, e)] = -1;
        inc[(t, e)] = 1;
    }
    inc
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PresetKind {
    Path,
    Cycle,
    Complete,
    Star,
    Flower,
}

impl PresetKind {
    pub fn name(self) -> &'static str {
        match self {
            PresetKind::Path => "path",
            PresetKind::Cycle => "cycle",
            PresetKind::Complete => "complete",
            PresetKind::Star => "star",
            PresetKind::Flower => "flower",
        }
    }
}

impl std::str::FromStr for PresetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "path" => Ok(PresetKind::Path),
            "cycle" => Ok(PresetKind::Cycle),
            "complete" => Ok(PresetKind::Complete),
            "star" => Ok(PresetKind::Star),
            "flower" => Ok(PresetKind::Flower),
            other => Err(format!("unknown graph preset '{other}'")),
        }
    }
}

/// Named graph families.
///
/// * `path(n)`: vertices `0..n`, edges `(i, i+1)`.
/// * `cycle(n)`: the path plus `(n-1, 0)`; every vertex has one incoming and one outgoing edge.
/// * `complete(n)`: edges `(i, j)` for `i < j` in lexicographic order.
/// * `star(n)`: `n` leaves around the centre `0`, edges `(0, i)` for `i = 1..=n`.
/// * `flower(n)`: `n` triangles sharing vertex `0` (petal `k` is `0 -> 2k+1 -> 2k+2 -> 0`).
///   Loops are not representable, so triangles stand in for the petals.
pub fn preset_graph(kind: PresetKind, n: usize) -> Result<Graph, GraphError> {
    let min = match kind {
        PresetKind::Cycle | PresetKind::Complete => 3,
        _ => 2,
    };
    if n < min {
        return Err(GraphError::SizeTooSmall {
            kind: kind.name(),
            n,
            min,
        });
    }
    let (vertices, edges) = match kind {
        PresetKind::Path => (n, (0..n - 1).map(|i| (i, i + 1)).collect()),
        PresetKind::Cycle => {
            let mut edges: Vec<_> = (0..n - 1).map(|i| (i, i + 1)).collect();
            edges.push((n - 1, 0));
            (n, edges)
        }
        PresetKind::Complete => {
            let mut edges = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    edges.push((i, j));
                }
            }
            (n, edges)
        }
        PresetKind::Star => (n + 1, (1..=n).map(|i| (0, i)).collect()),
        PresetKind::Flower => {
            let mut edges = Vec::with_capacity(3 * n);
            for k in 0..n {
                let (a, b) = (2 * k + 1, 2 * k + 2);
                edges.extend([(0, a), (a, b), (b, 0)]);
            }
            (2 * n + 1, edges)
        }
    };
    Graph::new(vertices, edges)
}

/// Iterator over all connected simple graphs on `n` labelled vertices.
///
/// Edge subsets are visited in increasing bitmask order over the
/// lexicographic pair list `(0,1), (0,2), ..., (n-2,n-1)`; each edge is
/// oriented from the smaller to the larger label.
#[derive(Debug, Clone)]
pub struct ConnectedGraphs {
    n: usize,
    pairs: Vec<(usize, usize)>,
    next_mask: u64,
    end_mask: u64,
}

impl Iterator for ConnectedGraphs {
    type Item = Graph;

    fn next(&mut self) -> Option<Graph> {
        while self.next_mask < self.end_mask {
            let mask = self.next_mask;
            self.next_mask += 1;
            if !mask_is_connected(self.n, &self.pairs, mask) {
                continue;
            }
            let edges = self
                .pairs
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, &p)| p)
                .collect();
            return Some(Graph {
                vertex_count: self.n,
                edges,
            });
        }
        None
    }
}

pub fn enumerate_connected_graphs(n: usize) -> Result<ConnectedGraphs, GraphError> {
    if n > ENUMERATION_CAP {
        return Err(GraphError::SizeCapExceeded {
            n,
            cap: ENUMERATION_CAP,
        });
    }
    if n == 0 {
        return Err(GraphError::Empty);
    }
    let mut pairs = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j));
        }
    }
    let end_mask = 1u64 << pairs.len();
    Ok(ConnectedGraphs {
        n,
        pairs,
        next_mask: 0,
        end_mask,
    })
}

fn mask_is_connected(n: usize, pairs: &[(usize, usize)], mask: u64) -> bool {
    let mut reached = 1u32;
    loop {
        let before = reached;
        for (i, &(a, b)) in pairs.iter().enumerate() {
            if mask >> i & 1 == 1 && (reached >> a & 1 == 1 || reached >> b & 1 == 1) {
                reached |= 1 << a | 1 << b;
            }
        }
        if reached == before {
            break;
        }
    }
    reached.count_ones() as usize == n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p3() -> Graph {
        Graph::new(3, vec![(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn builds_path_and_single_edge() {
        let g = p3();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let k2 = Graph::new(2, vec![(0, 1)]).unwrap();
        assert_eq!(k2.edge_count(), 1);
        assert!(k2.is_complete());
    }

    #[test]
    fn rejects_invalid_edge_lists() {
        assert!(matches!(
            Graph::new(3, vec![(0, 1), (0, 1)]),
            Err(GraphError::DuplicateEdge { edge: 1, first: 0, .. })
        ));
        assert!(matches!(
            Graph::new(3, vec![(0, 1), (1, 0)]),
            Err(GraphError::DuplicateEdge { .. })
        ));
        assert!(matches!(
            Graph::new(2, vec![(1, 1)]),
            Err(GraphError::LoopEdge { edge: 0, vertex: 1 })
        ));
        assert!(matches!(
            Graph::new(2, vec![(0, 2)]),
            Err(GraphError::IndexOutOfRange { index: 2, .. })
        ));
        assert!(matches!(
            Graph::new(4, vec![(0, 1), (2, 3)]),
            Err(GraphError::Disconnected { unreachable: 2 })
        ));
    }

    #[test]
    fn incidence_of_path_and_edge() {
        let inc = incidence_matrix(&p3());
        assert_eq!(inc, DMatrix::from_row_slice(3, 2, &[-1, 0, 1, -1, 0, 1]));
        let k2 = Graph::new(2, vec![(0, 1)]).unwrap();
        assert_eq!(incidence_matrix(&k2), DMatrix::from_row_slice(2, 1, &[-1, 1]));
    }

    #[test]
    fn reversing_an_edge_keeps_the_laplacian() {
        let g = preset_graph(PresetKind::Complete, 4).unwrap();
        let inc = incidence_matrix(&g);
        for e in 0..g.edge_count() {
            let flipped = incidence_matrix(&g.with_reversed_edge(e));
            assert_eq!(flipped.column(e), -inc.column(e));
            assert_eq!(&flipped * flipped.transpose(), &inc * inc.transpose());
        }
    }

    #[test]
    fn presets() {
        let k4 = preset_graph(PresetKind::Complete, 4).unwrap();
        assert_eq!((k4.vertex_count(), k4.edge_count()), (4, 6));
        let star = preset_graph(PresetKind::Star, 3).unwrap();
        assert_eq!(star.degrees(), vec![3, 1, 1, 1]);
        assert_eq!(
            preset_graph(PresetKind::Cycle, 3).unwrap().adjacency(),
            preset_graph(PresetKind::Complete, 3).unwrap().adjacency()
        );
        let flower = preset_graph(PresetKind::Flower, 2).unwrap();
        assert_eq!(flower.degrees(), vec![4, 2, 2, 2, 2]);
        assert!(matches!(
            preset_graph(PresetKind::Cycle, 2),
            Err(GraphError::SizeTooSmall { min: 3, .. })
        ));
        assert!(preset_graph(PresetKind::Path, 1).is_err());
    }

    #[test]
    fn enumeration_counts() {
        let counts: Vec<usize> = (1..=5)
            .map(|n| enumerate_connected_graphs(n).unwrap().count())
            .collect();
        assert_eq!(counts, vec![1, 1, 4, 38, 728]);
        assert!(matches!(
            enumerate_connected_graphs(8),
            Err(GraphError::SizeCapExceeded { n: 8, cap: 7 })
        ));
    }

    #[test]
    fn metric_graph_validation() {
        assert!(MetricGraph::new(p3(), vec![1.0]).is_err());
        assert!(MetricGraph::new(p3(), vec![1.0, 0.0]).is_err());
        let m = MetricGraph::new(p3(), vec![1.0, 2.5]).unwrap();
        assert_eq!(m.total_length(), 3.5);
    }
}
