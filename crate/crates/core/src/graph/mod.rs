//! Pinned weighted graphs and their edge incidence structure.
//!
//! A [`PinnedGraph`] is the complete graph on `Λ ∪ {ρ}` where `Λ = {0..n}`
//! and `ρ` is the pinning vertex. Internal weights `W_ij` and pinning
//! strengths `h_i = W_iρ` are nonnegative; edges of weight zero are still
//! edges of the complete graph (they matter for `Γ` and for exponent
//! assignments) but do not count for connectivity.

mod descriptor;
mod families;
mod lattice;

pub use descriptor::{ChainPinningDesc, ExtraEdge, GraphDescriptor};
pub use families::{
    build_chain, build_effective_chain, build_hierarchical, hierarchical_pinning_bound,
    hierarchical_weight_bound, ChainPinning,
};
pub use lattice::{
    box_pinning,
    binary_to_box, box_to_binary, build_long_range_box, default_weight_profile,
    hierarchical_distance, ShellSum, WeightProfile,
};

use crate::error::{invalid, Result};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// A vertex of `Λ ∪ {ρ}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Vertex {
    Site(usize),
    Root,
}

impl Vertex {
    pub fn site(self) -> Option<usize> {
        match self {
            Vertex::Site(i) => Some(i),
            Vertex::Root => None,
        }
    }
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Site(i) => write!(f, "{i}"),
            Vertex::Root => f.write_str("rho"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum VertexRepr {
    Site(usize),
    Name(String),
}

impl Serialize for Vertex {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Vertex::Site(i) => VertexRepr::Site(*i),
            Vertex::Root => VertexRepr::Name("rho".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vertex {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match VertexRepr::deserialize(d)? {
            VertexRepr::Site(i) => Ok(Vertex::Site(i)),
            VertexRepr::Name(s) if s == "rho" => Ok(Vertex::Root),
            VertexRepr::Name(s) => Err(serde::de::Error::custom(format!(
                "vertex must be an index or \"rho\", got {s:?}"
            ))),
        }
    }
}

/// An edge with its fixed bookkeeping orientation `plus -> minus`:
/// the lower site index is `plus` and `ρ` is always `minus`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedEdge {
    pub plus: Vertex,
    pub minus: Vertex,
    pub weight: f64,
}

impl OrientedEdge {
    pub fn is_pinning(&self) -> bool {
        self.minus == Vertex::Root
    }

    pub fn contains(&self, v: Vertex) -> bool {
        self.plus == v || self.minus == v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinnedGraph {
    n: usize,
    weights: Vec<f64>,
    pinning: Vec<f64>,
    labels: Vec<String>,
    edges: Vec<OrientedEdge>,
}

impl PinnedGraph {
    /// Builds a graph from a symmetric weight matrix and pinning vector.
    ///
    /// Fails unless the weights are finite, symmetric, nonnegative with zero
    /// diagonal and the positive-weight graph on `Λ ∪ {ρ}` is connected.
    pub fn new(weights: Vec<Vec<f64>>, pinning: Vec<f64>) -> Result<Self> {
        let n = pinning.len();
        if weights.len() != n || weights.iter().any(|row| row.len() != n) {
            return invalid(format!("weight matrix must be {n}x{n}"));
        }
        Self::from_flat(n, weights.concat(), pinning)
    }

    pub fn from_flat(n: usize, weights: Vec<f64>, pinning: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return invalid("graph needs at least one vertex besides rho");
        }
        if weights.len() != n * n || pinning.len() != n {
            return invalid("weight/pinning dimensions do not match");
        }
        for i in 0..n {
            if weights[i * n + i] != 0.0 {
                return invalid(format!("nonzero diagonal weight at vertex {i}"));
            }
            if !(pinning[i] >= 0.0) || !pinning[i].is_finite() {
                return invalid(format!("pinning h_{i} = {} must be finite and >= 0", pinning[i]));
            }
            for j in 0..n {
                let w = weights[i * n + j];
                if !(w >= 0.0) || !w.is_finite() {
                    return invalid(format!("weight W_{i}{j} = {w} must be finite and >= 0"));
                }
                if w != weights[j * n + i] {
                    return invalid(format!("weights not symmetric at ({i},{j})"));
                }
            }
        }
        let mut g = PinnedGraph {
            n,
            weights,
            pinning,
            labels: (0..n).map(|i| i.to_string()).collect(),
            edges: Vec::new(),
        };
        if !g.is_connected() {
            return invalid("positive-weight graph on Λ ∪ {ρ} is not connected");
        }
        g.edges = g.enumerate_edges();
        Ok(g)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Self {
        assert_eq!(labels.len(), self.n);
        self.labels = labels;
        self
    }

    fn enumerate_edges(&self) -> Vec<OrientedEdge> {
        let n = self.n;
        let mut edges = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                edges.push(OrientedEdge {
                    plus: Vertex::Site(i),
                    minus: Vertex::Site(j),
                    weight: self.weights[i * n + j],
                });
            }
        }
        for i in 0..n {
            edges.push(OrientedEdge {
                plus: Vertex::Site(i),
                minus: Vertex::Root,
                weight: self.pinning[i],
            });
        }
        edges
    }

    /// Number of vertices in `Λ` (excluding `ρ`).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.n + j]
    }

    /// Weight of the edge `{a, b}`; `W_iρ = h_i`.
    pub fn weight_between(&self, a: Vertex, b: Vertex) -> f64 {
        match (a, b) {
            (Vertex::Site(i), Vertex::Site(j)) => self.weight(i, j),
            (Vertex::Site(i), Vertex::Root) | (Vertex::Root, Vertex::Site(i)) => self.pinning[i],
            (Vertex::Root, Vertex::Root) => 0.0,
        }
    }

    pub fn weights_flat(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight_rows(&self) -> Vec<Vec<f64>> {
        self.weights.chunks(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn pinning(&self) -> &[f64] {
        &self.pinning
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// All `n(n+1)/2` edges of the complete graph on `Λ ∪ {ρ}`: internal edges
    /// in lexicographic order followed by the pinning edges.
    pub fn edges(&self) -> &[OrientedEdge] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Index of edge `{a, b}` in [`edges`](Self::edges).
    pub fn edge_index(&self, a: Vertex, b: Vertex) -> Option<usize> {
        let n = self.n;
        match (a, b) {
            (Vertex::Site(i), Vertex::Site(j)) if i != j && i < n && j < n => {
                let (i, j) = (i.min(j), i.max(j));
                Some(i * n - i * (i + 1) / 2 + (j - i - 1))
            }
            (Vertex::Site(i), Vertex::Root) | (Vertex::Root, Vertex::Site(i)) if i < n => {
                Some(n * (n - 1) / 2 + i)
            }
            _ => None,
        }
    }

    /// Indices of edges with strictly positive weight (the set `E_+`).
    pub fn positive_edges(&self) -> impl Iterator<Item = usize> + '_ {
        self.edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.weight > 0.0)
            .map(|(k, _)| k)
    }

    /// Largest internal weight, `0` for a single vertex.
    pub fn max_internal_weight(&self) -> f64 {
        self.weights.iter().fold(0.0_f64, |a, &w| a.max(w))
    }

    /// Same vertex set, new weights (validated again).
    pub fn reweighted(&self, weights: Vec<f64>, pinning: Vec<f64>) -> Result<Self> {
        Ok(Self::from_flat(self.n, weights, pinning)?.with_labels(self.labels.clone()))
    }

    /// Weights indexed by edge, in [`edges`](Self::edges) order.
    pub fn edge_weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.weight).collect()
    }

    /// Builds a graph on the same vertex set from per-edge weights.
    pub fn from_edge_weights(n: usize, edge_weights: &[f64]) -> Result<Self> {
        if edge_weights.len() != n * (n + 1) / 2 {
            return invalid("edge weight vector has the wrong length");
        }
        let mut w = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in i + 1..n {
                w[i * n + j] = edge_weights[k];
                w[j * n + i] = edge_weights[k];
                k += 1;
            }
        }
        Self::from_flat(n, w, edge_weights[k..].to_vec())
    }

    fn is_connected(&self) -> bool {
        connected_with(self.n, |i, j| self.weight(i, j) > 0.0, |i| self.pinning[i] > 0.0)
    }

    /// Connected components of `Λ` under positive internal weights, ignoring `ρ`.
    pub fn internal_components(&self) -> Vec<Vec<usize>> {
        let n = self.n;
        let mut comp = vec![usize::MAX; n];
        let mut out = Vec::new();
        for start in 0..n {
            if comp[start] != usize::MAX {
                continue;
            }
            let id = out.len();
            let mut members = vec![start];
            comp[start] = id;
            let mut k = 0;
            while k < members.len() {
                let i = members[k];
                for j in 0..n {
                    if comp[j] == usize::MAX && self.weight(i, j) > 0.0 {
                        comp[j] = id;
                        members.push(j);
                    }
                }
                k += 1;
            }
            members.sort_unstable();
            out.push(members);
        }
        out
    }
}

/// Connectivity of `Λ ∪ {ρ}` given adjacency predicates; `ρ` has index `n`.
pub(crate) fn connected_with(
    n: usize,
    internal: impl Fn(usize, usize) -> bool,
    pinned: impl Fn(usize) -> bool,
) -> bool {
    let mut seen = vec![false; n + 1];
    let mut stack = vec![n];
    seen[n] = true;
    while let Some(v) = stack.pop() {
        for w in 0..n {
            if seen[w] {
                continue;
            }
            let adj = if v == n { pinned(w) } else { internal(v, w) };
            if adj {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen.iter().all(|&s| s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_site() -> PinnedGraph {
        PinnedGraph::new(vec![vec![0.0, 3.0], vec![3.0, 0.0]], vec![1.0, 2.0]).unwrap()
    }

    #[test]
    fn edges_enumerate_complete_graph_with_fixed_orientation() {
        let g = two_site();
        let e = g.edges();
        assert_eq!(e.len(), 3);
        assert_eq!((e[0].plus, e[0].minus, e[0].weight), (Vertex::Site(0), Vertex::Site(1), 3.0));
        assert_eq!((e[1].plus, e[1].minus), (Vertex::Site(0), Vertex::Root));
        assert_eq!((e[2].plus, e[2].minus, e[2].weight), (Vertex::Site(1), Vertex::Root, 2.0));
    }

    #[test]
    fn edge_index_matches_enumeration() {
        let n = 5;
        let mut w = vec![vec![1.0; n]; n];
        for (i, row) in w.iter_mut().enumerate() {
            row[i] = 0.0;
        }
        let g = PinnedGraph::new(w, vec![1.0; n]).unwrap();
        for (k, e) in g.edges().iter().enumerate() {
            assert_eq!(g.edge_index(e.plus, e.minus), Some(k));
            assert_eq!(g.edge_index(e.minus, e.plus), Some(k));
        }
        assert_eq!(g.edge_index(Vertex::Site(2), Vertex::Site(2)), None);
    }

    #[test]
    fn rejects_disconnected_and_asymmetric() {
        let r = PinnedGraph::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![1.0, 0.0]);
        assert!(r.is_err());
        let r = PinnedGraph::new(vec![vec![0.0, 1.0], vec![2.0, 0.0]], vec![1.0, 0.0]);
        assert!(r.is_err());
        let r = PinnedGraph::new(vec![vec![0.0]], vec![0.0]);
        assert!(r.is_err());
    }

    #[test]
    fn vertex_serde_accepts_index_and_rho() {
        let v: Vec<Vertex> = serde_json::from_str("[3, \"rho\"]").unwrap();
        assert_eq!(v, vec![Vertex::Site(3), Vertex::Root]);
        assert_eq!(serde_json::to_string(&v).unwrap(), "[3,\"rho\"]");
        assert!(serde_json::from_str::<Vertex>("\"x\"").is_err());
    }

    #[test]
    fn from_edge_weights_roundtrip() {
        let g = two_site();
        let h = PinnedGraph::from_edge_weights(2, &g.edge_weights()).unwrap();
        assert_eq!(g, h);
    }
}
