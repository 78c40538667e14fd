//! Effective resistances and the product lower bound on `det(Id - MΓ)`.

use super::ExponentAssignment;
use crate::error::{invalid, Error, Result};
use crate::graph::{OrientedEdge, PinnedGraph, Vertex};
use crate::model::{self, FieldConfig};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Electrical network on sites `0..n` and optionally `ρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResistanceNetwork {
    n: usize,
    edges: Vec<OrientedEdge>,
}

impl ResistanceNetwork {
    /// `edges` carry conductances in their `weight` field.
    pub fn new(n: usize, edges: Vec<OrientedEdge>) -> Result<Self> {
        for e in &edges {
            let ok = |v: Vertex| v.site().is_none_or(|i| i < n);
            if !ok(e.plus) || !ok(e.minus) || e.plus == e.minus {
                return invalid(format!("bad network edge {{{},{}}}", e.plus, e.minus));
            }
            if !(e.weight >= 0.0) || !e.weight.is_finite() {
                return invalid("conductances must be finite and >= 0");
            }
        }
        Ok(ResistanceNetwork { n, edges })
    }

    /// Network on the edges of `graph` with the given per-edge conductances.
    pub fn from_graph(graph: &PinnedGraph, conductances: &[f64]) -> Result<Self> {
        if conductances.len() != graph.n_edges() {
            return invalid("one conductance per edge required");
        }
        let edges = graph
            .edges()
            .iter()
            .zip(conductances)
            .map(|(e, &c)| OrientedEdge { weight: c, ..*e })
            .collect();
        Self::new(graph.n(), edges)
    }

    /// Keeps only the edges selected by `keep`.
    pub fn restricted(&self, keep: impl Fn(&OrientedEdge) -> bool) -> Self {
        ResistanceNetwork { n: self.n, edges: self.edges.iter().filter(|e| keep(e)).copied().collect() }
    }

    pub fn edges(&self) -> &[OrientedEdge] {
        &self.edges
    }

    /// Node index with `ρ` mapped to `n`.
    fn node(&self, v: Vertex) -> usize {
        v.site().unwrap_or(self.n)
    }

    /// Nodes reachable from `x` through positive conductances.
    fn component(&self, x: usize) -> Vec<bool> {
        let mut seen = vec![false; self.n + 1];
        seen[x] = true;
        let mut stack = vec![x];
        while let Some(a) = stack.pop() {
            for e in self.edges.iter().filter(|e| e.weight > 0.0) {
                let (p, q) = (self.node(e.plus), self.node(e.minus));
                let other = if p == a { q } else if q == a { p } else { continue };
                if !seen[other] {
                    seen[other] = true;
                    stack.push(other);
                }
            }
        }
        seen
    }

    /// `(1_x - 1_y)ᵀ L⁻¹ (1_x - 1_y)` on the component of `x`, grounded at
    /// `ρ` when it belongs to the component and at `y` otherwise.
    pub fn resistance(&self, x: Vertex, y: Vertex) -> Result<f64> {
        let (xi, yi) = (self.node(x), self.node(y));
        if xi > self.n || yi > self.n {
            return invalid("vertex outside the network");
        }
        if xi == yi {
            return Ok(0.0);
        }
        let comp = self.component(xi);
        if !comp[yi] {
            return invalid(format!("{x} and {y} are not connected"));
        }
        let ground = if comp[self.n] { self.n } else { yi };
        let nodes: Vec<usize> = (0..=self.n).filter(|&a| comp[a] && a != ground).collect();
        let mut pos = vec![usize::MAX; self.n + 1];
        for (k, &a) in nodes.iter().enumerate() {
            pos[a] = k;
        }
        let k = nodes.len();
        let mut lap = DMatrix::zeros(k, k);
        for e in self.edges.iter().filter(|e| e.weight > 0.0) {
            let (p, q) = (self.node(e.plus), self.node(e.minus));
            if !comp[p] {
                continue;
            }
            let (pp, qq) = (pos[p], pos[q]);
            if pp != usize::MAX {
                lap[(pp, pp)] += e.weight;
            }
            if qq != usize::MAX {
                lap[(qq, qq)] += e.weight;
            }
            if pp != usize::MAX && qq != usize::MAX {
                lap[(pp, qq)] -= e.weight;
                lap[(qq, pp)] -= e.weight;
            }
        }
        let mut b = DVector::zeros(k);
        if pos[xi] != usize::MAX {
            b[pos[xi]] += 1.0;
        }
        if pos[yi] != usize::MAX {
            b[pos[yi]] -= 1.0;
        }
        let chol = lap
            .cholesky()
            .ok_or_else(|| Error::NumericFailure("grounded Laplacian is not positive definite".into()))?;
        let z = chol.solve(&b);
        Ok(b.dot(&z))
    }
}

pub fn effective_resistance(net: &ResistanceNetwork, x: Vertex, y: Vertex) -> Result<f64> {
    net.resistance(x, y)
}

/// `c_e = W_e e^{u_{e+}+u_{e-}} B_{anchor} / e^{u_{i0}+u_{j0}}` for every edge.
pub fn edge_conductances(graph: &PinnedGraph, config: &FieldConfig, anchor: (Vertex, Vertex)) -> Result<Vec<f64>> {
    let (a, b) = anchor;
    if graph.edge_index(a, b).is_none() {
        return invalid(format!("anchor {{{a},{b}}} is not an edge"));
    }
    let q = (config.u_at(a) + config.u_at(b)).exp() / model::edge_b(config, a, b);
    Ok(graph
        .edges()
        .iter()
        .map(|e| e.weight * (config.u_at(e.plus) + config.u_at(e.minus)).exp() / q)
        .collect())
}

/// One factor of the product bound: exponent `m` on `edge`, and a connected
/// set of positive-weight edges whose vertices contain both endpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryTerm {
    pub edge: [Vertex; 2],
    pub m: f64,
    pub support: Vec<[Vertex; 2]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryOutcome {
    /// `Π_l (1 - m_l R_l)`.
    pub bound: f64,
    pub factors: Vec<f64>,
    pub resistances: Vec<f64>,
    /// Terms with `m_l R_l ≥ 1`; the bound carries no guarantee if nonempty.
    pub violations: Vec<String>,
}

impl SummaryOutcome {
    pub fn valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl SummaryTerm {
    fn vertices(&self) -> Vec<Vertex> {
        let mut vs: Vec<Vertex> = self.support.iter().flatten().copied().collect();
        vs.sort_by_key(|v| v.site().unwrap_or(usize::MAX));
        vs.dedup();
        vs
    }
}

/// Validates the terms and returns the support edge indices of each one.
pub(crate) fn validate_terms(graph: &PinnedGraph, terms: &[SummaryTerm]) -> Result<Vec<Vec<usize>>> {
    let mut used = vec![false; graph.n_edges()];
    let mut anchors = vec![false; graph.n_edges()];
    let mut out = Vec::with_capacity(terms.len());
    for (l, t) in terms.iter().enumerate() {
        let [x, y] = t.edge;
        let k = graph
            .edge_index(x, y)
            .ok_or_else(|| Error::InvalidArgument(format!("term {l}: {{{x},{y}}} is not an edge")))?;
        if std::mem::replace(&mut anchors[k], true) {
            return invalid(format!("term {l}: edge {{{x},{y}}} listed twice"));
        }
        if !(t.m > 0.0) || !t.m.is_finite() {
            return invalid(format!("term {l}: exponent must be positive"));
        }
        let mut idx = Vec::with_capacity(t.support.len());
        for &[a, b] in &t.support {
            let k = graph
                .edge_index(a, b)
                .ok_or_else(|| Error::InvalidArgument(format!("term {l}: {{{a},{b}}} is not an edge")))?;
            if graph.edges()[k].weight <= 0.0 {
                return invalid(format!("term {l}: support edge {{{a},{b}}} has zero weight"));
            }
            if std::mem::replace(&mut used[k], true) {
                return invalid(format!("term {l}: support edge {{{a},{b}}} is shared"));
            }
            idx.push(k);
        }
        let vs = t.vertices();
        if !vs.contains(&x) || !vs.contains(&y) {
            return invalid(format!("term {l}: endpoints must lie in the support"));
        }
        let net = ResistanceNetwork::from_graph(graph, &vec![1.0; graph.n_edges()])?
            .restricted(|e| t.support.iter().any(|&[a, b]| (e.plus, e.minus) == (a, b) || (e.plus, e.minus) == (b, a)));
        if vs.iter().any(|&v| net.resistance(vs[0], v).is_err()) {
            return invalid(format!("term {l}: support is not connected"));
        }
        out.push(idx);
    }
    Ok(out)
}

impl SummaryOutcome {
    /// The exponent assignment `m_{e_l}` on the term edges, unprotected.
    pub fn assignment(graph: &PinnedGraph, terms: &[SummaryTerm]) -> Result<ExponentAssignment> {
        terms.iter().try_fold(ExponentAssignment::zeros(graph), |a, t| {
            a.with_edge(graph, t.edge[0], t.edge[1], t.m, f64::INFINITY)
        })
    }
}

/// `Π_l (1 - m_l R^{G_l}(c, x_l ↔ y_l))` with conductances anchored at each
/// term edge and restricted to its support.
pub fn summary_bound(graph: &PinnedGraph, config: &FieldConfig, terms: &[SummaryTerm]) -> Result<SummaryOutcome> {
    let supports = validate_terms(graph, terms)?;
    let mut factors = Vec::with_capacity(terms.len());
    let mut resistances = Vec::with_capacity(terms.len());
    let mut violations = Vec::new();
    for (l, (t, idx)) in terms.iter().zip(&supports).enumerate() {
        let c = edge_conductances(graph, config, (t.edge[0], t.edge[1]))?;
        let masked: Vec<f64> = (0..c.len()).map(|k| if idx.contains(&k) { c[k] } else { 0.0 }).collect();
        let net = ResistanceNetwork::from_graph(graph, &masked)?;
        let r = net.resistance(t.edge[0], t.edge[1])?;
        if t.m * r >= 1.0 {
            violations.push(format!("term {l}: m R = {} >= 1", t.m * r));
        }
        resistances.push(r);
        factors.push(1.0 - t.m * r);
    }
    Ok(SummaryOutcome { bound: factors.iter().product(), factors, resistances, violations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn e(a: Vertex, b: Vertex, c: f64) -> OrientedEdge {
        OrientedEdge { plus: a, minus: b, weight: c }
    }
    use Vertex::{Root, Site};

    #[test]
    fn textbook_networks() {
        let single = ResistanceNetwork::new(2, vec![e(Site(0), Site(1), 4.0)]).unwrap();
        assert_relative_eq!(single.resistance(Site(0), Site(1)).unwrap(), 0.25);
        let series =
            ResistanceNetwork::new(3, vec![e(Site(0), Site(1), 2.0), e(Site(1), Site(2), 3.0)]).unwrap();
        assert_relative_eq!(series.resistance(Site(0), Site(2)).unwrap(), 5.0 / 6.0, max_relative = 1e-14);
        let tri = ResistanceNetwork::new(
            3,
            vec![e(Site(0), Site(1), 1.0), e(Site(1), Site(2), 1.0), e(Site(0), Site(2), 1.0)],
        )
        .unwrap();
        assert_relative_eq!(tri.resistance(Site(0), Site(1)).unwrap(), 2.0 / 3.0, max_relative = 1e-14);
        let rooted = ResistanceNetwork::new(1, vec![e(Site(0), Root, 5.0)]).unwrap();
        assert_relative_eq!(rooted.resistance(Site(0), Root).unwrap(), 0.2);
        let split = ResistanceNetwork::new(3, vec![e(Site(0), Site(1), 1.0)]).unwrap();
        assert!(split.resistance(Site(0), Site(2)).is_err());
    }

    #[test]
    fn conductances_at_zero_field_are_weights() {
        let g = PinnedGraph::new(vec![vec![0.0, 3.0], vec![3.0, 0.0]], vec![1.0, 2.0]).unwrap();
        let c = edge_conductances(&g, &FieldConfig::zeros(2), (Site(0), Site(1))).unwrap();
        assert_eq!(c, g.edge_weights());
    }

    #[test]
    fn anchor_diagonal_equals_resistance() {
        let g = PinnedGraph::new(vec![vec![0.0, 3.0], vec![3.0, 0.0]], vec![1.0, 2.0]).unwrap();
        let cfg = FieldConfig::new(vec![0.4, -0.2], vec![0.3, -0.9]);
        let em = model::gamma_matrix(&g, &cfg).unwrap();
        for (k, edge) in g.edges().iter().enumerate() {
            let c = edge_conductances(&g, &cfg, (edge.plus, edge.minus)).unwrap();
            let r = ResistanceNetwork::from_graph(&g, &c).unwrap().resistance(edge.plus, edge.minus).unwrap();
            assert_relative_eq!(r, em.gamma[(k, k)], max_relative = 1e-12);
        }
    }

    #[test]
    fn single_edge_summary() {
        let g = PinnedGraph::new(vec![vec![0.0, 3.0], vec![3.0, 0.0]], vec![1.0, 2.0]).unwrap();
        let cfg = FieldConfig::new(vec![0.1, 0.3], vec![0.5, 0.2]);
        let t = SummaryTerm { edge: [Site(0), Site(1)], m: 1.0, support: vec![[Site(0), Site(1)]] };
        let out = summary_bound(&g, &cfg, &[t.clone()]).unwrap();
        let c = edge_conductances(&g, &cfg, (Site(0), Site(1))).unwrap();
        assert_relative_eq!(out.bound, 1.0 - 1.0 / c[0], max_relative = 1e-13);
        assert!(out.valid());
        let asg = SummaryOutcome::assignment(&g, &[t]).unwrap();
        assert!(super::super::det_id_minus_mg(&g, &cfg, &asg).unwrap() >= out.bound);
        let bad = SummaryTerm { edge: [Site(0), Site(1)], m: 1.0, support: vec![[Site(0), Root]] };
        assert!(summary_bound(&g, &cfg, &[bad]).is_err());
    }
}
