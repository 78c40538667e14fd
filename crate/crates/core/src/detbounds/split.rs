//! Vertex splitting: comparing `(G, W, m)` with a graph `G'` that maps onto it.

use super::resistance::{validate_terms, SummaryTerm};
use super::{det_id_minus_mg, fmqf, ExponentAssignment};
use crate::error::{invalid, Result};
use crate::graph::{PinnedGraph, Vertex};
use crate::linalg;
use crate::model::{self, FieldConfig};
use nalgebra::DMatrix;

/// Surjection `k : Λ' → Λ` on sites; `ρ` maps to `ρ`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexMap {
    k: Vec<usize>,
    n: usize,
}

impl VertexMap {
    pub fn new(k: Vec<usize>, n: usize) -> Result<Self> {
        let mut hit = vec![false; n];
        for &j in &k {
            if j >= n {
                return invalid(format!("image {j} outside 0..{n}"));
            }
            hit[j] = true;
        }
        if hit.iter().any(|h| !h) {
            return invalid("vertex map is not surjective");
        }
        Ok(VertexMap { k, n })
    }

    pub fn identity(n: usize) -> Self {
        VertexMap { k: (0..n).collect(), n }
    }

    pub fn apply(&self, v: Vertex) -> Vertex {
        match v {
            Vertex::Site(i) => Vertex::Site(self.k[i]),
            Vertex::Root => Vertex::Root,
        }
    }

    pub fn source_len(&self) -> usize {
        self.k.len()
    }

    pub fn target_len(&self) -> usize {
        self.n
    }

    /// Pulls a field on `Λ` back to `Λ'`.
    pub fn pull_back(&self, config: &FieldConfig) -> FieldConfig {
        FieldConfig::new(
            self.k.iter().map(|&j| config.u[j]).collect(),
            self.k.iter().map(|&j| config.s[j]).collect(),
        )
    }

    /// `K ∈ {0,1}^{Λ×Λ'}`.
    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.k.len(), |j, i| if self.k[i] == j { 1.0 } else { 0.0 })
    }
}

/// Sums weights and exponents of `G'` over preimages; edges collapsing to a
/// single vertex are dropped.
pub fn collapse(graph_prime: &PinnedGraph, m_prime: &[f64], map: &VertexMap) -> Result<(PinnedGraph, Vec<f64>)> {
    let (w, m) = collapsed_sums(graph_prime, m_prime, map)?;
    let g = PinnedGraph::from_edge_weights(map.target_len(), &w)?;
    Ok((g, m))
}

fn collapsed_sums(graph_prime: &PinnedGraph, m_prime: &[f64], map: &VertexMap) -> Result<(Vec<f64>, Vec<f64>)> {
    if map.source_len() != graph_prime.n() || m_prime.len() != graph_prime.n_edges() {
        return invalid("vertex map or exponents do not match G'");
    }
    let n = map.target_len();
    let edges = n * (n + 1) / 2;
    let index = |a: Vertex, b: Vertex| -> Option<usize> {
        match (a, b) {
            (Vertex::Site(i), Vertex::Site(j)) if i != j => {
                let (i, j) = (i.min(j), i.max(j));
                Some(i * n - i * (i + 1) / 2 + (j - i - 1))
            }
            (Vertex::Site(i), Vertex::Root) | (Vertex::Root, Vertex::Site(i)) => Some(n * (n - 1) / 2 + i),
            _ => None,
        }
    };
    let mut w = vec![0.0; edges];
    let mut m = vec![0.0; edges];
    for (e, &mp) in graph_prime.edges().iter().zip(m_prime) {
        if let Some(k) = index(map.apply(e.plus), map.apply(e.minus)) {
            w[k] += e.weight;
            m[k] += mp;
        }
    }
    Ok((w, m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitComparison {
    pub det: f64,
    pub det_prime: f64,
    /// Largest eigenvalue of `√M' Γ' √M'`; the comparison applies when `< 1`.
    pub primed_spectral_radius: f64,
    /// `max|K D' Kᵀ - D| / max|D|`.
    pub residual_laplacian: f64,
    /// `max|K F'M'Q'F'ᵀ Kᵀ - F M Q Fᵀ| / max(max|F M Q Fᵀ|, max|D|)`.
    pub residual_mq: f64,
}

impl SplitComparison {
    /// `det(Id - MΓ) ≥ det(Id - M'Γ')` up to rounding.
    pub fn inequality_holds(&self) -> bool {
        self.det >= self.det_prime - 1e-12 * self.det.abs().max(1.0)
    }
}

/// Compares `(G, m)` with `(G', m')` at `config` and its pull-back. The
/// splitting sums must reproduce `W` and `m` to `1e-12` relative.
pub fn split_graph(
    graph: &PinnedGraph,
    asg: &ExponentAssignment,
    graph_prime: &PinnedGraph,
    asg_prime: &ExponentAssignment,
    map: &VertexMap,
    config: &FieldConfig,
) -> Result<SplitComparison> {
    if map.target_len() != graph.n() {
        return invalid("vertex map target does not match G");
    }
    let (w, m) = collapsed_sums(graph_prime, &asg_prime.m, map)?;
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    for (k, e) in graph.edges().iter().enumerate() {
        if !close(w[k], e.weight) || !close(m[k], asg.m[k]) {
            return invalid(format!("splitting sums do not match on edge {{{},{}}}", e.plus, e.minus));
        }
    }
    let config_prime = map.pull_back(config);
    let det = det_id_minus_mg(graph, config, asg)?;
    let det_prime = det_id_minus_mg(graph_prime, &config_prime, asg_prime)?;

    let kmat = map.matrix();
    let d = model::laplacian(graph, &config.u)?;
    let d_prime = model::laplacian(graph_prime, &config_prime.u)?;
    let scale = linalg::max_abs(&d);
    let residual_laplacian = linalg::max_abs(&(&kmat * d_prime * kmat.transpose() - &d)) / scale;
    let x = fmqf(graph, config, asg);
    let x_prime = fmqf(graph_prime, &config_prime, asg_prime);
    let residual_mq =
        linalg::max_abs(&(&kmat * x_prime * kmat.transpose() - &x)) / linalg::max_abs(&x).max(scale);

    let s = asg_prime.support();
    let primed_spectral_radius = if s.is_empty() {
        0.0
    } else {
        let em = model::gamma_matrix(graph_prime, &config_prime)?;
        let a = DMatrix::from_fn(s.len(), s.len(), |i, j| {
            (asg_prime.m[s[i]] * asg_prime.m[s[j]]).sqrt() * em.gamma[(s[i], s[j])]
        });
        *linalg::sym_eigenvalues(&a).last().expect("nonempty")
    };
    Ok(SplitComparison { det, det_prime, primed_spectral_radius, residual_laplacian, residual_mq })
}

/// The split used to prove the product bound: edges outside every support
/// are dropped, `ε = 1e-8 · min_{h_i > 0} h_i` is added to every pinning,
/// and each support gets its own copy of its vertices.
#[derive(Debug, Clone)]
pub struct SummarySplit {
    /// `G` with non-support edges removed and pinnings raised by `ε`.
    pub graph_hat: PinnedGraph,
    pub asg_hat: ExponentAssignment,
    pub graph_prime: PinnedGraph,
    pub asg_prime: ExponentAssignment,
    pub map: VertexMap,
    /// Index in `graph_prime.edges()` of each term's copied edge.
    pub term_edges: Vec<usize>,
    pub epsilon: f64,
}

pub fn summary_split(graph: &PinnedGraph, terms: &[SummaryTerm]) -> Result<SummarySplit> {
    let supports = validate_terms(graph, terms)?;
    let n = graph.n();
    let h_min = graph.pinning().iter().copied().filter(|&h| h > 0.0).fold(f64::INFINITY, f64::min);
    let epsilon = 1e-8 * h_min;

    // Ĝ: support edges only, pinning + ε.
    let mut w_hat = vec![0.0; graph.n_edges()];
    for idx in &supports {
        for &k in idx {
            w_hat[k] = graph.edges()[k].weight;
        }
    }
    let first_pin = n * (n - 1) / 2;
    for i in 0..n {
        w_hat[first_pin + i] = graph.pinning()[i] + epsilon;
    }
    let graph_hat = PinnedGraph::from_edge_weights(n, &w_hat)?;
    let asg_hat = super::resistance::SummaryOutcome::assignment(graph, terms)?;

    // Copies i^l for the sites of each support, then untouched sites.
    let mut k = Vec::new();
    let mut copy: Vec<Vec<Option<usize>>> = Vec::with_capacity(terms.len());
    let mut covered = vec![0usize; n];
    for idx in &supports {
        let mut local = vec![None; n];
        for &e in idx {
            let edge = graph.edges()[e];
            for v in [edge.plus, edge.minus] {
                if let Some(i) = v.site() {
                    if local[i].is_none() {
                        local[i] = Some(k.len());
                        k.push(i);
                        covered[i] += 1;
                    }
                }
            }
        }
        copy.push(local);
    }
    let mut lone = vec![None; n];
    for i in 0..n {
        if covered[i] == 0 {
            lone[i] = Some(k.len());
            k.push(i);
        }
    }
    let np = k.len();
    let mut wp = vec![0.0; np * np];
    let mut hp = vec![0.0; np];
    for (l, idx) in supports.iter().enumerate() {
        for &e in idx {
            let edge = graph.edges()[e];
            match (edge.plus.site(), edge.minus.site()) {
                (Some(i), Some(j)) => {
                    let (a, b) = (copy[l][i].expect("copied"), copy[l][j].expect("copied"));
                    wp[a * np + b] = edge.weight;
                    wp[b * np + a] = edge.weight;
                }
                _ => {}
            }
        }
    }
    for i in 0..n {
        let h = w_hat[first_pin + i];
        if covered[i] == 0 {
            hp[lone[i].expect("lone copy")] = h;
            continue;
        }
        let owner = supports.iter().position(|idx| idx.contains(&(first_pin + i)));
        let share = epsilon / covered[i] as f64;
        for (l, local) in copy.iter().enumerate() {
            if let Some(a) = local[i] {
                hp[a] = match owner {
                    Some(o) if o == l => h - epsilon + share,
                    Some(_) => share,
                    None => h / covered[i] as f64,
                };
            }
        }
    }
    let graph_prime = PinnedGraph::from_flat(np, wp, hp)?;
    let mut asg_prime = ExponentAssignment::zeros(&graph_prime);
    let mut term_edges = Vec::with_capacity(terms.len());
    for (l, t) in terms.iter().enumerate() {
        let lift = |v: Vertex| match v {
            Vertex::Site(i) => Vertex::Site(copy[l][i].expect("endpoint copied")),
            Vertex::Root => Vertex::Root,
        };
        let (a, b) = (lift(t.edge[0]), lift(t.edge[1]));
        asg_prime = asg_prime.with_edge(&graph_prime, a, b, t.m, f64::INFINITY)?;
        term_edges.push(graph_prime.edge_index(a, b).expect("edge exists"));
    }
    Ok(SummarySplit {
        graph_hat,
        asg_hat,
        graph_prime,
        asg_prime,
        map: VertexMap::new(k, n)?,
        term_edges,
        epsilon,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detbounds::summary_bound;
    use Vertex::{Root, Site};

    fn path3() -> PinnedGraph {
        PinnedGraph::new(
            vec![vec![0.0, 4.0, 1.0], vec![4.0, 0.0, 5.0], vec![1.0, 5.0, 0.0]],
            vec![2.0, 0.0, 3.0],
        )
        .unwrap()
    }

    #[test]
    fn identity_map_gives_equal_determinants() {
        let g = path3();
        let cfg = FieldConfig::new(vec![0.1, -0.3, 0.2], vec![0.4, 0.0, -0.5]);
        let a = ExponentAssignment::unprotected(vec![1.0, 0.5, 0.0, 0.3, 0.0, 1.0]).unwrap();
        let out = split_graph(&g, &a, &g, &a, &VertexMap::identity(3), &cfg).unwrap();
        assert_eq!(out.det, out.det_prime);
        assert_eq!(out.residual_laplacian, 0.0);
    }

    #[test]
    fn split_one_vertex() {
        // Vertex 1 of the path splits into 1 and 3; edge {0,1} goes to copy 1,
        // edge {1,2} is shared.
        let g = path3();
        let gp = PinnedGraph::new(
            vec![
                vec![0.0, 4.0, 1.0, 0.0],
                vec![4.0, 0.0, 2.0, 0.0],
                vec![1.0, 2.0, 0.0, 3.0],
                vec![0.0, 0.0, 3.0, 0.0],
            ],
            vec![2.0, 0.0, 3.0, 0.0],
        )
        .unwrap();
        let map = VertexMap::new(vec![0, 1, 2, 1], 3).unwrap();
        let (back, _) = collapse(&gp, &vec![0.0; gp.n_edges()], &map).unwrap();
        assert_eq!(back.edge_weights(), g.edge_weights());
        let cfg = FieldConfig::new(vec![0.1, -0.3, 0.2], vec![0.4, 0.0, -0.5]);
        let a = ExponentAssignment::zeros(&g).with_edge(&g, Site(0), Site(1), 2.0, f64::INFINITY).unwrap();
        let ap = ExponentAssignment::zeros(&gp).with_edge(&gp, Site(0), Site(1), 2.0, f64::INFINITY).unwrap();
        let out = split_graph(&g, &a, &gp, &ap, &map, &cfg).unwrap();
        assert!(out.primed_spectral_radius < 1.0);
        assert!(out.inequality_holds(), "{out:?}");
        assert!(out.residual_laplacian <= 1e-12 && out.residual_mq <= 1e-12);
        let wrong = ExponentAssignment::zeros(&gp);
        assert!(split_graph(&g, &a, &gp, &wrong, &map, &cfg).is_err());
    }

    #[test]
    fn summary_split_chain_of_inequalities() {
        let g = path3();
        let cfg = FieldConfig::new(vec![0.1, -0.3, 0.2], vec![0.4, 0.0, -0.5]);
        let terms = [
            SummaryTerm { edge: [Site(0), Site(2)], m: 0.5, support: vec![[Site(0), Site(1)], [Site(1), Site(2)]] },
            SummaryTerm { edge: [Site(2), Root], m: 1.0, support: vec![[Site(2), Root]] },
        ];
        let sp = summary_split(&g, &terms).unwrap();
        assert_eq!(sp.graph_prime.n(), 4);
        let cmp = split_graph(&sp.graph_hat, &sp.asg_hat, &sp.graph_prime, &sp.asg_prime, &sp.map, &cfg).unwrap();
        assert!(cmp.inequality_holds());
        let bound = summary_bound(&g, &cfg, &terms).unwrap();
        assert!(bound.valid());
        assert!(cmp.det_prime >= bound.bound - 1e-12);
        let det = det_id_minus_mg(&g, &cfg, &sp.asg_hat).unwrap();
        assert!(det >= bound.bound);
    }
}
