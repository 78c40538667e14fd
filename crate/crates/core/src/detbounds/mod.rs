//! Determinant lemmas around `det(Id - MΓ)`.
//!
//! Exponents `m_e` and protection thresholds `δ_e` live on the edges of the
//! complete graph on `Λ ∪ {ρ}`, indexed like [`PinnedGraph::edges`].

mod resistance;
mod split;

pub use resistance::{
    edge_conductances, effective_resistance, summary_bound, ResistanceNetwork, SummaryOutcome,
    SummaryTerm,
};
pub use split::{collapse, split_graph, summary_split, SplitComparison, SummarySplit, VertexMap};

use crate::error::{invalid, Error, Result};
use crate::graph::{connected_with, PinnedGraph, Vertex};
use crate::linalg::{self, PD_RELATIVE_TOL};
use crate::model::{self, EdgeMatrices, FieldConfig};
use nalgebra::DMatrix;

/// Width of the band around the boundary of the assumption inside which the
/// two evaluation routes are allowed to disagree.
pub const ROUTE_AGREEMENT_BAND: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ExponentAssignment {
    pub m: Vec<f64>,
    /// Protection thresholds; `f64::INFINITY` means unprotected.
    pub delta: Vec<f64>,
}

impl ExponentAssignment {
    pub fn new(m: Vec<f64>, delta: Vec<f64>) -> Result<Self> {
        if m.len() != delta.len() {
            return invalid("m and delta lengths differ");
        }
        if m.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return invalid("exponents must be finite and >= 0");
        }
        if delta.iter().any(|&d| !(d > 0.0)) {
            return invalid("protection thresholds must be > 0");
        }
        Ok(ExponentAssignment { m, delta })
    }

    pub fn unprotected(m: Vec<f64>) -> Result<Self> {
        let k = m.len();
        Self::new(m, vec![f64::INFINITY; k])
    }

    pub fn zeros(graph: &PinnedGraph) -> Self {
        ExponentAssignment { m: vec![0.0; graph.n_edges()], delta: vec![f64::INFINITY; graph.n_edges()] }
    }

    /// Sets `m_e` and `δ_e` on the edge `{a, b}`.
    pub fn with_edge(mut self, graph: &PinnedGraph, a: Vertex, b: Vertex, m: f64, delta: f64) -> Result<Self> {
        let k = graph
            .edge_index(a, b)
            .ok_or_else(|| Error::InvalidArgument(format!("no edge {{{a},{b}}}")))?;
        if !(m >= 0.0) || !(delta > 0.0) {
            return invalid("need m >= 0 and delta > 0");
        }
        self.m[k] = m;
        self.delta[k] = delta;
        Ok(self)
    }

    fn check(&self, graph: &PinnedGraph) -> Result<()> {
        if self.m.len() != graph.n_edges() {
            return invalid(format!(
                "assignment has {} edges, graph has {}",
                self.m.len(),
                graph.n_edges()
            ));
        }
        Ok(())
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.m.len()).filter(|&k| self.m[k] > 0.0).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|&x| x == 0.0)
    }
}

/// Membership in `U`: `B_e < 1 + δ_e` for every edge, strictly.
pub fn in_protected_set(graph: &PinnedGraph, config: &FieldConfig, asg: &ExponentAssignment) -> bool {
    graph
        .edges()
        .iter()
        .zip(&asg.delta)
        .all(|(e, &d)| d == f64::INFINITY || model::edge_b(config, e.plus, e.minus) < 1.0 + d)
}

/// `det(Id - MΓ)`, computed on the support of `M` (the remaining rows of
/// `MΓ` vanish).
pub fn det_id_minus_mg(graph: &PinnedGraph, config: &FieldConfig, asg: &ExponentAssignment) -> Result<f64> {
    asg.check(graph)?;
    if asg.is_zero() {
        return Ok(1.0);
    }
    let em = model::gamma_matrix(graph, config)?;
    Ok(det_from_gamma(&em, asg))
}

fn det_from_gamma(em: &EdgeMatrices, asg: &ExponentAssignment) -> f64 {
    let s = asg.support();
    let k = s.len();
    let a = DMatrix::from_fn(k, k, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - asg.m[s[i]] * em.gamma[(s[i], s[j])]
    });
    a.determinant()
}

/// `F M Q Fᵀ` as an `n×n` matrix.
fn fmqf(graph: &PinnedGraph, config: &FieldConfig, asg: &ExponentAssignment) -> DMatrix<f64> {
    let n = graph.n();
    let mut x = DMatrix::zeros(n, n);
    for k in asg.support() {
        let e = graph.edges()[k];
        let b = model::edge_b(config, e.plus, e.minus);
        let c = asg.m[k] * (config.u_at(e.plus) + config.u_at(e.minus)).exp() / b;
        let (p, q) = (e.plus.site(), e.minus.site());
        if let Some(i) = p {
            x[(i, i)] += c;
        }
        if let Some(j) = q {
            x[(j, j)] += c;
        }
        if let (Some(i), Some(j)) = (p, q) {
            x[(i, j)] -= c;
            x[(j, i)] -= c;
        }
    }
    x
}

/// `det(D - F M Q Fᵀ) / det D`, the vertex-space evaluation.
pub fn det_laplacian_route(graph: &PinnedGraph, config: &FieldConfig, asg: &ExponentAssignment) -> Result<f64> {
    asg.check(graph)?;
    let d = model::laplacian(graph, &config.u)?;
    let x = fmqf(graph, config, asg);
    // Normalize by the Cholesky factor to keep the ratio well scaled.
    let chol = d
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericFailure("D(u) is not positive definite".into()))?;
    let l_inv = chol.l().try_inverse().ok_or_else(|| Error::NumericFailure("singular factor".into()))?;
    let n = graph.n();
    let a = DMatrix::identity(n, n) - &l_inv * x * l_inv.transpose();
    Ok(a.determinant())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    /// `√M Γ √M < Id`.
    pub edge_route: bool,
    /// `D > F M Q Fᵀ`.
    pub vertex_route: bool,
    /// Smallest eigenvalue of `Id - √M Γ √M`.
    pub edge_margin: f64,
    /// Smallest eigenvalue of `D - F M Q Fᵀ` divided by `max|D_ij|`.
    pub vertex_margin: f64,
    /// `W_e ≥ m_e` everywhere and `{e : W_e > m_e}` connects `Λ ∪ {ρ}`.
    pub sufficient: bool,
}

impl AssumptionCheck {
    pub fn holds(&self) -> bool {
        self.edge_route && self.vertex_route
    }

    /// The routes agree, or the configuration sits within
    /// [`ROUTE_AGREEMENT_BAND`] of the boundary.
    pub fn routes_agree(&self) -> bool {
        self.edge_route == self.vertex_route || self.edge_margin.abs() <= ROUTE_AGREEMENT_BAND
    }
}

pub fn sufficient_condition(graph: &PinnedGraph, asg: &ExponentAssignment) -> bool {
    let edges = graph.edges();
    if edges.iter().zip(&asg.m).any(|(e, &m)| e.weight < m) {
        return false;
    }
    let strict = |k: usize| edges[k].weight > asg.m[k];
    connected_with(
        graph.n(),
        |i, j| graph.edge_index(Vertex::Site(i), Vertex::Site(j)).is_some_and(strict),
        |i| graph.edge_index(Vertex::Site(i), Vertex::Root).is_some_and(strict),
    )
}

pub fn assumption_holds(graph: &PinnedGraph, config: &FieldConfig, asg: &ExponentAssignment) -> Result<AssumptionCheck> {
    asg.check(graph)?;
    let sufficient = sufficient_condition(graph, asg);
    let s = asg.support();
    let edge_margin = if s.is_empty() {
        1.0
    } else {
        let em = model::gamma_matrix(graph, config)?;
        let k = s.len();
        let a = DMatrix::from_fn(k, k, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id - (asg.m[s[i]] * asg.m[s[j]]).sqrt() * em.gamma[(s[i], s[j])]
        });
        linalg::sym_eigenvalues(&a)[0]
    };
    let d = model::laplacian(graph, &config.u)?;
    let scale = linalg::max_abs(&d);
    let diff = &d - fmqf(graph, config, asg);
    let vertex_margin = linalg::sym_eigenvalues(&diff)[0] / scale;
    Ok(AssumptionCheck {
        edge_route: edge_margin > PD_RELATIVE_TOL,
        vertex_route: vertex_margin > PD_RELATIVE_TOL,
        edge_margin,
        vertex_margin,
        sufficient,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityOutcome {
    pub det: f64,
    pub det_prime: f64,
    pub primed_assumption: bool,
    /// `det ≥ det' > 0`.
    pub holds: bool,
}

/// Compares `(W, m)` against `(W', m')` with `m ≤ m'` and `W ≥ W'`.
pub fn monotonicity_check(
    graph: &PinnedGraph,
    graph_prime: &PinnedGraph,
    config: &FieldConfig,
    asg: &ExponentAssignment,
    asg_prime: &ExponentAssignment,
) -> Result<MonotonicityOutcome> {
    if graph.n() != graph_prime.n() {
        return invalid("graphs must share the vertex set");
    }
    asg.check(graph)?;
    asg_prime.check(graph_prime)?;
    let w = graph.edge_weights();
    let wp = graph_prime.edge_weights();
    if w.iter().zip(&wp).any(|(a, b)| a < b) {
        return invalid("need W >= W' on every edge");
    }
    if asg.m.iter().zip(&asg_prime.m).any(|(a, b)| a > b) {
        return invalid("need m <= m' on every edge");
    }
    let primed_assumption = assumption_holds(graph_prime, config, asg_prime)?.holds();
    let det = det_id_minus_mg(graph, config, asg)?;
    let det_prime = det_id_minus_mg(graph_prime, config, asg_prime)?;
    let tol = 1e-12 * det.abs().max(1.0);
    Ok(MonotonicityOutcome {
        det,
        det_prime,
        primed_assumption,
        holds: det_prime > 0.0 && det >= det_prime - tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationOutcome {
    pub det: f64,
    pub factors: Vec<f64>,
    /// `|det - Π factors| / max(|det|, tiny)`.
    pub relative_residual: f64,
    /// For components carrying exactly one nonzero exponent: `1 - m Γ_ee`.
    pub single_edge_values: Vec<Option<f64>>,
}

/// Restriction of `graph` to `Λ_l ∪ {ρ}`, plus the map from its edges back.
fn restrict(graph: &PinnedGraph, sites: &[usize]) -> Result<(PinnedGraph, Vec<usize>)> {
    let k = sites.len();
    let mut w = vec![0.0; k * k];
    for (a, &i) in sites.iter().enumerate() {
        for (b, &j) in sites.iter().enumerate() {
            if a != b {
                w[a * k + b] = graph.weight(i, j);
            }
        }
    }
    let h: Vec<f64> = sites.iter().map(|&i| graph.pinning()[i]).collect();
    let sub = PinnedGraph::from_flat(k, w, h)?;
    let lift = |v: Vertex| match v {
        Vertex::Site(a) => Vertex::Site(sites[a]),
        Vertex::Root => Vertex::Root,
    };
    let back = sub
        .edges()
        .iter()
        .map(|e| graph.edge_index(lift(e.plus), lift(e.minus)).expect("edge exists"))
        .collect();
    Ok((sub, back))
}

/// Checks `det(Id - MΓ) = Π_l det(Id - M_l Γ_l)` over the components of
/// `Λ` left after removing `ρ`. Exponents on edges joining different
/// components must vanish.
pub fn factorization_check(
    graph: &PinnedGraph,
    config: &FieldConfig,
    asg: &ExponentAssignment,
    components: &[Vec<usize>],
) -> Result<FactorizationOutcome> {
    asg.check(graph)?;
    let mut given: Vec<Vec<usize>> = components
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort_unstable();
            c
        })
        .collect();
    given.sort();
    let mut actual = graph.internal_components();
    actual.sort();
    if given != actual {
        return invalid("component list does not match the graph without rho");
    }
    let mut comp_of = vec![0; graph.n()];
    for (l, c) in actual.iter().enumerate() {
        for &i in c {
            comp_of[i] = l;
        }
    }
    for (e, &m) in graph.edges().iter().zip(&asg.m) {
        if let (Some(i), Some(j)) = (e.plus.site(), e.minus.site()) {
            if comp_of[i] != comp_of[j] && m != 0.0 {
                return invalid(format!("exponent on edge {{{i},{j}}} joins two components"));
            }
        }
    }
    let det = det_id_minus_mg(graph, config, asg)?;
    let mut factors = Vec::new();
    let mut single_edge_values = Vec::new();
    for c in &actual {
        let (sub, back) = restrict(graph, c)?;
        let m: Vec<f64> = back.iter().map(|&k| asg.m[k]).collect();
        let delta: Vec<f64> = back.iter().map(|&k| asg.delta[k]).collect();
        let sub_asg = ExponentAssignment::new(m, delta)?;
        let sub_cfg = FieldConfig::new(
            c.iter().map(|&i| config.u[i]).collect(),
            c.iter().map(|&i| config.s[i]).collect(),
        );
        factors.push(det_id_minus_mg(&sub, &sub_cfg, &sub_asg)?);
        let support = sub_asg.support();
        single_edge_values.push(if support.len() == 1 {
            let em = model::gamma_matrix(&sub, &sub_cfg)?;
            let k = support[0];
            Some(1.0 - sub_asg.m[k] * em.gamma[(k, k)])
        } else {
            None
        });
    }
    let product: f64 = factors.iter().product();
    let relative_residual = (det - product).abs() / det.abs().max(f64::MIN_POSITIVE);
    Ok(FactorizationOutcome { det, factors, relative_residual, single_edge_values })
}
