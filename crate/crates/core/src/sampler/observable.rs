//! Observables of the moment bounds, evaluated on raw field slices.

use crate::error::{invalid, Result};
use crate::graph::{PinnedGraph, Vertex};
use crate::model::{b_value, cosh_m1};
use serde::{Deserialize, Serialize};
use std::fmt;

/// One factor `B_e^m` of a product observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BFactor {
    pub edge: [Vertex; 2],
    pub m: f64,
    #[serde(default)]
    pub protected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Protection {
    #[default]
    None,
    /// Protected factors carry `1{B_e < 1 + δ}` on their own edge.
    PerEdge { delta: f64 },
    /// Protected factors on `{x, y}` carry `Π_{l=x+1}^{y} 1{B_{l-1,l} < 1 + δ_l}`
    /// with `δ_l = l^{-(α-γ-1)}`, chain vertices labelled `1..N` and
    /// vertex `N` equal to `ρ` when it is not a site.
    ChainSchedule { alpha: f64, gamma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObservableSpec {
    /// `(cosh u_i)^m`.
    CoshUPow { vertex: Vertex, m: f64 },
    /// `(cosh(u_a - u_b))^m`.
    CoshUDiffPow { a: Vertex, b: Vertex, m: f64 },
    /// `Π B_e^{m_e}` times the protection indicators.
    BPow {
        factors: Vec<BFactor>,
        #[serde(default)]
        protection: Protection,
    },
    /// `s_i²`.
    SSquared { vertex: Vertex },
}

impl ObservableSpec {
    pub fn cosh_u(vertex: usize, m: f64) -> Self {
        ObservableSpec::CoshUPow { vertex: Vertex::Site(vertex), m }
    }

    pub fn b_pow(a: Vertex, b: Vertex, m: f64) -> Self {
        ObservableSpec::BPow {
            factors: vec![BFactor { edge: [a, b], m, protected: false }],
            protection: Protection::None,
        }
    }

    /// Total exponent, reported in the `m` column.
    pub fn exponent(&self) -> f64 {
        match self {
            ObservableSpec::CoshUPow { m, .. } | ObservableSpec::CoshUDiffPow { m, .. } => *m,
            ObservableSpec::BPow { factors, .. } => factors.iter().map(|f| f.m).sum(),
            ObservableSpec::SSquared { .. } => 2.0,
        }
    }
}

impl fmt::Display for ObservableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObservableSpec::CoshUPow { vertex, m } => write!(f, "cosh(u[{vertex}])^{m}"),
            ObservableSpec::CoshUDiffPow { a, b, m } => write!(f, "cosh(u[{a}]-u[{b}])^{m}"),
            ObservableSpec::BPow { factors, protection } => {
                let parts: Vec<String> = factors
                    .iter()
                    .map(|x| {
                        let p = if x.protected { "*chi" } else { "" };
                        format!("B({},{})^{}{p}", x.edge[0], x.edge[1], x.m)
                    })
                    .collect();
                write!(f, "{}", parts.join("*"))?;
                match protection {
                    Protection::None => Ok(()),
                    Protection::PerEdge { delta } => write!(f, "[delta={delta}]"),
                    Protection::ChainSchedule { alpha, gamma } => write!(f, "[chain alpha={alpha} gamma={gamma}]"),
                }
            }
            ObservableSpec::SSquared { vertex } => write!(f, "s[{vertex}]^2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pair {
    a: Option<usize>,
    b: Option<usize>,
}

impl Pair {
    fn new(a: Vertex, b: Vertex) -> Self {
        Pair { a: a.site(), b: b.site() }
    }

    #[inline]
    fn b(&self, u: &[f64], s: &[f64]) -> f64 {
        let g = |x: Option<usize>, v: &[f64]| x.map_or(0.0, |i| v[i]);
        b_value(g(self.a, u), g(self.b, u), g(self.a, s), g(self.b, s))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    CoshU { i: usize, m: f64 },
    CoshUDiff { a: Option<usize>, b: Option<usize>, m: f64 },
    BPow { factors: Vec<(Pair, f64)>, cuts: Vec<(Pair, f64)> },
    SSquared { i: usize },
}

/// Compiled observable; evaluates on `(u, s)` slices of a fixed graph.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    spec: ObservableSpec,
    kind: Kind,
    /// `(edge index, δ)` for every protection indicator.
    cuts: Vec<(usize, f64)>,
}

fn check_vertex(graph: &PinnedGraph, v: Vertex) -> Result<()> {
    match v {
        Vertex::Site(i) if i >= graph.n() => invalid(format!("vertex {i} outside 0..{}", graph.n())),
        _ => Ok(()),
    }
}

fn check_exponent(m: f64) -> Result<()> {
    if !(m >= 0.0) || !m.is_finite() {
        return invalid(format!("exponent {m} must be finite and >= 0"));
    }
    Ok(())
}

/// Chain label `1..=N` of a vertex; `ρ` is label `n + 1`.
fn chain_label(graph: &PinnedGraph, v: Vertex) -> usize {
    v.site().map_or(graph.n() + 1, |i| i + 1)
}

fn chain_vertex(graph: &PinnedGraph, label: usize) -> Vertex {
    if label <= graph.n() {
        Vertex::Site(label - 1)
    } else {
        Vertex::Root
    }
}

pub fn make_observable(graph: &PinnedGraph, spec: &ObservableSpec) -> Result<Observable> {
    let mut cuts = Vec::new();
    let kind = match spec {
        ObservableSpec::CoshUPow { vertex, m } => {
            check_exponent(*m)?;
            check_vertex(graph, *vertex)?;
            match vertex.site() {
                Some(i) => Kind::CoshU { i, m: *m },
                None => return invalid("cosh(u_rho) is identically 1; use a site"),
            }
        }
        ObservableSpec::CoshUDiffPow { a, b, m } => {
            check_exponent(*m)?;
            check_vertex(graph, *a)?;
            check_vertex(graph, *b)?;
            Kind::CoshUDiff { a: a.site(), b: b.site(), m: *m }
        }
        ObservableSpec::SSquared { vertex } => {
            check_vertex(graph, *vertex)?;
            match vertex.site() {
                Some(i) => Kind::SSquared { i },
                None => return invalid("s_rho is identically 0; use a site"),
            }
        }
        ObservableSpec::BPow { factors, protection } => {
            let mut fs = Vec::with_capacity(factors.len());
            let mut cut_pairs = Vec::new();
            for f in factors {
                check_exponent(f.m)?;
                let [a, b] = f.edge;
                check_vertex(graph, a)?;
                check_vertex(graph, b)?;
                let k = graph
                    .edge_index(a, b)
                    .ok_or_else(|| crate::Error::InvalidArgument(format!("{{{a},{b}}} is not an edge")))?;
                fs.push((Pair::new(a, b), f.m));
                if !f.protected {
                    continue;
                }
                match *protection {
                    Protection::None => return invalid("protected factor without a protection rule"),
                    Protection::PerEdge { delta } => {
                        if !(delta > 0.0) {
                            return invalid("protection delta must be > 0");
                        }
                        cuts.push((k, delta));
                        cut_pairs.push((Pair::new(a, b), delta));
                    }
                    Protection::ChainSchedule { alpha, gamma } => {
                        if !(alpha - gamma > 1.0) {
                            return invalid("chain schedule needs alpha - gamma > 1");
                        }
                        let (x, y) = ordered_labels(graph, a, b);
                        for l in x + 1..=y {
                            let (p, q) = (chain_vertex(graph, l - 1), chain_vertex(graph, l));
                            let delta = (l as f64).powf(-(alpha - gamma - 1.0));
                            let k = graph.edge_index(p, q).expect("chain edge exists");
                            cuts.push((k, delta));
                            cut_pairs.push((Pair::new(p, q), delta));
                        }
                    }
                }
            }
            if let Protection::ChainSchedule { .. } = protection {
                check_disjoint_intervals(graph, factors)?;
            }
            Kind::BPow { factors: fs, cuts: cut_pairs }
        }
    };
    Ok(Observable { spec: spec.clone(), kind, cuts })
}

fn ordered_labels(graph: &PinnedGraph, a: Vertex, b: Vertex) -> (usize, usize) {
    let (x, y) = (chain_label(graph, a), chain_label(graph, b));
    (x.min(y), x.max(y))
}

/// The open intervals `(x_e, y_e)` of distinct factors must not intersect.
fn check_disjoint_intervals(graph: &PinnedGraph, factors: &[BFactor]) -> Result<()> {
    let mut iv: Vec<(usize, usize)> = factors.iter().map(|f| ordered_labels(graph, f.edge[0], f.edge[1])).collect();
    iv.sort_unstable();
    for w in iv.windows(2) {
        // sorted by left end, (x1, y1) and (x2, y2) share a point iff x2 < y1
        if w[1].0 < w[0].1 {
            return invalid(format!(
                "intervals ({}, {}) and ({}, {}) overlap",
                w[0].0, w[0].1, w[1].0, w[1].1
            ));
        }
    }
    Ok(())
}

impl Observable {
    pub fn spec(&self) -> &ObservableSpec {
        &self.spec
    }

    pub fn name(&self) -> String {
        self.spec.to_string()
    }

    pub fn needs_s(&self) -> bool {
        matches!(self.kind, Kind::BPow { .. } | Kind::SSquared { .. })
    }

    /// Protection indicators as `(edge index, δ)`.
    pub fn cuts(&self) -> &[(usize, f64)] {
        &self.cuts
    }

    pub fn eval(&self, u: &[f64], s: &[f64]) -> f64 {
        match &self.kind {
            Kind::CoshU { i, m } => pow(u[*i].cosh(), *m),
            Kind::CoshUDiff { a, b, m } => {
                let g = |x: &Option<usize>| x.map_or(0.0, |i| u[i]);
                pow(1.0 + cosh_m1(g(a) - g(b)), *m)
            }
            Kind::SSquared { i } => s[*i] * s[*i],
            Kind::BPow { factors, cuts } => {
                if cuts.iter().any(|(p, d)| p.b(u, s) >= 1.0 + d) {
                    return 0.0;
                }
                factors.iter().map(|(p, m)| pow(p.b(u, s), *m)).product()
            }
        }
    }

    /// Value with `s` integrated out exactly, available for `s`-free kinds.
    pub fn eval_u(&self, u: &[f64]) -> Option<f64> {
        (!self.needs_s()).then(|| self.eval(u, &[]))
    }
}

#[inline]
fn pow(x: f64, m: f64) -> f64 {
    if m == 0.0 {
        1.0
    } else if m == 1.0 {
        x
    } else if m == 2.0 {
        x * x
    } else {
        x.powf(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Vertex::{Root, Site};

    fn chain(n: usize) -> PinnedGraph {
        crate::graph::build_chain(n, 4.0, 1.0, &crate::graph::ChainPinning::P2, &[]).unwrap()
    }

    #[test]
    fn trivial_values() {
        let g = chain(4);
        let o = make_observable(&g, &ObservableSpec::cosh_u(0, 0.0)).unwrap();
        assert_eq!(o.eval(&[0.7, 1.0, -2.0], &[0.0; 3]), 1.0);
        let o = make_observable(&g, &ObservableSpec::b_pow(Site(0), Site(1), 3.0)).unwrap();
        assert_eq!(o.eval(&[0.0; 3], &[0.0; 3]), 1.0);
        assert!(o.needs_s());
    }

    #[test]
    fn protection_is_an_indicator() {
        let g = chain(4);
        let spec = ObservableSpec::BPow {
            factors: vec![
                BFactor { edge: [Site(0), Site(1)], m: 2.0, protected: true },
                BFactor { edge: [Site(2), Root], m: 1.0, protected: true },
            ],
            protection: Protection::PerEdge { delta: 0.5 },
        };
        let o = make_observable(&g, &spec).unwrap();
        let plain = make_observable(
            &g,
            &ObservableSpec::BPow {
                factors: vec![
                    BFactor { edge: [Site(0), Site(1)], m: 2.0, protected: false },
                    BFactor { edge: [Site(2), Root], m: 1.0, protected: false },
                ],
                protection: Protection::None,
            },
        )
        .unwrap();
        let (u, s) = ([0.1, 0.0, 0.2], [0.3, 0.1, 0.0]);
        assert!(o.eval(&u, &s) > 0.0);
        assert_eq!(o.eval(&u, &s), plain.eval(&u, &s));
        let (u, s) = ([0.1, 0.0, 2.0], [0.3, 0.1, 0.0]);
        assert_eq!(o.eval(&u, &s), 0.0);
    }

    #[test]
    fn chain_schedule_intervals() {
        let g = chain(6);
        let spec = |a: Vertex, b: Vertex, c: Vertex, d: Vertex| ObservableSpec::BPow {
            factors: vec![
                BFactor { edge: [a, b], m: 1.0, protected: true },
                BFactor { edge: [c, d], m: 1.0, protected: false },
            ],
            protection: Protection::ChainSchedule { alpha: 4.0, gamma: 0.0 },
        };
        // labels (1,3) and (3,4): disjoint open intervals
        let o = make_observable(&g, &spec(Site(0), Site(2), Site(2), Site(3))).unwrap();
        assert_eq!(o.cuts().len(), 2);
        assert_eq!(o.cuts()[0].1, 0.125);
        assert_eq!(o.cuts()[1].1, 1.0 / 27.0);
        // labels (1,4) and (2,3) overlap
        assert!(make_observable(&g, &spec(Site(0), Site(3), Site(1), Site(2))).is_err());
        // the last chain edge ends at rho for P2
        let o = make_observable(&g, &spec(Site(3), Root, Site(0), Site(1))).unwrap();
        assert_eq!(o.cuts().len(), 2);
    }

    #[test]
    fn rejects_bad_specs() {
        let g = chain(3);
        assert!(make_observable(&g, &ObservableSpec::cosh_u(5, 1.0)).is_err());
        assert!(make_observable(&g, &ObservableSpec::cosh_u(0, -1.0)).is_err());
        let spec = ObservableSpec::BPow {
            factors: vec![BFactor { edge: [Site(0), Site(1)], m: 1.0, protected: true }],
            protection: Protection::None,
        };
        assert!(make_observable(&g, &spec).is_err());
    }

    #[test]
    fn spec_json_roundtrip() {
        let spec = ObservableSpec::BPow {
            factors: vec![BFactor { edge: [Site(0), Root], m: 2.0, protected: false }],
            protection: Protection::None,
        };
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<ObservableSpec>(&json).unwrap(), spec);
        let parsed: ObservableSpec = serde_json::from_str(r#"{"kind":"cosh_u_pow","vertex":0,"m":2}"#).unwrap();
        assert_eq!(parsed, ObservableSpec::cosh_u(0, 2.0));
    }
}
