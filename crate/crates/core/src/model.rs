//! The H^{2|2} measure in horospherical coordinates.
//!
//! With `u_ρ = s_ρ = 0`, the measure on `R^Λ × R^Λ` has density
//!
//! ```text
//! exp(-Σ_{e∈E+} W_e (B_e - 1)) · det D(u) · Π_i e^{-u_i} / (2π)
//! ```
//!
//! where `B_ij = cosh(u_i - u_j) + ½ (s_i - s_j)² e^{u_i + u_j}` and `D(u)` is
//! the weighted Laplacian with conductances `W_ij e^{u_i + u_j}` including the
//! pinning edges. The `s`-dependence is exactly the Gaussian `exp(-½ sᵀ D s)`.

use crate::error::{Error, Result};
use crate::graph::{PinnedGraph, Vertex};
use crate::linalg;
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

/// Real fields `u, s` on `Λ`; both vanish at `ρ` implicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    pub u: Vec<f64>,
    pub s: Vec<f64>,
}

impl FieldConfig {
    pub fn new(u: Vec<f64>, s: Vec<f64>) -> Self {
        assert_eq!(u.len(), s.len(), "u and s must have equal length");
        FieldConfig { u, s }
    }

    pub fn zeros(n: usize) -> Self {
        FieldConfig { u: vec![0.0; n], s: vec![0.0; n] }
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn u_at(&self, v: Vertex) -> f64 {
        v.site().map_or(0.0, |i| self.u[i])
    }

    pub fn s_at(&self, v: Vertex) -> f64 {
        v.site().map_or(0.0, |i| self.s[i])
    }

    fn check(&self, graph: &PinnedGraph) -> Result<()> {
        if self.u.len() != graph.n() || self.s.len() != graph.n() {
            return Err(Error::InvalidArgument(format!(
                "field has {} sites, graph has {}",
                self.u.len(),
                graph.n()
            )));
        }
        if self.u.iter().chain(&self.s).any(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument("field entries must be finite".into()));
        }
        Ok(())
    }
}

/// `B_ab` for raw field values.
#[inline]
pub fn b_value(ua: f64, ub: f64, sa: f64, sb: f64) -> f64 {
    let ds = sa - sb;
    (ua - ub).cosh() + 0.5 * ds * ds * (ua + ub).exp()
}

/// `B_ab = cosh(u_a - u_b) + ½ (s_a - s_b)² e^{u_a + u_b}`, `ρ` allowed.
pub fn edge_b(config: &FieldConfig, a: Vertex, b: Vertex) -> f64 {
    b_value(config.u_at(a), config.u_at(b), config.s_at(a), config.s_at(b))
}

/// Writes `D(u)` (row-major) into `out`; no connectivity check.
pub fn laplacian_into(graph: &PinnedGraph, u: &[f64], out: &mut [f64]) {
    let n = graph.n();
    let eu: Vec<f64> = u.iter().map(|x| x.exp()).collect();
    raw_laplacian_into(n, graph.weights_flat(), graph.pinning(), &eu, out);
}

fn raw_laplacian_into(n: usize, weights: &[f64], pinning: &[f64], eu: &[f64], out: &mut [f64]) {
    out.fill(0.0);
    for i in 0..n {
        let mut diag = pinning[i] * eu[i];
        for j in 0..n {
            let w = weights[i * n + j];
            if j != i && w != 0.0 {
                let c = w * eu[i] * eu[j];
                out[i * n + j] = -c;
                diag += c;
            }
        }
        out[i * n + i] = diag;
    }
}

/// Weighted Laplacian from raw parts, without any validation. Useful for
/// negative tests on graphs that violate connectivity.
pub fn raw_laplacian(n: usize, weights: &[f64], pinning: &[f64], u: &[f64]) -> DMatrix<f64> {
    let eu: Vec<f64> = u.iter().map(|x| x.exp()).collect();
    let mut out = vec![0.0; n * n];
    raw_laplacian_into(n, weights, pinning, &eu, &mut out);
    linalg::to_dmatrix(&out, n)
}

/// `D(u)`: off-diagonal `-W_ij e^{u_i+u_j}`, diagonal
/// `Σ_k W_ik e^{u_i+u_k} + h_i e^{u_i}`.
pub fn laplacian(graph: &PinnedGraph, u: &[f64]) -> Result<DMatrix<f64>> {
    if u.len() != graph.n() {
        return Err(Error::InvalidArgument("u has the wrong length".into()));
    }
    let n = graph.n();
    let mut out = vec![0.0; n * n];
    laplacian_into(graph, u, &mut out);
    Ok(linalg::to_dmatrix(&out, n))
}

/// `log det D(u)` via Cholesky in log-space.
pub fn log_det_laplacian(graph: &PinnedGraph, u: &[f64]) -> Result<f64> {
    let n = graph.n();
    let mut d = vec![0.0; n * n];
    laplacian_into(graph, u, &mut d);
    let mut work = vec![0.0; n * n];
    linalg::logdet_spd(&d, n, &mut work)
        .ok_or_else(|| Error::NumericFailure("D(u) is not positive definite".into()))
}

/// `Σ_{e∈E+} W_e (cosh(u_{e+} - u_{e-}) - 1)`.
pub fn u_interaction(graph: &PinnedGraph, u: &[f64]) -> f64 {
    graph
        .edges()
        .iter()
        .filter(|e| e.weight > 0.0)
        .map(|e| {
            let du = u_of(u, e.plus) - u_of(u, e.minus);
            e.weight * cosh_m1(du)
        })
        .sum()
}

/// `cosh(x) - 1` without cancellation for small `x`.
#[inline]
pub fn cosh_m1(x: f64) -> f64 {
    let h = (0.5 * x).sinh();
    2.0 * h * h
}

#[inline]
fn u_of(u: &[f64], v: Vertex) -> f64 {
    v.site().map_or(0.0, |i| u[i])
}

/// Log of the joint density of `(u, s)`.
pub fn log_density(graph: &PinnedGraph, config: &FieldConfig) -> Result<f64> {
    config.check(graph)?;
    let n = graph.n() as f64;
    let action: f64 = graph
        .edges()
        .iter()
        .filter(|e| e.weight > 0.0)
        .map(|e| {
            let ds = config.s_at(e.plus) - config.s_at(e.minus);
            let du = config.u_at(e.plus) - config.u_at(e.minus);
            let sum = config.u_at(e.plus) + config.u_at(e.minus);
            e.weight * (cosh_m1(du) + 0.5 * ds * ds * sum.exp())
        })
        .sum();
    let logdet = log_det_laplacian(graph, &config.u)?;
    Ok(-action + logdet - config.u.iter().sum::<f64>() - n * (2.0 * PI).ln())
}

/// Log of the `u`-marginal, obtained by integrating the Gaussian in `s`:
/// `-Σ W_e (cosh Δu - 1) + ½ log det D - Σ u_i - (n/2) log 2π`.
pub fn u_marginal_log_density(graph: &PinnedGraph, u: &[f64]) -> Result<f64> {
    if u.len() != graph.n() || u.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("u has the wrong length or is not finite".into()));
    }
    let n = graph.n() as f64;
    let logdet = log_det_laplacian(graph, u)?;
    Ok(-u_interaction(graph, u) + 0.5 * logdet - u.iter().sum::<f64>() - 0.5 * n * (2.0 * PI).ln())
}

/// Per-edge diagonals and the edge matrix `Γ = √Q Fᵀ D⁻¹ F √Q`,
/// indexed like [`PinnedGraph::edges`].
#[derive(Debug, Clone)]
pub struct EdgeMatrices {
    /// `Q_e = e^{u_{e+} + u_{e-}} / B_e`.
    pub q: Vec<f64>,
    /// `𝒲_e = W_e e^{u_{e+} + u_{e-}}`.
    pub calw: Vec<f64>,
    pub b: Vec<f64>,
    pub gamma: DMatrix<f64>,
    pub d_inv: DMatrix<f64>,
}

/// Inverse of `D(u)` through its Cholesky factor.
pub fn laplacian_inverse(graph: &PinnedGraph, u: &[f64]) -> Result<DMatrix<f64>> {
    let d = laplacian(graph, u)?;
    d.cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::NumericFailure("D(u) is singular".into()))
}

/// `(1_a - 1_b)ᵀ X (1_c - 1_d)` with `1_ρ = 0`.
pub(crate) fn incidence_form(x: &DMatrix<f64>, a: Vertex, b: Vertex, c: Vertex, d: Vertex) -> f64 {
    let entry = |p: Vertex, q: Vertex| match (p, q) {
        (Vertex::Site(i), Vertex::Site(j)) => x[(i, j)],
        _ => 0.0,
    };
    entry(a, c) - entry(a, d) - entry(b, c) + entry(b, d)
}

pub fn gamma_matrix(graph: &PinnedGraph, config: &FieldConfig) -> Result<EdgeMatrices> {
    config.check(graph)?;
    let d_inv = laplacian_inverse(graph, &config.u)?;
    let edges = graph.edges();
    let m = edges.len();
    let mut q = Vec::with_capacity(m);
    let mut calw = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for e in edges {
        let eu = (config.u_at(e.plus) + config.u_at(e.minus)).exp();
        let be = edge_b(config, e.plus, e.minus);
        b.push(be);
        q.push(eu / be);
        calw.push(e.weight * eu);
    }
    let mut gamma = DMatrix::zeros(m, m);
    for (k, e) in edges.iter().enumerate() {
        for (l, f) in edges.iter().enumerate().skip(k) {
            let v = (q[k] * q[l]).sqrt() * incidence_form(&d_inv, e.plus, e.minus, f.plus, f.minus);
            gamma[(k, l)] = v;
            gamma[(l, k)] = v;
        }
    }
    Ok(EdgeMatrices { q, calw, b, gamma, d_inv })
}

/// Exact draw of `s` from the Gaussian with precision matrix `D(u)`.
pub fn sample_s_given_u<R: Rng + ?Sized>(graph: &PinnedGraph, u: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let n = graph.n();
    let mut l = vec![0.0; n * n];
    laplacian_into(graph, u, &mut l);
    if !linalg::cholesky_in_place(&mut l, n) {
        return Err(Error::NumericFailure("Cholesky of D(u) failed".into()));
    }
    let mut s: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    linalg::solve_upper_transposed(&l, n, &mut s);
    Ok(s)
}
