//! Deterministic tensor-product quadrature for graphs with one or two sites
//! (joint in `(u, s)`) and up to three sites (`u`-marginal).
//!
//! At each `u` node the `s` integral is taken in whitened coordinates
//! `s = L⁻ᵀ z`, `D(u) = L Lᵀ`, with the joint density evaluated explicitly
//! and the Jacobian `det D^{-1/2}` applied. Protection indicators are slabs
//! `|u_a - u_b| < arccosh(1+δ)` in `u` and `|s_a - s_b| < r(u)` in `s`, so the
//! integration domains are convex polygons; they are cut into pieces on which
//! the integrand is smooth.

use crate::detbounds::ExponentAssignment;
use crate::error::{invalid, Error, Result};
use crate::exec::{map_indexed, CompensatedSum, Execution};
use crate::graph::{PinnedGraph, Vertex};
use crate::linalg;
use crate::model::cosh_m1;
use crate::sampler::Observable;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    /// Trapezoid rule; the coarse estimate reuses every other node.
    #[default]
    NestedTrapezoid,
    /// Gauss–Legendre; the coarse estimate is a second pass at half the order.
    GaussLegendre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureSpec {
    /// Truncation `L` of each whitened axis; the `u` grid is also clipped to `|u_i| < L`.
    pub half_width: f64,
    /// Intervals (trapezoid) or nodes (Gauss–Legendre) across a full `u` axis.
    pub points_per_axis: usize,
    /// Same for the whitened `s` axes.
    pub s_points_per_axis: usize,
    pub rule: QuadratureRule,
    /// Integrate `u = L₀⁻ᵀ v` over whitened `v`, `D(0) = L₀L₀ᵀ`; otherwise
    /// `u` is integrated on `[-L, L]ⁿ` directly.
    pub whiten_u: bool,
    pub execution: Execution,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            half_width: 10.0,
            points_per_axis: 160,
            s_points_per_axis: 64,
            rule: QuadratureRule::NestedTrapezoid,
            whiten_u: true,
            execution: Execution::Auto,
        }
    }
}

/// Results whose halving indicator exceeds this fraction of the value are flagged.
pub const FLAG_RELATIVE: f64 = 1e-3;

impl QuadratureSpec {
    fn validate(&self) -> Result<()> {
        if !(self.half_width >= 6.0) || !self.half_width.is_finite() {
            return invalid(format!("half_width must be >= 6, got {}", self.half_width));
        }
        if self.points_per_axis < 64 || self.s_points_per_axis < 64 {
            return invalid("points per axis must be >= 64");
        }
        Ok(())
    }

    fn halved(&self) -> Self {
        QuadratureSpec {
            points_per_axis: self.points_per_axis / 2,
            s_points_per_axis: self.s_points_per_axis / 2,
            ..*self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureResult {
    pub value: f64,
    /// `|value(points) - value(points/2)|`.
    pub error_indicator: f64,
    /// Raw integral of the density over the truncated window.
    pub normalization: f64,
    pub flagged: bool,
}

/// Linear change of variables `u = T v` for the `u` grid.
#[derive(Debug, Clone, Copy)]
struct UGrid {
    n: usize,
    t: [f64; 9],
    jacobian: f64,
}

impl UGrid {
    fn new(graph: &PinnedGraph, spec: &QuadratureSpec) -> Result<Self> {
        let n = graph.n();
        let mut t = [0.0; 9];
        if spec.whiten_u {
            let mut l = vec![0.0; n * n];
            crate::model::laplacian_into(graph, &vec![0.0; n], &mut l);
            if !linalg::cholesky_in_place(&mut l, n) {
                return Err(Error::NumericFailure("D(0) is not positive definite".into()));
            }
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                linalg::solve_upper_transposed(&l, n, &mut e);
                for i in 0..n {
                    t[i * n + j] = e[i];
                }
            }
        } else {
            for i in 0..n {
                t[i * n + i] = 1.0;
            }
        }
        let jacobian = linalg::to_dmatrix(&t[..n * n], n).determinant().abs();
        Ok(UGrid { n, t, jacobian })
    }

    fn map(&self, v: &[f64]) -> [f64; 3] {
        let n = self.n;
        let mut u = [0.0; 3];
        for i in 0..n {
            u[i] = (0..n).map(|j| self.t[i * n + j] * v[j]).sum();
        }
        u
    }

    /// Coefficients on `v` of the linear form `k · u`.
    fn pull(&self, k: &[f64]) -> [f64; 2] {
        let n = self.n;
        let mut a = [0.0; 2];
        for j in 0..n.min(2) {
            a[j] = (0..n).map(|i| k[i] * self.t[i * n + j]).sum();
        }
        a
    }
}

// ---------------------------------------------------------------------------
// one-dimensional rules

struct Rules {
    rule: QuadratureRule,
    /// Gauss–Legendre nodes and weights on [-1, 1], indexed by order.
    gl: Vec<(Vec<f64>, Vec<f64>)>,
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (1.0, 0.0);
            for j in 1..=n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = ((2.0 * jf - 1.0) * z * p2 - (jf - 1.0) * p3) / jf;
            }
            pp = nf * (z * p1 - p2) / (z * z - 1.0);
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

impl Rules {
    fn new(rule: QuadratureRule, max_n: usize) -> Self {
        let gl = match rule {
            QuadratureRule::GaussLegendre => (0..=max_n).map(gauss_legendre).collect(),
            QuadratureRule::NestedTrapezoid => Vec::new(),
        };
        Rules { rule, gl }
    }

    /// Share of `points` for a piece of length `len` out of `total`.
    fn count(&self, len: f64, total: f64, points: usize) -> usize {
        let n = ((points as f64) * len / total).ceil() as usize;
        let n = n.clamp(16, points.max(16));
        n + (n & 1)
    }

    /// Calls `f(x, w_fine, w_coarse)` for each node on `[p, q]`.
    fn for_each(&self, p: f64, q: f64, n: usize, mut f: impl FnMut(f64, f64, f64)) {
        match self.rule {
            QuadratureRule::NestedTrapezoid => {
                let h = (q - p) / n as f64;
                for k in 0..=n {
                    let end = k == 0 || k == n;
                    let wf = if end { 0.5 * h } else { h };
                    let wc = if k % 2 == 1 {
                        0.0
                    } else if end {
                        h
                    } else {
                        2.0 * h
                    };
                    f(p + k as f64 * h, wf, wc);
                }
            }
            QuadratureRule::GaussLegendre => {
                let (x, w) = &self.gl[n];
                let (c, r) = (0.5 * (p + q), 0.5 * (q - p));
                for (xi, wi) in x.iter().zip(w) {
                    f(c + r * xi, r * wi, 0.0);
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// polygon domains

/// `lo < a·x + b·y < hi`.
#[derive(Debug, Clone, Copy)]
struct Lin {
    a: f64,
    b: f64,
    lo: f64,
    hi: f64,
}

/// `y = c0 + c1 x`.
#[derive(Debug, Clone, Copy)]
struct Line(f64, f64);

impl Line {
    fn at(&self, x: f64) -> f64 {
        self.0 + self.1 * x
    }
}

/// Interval `{x ∈ [-xb, xb] : lo < a x < hi}` for constraints with `b = 0`.
fn interval(cons: &[Lin], xb: f64) -> Option<(f64, f64)> {
    let (mut l, mut h) = (-xb, xb);
    for c in cons {
        if c.a == 0.0 {
            if !(c.lo < 0.0 && 0.0 < c.hi) {
                return None;
            }
            continue;
        }
        let (p, q) = (c.lo / c.a, c.hi / c.a);
        l = l.max(p.min(q));
        h = h.min(p.max(q));
    }
    (h > l).then_some((l, h))
}

fn for_each_1d(cons: &[Lin], xb: f64, points: usize, rules: &Rules, mut f: impl FnMut(f64, f64, f64)) {
    if let Some((p, q)) = interval(cons, xb) {
        let n = rules.count(q - p, 2.0 * xb, points);
        rules.for_each(p, q, n, |x, wf, wc| f(x, wf, wc));
    }
}

/// Nodes of the polygon `[-xb, xb] × [-yb, yb] ∩ {constraints}`.
fn for_each_2d(
    cons: &[Lin],
    xb: f64,
    yb: f64,
    points: (usize, usize),
    rules: &Rules,
    mut f: impl FnMut(f64, f64, f64, f64),
) {
    let (mut xl, mut xh) = (-xb, xb);
    let mut lowers = vec![Line(-yb, 0.0)];
    let mut uppers = vec![Line(yb, 0.0)];
    for c in cons {
        if c.b == 0.0 {
            match interval(std::slice::from_ref(c), xb) {
                Some((p, q)) => {
                    xl = xl.max(p);
                    xh = xh.min(q);
                }
                None => return,
            }
            continue;
        }
        let l1 = Line(c.lo / c.b, -c.a / c.b);
        let l2 = Line(c.hi / c.b, -c.a / c.b);
        if c.b > 0.0 {
            lowers.push(l1);
            uppers.push(l2);
        } else {
            lowers.push(l2);
            uppers.push(l1);
        }
    }
    if xh <= xl {
        return;
    }
    let lo_at = |x: f64| lowers.iter().map(|l| l.at(x)).fold(f64::NEG_INFINITY, f64::max);
    let hi_at = |x: f64| uppers.iter().map(|l| l.at(x)).fold(f64::INFINITY, f64::min);
    let inner = |x: f64, wxf: f64, wxc: f64, f: &mut dyn FnMut(f64, f64, f64, f64)| {
        let (ya, yb2) = (lo_at(x), hi_at(x));
        if yb2 <= ya {
            return;
        }
        let ny = rules.count(yb2 - ya, 2.0 * yb, points.1);
        rules.for_each(ya, yb2, ny, |y, wyf, wyc| f(x, y, wxf * wyf, wxc * wyc));
    };
    if rules.rule == QuadratureRule::NestedTrapezoid {
        // One piece: the kinks of the bounds only matter where the
        // integrand does not vanish, and splitting would cost the
        // spectral accuracy of the trapezoid rule.
        let nx = rules.count(xh - xl, 2.0 * xb, points.0);
        rules.for_each(xl, xh, nx, |x, wxf, wxc| inner(x, wxf, wxc, &mut f));
        return;
    }
    // breakpoints are the polygon vertices: crossings of two lines that
    // are both active on their envelope
    let mut cuts = vec![xl, xh];
    let tagged: Vec<(Line, bool)> =
        lowers.iter().map(|&l| (l, true)).chain(uppers.iter().map(|&l| (l, false))).collect();
    let active = |l: &Line, lower: bool, x: f64| {
        let env = if lower { lo_at(x) } else { hi_at(x) };
        (l.at(x) - env).abs() <= 1e-12 * (1.0 + env.abs())
    };
    for (i, (p, pl)) in tagged.iter().enumerate() {
        for (q, ql) in &tagged[i + 1..] {
            if p.1 != q.1 {
                let x = (q.0 - p.0) / (p.1 - q.1);
                if x > xl && x < xh && active(p, *pl, x) && active(q, *ql, x) {
                    cuts.push(x);
                }
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    for w in cuts.windows(2) {
        let (p, q) = (w[0], w[1]);
        if q - p <= 1e-12 * (xh - xl) {
            continue;
        }
        let mid = 0.5 * (p + q);
        if hi_at(mid) <= lo_at(mid) {
            continue;
        }
        let nx = rules.count(q - p, 2.0 * xb, points.0);
        rules.for_each(p, q, nx, |x, wxf, wxc| inner(x, wxf, wxc, &mut f));
    }
}

// ---------------------------------------------------------------------------
// joint integrals

#[derive(Debug, Clone, Copy)]
struct EdgeTerm {
    a: Option<usize>,
    b: Option<usize>,
    c: f64,
}

impl EdgeTerm {
    fn du(&self, v: &[f64]) -> f64 {
        self.a.map_or(0.0, |i| v[i]) - self.b.map_or(0.0, |i| v[i])
    }

    fn su(&self, v: &[f64]) -> f64 {
        self.a.map_or(0.0, |i| v[i]) + self.b.map_or(0.0, |i| v[i])
    }

    /// Coefficients of `v_a - v_b` on two coordinates.
    fn coeffs(&self) -> [f64; 2] {
        let mut c = [0.0; 2];
        if let Some(i) = self.a {
            c[i] += 1.0;
        }
        if let Some(j) = self.b {
            c[j] -= 1.0;
        }
        c
    }
}

fn edge_terms(graph: &PinnedGraph) -> Vec<EdgeTerm> {
    graph
        .edges()
        .iter()
        .filter(|e| e.weight > 0.0)
        .map(|e| EdgeTerm { a: e.plus.site(), b: e.minus.site(), c: e.weight })
        .collect()
}

fn cut_terms(graph: &PinnedGraph, cuts: &[(usize, f64)]) -> Result<Vec<EdgeTerm>> {
    let mut best: Vec<Option<f64>> = vec![None; graph.n_edges()];
    for &(k, d) in cuts {
        if k >= graph.n_edges() || !(d > 0.0) {
            return invalid("bad protection cut");
        }
        if d.is_finite() {
            best[k] = Some(best[k].map_or(d, |x: f64| x.min(d)));
        }
    }
    Ok(best
        .iter()
        .enumerate()
        .filter_map(|(k, d)| {
            d.map(|d| {
                let e = graph.edges()[k];
                EdgeTerm { a: e.plus.site(), b: e.minus.site(), c: d }
            })
        })
        .collect())
}

/// Fine and coarse estimates of `∫ f dμ` over the cut region.
#[derive(Debug, Clone, Copy, Default)]
struct Pair {
    fine: CompensatedSum,
    coarse: CompensatedSum,
}

impl Pair {
    fn merge(&mut self, o: &Pair) {
        self.fine.merge(&o.fine);
        self.coarse.merge(&o.coarse);
    }
}

/// Vector-valued integrand `f(u, s, out)` with `k` outputs.
struct Joint<'a, F> {
    n: usize,
    k: usize,
    graph: &'a PinnedGraph,
    edges: Vec<EdgeTerm>,
    cuts: Vec<EdgeTerm>,
    f: &'a F,
    z_half: f64,
}

const CHUNK: usize = 64;
/// Order of the pilot rule used to find negligible `u` nodes.
const PILOT_POINTS: usize = 16;
/// A `u` node is skipped when its pilot magnitude is below this fraction of
/// the total for every output.
const PRUNE_RELATIVE: f64 = 1e-17;

impl<F: Fn(&[f64], &[f64], &mut [f64]) + Sync> Joint<'_, F> {
    /// Integral over `s` at fixed `u` into `fine` and `coarse`; with `abs`
    /// the integrand is replaced by its absolute value.
    fn inner(&self, u: &[f64], rules: &Rules, s_points: usize, abs: bool, fine: &mut [f64], coarse: &mut [f64]) {
        let n = self.n;
        fine.fill(0.0);
        coarse.fill(0.0);
        let mut l = [0.0; 4];
        crate::model::laplacian_into(self.graph, u, &mut l[..n * n]);
        if !linalg::cholesky_in_place(&mut l[..n * n], n) {
            return;
        }
        let logdet = linalg::cholesky_logdet(&l[..n * n], n);
        let usum: f64 = u.iter().sum();
        let ch: f64 = self.edges.iter().map(|e| e.c * cosh_m1(e.du(u))).sum();
        let base = 0.5 * logdet - usum - n as f64 * (2.0 * PI).ln() - ch;
        let half_ex: Vec<f64> = self.edges.iter().map(|e| 0.5 * e.c * e.su(u).exp()).collect();

        let mut cons = Vec::with_capacity(self.cuts.len());
        for c in &self.cuts {
            let slack = c.c - cosh_m1(c.du(u));
            if slack <= 0.0 {
                return;
            }
            let r = (2.0 * slack * (-c.su(u)).exp()).sqrt();
            // g = L⁻¹ (e_a - e_b), so that s_a - s_b = gᵀ z
            let mut g = c.coeffs();
            linalg::solve_lower(&l[..n * n], n, &mut g[..n]);
            cons.push(Lin { a: g[0], b: if n > 1 { g[1] } else { 0.0 }, lo: -r, hi: r });
        }

        let mut s = [0.0; 2];
        let mut vals = vec![0.0; self.k];
        let mut eval = |z: &[f64], wf: f64, wc: f64| {
            s[..n].copy_from_slice(z);
            linalg::solve_upper_transposed(&l[..n * n], n, &mut s[..n]);
            let act: f64 = self
                .edges
                .iter()
                .zip(&half_ex)
                .map(|(e, h)| {
                    let d = e.du(&s[..n]);
                    h * d * d
                })
                .sum();
            let p = (base - act).exp();
            if p == 0.0 {
                return;
            }
            (self.f)(u, &s[..n], &mut vals);
            for ((v, fi), co) in vals.iter().zip(fine.iter_mut()).zip(coarse.iter_mut()) {
                let x = if abs { (p * v).abs() } else { p * v };
                *fi += wf * x;
                *co += wc * x;
            }
        };
        if n == 1 {
            for_each_1d(&cons, self.z_half, s_points, rules, |z, wf, wc| eval(&[z], wf, wc));
        } else {
            let pts = (s_points, s_points);
            for_each_2d(&cons, self.z_half, self.z_half, pts, rules, |z0, z1, wf, wc| eval(&[z0, z1], wf, wc));
        }
    }
}

/// `u` nodes with fine and coarse weights. For `n ≤ 2` the whitened box is
/// clipped to `|u_i| < L` and cut by the slabs; three sites use the plain
/// tensor grid in `v`.
fn u_nodes(grid: &UGrid, cuts: &[EdgeTerm], half: f64, points: usize, rules: &Rules) -> Vec<([f64; 3], f64, f64)> {
    let n = grid.n;
    let j = grid.jacobian;
    let mut out = Vec::new();
    let mut cons: Vec<Lin> = cuts
        .iter()
        .map(|c| {
            let w = (1.0 + c.c).acosh();
            let a = grid.pull(&c.coeffs());
            Lin { a: a[0], b: a[1], lo: -w, hi: w }
        })
        .collect();
    for i in 0..n.min(2) {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        let a = grid.pull(&e[..n]);
        cons.push(Lin { a: a[0], b: a[1], lo: -half, hi: half });
    }
    match n {
        1 => for_each_1d(&cons, half, points, rules, |x, wf, wc| out.push((grid.map(&[x]), j * wf, j * wc))),
        2 => for_each_2d(&cons, half, half, (points, points), rules, |x, y, wf, wc| {
            out.push((grid.map(&[x, y]), j * wf, j * wc))
        }),
        3 => {
            assert!(cuts.is_empty(), "three-site grids carry no cuts");
            let mut axis = Vec::new();
            rules.for_each(-half, half, points + (points & 1), |x, wf, wc| axis.push((x, wf, wc)));
            for &(x, a, b) in &axis {
                for &(y, c, d) in &axis {
                    for &(z, e, g) in &axis {
                        out.push((grid.map(&[x, y, z]), j * a * c * e, j * b * d * g));
                    }
                }
            }
        }
        _ => unreachable!("dimension checked by callers"),
    }
    out
}

fn single_pass<F>(graph: &PinnedGraph, cuts: &[EdgeTerm], k: usize, f: &F, spec: &QuadratureSpec) -> Vec<Pair>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    let n = graph.n();
    let rules = Rules::new(spec.rule, spec.points_per_axis.max(spec.s_points_per_axis) + 1);
    let pilot = Rules::new(QuadratureRule::GaussLegendre, PILOT_POINTS);
    let grid = UGrid::new(graph, spec).expect("checked by callers");
    let nodes = u_nodes(&grid, cuts, spec.half_width, spec.points_per_axis, &rules);
    let job = Joint { n, k, graph, edges: edge_terms(graph), cuts: cuts.to_vec(), f, z_half: spec.half_width };
    let chunks = nodes.len().div_ceil(CHUNK);
    let range = |c: usize| c * CHUNK..((c + 1) * CHUNK).min(nodes.len());

    let magnitudes: Vec<f64> = map_indexed(spec.execution, chunks, |c| {
        let (mut a, mut b) = (vec![0.0; k], vec![0.0; k]);
        let mut out = Vec::with_capacity(CHUNK * k);
        for (u, wf, _) in &nodes[range(c)] {
            job.inner(&u[..n], &pilot, PILOT_POINTS, true, &mut a, &mut b);
            out.extend(a.iter().map(|x| x * wf));
        }
        out
    })
    .concat();
    let mut totals = vec![0.0; k];
    for row in magnitudes.chunks_exact(k) {
        for (t, x) in totals.iter_mut().zip(row) {
            *t += x;
        }
    }
    let keep = |i: usize| magnitudes[i * k..(i + 1) * k].iter().zip(&totals).any(|(x, t)| *x >= PRUNE_RELATIVE * t);

    let parts = map_indexed(spec.execution, chunks, |c| {
        let mut p = vec![Pair::default(); k];
        let (mut a, mut b) = (vec![0.0; k], vec![0.0; k]);
        for i in range(c) {
            if !keep(i) {
                continue;
            }
            let (u, wf, wc) = &nodes[i];
            job.inner(&u[..n], &rules, spec.s_points_per_axis, false, &mut a, &mut b);
            for ((pk, fi), co) in p.iter_mut().zip(&a).zip(&b) {
                pk.fine.add(wf * fi);
                pk.coarse.add(wc * co);
            }
        }
        p
    });
    let mut total = vec![Pair::default(); k];
    for p in &parts {
        for (t, x) in total.iter_mut().zip(p) {
            t.merge(x);
        }
    }
    total
}

/// Fine and coarse raw integrals of each output times the density.
fn raw_joint<F>(graph: &PinnedGraph, cuts: &[EdgeTerm], k: usize, f: &F, spec: &QuadratureSpec) -> Vec<(f64, f64)>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    let fine = single_pass(graph, cuts, k, f, spec);
    match spec.rule {
        QuadratureRule::NestedTrapezoid => fine.iter().map(|p| (p.fine.value(), p.coarse.value())).collect(),
        QuadratureRule::GaussLegendre => {
            let coarse = single_pass(graph, cuts, k, f, &spec.halved());
            fine.iter().zip(&coarse).map(|(a, b)| (a.fine.value(), b.fine.value())).collect()
        }
    }
}

fn check_joint(graph: &PinnedGraph, spec: &QuadratureSpec) -> Result<()> {
    spec.validate()?;
    if graph.n() > 2 {
        return invalid(format!("joint quadrature needs 2n <= 4, got n = {}", graph.n()));
    }
    UGrid::new(graph, spec).map(|_| ())
}

fn finish(num: (f64, f64), den: (f64, f64)) -> Result<QuadratureResult> {
    if !(den.0 > 0.0) || !(den.1 > 0.0) {
        return Err(Error::NumericFailure("density integrates to zero on the grid".into()));
    }
    let value = num.0 / den.0;
    let error_indicator = (value - num.1 / den.1).abs();
    Ok(QuadratureResult {
        value,
        error_indicator,
        normalization: den.0,
        flagged: !(error_indicator <= FLAG_RELATIVE * value.abs()),
    })
}

/// Raw integral of the joint density over the truncated window.
pub fn normalization(graph: &PinnedGraph, spec: &QuadratureSpec) -> Result<f64> {
    check_joint(graph, spec)?;
    Ok(raw_joint(graph, &[], 1, &|_: &[f64], _: &[f64], o: &mut [f64]| o[0] = 1.0, spec)[0].0)
}

/// Self-normalized `E[f_j]` for the `k` outputs of `f`, each restricted to
/// `B_e < 1 + δ` for every cut.
pub fn expectations_with<F>(
    graph: &PinnedGraph,
    cuts: &[(usize, f64)],
    k: usize,
    f: F,
    spec: &QuadratureSpec,
) -> Result<Vec<QuadratureResult>>
where
    F: Fn(&[f64], &[f64], &mut [f64]) + Sync,
{
    check_joint(graph, spec)?;
    let cut = cut_terms(graph, cuts)?;
    if cut.is_empty() {
        // density as output 0, sharing the pass
        let g = |u: &[f64], s: &[f64], o: &mut [f64]| {
            o[0] = 1.0;
            f(u, s, &mut o[1..]);
        };
        let raw = raw_joint(graph, &[], k + 1, &g, spec);
        raw[1..].iter().map(|&num| finish(num, raw[0])).collect()
    } else {
        let den = raw_joint(graph, &[], 1, &|_: &[f64], _: &[f64], o: &mut [f64]| o[0] = 1.0, spec)[0];
        raw_joint(graph, &cut, k, &f, spec).into_iter().map(|num| finish(num, den)).collect()
    }
}

/// Scalar form of [`expectations_with`].
pub fn expectation_with<F>(graph: &PinnedGraph, cuts: &[(usize, f64)], f: F, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(&[f64], &[f64]) -> f64 + Sync,
{
    let r = expectations_with(graph, cuts, 1, |u: &[f64], s: &[f64], o: &mut [f64]| o[0] = f(u, s), spec)?;
    Ok(r[0])
}

/// `E[observable]` under the joint measure; protections cut the domain.
pub fn quadrature_expectation(graph: &PinnedGraph, observable: &Observable, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    expectation_with(graph, observable.cuts(), |u, s| observable.eval(u, s), spec)
}

/// Several observables at once; the unprotected ones share a single pass.
pub fn quadrature_expectations(graph: &PinnedGraph, observables: &[Observable], spec: &QuadratureSpec) -> Result<Vec<QuadratureResult>> {
    let free: Vec<usize> = (0..observables.len()).filter(|&i| observables[i].cuts().is_empty()).collect();
    let mut out = vec![None; observables.len()];
    if !free.is_empty() {
        let f = |u: &[f64], s: &[f64], o: &mut [f64]| {
            for (slot, &i) in o.iter_mut().zip(&free) {
                *slot = observables[i].eval(u, s);
            }
        };
        for (r, &i) in expectations_with(graph, &[], free.len(), f, spec)?.into_iter().zip(&free) {
            out[i] = Some(r);
        }
    }
    for (i, obs) in observables.iter().enumerate() {
        if out[i].is_none() {
            out[i] = Some(quadrature_expectation(graph, obs, spec)?);
        }
    }
    Ok(out.into_iter().map(|r| r.expect("filled")).collect())
}

/// `det(D - F M Q Fᵀ) / det D` for at most two sites.
fn small_det_ratio(graph: &PinnedGraph, asg: &ExponentAssignment, u: &[f64], s: &[f64]) -> f64 {
    let n = graph.n();
    let mut d = [0.0; 4];
    crate::model::laplacian_into(graph, u, &mut d[..n * n]);
    let mut x = [0.0; 4];
    for (e, &m) in graph.edges().iter().zip(&asg.m) {
        if m == 0.0 {
            continue;
        }
        let t = EdgeTerm { a: e.plus.site(), b: e.minus.site(), c: 0.0 };
        let b = 1.0 + cosh_m1(t.du(u)) + 0.5 * t.du(s).powi(2) * t.su(u).exp();
        let c = m * t.su(u).exp() / b;
        let k = t.coeffs();
        for i in 0..n {
            for j in 0..n {
                x[i * n + j] += c * k[i] * k[j];
            }
        }
    }
    let det = |a: &[f64]| if n == 1 { a[0] } else { a[0] * a[3] - a[1] * a[2] };
    let diff: Vec<f64> = d[..n * n].iter().zip(&x[..n * n]).map(|(p, q)| p - q).collect();
    det(&diff) / det(&d[..n * n])
}

/// `E[Π B_e^{m_e} · Π χ_e(B_e) · det(Id - MΓ)]` with `χ_e = 1{B_e < 1 + δ_e}`.
pub fn protected_ward_integral(graph: &PinnedGraph, asg: &ExponentAssignment, spec: &QuadratureSpec) -> Result<QuadratureResult> {
    Ok(protected_ward_integrals(graph, std::slice::from_ref(asg), spec)?[0])
}

/// [`protected_ward_integral`] for several assignments on one graph.
pub fn protected_ward_integrals(
    graph: &PinnedGraph,
    asgs: &[ExponentAssignment],
    spec: &QuadratureSpec,
) -> Result<Vec<QuadratureResult>> {
    check_joint(graph, spec)?;
    if let Some(a) = asgs.iter().find(|a| a.m.len() != graph.n_edges()) {
        return invalid(format!("assignment has {} edges, graph has {}", a.m.len(), graph.n_edges()));
    }
    let one = |_: &[f64], _: &[f64], o: &mut [f64]| o[0] = 1.0;
    let den = raw_joint(graph, &[], 1, &one, spec)[0];
    // assignments with equal thresholds share the cut domain and one pass
    let mut groups: Vec<(&[f64], Vec<usize>)> = Vec::new();
    for (i, a) in asgs.iter().enumerate() {
        match groups.iter_mut().find(|(d, _)| *d == a.delta.as_slice()) {
            Some((_, v)) => v.push(i),
            None => groups.push((&a.delta, vec![i])),
        }
    }
    let mut out = vec![None; asgs.len()];
    for (delta, members) in groups {
        let cuts: Vec<(usize, f64)> = delta.iter().copied().enumerate().collect();
        let cut = cut_terms(graph, &cuts)?;
        let pairs: Vec<Vec<(EdgeTerm, f64)>> = members
            .iter()
            .map(|&i| {
                graph
                    .edges()
                    .iter()
                    .zip(&asgs[i].m)
                    .filter(|(_, &m)| m > 0.0)
                    .map(|(e, &m)| (EdgeTerm { a: e.plus.site(), b: e.minus.site(), c: 0.0 }, m))
                    .collect()
            })
            .collect();
        let f = |u: &[f64], s: &[f64], o: &mut [f64]| {
            for ((slot, p), &i) in o.iter_mut().zip(&pairs).zip(&members) {
                let log_prod: f64 = p
                    .iter()
                    .map(|(t, m)| m * (1.0 + cosh_m1(t.du(u)) + 0.5 * t.du(s).powi(2) * t.su(u).exp()).ln())
                    .sum();
                *slot = log_prod.exp() * small_det_ratio(graph, &asgs[i], u, s);
            }
        };
        for (num, &i) in raw_joint(graph, &cut, members.len(), &f, spec).into_iter().zip(&members) {
            out[i] = Some(finish(num, den)?);
        }
    }
    Ok(out.into_iter().map(|r| r.expect("every assignment is in a group")).collect())
}

/// Self-normalized `E[f(u)]` under the `u`-marginal for up to three sites.
pub fn marginal_expectation<F>(graph: &PinnedGraph, f: F, spec: &QuadratureSpec) -> Result<QuadratureResult>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    spec.validate()?;
    let n = graph.n();
    if n > 3 {
        return invalid(format!("marginal quadrature needs n <= 3, got {n}"));
    }
    let grid = UGrid::new(graph, spec)?;
    let pass = |spec: &QuadratureSpec| -> (Pair, Pair) {
        let rules = Rules::new(spec.rule, spec.points_per_axis + 1);
        let nodes = u_nodes(&grid, &[], spec.half_width, spec.points_per_axis, &rules);
        let edges = edge_terms(graph);
        let chunks = nodes.len().div_ceil(CHUNK);
        let parts = map_indexed(spec.execution, chunks, |c| {
            let mut num = Pair::default();
            let mut den = Pair::default();
            let mut d = [0.0; 9];
            for (u, wf, wc) in &nodes[c * CHUNK..((c + 1) * CHUNK).min(nodes.len())] {
                let u = &u[..n];
                crate::model::laplacian_into(graph, u, &mut d[..n * n]);
                if !linalg::cholesky_in_place(&mut d[..n * n], n) {
                    continue;
                }
                let ld = linalg::cholesky_logdet(&d[..n * n], n);
                let ch: f64 = edges.iter().map(|e| e.c * cosh_m1(e.du(u))).sum();
                let p = (-ch + 0.5 * ld - u.iter().sum::<f64>() - 0.5 * n as f64 * (2.0 * PI).ln()).exp();
                let v = f(u);
                num.fine.add(wf * p * v);
                num.coarse.add(wc * p * v);
                den.fine.add(wf * p);
                den.coarse.add(wc * p);
            }
            (num, den)
        });
        let (mut num, mut den) = (Pair::default(), Pair::default());
        for (a, b) in &parts {
            num.merge(a);
            den.merge(b);
        }
        (num, den)
    };
    let (num, den) = pass(spec);
    let (num_c, den_c) = match spec.rule {
        QuadratureRule::NestedTrapezoid => (num.coarse.value(), den.coarse.value()),
        QuadratureRule::GaussLegendre => {
            let (a, b) = pass(&spec.halved());
            (a.fine.value(), b.fine.value())
        }
    };
    finish((num.fine.value(), num_c), (den.fine.value(), den_c))
}

/// Vertex helper for tests and suites: the pinning edge of site `i`.
pub fn pinning_edge(graph: &PinnedGraph, i: usize) -> usize {
    graph.edge_index(Vertex::Site(i), Vertex::Root).expect("site exists")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{make_observable, ObservableSpec};
    use approx::assert_relative_eq;

    fn single(h: f64) -> PinnedGraph {
        PinnedGraph::new(vec![vec![0.0]], vec![h]).unwrap()
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(10);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(18)).sum();
        assert_relative_eq!(s, 2.0 / 19.0, max_relative = 1e-13);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, max_relative = 1e-14);
    }

    #[test]
    fn polygon_area() {
        // |x| < 1, |y| < 1, |x - y| < 1: hexagon of area 3.
        let rules = Rules::new(QuadratureRule::GaussLegendre, 65);
        let cons = [Lin { a: 1.0, b: -1.0, lo: -1.0, hi: 1.0 }];
        let mut area = 0.0;
        for_each_2d(&cons, 1.0, 1.0, (64, 64), &rules, |_, _, w, _| area += w);
        assert_relative_eq!(area, 3.0, max_relative = 1e-13);
        let cons = [Lin { a: 2.0, b: 0.0, lo: -1.0, hi: 1.0 }];
        let mut area = 0.0;
        for_each_2d(&cons, 1.0, 1.0, (64, 64), &rules, |_, _, w, _| area += w);
        assert_relative_eq!(area, 2.0, max_relative = 1e-13);
    }

    #[test]
    fn single_vertex_normalization_and_bessel_moments() {
        for h in [1.0, 4.0] {
            let g = single(h);
            let spec = QuadratureSpec::default();
            assert!((normalization(&g, &spec).unwrap() - 1.0).abs() < 1e-6);
            let o = make_observable(&g, &ObservableSpec::cosh_u(0, 1.0)).unwrap();
            let r = quadrature_expectation(&g, &o, &spec).unwrap();
            // closed forms through K_{1/2}, K_{3/2}, K_{5/2}
            assert_relative_eq!(r.value, 1.0 + 0.5 / h, max_relative = 1e-8);
            let m = marginal_expectation(&g, |u| u[0].cosh().powi(2), &spec).unwrap();
            assert_relative_eq!(m.value, 1.0 + 1.0 / h + 0.75 / (h * h), max_relative = 1e-8);
        }
    }

    #[test]
    fn single_vertex_ward_identity() {
        // E[B^m] = 1 + (m/h) E[B^{m-1}]
        let g = single(4.0);
        let spec = QuadratureSpec::default();
        let e = |m: f64| {
            let o = make_observable(&g, &ObservableSpec::b_pow(Vertex::Site(0), Vertex::Root, m)).unwrap();
            quadrature_expectation(&g, &o, &spec).unwrap().value
        };
        assert_relative_eq!(e(1.0), 1.25, max_relative = 1e-8);
        assert_relative_eq!(e(2.0), 1.0 + 0.5 * 1.25, max_relative = 1e-8);
        assert!(e(2.0) <= 2.0);
    }

    #[test]
    fn protected_single_vertex_below_one() {
        let g = single(2.0);
        let spec = QuadratureSpec { rule: QuadratureRule::GaussLegendre, ..Default::default() };
        let asg = ExponentAssignment::new(vec![1.0], vec![0.5]).unwrap();
        let r = protected_ward_integral(&g, &asg, &spec).unwrap();
        assert!(r.value <= 1.0 + 1e-4 && r.value > 0.0, "{r:?}");
        let open = ExponentAssignment::new(vec![1.0], vec![f64::INFINITY]).unwrap();
        let r = protected_ward_integral(&g, &open, &spec).unwrap();
        assert_relative_eq!(r.value, 1.0, max_relative = 1e-7);
    }

    #[test]
    fn rejects_large_dimension() {
        let g = crate::graph::build_hierarchical(2, |_| 1.0, 1.0).unwrap();
        assert!(normalization(&g, &QuadratureSpec::default()).is_err());
        let spec = QuadratureSpec { points_per_axis: 32, ..Default::default() };
        assert!(normalization(&single(1.0), &spec).is_err());
    }
}
