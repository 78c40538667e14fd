//! Quadrature batteries: normalization, Ward bounds, and the sampler check.

use super::battery::{standard_battery, BatteryGraph};
use super::random::trial_rng;
use super::{Check, LemmaReport, Tally};
use crate::detbounds::{assumption_holds, in_protected_set, sufficient_condition, ExponentAssignment};
use crate::error::Result;
use crate::exec::Execution;
use crate::graph::{PinnedGraph, Vertex};
use crate::model::{cosh_m1, FieldConfig};
use crate::oracle::{expectations_with, normalization, protected_ward_integrals, quadrature_expectations, QuadratureRule, QuadratureSpec};
use crate::sampler::{make_observable, ChainSet, ObservableSpec, SamplerParams};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const NORMALIZATION_TOL: f64 = 1e-3;
pub const WARD_TOL: f64 = 1e-4;
pub const WARD_RATIOS: [f64; 3] = [0.1, 0.5, 0.9];
pub const Z_MAX: f64 = 3.0;

/// Gauss–Legendre at 64 nodes per axis, used by the Ward batteries.
pub fn ward_spec() -> QuadratureSpec {
    QuadratureSpec { rule: QuadratureRule::GaussLegendre, points_per_axis: 64, ..Default::default() }
}

/// `Z = 1` on the battery, and truncation at `L = 6` against `L = 10`.
pub fn normalization_suite(seed: u64) -> Result<Vec<LemmaReport>> {
    let battery = standard_battery()?;
    let mut norm = Tally::new("normalization", seed);
    let mut trunc = Tally::new("truncation_stability", seed);
    let narrow = QuadratureSpec { half_width: 6.0, ..ward_spec() };
    for b in &battery {
        let z = normalization(&b.graph, &QuadratureSpec::default())?;
        norm.add(Check::at_most((z - 1.0).abs(), NORMALIZATION_TOL));
        let (z6, z10) = (normalization(&b.graph, &narrow)?, normalization(&b.graph, &ward_spec())?);
        trunc.add(Check::at_most((z6 - z10).abs(), NORMALIZATION_TOL));
    }
    Ok(vec![norm.report(), trunc.report()])
}

/// `(m_e)` sets of one graph: every positive edge alone and all together,
/// at each ratio `m_e / W_e`.
pub fn ward_exponents(graph: &PinnedGraph) -> Vec<Vec<f64>> {
    let edges = graph.edges();
    let positive: Vec<usize> = graph.positive_edges().collect();
    let mut sets: Vec<Vec<usize>> = positive.iter().map(|&k| vec![k]).collect();
    if positive.len() > 1 {
        sets.push(positive.clone());
    }
    let mut out = Vec::new();
    for r in WARD_RATIOS {
        for s in &sets {
            let mut m = vec![0.0; edges.len()];
            for &k in s {
                m[k] = r * edges[k].weight;
            }
            out.push(m);
        }
    }
    out
}

#[inline]
fn log_b(a: Option<usize>, b: Option<usize>, u: &[f64], s: &[f64]) -> f64 {
    let g = |x: Option<usize>, v: &[f64]| x.map_or(0.0, |i| v[i]);
    let (du, ds) = (g(a, u) - g(b, u), g(a, s) - g(b, s));
    (1.0 + cosh_m1(du) + 0.5 * ds * ds * (g(a, u) + g(b, u)).exp()).ln()
}

/// `E[Π cosh(Δu_e)^{m_e}] ≤ E[Π B_e^{m_e}] ≤ Π 1/(1 - m_e/W_e)`; the residual
/// is the excess of the larger side over its bound.
pub fn ward_unprotected(battery: &[BatteryGraph], seed: u64) -> Result<LemmaReport> {
    let mut t = Tally::new("ward_unprotected", seed);
    let spec = ward_spec();
    for b in battery {
        let g = &b.graph;
        let sets = ward_exponents(g);
        let terms: Vec<_> = g.edges().iter().map(|e| (e.plus.site(), e.minus.site())).collect();
        let f = |u: &[f64], s: &[f64], o: &mut [f64]| {
            let lb: Vec<f64> = terms.iter().map(|&(a, c)| log_b(a, c, u, s)).collect();
            let lc: Vec<f64> = terms.iter().map(|&(a, c)| log_b(a, c, u, &[0.0; 2])).collect();
            for (k, m) in sets.iter().enumerate() {
                let (x, y) = m.iter().enumerate().fold((0.0, 0.0), |(x, y), (e, &me)| (x + me * lb[e], y + me * lc[e]));
                o[2 * k] = x.exp();
                o[2 * k + 1] = y.exp();
            }
        };
        let r = expectations_with(g, &[], 2 * sets.len(), f, &spec)?;
        for (k, m) in sets.iter().enumerate() {
            let bound: f64 = g.edges().iter().zip(m).map(|(e, &me)| if me > 0.0 { 1.0 / (1.0 - me / e.weight) } else { 1.0 }).product();
            let (eb, ec) = (r[2 * k].value, r[2 * k + 1].value);
            let ordered = ec <= eb + WARD_TOL;
            t.add(Check { residual: eb - bound, pass: ordered && eb <= bound + WARD_TOL });
        }
    }
    Ok(t.report())
}

/// The zero-weight instance: two sites with `W_12 = 0`, `h = (8, 8)`,
/// `m_12 = 1` protected at `δ = 1/2`, and both pinning edges protected at
/// `δ = 1/2` with `m = 0`, which confines `|u_i| < acosh(3/2)`.
pub fn zero_weight_instance() -> Result<(PinnedGraph, ExponentAssignment)> {
    let g = PinnedGraph::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]], vec![8.0, 8.0])?;
    let asg = ExponentAssignment::zeros(&g)
        .with_edge(&g, Vertex::Site(0), Vertex::Site(1), 1.0, 0.5)?
        .with_edge(&g, Vertex::Site(0), Vertex::Root, 0.0, 0.5)?
        .with_edge(&g, Vertex::Site(1), Vertex::Root, 0.0, 0.5)?;
    Ok((g, asg))
}

/// Battery assignments: `m_e = r W_e` on all positive edges with every edge
/// protected at `δ`. These satisfy the sufficient condition.
pub fn protected_assignments(graph: &PinnedGraph) -> Result<Vec<ExponentAssignment>> {
    let mut out = Vec::new();
    for r in [0.5, 0.9] {
        for delta in [0.5, 2.0] {
            let m = graph.edges().iter().map(|e| r * e.weight).collect();
            out.push(ExponentAssignment::new(m, vec![delta; graph.n_edges()])?);
        }
    }
    Ok(out)
}

/// Rejection-samples configurations of `U` and checks the assumption on each;
/// returns the number of failures among `samples` accepted draws.
fn assumption_on_u(graph: &PinnedGraph, asg: &ExponentAssignment, samples: usize, seed: u64) -> Result<usize> {
    let mut rng = trial_rng(seed, 21, 0);
    let mut failures = 0;
    let mut accepted = 0;
    while accepted < samples {
        let n = graph.n();
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let cfg = FieldConfig::new(u, s);
        if !in_protected_set(graph, &cfg, asg) {
            continue;
        }
        accepted += 1;
        if !assumption_holds(graph, &cfg, asg)?.holds() {
            failures += 1;
        }
    }
    Ok(failures)
}

pub fn protected_determinant(battery: &[BatteryGraph], seed: u64) -> Result<LemmaReport> {
    let mut t = Tally::new("protected_determinant", seed);
    let spec = ward_spec();
    for b in battery {
        let asgs = protected_assignments(&b.graph)?;
        for (a, r) in asgs.iter().zip(protected_ward_integrals(&b.graph, &asgs, &spec)?) {
            let ok = sufficient_condition(&b.graph, a);
            t.add(Check { residual: r.value - 1.0, pass: ok && r.value <= 1.0 + WARD_TOL });
        }
    }
    let (g, asg) = zero_weight_instance()?;
    let bad = assumption_on_u(&g, &asg, 2000, seed)?;
    let r = protected_ward_integrals(&g, std::slice::from_ref(&asg), &spec)?[0];
    t.add(Check { residual: r.value - 1.0, pass: bad == 0 && r.value <= 1.0 + WARD_TOL });
    Ok(t.report())
}

pub fn ward_suite(seed: u64) -> Result<Vec<LemmaReport>> {
    let battery = standard_battery()?;
    Ok(vec![ward_unprotected(&battery, seed)?, protected_determinant(&battery, seed)?])
}

/// One oracle/sampler comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub graph: String,
    pub kind: String,
    pub observable: String,
    pub oracle: f64,
    pub oracle_error: f64,
    pub mcmc: f64,
    pub stderr: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleVsMcmc {
    pub comparisons: Vec<Comparison>,
    pub reports: Vec<LemmaReport>,
}

pub fn comparison_params() -> SamplerParams {
    SamplerParams { n_steps: 40_000, burn_in: 4_000, chains: 4, record_s: true, ..Default::default() }
}

pub fn comparison_observables(graph: &PinnedGraph) -> Vec<ObservableSpec> {
    let mut v = vec![
        ObservableSpec::cosh_u(0, 1.0),
        ObservableSpec::cosh_u(0, 2.0),
        ObservableSpec::b_pow(Vertex::Site(0), Vertex::Root, 1.0),
        ObservableSpec::SSquared { vertex: Vertex::Site(0) },
    ];
    if graph.n() == 2 {
        v.push(ObservableSpec::CoshUDiffPow { a: Vertex::Site(0), b: Vertex::Site(1), m: 1.0 });
        v.push(ObservableSpec::b_pow(Vertex::Site(0), Vertex::Site(1), 1.0));
    }
    v
}

pub fn kind_name(spec: &ObservableSpec) -> &'static str {
    match spec {
        ObservableSpec::CoshUPow { .. } => "cosh_u_pow",
        ObservableSpec::CoshUDiffPow { .. } => "cosh_u_diff_pow",
        ObservableSpec::BPow { .. } => "b_pow",
        ObservableSpec::SSquared { .. } => "s_squared",
    }
}

/// Sampler estimates against quadrature on the battery, `|Δ| / σ ≤ 3` with
/// `σ² = stderr² + oracle_error²`, plus bitwise replay of one chain set.
pub fn oracle_vs_mcmc_suite(seed: u64) -> Result<OracleVsMcmc> {
    let battery = standard_battery()?;
    let params = comparison_params();
    let mut t = Tally::new("oracle_vs_mcmc", seed);
    let mut comparisons = Vec::new();
    for (gi, b) in battery.iter().enumerate() {
        let specs = comparison_observables(&b.graph);
        let obs = specs.iter().map(|s| make_observable(&b.graph, s)).collect::<Result<Vec<_>>>()?;
        let exact = quadrature_expectations(&b.graph, &obs, &QuadratureSpec::default())?;
        let chains = ChainSet::run_for(&b.graph, &params, seed.wrapping_add(gi as u64), &obs)?;
        for (o, q) in obs.iter().zip(exact) {
            let p = chains.pooled(o)?;
            let sigma = (p.stderr * p.stderr + q.error_indicator * q.error_indicator).sqrt();
            let z = (p.mean - q.value).abs() / sigma;
            t.add(Check { residual: z, pass: z <= Z_MAX });
            comparisons.push(Comparison {
                graph: b.name.clone(),
                kind: kind_name(o.spec()).to_owned(),
                observable: o.name(),
                oracle: q.value,
                oracle_error: q.error_indicator,
                mcmc: p.mean,
                stderr: p.stderr,
                z,
            });
        }
    }
    let mut replay = Tally::new("replay_determinism", seed);
    let g = &battery[battery.len() - 1].graph;
    let short = SamplerParams { n_steps: 3_000, burn_in: 500, ..params };
    let runs = [Execution::Sequential, Execution::Sequential, Execution::Parallel]
        .map(|e| ChainSet::run(g, &SamplerParams { execution: e, ..short }, seed).map(|c| c.chains));
    let [a, b, c] = runs;
    let (a, b, c) = (a?, b?, c?);
    let same = a == b && a == c;
    replay.add(Check { residual: if same { 0.0 } else { 1.0 }, pass: same });
    Ok(OracleVsMcmc { comparisons, reports: vec![t.report(), replay.report()] })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ward_exponent_sets() {
        let g = PinnedGraph::new(vec![vec![0.0, 3.0], vec![3.0, 0.0]], vec![2.0, 2.0]).unwrap();
        let sets = ward_exponents(&g);
        // three single edges plus the full set, at three ratios
        assert_eq!(sets.len(), 12);
        assert!(sets.iter().all(|m| m.iter().zip(g.edges()).all(|(&m, e)| m < e.weight || m == 0.0)));
    }

    #[test]
    fn zero_weight_instance_assumption() {
        let (g, asg) = zero_weight_instance().unwrap();
        assert!(!sufficient_condition(&g, &asg));
        assert_eq!(assumption_on_u(&g, &asg, 300, 1).unwrap(), 0);
    }
}
