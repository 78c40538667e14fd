//! Series law, Rayleigh monotonicity and the chain resistance bound.

use super::random::{log_uniform, random_graph, TrialRng};
use super::{randomized, Check, LemmaReport};
use crate::detbounds::{edge_conductances, in_protected_set, ExponentAssignment, ResistanceNetwork};
use crate::error::Result;
use crate::exec::Execution;
use crate::graph::{build_chain, ChainPinning, OrientedEdge, PinnedGraph, Vertex};
use crate::model::FieldConfig;
use crate::regime::c_delta_partial;
use rand::Rng;
use rand_distr::StandardNormal;

pub const SERIES_TOL: f64 = 1e-12;
pub const RAYLEIGH_TOL: f64 = 1e-12;
pub const MAX_CHAIN: usize = 8;

/// Path `0 - 1 - ... - k`, optionally closed off at `ρ`, against `Σ 1/c`.
pub fn series_law(trials: usize, seed: u64, exec: Execution) -> LemmaReport {
    randomized("series_law", 11, trials, seed, exec, |rng| {
        let k = rng.random_range(1..=8);
        let to_root = rng.random::<bool>();
        let n = if to_root { k } else { k + 1 };
        let c: Vec<f64> = (0..k).map(|_| log_uniform(rng, 0.05, 20.0)).collect();
        let node = |i: usize| if i == n { Vertex::Root } else { Vertex::Site(i) };
        let edges = (0..k).map(|i| OrientedEdge { plus: Vertex::Site(i), minus: node(i + 1), weight: c[i] }).collect();
        let net = ResistanceNetwork::new(n, edges)?;
        let r = net.resistance(Vertex::Site(0), node(k))?;
        let expect: f64 = c.iter().map(|c| 1.0 / c).sum();
        Ok(Check::at_most((r - expect).abs() / expect, SERIES_TOL))
    })
}

fn random_pair(rng: &mut TrialRng, n: usize) -> (Vertex, Vertex) {
    let v = |i: usize| if i == n { Vertex::Root } else { Vertex::Site(i) };
    let x = rng.random_range(0..=n);
    let mut y = rng.random_range(0..n);
    if y >= x {
        y += 1;
    }
    (v(x), v(y))
}

/// Raising a conductance never raises the resistance; removing an edge
/// never lowers it.
pub fn rayleigh(trials: usize, seed: u64, exec: Execution) -> LemmaReport {
    randomized("rayleigh_monotonicity", 12, trials, seed, exec, |rng| {
        let n = rng.random_range(1..=8);
        let g = random_graph(rng, n, 0.4)?;
        let c = g.edge_weights();
        let (x, y) = random_pair(rng, n);
        let r0 = ResistanceNetwork::from_graph(&g, &c)?.resistance(x, y)?;
        let mut up = c.clone();
        let k = rng.random_range(0..up.len());
        up[k] += log_uniform(rng, 0.01, 10.0);
        let r1 = ResistanceNetwork::from_graph(&g, &up)?.resistance(x, y)?;
        let positive: Vec<usize> = (0..c.len()).filter(|&i| c[i] > 0.0).collect();
        let mut cut = c.clone();
        cut[positive[rng.random_range(0..positive.len())]] = 0.0;
        // a disconnected pair has infinite resistance
        let r2 = ResistanceNetwork::from_graph(&g, &cut)?.resistance(x, y).unwrap_or(f64::INFINITY);
        let residual = (r1 / r0 - 1.0).max(1.0 - r2 / r0);
        Ok(Check::at_most(residual, RAYLEIGH_TOL))
    })
}

/// Chain configuration with `B_{l-1,l} < 1 + δ_l` on every chain edge.
fn chain_config(rng: &mut TrialRng, wbar: f64, deltas: &[f64]) -> FieldConfig {
    let n = deltas.len() + 1;
    let mut u = vec![rng.sample::<f64, _>(StandardNormal); 1];
    let mut s = vec![rng.sample::<f64, _>(StandardNormal) / wbar.sqrt(); 1];
    for d in deltas {
        let du = rng.random_range(-0.999..0.999) * (1.0 + d).acosh();
        let ul = u[u.len() - 1] + du;
        let slack = 1.0 + d - du.cosh();
        let ds_max = (2.0 * slack * (-(ul + u[u.len() - 1])).exp()).max(0.0).sqrt();
        let sl = s[s.len() - 1] + rng.random_range(-0.999..0.999) * ds_max;
        u.push(ul);
        s.push(sl);
    }
    debug_assert_eq!(u.len(), n);
    FieldConfig::new(u, s)
}

/// On the protected set of the chain schedule, the resistance between chain
/// labels `x < y` over the path is at most `C_δ Σ_{i=x+1}^{y} 1/W_{i-1,i}`,
/// with `C_δ` from the partial sum up to `N`.
pub fn chain_bound(trials: usize, seed: u64, exec: Execution) -> LemmaReport {
    randomized("chain_resistance_bound", 13, trials, seed, exec, |rng| {
        let n = rng.random_range(2..=MAX_CHAIN);
        let alpha = rng.random_range(3.5..6.0);
        let gamma = rng.random_range(0.0..alpha - 3.5);
        let wbar = log_uniform(rng, 1.0, 1e3);
        let g = build_chain(n, alpha, wbar, &ChainPinning::P1(vec![1.0; n]), &[])?;
        let deltas: Vec<f64> = (2..=n).map(|l| (l as f64).powf(-(alpha - gamma - 1.0))).collect();
        let cfg = chain_config(rng, wbar, &deltas);
        let mut asg = ExponentAssignment::zeros(&g);
        for l in 2..=n {
            asg = asg.with_edge(&g, Vertex::Site(l - 2), Vertex::Site(l - 1), 0.0, deltas[l - 2])?;
        }
        if !in_protected_set(&g, &cfg, &asg) {
            return Ok(Check { residual: f64::NAN, pass: false });
        }
        let x = rng.random_range(1..n);
        let y = rng.random_range(x + 1..=n);
        let (vx, vy) = (Vertex::Site(x - 1), Vertex::Site(y - 1));
        let c = edge_conductances(&g, &cfg, (vx, vy))?;
        let on_path = |e: &OrientedEdge| match (e.plus.site(), e.minus.site()) {
            (Some(i), Some(j)) => j == i + 1 && i + 1 >= x && j < y,
            _ => false,
        };
        let r = ResistanceNetwork::from_graph(&g, &c)?.restricted(on_path).resistance(vx, vy)?;
        let sum: f64 = (x + 1..=y).map(|i| 1.0 / (wbar * (i as f64).powf(alpha))).sum();
        let bound = c_delta_partial(alpha, gamma, n) * sum;
        Ok(Check::at_most(r / bound - 1.0, 1e-12))
    })
}

pub fn all(trials: usize, seed: u64, exec: Execution) -> Vec<LemmaReport> {
    vec![series_law(trials, seed, exec), rayleigh(trials, seed, exec), chain_bound(trials, seed, exec)]
}

/// Resistance of a graph with its own weights as conductances.
pub fn weight_resistance(graph: &PinnedGraph, x: Vertex, y: Vertex) -> Result<f64> {
    ResistanceNetwork::from_graph(graph, &graph.edge_weights())?.resistance(x, y)
}
