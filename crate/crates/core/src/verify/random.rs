//! Random instance generators for the randomized suites.

use crate::error::Result;
use crate::graph::PinnedGraph;
use crate::model::FieldConfig;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type TrialRng = ChaCha8Rng;

/// Generator for trial `t` of lemma `id`.
pub fn trial_rng(seed: u64, id: u64, t: usize) -> TrialRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((id << 40) | t as u64);
    rng
}

pub fn log_uniform(rng: &mut TrialRng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Connected weighted graph on `n` sites: a random spanning tree, extra edges
/// with probability `density`, site 0 pinned and others pinned with
/// probability 0.3.
pub fn random_weights(rng: &mut TrialRng, n: usize, density: f64) -> (Vec<f64>, Vec<f64>) {
    let mut w = vec![0.0; n * n];
    let set = |w: &mut Vec<f64>, i: usize, j: usize, x: f64| {
        w[i * n + j] = x;
        w[j * n + i] = x;
    };
    for i in 1..n {
        let j = rng.random_range(0..i);
        let x = log_uniform(rng, 0.2, 5.0);
        set(&mut w, i, j, x);
    }
    for i in 0..n {
        for j in i + 1..n {
            if w[i * n + j] == 0.0 && rng.random::<f64>() < density {
                let x = log_uniform(rng, 0.2, 5.0);
                set(&mut w, i, j, x);
            }
        }
    }
    let h = (0..n)
        .map(|i| if i == 0 || rng.random::<f64>() < 0.3 { log_uniform(rng, 0.2, 5.0) } else { 0.0 })
        .collect();
    (w, h)
}

pub fn random_graph(rng: &mut TrialRng, n: usize, density: f64) -> Result<PinnedGraph> {
    let (w, h) = random_weights(rng, n, density);
    PinnedGraph::from_flat(n, w, h)
}

pub fn random_config(rng: &mut TrialRng, n: usize, scale: f64) -> FieldConfig {
    let mut draw = || -> Vec<f64> { (0..n).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect() };
    let u = draw();
    let s = draw();
    FieldConfig::new(u, s)
}

/// `m_e = r_e W_e` with `r_e ~ U(0, max_ratio)` on a random subset of the
/// positive-weight edges.
pub fn random_exponents(rng: &mut TrialRng, graph: &PinnedGraph, p: f64, max_ratio: f64) -> Vec<f64> {
    graph
        .edges()
        .iter()
        .map(|e| {
            if e.weight > 0.0 && rng.random::<f64>() < p {
                rng.random_range(0.0..max_ratio) * e.weight
            } else {
                0.0
            }
        })
        .collect()
}

pub fn permutation(rng: &mut TrialRng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}
