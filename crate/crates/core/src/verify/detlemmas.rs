//! Randomized checks of the determinant lemmas on graphs with up to 8 sites.

use super::random::{log_uniform, permutation, random_config, random_exponents, random_graph, random_weights, TrialRng};
use super::{randomized, Check, LemmaReport};
use crate::detbounds::{
    assumption_holds, det_id_minus_mg, det_laplacian_route, factorization_check, monotonicity_check, split_graph,
    summary_bound, ExponentAssignment, SummaryOutcome, SummaryTerm, VertexMap,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{PinnedGraph, Vertex};
use rand::Rng;

pub const MAX_SITES: usize = 8;
/// Relative agreement of the two determinant routes.
pub const DET_ROUTE_TOL: f64 = 1e-10;
pub const FACTORIZATION_TOL: f64 = 1e-9;
pub const AUXILIARY_TOL: f64 = 1e-10;

fn sites(rng: &mut TrialRng) -> usize {
    rng.random_range(1..=MAX_SITES)
}

/// Routes of the assumption agree, `det > 0` where it holds, the sufficient
/// condition implies it, and both determinant routes agree.
pub fn equivalence(trials: usize, seed: u64, exec: Execution) -> LemmaReport {
    randomized("equivalence", 1, trials, seed, exec, |rng| {
        let n = sites(rng);
        let g = random_graph(rng, n, 0.4)?;
        let cfg = random_config(rng, n, 0.7);
        // ratios up to 2 so that a good share of instances fails
        let mut m = random_exponents(rng, &g, 0.6, 2.0);
        for (k, e) in g.edges().iter().enumerate() {
            if e.weight == 0.0 && rng.random::<f64>() < 0.1 {
                m[k] = rng.random_range(0.0..1.0);
            }
        }
        let asg = ExponentAssignment::unprotected(m)?;
        let check = assumption_holds(&g, &cfg, &asg)?;
        let d1 = det_id_minus_mg(&g, &cfg, &asg)?;
        let d2 = det_laplacian_route(&g, &cfg, &asg)?;
        let residual = (d1 - d2).abs() / d1.abs().max(d2.abs()).max(1.0);
        let pass = check.routes_agree()
            && (!check.holds() || d1 > 0.0)
            && (!check.sufficient || check.holds())
            && residual <= DET_ROUTE_TOL;
        Ok(Check { residual, pass })
    })
}

/// Raising a weight or lowering an exponent never lowers the determinant.
pub fn monotonicity(trials: usize, seed: u64, exec: Execution) -> LemmaReport {
    randomized("monotonicity", 2, trials, seed, exec, |rng| {
        let n = sites(rng);
        let gp = random_graph(rng, n, 0.4)?;
        let cfg = random_config(rng, n, 0.7);
        let mp = random_exponents(rng, &gp, 0.6, 0.95);
        let mut w = gp.edge_weights();
        let k = rng.random_range(0..w.len());
        w[k] += log_uniform(rng, 0.1, 3.0);
        let g = PinnedGraph::from_edge_weights(n, &w)?;
        let mut m = mp.clone();
        let support: Vec<usize> = (0..m.len()).filter(|&i| m[i] > 0.0).collect();
        if !support.is_empty() {
            let i = support[rng.random_range(0..support.len())];
            m[i] *= rng.random_range(0.0..1.0);
        }
        let out = monotonicity_check(
            &g,
            &gp,
            &cfg,
            &ExponentAssignment::unprotected(m)?,
            &ExponentAssignment::unprotected(mp)?,
        )?;
        let residual = (out.det_prime - out.det) / out.det.abs().max(1.0);
        Ok(Check { residual, pass: out.holds && out.primed_assumption })
    })
}

/// Graph whose sites split into 2 or 3 pinned components.
fn components_graph(rng: &mut TrialRng) -> Result<PinnedGraph> {
    let k = rng.random_range(2..=3);
    let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(1..=MAX_SITES / k)).collect();
    let n: usize = sizes.iter().sum();
    let perm = permutation(rng, n);
    let mut w = vec![0.0; n * n];
    let mut h = vec![0.0; n];
    let mut offset = 0;
    for &s in &sizes {
        let (bw, mut bh) = random_weights(rng, s, 0.4);
        bh[0] = bh[0].max(0.2);
        for a in 0..s {
            h[perm[offset + a]] = bh[a];
            for b in 0..s {
                w[perm[offset + a] * n + perm[offset + b]] = bw[a * s + b];
            }
        }
        offset += s;
    }
    PinnedGraph::from_flat(n, w, h)
}

/// `det(Id - MΓ)` is the product over the components left by removing `ρ`.
pub fn factorization(trials: usize, seed: u64, exec: Execution) -> LemmaReport {
    randomized("factorization", 3, trials, seed, exec, |rng| {
        let g = components_graph(rng)?;
        let n = g.n();
        let cfg = random_config(rng, n, 0.7);
        let m = random_exponents(rng, &g, 0.5, 1.5);
        let asg = ExponentAssignment::unprotected(m)?;
        let out = factorization_check(&g, &cfg, &asg, &g.internal_components())?;
        let single = out
            .single_edge_values
            .iter()
            .zip(&out.factors)
            .filter_map(|(v, f)| v.map(|v| (v - f).abs() / v.abs().max(1.0)))
            .fold(0.0, f64::max);
        let residual = out.relative_residual.max(single);
        Ok(Check::at_most(residual, FACTORIZATION_TOL))
    })
}

/// A graph `G` and a split `G'` of one of its sites into two copies, with
/// weights and exponents shared between the copies.
struct SplitInstance {
    g: PinnedGraph,
    asg: ExponentAssignment,
    gp: PinnedGraph,
    asgp: ExponentAssignment,
    map: VertexMap,
}

fn split_instance(rng: &mut TrialRng) -> Result<SplitInstance> {
    for _ in 0..100 {
        let n = rng.random_range(1..MAX_SITES);
        let g = random_graph(rng, n, 0.4)?;
        let m = random_exponents(rng, &g, 0.6, 0.95);
        let v = rng.random_range(0..n);
        let np = n + 1;
        let mut wp = vec![0.0; np * np];
        let mut hp = vec![0.0; np];
        let mut mp_pairs = Vec::new();
        // share of an edge incident to v that goes to the copy
        let share = |rng: &mut TrialRng| match rng.random_range(0..3) {
            0 => 0.0,
            1 => 1.0,
            _ => rng.random_range(0.0..1.0),
        };
        for (k, e) in g.edges().iter().enumerate() {
            let (i, j) = (e.plus.site().expect("plus is a site"), e.minus.site());
            let f = if i == v || j == Some(v) { share(rng) } else { 0.0 };
            let (wa, wb) = (e.weight * (1.0 - f), e.weight * f);
            let (ma, mb) = (m[k] * (1.0 - f), m[k] * f);
            let other = |x: usize| if x == v { n } else { x };
            match j {
                Some(j) => {
                    wp[i * np + j] = wa;
                    wp[j * np + i] = wa;
                    mp_pairs.push((Vertex::Site(i), Vertex::Site(j), ma));
                    if f > 0.0 {
                        let (a, b) = if i == v { (n, j) } else { (i, other(j)) };
                        wp[a * np + b] = wb;
                        wp[b * np + a] = wb;
                        mp_pairs.push((Vertex::Site(a), Vertex::Site(b), mb));
                    }
                }
                None => {
                    hp[i] = wa;
                    mp_pairs.push((Vertex::Site(i), Vertex::Root, ma));
                    if f > 0.0 {
                        hp[n] = wb;
                        mp_pairs.push((Vertex::Site(n), Vertex::Root, mb));
                    }
                }
            }
        }
        let Ok(gp) = PinnedGraph::from_flat(np, wp, hp) else {
            continue;
        };
        let mut asgp = ExponentAssignment::zeros(&gp);
        for (a, b, x) in mp_pairs {
            if x > 0.0 {
                asgp = asgp.with_edge(&gp, a, b, x, f64::INFINITY)?;
            }
        }
        let mut k: Vec<usize> = (0..n).collect();
        k.push(v);
        return Ok(SplitInstance {
            asg: ExponentAssignment::unprotected(m)?,
            g,
            gp,
            asgp,
            map: VertexMap::new(k, n)?,
        });
    }
    Err(Error::NumericFailure("no connected split found".into()))
}

/// Splitting a vertex never raises the determinant.
pub fn separating_vertices(trials: usize, seed: u64, exec: Execution) -> LemmaReport {
    randomized("separating_vertices", 4, trials, seed, exec, |rng| {
        let inst = split_instance(rng)?;
        let cfg = random_config(rng, inst.g.n(), 0.7);
        let out = split_graph(&inst.g, &inst.asg, &inst.gp, &inst.asgp, &inst.map, &cfg)?;
        let residual = (out.det_prime - out.det) / out.det.abs().max(1.0);
        Ok(Check { residual, pass: out.primed_spectral_radius >= 1.0 || out.inequality_holds() })
    })
}

/// `K D' Kᵀ = D` and `K F'M'Q'F'ᵀ Kᵀ = F M Q Fᵀ`.
pub fn auxiliary_identities(trials: usize, seed: u64, exec: Execution) -> LemmaReport {
    randomized("auxiliary_identities", 5, trials, seed, exec, |rng| {
        let inst = split_instance(rng)?;
        let cfg = random_config(rng, inst.g.n(), 0.7);
        let out = split_graph(&inst.g, &inst.asg, &inst.gp, &inst.asgp, &inst.map, &cfg)?;
        Ok(Check::at_most(out.residual_laplacian.max(out.residual_mq), AUXILIARY_TOL))
    })
}

/// Terms over disjoint paths through a random permutation; each term edge
/// joins the ends of its path. Path edges get positive weight.
fn summary_instance(rng: &mut TrialRng) -> Result<(PinnedGraph, Vec<SummaryTerm>)> {
    let n = rng.random_range(2..=MAX_SITES);
    let (mut w, h) = random_weights(rng, n, 0.3);
    let perm = permutation(rng, n);
    let mut segments = Vec::new();
    let mut at = 0;
    while n - at >= 2 {
        let len = rng.random_range(2..=(n - at).min(4));
        segments.push(perm[at..at + len].to_vec());
        at += len;
    }
    for seg in &segments {
        for p in seg.windows(2) {
            if w[p[0] * n + p[1]] == 0.0 {
                let x = log_uniform(rng, 0.2, 5.0);
                w[p[0] * n + p[1]] = x;
                w[p[1] * n + p[0]] = x;
            }
        }
    }
    let g = PinnedGraph::from_flat(n, w, h)?;
    let terms = segments
        .iter()
        .map(|seg| SummaryTerm {
            edge: [Vertex::Site(seg[0]), Vertex::Site(*seg.last().expect("nonempty"))],
            m: 1.0,
            support: seg.windows(2).map(|p| [Vertex::Site(p[0]), Vertex::Site(p[1])]).collect(),
        })
        .collect();
    Ok((g, terms))
}

/// `det(Id - MΓ) ≥ Π_l (1 - m_l R_l)` whenever every `m_l R_l < 1`.
pub fn summary(trials: usize, seed: u64, exec: Execution) -> LemmaReport {
    randomized("summary_bound", 6, trials, seed, exec, |rng| {
        let (g, mut terms) = summary_instance(rng)?;
        let cfg = random_config(rng, g.n(), 0.7);
        let probe = summary_bound(&g, &cfg, &terms)?;
        for (t, r) in terms.iter_mut().zip(&probe.resistances) {
            t.m = rng.random_range(0.05..0.95) / r;
        }
        let out = summary_bound(&g, &cfg, &terms)?;
        let det = det_id_minus_mg(&g, &cfg, &SummaryOutcome::assignment(&g, &terms)?)?;
        let residual = (out.bound - det) / det.abs().max(1.0);
        Ok(Check { residual, pass: out.valid() && residual <= 1e-12 })
    })
}

pub fn all(trials: usize, seed: u64, exec: Execution) -> Vec<LemmaReport> {
    vec![
        equivalence(trials, seed, exec),
        monotonicity(trials, seed, exec),
        factorization(trials, seed, exec),
        separating_vertices(trials, seed, exec),
        auxiliary_identities(trials, seed, exec),
        summary(trials, seed, exec),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_runs_pass() {
        for r in all(40, 3, Execution::Sequential) {
            assert!(r.passed(), "{r:?}");
            assert_eq!(r.trials, 40);
        }
    }

    #[test]
    fn deterministic_across_execution() {
        let a = equivalence(30, 5, Execution::Sequential);
        let b = equivalence(30, 5, Execution::Parallel);
        assert_eq!(a, b);
    }
}
