//! Hierarchical lattices and inhomogeneous one-dimensional chains.

use super::PinnedGraph;
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

/// `8 W̄ 2^{-2r} r^α`, the smallest admissible hierarchical weight at level `r`.
pub fn hierarchical_weight_bound(wbar: f64, alpha: f64, r: usize) -> f64 {
    8.0 * wbar * 2f64.powi(-2 * r as i32) * (r as f64).powf(alpha)
}

/// `2 W̄ 2^{-N} (N+1)^α`, the smallest admissible uniform hierarchical pinning.
pub fn hierarchical_pinning_bound(wbar: f64, alpha: f64, levels: usize) -> f64 {
    2.0 * wbar * 2f64.powi(-(levels as i32)) * ((levels + 1) as f64).powf(alpha)
}

/// Complete graph on `{0,1}^N` with `W_ij = w^H(d_H(i,j))` and uniform pinning.
///
/// Vertex `v` encodes the bitstring `z_k = (v >> k) & 1`, so `d_H` is one
/// plus the highest differing bit.
pub fn build_hierarchical(
    levels: usize,
    level_weight: impl Fn(usize) -> f64,
    pinning: f64,
) -> Result<PinnedGraph> {
    if levels == 0 || levels > 12 {
        return invalid(format!("hierarchical level {levels} outside 1..=12"));
    }
    if !(pinning > 0.0) || !pinning.is_finite() {
        return invalid(format!("hierarchical pinning {pinning} must be positive"));
    }
    let wl: Vec<f64> = (1..=levels).map(&level_weight).collect();
    if let Some((r, w)) = wl.iter().enumerate().find(|(_, w)| !(**w > 0.0) || !w.is_finite()) {
        return invalid(format!("level weight w^H({}) = {w} must be positive", r + 1));
    }
    let n = 1usize << levels;
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let dh = (usize::BITS - (i ^ j).leading_zeros()) as usize;
            weights[i * n + j] = wl[dh - 1];
            weights[j * n + i] = wl[dh - 1];
        }
    }
    let labels = (0..n)
        .map(|v| (0..levels).map(|k| if (v >> k) & 1 == 1 { '1' } else { '0' }).collect())
        .collect();
    Ok(PinnedGraph::from_flat(n, weights, vec![pinning; n])?.with_labels(labels))
}

/// Pinning of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChainPinning {
    /// External pinning vertex with the given strengths `h_1..h_N`.
    P1(Vec<f64>),
    /// The last chain vertex is the pinning vertex.
    P2,
}

/// Chain on `{1..N}` with `W_{i-1,i} = W̄ i^α` plus optional extra edges.
///
/// Extra edges are `(a, b, weight)` with 1-based chain labels and added to
/// whatever weight the pair already carries. For `P2` the vertex `N` is
/// removed and its incident weights become pinning, so the model has `N-1`
/// vertices labelled `1..N-1`.
pub fn build_chain(
    length: usize,
    alpha: f64,
    wbar: f64,
    pinning: &ChainPinning,
    extra_edges: &[(usize, usize, f64)],
) -> Result<PinnedGraph> {
    if length < 2 {
        return invalid("chain needs N >= 2");
    }
    if !(wbar > 0.0) || !alpha.is_finite() {
        return invalid("chain needs W̄ > 0 and finite α");
    }
    let n = length;
    let mut full = vec![0.0; n * n];
    for i in 2..=n {
        let w = wbar * (i as f64).powf(alpha);
        full[(i - 2) * n + (i - 1)] = w;
        full[(i - 1) * n + (i - 2)] = w;
    }
    for &(a, b, w) in extra_edges {
        if a == b || a == 0 || b == 0 || a > n || b > n {
            return invalid(format!("extra edge ({a},{b}) is not an edge of the chain's complete graph"));
        }
        if !(w >= 0.0) || !w.is_finite() {
            return invalid(format!("extra edge weight {w} must be >= 0"));
        }
        full[(a - 1) * n + (b - 1)] += w;
        full[(b - 1) * n + (a - 1)] += w;
    }
    match pinning {
        ChainPinning::P1(h) => {
            if h.len() != n {
                return invalid(format!("P1 pinning needs {n} entries"));
            }
            if h.iter().all(|&x| x == 0.0) {
                return invalid("P1 pinning must not vanish identically");
            }
            let labels = (1..=n).map(|i| i.to_string()).collect();
            Ok(PinnedGraph::from_flat(n, full, h.clone())?.with_labels(labels))
        }
        ChainPinning::P2 => {
            let m = n - 1;
            let mut w = vec![0.0; m * m];
            for i in 0..m {
                for j in 0..m {
                    w[i * m + j] = full[i * n + j];
                }
            }
            let h = (0..m).map(|j| full[j * n + (n - 1)]).collect();
            let labels = (1..=m).map(|i| i.to_string()).collect();
            Ok(PinnedGraph::from_flat(m, w, h)?.with_labels(labels))
        }
    }
}

/// Chain `i_1..i_N` with `W_{i_{l-1} i_l} = 2^{2l-3} w^H(l)` and pinnings
/// `h_{i_l} = 2^{l-1} h^H`; all other weights are zero.
pub fn build_effective_chain(
    levels: usize,
    level_weight: impl Fn(usize) -> f64,
    pinning: f64,
) -> Result<PinnedGraph> {
    if levels < 2 {
        return invalid("effective chain needs N >= 2");
    }
    if !(pinning > 0.0) {
        return invalid("effective chain needs h^H > 0");
    }
    let n = levels;
    let mut w = vec![0.0; n * n];
    for l in 2..=n {
        let x = 2f64.powi(2 * l as i32 - 3) * level_weight(l);
        w[(l - 2) * n + (l - 1)] = x;
        w[(l - 1) * n + (l - 2)] = x;
    }
    let h = (1..=n).map(|l| 2f64.powi(l as i32 - 1) * pinning).collect();
    let labels = (1..=n).map(|l| format!("i{l}")).collect();
    Ok(PinnedGraph::from_flat(n, w, h)?.with_labels(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hierarchical_small_cases() {
        let g = build_hierarchical(1, |_| 5.0, 2.0).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.weight(0, 1), 5.0);
        assert_eq!(g.pinning(), &[2.0, 2.0]);

        let g = build_hierarchical(2, |r| hierarchical_weight_bound(1.0, 4.0, r), 1.0).unwrap();
        // (0,0) = 0, (1,0) = 1, (0,1) = 2
        assert_eq!(g.weight(0, 1), 2.0);
        assert_eq!(g.weight(0, 2), 8.0);
        assert_eq!(g.labels()[1], "10");
        assert!(build_hierarchical(2, |_| 1.0, 0.0).is_err());
        assert!(build_hierarchical(2, |r| if r == 2 { 0.0 } else { 1.0 }, 1.0).is_err());
    }

    #[test]
    fn hierarchical_rows_are_permutations_of_each_other() {
        let g = build_hierarchical(4, |r| r as f64 + 0.5, 1.0).unwrap();
        let sorted_row = |i: usize| {
            let mut r: Vec<f64> = (0..g.n()).map(|j| g.weight(i, j)).collect();
            r.sort_by(f64::total_cmp);
            r
        };
        let first = sorted_row(0);
        for i in 1..g.n() {
            assert_eq!(sorted_row(i), first);
        }
        // 2^{r-1} neighbours at level r
        for r in 1..=4 {
            let c = first.iter().filter(|&&w| w == r as f64 + 0.5).count();
            assert_eq!(c, 1 << (r - 1));
        }
    }

    #[test]
    fn chain_p1_and_p2() {
        let g = build_chain(3, 4.0, 1.0, &ChainPinning::P1(vec![1.0, 0.0, 0.0]), &[]).unwrap();
        assert_eq!(g.weight(0, 1), 16.0);
        assert_eq!(g.weight(1, 2), 81.0);
        assert_eq!(g.weight(0, 2), 0.0);

        let g = build_chain(3, 4.0, 1.0, &ChainPinning::P2, &[]).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.pinning(), &[0.0, 81.0]);
        assert_eq!(g.weight(0, 1), 16.0);

        let g = build_chain(2, 4.0, 3.0, &ChainPinning::P2, &[]).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.pinning(), &[48.0]);

        assert!(build_chain(3, 4.0, 1.0, &ChainPinning::P1(vec![0.0; 3]), &[]).is_err());
    }

    #[test]
    fn chain_extra_edges_feed_p2_pinning() {
        let g = build_chain(4, 4.0, 1.0, &ChainPinning::P2, &[(1, 4, 2.5), (1, 3, 0.5)]).unwrap();
        assert_eq!(g.pinning(), &[2.5, 0.0, 256.0]);
        assert_eq!(g.weight(0, 2), 0.5);
        assert!(build_chain(4, 4.0, 1.0, &ChainPinning::P2, &[(2, 2, 1.0)]).is_err());
    }

    #[test]
    fn effective_chain_weights() {
        let g = build_effective_chain(3, |l| l as f64, 1.5).unwrap();
        assert_eq!(g.weight(0, 1), 4.0);
        assert_eq!(g.weight(1, 2), 24.0);
        assert_eq!(g.pinning(), &[1.5, 3.0, 6.0]);

        let g = build_effective_chain(3, |r| hierarchical_weight_bound(1.0, 4.0, r), 1.0).unwrap();
        assert_eq!(g.weight(0, 1), 16.0);
        assert_eq!(g.weight(1, 2), 81.0);
    }
}
