//! JSON graph descriptors.
//!
//! ```json
//! {"family": "chain", "length": 6, "alpha": 4.0, "wbar": 271.0, "pinning": "P2"}
//! {"family": "custom", "weights": [[0.0, 3.0], [3.0, 0.0]], "pinning": [1.0, 2.0]}
//! ```
//!
//! Weights are written with shortest round-trip formatting, so a custom
//! descriptor reproduces every IEEE-754 double exactly.

use super::{
    build_chain, build_effective_chain, build_hierarchical, build_long_range_box,
    hierarchical_pinning_bound, hierarchical_weight_bound, ChainPinning, PinnedGraph,
    WeightProfile,
};
use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphDescriptor {
    /// Long-range box `{0..2^levels-1}^dim` with the default envelope profile.
    #[serde(rename = "box")]
    LongRangeBox {
        dim: usize,
        levels: usize,
        alpha: f64,
        wbar: f64,
        #[serde(default = "unit_scale")]
        scale: f64,
    },
    /// Hierarchical lattice; defaults to the smallest admissible weights
    /// `8 W̄ 2^{-2r} r^α` and pinning `2 W̄ 2^{-N} (N+1)^α`.
    Hierarchical {
        levels: usize,
        alpha: f64,
        wbar: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        level_weights: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pinning: Option<f64>,
    },
    Chain {
        length: usize,
        alpha: f64,
        wbar: f64,
        pinning: ChainPinningDesc,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        extra_edges: Vec<ExtraEdge>,
    },
    /// Effective chain built from the default hierarchical weights.
    EffectiveChain { levels: usize, alpha: f64, wbar: f64 },
    Custom { weights: Vec<Vec<f64>>, pinning: Vec<f64> },
}

fn unit_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ChainPinningDesc {
    P1(Vec<f64>),
    P2,
}

/// Extra chain edge with 1-based endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtraEdge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

impl GraphDescriptor {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("descriptor serialization is infallible")
    }

    pub fn build(&self) -> Result<PinnedGraph> {
        match self {
            GraphDescriptor::LongRangeBox { dim, levels, alpha, wbar, scale } => {
                let profile = WeightProfile::new(*dim, *alpha, *wbar, *scale)?;
                build_long_range_box(*dim, *levels, &profile)
            }
            GraphDescriptor::Hierarchical { levels, alpha, wbar, level_weights, pinning } => {
                let h = pinning.unwrap_or_else(|| hierarchical_pinning_bound(*wbar, *alpha, *levels));
                match level_weights {
                    Some(w) if w.len() != *levels => {
                        invalid(format!("level_weights needs {levels} entries"))
                    }
                    Some(w) => build_hierarchical(*levels, |r| w[r - 1], h),
                    None => build_hierarchical(
                        *levels,
                        |r| hierarchical_weight_bound(*wbar, *alpha, r),
                        h,
                    ),
                }
            }
            GraphDescriptor::Chain { length, alpha, wbar, pinning, extra_edges } => {
                let p = match pinning {
                    ChainPinningDesc::P1(h) => ChainPinning::P1(h.clone()),
                    ChainPinningDesc::P2 => ChainPinning::P2,
                };
                let extra: Vec<_> = extra_edges.iter().map(|e| (e.a, e.b, e.weight)).collect();
                build_chain(*length, *alpha, *wbar, &p, &extra)
            }
            GraphDescriptor::EffectiveChain { levels, alpha, wbar } => build_effective_chain(
                *levels,
                |r| hierarchical_weight_bound(*wbar, *alpha, r),
                hierarchical_pinning_bound(*wbar, *alpha, *levels),
            ),
            GraphDescriptor::Custom { weights, pinning } => {
                PinnedGraph::new(weights.clone(), pinning.clone())
            }
        }
    }
}

impl PinnedGraph {
    /// Explicit descriptor carrying every weight.
    pub fn to_descriptor(&self) -> GraphDescriptor {
        GraphDescriptor::Custom { weights: self.weight_rows(), pinning: self.pinning().to_vec() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_each_family() {
        let docs = [
            r#"{"family":"box","dim":1,"levels":1,"alpha":4.0,"wbar":1.0}"#,
            r#"{"family":"hierarchical","levels":2,"alpha":4.0,"wbar":1.0}"#,
            r#"{"family":"chain","length":3,"alpha":4.0,"wbar":1.0,"pinning":{"P1":[1.0,0.0,0.0]}}"#,
            r#"{"family":"chain","length":3,"alpha":4.0,"wbar":1.0,"pinning":"P2","extra_edges":[{"a":1,"b":3,"weight":2.0}]}"#,
            r#"{"family":"effective_chain","levels":3,"alpha":4.0,"wbar":1.0}"#,
            r#"{"family":"custom","weights":[[0.0,3.0],[3.0,0.0]],"pinning":[1.0,2.0]}"#,
        ];
        let sizes = [2, 4, 3, 2, 3, 2];
        for (doc, n) in docs.iter().zip(sizes) {
            let d = GraphDescriptor::from_json(doc).unwrap();
            assert_eq!(d.build().unwrap().n(), n, "{doc}");
            let again = GraphDescriptor::from_json(&d.to_json()).unwrap();
            assert_eq!(again, d);
        }
        assert!(GraphDescriptor::from_json(r#"{"family":"torus"}"#).is_err());
    }

    #[test]
    fn hierarchical_default_weights() {
        let d = GraphDescriptor::from_json(r#"{"family":"hierarchical","levels":2,"alpha":4.0,"wbar":1.0}"#)
            .unwrap();
        let g = d.build().unwrap();
        assert_eq!(g.weight(0, 1), 2.0);
        assert_eq!(g.weight(0, 2), 8.0);
        assert_eq!(g.pinning()[0], 2.0 * 0.25 * 81.0);
    }

    proptest! {
        #[test]
        fn custom_descriptor_roundtrips_bits(a in 1e-300f64..1e300, b in 0.0f64..1.0, h in 1e-12f64..1e12) {
            let g = PinnedGraph::new(
                vec![vec![0.0, a, b], vec![a, 0.0, 0.0], vec![b, 0.0, 0.0]],
                vec![h, 0.0, h / 3.0],
            ).unwrap();
            let json = g.to_descriptor().to_json();
            let back = GraphDescriptor::from_json(&json).unwrap().build().unwrap();
            for (x, y) in g.weights_flat().iter().zip(back.weights_flat()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
            for (x, y) in g.pinning().iter().zip(back.pinning()) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }
}
