//! The fixed graph battery of the quadrature suites.

use crate::error::Result;
use crate::graph::PinnedGraph;

#[derive(Debug, Clone)]
pub struct BatteryGraph {
    pub name: String,
    pub graph: PinnedGraph,
}

pub const INTERNAL_WEIGHTS: [f64; 3] = [0.5, 3.0, 50.0];
pub const PINNINGS: [f64; 2] = [0.5, 2.0];

/// Single sites with `h ∈ {0.5, 2}` and two-site graphs with
/// `W ∈ {0.5, 3, 50}`, `h_1 = h_2 ∈ {0.5, 2}`.
pub fn standard_battery() -> Result<Vec<BatteryGraph>> {
    let mut out = Vec::new();
    for h in PINNINGS {
        out.push(BatteryGraph { name: format!("n1_h{h}"), graph: PinnedGraph::new(vec![vec![0.0]], vec![h])? });
    }
    for w in INTERNAL_WEIGHTS {
        for h in PINNINGS {
            out.push(BatteryGraph {
                name: format!("n2_w{w}_h{h}"),
                graph: PinnedGraph::new(vec![vec![0.0, w], vec![w, 0.0]], vec![h, h])?,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_shape() {
        let b = standard_battery().unwrap();
        assert_eq!(b.len(), 8);
        assert!(b.iter().all(|g| g.graph.n() <= 2));
        assert_eq!(b.iter().filter(|g| g.graph.n() == 2).count(), 6);
    }
}
