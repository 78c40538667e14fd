use h22lab::detbounds::{assumption_holds, det_id_minus_mg, det_laplacian_route, ExponentAssignment, ResistanceNetwork};
use h22lab::linalg::sym_eigenvalues;
use h22lab::model::{edge_b, gamma_matrix, laplacian, log_density};
use h22lab::sampler::batch_means;
use h22lab::{FieldConfig, PinnedGraph, Vertex};
use proptest::prelude::*;

/// Connected graph on `n` sites: a path plus random extra weights, site 0 pinned.
fn graph_strategy() -> impl Strategy<Value = PinnedGraph> {
    (1usize..=6).prop_flat_map(|n| {
        (
            prop::collection::vec(0.1f64..5.0, n - 1),
            prop::collection::vec(prop_oneof![Just(0.0), 0.1f64..5.0], n * n),
            prop::collection::vec(prop_oneof![Just(0.0), 0.1f64..5.0], n),
            0.1f64..5.0,
        )
            .prop_map(move |(path, extra, pin, h0)| {
                let mut w = vec![0.0; n * n];
                for i in 0..n {
                    for j in i + 1..n {
                        let x = extra[i * n + j] + if j == i + 1 { path[i] } else { 0.0 };
                        w[i * n + j] = x;
                        w[j * n + i] = x;
                    }
                }
                let mut h = pin;
                h[0] = h0;
                PinnedGraph::from_flat(n, w, h).unwrap()
            })
    })
}

fn with_config() -> impl Strategy<Value = (PinnedGraph, FieldConfig)> {
    graph_strategy().prop_flat_map(|g| {
        let n = g.n();
        (Just(g), prop::collection::vec(-2.0f64..2.0, n), prop::collection::vec(-2.0f64..2.0, n))
            .prop_map(|(g, u, s)| (g, FieldConfig::new(u, s)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn b_dominates_cosh_and_one((g, cfg) in with_config()) {
        for e in g.edges() {
            let b = edge_b(&cfg, e.plus, e.minus);
            let du = cfg.u_at(e.plus) - cfg.u_at(e.minus);
            prop_assert!(b >= 1.0);
            prop_assert!(b >= du.cosh() * (1.0 - 1e-15));
        }
    }

    #[test]
    fn laplacian_positive_definite((g, cfg) in with_config()) {
        let d = laplacian(&g, &cfg.u).unwrap();
        prop_assert!(sym_eigenvalues(&d)[0] > 0.0);
        prop_assert!(log_density(&g, &cfg).unwrap().is_finite());
    }

    #[test]
    fn gamma_is_psd((g, cfg) in with_config()) {
        let em = gamma_matrix(&g, &cfg).unwrap();
        let ev = sym_eigenvalues(&em.gamma);
        let top = ev[ev.len() - 1];
        prop_assert!(ev[0] > -1e-10 * top.max(1.0));
    }

    #[test]
    fn determinant_routes_agree((g, cfg) in with_config(), r in 0.0f64..0.95) {
        let m: Vec<f64> = g.edges().iter().map(|e| r * e.weight).collect();
        let asg = ExponentAssignment::unprotected(m).unwrap();
        let a = det_id_minus_mg(&g, &cfg, &asg).unwrap();
        let b = det_laplacian_route(&g, &cfg, &asg).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        let check = assumption_holds(&g, &cfg, &asg).unwrap();
        prop_assert!(check.sufficient && check.holds());
        prop_assert!(a > 0.0);
    }

    #[test]
    fn resistance_symmetric_and_monotone(g in graph_strategy(), bump in 0.01f64..10.0, pick in any::<prop::sample::Index>()) {
        let c = g.edge_weights();
        let net = ResistanceNetwork::from_graph(&g, &c).unwrap();
        let (x, y) = (Vertex::Site(0), Vertex::Root);
        let r = net.resistance(x, y).unwrap();
        prop_assert!((r - net.resistance(y, x).unwrap()).abs() <= 1e-12 * r);
        let mut up = c.clone();
        let k = pick.index(up.len());
        up[k] += bump;
        let r2 = ResistanceNetwork::from_graph(&g, &up).unwrap().resistance(x, y).unwrap();
        prop_assert!(r2 <= r * (1.0 + 1e-12));
    }

    #[test]
    fn batch_means_ess_bounded(v in prop::collection::vec(-10.0f64..10.0, 100..400), batches in 20usize..=50) {
        let e = batch_means(&v, batches).unwrap();
        prop_assert!(e.ess > 0.0 && e.ess <= e.n_used as f64);
        prop_assert!(e.stderr >= 0.0);
        let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(e.mean >= lo && e.mean <= hi);
    }
}
