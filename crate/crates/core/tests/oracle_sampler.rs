use h22lab::oracle::{normalization, protected_ward_integral, quadrature_expectations, QuadratureSpec};
use h22lab::sampler::{make_observable, ChainSet, ObservableSpec, SamplerParams};
use h22lab::verify::oracle_suites::{ward_spec, zero_weight_instance};
use h22lab::{Execution, PinnedGraph, Vertex};

fn single(h: f64) -> PinnedGraph {
    PinnedGraph::new(vec![vec![0.0]], vec![h]).unwrap()
}

#[test]
fn single_vertex_moments_match_closed_forms() {
    for h in [0.5, 2.0, 8.0] {
        let g = single(h);
        let specs = [
            ObservableSpec::cosh_u(0, 1.0),
            ObservableSpec::cosh_u(0, 2.0),
            ObservableSpec::b_pow(Vertex::Site(0), Vertex::Root, 2.0),
        ];
        let obs: Vec<_> = specs.iter().map(|s| make_observable(&g, s).unwrap()).collect();
        let r = quadrature_expectations(&g, &obs, &QuadratureSpec::default()).unwrap();
        let eb1 = 1.0 + 1.0 / h;
        let expect = [1.0 + 0.5 / h, 1.0 + 1.0 / h + 0.75 / (h * h), 1.0 + 2.0 / h * eb1];
        for (q, e) in r.iter().zip(expect) {
            assert!((q.value - e).abs() < 1e-8 * e, "h={h}: {} vs {e}", q.value);
        }
    }
}

#[test]
fn two_site_normalization() {
    let g = PinnedGraph::new(vec![vec![0.0, 3.0], vec![3.0, 0.0]], vec![0.5, 2.0]).unwrap();
    let z = normalization(&g, &ward_spec()).unwrap();
    assert!((z - 1.0).abs() < 1e-6, "{z}");
}

#[test]
fn zero_weight_protected_integral_below_one() {
    let (g, asg) = zero_weight_instance().unwrap();
    let r = protected_ward_integral(&g, &asg, &ward_spec()).unwrap();
    assert!(r.value <= 1.0 + 1e-4, "{r:?}");
    assert!(r.value > 0.0);
}

#[test]
fn sampler_agrees_with_closed_form() {
    let h = 2.0;
    let g = single(h);
    let obs = make_observable(&g, &ObservableSpec::cosh_u(0, 1.0)).unwrap();
    let p = SamplerParams { n_steps: 40_000, burn_in: 4_000, execution: Execution::Sequential, ..Default::default() };
    let chains = ChainSet::run(&g, &p, 11).unwrap();
    let e = chains.pooled(&obs).unwrap();
    let exact = 1.0 + 0.5 / h;
    assert!(((e.mean - exact) / e.stderr).abs() < 4.0, "{e:?}");
    assert!(e.rhat_ok());
}

#[test]
fn chain_sets_replay_across_execution_modes() {
    let g = PinnedGraph::new(vec![vec![0.0, 3.0], vec![3.0, 0.0]], vec![2.0, 2.0]).unwrap();
    let p = SamplerParams { n_steps: 2_000, burn_in: 200, record_s: true, ..Default::default() };
    let a = ChainSet::run(&g, &SamplerParams { execution: Execution::Sequential, ..p }, 5).unwrap();
    let b = ChainSet::run(&g, &SamplerParams { execution: Execution::Parallel, ..p }, 5).unwrap();
    assert_eq!(a.chains, b.chains);
}
