//! Single-site random-walk Metropolis on `u`, with exact Gaussian draws of `s`.
//!
//! In u-marginal mode the target is the `u`-marginal density and `s` is drawn
//! from its conditional only when recorded. In joint mode each sweep updates
//! `u` against the joint density at fixed `s`, then redraws `s` exactly.

mod observable;
mod stats;

pub use observable::{make_observable, BFactor, Observable, ObservableSpec, Protection};
pub use stats::{batch_means, split_rhat, Estimate, MAX_BATCHES, MIN_BATCHES};

use crate::error::{invalid, Error, Result};
use crate::exec::{map_indexed, Execution};
use crate::graph::PinnedGraph;
use crate::linalg;
use crate::model::{cosh_m1, laplacian_into, sample_s_given_u};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    UMarginal,
    Joint,
}

/// Target single-site acceptance during burn-in tuning.
pub const TARGET_ACCEPTANCE: f64 = 0.44;
/// Acceptance outside this range after burn-in produces a warning.
pub const ACCEPTANCE_RANGE: (f64, f64) = (0.1, 0.9);
/// Split-R̂ above this value is reported.
pub const RHAT_THRESHOLD: f64 = 1.05;

const TUNE_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerParams {
    /// Sweeps in total, burn-in included.
    pub n_steps: usize,
    pub burn_in: usize,
    pub thinning: usize,
    /// Initial proposal scale.
    pub u_step: f64,
    pub mode: Mode,
    pub chains: usize,
    pub batches: usize,
    /// Also draw and keep `s` in u-marginal mode.
    pub record_s: bool,
    pub execution: Execution,
}

impl Default for SamplerParams {
    fn default() -> Self {
        SamplerParams {
            n_steps: 20_000,
            burn_in: 2_000,
            thinning: 1,
            u_step: 0.5,
            mode: Mode::UMarginal,
            chains: 4,
            batches: 25,
            record_s: false,
            execution: Execution::Auto,
        }
    }
}

impl SamplerParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps == 0 || self.thinning == 0 || self.chains == 0 {
            return invalid("n_steps, thinning and chains must be positive");
        }
        if self.burn_in >= self.n_steps {
            return invalid(format!("burn_in {} must be below n_steps {}", self.burn_in, self.n_steps));
        }
        if !(self.u_step > 0.0) || !self.u_step.is_finite() {
            return invalid("u_step must be positive");
        }
        if !(MIN_BATCHES..=MAX_BATCHES).contains(&self.batches) {
            return invalid(format!("batches must lie in [{MIN_BATCHES}, {MAX_BATCHES}]"));
        }
        if self.kept() < self.batches {
            return invalid("fewer kept samples than batches");
        }
        Ok(())
    }

    pub fn kept(&self) -> usize {
        (self.n_steps - self.burn_in) / self.thinning
    }

    fn keeps_s(&self) -> bool {
        self.record_s || self.mode == Mode::Joint
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainResult {
    pub chain_id: usize,
    pub seed: u64,
    pub n: usize,
    /// Kept `u` samples, row-major.
    pub u: Vec<f64>,
    /// Kept `s` samples when recorded.
    pub s: Option<Vec<f64>>,
    pub acceptance_rate: f64,
    pub step_sizes: Vec<f64>,
    pub warning: Option<String>,
}

impl ChainResult {
    pub fn len(&self) -> usize {
        if self.n == 0 {
            0
        } else {
            self.u.len() / self.n
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Observable values along the chain.
    pub fn trace(&self, obs: &Observable) -> Result<Vec<f64>> {
        let n = self.n;
        match (obs.needs_s(), &self.s) {
            (false, _) => Ok(self.u.chunks_exact(n).map(|u| obs.eval(u, &[])).collect()),
            (true, Some(s)) => Ok(self.u.chunks_exact(n).zip(s.chunks_exact(n)).map(|(u, s)| obs.eval(u, s)).collect()),
            (true, None) => invalid(format!("{} needs s but the chain did not record it", obs.name())),
        }
    }
}

/// Incremental state: `u`, `s`, and the local energy bookkeeping.
struct State<'a> {
    graph: &'a PinnedGraph,
    n: usize,
    u: Vec<f64>,
    s: Vec<f64>,
    mode: Mode,
    half_logdet: f64,
    work: Vec<f64>,
}

impl<'a> State<'a> {
    fn new(graph: &'a PinnedGraph, mode: Mode) -> Result<Self> {
        let n = graph.n();
        let mut st = State { graph, n, u: vec![0.0; n], s: vec![0.0; n], mode, half_logdet: 0.0, work: vec![0.0; n * n] };
        st.half_logdet = st.half_logdet_at(None).ok_or_else(|| Error::NumericFailure("D(0) not positive definite".into()))?;
        Ok(st)
    }

    /// `½ log det D(u)` with `u_i` replaced when given.
    fn half_logdet_at(&mut self, replace: Option<(usize, f64)>) -> Option<f64> {
        let old = replace.map(|(i, v)| std::mem::replace(&mut self.u[i], v));
        laplacian_into(self.graph, &self.u, &mut self.work);
        if let (Some((i, _)), Some(o)) = (replace, old) {
            self.u[i] = o;
        }
        let n = self.n;
        linalg::cholesky_in_place(&mut self.work, n).then(|| 0.5 * linalg::cholesky_logdet(&self.work, n))
    }

    /// Energy terms depending on `u_i = v`, i.e. minus the local log density.
    fn local_energy(&self, i: usize, v: f64) -> f64 {
        let g = self.graph;
        let mut e = v;
        let joint = self.mode == Mode::Joint;
        let h = g.pinning()[i];
        if h > 0.0 {
            e += h * cosh_m1(v);
            if joint {
                e += 0.5 * h * self.s[i] * self.s[i] * v.exp();
            }
        }
        for j in 0..self.n {
            let w = g.weight(i, j);
            if j == i || w == 0.0 {
                continue;
            }
            e += w * cosh_m1(v - self.u[j]);
            if joint {
                let ds = self.s[i] - self.s[j];
                e += 0.5 * w * ds * ds * (v + self.u[j]).exp();
            }
        }
        e
    }

    /// One Metropolis proposal at site `i`; returns whether it was accepted.
    fn update(&mut self, i: usize, step: f64, rng: &mut ChaCha8Rng) -> bool {
        let old = self.u[i];
        let new = old + step * rng.sample::<f64, _>(StandardNormal);
        let Some(hl) = self.half_logdet_at(Some((i, new))) else {
            return false;
        };
        // joint density carries det D, the marginal det D^{1/2}
        let det_factor = if self.mode == Mode::Joint { 2.0 } else { 1.0 };
        let log_ratio = self.local_energy(i, old) - self.local_energy(i, new) + det_factor * (hl - self.half_logdet);
        let accept = log_ratio >= 0.0 || rng.random::<f64>() < log_ratio.exp();
        if accept {
            self.u[i] = new;
            self.half_logdet = hl;
        }
        accept
    }
}

/// Runs one chain; deterministic in `(seed, chain_id)`.
pub fn run_mcmc(graph: &PinnedGraph, params: &SamplerParams, seed: u64, chain_id: usize) -> Result<ChainResult> {
    params.validate()?;
    let n = graph.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_id as u64);
    let mut st = State::new(graph, params.mode)?;
    let mut steps = vec![params.u_step; n];
    let mut window = vec![0usize; n];
    let (mut accepted, mut proposed) = (0usize, 0usize);
    let kept = params.kept();
    let mut us = Vec::with_capacity(kept * n);
    let mut ss = params.keeps_s().then(|| Vec::with_capacity(kept * n));

    for sweep in 0..params.n_steps {
        let burning = sweep < params.burn_in;
        for (i, step) in steps.iter().enumerate() {
            let acc = st.update(i, *step, &mut rng);
            if burning {
                window[i] += acc as usize;
            } else {
                accepted += acc as usize;
                proposed += 1;
            }
        }
        if params.mode == Mode::Joint {
            st.s = sample_s_given_u(graph, &st.u, &mut rng)?;
        }
        if burning && (sweep + 1) % TUNE_EVERY == 0 {
            for (step, w) in steps.iter_mut().zip(window.iter_mut()) {
                let rate = *w as f64 / TUNE_EVERY as f64;
                *step *= ((rate - TARGET_ACCEPTANCE) * 2.0).exp();
                *w = 0;
            }
        }
        if !burning && (sweep - params.burn_in + 1) % params.thinning == 0 && us.len() < kept * n {
            us.extend_from_slice(&st.u);
            if let Some(ss) = ss.as_mut() {
                if params.mode == Mode::Joint {
                    ss.extend_from_slice(&st.s);
                } else {
                    ss.extend(sample_s_given_u(graph, &st.u, &mut rng)?);
                }
            }
        }
    }
    let acceptance_rate = accepted as f64 / proposed.max(1) as f64;
    let warning = (!(ACCEPTANCE_RANGE.0..=ACCEPTANCE_RANGE.1).contains(&acceptance_rate))
        .then(|| format!("chain {chain_id}: acceptance rate {acceptance_rate:.3} outside [0.1, 0.9]"));
    Ok(ChainResult { chain_id, seed, n, u: us, s: ss, acceptance_rate, step_sizes: steps, warning })
}

/// Batch-means estimate of `obs` on one chain.
pub fn estimate(chain: &ChainResult, obs: &Observable, batches: usize) -> Result<Estimate> {
    batch_means(&chain.trace(obs)?, batches)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PooledEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub ess: f64,
    pub n_used: usize,
    pub rhat: f64,
    pub per_chain: Vec<Estimate>,
}

impl PooledEstimate {
    pub fn rhat_ok(&self) -> bool {
        !(self.rhat > RHAT_THRESHOLD)
    }
}

/// Independent chains `0..params.chains` sharing `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSet {
    pub params: SamplerParams,
    pub chains: Vec<ChainResult>,
}

impl ChainSet {
    pub fn run(graph: &PinnedGraph, params: &SamplerParams, seed: u64) -> Result<Self> {
        params.validate()?;
        let chains = map_indexed(params.execution, params.chains, |c| run_mcmc(graph, params, seed, c))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(ChainSet { params: *params, chains })
    }

    /// Runs with `record_s` switched on when any observable needs `s`.
    pub fn run_for(graph: &PinnedGraph, params: &SamplerParams, seed: u64, obs: &[Observable]) -> Result<Self> {
        let mut p = *params;
        p.record_s |= obs.iter().any(Observable::needs_s);
        Self::run(graph, &p, seed)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &str> {
        self.chains.iter().filter_map(|c| c.warning.as_deref())
    }

    /// Mean of the chain means, with the matching standard error.
    pub fn pooled(&self, obs: &Observable) -> Result<PooledEstimate> {
        let traces = self.chains.iter().map(|c| c.trace(obs)).collect::<Result<Vec<_>>>()?;
        let per_chain = traces.iter().map(|t| batch_means(t, self.params.batches)).collect::<Result<Vec<_>>>()?;
        let k = per_chain.len() as f64;
        let mean = per_chain.iter().map(|e| e.mean).sum::<f64>() / k;
        let stderr = per_chain.iter().map(|e| e.stderr * e.stderr).sum::<f64>().sqrt() / k;
        let refs: Vec<&[f64]> = traces.iter().map(Vec::as_slice).collect();
        Ok(PooledEstimate {
            mean,
            stderr,
            ess: per_chain.iter().map(|e| e.ess).sum(),
            n_used: per_chain.iter().map(|e| e.n_used).sum(),
            rhat: split_rhat(&refs),
            per_chain,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Vertex;

    fn quick(mode: Mode) -> SamplerParams {
        SamplerParams { n_steps: 30_000, burn_in: 2_000, mode, chains: 4, execution: Execution::Sequential, ..Default::default() }
    }

    #[test]
    fn single_vertex_cosh_u() {
        // E[cosh u] = 1.5 at h = 1
        let g = PinnedGraph::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let obs = make_observable(&g, &ObservableSpec::cosh_u(0, 1.0)).unwrap();
        for mode in [Mode::UMarginal, Mode::Joint] {
            let set = ChainSet::run(&g, &quick(mode), 5).unwrap();
            let e = set.pooled(&obs).unwrap();
            assert!((e.mean - 1.5).abs() < 3.0 * e.stderr, "{mode:?} {e:?}");
            assert!(set.warnings().next().is_none());
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let g = PinnedGraph::new(vec![vec![0.0, 2.0], vec![2.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let p = SamplerParams { n_steps: 2_000, burn_in: 200, chains: 2, record_s: true, ..Default::default() };
        let a = ChainSet::run(&g, &p, 9).unwrap();
        let b = ChainSet::run(&g, &SamplerParams { execution: Execution::Sequential, ..p }, 9).unwrap();
        assert_eq!(a.chains, b.chains);
        let c = ChainSet::run(&g, &p, 10).unwrap();
        assert_ne!(a.chains[0].u, c.chains[0].u);
    }

    #[test]
    fn monotone_in_exponent() {
        let g = PinnedGraph::new(vec![vec![0.0]], vec![2.0]).unwrap();
        let set = ChainSet::run(&g, &SamplerParams { n_steps: 2_000, burn_in: 200, ..Default::default() }, 1).unwrap();
        let est = |m| set.pooled(&make_observable(&g, &ObservableSpec::cosh_u(0, m)).unwrap()).unwrap().mean;
        assert!(est(0.0) == 1.0 && est(1.0) < est(2.0) && est(2.0) < est(3.0));
    }

    #[test]
    fn s_observable_requires_recording() {
        let g = PinnedGraph::new(vec![vec![0.0]], vec![1.0]).unwrap();
        let obs = make_observable(&g, &ObservableSpec::SSquared { vertex: Vertex::Site(0) }).unwrap();
        let p = SamplerParams { n_steps: 500, burn_in: 100, chains: 1, ..Default::default() };
        let set = ChainSet::run(&g, &p, 1).unwrap();
        assert!(set.pooled(&obs).is_err());
        let set = ChainSet::run_for(&g, &p, 1, std::slice::from_ref(&obs)).unwrap();
        assert!(set.pooled(&obs).is_ok());
    }

    #[test]
    fn params_validation() {
        assert!(SamplerParams { burn_in: 20_000, ..Default::default() }.validate().is_err());
        assert!(SamplerParams { batches: 10, ..Default::default() }.validate().is_err());
        assert!(SamplerParams::default().validate().is_ok());
    }
}
