//! Theorem bounds and report rows.

use crate::config::{ExperimentConfig, RegimeParams};
use h22lab::graph::GraphDescriptor;
use h22lab::regime::admissible;
use h22lab::sampler::ObservableSpec;
use serde::Serialize;
use std::fmt;

/// Required distance of the estimate below the bound, in standard errors.
pub const MARGIN_SIGMA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Vacuous,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Vacuous => "vacuous",
        })
    }
}

/// The bound a theorem gives for one observable, or why none applies.
#[derive(Debug, Clone, PartialEq)]
pub enum Bound {
    Value(f64),
    Vacuous(String),
}

fn family_matches(graph: &GraphDescriptor, regime: &RegimeParams) -> Option<String> {
    let (alpha, wbar) = match graph {
        GraphDescriptor::LongRangeBox { alpha, wbar, .. }
        | GraphDescriptor::Hierarchical { alpha, wbar, .. }
        | GraphDescriptor::Chain { alpha, wbar, .. }
        | GraphDescriptor::EffectiveChain { alpha, wbar, .. } => (*alpha, *wbar),
        GraphDescriptor::Custom { .. } => return Some("custom graphs carry no theorem".into()),
    };
    if let GraphDescriptor::Hierarchical { level_weights: Some(_), .. } | GraphDescriptor::Hierarchical { pinning: Some(_), .. } = graph {
        return Some("hierarchical weights other than the minimal admissible ones".into());
    }
    if alpha != regime.alpha || wbar < regime.wbar {
        return Some(format!("graph built with alpha={alpha}, W̄={wbar} against regime alpha={}, W̄={}", regime.alpha, regime.wbar));
    }
    None
}

/// Theorem bound for `obs` on the configured graph; `Vacuous` when the
/// hypotheses fail or no statement covers the observable.
pub fn theorem_bound(config: &ExperimentConfig, obs: &ObservableSpec) -> Bound {
    let r = &config.regime;
    if let Some(why) = family_matches(&config.graph, r) {
        return Bound::Vacuous(why);
    }
    let m_row = match obs {
        ObservableSpec::BPow { factors, .. } => factors.iter().map(|f| f.m).fold(0.0, f64::max),
        other => other.exponent(),
    };
    let adm = admissible(r.kappa, r.wbar, m_row, r.alpha);
    if !adm.admissible {
        return Bound::Vacuous(adm.reasons.join("; "));
    }
    let one = 1.0 + r.kappa;
    let chain = matches!(config.graph, GraphDescriptor::Chain { .. } | GraphDescriptor::EffectiveChain { .. });
    match obs {
        ObservableSpec::CoshUPow { .. } => Bound::Value(one),
        ObservableSpec::CoshUDiffPow { m, .. } if chain => Bound::Value(one.powf((*m > 0.0) as u8 as f64)),
        ObservableSpec::CoshUDiffPow { m, .. } => Bound::Value(2f64.powf(m / 2.0) * one),
        ObservableSpec::BPow { factors, .. } if chain => {
            Bound::Value(one.powi(factors.iter().filter(|f| f.m > 0.0).count() as i32))
        }
        ObservableSpec::BPow { .. } => Bound::Vacuous("product bounds are stated for chains".into()),
        ObservableSpec::SSquared { .. } => Bound::Vacuous("no theorem bounds s^2".into()),
    }
}

/// One line of the main CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub observable: String,
    pub m: f64,
    pub estimate: f64,
    pub stderr: f64,
    /// Absent for quadrature rows.
    pub ess: Option<f64>,
    pub bound: Option<f64>,
    pub margin_sigma: Option<f64>,
    pub status: Status,
}

impl Row {
    pub fn new(obs: &ObservableSpec, estimate: f64, stderr: f64, ess: Option<f64>, bound: &Bound) -> Self {
        let (bound, margin, status) = match bound {
            Bound::Vacuous(_) => (None, None, Status::Vacuous),
            Bound::Value(b) => {
                let margin = margin_sigma(*b, estimate, stderr);
                let status = if margin >= MARGIN_SIGMA { Status::Pass } else { Status::Fail };
                (Some(*b), Some(margin), status)
            }
        };
        Row { observable: obs.to_string(), m: obs.exponent(), estimate, stderr, ess, bound, margin_sigma: margin, status }
    }
}

/// `(bound - estimate) / stderr`; an exact estimate gives `±∞` or 0.
pub fn margin_sigma(bound: f64, estimate: f64, stderr: f64) -> f64 {
    let gap = bound - estimate;
    if stderr > 0.0 {
        gap / stderr
    } else if gap > 0.0 {
        f64::INFINITY
    } else if gap < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}
