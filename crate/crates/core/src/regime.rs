//! Explicit constants and admissibility conditions of the moment bounds.

use crate::error::{invalid, Result};
use crate::graph::{hierarchical_pinning_bound, hierarchical_weight_bound, WeightProfile};
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, SQRT_2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeConstants {
    pub alpha: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub c1: f64,
    pub c3: f64,
    pub c4: f64,
    pub w0_bar: f64,
    pub c_delta_bound: f64,
}

/// `c₁(α) = (2/3) e^{-√2 (α-1)/(α-3)}`.
pub fn c1(alpha: f64) -> f64 {
    2.0 / 3.0 * (-SQRT_2 * (alpha - 1.0) / (alpha - 3.0)).exp()
}

/// `e^{√2 (a-1)/(a-3)}` with `a = α - γ`; bounds `C_δ = e^{√2 Σ √δ_l}`.
pub fn c_delta_bound(alpha: f64, gamma: f64) -> f64 {
    let a = alpha - gamma;
    (SQRT_2 * (a - 1.0) / (a - 3.0)).exp()
}

/// `C_δ = e^{√2 Σ_{l ≤ terms} √δ_l}` for the cutoff schedule, truncated.
pub fn c_delta_partial(alpha: f64, gamma: f64, terms: usize) -> f64 {
    let s: f64 = (1..=terms).map(|j| delta(alpha, gamma, j).sqrt()).sum();
    (SQRT_2 * s).exp()
}

fn delta(alpha: f64, gamma: f64, j: usize) -> f64 {
    (j as f64).powf(-(alpha - gamma - 1.0))
}

pub fn constants(alpha: f64, gamma: f64, kappa: f64) -> Result<RegimeConstants> {
    if !(alpha - gamma > 3.0) || !alpha.is_finite() || !gamma.is_finite() {
        return invalid(format!("need alpha - gamma > 3, got alpha={alpha}, gamma={gamma}"));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return invalid(format!("kappa must lie in (0, 1], got {kappa}"));
    }
    let cd = c_delta_bound(alpha, gamma);
    let c4 = (2.0 * LN_2 / (3.0 * cd) * kappa).min(1.0 / 16.0);
    Ok(RegimeConstants {
        alpha,
        gamma,
        kappa,
        c1: c1(alpha),
        c3: c4 / LN_2,
        c4,
        w0_bar: -(kappa / 36.0).ln() / (2.0 * c4),
        c_delta_bound: cd,
    })
}

impl RegimeConstants {
    /// `m_x = c₃ W̄ x^γ`, the largest exponent allowed at chain position `x`.
    pub fn m_max_at(&self, wbar: f64, x: usize) -> f64 {
        self.c3 * wbar * (x as f64).powf(self.gamma)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("constants serialize")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub admissible: bool,
    pub reasons: Vec<String>,
    pub kappa_max: f64,
    pub wbar_min: f64,
    pub m_max: f64,
}

/// The three hypotheses `κ ≤ 1/(16 c₁ ln 2)`, `W̄ ≥ log₂(36/κ)/(2 c₁ κ)` and
/// `m ≤ c₁ κ W̄`; `reasons` names every failing clause.
pub fn admissible(kappa: f64, wbar: f64, m: f64, alpha: f64) -> Admissibility {
    let c = c1(alpha);
    let kappa_max = 1.0 / (16.0 * c * LN_2);
    let wbar_min = (36.0 / kappa).log2() / (2.0 * c * kappa);
    let m_max = c * kappa * wbar;
    let mut reasons = Vec::new();
    if !(alpha > 3.0) {
        reasons.push(format!("alpha {alpha} not above 3"));
    }
    if !(kappa > 0.0) {
        reasons.push(format!("kappa {kappa} not positive"));
    }
    if !(kappa <= kappa_max) {
        reasons.push(format!("kappa above {kappa_max}"));
    }
    if !(wbar >= wbar_min) {
        reasons.push(format!("W̄ below threshold {wbar_min}"));
    }
    if !(m <= m_max) || m < 0.0 {
        reasons.push(format!("m outside [0, {m_max}]"));
    }
    Admissibility { admissible: reasons.is_empty(), reasons, kappa_max, wbar_min, m_max }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeVariant {
    /// `κ = W̄^{-s}`.
    Power { s: f64 },
    /// `κ = c₂ ln W̄ / W̄`.
    Log { c2: f64 },
}

/// Default `c₂ = 1.06 / (2 c₁ ln 2)`.
pub fn default_c2(alpha: f64) -> f64 {
    1.06 / (2.0 * c1(alpha) * LN_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeExample {
    pub kappa: f64,
    pub m_max: f64,
    pub admissibility: Admissibility,
}

pub fn regime_examples(alpha: f64, wbar: f64, variant: RegimeVariant) -> Result<RegimeExample> {
    if !(alpha > 3.0) || !(wbar > 1.0) {
        return invalid("need alpha > 3 and W̄ > 1");
    }
    let kappa = match variant {
        RegimeVariant::Power { s } => {
            if !(s > 0.0 && s < 1.0) {
                return invalid(format!("power s must lie in (0,1), got {s}"));
            }
            wbar.powf(-s)
        }
        RegimeVariant::Log { c2 } => {
            let threshold = 1.0 / (2.0 * c1(alpha) * LN_2);
            if !(c2 > threshold) {
                return invalid(format!("c2 must exceed {threshold}, got {c2}"));
            }
            c2 * wbar.ln() / wbar
        }
    };
    let m_max = c1(alpha) * kappa * wbar;
    Ok(RegimeExample { kappa, m_max, admissibility: admissible(kappa, wbar, 0.0, alpha) })
}

/// `(δ_j, p_j) = (j^{-(α-γ-1)}, 4 c₄ W̄ j^α)`.
pub fn cutoff_schedule(constants: &RegimeConstants, wbar: f64, j: usize) -> Result<(f64, f64)> {
    if j == 0 {
        return invalid("schedule index starts at 1");
    }
    let jf = j as f64;
    Ok((delta(constants.alpha, constants.gamma, j), 4.0 * constants.c4 * wbar * jf.powf(constants.alpha)))
}

/// Gap of the hierarchical-to-chain transfer: for `l = 2..=N`,
/// `W_{i_{l-1} i_l} - W̄ l^α`, and finally `2^{N-1} h^H - W̄ (N+1)^α`.
/// All entries are exactly zero at the minimal weights.
pub fn hierarchical_transfer_gaps(wbar: f64, alpha: f64, levels: usize) -> Vec<f64> {
    let mut gaps: Vec<f64> = (2..=levels)
        .map(|l| {
            let w = 2f64.powi(2 * l as i32 - 3) * hierarchical_weight_bound(wbar, alpha, l);
            w - wbar * (l as f64).powf(alpha)
        })
        .collect();
    let h = hierarchical_pinning_bound(wbar, alpha, levels);
    gaps.push(2f64.powi(levels as i32 - 1) * h - wbar * (levels as f64 + 1.0).powf(alpha));
    gaps
}

/// Relative slack of the long-range-to-hierarchical transfer on `d·N` levels:
/// `w(2^{⌈r/d⌉}) / (8 W̄ 2^{-2r} r^α) - 1` for each `r`, and
/// `min_i h_i / (2 W̄ 2^{-Nd} (Nd+1)^α) - 1` using the supplied pinning minimum.
pub fn long_range_transfer_slack(profile: &WeightProfile, levels: usize, min_pinning: f64) -> Vec<f64> {
    let (d, wbar, alpha) = (profile.dim, profile.wbar, profile.alpha);
    let total = levels * d;
    let mut out: Vec<f64> = (1..=total)
        .map(|r| {
            let x = 2f64.powi(r.div_ceil(d) as i32);
            profile.eval(x) / hierarchical_weight_bound(wbar, alpha, r) - 1.0
        })
        .collect();
    out.push(min_pinning / hierarchical_pinning_bound(wbar, alpha, total) - 1.0);
    out
}
