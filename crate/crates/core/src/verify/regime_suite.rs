//! Deterministic checks of the regime constants and the graph transfers.

use super::{Check, LemmaReport, Tally};
use crate::error::Result;
use crate::graph::{box_pinning, default_weight_profile};
use crate::regime::{
    admissible, c1, constants, cutoff_schedule, default_c2, hierarchical_transfer_gaps,
    long_range_transfer_slack, regime_examples, RegimeVariant,
};
use std::f64::consts::{LN_2, SQRT_2};

pub const CONSTANT_TOL: f64 = 1e-12;

fn tally(lemma: &str, seed: u64, checks: impl IntoIterator<Item = Check>) -> LemmaReport {
    let mut t = Tally::new(lemma, seed);
    for c in checks {
        t.add(c);
    }
    t.report()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// At `γ = 0, κ = 1`, `W̄₀ = max(16 ln 6, (3/2) e^{√2(α-1)/(α-3)} log₂ 6)`.
fn w0_special_case(seed: u64) -> Result<LemmaReport> {
    let mut checks = Vec::new();
    for alpha in [3.5, 4.0, 5.0, 10.0] {
        let k = constants(alpha, 0.0, 1.0)?;
        let expect = (16.0 * 6f64.ln()).max(1.5 * (SQRT_2 * (alpha - 1.0) / (alpha - 3.0)).exp() * 6f64.log2());
        checks.push(Check::at_most(rel(k.w0_bar, expect), CONSTANT_TOL));
    }
    Ok(tally("w0_special_case", seed, checks))
}

fn c3_equals_c1_kappa(seed: u64) -> Result<LemmaReport> {
    let mut checks = Vec::new();
    for alpha in [3.5, 4.0, 6.0] {
        for kappa in [1.0, 0.25, 1e-3] {
            let k = constants(alpha, 0.0, kappa)?;
            checks.push(Check::at_most(rel(k.c3, c1(alpha) * kappa), 1e-13));
        }
    }
    Ok(tally("c3_equals_c1_kappa", seed, checks))
}

fn hierarchical_transfer(seed: u64) -> Result<LemmaReport> {
    let mut checks = Vec::new();
    for wbar in [1.0, 271.0, 1e4] {
        for alpha in [3.5, 4.0] {
            for levels in 2..=6 {
                for g in hierarchical_transfer_gaps(wbar, alpha, levels) {
                    let scale = wbar * (levels as f64 + 1.0).powf(alpha);
                    checks.push(Check::at_most(-g / scale, 1e-13));
                    checks.push(Check::at_most(g.abs() / scale, 1e-12));
                }
            }
        }
    }
    Ok(tally("hierarchical_transfer", seed, checks))
}

fn long_range_transfer(seed: u64) -> Result<LemmaReport> {
    let mut checks = Vec::new();
    for d in [1usize, 2] {
        for levels in 1..=3usize {
            if d * levels > 4 {
                continue;
            }
            let profile = default_weight_profile(d, 4.0, 271.0)?;
            let side = 1u64 << levels;
            let n = 1usize << (levels * d);
            let mut min_h = f64::INFINITY;
            for idx in 0..n {
                let p: Vec<u64> = (0..d).map(|k| (idx as u64 >> (levels * k)) % side).collect();
                min_h = min_h.min(box_pinning(d, levels, &profile, &p, None)?.value);
            }
            for s in long_range_transfer_slack(&profile, levels, min_h) {
                checks.push(Check::at_most(-s, 1e-12));
            }
        }
    }
    Ok(tally("long_range_transfer", seed, checks))
}

fn cutoff_schedule_values(seed: u64) -> Result<LemmaReport> {
    let k = constants(4.0, 0.0, 1.0)?;
    let mut checks = vec![
        Check::at_most((cutoff_schedule(&k, 271.0, 1)?.0 - 1.0).abs(), 0.0),
        Check::at_most((cutoff_schedule(&k, 271.0, 2)?.0 - 0.125).abs(), 0.0),
    ];
    let mut sum = 0.0;
    for j in 1..=1_000_000 {
        sum += cutoff_schedule(&k, 271.0, j)?.0.sqrt();
    }
    checks.push(Check::at_most(sum - 3.0, -f64::EPSILON));
    let (_, p3) = cutoff_schedule(&k, 271.0, 3)?;
    checks.push(Check::at_most(rel(p3, 4.0 * k.c4 * 271.0 * 81.0), CONSTANT_TOL));
    Ok(tally("cutoff_schedule", seed, checks))
}

fn admissibility_examples(seed: u64) -> Result<LemmaReport> {
    let yes = |b: bool| Check { residual: if b { 0.0 } else { 1.0 }, pass: b };
    let mut checks = vec![
        yes(admissible(1.0, 300.0, 2.0, 4.0).admissible),
        yes(!admissible(1.0, 100.0, 0.0, 4.0).admissible),
        yes(!admissible(1.0, 300.0, 3.0, 4.0).admissible),
        yes(!admissible(10.0, 1e6, 0.0, 4.0).admissible),
    ];
    let p = regime_examples(4.0, 1e6, RegimeVariant::Power { s: 0.5 })?;
    checks.push(Check::at_most(rel(p.kappa, 1e-3), CONSTANT_TOL));
    checks.push(Check::at_most(rel(p.m_max, 1e6 * 1e-3 * c1(4.0)), CONSTANT_TOL));
    checks.push(yes(p.admissibility.admissible));
    let threshold = 1.0 / (2.0 * c1(4.0) * LN_2);
    checks.push(yes(regime_examples(4.0, 1e6, RegimeVariant::Log { c2: threshold * 0.99 }).is_err()));
    let l = regime_examples(4.0, 1e6, RegimeVariant::Log { c2: default_c2(4.0) })?;
    checks.push(yes(l.admissibility.admissible));
    Ok(tally("admissibility_examples", seed, checks))
}

fn monotonicity_grids(seed: u64) -> Result<LemmaReport> {
    let mut checks = Vec::new();
    let kappas: Vec<f64> = (1..=40).map(|i| i as f64 / 40.0).collect();
    for alpha in [3.5, 4.0, 6.0] {
        for w in kappas.windows(2) {
            let (a, b) = (constants(alpha, 0.0, w[0])?, constants(alpha, 0.0, w[1])?);
            checks.push(Check::at_most(b.w0_bar - a.w0_bar, 0.0));
            checks.push(Check::at_most(a.c4 - b.c4, 0.0));
        }
    }
    let alphas: Vec<f64> = (0..40).map(|i| 3.1 + i as f64 * 0.2).collect();
    for w in alphas.windows(2) {
        checks.push(Check::at_most(c1(w[0]) - c1(w[1]), 0.0));
    }
    for wbar in [300.0, 1e3, 1e5] {
        let a = admissible(0.5, wbar, 0.0, 4.0).m_max;
        let b = admissible(0.5, wbar * 1.01, 0.0, 4.0).m_max;
        checks.push(Check::at_most(a - b, 0.0));
    }
    Ok(tally("monotonicity_grids", seed, checks))
}

/// The battery is deterministic; `seed` is only echoed into the reports.
pub fn all(seed: u64) -> Result<Vec<LemmaReport>> {
    Ok(vec![
        w0_special_case(seed)?,
        c3_equals_c1_kappa(seed)?,
        hierarchical_transfer(seed)?,
        long_range_transfer(seed)?,
        cutoff_schedule_values(seed)?,
        admissibility_examples(seed)?,
        monotonicity_grids(seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes() {
        for r in all(0).unwrap() {
            assert!(r.passed(), "{r:?}");
            assert!(r.trials > 0);
        }
    }
}
