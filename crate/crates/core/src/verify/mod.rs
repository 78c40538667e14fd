//! Randomized and battery verification suites.
//!
//! Every suite returns one [`LemmaReport`] per checked statement. Randomized
//! trials draw from `ChaCha8Rng` seeded with the suite seed, on a stream
//! derived from the lemma and trial index, so a report is reproducible and
//! independent of the execution strategy.

pub mod battery;
pub mod detlemmas;
pub mod oracle_suites;
pub mod random;
pub mod regime_suite;
pub mod resistance_suite;

use crate::error::{invalid, Error, Result};
use crate::exec::{map_indexed, Execution};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Normalization,
    Ward,
    Detlemmas,
    Resistance,
    Regime,
    OracleVsMcmc,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Normalization,
        Suite::Ward,
        Suite::Detlemmas,
        Suite::Resistance,
        Suite::Regime,
        Suite::OracleVsMcmc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Normalization => "normalization",
            Suite::Ward => "ward",
            Suite::Detlemmas => "detlemmas",
            Suite::Resistance => "resistance",
            Suite::Regime => "regime",
            Suite::OracleVsMcmc => "oracle_vs_mcmc",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown suite {s:?}")))
    }
}

/// Outcome of one lemma over its trials. `worst_residual` is the largest
/// signed violation measure seen; it is `≤ 0` (or below the lemma's
/// tolerance) when every trial passed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub lemma: String,
    pub trials: usize,
    pub failures: usize,
    pub worst_residual: f64,
    pub seed: u64,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn summary_line(&self) -> String {
        format!(
            "{:<28} {:>6} trials {:>4} failures  worst residual {:+.3e}  {}",
            self.lemma,
            self.trials,
            self.failures,
            self.worst_residual,
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

/// One trial's verdict.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub residual: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `residual <= tol`.
    pub fn at_most(residual: f64, tol: f64) -> Self {
        Check { residual, pass: residual <= tol }
    }
}

/// Accumulates trial verdicts into a report.
#[derive(Debug, Clone)]
pub struct Tally {
    lemma: String,
    seed: u64,
    trials: usize,
    failures: usize,
    worst: f64,
}

impl Tally {
    pub fn new(lemma: &str, seed: u64) -> Self {
        Tally { lemma: lemma.to_owned(), seed, trials: 0, failures: 0, worst: f64::NEG_INFINITY }
    }

    pub fn add(&mut self, c: Check) {
        self.trials += 1;
        // NaN counts as a failure
        if !c.pass || c.residual.is_nan() {
            self.failures += 1;
        }
        if c.residual.is_nan() {
            self.worst = f64::INFINITY;
        } else {
            self.worst = self.worst.max(c.residual);
        }
    }

    pub fn report(self) -> LemmaReport {
        let worst = if self.trials == 0 {
            0.0
        } else if self.worst.is_finite() {
            self.worst
        } else {
            f64::MAX.copysign(self.worst)
        };
        LemmaReport { lemma: self.lemma, trials: self.trials, failures: self.failures, worst_residual: worst, seed: self.seed }
    }
}

/// Runs `trials` independent randomized trials of `lemma`, each fed its own
/// generator; errors inside a trial count as failures.
pub fn randomized<F>(lemma: &str, id: u64, trials: usize, seed: u64, exec: Execution, f: F) -> LemmaReport
where
    F: Fn(&mut random::TrialRng) -> Result<Check> + Sync + Send,
{
    let checks = map_indexed(exec, trials, |t| {
        let mut rng = random::trial_rng(seed, id, t);
        f(&mut rng).unwrap_or(Check { residual: f64::NAN, pass: false })
    });
    let mut tally = Tally::new(lemma, seed);
    for c in checks {
        tally.add(c);
    }
    tally.report()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub lemmas: Vec<LemmaReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.lemmas.iter().all(LemmaReport::passed)
    }

    pub fn summary(&self) -> String {
        let mut out = format!("suite {} (seed {})\n", self.suite, self.seed);
        for l in &self.lemmas {
            out.push_str(&l.summary_line());
            out.push('\n');
        }
        out.push_str(if self.passed() { "result: PASS\n" } else { "result: FAIL\n" });
        out
    }
}

/// Runs a suite. `trials` sets the number of randomized instances per lemma
/// for `detlemmas` and `resistance`; the battery suites ignore it.
pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> Result<SuiteReport> {
    if trials == 0 && matches!(suite, Suite::Detlemmas | Suite::Resistance) {
        return invalid("randomized suites need at least one trial");
    }
    let exec = Execution::Auto;
    let lemmas = match suite {
        Suite::Normalization => oracle_suites::normalization_suite(seed)?,
        Suite::Ward => oracle_suites::ward_suite(seed)?,
        Suite::Detlemmas => detlemmas::all(trials, seed, exec),
        Suite::Resistance => resistance_suite::all(trials, seed, exec),
        Suite::Regime => regime_suite::all(seed)?,
        Suite::OracleVsMcmc => oracle_suites::oracle_vs_mcmc_suite(seed)?.reports,
    };
    Ok(SuiteReport { suite, seed, lemmas })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("nope".parse::<Suite>().is_err());
    }

    #[test]
    fn tally_counts_nan_as_failure() {
        let mut t = Tally::new("x", 1);
        t.add(Check::at_most(-1.0, 0.0));
        t.add(Check { residual: f64::NAN, pass: true });
        let r = t.report();
        assert_eq!((r.trials, r.failures), (2, 1));
        assert!(r.to_json().contains("\"lemma\":\"x\""));
    }
}
