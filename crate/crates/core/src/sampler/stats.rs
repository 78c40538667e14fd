//! Batch-means error bars and between-chain diagnostics.

use crate::error::{invalid, Result};
use serde::{Deserialize, Serialize};

pub const MIN_BATCHES: usize = 20;
pub const MAX_BATCHES: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub ess: f64,
    pub n_used: usize,
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64], m: f64) -> f64 {
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() as f64 - 1.0)
}

/// Batch-means estimate over `batches` equal batches; the leading
/// `len % batches` values are dropped.
pub fn batch_means(values: &[f64], batches: usize) -> Result<Estimate> {
    if !(MIN_BATCHES..=MAX_BATCHES).contains(&batches) {
        return invalid(format!("batch count must lie in [{MIN_BATCHES}, {MAX_BATCHES}], got {batches}"));
    }
    let size = values.len() / batches;
    if size == 0 {
        return invalid(format!("{} values cannot fill {batches} batches", values.len()));
    }
    let used = &values[values.len() - size * batches..];
    let n_used = used.len();
    let m = mean(used);
    let bm: Vec<f64> = used.chunks_exact(size).map(mean).collect();
    // asymptotic variance of the mean times n
    let sigma2 = size as f64 * variance(&bm, m);
    let stderr = (sigma2 / n_used as f64).sqrt();
    let sample_var = if n_used > 1 { variance(used, m) } else { 0.0 };
    let ess = if sigma2 > 0.0 {
        (n_used as f64 * sample_var / sigma2).min(n_used as f64)
    } else {
        n_used as f64
    };
    Ok(Estimate { mean: m, stderr, ess: ess.max(f64::MIN_POSITIVE), n_used })
}

/// Split potential scale reduction over equal-length chains.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return f64::NAN;
    }
    let parts: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[c.len() - half..]])
        .collect();
    let means: Vec<f64> = parts.iter().map(|p| mean(p)).collect();
    let w = parts.iter().zip(&means).map(|(p, &m)| variance(p, m)).sum::<f64>() / parts.len() as f64;
    let b = half as f64 * variance(&means, mean(&means));
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    let n = half as f64;
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn constant_stream() {
        let e = batch_means(&[1.0; 1000], 25).unwrap();
        assert_eq!((e.mean, e.stderr), (1.0, 0.0));
        assert_eq!(e.ess, 1000.0);
    }

    #[test]
    fn too_few_batches() {
        assert!(batch_means(&[1.0; 100], 10).is_err());
        assert!(batch_means(&[1.0; 10], 20).is_err());
    }

    #[test]
    fn iid_calibration() {
        // average stderr within 20% of sigma / sqrt(n), sigma = 2
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 5000;
        let mut sum = 0.0;
        for _ in 0..100 {
            let x: Vec<f64> = (0..n).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            sum += batch_means(&x, 25).unwrap().stderr;
        }
        let target = 2.0 / (n as f64).sqrt();
        assert!((sum / 100.0 / target - 1.0).abs() < 0.2, "{}", sum / 100.0 / target);
    }

    #[test]
    fn rhat_near_one_for_iid() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c: Vec<Vec<f64>> = (0..4).map(|_| (0..2000).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let refs: Vec<&[f64]> = c.iter().map(Vec::as_slice).collect();
        assert!((split_rhat(&refs) - 1.0).abs() < 0.01);
        let shifted: Vec<Vec<f64>> = c.iter().enumerate().map(|(k, v)| v.iter().map(|x| x + k as f64).collect()).collect();
        let refs: Vec<&[f64]> = shifted.iter().map(Vec::as_slice).collect();
        assert!(split_rhat(&refs) > 1.05);
    }
}
