//! Long-range boxes in `Z^d`, the binary-tree relabelling of a box and the
//! hierarchical distance.

use super::PinnedGraph;
use crate::error::{invalid, Error, Result};
use crate::exec::CompensatedSum;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma, gamma_ur};

/// Depth of the least common ancestor of two leaves of the binary tree:
/// the smallest `l` such that the strings agree at every index `>= l`.
pub fn hierarchical_distance(z: &[u8], w: &[u8]) -> Result<usize> {
    if z.len() != w.len() {
        return invalid(format!("bitstring lengths differ: {} vs {}", z.len(), w.len()));
    }
    Ok(z.iter()
        .zip(w)
        .rposition(|(a, b)| a != b)
        .map_or(0, |k| k + 1))
}

fn check_box(d: usize, levels: usize) -> Result<()> {
    if d == 0 || levels == 0 {
        return invalid("dimension and level must be positive");
    }
    if d * levels > 24 {
        return invalid(format!("box with 2^{} vertices is too large", d * levels));
    }
    Ok(())
}

/// Interleaves binary digits: `z_n` is digit `n / d` of coordinate `n mod d`.
pub fn box_to_binary(d: usize, levels: usize, point: &[u64]) -> Result<Vec<u8>> {
    check_box(d, levels)?;
    if point.len() != d {
        return invalid(format!("point has {} coordinates, expected {d}", point.len()));
    }
    let side = 1u64 << levels;
    if let Some(c) = point.iter().find(|&&c| c >= side) {
        return invalid(format!("coordinate {c} outside [0, {}]", side - 1));
    }
    Ok((0..levels * d)
        .map(|n| ((point[n % d] >> (n / d)) & 1) as u8)
        .collect())
}

/// Inverse of [`box_to_binary`].
pub fn binary_to_box(d: usize, levels: usize, bits: &[u8]) -> Result<Vec<u64>> {
    check_box(d, levels)?;
    if bits.len() != d * levels || bits.iter().any(|&b| b > 1) {
        return invalid("bitstring has wrong length or non-binary digits");
    }
    let mut point = vec![0u64; d];
    for (n, &b) in bits.iter().enumerate() {
        point[n % d] |= u64::from(b) << (n / d);
    }
    Ok(point)
}

/// Long-range weight profile: the monotone decreasing envelope
/// `w(x) = scale · sup_{t >= x} b(t)` of
/// `b(x) = 8 W̄ 2^{2d} (d log₂ x)^α / x^{2d}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightProfile {
    pub dim: usize,
    pub alpha: f64,
    pub wbar: f64,
    #[serde(default = "one")]
    pub scale: f64,
}

fn one() -> f64 {
    1.0
}

pub fn default_weight_profile(dim: usize, alpha: f64, wbar: f64) -> Result<WeightProfile> {
    WeightProfile::new(dim, alpha, wbar, 1.0)
}

/// A lattice sum evaluated by `ℓ∞` shells up to `radius`, plus a certified
/// bracket for the remaining tail. `certificate` bounds `|value - exact|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellSum {
    pub value: f64,
    pub certificate: f64,
    pub radius: u64,
}

const TAIL_RELATIVE_TARGET: f64 = 1e-10;
const MAX_RADIUS: u64 = 1 << 26;

impl WeightProfile {
    pub fn new(dim: usize, alpha: f64, wbar: f64, scale: f64) -> Result<Self> {
        if dim == 0 {
            return invalid("dimension must be >= 1");
        }
        if !(alpha > 3.0) || !alpha.is_finite() {
            return invalid(format!("alpha = {alpha} must exceed 3"));
        }
        if !(wbar > 0.0) || !wbar.is_finite() {
            return invalid(format!("W̄ = {wbar} must be positive"));
        }
        if !(scale >= 1.0) || !scale.is_finite() {
            return invalid(format!("scale = {scale} must be >= 1 to dominate the lower bound"));
        }
        Ok(WeightProfile { dim, alpha, wbar, scale })
    }

    fn prefactor(&self) -> f64 {
        8.0 * self.wbar * 4f64.powi(self.dim as i32)
    }

    /// The pointwise lower bound `b(x)` the profile must dominate.
    pub fn lower_bound(&self, x: f64) -> f64 {
        let d = self.dim as f64;
        self.prefactor() * (d * x.log2()).powf(self.alpha) / x.powf(2.0 * d)
    }

    /// `b` increases on `(1, x*)` and decreases afterwards, `x* = e^{α/(2d)}`.
    pub fn critical_point(&self) -> f64 {
        (self.alpha / (2.0 * self.dim as f64)).exp()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.scale * self.lower_bound(x.max(self.critical_point()))
    }

    /// `Σ_{i ∈ Z^d \ {0}} w(‖i‖∞)`.
    pub fn lattice_sum(&self) -> Result<ShellSum> {
        self.outside_shell_sum(1, |_| 0)
    }

    /// Sums `(#shell points not excluded) · w(r)` over `r >= 1`. `excluded(r)`
    /// counts points at distance `r` to skip and must vanish for `r >= min_radius`.
    fn outside_shell_sum(&self, min_radius: u64, excluded: impl Fn(u64) -> u64) -> Result<ShellSum> {
        let mut radius = min_radius.max(self.convexity_radius()).max(64);
        loop {
            let s = self.shell_sum_at(radius, &excluded);
            if s.certificate <= TAIL_RELATIVE_TARGET * s.value.abs() {
                return Ok(s);
            }
            if radius >= MAX_RADIUS {
                return Err(Error::NumericFailure(format!(
                    "shell-sum tail certificate {:.3e} still above target at radius {radius}",
                    s.certificate
                )));
            }
            radius *= 2;
        }
    }

    fn shell_sum_at(&self, radius: u64, excluded: &impl Fn(u64) -> u64) -> ShellSum {
        let mut acc = CompensatedSum::default();
        for r in (1..=radius).rev() {
            let count = shell_size(self.dim, r) - excluded(r) as f64;
            if count > 0.0 {
                acc.add(count * self.eval(r as f64));
            }
        }
        let (lo, hi) = self.tail_bracket(radius as f64);
        acc.add(0.5 * (lo + hi));
        ShellSum { value: acc.value(), certificate: 0.5 * (hi - lo), radius }
    }

    /// Coefficients `a_j` of the shell size `(2r+1)^d - (2r-1)^d = Σ a_j r^j`.
    fn shell_coefficients(&self) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|j| {
                let odd = (d - j) % 2 == 1;
                if odd {
                    2.0 * binomial(d, j) * 2f64.powi(j as i32)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Smallest radius beyond which every tail term `(ln t)^α t^{-c}` is
    /// decreasing and convex and the envelope coincides with `b`.
    fn convexity_radius(&self) -> u64 {
        let a = self.alpha;
        let mut y_min = self.critical_point().ln();
        for j in 0..self.dim {
            let c = (2 * self.dim - j) as f64;
            let disc = ((2.0 * c + 1.0) * a).powi(2) - 4.0 * c * (c + 1.0) * a * (a - 1.0);
            let root = ((2.0 * c + 1.0) * a + disc.max(0.0).sqrt()) / (2.0 * c * (c + 1.0));
            y_min = y_min.max(root).max(a / c);
        }
        y_min.exp().ceil() as u64 + 1
    }

    /// Certified bracket for `Σ_{r > R} S(r) w(r)` using convexity:
    /// `∫_R^∞ f - f(R)/2 <= Σ_{r>R} f(r) <= ∫_{R+1/2}^∞ f`.
    fn tail_bracket(&self, radius: f64) -> (f64, f64) {
        let a = self.alpha;
        let d = self.dim as f64;
        let k = self.scale * self.prefactor() * (d / std::f64::consts::LN_2).powf(a);
        let mut lo = 0.0;
        let mut hi = 0.0;
        for (j, coef) in self.shell_coefficients().into_iter().enumerate() {
            if coef == 0.0 {
                continue;
            }
            let c = 2.0 * d - j as f64;
            let integral = |x: f64| {
                let s = c - 1.0;
                gamma(a + 1.0) * gamma_ur(a + 1.0, s * x.ln()) / s.powf(a + 1.0)
            };
            let f_r = radius.ln().powf(a) * radius.powf(-c);
            lo += coef * k * (integral(radius) - 0.5 * f_r);
            hi += coef * k * integral(radius + 0.5);
        }
        (lo, hi)
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Number of points of `Z^d` at `ℓ∞` distance exactly `r >= 1` from a point.
fn shell_size(d: usize, r: u64) -> f64 {
    let r = r as f64;
    (2.0 * r + 1.0).powi(d as i32) - (2.0 * r - 1.0).powi(d as i32)
}

/// Wired-boundary pinning `h_i = Σ_{j ∉ Λ_N} w(‖i - j‖∞)` of a box point.
/// `radius` forces a fixed truncation; `None` grows it until the tail
/// certificate drops below `1e-10 · h_i`.
pub fn box_pinning(
    d: usize,
    levels: usize,
    profile: &WeightProfile,
    point: &[u64],
    radius: Option<u64>,
) -> Result<ShellSum> {
    check_box(d, levels)?;
    let side = 1i64 << levels;
    let pt: Vec<i64> = point.iter().map(|&c| c as i64).collect();
    let inside_within = |r: i64| -> u64 {
        if r < 0 {
            return 0;
        }
        pt.iter()
            .map(|&c| ((c + r).min(side - 1) - (c - r).max(0) + 1) as u64)
            .product()
    };
    let excluded = |r: u64| inside_within(r as i64) - inside_within(r as i64 - 1);
    match radius {
        Some(r) if r < side as u64 || r < profile.convexity_radius() => {
            invalid(format!("truncation radius {r} too small for a certified tail"))
        }
        Some(r) => Ok(profile.shell_sum_at(r, &excluded)),
        None => profile.outside_shell_sum(side as u64, excluded),
    }
}

/// Box `{0..2^N-1}^d` with `W_ij = w(‖i-j‖∞)` and wired pinning.
/// Vertex index is `Σ_k i_k 2^{Nk}` (coordinate 0 varies fastest).
pub fn build_long_range_box(d: usize, levels: usize, profile: &WeightProfile) -> Result<PinnedGraph> {
    check_box(d, levels)?;
    if profile.dim != d {
        return invalid("profile dimension does not match the box");
    }
    let side = 1u64 << levels;
    let n = 1usize << (levels * d);
    let points: Vec<Vec<u64>> = (0..n)
        .map(|idx| (0..d).map(|k| (idx as u64 >> (levels * k)) % side).collect())
        .collect();
    let mut weights = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let dist = points[i]
                .iter()
                .zip(&points[j])
                .map(|(a, b)| a.abs_diff(*b))
                .max()
                .unwrap_or(0);
            let w = profile.eval(dist as f64);
            weights[i * n + j] = w;
            weights[j * n + i] = w;
        }
    }
    let pinning = points
        .iter()
        .map(|p| box_pinning(d, levels, profile, p, None).map(|s| s.value))
        .collect::<Result<Vec<_>>>()?;
    let labels = points
        .iter()
        .map(|p| format!("({})", p.iter().map(u64::to_string).collect::<Vec<_>>().join(",")))
        .collect();
    Ok(PinnedGraph::from_flat(n, weights, pinning)?.with_labels(labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hierarchical_distance_examples() {
        assert_eq!(hierarchical_distance(&[0, 1, 0], &[0, 1, 0]).unwrap(), 0);
        assert_eq!(hierarchical_distance(&[1, 0, 1], &[0, 0, 1]).unwrap(), 1);
        assert_eq!(hierarchical_distance(&[0, 0, 0], &[0, 0, 1]).unwrap(), 3);
        assert!(hierarchical_distance(&[0, 1], &[0]).is_err());
    }

    #[test]
    fn phi_examples() {
        assert_eq!(box_to_binary(2, 2, &[0, 0]).unwrap(), vec![0, 0, 0, 0]);
        assert_eq!(box_to_binary(2, 2, &[1, 0]).unwrap(), vec![1, 0, 0, 0]);
        assert_eq!(box_to_binary(2, 2, &[2, 3]).unwrap(), vec![0, 1, 1, 1]);
        assert!(box_to_binary(2, 2, &[4, 0]).is_err());
        assert!(box_to_binary(2, 2, &[1]).is_err());
    }

    #[test]
    fn profile_rejects_small_alpha() {
        assert!(default_weight_profile(1, 3.0, 1.0).is_err());
        assert!(WeightProfile::new(1, 4.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn profile_is_flat_below_critical_point() {
        for d in 1..=3 {
            let p = default_weight_profile(d, 4.5, 2.0).unwrap();
            let xc = (4.5 / (2.0 * d as f64)).exp();
            let top = p.lower_bound(xc);
            for x in [1.0, 1.5, xc * 0.9, xc] {
                assert!((p.eval(x) - top).abs() <= 1e-12 * top, "d={d} x={x}");
            }
            // b increases right below x* and decreases right above it
            assert!(p.lower_bound(xc * 0.99) < top && p.lower_bound(xc * 1.01) < top);
        }
    }

    #[test]
    fn profile_matches_lower_bound_far_out() {
        let p = default_weight_profile(1, 4.0, 1.0).unwrap();
        let expect = 32.0 * (1e6f64).log2().powi(4) * 1e-12;
        assert!((p.eval(1e6) - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn profile_dominates_lower_bound_and_decreases() {
        let p = default_weight_profile(2, 4.0, 3.0).unwrap();
        for x in [1.0, 2.0, 7.5, 100.0] {
            assert!(p.eval(x) >= p.lower_bound(x));
        }
        let mut prev = f64::INFINITY;
        for k in 0..400 {
            let x = 1.0 + 0.25 * k as f64;
            let v = p.eval(x);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn lattice_sum_is_finite_and_certified() {
        for d in 1..=2 {
            let p = default_weight_profile(d, 4.0, 1.0).unwrap();
            let s = p.lattice_sum().unwrap();
            assert!(s.value.is_finite() && s.value > 0.0);
            assert!(s.certificate <= 1e-10 * s.value);
        }
    }

    #[test]
    fn shell_sizes() {
        assert_eq!(shell_size(1, 3), 2.0);
        assert_eq!(shell_size(2, 1), 8.0);
        assert_eq!(shell_size(3, 1), 26.0);
        let p = default_weight_profile(3, 4.0, 1.0).unwrap();
        let coeffs = p.shell_coefficients();
        let r = 5.0f64;
        let poly: f64 = coeffs.iter().enumerate().map(|(j, a)| a * r.powi(j as i32)).sum();
        assert_eq!(poly, shell_size(3, 5));
    }
}
