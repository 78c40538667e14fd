//! Small dense linear algebra used in the hot loops.
//!
//! Matrices are row-major `n*n` slices. The sampler and the quadrature oracle
//! factor one small Laplacian per field configuration, so these routines avoid
//! allocation; the determinant lemmas use `nalgebra` directly.

use nalgebra::DMatrix;

/// Relative eigenvalue tolerance for positive-definiteness decisions:
/// a symmetric matrix counts as positive definite when its smallest
/// eigenvalue exceeds `PD_RELATIVE_TOL * max|entry|`.
pub const PD_RELATIVE_TOL: f64 = 1e-9;

/// In-place Cholesky factorization `A = L Lᵀ`; on success the lower triangle
/// of `a` holds `L` (the strict upper triangle is left untouched).
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    debug_assert_eq!(a.len(), n * n);
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let ljj = d.sqrt();
        a[j * n + j] = ljj;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / ljj;
        }
    }
    true
}

/// `log det` of a Cholesky factor stored in the lower triangle.
pub fn cholesky_logdet(l: &[f64], n: usize) -> f64 {
    (0..n).map(|i| l[i * n + i].ln()).sum::<f64>() * 2.0
}

/// Solves `Lᵀ x = b` in place for a lower-triangular factor `L`.
pub fn solve_upper_transposed(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Solves `L x = b` in place.
pub fn solve_lower(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

/// Log-determinant of a symmetric positive definite matrix, `None` if the
/// factorization breaks down. `work` must have length `n*n`.
pub fn logdet_spd(a: &[f64], n: usize, work: &mut [f64]) -> Option<f64> {
    work.copy_from_slice(a);
    cholesky_in_place(work, n).then(|| cholesky_logdet(work, n))
}

pub fn to_dmatrix(a: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, n, a)
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Positive-definiteness with the relative tolerance [`PD_RELATIVE_TOL`].
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    let ev = sym_eigenvalues(m);
    match ev.first() {
        Some(&lo) => lo > PD_RELATIVE_TOL * max_abs(m),
        None => true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cholesky_logdet_matches_direct_determinant() {
        let a = [4.0, -3.0, -3.0, 5.0];
        let mut w = [0.0; 4];
        let ld = logdet_spd(&a, 2, &mut w).unwrap();
        assert!((ld - 11.0_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = [1.0, 2.0, 2.0, 1.0];
        let mut w = [0.0; 4];
        assert!(logdet_spd(&a, 2, &mut w).is_none());
    }

    #[test]
    fn triangular_solves_invert_the_factor() {
        let a = [4.0, -3.0, 0.5, -3.0, 5.0, 1.0, 0.5, 1.0, 3.0];
        let mut l = a;
        assert!(cholesky_in_place(&mut l, 3));
        let b = [1.0, -2.0, 0.25];
        let mut x = b;
        solve_lower(&l, 3, &mut x);
        solve_upper_transposed(&l, 3, &mut x);
        for i in 0..3 {
            let ax: f64 = (0..3).map(|k| a[i * 3 + k] * x[k]).sum();
            assert!((ax - b[i]).abs() < 1e-12);
        }
    }
}
