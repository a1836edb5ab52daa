//! Thin wrappers around dense linear algebra used as secondary routes:
//! LU solves for polishing and Poisson equations, and a dense spectral
//! radius for complex matrices via the real Schur form of the 2k x 2k
//! real embedding
//!
//! ```text
//!   [ Re M  -Im M ]
//!   [ Im M   Re M ]
//! ```
//!
//! whose eigenvalues are those of `M` together with their conjugates.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

/// Solve `A x = b` by LU with partial pivoting. `None` when singular to
/// working precision.
pub(crate) fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    a.clone().lu().solve(b)
}

/// Spectral radius of a complex `k x k` matrix (row-major entries) via the
/// real embedding and a dense eigenvalue computation.
pub(crate) fn complex_radius_dense(k: usize, entries: &[Complex64]) -> f64 {
    debug_assert_eq!(entries.len(), k * k);
    let mut m = DMatrix::<f64>::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let z = entries[i * k + j];
            m[(i, j)] = z.re;
            m[(i, j + k)] = -z.im;
            m[(i + k, j)] = z.im;
            m[(i + k, j + k)] = z.re;
        }
    }
    m.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_radius_of_diagonal_complex_matrix() {
        // diag(3i, 1 + i): radius 3
        let entries = vec![
            Complex64::new(0.0, 3.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 1.0),
        ];
        let r = complex_radius_dense(2, &entries);
        assert!((r - 3.0).abs() < 1e-12, "radius {r}");
    }

    #[test]
    fn lu_solves_small_system() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let b = DVector::from_row_slice(&[5.0, 10.0]);
        let x = lu_solve(&a, &b).unwrap();
        // 2x + y = 5, x + 3y = 10 -> x = 1, y = 3
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 3.0).abs() < 1e-14);
    }
}
