//! Gauss-Jordan inversion and the regularized right pseudo-inverse.

use super::{ComplexMatrix, KernelError};
use crate::scalar::{cr, C, Scalar};
use num_complex::Complex;

/// Invert a square complex matrix by Gauss-Jordan elimination with partial
/// pivoting. Fails with [`KernelError::SingularGram`] when a pivot falls
/// below `1e-13` times the largest input magnitude.
pub fn invert<T: Scalar>(a: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>, KernelError> {
    assert_eq!(a.rows(), a.cols(), "invert requires a square matrix");
    let n = a.rows();
    let scale = a.max_abs().max(T::one());
    let tol = T::lit(1e-13) * scale;

    // Augmented [A | I]
    let mut aug = ComplexMatrix::<T>::zeros(n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            aug[(i, j)] = a[(i, j)];
        }
        aug[(i, n + i)] = cr(T::one());
    }

    for col in 0..n {
        let mut best = col;
        let mut best_mag = aug[(col, col)].norm_sqr();
        for r in col + 1..n {
            let mag = aug[(r, col)].norm_sqr();
            if mag > best_mag {
                best_mag = mag;
                best = r;
            }
        }
        if best_mag.sqrt() < tol {
            return Err(KernelError::SingularGram);
        }
        aug.swap_rows(col, best);

        let pivot_inv = cr(T::one()) / aug[(col, col)];
        for j in 0..2 * n {
            aug[(col, j)] = aug[(col, j)] * pivot_inv;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = aug[(r, col)];
            if factor.norm_sqr() == T::zero() {
                continue;
            }
            for j in 0..2 * n {
                let delta = factor * aug[(col, j)];
                aug[(r, j)] = aug[(r, j)] - delta;
            }
        }
    }

    Ok(aug.col_block(n, 2 * n))
}

/// Regularized right pseudo-inverse `H^H (H H^H + alpha I)^{-1}` of an
/// `n_r x n_t` matrix, returning `n_t x n_r`.
///
/// With `alpha = 0` this is the plain right pseudo-inverse and requires
/// `H H^H` to be invertible.
pub fn regularized_pinv<T: Scalar>(
    h: &ComplexMatrix<T>,
    alpha: T,
) -> Result<ComplexMatrix<T>, KernelError> {
    assert!(alpha >= T::zero(), "alpha must be non-negative");
    let hh = h.hermitian();
    let gram = h.mul(&hh).add_scaled_identity(alpha);
    let gram_inv = invert(&gram)?;
    Ok(hh.mul(&gram_inv))
}

/// Determinant of a square complex matrix via LU with partial pivoting.
/// Used by tests as an oracle independent of the eigendecomposition path.
pub fn determinant<T: Scalar>(a: &ComplexMatrix<T>) -> C<T> {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let mut m = a.clone();
    let mut det = cr(T::one());
    for col in 0..n {
        let mut best = col;
        let mut best_mag = m[(col, col)].norm_sqr();
        for r in col + 1..n {
            let mag = m[(r, col)].norm_sqr();
            if mag > best_mag {
                best_mag = mag;
                best = r;
            }
        }
        if best_mag == T::zero() {
            return Complex::new(T::zero(), T::zero());
        }
        if best != col {
            m.swap_rows(col, best);
            det = -det;
        }
        let pivot = m[(col, col)];
        det = det * pivot;
        for r in col + 1..n {
            let factor = m[(r, col)] / pivot;
            for j in col..n {
                let delta = factor * m[(col, j)];
                m[(r, j)] = m[(r, j)] - delta;
            }
        }
    }
    det
}
