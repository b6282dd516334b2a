//! Thin QR by modified Gram-Schmidt with one re-orthogonalization pass.

use super::{ComplexMatrix, KernelError};
use crate::scalar::{cr, vec_dot, vec_norm, C, Scalar};
use num_complex::Complex;

/// Thin QR factors of an `m x n` matrix with `m >= n`.
///
/// `q` is `m x n` with orthonormal columns, `r` is `n x n` upper triangular
/// with a real non-negative diagonal, so the factorization is unique for
/// full-column-rank inputs.
#[derive(Debug, Clone)]
pub struct QrFactors<T> {
    pub q: ComplexMatrix<T>,
    pub r: ComplexMatrix<T>,
}

/// Thin QR of `a` (`rows >= cols`).
///
/// Fails with [`KernelError::RankDeficient`] when a diagonal entry of `r`
/// falls below `1e-12 * ||a||_F`, which signals a degenerate channel draw.
pub fn qr_thin<T: Scalar>(a: &ComplexMatrix<T>) -> Result<QrFactors<T>, KernelError> {
    let (m, n) = (a.rows(), a.cols());
    assert!(m >= n, "qr_thin requires rows >= cols");
    let tol = T::lit(1e-12) * a.fro_norm();

    let mut q_cols: Vec<Vec<C<T>>> = (0..n).map(|j| a.col(j)).collect();
    let mut r = ComplexMatrix::<T>::zeros(n, n);

    for k in 0..n {
        // Two projection passes keep q orthonormal to machine precision even
        // for nearly dependent columns.
        for _pass in 0..2 {
            for j in 0..k {
                let proj = vec_dot(&q_cols[k], &q_cols[j]);
                r[(j, k)] = r[(j, k)] + proj;
                let (head, tail) = q_cols.split_at_mut(k);
                for (x, qj) in tail[0].iter_mut().zip(&head[j]) {
                    *x = *x - proj * qj;
                }
            }
        }
        let norm = vec_norm(&q_cols[k]);
        if norm < tol {
            return Err(KernelError::RankDeficient {
                index: k,
                magnitude: norm.as_f64(),
            });
        }
        r[(k, k)] = cr(norm);
        let inv = T::one() / norm;
        for x in q_cols[k].iter_mut() {
            *x = Complex::new(x.re * inv, x.im * inv);
        }
    }

    let q = ComplexMatrix::from_fn(m, n, |i, j| q_cols[j][i]);
    Ok(QrFactors { q, r })
}
