//! Full complex SVD by one-sided Jacobi, plus a Hermitian eigensolver.
//!
//! One-sided Jacobi orthogonalizes the columns of the working matrix with
//! unitary plane rotations accumulated into `V`; singular values are the
//! final column norms. The dimensions here are tiny (antenna counts), so
//! robustness and deterministic conventions matter more than speed.

use super::{ComplexMatrix, KernelError};
use crate::scalar::{cr, vec_dot, C, Scalar};
use num_complex::Complex;

const MAX_SWEEPS: usize = 64;

/// Full SVD `a = u * diag(sigma) * v^H` with square unitary `u` (m x m) and
/// `v` (n x n); `sigma` holds the `min(m, n)` singular values sorted
/// descending.
#[derive(Debug, Clone)]
pub struct SvdFactors<T> {
    pub u: ComplexMatrix<T>,
    pub sigma: Vec<T>,
    pub v: ComplexMatrix<T>,
}

impl<T: Scalar> SvdFactors<T> {
    /// `u * diag(sigma) * v^H`, rebuilding the rectangular diagonal.
    pub fn reconstruct(&self) -> ComplexMatrix<T> {
        let m = self.u.rows();
        let n = self.v.rows();
        let mut s = ComplexMatrix::zeros(m, n);
        for (i, &sv) in self.sigma.iter().enumerate() {
            s[(i, i)] = cr(sv);
        }
        self.u.mul(&s).mul(&self.v.hermitian())
    }

    /// Number of singular values above `1e-10 * sigma_max`.
    pub fn rank(&self) -> usize {
        let tol = T::lit(1e-10) * self.sigma.first().copied().unwrap_or_else(T::zero);
        self.sigma.iter().filter(|&&s| s > tol).count()
    }
}

/// Full SVD of an arbitrary complex matrix.
pub fn svd_full<T: Scalar>(a: &ComplexMatrix<T>) -> Result<SvdFactors<T>, KernelError> {
    let (m, n) = (a.rows(), a.cols());
    assert!(m > 0 && n > 0, "svd_full requires a non-empty matrix");
    if m < n {
        let f = svd_full(&a.hermitian())?;
        return Ok(SvdFactors {
            u: f.v,
            sigma: f.sigma,
            v: f.u,
        });
    }

    let mut cols: Vec<Vec<C<T>>> = (0..n).map(|j| a.col(j)).collect();
    let mut v = ComplexMatrix::<T>::identity(n);
    let eps = T::epsilon() * T::lit(32.0);

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let app = crate::scalar::vec_norm_sqr(&cols[p]);
                let aqq = crate::scalar::vec_norm_sqr(&cols[q]);
                // gamma = w_p^H w_q
                let gamma = vec_dot(&cols[q], &cols[p]);
                let mag = gamma.norm();
                if app == T::zero() || aqq == T::zero() {
                    continue;
                }
                if mag <= eps * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;

                let phase = gamma / cr(mag); // e^{j phi}
                let tau = (aqq - app) / (T::lit(2.0) * mag);
                let t = {
                    let sign = if tau < T::zero() { -T::one() } else { T::one() };
                    sign / (tau.abs() + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                // J = [[c, s], [-s e^{-j phi}, c e^{-j phi}]]
                let pc = phase.conj();
                let jp = (cr(c), -pc * s); // coefficients of (col_p, col_q) for new col_p
                let jq = (cr(s), pc * c); //  ... for new col_q

                rotate_pair(&mut cols, p, q, jp, jq);
                rotate_cols(&mut v, p, q, jp, jq);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(KernelError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    // Singular values = column norms, sorted descending.
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<T> = cols.iter().map(|c| crate::scalar::vec_norm(c)).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());
    let sigma: Vec<T> = order.iter().map(|&i| norms[i]).collect();
    let v = permute_cols(&v, &order);

    // Left vectors: normalized columns where sigma is meaningful, completed
    // to a full orthonormal basis otherwise.
    let sigma_max = sigma.first().copied().unwrap_or_else(T::zero);
    let u_tol = sigma_max * T::epsilon() * T::lit(64.0);
    let mut u_vecs: Vec<Vec<C<T>>> = Vec::with_capacity(m);
    for (rank_pos, &src) in order.iter().enumerate() {
        if sigma[rank_pos] > u_tol {
            let inv = T::one() / sigma[rank_pos];
            u_vecs.push(cols[src].iter().map(|z| z * inv).collect());
        }
    }
    complete_basis(&mut u_vecs, m);
    let u = ComplexMatrix::from_fn(m, m, |i, j| u_vecs[j][i]);

    Ok(SvdFactors { u, sigma, v })
}

/// Rank of a matrix: singular values above `1e-10 * sigma_max`.
pub fn rank<T: Scalar>(a: &ComplexMatrix<T>) -> Result<usize, KernelError> {
    if a.is_empty() {
        return Ok(0);
    }
    Ok(svd_full(a)?.rank())
}

/// Eigendecomposition of a Hermitian matrix by two-sided Jacobi.
///
/// Returns `(lambda, v)` with real eigenvalues sorted descending and unitary
/// `v` such that `a = v * diag(lambda) * v^H`. The input is symmetrized
/// first, so mild Hermitian violations from round-off are tolerated.
pub fn hermitian_eig<T: Scalar>(
    a: &ComplexMatrix<T>,
) -> Result<(Vec<T>, ComplexMatrix<T>), KernelError> {
    assert_eq!(a.rows(), a.cols(), "hermitian_eig requires a square matrix");
    let n = a.rows();
    let half = T::lit(0.5);
    let mut h = ComplexMatrix::from_fn(n, n, |i, j| (a[(i, j)] + a[(j, i)].conj()) * half);
    let mut v = ComplexMatrix::<T>::identity(n);
    let scale = h.fro_norm().max(T::min_positive_value());
    let tol = scale * T::epsilon() * T::lit(16.0);

    let mut converged = false;
    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let gamma = h[(p, q)];
                let mag = gamma.norm();
                if mag <= tol {
                    continue;
                }
                rotated = true;
                let alpha = h[(p, p)].re;
                let beta = h[(q, q)].re;
                let phase = gamma / cr(mag);
                let tau = (beta - alpha) / (T::lit(2.0) * mag);
                let t = {
                    let sign = if tau < T::zero() { -T::one() } else { T::one() };
                    sign / (tau.abs() + (T::one() + tau * tau).sqrt())
                };
                let c = T::one() / (T::one() + t * t).sqrt();
                let s = c * t;
                let pc = phase.conj();
                let jp = (cr(c), -pc * s);
                let jq = (cr(s), pc * c);

                // H <- J^H H J : columns then rows.
                rotate_cols(&mut h, p, q, jp, jq);
                rotate_rows(&mut h, p, q, jp, jq);
                // Clean the 2x2 block against round-off drift.
                h[(p, p)] = cr(h[(p, p)].re);
                h[(q, q)] = cr(h[(q, q)].re);
                h[(q, p)] = h[(p, q)].conj();

                rotate_cols(&mut v, p, q, jp, jq);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(KernelError::NoConvergence { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<T> = (0..n).map(|i| h[(i, i)].re).collect();
    order.sort_by(|&i, &j| diag[j].partial_cmp(&diag[i]).unwrap());
    let lambda: Vec<T> = order.iter().map(|&i| diag[i]).collect();
    Ok((lambda, permute_cols(&v, &order)))
}

/// Hermitian PSD square root `a^{1/2}` via eigendecomposition; negative
/// eigenvalues from round-off are clamped to zero.
pub fn hermitian_sqrt<T: Scalar>(a: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>, KernelError> {
    let (lambda, v) = hermitian_eig(a)?;
    let roots: Vec<T> = lambda
        .iter()
        .map(|&l| if l > T::zero() { l.sqrt() } else { T::zero() })
        .collect();
    Ok(v.mul(&ComplexMatrix::diag(&roots)).mul(&v.hermitian()))
}

fn rotate_pair<T: Scalar>(
    cols: &mut [Vec<C<T>>],
    p: usize,
    q: usize,
    jp: (C<T>, C<T>),
    jq: (C<T>, C<T>),
) {
    let len = cols[p].len();
    for i in 0..len {
        let xp = cols[p][i];
        let xq = cols[q][i];
        cols[p][i] = jp.0 * xp + jp.1 * xq;
        cols[q][i] = jq.0 * xp + jq.1 * xq;
    }
}

fn rotate_cols<T: Scalar>(
    m: &mut ComplexMatrix<T>,
    p: usize,
    q: usize,
    jp: (C<T>, C<T>),
    jq: (C<T>, C<T>),
) {
    for i in 0..m.rows() {
        let xp = m[(i, p)];
        let xq = m[(i, q)];
        m[(i, p)] = jp.0 * xp + jp.1 * xq;
        m[(i, q)] = jq.0 * xp + jq.1 * xq;
    }
}

fn rotate_rows<T: Scalar>(
    m: &mut ComplexMatrix<T>,
    p: usize,
    q: usize,
    jp: (C<T>, C<T>),
    jq: (C<T>, C<T>),
) {
    // Rows transform with J^H: row_p <- conj(jp.0) row_p + conj(jp.1) row_q.
    for j in 0..m.cols() {
        let xp = m[(p, j)];
        let xq = m[(q, j)];
        m[(p, j)] = jp.0.conj() * xp + jp.1.conj() * xq;
        m[(q, j)] = jq.0.conj() * xp + jq.1.conj() * xq;
    }
}

fn permute_cols<T: Scalar>(m: &ComplexMatrix<T>, order: &[usize]) -> ComplexMatrix<T> {
    ComplexMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, order[j])])
}

/// Extend a partial orthonormal set to a full basis of C^dim. Each round
/// orthogonalizes every standard basis vector against the current set and
/// keeps the one with the largest residual, so the result is deterministic
/// and never degenerate.
fn complete_basis<T: Scalar>(vecs: &mut Vec<Vec<C<T>>>, dim: usize) {
    while vecs.len() < dim {
        let mut best: Option<(T, Vec<C<T>>)> = None;
        for candidate in 0..dim {
            let mut e = vec![Complex::new(T::zero(), T::zero()); dim];
            e[candidate] = cr(T::one());
            for _ in 0..2 {
                for u in vecs.iter() {
                    let proj = vec_dot(&e, u);
                    for (x, ui) in e.iter_mut().zip(u) {
                        *x = *x - proj * ui;
                    }
                }
            }
            let norm = crate::scalar::vec_norm(&e);
            if best.as_ref().map_or(true, |(b, _)| norm > *b) {
                best = Some((norm, e));
            }
        }
        let (norm, mut e) = best.expect("dim > 0");
        assert!(norm > T::epsilon().sqrt(), "basis completion failed");
        let inv = T::one() / norm;
        for x in e.iter_mut() {
            *x = *x * inv;
        }
        vecs.push(e);
    }
}
