//! First precoding filters: null-space (BD), regularized null-space (RBD),
//! and the channel-inversion constructions (S-GMI, GZI).

use super::PrecodingError;
use crate::channel::ChannelSet;
use crate::matkernel::{qr_thin, regularized_pinv, svd_full, ComplexMatrix};
use crate::scalar::Scalar;

/// Orthonormal basis of the null space of the exclusion stack `hbar`
/// (`n_t x (n_t - rank)`), the exact zero-interference first filter.
///
/// An empty exclusion stack (single-user system) yields the full identity
/// basis.
pub fn bd_first<T: Scalar>(hbar: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>, PrecodingError> {
    let n_t = hbar.cols();
    if hbar.rows() == 0 {
        return Ok(ComplexMatrix::identity(n_t));
    }
    let f = svd_full(hbar).map_err(PrecodingError::from)?;
    let rank = f.rank();
    if rank >= n_t {
        return Err(PrecodingError::EmptyNullSpace { rank, n_t });
    }
    Ok(f.v.col_block(rank, n_t))
}

/// Regularized first filter `V (Sigma^T Sigma + alpha I)^{-1/2}` of size
/// `n_t x n_t`, balancing leakage into other users against noise.
pub fn rbd_first<T: Scalar>(
    hbar: &ComplexMatrix<T>,
    alpha: T,
) -> Result<ComplexMatrix<T>, PrecodingError> {
    assert!(alpha > T::zero(), "rbd_first requires alpha > 0");
    let n_t = hbar.cols();
    if hbar.rows() == 0 {
        return Ok(ComplexMatrix::identity(n_t).scale(T::one() / alpha.sqrt()));
    }
    let f = svd_full(hbar).map_err(PrecodingError::from)?;
    let mut inv_roots = vec![T::one() / alpha.sqrt(); n_t];
    for (l, &s) in f.sigma.iter().enumerate() {
        inv_roots[l] = T::one() / (s * s + alpha).sqrt();
    }
    Ok(f.v.mul(&ComplexMatrix::diag(&inv_roots)))
}

/// S-GMI first filters: one regularized inversion of the combined channel,
/// then a thin QR per user block. Each returned `P_i^a` is `n_t x n_i` with
/// orthonormal columns.
pub fn sgmi_first<T: Scalar>(
    cs: &ChannelSet<T>,
    alpha: T,
) -> Result<Vec<ComplexMatrix<T>>, PrecodingError> {
    let hdag = regularized_pinv(cs.combined(), alpha).map_err(PrecodingError::from)?;
    let mut firsts = Vec::with_capacity(cs.users());
    let mut col = 0usize;
    for i in 0..cs.users() {
        let n_i = cs.user(i).rows();
        let block = hdag.col_block(col, col + n_i);
        col += n_i;
        let f = qr_thin(&block).map_err(PrecodingError::from)?;
        firsts.push(f.q);
    }
    Ok(firsts)
}

/// GZI first filters: the `alpha = 0` (exact zero-forcing) special case of
/// [`sgmi_first`]; the leakage into other users is exactly zero.
pub fn gzi_first<T: Scalar>(cs: &ChannelSet<T>) -> Result<Vec<ComplexMatrix<T>>, PrecodingError> {
    sgmi_first(cs, T::zero())
}
