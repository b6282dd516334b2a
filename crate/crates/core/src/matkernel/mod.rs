//! Complex-matrix kernels shared by every precoder: thin QR, full SVD,
//! regularized (pseudo-)inversion, Hermitian eigendecomposition, and the
//! complex LLL lattice reduction with an exactly unimodular transform.

mod clll;
mod gauss;
mod matrix;
mod qr;
mod solve;
mod svd;

pub use clll::{clll_reduce, clll_reduce_traced, reduction_certificate, ClllOutcome};
pub use gauss::{GaussianInt, UnimodularTransform};
pub use matrix::ComplexMatrix;
pub use qr::{qr_thin, QrFactors};
pub use solve::{determinant, invert, regularized_pinv};
pub use svd::{hermitian_eig, hermitian_sqrt, rank, svd_full, SvdFactors};

use thiserror::Error;

/// Failures surfaced by the matrix kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    /// A QR pivot collapsed: the input does not have full column rank.
    #[error("rank-deficient input: |r[{index},{index}]| = {magnitude:.3e} under tolerance")]
    RankDeficient { index: usize, magnitude: f64 },
    /// Iterative decomposition exhausted its sweep budget.
    #[error("decomposition did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
    /// `H H^H` (or the extended Gram) is singular and no regularization was requested.
    #[error("gram matrix is singular")]
    SingularGram,
    /// Lattice basis rows are linearly dependent.
    #[error("lattice basis rows are linearly dependent")]
    DependentRows,
    /// Accumulated unimodular transform left the representable integer range.
    #[error("unimodular transform entry overflowed the integer range")]
    TransformOverflow,
}
