//! Second precoding filters: per-user SVD parallelization (with optional
//! water-filling) and the lattice-reduction-aided ZF/MMSE designs.

use super::PrecodingError;
use crate::matkernel::{
    clll_reduce_traced, regularized_pinv, svd_full, ComplexMatrix, KernelError,
    UnimodularTransform,
};
use crate::scalar::{cr, Scalar};

/// Per-stream power allocation for the SVD second filter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerLoading<T> {
    /// No power loading: identity stream powers.
    Npl,
    /// Water-filling over the stream gains against `noise_var`, spending
    /// `budget` in total.
    WaterFilling { budget: T, noise_var: T },
}

/// SVD-based second filter for the BD/RBD/S-GMI family.
///
/// Returns `(p_b, g, sigma)`: the `cols(h_eff) x n_i` filter built from the
/// leading right singular vectors, the decoding matrix `g = u^H`, and the
/// per-stream gains.
pub fn svd_second<T: Scalar>(
    h_eff: &ComplexMatrix<T>,
    loading: PowerLoading<T>,
) -> Result<(ComplexMatrix<T>, ComplexMatrix<T>, Vec<T>), PrecodingError> {
    assert!(
        h_eff.rows() <= h_eff.cols(),
        "effective channel must have at least as many columns as streams"
    );
    let streams = h_eff.rows();
    let f = svd_full(h_eff).map_err(PrecodingError::from)?;
    let sigma = f.sigma.clone();
    let lambda = match loading {
        PowerLoading::Npl => ComplexMatrix::identity(streams),
        PowerLoading::WaterFilling { budget, noise_var } => {
            let powers = water_filling(&sigma, noise_var, budget);
            ComplexMatrix::diag(&powers.iter().map(|&p| p.sqrt()).collect::<Vec<_>>())
        }
    };
    let p_b = f.v.col_block(0, streams).mul(&lambda);
    let g = f.u.hermitian();
    Ok((p_b, g, sigma))
}

/// Standard water-filling: `p_l = max(0, mu - noise/gain_l^2)` with the
/// water level found by bisection so the powers meet the budget.
pub fn water_filling<T: Scalar>(gains: &[T], noise_var: T, budget: T) -> Vec<T> {
    let floors: Vec<Option<T>> = gains
        .iter()
        .map(|&g| {
            if g > T::zero() {
                Some(noise_var / (g * g))
            } else {
                None
            }
        })
        .collect();
    let active: Vec<T> = floors.iter().flatten().copied().collect();
    if active.is_empty() || budget <= T::zero() {
        return vec![T::zero(); gains.len()];
    }
    let spent = |mu: T| -> T {
        active
            .iter()
            .map(|&f| (mu - f).max(T::zero()))
            .fold(T::zero(), |a, b| a + b)
    };
    let mut lo = active.iter().copied().fold(T::infinity(), T::min);
    let mut hi = lo + budget;
    while spent(hi) < budget {
        hi = hi + budget;
    }
    for _ in 0..200 {
        let mid = (lo + hi) * T::lit(0.5);
        if spent(mid) < budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mu = (lo + hi) * T::lit(0.5);
    floors
        .iter()
        .map(|f| f.map_or(T::zero(), |fl| (mu - fl).max(T::zero())))
        .collect()
}

/// Plain (unreduced) ZF second filter: the right inverse of the effective
/// channel.
pub fn zf_second<T: Scalar>(h_eff: &ComplexMatrix<T>) -> Result<ComplexMatrix<T>, PrecodingError> {
    regularized_pinv(h_eff, T::zero()).map_err(|e| match e {
        KernelError::SingularGram => PrecodingError::SingularEffectiveChannel,
        other => PrecodingError::from(other),
    })
}

/// Plain (unreduced) MMSE second filter via the extended channel, for the
/// transmit-power comparison oracles.
pub fn mmse_second<T: Scalar>(
    h_eff: &ComplexMatrix<T>,
    alpha: T,
) -> Result<ComplexMatrix<T>, PrecodingError> {
    let ext = extend_channel(h_eff, alpha);
    let pinv = regularized_pinv(&ext, T::zero()).map_err(PrecodingError::from)?;
    Ok(pinv.row_block(0, h_eff.cols()))
}

/// Outcome of a lattice-aided second-filter construction.
pub struct LrSecond<T> {
    pub p_b: ComplexMatrix<T>,
    pub transform: UnimodularTransform,
    /// Arithmetic spent inside the lattice reduction (tally weights).
    pub clll_flops: f64,
}

/// Lattice-reduction-aided ZF second filter.
///
/// Reduces the rows of `h_eff`, then right-inverts the reduced basis, so
/// `h_eff * p_b = t^{-1}` holds to working precision.
pub fn lr_zf_second<T: Scalar>(
    h_eff: &ComplexMatrix<T>,
    delta: T,
) -> Result<LrSecond<T>, PrecodingError> {
    let out = clll_reduce_traced(h_eff, delta).map_err(lattice_error)?;
    let p_b = regularized_pinv(&out.reduced, T::zero()).map_err(lattice_error)?;
    Ok(LrSecond {
        p_b,
        transform: out.transform,
        clll_flops: out.flops,
    })
}

/// Lattice-reduction-aided MMSE second filter via the extended channel
/// `[h_eff, sqrt(alpha) I]`; the selector keeps only the non-extended rows
/// of the inverse so no transmit power is spent on the extension block.
pub fn lr_mmse_second<T: Scalar>(
    h_eff: &ComplexMatrix<T>,
    alpha: T,
    delta: T,
) -> Result<LrSecond<T>, PrecodingError> {
    assert!(alpha > T::zero(), "lr_mmse_second requires alpha > 0");
    let ext = extend_channel(h_eff, alpha);
    let out = clll_reduce_traced(&ext, delta).map_err(lattice_error)?;
    let pinv = regularized_pinv(&out.reduced, T::zero()).map_err(lattice_error)?;
    Ok(LrSecond {
        p_b: pinv.row_block(0, h_eff.cols()),
        transform: out.transform,
        clll_flops: out.flops,
    })
}

/// `[h_eff, sqrt(alpha) I]`, the extended channel of the MMSE formulation.
fn extend_channel<T: Scalar>(h_eff: &ComplexMatrix<T>, alpha: T) -> ComplexMatrix<T> {
    let n = h_eff.rows();
    let scaled_i = ComplexMatrix::identity(n).scale_complex(cr(alpha.sqrt()));
    ComplexMatrix::hstack(&[h_eff, &scaled_i])
}

fn lattice_error(e: KernelError) -> PrecodingError {
    match e {
        KernelError::DependentRows | KernelError::SingularGram => {
            PrecodingError::SingularEffectiveChannel
        }
        other => PrecodingError::from(other),
    }
}
