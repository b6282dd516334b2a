//! Uncoded QPSK link: Gray mapping, power-normalized transmission over the
//! true channel, AWGN, and the two receiver families (SVD decode-and-slice;
//! lattice round-and-transform).
//!
//! The QPSK alphabet is kept unnormalized at `{+-1 +-j}` so data vectors lie
//! on the Gaussian-integer lattice and the round/transform receiver algebra
//! is exact; all energy bookkeeping goes through the `gamma` scaling.

use crate::channel::ChannelSet;
use crate::matkernel::GaussianInt;
use crate::precoding::{normalization_factor, PrecodingError, PrecodingSolution};
use crate::rng::complex_gaussian;
use crate::scalar::{C, Scalar};
use num_complex::Complex;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error("bit vector length {0} is odd; QPSK needs two bits per symbol")]
    OddBitCount(usize),
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("solution carries no decoding matrices")]
    MissingDecoder,
    #[error("solution carries no unimodular transforms")]
    MissingTransform,
    #[error("dimension mismatch between channel, precoder and data")]
    DimensionMismatch,
    #[error(transparent)]
    Precoding(#[from] PrecodingError),
}

/// Bits per QPSK symbol.
pub const QPSK_BITS: usize = 2;

/// Vector of QPSK symbols; every entry is exactly one of `{+-1 +-j}`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataVector<T> {
    pub symbols: Vec<C<T>>,
}

impl<T: Scalar> DataVector<T> {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

/// Received samples together with the normalization that was applied.
#[derive(Debug, Clone)]
pub struct ReceivedVector<T> {
    pub samples: Vec<C<T>>,
    pub gamma: T,
}

/// Sliced symbol decisions; `erased[k]` marks symbols carried by a stream
/// with no usable gain, which are counted as all-bits-wrong.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection<T> {
    pub data: DataVector<T>,
    pub erased: Vec<bool>,
}

/// Gray-map a bit pair per symbol: 00 -> +1+j, 01 -> -1+j, 11 -> -1-j,
/// 10 -> +1-j (first bit selects the imaginary sign, second the real).
pub fn qpsk_modulate<T: Scalar>(bits: &[u8]) -> Result<DataVector<T>, LinkError> {
    if bits.len() % 2 != 0 {
        return Err(LinkError::OddBitCount(bits.len()));
    }
    let symbols = bits
        .chunks_exact(2)
        .map(|pair| {
            let re = if pair[1] == 0 { T::one() } else { -T::one() };
            let im = if pair[0] == 0 { T::one() } else { -T::one() };
            Complex::new(re, im)
        })
        .collect();
    Ok(DataVector { symbols })
}

/// Inverse Gray mapping.
pub fn qpsk_demodulate<T: Scalar>(d: &DataVector<T>) -> Vec<u8> {
    let mut bits = Vec::with_capacity(2 * d.len());
    for z in &d.symbols {
        bits.push(if z.im < T::zero() { 1 } else { 0 });
        bits.push(if z.re < T::zero() { 1 } else { 0 });
    }
    bits
}

/// Nearest alphabet point (sign decisions; ties resolve to +1).
pub fn slice_symbol<T: Scalar>(z: C<T>) -> C<T> {
    let re = if z.re < T::zero() { -T::one() } else { T::one() };
    let im = if z.im < T::zero() { -T::one() } else { T::one() };
    Complex::new(re, im)
}

/// Transmit one data vector: `samples = H P d + sqrt(gamma) n` with
/// `gamma = ||P d||^2 / xi`. This is the receiver-side-rescaled form of the
/// physical link `x = P d / sqrt(gamma)`, so downstream processing sees the
/// unnormalized constellation.
pub fn transmit<T: Scalar, R: Rng>(
    cs: &ChannelSet<T>,
    sol: &PrecodingSolution<T>,
    d: &DataVector<T>,
    xi: T,
    sigma_n2: T,
    rng: &mut R,
) -> Result<ReceivedVector<T>, LinkError> {
    let p = &sol.assembled;
    if p.cols() != d.len() || cs.n_tx() != p.rows() || cs.n_rx() != d.len() {
        return Err(LinkError::DimensionMismatch);
    }
    let gamma = normalization_factor(p, &d.symbols, xi)?;
    let precoded = p.mul_vec(&d.symbols);
    let mut samples = cs.combined().mul_vec(&precoded);
    if sigma_n2 > T::zero() {
        let scale = gamma.sqrt();
        for s in samples.iter_mut() {
            let n: C<T> = complex_gaussian(rng, sigma_n2.as_f64());
            *s = *s + n * scale;
        }
    }
    Ok(ReceivedVector { samples, gamma })
}

/// Streams with singular values at or below this fraction of the strongest
/// one are treated as erased.
const ERASURE_REL_TOL: f64 = 1e-10;

/// SVD-family receiver: apply `G_i`, divide each stream by its singular
/// value, slice. Numerically dead streams are flagged erased and their
/// symbols pinned to a fixed alphabet point so runs stay deterministic.
pub fn svd_receive<T: Scalar>(
    rv: &ReceivedVector<T>,
    sol: &PrecodingSolution<T>,
) -> Result<Detection<T>, LinkError> {
    let decode = sol.decode.as_ref().ok_or(LinkError::MissingDecoder)?;
    let gains = sol.stream_gains.as_ref().ok_or(LinkError::MissingDecoder)?;
    let mut data = Vec::with_capacity(rv.samples.len());
    let mut erased = Vec::with_capacity(rv.samples.len());
    let mut row = 0usize;
    for (g, sigma) in decode.iter().zip(gains) {
        let n_i = g.rows();
        let y_i = &rv.samples[row..row + n_i];
        row += n_i;
        let decoded = g.mul_vec(y_i);
        let sigma_max = sigma.iter().cloned().fold(T::zero(), T::max);
        let tol = sigma_max * T::lit(ERASURE_REL_TOL);
        for (l, z) in decoded.into_iter().enumerate() {
            if sigma[l] <= tol {
                data.push(Complex::new(T::one(), T::one()));
                erased.push(true);
            } else {
                data.push(slice_symbol(z / sigma[l]));
                erased.push(false);
            }
        }
    }
    if row != rv.samples.len() {
        return Err(LinkError::DimensionMismatch);
    }
    Ok(Detection {
        data: DataVector { symbols: data },
        erased,
    })
}

/// Lattice-family receiver: quantize to the transmitted lattice coset,
/// map back through the (exact) per-user transform, then slice back to the
/// alphabet.
///
/// The noiseless observation is `t^{-1} d` with `d` on the coset
/// `2 Z[j] + (1+j)`, so the valid points are `2 t^{-1} u + o` with the
/// precomputed offset `o = t^{-1} (1+j) ones`. Rounding `(y - o) / 2`
/// component-wise decides at the full lattice spacing; with `t = I` this
/// reduces to plain nearest-alphabet rounding.
pub fn lr_receive<T: Scalar>(
    rv: &ReceivedVector<T>,
    sol: &PrecodingSolution<T>,
) -> Result<Detection<T>, LinkError> {
    let transforms = sol.transforms.as_ref().ok_or(LinkError::MissingTransform)?;
    let offsets = sol
        .receive_offsets
        .as_ref()
        .ok_or(LinkError::MissingTransform)?;
    let half = T::lit(0.5);
    let mut data = Vec::with_capacity(rv.samples.len());
    let mut row = 0usize;
    for (t, offset) in transforms.iter().zip(offsets) {
        let n_i = t.dim();
        let y_i = &rv.samples[row..row + n_i];
        row += n_i;
        let quantized: Vec<GaussianInt> = y_i
            .iter()
            .zip(offset)
            .map(|(&z, o)| {
                let centered = (z - o.to_complex::<T>()) * half;
                GaussianInt::round_from(centered)
            })
            .collect();
        let lattice = t.mul_gauss_vec(&quantized).map_err(PrecodingError::from)?;
        data.extend(lattice.into_iter().map(|g| {
            // d_hat = 2 T v + (1+j) ones, sliced back onto the alphabet.
            let z = g.to_complex::<T>() * T::lit(2.0) + Complex::new(T::one(), T::one());
            slice_symbol(z)
        }));
    }
    if row != rv.samples.len() {
        return Err(LinkError::DimensionMismatch);
    }
    let erased = vec![false; data.len()];
    Ok(Detection {
        data: DataVector { symbols: data },
        erased,
    })
}

/// Direct slicing receiver for solutions whose end-to-end response is the
/// identity (GZI-ZF).
pub fn direct_receive<T: Scalar>(rv: &ReceivedVector<T>) -> Detection<T> {
    let data: Vec<C<T>> = rv.samples.iter().map(|&z| slice_symbol(z)).collect();
    let erased = vec![false; data.len()];
    Detection {
        data: DataVector { symbols: data },
        erased,
    }
}

/// Dispatch to the receiver matching the solution family.
pub fn receive<T: Scalar>(
    rv: &ReceivedVector<T>,
    sol: &PrecodingSolution<T>,
) -> Result<Detection<T>, LinkError> {
    if sol.kind.uses_svd_receiver() {
        svd_receive(rv, sol)
    } else if sol.kind.is_lattice_aided() {
        lr_receive(rv, sol)
    } else {
        Ok(direct_receive(rv))
    }
}

/// Hamming distance between the demodulated bit vectors.
pub fn count_bit_errors<T: Scalar>(
    sent: &DataVector<T>,
    received: &DataVector<T>,
) -> Result<u64, LinkError> {
    if sent.len() != received.len() {
        return Err(LinkError::LengthMismatch(sent.len(), received.len()));
    }
    let a = qpsk_demodulate(sent);
    let b = qpsk_demodulate(received);
    Ok(a.iter().zip(&b).filter(|(x, y)| x != y).count() as u64)
}

/// Bit errors of a detection against the transmitted data; erased symbols
/// count as all bits wrong.
pub fn detection_bit_errors<T: Scalar>(
    sent: &DataVector<T>,
    det: &Detection<T>,
) -> Result<u64, LinkError> {
    if sent.len() != det.data.len() {
        return Err(LinkError::LengthMismatch(sent.len(), det.data.len()));
    }
    let mut errors = 0u64;
    for (k, (&s, &r)) in sent.symbols.iter().zip(&det.data.symbols).enumerate() {
        if det.erased[k] {
            errors += QPSK_BITS as u64;
            continue;
        }
        if (s.re < T::zero()) != (r.re < T::zero()) {
            errors += 1;
        }
        if (s.im < T::zero()) != (r.im < T::zero()) {
            errors += 1;
        }
    }
    Ok(errors)
}
