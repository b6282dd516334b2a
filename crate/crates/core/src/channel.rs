//! Multiuser downlink system model: per-user channels, their stacked
//! combination and per-user exclusion stacks, plus the correlated /
//! imperfect-CSI channel models.

use crate::matkernel::{hermitian_eig, hermitian_sqrt, ComplexMatrix, KernelError};
use crate::rng::complex_gaussian;
use crate::scalar::{C, Scalar};
use num_complex::Complex;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),
    #[error("user index {index} out of range for {users} users")]
    IndexOutOfRange { index: usize, users: usize },
    #[error("correlation coefficient has magnitude {magnitude} > 1")]
    InvalidCoefficient { magnitude: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Static system parameters: antenna layout, power budget, noise level and
/// modulation order.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig<T> {
    n_tx: usize,
    user_rx: Vec<usize>,
    xi: T,
    noise_var: T,
    bits_per_symbol: u32,
}

impl<T: Scalar> SystemConfig<T> {
    pub fn new(
        n_tx: usize,
        user_rx: Vec<usize>,
        xi: T,
        noise_var: T,
        bits_per_symbol: u32,
    ) -> Result<Self, ChannelError> {
        if n_tx == 0 || user_rx.is_empty() || user_rx.iter().any(|&n| n == 0) {
            return Err(ChannelError::InvalidConfig(
                "antenna counts must all be at least 1".into(),
            ));
        }
        let n_rx: usize = user_rx.iter().sum();
        if n_tx < n_rx {
            return Err(ChannelError::InvalidConfig(format!(
                "n_tx = {n_tx} must be >= total receive antennas {n_rx}"
            )));
        }
        if !(xi > T::zero()) || !(noise_var > T::zero()) {
            return Err(ChannelError::InvalidConfig(
                "transmit power and noise variance must be positive".into(),
            ));
        }
        if bits_per_symbol == 0 {
            return Err(ChannelError::InvalidConfig(
                "bits_per_symbol must be at least 1".into(),
            ));
        }
        Ok(SystemConfig {
            n_tx,
            user_rx,
            xi,
            noise_var,
            bits_per_symbol,
        })
    }

    /// Uniform layout: `K` users with `n_i` antennas each, `xi = N_R` and
    /// QPSK, the convention used throughout the experiments.
    pub fn uniform(n_tx: usize, users: usize, n_i: usize, noise_var: T) -> Result<Self, ChannelError> {
        let n_rx = users * n_i;
        Self::new(n_tx, vec![n_i; users], T::from_usize(n_rx).unwrap(), noise_var, 2)
    }

    pub fn n_tx(&self) -> usize {
        self.n_tx
    }

    pub fn user_rx(&self) -> &[usize] {
        &self.user_rx
    }

    pub fn users(&self) -> usize {
        self.user_rx.len()
    }

    pub fn n_rx(&self) -> usize {
        self.user_rx.iter().sum()
    }

    pub fn xi(&self) -> T {
        self.xi
    }

    pub fn noise_var(&self) -> T {
        self.noise_var
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    /// Regularization factor `alpha = N_R sigma_n^2 / xi`.
    pub fn alpha(&self) -> T {
        T::from_usize(self.n_rx()).unwrap() * self.noise_var / self.xi
    }

    /// Per-user transmit power `xi_i = xi / K` (uniform split).
    pub fn xi_per_user(&self) -> T {
        self.xi / T::from_usize(self.users()).unwrap()
    }

    pub fn with_noise_var(&self, noise_var: T) -> Self {
        let mut c = self.clone();
        c.noise_var = noise_var;
        c
    }

    /// Row range of user `i` inside the stacked channel.
    pub fn user_rows(&self, i: usize) -> std::ops::Range<usize> {
        let start: usize = self.user_rx[..i].iter().sum();
        start..start + self.user_rx[i]
    }
}

/// Per-user channel matrices and their row-stacked combination.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T> {
    per_user: Vec<ComplexMatrix<T>>,
    combined: ComplexMatrix<T>,
}

impl<T: Scalar> ChannelSet<T> {
    pub fn from_per_user(per_user: Vec<ComplexMatrix<T>>) -> Self {
        assert!(!per_user.is_empty());
        let n_tx = per_user[0].cols();
        assert!(per_user.iter().all(|h| h.cols() == n_tx && h.rows() >= 1));
        let refs: Vec<&ComplexMatrix<T>> = per_user.iter().collect();
        let combined = ComplexMatrix::vstack(&refs);
        ChannelSet { per_user, combined }
    }

    pub fn users(&self) -> usize {
        self.per_user.len()
    }

    pub fn user(&self, i: usize) -> &ComplexMatrix<T> {
        &self.per_user[i]
    }

    pub fn combined(&self) -> &ComplexMatrix<T> {
        &self.combined
    }

    pub fn n_tx(&self) -> usize {
        self.combined.cols()
    }

    pub fn n_rx(&self) -> usize {
        self.combined.rows()
    }
}

/// Error/correlation model for imperfect transmitter-side CSI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsiErrorModel<T> {
    pub sigma_e2: T,
    pub corr_r: C<T>,
}

impl<T: Scalar> CsiErrorModel<T> {
    pub fn new(sigma_e2: T, corr_r: C<T>) -> Result<Self, ChannelError> {
        if sigma_e2 < T::zero() {
            return Err(ChannelError::InvalidConfig("sigma_e2 must be >= 0".into()));
        }
        if corr_r.norm() > T::one() + T::epsilon() {
            return Err(ChannelError::InvalidCoefficient {
                magnitude: corr_r.norm().as_f64(),
            });
        }
        Ok(CsiErrorModel { sigma_e2, corr_r })
    }
}

/// Draw an i.i.d. unit-variance complex Gaussian channel for every user.
pub fn generate_rayleigh<T: Scalar, R: Rng>(cfg: &SystemConfig<T>, rng: &mut R) -> ChannelSet<T> {
    let per_user = cfg
        .user_rx()
        .iter()
        .map(|&n_i| ComplexMatrix::from_fn(n_i, cfg.n_tx(), |_, _| complex_gaussian(rng, 1.0)))
        .collect();
    ChannelSet::from_per_user(per_user)
}

/// Row-stack of every user's channel except user `i`, order preserved.
/// For a single-user system this is the 0 x N_T empty stack.
pub fn exclusion_channel<T: Scalar>(
    cs: &ChannelSet<T>,
    i: usize,
) -> Result<ComplexMatrix<T>, ChannelError> {
    if i >= cs.users() {
        return Err(ChannelError::IndexOutOfRange {
            index: i,
            users: cs.users(),
        });
    }
    let blocks: Vec<&ComplexMatrix<T>> = cs
        .per_user
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, h)| h)
        .collect();
    if blocks.is_empty() {
        return Ok(ComplexMatrix::zeros(0, cs.n_tx()));
    }
    Ok(ComplexMatrix::vstack(&blocks))
}

/// A user whose exclusion stack is too high-rank for null-space precoding.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionalityViolation {
    pub offenders: Vec<(usize, usize)>, // (user, rank of exclusion stack)
    pub n_tx: usize,
}

impl std::fmt::Display for DimensionalityViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "dimensionality constraint violated (n_tx = {}): offending users {:?}",
            self.n_tx, self.offenders
        )
    }
}

/// Check `N_T > max_i rank(exclusion stack of i)`. Callers must refuse to
/// precode on a violation report.
pub fn check_dimensionality<T: Scalar>(
    cs: &ChannelSet<T>,
) -> Result<Result<(), DimensionalityViolation>, ChannelError> {
    let mut offenders = Vec::new();
    for i in 0..cs.users() {
        let hbar = exclusion_channel(cs, i)?;
        let r = if hbar.rows() == 0 {
            0
        } else {
            crate::matkernel::rank(&hbar)?
        };
        if r >= cs.n_tx() {
            offenders.push((i, r));
        }
    }
    if offenders.is_empty() {
        Ok(Ok(()))
    } else {
        Ok(Err(DimensionalityViolation {
            offenders,
            n_tx: cs.n_tx(),
        }))
    }
}

/// Exponential transmit-correlation matrix: `R_ij = r^(j-i)` above the
/// diagonal, conjugate below, unit diagonal.
pub fn correlation_matrix<T: Scalar>(
    n_tx: usize,
    r: C<T>,
) -> Result<ComplexMatrix<T>, ChannelError> {
    if r.norm() > T::one() + T::epsilon() {
        return Err(ChannelError::InvalidCoefficient {
            magnitude: r.norm().as_f64(),
        });
    }
    let mut m = ComplexMatrix::identity(n_tx);
    for i in 0..n_tx {
        for j in i + 1..n_tx {
            let mut p = Complex::new(T::one(), T::zero());
            for _ in 0..(j - i) {
                p = p * r;
            }
            m[(i, j)] = p;
            m[(j, i)] = p.conj();
        }
    }
    Ok(m)
}

/// Shape a channel with transmit-side correlation: `H -> H R_T^{1/2}`,
/// with `R_T^{1/2}` the Hermitian PSD square root of the exponential model.
pub fn shape_with_correlation<T: Scalar>(
    cs: &ChannelSet<T>,
    corr_r: C<T>,
) -> Result<ChannelSet<T>, ChannelError> {
    let rt = correlation_matrix(cs.n_tx(), corr_r)?;
    let root = hermitian_sqrt(&rt)?;
    Ok(ChannelSet::from_per_user(
        cs.per_user.iter().map(|h| h.mul(&root)).collect(),
    ))
}

/// Additive estimation error: `H -> H + E` with `E` i.i.d. complex Gaussian
/// of variance `sigma_e2` per entry.
pub fn perturb_with_error<T: Scalar, R: Rng>(
    cs: &ChannelSet<T>,
    sigma_e2: T,
    rng: &mut R,
) -> ChannelSet<T> {
    let sigma_e2 = sigma_e2.as_f64();
    if sigma_e2 <= 0.0 {
        return cs.clone();
    }
    let n_tx = cs.n_tx();
    ChannelSet::from_per_user(
        cs.per_user
            .iter()
            .map(|h| {
                let e =
                    ComplexMatrix::from_fn(h.rows(), n_tx, |_, _| complex_gaussian(rng, sigma_e2));
                h.add(&e)
            })
            .collect(),
    )
}

/// Imperfect CSI: `H_e = H R_T^{1/2} + E` with `R_T` the exponential
/// correlation model and `E` i.i.d. complex Gaussian of variance sigma_e^2.
pub fn apply_csi_error<T: Scalar, R: Rng>(
    cs: &ChannelSet<T>,
    model: &CsiErrorModel<T>,
    rng: &mut R,
) -> Result<ChannelSet<T>, ChannelError> {
    let shaped = shape_with_correlation(cs, model.corr_r)?;
    Ok(perturb_with_error(&shaped, model.sigma_e2, rng))
}

/// Smallest eigenvalue of a Hermitian matrix, used by the PSD tests.
pub fn min_eigenvalue<T: Scalar>(a: &ComplexMatrix<T>) -> Result<T, ChannelError> {
    let (lambda, _) = hermitian_eig(a)?;
    Ok(*lambda.last().expect("non-empty"))
}

/// Rank oracle by row-reduction, independent of the SVD path.
pub fn gaussian_elimination_rank<T: Scalar>(a: &ComplexMatrix<T>) -> usize {
    if a.is_empty() {
        return 0;
    }
    let mut m = a.clone();
    let (rows, cols) = (m.rows(), m.cols());
    let tol = T::lit(1e-10) * m.max_abs().max(T::min_positive_value());
    let mut rank = 0usize;
    for col in 0..cols {
        let mut pivot = None;
        let mut best = tol;
        for r in rank..rows {
            let mag = m[(r, col)].norm();
            if mag > best {
                best = mag;
                pivot = Some(r);
            }
        }
        let Some(p) = pivot else { continue };
        m.swap_rows(rank, p);
        let inv = Complex::new(T::one(), T::zero()) / m[(rank, col)];
        for j in col..cols {
            m[(rank, j)] = m[(rank, j)] * inv;
        }
        for r in 0..rows {
            if r == rank {
                continue;
            }
            let f = m[(r, col)];
            for j in col..cols {
                let d = f * m[(rank, j)];
                m[(r, j)] = m[(r, j)] - d;
            }
        }
        rank += 1;
        if rank == rows {
            break;
        }
    }
    rank
}
