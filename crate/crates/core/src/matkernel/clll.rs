//! Complex LLL lattice-basis reduction over the Gaussian integers.
//!
//! Row convention: the rows of the input matrix are the basis vectors and
//! the output satisfies `reduced = t * basis` with `t` exactly unimodular.
//! Size reduction rounds both real and imaginary parts of the Gram-Schmidt
//! coefficients to the nearest integer; the swap criterion is the Lovasz
//! condition `||b*_k||^2 >= (delta - |mu_{k,k-1}|^2) ||b*_{k-1}||^2`.
//!
//! Gram-Schmidt data is recomputed from scratch after every swap. The
//! kernels run on matrices with at most a handful of rows, so the extra
//! work is irrelevant next to the bookkeeping it avoids.

use super::{ComplexMatrix, GaussianInt, KernelError, UnimodularTransform};
use crate::scalar::{C, Scalar};
use num_complex::Complex;

const MAX_ROUNDS: usize = 100_000;

/// Arithmetic tally using the weights: complex add 2, complex multiply 6,
/// complex division 11, one per rounded real component, one per real
/// add/multiply.
#[derive(Debug, Clone, Copy, Default)]
pub struct FlopTally {
    pub flops: u64,
}

impl FlopTally {
    fn cadd(&mut self, n: u64) {
        self.flops += 2 * n;
    }
    fn cmul(&mut self, n: u64) {
        self.flops += 6 * n;
    }
    fn cdiv(&mut self, n: u64) {
        self.flops += 11 * n;
    }
    fn cround(&mut self, n: u64) {
        self.flops += 2 * n;
    }
    fn real(&mut self, n: u64) {
        self.flops += n;
    }
}

/// Reduction result with instrumentation counters.
#[derive(Debug, Clone)]
pub struct ClllOutcome<T> {
    pub reduced: ComplexMatrix<T>,
    pub transform: UnimodularTransform,
    /// Arithmetic operations spent, under the tally weights above.
    pub flops: f64,
    pub swaps: usize,
    pub size_reductions: usize,
}

/// CLLL-reduce a basis given as matrix rows; returns the reduced basis and
/// the unimodular transform with `reduced = t * basis`.
pub fn clll_reduce<T: Scalar>(
    basis: &ComplexMatrix<T>,
    delta: T,
) -> Result<(ComplexMatrix<T>, UnimodularTransform), KernelError> {
    let out = clll_reduce_traced(basis, delta)?;
    Ok((out.reduced, out.transform))
}

/// As [`clll_reduce`], additionally reporting swap counts and the
/// arithmetic-operation tally for complexity measurements.
pub fn clll_reduce_traced<T: Scalar>(
    basis: &ComplexMatrix<T>,
    delta: T,
) -> Result<ClllOutcome<T>, KernelError> {
    let n = basis.rows();
    let m = basis.cols();
    assert!(n >= 1 && n <= m, "basis must have 1..=cols independent rows");
    let half = T::lit(0.5);
    assert!(
        delta > half && delta <= T::one(),
        "delta must lie in (0.5, 1]"
    );

    let mut b = basis.clone();
    let mut t = UnimodularTransform::identity(n);
    let mut tally = FlopTally::default();
    let mut swaps = 0usize;
    let mut size_reductions = 0usize;

    let mut gs = gram_schmidt(&b, &mut tally)?;

    let mut k = 1usize;
    let mut rounds = 0usize;
    while k < n {
        rounds += 1;
        if rounds > MAX_ROUNDS {
            return Err(KernelError::NoConvergence { sweeps: MAX_ROUNDS });
        }

        // Size-reduce row k against rows k-1 .. 0.
        for j in (0..k).rev() {
            tally.cround(1);
            let coef = GaussianInt::round_from(gs.mu[k][j]);
            if coef.is_zero() {
                continue;
            }
            size_reductions += 1;
            let cz: C<T> = coef.to_complex();
            row_axpy(&mut b, k, j, cz, &mut tally);
            t.row_sub(k, j, coef)?;
            tally.cmul(n as u64);
            tally.cadd(n as u64);
            // mu[k][l] -= c mu[j][l] for l < j, and mu[k][j] -= c.
            for l in 0..j {
                let delta_mu = cz * gs.mu[j][l];
                gs.mu[k][l] = gs.mu[k][l] - delta_mu;
            }
            tally.cmul(j as u64);
            tally.cadd(j as u64 + 1);
            gs.mu[k][j] = gs.mu[k][j] - cz;
        }

        // Lovasz condition between rows k-1 and k.
        let mu_sq = gs.mu[k][k - 1].norm_sqr();
        tally.cmul(1);
        tally.real(2);
        if gs.norm_sqr[k] >= (delta - mu_sq) * gs.norm_sqr[k - 1] {
            k += 1;
        } else {
            b.swap_rows(k, k - 1);
            t.swap_rows(k, k - 1);
            swaps += 1;
            gs = gram_schmidt(&b, &mut tally)?;
            k = k.saturating_sub(1).max(1);
        }
    }

    Ok(ClllOutcome {
        reduced: b,
        transform: t,
        flops: tally.flops as f64,
        swaps,
        size_reductions,
    })
}

struct GramSchmidt<T> {
    /// mu[i][j] for j < i.
    mu: Vec<Vec<C<T>>>,
    /// Squared norms of the orthogonalized rows.
    norm_sqr: Vec<T>,
}

fn gram_schmidt<T: Scalar>(
    b: &ComplexMatrix<T>,
    tally: &mut FlopTally,
) -> Result<GramSchmidt<T>, KernelError> {
    let n = b.rows();
    let m = b.cols();
    let mut bstar: Vec<Vec<C<T>>> = Vec::with_capacity(n);
    let mut mu: Vec<Vec<C<T>>> = vec![vec![Complex::new(T::zero(), T::zero()); n]; n];
    let mut norm_sqr = vec![T::zero(); n];

    for i in 0..n {
        let mut v: Vec<C<T>> = b.row(i).to_vec();
        let row_energy = crate::scalar::vec_norm_sqr(&v);
        for j in 0..i {
            // mu_ij = <b_i, b*_j> / ||b*_j||^2
            let dot = inner(b.row(i), &bstar[j], tally);
            let mij = dot / Complex::new(norm_sqr[j], T::zero());
            tally.cdiv(1);
            mu[i][j] = mij;
            for (x, s) in v.iter_mut().zip(&bstar[j]) {
                *x = *x - mij * s;
            }
            tally.cmul(m as u64);
            tally.cadd(m as u64);
        }
        let ns = inner_self(&v, tally);
        if ns <= T::lit(1e-20) * row_energy.max(T::min_positive_value()) {
            return Err(KernelError::DependentRows);
        }
        norm_sqr[i] = ns;
        bstar.push(v);
    }
    Ok(GramSchmidt { mu, norm_sqr })
}

fn inner<T: Scalar>(a: &[C<T>], b: &[C<T>], tally: &mut FlopTally) -> C<T> {
    tally.cmul(a.len() as u64);
    tally.cadd(a.len() as u64 - 1);
    crate::scalar::vec_dot(a, b)
}

fn inner_self<T: Scalar>(a: &[C<T>], tally: &mut FlopTally) -> T {
    tally.cmul(a.len() as u64);
    tally.cadd(a.len() as u64 - 1);
    crate::scalar::vec_norm_sqr(a)
}

/// `row_k -= c * row_j` on the floating basis.
fn row_axpy<T: Scalar>(
    b: &mut ComplexMatrix<T>,
    k: usize,
    j: usize,
    c: C<T>,
    tally: &mut FlopTally,
) {
    let m = b.cols();
    for col in 0..m {
        let x = b[(j, col)];
        b[(k, col)] = b[(k, col)] - c * x;
    }
    tally.cmul(m as u64);
    tally.cadd(m as u64);
}

/// Quantities a test needs to check size reduction and the Lovasz condition
/// on an already-reduced basis.
pub fn reduction_certificate<T: Scalar>(
    b: &ComplexMatrix<T>,
) -> Result<(Vec<Vec<C<T>>>, Vec<T>), KernelError> {
    let mut tally = FlopTally::default();
    let gs = gram_schmidt(b, &mut tally)?;
    Ok((gs.mu, gs.norm_sqr))
}
