//! Exact Gaussian-integer arithmetic for the lattice-reduction transform.
//!
//! The reduction itself runs in floating point, but the transform `T` with
//! `reduced = T * basis` is accumulated exactly so that `|det T| = 1` holds
//! as an integer identity, not a numerical one.

use super::{ComplexMatrix, KernelError};
use crate::scalar::{C, Scalar};
use num_bigint::BigInt;
use num_complex::Complex;
use num_traits::Zero;
use std::fmt;

/// Complex integer `re + im*j` with exact components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GaussianInt {
    pub re: i128,
    pub im: i128,
}

impl GaussianInt {
    pub const ZERO: GaussianInt = GaussianInt { re: 0, im: 0 };
    pub const ONE: GaussianInt = GaussianInt { re: 1, im: 0 };

    pub fn new(re: i128, im: i128) -> Self {
        GaussianInt { re, im }
    }

    pub fn is_zero(self) -> bool {
        self.re == 0 && self.im == 0
    }

    pub fn checked_mul(self, rhs: Self) -> Option<Self> {
        let re = self.re.checked_mul(rhs.re)?.checked_sub(self.im.checked_mul(rhs.im)?)?;
        let im = self.re.checked_mul(rhs.im)?.checked_add(self.im.checked_mul(rhs.re)?)?;
        Some(GaussianInt { re, im })
    }

    pub fn checked_sub(self, rhs: Self) -> Option<Self> {
        Some(GaussianInt {
            re: self.re.checked_sub(rhs.re)?,
            im: self.im.checked_sub(rhs.im)?,
        })
    }

    pub fn to_complex<T: Scalar>(self) -> C<T> {
        Complex::new(T::lit(self.re as f64), T::lit(self.im as f64))
    }

    /// Nearest Gaussian integer to a complex float (component-wise round).
    pub fn round_from<T: Scalar>(z: C<T>) -> Self {
        GaussianInt {
            re: z.re.round().to_i128().unwrap_or(0),
            im: z.im.round().to_i128().unwrap_or(0),
        }
    }
}

impl fmt::Display for GaussianInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{:+}j", self.re, self.im)
    }
}

/// Square Gaussian-integer matrix with `|det| = 1`, pairing a reduced
/// lattice basis to the original one via `reduced = t * basis`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnimodularTransform {
    n: usize,
    entries: Vec<GaussianInt>,
}

impl UnimodularTransform {
    pub fn identity(n: usize) -> Self {
        let mut entries = vec![GaussianInt::ZERO; n * n];
        for i in 0..n {
            entries[i * n + i] = GaussianInt::ONE;
        }
        UnimodularTransform { n, entries }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> GaussianInt {
        self.entries[i * self.n + j]
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.n)
    }

    /// `row_k -= coef * row_j`, the size-reduction update.
    pub(crate) fn row_sub(
        &mut self,
        k: usize,
        j: usize,
        coef: GaussianInt,
    ) -> Result<(), KernelError> {
        assert_ne!(k, j);
        for col in 0..self.n {
            let prod = coef
                .checked_mul(self.entries[j * self.n + col])
                .ok_or(KernelError::TransformOverflow)?;
            self.entries[k * self.n + col] = self.entries[k * self.n + col]
                .checked_sub(prod)
                .ok_or(KernelError::TransformOverflow)?;
        }
        Ok(())
    }

    pub(crate) fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for col in 0..self.n {
            self.entries.swap(a * self.n + col, b * self.n + col);
        }
    }

    /// Exact determinant by fraction-free (Bareiss) elimination over the
    /// Gaussian integers with arbitrary-precision components.
    pub fn det(&self) -> (BigInt, BigInt) {
        let m: Vec<(BigInt, BigInt)> = self
            .entries
            .iter()
            .map(|g| (BigInt::from(g.re), BigInt::from(g.im)))
            .collect();
        det_bigint(m, self.n)
    }

    /// Exact inverse via the adjugate; defined whenever `|det| = 1`, in
    /// which case the inverse is again a Gaussian-integer matrix.
    pub fn inverse_exact(&self) -> Result<UnimodularTransform, KernelError> {
        let n = self.n;
        let det = self.det();
        let det_norm = &det.0 * &det.0 + &det.1 * &det.1;
        if det_norm != BigInt::from(1) {
            return Err(KernelError::SingularGram);
        }
        // 1/det = conj(det) for unit determinants.
        let det_inv = (det.0.clone(), -det.1.clone());
        let mut entries = vec![GaussianInt::ZERO; n * n];
        for i in 0..n {
            for j in 0..n {
                // adj(T)[i][j] = (-1)^{i+j} * minor(j, i)
                let minor: Vec<(BigInt, BigInt)> = (0..n)
                    .filter(|&r| r != j)
                    .flat_map(|r| {
                        (0..n).filter(|&c| c != i).map(move |c| {
                            let g = self.entry(r, c);
                            (BigInt::from(g.re), BigInt::from(g.im))
                        })
                    })
                    .collect();
                let mut cof = if n == 1 {
                    (BigInt::from(1), BigInt::from(0))
                } else {
                    det_bigint(minor, n - 1)
                };
                if (i + j) % 2 == 1 {
                    cof = (-cof.0, -cof.1);
                }
                let val = gmul(&cof, &det_inv);
                let to_i128 = |b: &BigInt| -> Result<i128, KernelError> {
                    i128::try_from(b).map_err(|_| KernelError::TransformOverflow)
                };
                entries[i * n + j] = GaussianInt::new(to_i128(&val.0)?, to_i128(&val.1)?);
            }
        }
        Ok(UnimodularTransform { n, entries })
    }

    /// `t^{-1} * (1+j) * ones`, the lattice-domain image of the
    /// constellation center; exact.
    pub fn coset_offset(&self) -> Result<Vec<GaussianInt>, KernelError> {
        let inv = self.inverse_exact()?;
        inv.mul_gauss_vec(&vec![GaussianInt::new(1, 1); self.n])
    }

    /// `|det|^2 == 1`, checked exactly.
    pub fn is_unimodular(&self) -> bool {
        let (re, im) = self.det();
        &re * &re + &im * &im == BigInt::from(1)
    }

    pub fn to_complex_matrix<T: Scalar>(&self) -> ComplexMatrix<T> {
        ComplexMatrix::from_fn(self.n, self.n, |i, j| self.entry(i, j).to_complex())
    }

    /// Exact product with a Gaussian-integer vector.
    pub fn mul_gauss_vec(&self, v: &[GaussianInt]) -> Result<Vec<GaussianInt>, KernelError> {
        assert_eq!(v.len(), self.n);
        (0..self.n)
            .map(|i| {
                let mut acc = GaussianInt::ZERO;
                for (j, x) in v.iter().enumerate() {
                    let p = self
                        .entry(i, j)
                        .checked_mul(*x)
                        .ok_or(KernelError::TransformOverflow)?;
                    acc = GaussianInt::new(
                        acc.re.checked_add(p.re).ok_or(KernelError::TransformOverflow)?,
                        acc.im.checked_add(p.im).ok_or(KernelError::TransformOverflow)?,
                    );
                }
                Ok(acc)
            })
            .collect()
    }
}

/// Determinant of an `n x n` Gaussian-integer matrix in row-major layout,
/// by fraction-free (Bareiss) elimination.
fn det_bigint(mut m: Vec<(BigInt, BigInt)>, n: usize) -> (BigInt, BigInt) {
    let mut sign_flips = 0usize;
    let mut prev = (BigInt::from(1), BigInt::from(0));
    for k in 0..n.saturating_sub(1) {
        if m[k * n + k].0.is_zero() && m[k * n + k].1.is_zero() {
            let pivot_row =
                (k + 1..n).find(|&r| !(m[r * n + k].0.is_zero() && m[r * n + k].1.is_zero()));
            match pivot_row {
                Some(r) => {
                    for col in 0..n {
                        m.swap(k * n + col, r * n + col);
                    }
                    sign_flips += 1;
                }
                None => return (BigInt::from(0), BigInt::from(0)),
            }
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let a = gmul(&m[k * n + k], &m[i * n + j]);
                let b = gmul(&m[i * n + k], &m[k * n + j]);
                let num = (a.0 - b.0, a.1 - b.1);
                m[i * n + j] = gdiv_exact(&num, &prev);
            }
        }
        prev = m[k * n + k].clone();
    }
    let mut d = m[(n - 1) * n + (n - 1)].clone();
    if sign_flips % 2 == 1 {
        d = (-d.0, -d.1);
    }
    d
}

fn gmul(a: &(BigInt, BigInt), b: &(BigInt, BigInt)) -> (BigInt, BigInt) {
    (&a.0 * &b.0 - &a.1 * &b.1, &a.0 * &b.1 + &a.1 * &b.0)
}

/// Exact Gaussian-integer division; Bareiss guarantees divisibility.
fn gdiv_exact(a: &(BigInt, BigInt), b: &(BigInt, BigInt)) -> (BigInt, BigInt) {
    let norm = &b.0 * &b.0 + &b.1 * &b.1;
    assert!(!norm.is_zero(), "division by zero in exact elimination");
    // a / b = a * conj(b) / |b|^2
    let num = gmul(a, &(b.0.clone(), -b.1.clone()));
    let (q_re, r_re) = num_integer_div_rem(&num.0, &norm);
    let (q_im, r_im) = num_integer_div_rem(&num.1, &norm);
    assert!(r_re.is_zero() && r_im.is_zero(), "inexact division in Bareiss step");
    (q_re, q_im)
}

fn num_integer_div_rem(a: &BigInt, b: &BigInt) -> (BigInt, BigInt) {
    let q = a / b;
    let r = a - &q * b;
    (q, r)
}
