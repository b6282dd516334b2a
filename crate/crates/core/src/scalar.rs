//! Scalar abstraction for the numeric kernels.
//!
//! All floating-point linear algebra in this crate is generic over a real
//! scalar `T` implementing [`Scalar`]; complex values are `Complex<T>`.
//! Concrete aliases for `f64` live at the crate root.

use num_complex::Complex;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use std::fmt::Debug;
use std::iter::Sum;

/// Real scalar usable by the matrix kernels: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum + Debug + Send + Sync + 'static
{
    /// Lossless-enough conversion from an `f64` literal (tolerances, constants).
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    /// Best-effort view as `f64`, used for diagnostics and reports.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for the complex scalar over `T`.
pub type C<T> = Complex<T>;

/// `a + 0i`.
pub fn cr<T: Scalar>(a: T) -> C<T> {
    Complex::new(a, T::zero())
}

/// Squared Euclidean norm of a complex slice.
pub fn vec_norm_sqr<T: Scalar>(v: &[C<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).fold(T::zero(), |a, b| a + b)
}

/// Euclidean norm of a complex slice.
pub fn vec_norm<T: Scalar>(v: &[C<T>]) -> T {
    vec_norm_sqr(v).sqrt()
}

/// Inner product `sum_k a_k * conj(b_k)`.
pub fn vec_dot<T: Scalar>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| x * y.conj())
        .fold(Complex::new(T::zero(), T::zero()), |acc, z| acc + z)
}
