//! Property tests over randomized matrices for the kernel invariants.

use mimo_precode::matkernel::{
    clll_reduce, invert, qr_thin, regularized_pinv, svd_full, ComplexMatrix,
};
use mimo_precode::CMat;
use num_complex::Complex;
use proptest::prelude::*;

fn complex_entry() -> impl Strategy<Value = Complex<f64>> {
    (-3.0..3.0f64, -3.0..3.0f64).prop_map(|(re, im)| Complex::new(re, im))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = CMat> {
    proptest::collection::vec(complex_entry(), rows * cols)
        .prop_map(move |data| ComplexMatrix::from_fn(rows, cols, |i, j| data[i * cols + j]))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qr_reconstructs_and_is_orthonormal(a in matrix(6, 3)) {
        if let Ok(f) = qr_thin(&a) {
            let resid = a.sub(&f.q.mul(&f.r)).fro_norm();
            prop_assert!(resid <= 1e-9 * a.fro_norm().max(1e-12));
            prop_assert!(f.q.hermitian().mul(&f.q).distance_from_identity() < 1e-10);
        }
    }

    #[test]
    fn svd_conserves_energy_and_sorts(a in matrix(4, 6)) {
        let f = svd_full(&a).unwrap();
        let energy: f64 = f.sigma.iter().map(|s| s * s).sum();
        prop_assert!((energy - a.fro_norm_sqr()).abs() <= 1e-9 * a.fro_norm_sqr().max(1e-12));
        prop_assert!(f.sigma.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(f.reconstruct().sub(&a).fro_norm() <= 1e-9 * a.fro_norm().max(1e-12));
    }

    #[test]
    fn pinv_forms_agree(h in matrix(4, 6), alpha in 0.01..2.0f64) {
        // Right form H^H (H H^H + aI)^{-1} against left form (H^H H + aI)^{-1} H^H.
        let right = regularized_pinv(&h, alpha).unwrap();
        let hh = h.hermitian();
        let left = invert(&hh.mul(&h).add_scaled_identity(alpha))
            .unwrap()
            .mul(&hh);
        let rel = right.sub(&left).fro_norm() / right.fro_norm().max(1e-12);
        prop_assert!(rel <= 1e-9, "forms disagree by {rel}");
    }

    #[test]
    fn pinv_approaches_right_inverse(h in matrix(3, 5)) {
        // As alpha decreases the product H * pinv approaches the identity
        // monotonically (Frobenius distance).
        let mut prev = f64::INFINITY;
        for alpha in [1.0, 0.1, 0.01, 1e-4] {
            let p = regularized_pinv(&h, alpha).unwrap();
            let dist = h.mul(&p).distance_from_identity();
            prop_assert!(dist <= prev + 1e-12, "distance rose: {dist} > {prev}");
            prev = dist;
        }
    }

    #[test]
    fn clll_transform_is_exactly_unimodular(b in matrix(3, 3), delta in 0.51..1.0f64) {
        if let Ok((red, t)) = clll_reduce(&b, delta) {
            prop_assert!(t.is_unimodular());
            let rebuilt = t.to_complex_matrix::<f64>().mul(&b);
            prop_assert!(rebuilt.sub(&red).fro_norm() <= 1e-9 * b.fro_norm().max(1e-12));
        }
    }
}
