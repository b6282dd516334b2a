//! Precoder constructions: the BD/RBD family, the channel-inversion family
//! (S-GMI, GZI) and their lattice-reduction-aided variants, plus solution
//! assembly, power normalization and residual-interference diagnostics.

mod first;
mod second;

pub use first::{bd_first, gzi_first, rbd_first, sgmi_first};
pub use second::{
    lr_mmse_second, lr_zf_second, mmse_second, svd_second, water_filling, zf_second, LrSecond,
    PowerLoading,
};

use crate::channel::{exclusion_channel, ChannelError, ChannelSet, SystemConfig};
use crate::matkernel::{ComplexMatrix, KernelError, UnimodularTransform};
use crate::scalar::{C, Scalar};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrecodingError {
    #[error("exclusion stack has full rank {rank} = n_tx {n_t}: no null space to precode into")]
    EmptyNullSpace { rank: usize, n_t: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("precoded signal is zero; normalization undefined")]
    ZeroSignal,
    #[error("effective channel is singular")]
    SingularEffectiveChannel,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
}

/// Implemented precoder families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PrecoderKind {
    Bd,
    BdWf,
    Rbd,
    Sgmi,
    GziZf,
    LrSgmiZf,
    LrSgmiMmse,
    LrGziZf,
    LrGziMmse,
}

impl PrecoderKind {
    pub const ALL: [PrecoderKind; 9] = [
        PrecoderKind::Bd,
        PrecoderKind::BdWf,
        PrecoderKind::Rbd,
        PrecoderKind::Sgmi,
        PrecoderKind::GziZf,
        PrecoderKind::LrSgmiZf,
        PrecoderKind::LrSgmiMmse,
        PrecoderKind::LrGziZf,
        PrecoderKind::LrGziMmse,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            PrecoderKind::Bd => "BD",
            PrecoderKind::BdWf => "BD-WF",
            PrecoderKind::Rbd => "RBD",
            PrecoderKind::Sgmi => "S-GMI",
            PrecoderKind::GziZf => "GZI-ZF",
            PrecoderKind::LrSgmiZf => "LR-S-GMI-ZF",
            PrecoderKind::LrSgmiMmse => "LR-S-GMI-MMSE",
            PrecoderKind::LrGziZf => "LR-GZI-ZF",
            PrecoderKind::LrGziMmse => "LR-GZI-MMSE",
        }
    }

    /// Solutions of this kind carry unimodular transforms and use the
    /// round-and-transform receiver.
    pub fn is_lattice_aided(self) -> bool {
        matches!(
            self,
            PrecoderKind::LrSgmiZf
                | PrecoderKind::LrSgmiMmse
                | PrecoderKind::LrGziZf
                | PrecoderKind::LrGziMmse
        )
    }

    /// Solutions of this kind carry decoding matrices and per-stream gains.
    pub fn uses_svd_receiver(self) -> bool {
        matches!(
            self,
            PrecoderKind::Bd | PrecoderKind::BdWf | PrecoderKind::Rbd | PrecoderKind::Sgmi
        )
    }
}

impl fmt::Display for PrecoderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for PrecoderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        PrecoderKind::ALL
            .iter()
            .copied()
            .find(|k| k.tag().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown precoder tag '{s}'"))
    }
}

/// Tuning knobs with conventional defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecoderOptions<T> {
    /// Lovasz parameter for the lattice reduction.
    pub delta: T,
}

impl<T: Scalar> Default for PrecoderOptions<T> {
    fn default() -> Self {
        PrecoderOptions { delta: T::lit(0.75) }
    }
}

/// A complete per-channel precoding solution.
#[derive(Debug, Clone)]
pub struct PrecodingSolution<T> {
    pub kind: PrecoderKind,
    /// Per-user first filters `P_i^a` (`n_t x m_i`).
    pub first: Vec<ComplexMatrix<T>>,
    /// Per-user second filters `P_i^b` (`m_i x n_i`).
    pub second: Vec<ComplexMatrix<T>>,
    /// Assembled transmit matrix `P` (`n_t x n_r`).
    pub assembled: ComplexMatrix<T>,
    /// Decoding matrices `G_i = U_i^H` for the SVD-receiver family.
    pub decode: Option<Vec<ComplexMatrix<T>>>,
    /// Per-user stream gains (singular values) matching `decode`.
    pub stream_gains: Option<Vec<Vec<T>>>,
    /// Per-user unimodular transforms for the lattice-aided family.
    pub transforms: Option<Vec<UnimodularTransform>>,
    /// Per-user lattice-domain images of the constellation center,
    /// `t^{-1} (1+j) ones`, precomputed exactly for the receiver.
    pub receive_offsets: Option<Vec<Vec<crate::matkernel::GaussianInt>>>,
    /// Inner dimensions `m_i`.
    pub m_i: Vec<usize>,
}

impl<T: Scalar> PrecodingSolution<T> {
    pub fn users(&self) -> usize {
        self.first.len()
    }

    /// Stream counts per user (`n_i`).
    pub fn user_streams(&self) -> Vec<usize> {
        self.second.iter().map(ComplexMatrix::cols).collect()
    }
}

/// Diagnostics from the construction, for complexity instrumentation.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuildTrace {
    /// Total lattice-reduction arithmetic across users (tally weights).
    pub clll_flops: f64,
}

/// Build a precoding solution for the given channel and configuration.
pub fn build_precoder<T: Scalar>(
    kind: PrecoderKind,
    cs: &ChannelSet<T>,
    cfg: &SystemConfig<T>,
    opts: &PrecoderOptions<T>,
) -> Result<PrecodingSolution<T>, PrecodingError> {
    build_precoder_traced(kind, cs, cfg, opts).map(|(sol, _)| sol)
}

/// As [`build_precoder`], also reporting instrumentation counters.
pub fn build_precoder_traced<T: Scalar>(
    kind: PrecoderKind,
    cs: &ChannelSet<T>,
    cfg: &SystemConfig<T>,
    opts: &PrecoderOptions<T>,
) -> Result<(PrecodingSolution<T>, BuildTrace), PrecodingError> {
    let users = cs.users();
    let alpha = cfg.alpha();
    let mut trace = BuildTrace::default();

    // First filters.
    let first: Vec<ComplexMatrix<T>> = match kind {
        PrecoderKind::Bd | PrecoderKind::BdWf => (0..users)
            .map(|i| bd_first(&exclusion_channel(cs, i)?))
            .collect::<Result<_, _>>()?,
        PrecoderKind::Rbd => (0..users)
            .map(|i| rbd_first(&exclusion_channel(cs, i)?, alpha))
            .collect::<Result<_, _>>()?,
        PrecoderKind::Sgmi | PrecoderKind::LrSgmiZf | PrecoderKind::LrSgmiMmse => {
            sgmi_first(cs, alpha)?
        }
        PrecoderKind::GziZf | PrecoderKind::LrGziZf | PrecoderKind::LrGziMmse => gzi_first(cs)?,
    };

    // Second filters and receiver-side data.
    let mut second = Vec::with_capacity(users);
    let mut decode = Vec::new();
    let mut gains = Vec::new();
    let mut transforms = Vec::new();
    for i in 0..users {
        let h_eff = cs.user(i).mul(&first[i]);
        match kind {
            PrecoderKind::Bd | PrecoderKind::BdWf | PrecoderKind::Rbd | PrecoderKind::Sgmi => {
                let loading = if kind == PrecoderKind::BdWf {
                    PowerLoading::WaterFilling {
                        budget: cfg.xi_per_user(),
                        noise_var: cfg.noise_var(),
                    }
                } else {
                    PowerLoading::Npl
                };
                let (p_b, g, sigma) = svd_second(&h_eff, loading)?;
                second.push(p_b);
                decode.push(g);
                gains.push(sigma);
            }
            PrecoderKind::GziZf => {
                second.push(zf_second(&h_eff)?);
            }
            PrecoderKind::LrSgmiZf | PrecoderKind::LrGziZf => {
                let out = lr_zf_second(&h_eff, opts.delta)?;
                trace.clll_flops += out.clll_flops;
                second.push(out.p_b);
                transforms.push(out.transform);
            }
            PrecoderKind::LrSgmiMmse | PrecoderKind::LrGziMmse => {
                let out = lr_mmse_second(&h_eff, alpha, opts.delta)?;
                trace.clll_flops += out.clll_flops;
                second.push(out.p_b);
                transforms.push(out.transform);
            }
        }
    }

    let assembled = assemble(&first, &second)?;
    let m_i = first.iter().map(ComplexMatrix::cols).collect();
    let receive_offsets = if kind.is_lattice_aided() {
        Some(
            transforms
                .iter()
                .map(UnimodularTransform::coset_offset)
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };
    let sol = PrecodingSolution {
        kind,
        first,
        second,
        assembled,
        decode: kind.uses_svd_receiver().then_some(decode),
        stream_gains: kind.uses_svd_receiver().then_some(gains),
        transforms: kind.is_lattice_aided().then_some(transforms),
        receive_offsets,
        m_i,
    };
    Ok((sol, trace))
}

/// Assembled transmit matrix `[P_1^a .. P_K^a] * blockdiag(P_1^b .. P_K^b)`,
/// equal to the column concatenation of the per-user products.
pub fn assemble<T: Scalar>(
    first: &[ComplexMatrix<T>],
    second: &[ComplexMatrix<T>],
) -> Result<ComplexMatrix<T>, PrecodingError> {
    if first.len() != second.len() || first.is_empty() {
        return Err(PrecodingError::DimensionMismatch(format!(
            "{} first filters vs {} second filters",
            first.len(),
            second.len()
        )));
    }
    let n_t = first[0].rows();
    for (i, (a, b)) in first.iter().zip(second).enumerate() {
        if a.rows() != n_t || a.cols() != b.rows() {
            return Err(PrecodingError::DimensionMismatch(format!(
                "user {i}: P^a is {}x{}, P^b is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
    }
    let first_refs: Vec<&ComplexMatrix<T>> = first.iter().collect();
    let second_refs: Vec<&ComplexMatrix<T>> = second.iter().collect();
    Ok(ComplexMatrix::hstack(&first_refs).mul(&ComplexMatrix::block_diag(&second_refs)))
}

/// Instantaneous normalization `gamma = ||P d||^2 / xi`; dividing the
/// transmit signal by `sqrt(gamma)` restores the power budget exactly.
pub fn normalization_factor<T: Scalar>(
    p: &ComplexMatrix<T>,
    d: &[C<T>],
    xi: T,
) -> Result<T, PrecodingError> {
    let s = p.mul_vec(d);
    let energy = crate::scalar::vec_norm_sqr(&s);
    if energy <= T::zero() {
        return Err(PrecodingError::ZeroSignal);
    }
    Ok(energy / xi)
}

/// Residual multiuser interference left by the first filters.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport<T> {
    /// `|| Hbar_i P_i^a ||_F` per user.
    pub per_user_mui: Vec<T>,
    /// `|| (Hbar_i P_i^a)(Hbar_i P_i^a)^H - I ||_F` per user; populated for
    /// RBD solutions only, where the product converges to the identity.
    pub gram_deviation: Vec<T>,
}

pub fn residual_report<T: Scalar>(
    cs: &ChannelSet<T>,
    sol: &PrecodingSolution<T>,
) -> Result<ResidualReport<T>, PrecodingError> {
    let mut per_user_mui = Vec::with_capacity(sol.users());
    let mut gram_deviation = Vec::new();
    for i in 0..sol.users() {
        let hbar = exclusion_channel(cs, i)?;
        if hbar.rows() == 0 {
            per_user_mui.push(T::zero());
            if sol.kind == PrecoderKind::Rbd {
                gram_deviation.push(T::zero());
            }
            continue;
        }
        let leak = hbar.mul(&sol.first[i]);
        per_user_mui.push(leak.fro_norm());
        if sol.kind == PrecoderKind::Rbd {
            let gram = leak.mul(&leak.hermitian());
            gram_deviation.push(gram.distance_from_identity());
        }
    }
    Ok(ResidualReport {
        per_user_mui,
        gram_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{generate_rayleigh, SystemConfig};
    use crate::rng::stream_rng;
    use crate::scalar::cr;
    use crate::CMat;

    fn cfg(noise: f64) -> SystemConfig<f64> {
        SystemConfig::uniform(6, 3, 2, noise).unwrap()
    }

    fn draw(seed: u64, noise: f64) -> (SystemConfig<f64>, crate::channel::ChannelSet<f64>) {
        let c = cfg(noise);
        let cs = generate_rayleigh(&c, &mut stream_rng(seed, 0, 0, 0));
        (c, cs)
    }

    #[test]
    fn tags_roundtrip() {
        for kind in PrecoderKind::ALL {
            assert_eq!(kind.tag().parse::<PrecoderKind>().unwrap(), kind);
        }
        assert!("BDX".parse::<PrecoderKind>().is_err());
    }

    #[test]
    fn assemble_matches_per_user_products() {
        let (c, cs) = draw(1, 0.1);
        let sol = build_precoder(PrecoderKind::Sgmi, &cs, &c, &Default::default()).unwrap();
        let products: Vec<CMat> = sol
            .first
            .iter()
            .zip(&sol.second)
            .map(|(a, b)| a.mul(b))
            .collect();
        let refs: Vec<&CMat> = products.iter().collect();
        let concat = CMat::hstack(&refs);
        assert!(concat.sub(&sol.assembled).fro_norm() < 1e-12 * concat.fro_norm().max(1.0));
    }

    #[test]
    fn assemble_single_user_is_plain_product() {
        let a = CMat::from_real(&[&[1.0], &[0.0]]);
        let b = CMat::from_real(&[&[2.0]]);
        let p = assemble(&[a.clone()], &[b.clone()]).unwrap();
        assert!(p.sub(&a.mul(&b)).fro_norm() < 1e-15);
    }

    #[test]
    fn assemble_identity_second_filters_concatenates() {
        let (c, cs) = draw(2, 0.1);
        let sol = build_precoder(PrecoderKind::Sgmi, &cs, &c, &Default::default()).unwrap();
        let eyes: Vec<CMat> = sol.first.iter().map(|f| CMat::identity(f.cols())).collect();
        let p = assemble(&sol.first, &eyes).unwrap();
        let refs: Vec<&CMat> = sol.first.iter().collect();
        assert!(p.sub(&CMat::hstack(&refs)).fro_norm() < 1e-15);
    }

    #[test]
    fn assemble_rejects_mismatch() {
        let a = CMat::identity(3);
        let b = CMat::identity(2);
        assert!(matches!(
            assemble(&[a], &[b]),
            Err(PrecodingError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn normalization_trivial_and_conserving() {
        let d = [cr(1.0_f64), cr(1.0)];
        // P = I, ||d||^2 = 2 = xi -> gamma = 1.
        assert!((normalization_factor(&CMat::identity(2), &d, 2.0).unwrap() - 1.0).abs() < 1e-15);
        // P = 2I -> gamma = 4.
        assert!(
            (normalization_factor(&CMat::identity(2).scale(2.0), &d, 2.0).unwrap() - 4.0).abs()
                < 1e-15
        );
        // Conservation: ||P d / sqrt(gamma)||^2 = xi.
        let (c, cs) = draw(3, 0.1);
        let sol = build_precoder(PrecoderKind::Rbd, &cs, &c, &Default::default()).unwrap();
        let d: Vec<num_complex::Complex<f64>> = (0..6)
            .map(|k| num_complex::Complex::new(if k % 2 == 0 { 1.0 } else { -1.0 }, 1.0))
            .collect();
        let gamma = normalization_factor(&sol.assembled, &d, c.xi()).unwrap();
        let x = sol.assembled.mul_vec(&d);
        let power = crate::scalar::vec_norm_sqr(&x) / gamma;
        assert!((power - c.xi()).abs() < 1e-12 * c.xi());
    }

    #[test]
    fn zero_signal_rejected() {
        let d = [cr(1.0_f64)];
        let p = CMat::zeros(2, 1);
        assert!(matches!(
            normalization_factor(&p, &d, 1.0),
            Err(PrecodingError::ZeroSignal)
        ));
    }

    #[test]
    fn bd_solution_has_zero_mui_and_decoders() {
        let (c, cs) = draw(4, 0.1);
        let sol = build_precoder(PrecoderKind::Bd, &cs, &c, &Default::default()).unwrap();
        assert!(sol.decode.is_some());
        assert!(sol.transforms.is_none());
        assert_eq!(sol.m_i, vec![2, 2, 2]);
        let report = residual_report(&cs, &sol).unwrap();
        for (i, &mui) in report.per_user_mui.iter().enumerate() {
            let hbar = exclusion_channel(&cs, i).unwrap();
            assert!(mui <= 1e-9 * hbar.fro_norm(), "user {i} leaks {mui}");
        }
    }

    #[test]
    fn rbd_dimensions_and_gram_limit() {
        let (c, cs) = draw(5, 1e-8);
        let sol = build_precoder(PrecoderKind::Rbd, &cs, &c, &Default::default()).unwrap();
        assert_eq!(sol.m_i, vec![6, 6, 6]);
        let report = residual_report(&cs, &sol).unwrap();
        assert_eq!(report.gram_deviation.len(), 3);
        for &dev in &report.gram_deviation {
            assert!(dev <= 0.05 * 2.0, "gram deviation {dev}"); // 0.05 sqrt(N_bar)
        }
    }

    #[test]
    fn sgmi_residual_shrinks_with_alpha() {
        let (_, cs) = draw(6, 1.0);
        let mut prev = vec![f64::INFINITY; 3];
        for &noise in &[1.0, 0.1, 0.01, 1e-4] {
            let c = cfg(noise);
            let sol = build_precoder(PrecoderKind::Sgmi, &cs, &c, &Default::default()).unwrap();
            let report = residual_report(&cs, &sol).unwrap();
            for (user, (&now, before)) in report.per_user_mui.iter().zip(&mut prev).enumerate() {
                assert!(now <= *before + 1e-12, "user {user} residual grew: {now} > {before}");
                *before = now;
            }
        }
    }

    #[test]
    fn lattice_solutions_carry_transforms() {
        let (c, cs) = draw(7, 0.05);
        for kind in [
            PrecoderKind::LrSgmiZf,
            PrecoderKind::LrSgmiMmse,
            PrecoderKind::LrGziZf,
            PrecoderKind::LrGziMmse,
        ] {
            let (sol, trace) = build_precoder_traced(kind, &cs, &c, &Default::default()).unwrap();
            let transforms = sol.transforms.as_ref().unwrap();
            assert_eq!(transforms.len(), 3);
            assert!(transforms.iter().all(UnimodularTransform::is_unimodular));
            assert!(sol.decode.is_none());
            assert!(trace.clll_flops > 0.0);
            assert_eq!(sol.assembled.rows(), 6);
            assert_eq!(sol.assembled.cols(), 6);
        }
    }

    #[test]
    fn single_user_mui_reported_zero() {
        let c = SystemConfig::uniform(4, 1, 4, 0.1).unwrap();
        let cs = generate_rayleigh(&c, &mut stream_rng(8, 0, 0, 0));
        let sol = build_precoder(PrecoderKind::Sgmi, &cs, &c, &Default::default()).unwrap();
        let report = residual_report(&cs, &sol).unwrap();
        assert_eq!(report.per_user_mui, vec![0.0]);
    }
}
