//! Quantitative evaluation: Eb/N0 conversion, sum-rate formulas (generic
//! log-det and the closed forms for BD and the lattice-aided family),
//! condition-number statistics, and the closed-form FLOP models with an
//! instrumented average for the lattice-reduction step.

use crate::channel::{generate_rayleigh, SystemConfig};
use crate::matkernel::{clll_reduce, hermitian_eig, invert, svd_full, ComplexMatrix, KernelError};
use crate::precoding::{build_precoder_traced, PrecoderKind, PrecoderOptions, PrecodingError};
use crate::rng::{complex_gaussian, stream_rng};
use crate::scalar::Scalar;
use num_rational::Rational64;
use num_traits::ToPrimitive;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("no complexity model for precoder '{0}'")]
    UnsupportedPrecoder(String),
    #[error("complexity model requires every user to have the same antenna count")]
    NonUniformUsers,
    #[error("matrix is singular")]
    Singular,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Precoding(#[from] PrecodingError),
}

/// Noise variance for a target Eb/N0 (dB) under
/// `Eb/N0 = N_R xi / (N_T M sigma_n^2)`.
pub fn ebno_to_noise_var<T: Scalar>(ebno_db: T, cfg: &SystemConfig<T>) -> T {
    let n_r = T::from_usize(cfg.n_rx()).unwrap();
    let n_t = T::from_usize(cfg.n_tx()).unwrap();
    let m = T::from_u32(cfg.bits_per_symbol()).unwrap();
    let lin = T::lit(10.0).powf(ebno_db / T::lit(10.0));
    n_r * cfg.xi() / (n_t * m * lin)
}

/// Generic sum-rate `log2 det(I + sigma_n^{-2} (H P)(H P)^H)` in bits.
pub fn sum_rate<T: Scalar>(
    h: &ComplexMatrix<T>,
    p: &ComplexMatrix<T>,
    sigma_n2: T,
) -> Result<T, MetricsError> {
    let hp = h.mul(p);
    let gram = hp.mul(&hp.hermitian()).scale(T::one() / sigma_n2);
    let m = gram.add_scaled_identity(T::one());
    let (lambda, _) = hermitian_eig(&m)?;
    Ok(lambda
        .iter()
        .map(|&l| l.max(T::one()).log2())
        .fold(T::zero(), |a, b| a + b))
}

/// Closed-form maximum sum-rate of the lattice-aided family:
/// `sum_i sum_l log2(1 + lambda_l^2 / (sigma_n^2 L_eff))`, where the
/// equal-ratio power split makes the per-user normalization penalty exactly
/// `L_eff`.
pub fn lr_max_sum_rate<T: Scalar>(per_user_sigma: &[Vec<T>], sigma_n2: T) -> T {
    per_user_sigma
        .iter()
        .map(|sigma| {
            let l_eff = T::from_usize(sigma.len()).unwrap();
            sigma
                .iter()
                .map(|&s| (T::one() + s * s / (sigma_n2 * l_eff)).log2())
                .fold(T::zero(), |a, b| a + b)
        })
        .fold(T::zero(), |a, b| a + b)
}

/// Closed-form BD sum-rate `sum_i sum_l log2(1 + lambda_l^2 / sigma_n^2)`.
pub fn bd_sum_rate<T: Scalar>(per_user_sigma: &[Vec<T>], sigma_n2: T) -> T {
    per_user_sigma
        .iter()
        .flatten()
        .map(|&s| (T::one() + s * s / sigma_n2).log2())
        .fold(T::zero(), |a, b| a + b)
}

/// Norm used for condition numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CondNorm {
    /// `sigma_max / sigma_min`; equals 1 exactly for orthogonal bases.
    Spectral,
    /// `||A||_F ||A^{-1}||_F`; at least `n` for an `n x n` matrix.
    Frobenius,
}

/// Condition number of `a` under the chosen norm.
pub fn condition_number<T: Scalar>(
    a: &ComplexMatrix<T>,
    norm: CondNorm,
) -> Result<T, MetricsError> {
    match norm {
        CondNorm::Spectral => {
            let f = svd_full(a)?;
            let smax = f.sigma[0];
            let smin = *f.sigma.last().unwrap();
            if !(smin > T::zero()) {
                return Err(MetricsError::Singular);
            }
            Ok(smax / smin)
        }
        CondNorm::Frobenius => {
            let inv = invert(a).map_err(|_| MetricsError::Singular)?;
            Ok(a.fro_norm() * inv.fro_norm())
        }
    }
}

/// Samples of `ln cond` for random square effective channels before and
/// after lattice reduction.
#[derive(Debug, Clone)]
pub struct CondPdfSamples {
    pub unreduced: Vec<f64>,
    pub reduced: Vec<f64>,
}

impl CondPdfSamples {
    pub fn mean(set: &[f64]) -> f64 {
        set.iter().sum::<f64>() / set.len() as f64
    }

    pub fn std(set: &[f64]) -> f64 {
        let mean = Self::mean(set);
        (set.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (set.len() - 1) as f64).sqrt()
    }
}

/// Draw `samples` i.i.d. complex Gaussian `dim x dim` channels and record
/// the natural log of the spectral condition number before and after CLLL
/// reduction with parameter `delta`.
pub fn cond_pdf_experiment(
    dim: usize,
    samples: usize,
    delta: f64,
    seed: u64,
) -> Result<CondPdfSamples, MetricsError> {
    let mut unreduced = Vec::with_capacity(samples);
    let mut reduced = Vec::with_capacity(samples);
    for trial in 0..samples {
        let mut rng = stream_rng(seed, 0, trial as u64, 0);
        let h: ComplexMatrix<f64> =
            ComplexMatrix::from_fn(dim, dim, |_, _| complex_gaussian(&mut rng, 1.0));
        let before = condition_number(&h, CondNorm::Spectral)?;
        let (h_red, _) = clll_reduce(&h, delta)?;
        let after = condition_number(&h_red, CondNorm::Spectral)?;
        unreduced.push(before.ln());
        reduced.push(after.ln());
    }
    Ok(CondPdfSamples { unreduced, reduced })
}

/// Closed-form FLOP budget of a precoder construction, kept in exact
/// rational arithmetic. The variable-complexity lattice-reduction step, when
/// the precoder has one, is reported through `measured_clll` instead.
#[derive(Debug, Clone, PartialEq)]
pub struct FlopReport {
    pub precoder: PrecoderKind,
    pub per_step: Vec<(&'static str, Rational64)>,
    pub measured_clll: Option<f64>,
}

impl FlopReport {
    /// Exact sum of the closed-form steps.
    pub fn analytic_total(&self) -> Rational64 {
        self.per_step
            .iter()
            .map(|(_, f)| *f)
            .fold(Rational64::from_integer(0), |a, b| a + b)
    }

    /// Analytic steps plus the measured lattice-reduction average.
    pub fn total(&self) -> f64 {
        self.analytic_total().to_f64().unwrap() + self.measured_clll.unwrap_or(0.0)
    }

    pub fn with_measured_clll(mut self, flops: f64) -> Self {
        self.measured_clll = Some(flops);
        self
    }
}

fn ratio(n: i64, d: i64) -> Rational64 {
    Rational64::new(n, d)
}

/// Evaluate the closed-form per-step FLOP counts for a supported precoder.
///
/// Models exist for RBD, S-GMI and LR-S-GMI-MMSE; the antenna layout must
/// be uniform across users.
pub fn flops_model<T: Scalar>(
    kind: PrecoderKind,
    cfg: &SystemConfig<T>,
) -> Result<FlopReport, MetricsError> {
    let k_users = cfg.users() as i64;
    let n_i = cfg.user_rx()[0];
    if cfg.user_rx().iter().any(|&n| n != n_i) {
        return Err(MetricsError::NonUniformUsers);
    }
    let n_i = n_i as i64;
    let n_t = cfg.n_tx() as i64;
    let n_r = cfg.n_rx() as i64;
    let n_bar = n_r - n_i;
    let k = Rational64::from_integer(k_users);

    let mmse_inversion = ratio(4, 3) * ratio(n_r.pow(3), 1)
        + ratio(12 * n_r * n_r * n_t - 2 * n_r * n_r - 2 * n_r * n_t, 1);
    let per_user_qr =
        k * ratio(16, 1) * (ratio(n_t * n_t * n_i - n_t * n_i * n_i, 1) + ratio(n_i.pow(3), 3));
    let effective_channel = k * ratio(8 * n_i * n_i * n_t - 2 * n_i * n_i, 1);
    let second_svd = k
        * ratio(64, 1)
        * (ratio(9 * n_i.pow(3), 8) + ratio(n_t * n_i * n_i, 1) + ratio(n_t * n_t * n_i, 2));

    let per_step: Vec<(&'static str, Rational64)> = match kind {
        PrecoderKind::Rbd => vec![
            (
                "svd of exclusion stacks",
                k * ratio(32, 1) * ratio(n_t * n_bar * n_bar + 2 * n_bar.pow(3), 1),
            ),
            ("inverse square root", k * ratio(18 * n_t + n_bar, 1)),
            ("first-filter product", k * ratio(8 * n_t.pow(3), 1)),
            ("effective channel", effective_channel),
            ("second svd", second_svd),
        ],
        PrecoderKind::Sgmi => vec![
            ("mmse inversion", mmse_inversion),
            ("per-user qr", per_user_qr),
            ("effective channel", effective_channel),
            ("second svd", second_svd),
        ],
        PrecoderKind::LrSgmiMmse => vec![
            ("mmse inversion", mmse_inversion),
            ("per-user qr", per_user_qr),
            ("effective channel", effective_channel),
            (
                "lattice pseudo-inverse",
                k * (ratio(4 * n_i.pow(3), 3) + ratio(12 * n_i.pow(3) - 4 * n_i * n_i, 1)),
            ),
        ],
        other => return Err(MetricsError::UnsupportedPrecoder(other.tag().to_string())),
    };

    Ok(FlopReport {
        precoder: kind,
        per_step,
        measured_clll: None,
    })
}

/// Complexity reduction of `a` relative to `b` in percent, rounded to one
/// decimal.
pub fn flops_reduction(a: &FlopReport, b: &FlopReport) -> f64 {
    let pct = 100.0 * (1.0 - a.total() / b.total());
    (pct * 10.0).round() / 10.0
}

/// Average lattice-reduction arithmetic per channel draw for a
/// lattice-aided precoder, measured over seeded Rayleigh draws.
pub fn measure_clll_flops<T: Scalar>(
    kind: PrecoderKind,
    cfg: &SystemConfig<T>,
    trials: u64,
    seed: u64,
    opts: &PrecoderOptions<T>,
) -> Result<f64, MetricsError> {
    assert!(kind.is_lattice_aided(), "only lattice-aided kinds have a CLLL step");
    assert!(trials > 0);
    let mut total = 0.0;
    for trial in 0..trials {
        let mut rng = stream_rng(seed, 1, trial, 0);
        let cs = generate_rayleigh(cfg, &mut rng);
        let (_, trace) = build_precoder_traced(kind, &cs, cfg, opts)?;
        total += trace.clll_flops;
    }
    Ok(total / trials as f64)
}
