//! Experiment orchestration: seeded parallel Monte Carlo sweeps over
//! precoders and operating points, with resumable CSV persistence.
//!
//! Every trial draws its RNG stream from `(master seed, point index,
//! trial, attempt)`, so results are bit-identical regardless of worker
//! count, and all precoders at a sweep point share the same channel,
//! data and noise draws (paired comparisons).

use crate::channel::{
    check_dimensionality, generate_rayleigh, perturb_with_error, shape_with_correlation,
    CsiErrorModel, SystemConfig,
};
use crate::metrics::{
    cond_pdf_experiment, ebno_to_noise_var, flops_model, measure_clll_flops, sum_rate,
    MetricsError,
};
use crate::precoding::{build_precoder, PrecoderKind, PrecoderOptions, PrecodingError};
use crate::rng::stream_rng;
use crate::transceiver::{detection_bit_errors, qpsk_modulate, receive, transmit, QPSK_BITS};
use num_complex::Complex;
use rand::Rng;
use rayon::prelude::*;
use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment configuration: {0}")]
    ConfigInvalid(String),
    #[error("i/o failure on '{path}': {message}")]
    Io { path: String, message: String },
    #[error("simulation failure: {0}")]
    Internal(String),
}

impl From<MetricsError> for HarnessError {
    fn from(e: MetricsError) -> Self {
        HarnessError::Internal(e.to_string())
    }
}

impl From<PrecodingError> for HarnessError {
    fn from(e: PrecodingError) -> Self {
        HarnessError::Internal(e.to_string())
    }
}

/// Kind of sweep an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    Ber,
    SumRate,
    CondPdf,
    Flops,
    CsiSweep,
}

impl SweepKind {
    pub fn tag(self) -> &'static str {
        match self {
            SweepKind::Ber => "BER",
            SweepKind::SumRate => "SUMRATE",
            SweepKind::CondPdf => "CONDPDF",
            SweepKind::Flops => "FLOPS",
            SweepKind::CsiSweep => "CSI_SWEEP",
        }
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SweepKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "BER" => Ok(SweepKind::Ber),
            "SUMRATE" => Ok(SweepKind::SumRate),
            "CONDPDF" => Ok(SweepKind::CondPdf),
            "FLOPS" => Ok(SweepKind::Flops),
            "CSI_SWEEP" => Ok(SweepKind::CsiSweep),
            other => Err(format!("unknown sweep kind '{other}'")),
        }
    }
}

/// Full experiment description; see `ExperimentConfig::parse` for the flat
/// key = value file format.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub n_tx: usize,
    pub user_rx: Vec<usize>,
    /// Total transmit power; defaults to `N_R`.
    pub xi: Option<f64>,
    pub bits_per_symbol: u32,
    pub precoders: Vec<PrecoderKind>,
    pub ebno_db: Vec<f64>,
    pub trials: u64,
    pub packet_len: u64,
    pub seed: u64,
    pub sweep: SweepKind,
    pub output_path: String,
    /// Lovasz parameter for lattice reductions.
    pub delta: f64,
    /// Emit the optional binomial standard-error column.
    pub errbars: bool,
    /// Transmit-correlation coefficient for CSI sweeps.
    pub corr_r: f64,
    /// Error-variance grid for CSI sweeps.
    pub sigma_e2: Vec<f64>,
    /// User-count grid for FLOPS sweeps (per-user antennas fixed).
    pub sweep_users: Vec<usize>,
    /// Per-user antenna grid for FLOPS sweeps (user count fixed).
    pub sweep_rx: Vec<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n_tx: 8,
            user_rx: vec![2, 2, 2, 2],
            xi: None,
            bits_per_symbol: 2,
            precoders: vec![
                PrecoderKind::Rbd,
                PrecoderKind::Sgmi,
                PrecoderKind::LrSgmiMmse,
            ],
            ebno_db: (0..=20).step_by(2).map(f64::from).collect(),
            trials: 10_000,
            packet_len: 100,
            seed: 1,
            sweep: SweepKind::Ber,
            output_path: "results.csv".into(),
            delta: 0.75,
            errbars: false,
            corr_r: 0.2,
            sigma_e2: (0..=10).map(|k| 0.02 * k as f64).collect(),
            sweep_users: (2..=7).collect(),
            sweep_rx: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    /// Parse the flat `key = value` format. Unknown keys are rejected;
    /// `#` starts a comment; lists are comma-separated.
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut cfg = ExperimentConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                HarnessError::ConfigInvalid(format!("line {}: expected key = value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                HarnessError::ConfigInvalid(format!("line {}: bad {what}: '{value}'", lineno + 1))
            };
            match key {
                "n_tx" => cfg.n_tx = value.parse().map_err(|_| bad("n_tx"))?,
                "user_rx" => cfg.user_rx = parse_list(value).map_err(|_| bad("user_rx"))?,
                "xi" => cfg.xi = Some(value.parse().map_err(|_| bad("xi"))?),
                "bits_per_symbol" => {
                    cfg.bits_per_symbol = value.parse().map_err(|_| bad("bits_per_symbol"))?
                }
                "precoders" => {
                    cfg.precoders = value
                        .split(',')
                        .map(|s| s.parse::<PrecoderKind>())
                        .collect::<Result<_, _>>()
                        .map_err(HarnessError::ConfigInvalid)?
                }
                "ebno_db" => cfg.ebno_db = parse_list(value).map_err(|_| bad("ebno_db"))?,
                "trials" => cfg.trials = value.parse().map_err(|_| bad("trials"))?,
                "packet_len" => cfg.packet_len = value.parse().map_err(|_| bad("packet_len"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("seed"))?,
                "sweep" => cfg.sweep = value.parse().map_err(HarnessError::ConfigInvalid)?,
                "output_path" => cfg.output_path = value.to_string(),
                "delta" => cfg.delta = value.parse().map_err(|_| bad("delta"))?,
                "errbars" => cfg.errbars = value.parse().map_err(|_| bad("errbars"))?,
                "corr_r" => cfg.corr_r = value.parse().map_err(|_| bad("corr_r"))?,
                "sigma_e2" => cfg.sigma_e2 = parse_list(value).map_err(|_| bad("sigma_e2"))?,
                "sweep_users" => {
                    cfg.sweep_users = parse_list(value).map_err(|_| bad("sweep_users"))?
                }
                "sweep_rx" => cfg.sweep_rx = parse_list(value).map_err(|_| bad("sweep_rx"))?,
                other => {
                    return Err(HarnessError::ConfigInvalid(format!(
                        "line {}: unknown key '{other}'",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
            path: path.to_string(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let invalid = |msg: String| Err(HarnessError::ConfigInvalid(msg));
        if self.trials == 0 || self.packet_len == 0 {
            return invalid("trials and packet_len must be at least 1".into());
        }
        if self.precoders.is_empty() {
            return invalid("at least one precoder is required".into());
        }
        if self.bits_per_symbol != QPSK_BITS as u32 {
            return invalid("only QPSK (bits_per_symbol = 2) is implemented".into());
        }
        match self.sweep {
            SweepKind::Ber | SweepKind::SumRate => {
                if self.ebno_db.is_empty() {
                    return invalid("ebno_db must be non-empty for BER/SUMRATE sweeps".into());
                }
            }
            SweepKind::CsiSweep => {
                if self.sigma_e2.is_empty() {
                    return invalid("CSI_SWEEP requires a sigma_e2 grid".into());
                }
                if self.ebno_db.len() != 1 {
                    return invalid("CSI_SWEEP requires exactly one ebno_db value".into());
                }
                if self.corr_r.abs() > 1.0 {
                    return invalid("corr_r must have magnitude at most 1".into());
                }
            }
            SweepKind::Flops => {
                if self.sweep_users.is_empty() && self.sweep_rx.is_empty() {
                    return invalid("FLOPS sweep needs sweep_users or sweep_rx".into());
                }
                for kind in &self.precoders {
                    if flops_model(*kind, &self.system()?).is_err() {
                        return invalid(format!("no complexity model for '{}'", kind.tag()));
                    }
                }
            }
            SweepKind::CondPdf => {}
        }
        if !(self.delta > 0.5 && self.delta <= 1.0) {
            return invalid("delta must lie in (0.5, 1]".into());
        }
        self.system().map(|_| ())
    }

    /// System parameters with a placeholder noise variance; each sweep point
    /// substitutes its own.
    pub fn system(&self) -> Result<SystemConfig<f64>, HarnessError> {
        let xi = self.xi.unwrap_or_else(|| self.user_rx.iter().sum::<usize>() as f64);
        SystemConfig::new(self.n_tx, self.user_rx.clone(), xi, 1.0, self.bits_per_symbol)
            .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    fn options(&self) -> PrecoderOptions<f64> {
        PrecoderOptions { delta: self.delta }
    }
}

fn parse_list<T: FromStr>(value: &str) -> Result<Vec<T>, T::Err> {
    value
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}

/// One record of a sweep: a (precoder, point) cell with its measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub precoder: String,
    pub sweep: SweepKind,
    pub param: Option<f64>,
    pub ebno_db: Option<f64>,
    pub ber: Option<f64>,
    pub bit_errors: Option<u64>,
    pub bits: Option<u64>,
    pub sum_rate_bits: Option<f64>,
    pub flops_total: Option<f64>,
    pub seed: u64,
    pub trials: u64,
    pub ber_stderr: Option<f64>,
}

impl ExperimentResult {
    fn sort_key(&self) -> (String, FloatOrd, FloatOrd) {
        (
            self.precoder.clone(),
            FloatOrd(self.param.unwrap_or(f64::NEG_INFINITY)),
            FloatOrd(self.ebno_db.unwrap_or(f64::NEG_INFINITY)),
        )
    }

    fn dedupe_key(&self) -> String {
        format!(
            "{}|{}|{}|{}|{}|{}",
            self.precoder,
            self.sweep.tag(),
            self.param.map(fmt_g10).unwrap_or_default(),
            self.ebno_db.map(fmt_g10).unwrap_or_default(),
            self.seed,
            self.trials
        )
    }
}

#[derive(PartialEq, PartialOrd)]
struct FloatOrd(f64);

impl Eq for FloatOrd {}
#[allow(clippy::derive_ord_xor_partial_ord)]
impl Ord for FloatOrd {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.partial_cmp(other).unwrap_or(std::cmp::Ordering::Equal)
    }
}

/// Run the configured experiment. Previously computed sweep points found in
/// the output file are kept as-is; missing ones are computed, merged,
/// sorted and written back.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>, HarnessError> {
    cfg.validate()?;
    let existing = load_existing(&cfg.output_path, cfg.errbars)?;
    let have: BTreeSet<String> = existing.iter().map(ExperimentResult::dedupe_key).collect();

    let computed: Vec<ExperimentResult> = if cfg.sweep == SweepKind::CondPdf {
        run_cond_pdf(cfg)?
            .into_iter()
            .filter(|r| !have.contains(&r.dedupe_key()))
            .collect()
    } else {
        let mut wanted = plan(cfg)?;
        wanted.retain(|r| !have.contains(&r.dedupe_key()));
        wanted
            .into_iter()
            .map(|stub| compute_point(cfg, stub))
            .collect::<Result<_, _>>()?
    };

    let mut all = existing;
    all.extend(computed);
    all.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    if !cfg.output_path.is_empty() {
        write_csv(&all, &cfg.output_path, cfg.errbars)?;
    }
    Ok(all)
}

/// Placeholder results describing every (precoder, point) cell the config
/// asks for; measurements are filled in by `compute_point`.
fn plan(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>, HarnessError> {
    let blank = |precoder: String, param: Option<f64>, ebno: Option<f64>| ExperimentResult {
        precoder,
        sweep: cfg.sweep,
        param,
        ebno_db: ebno,
        ber: None,
        bit_errors: None,
        bits: None,
        sum_rate_bits: None,
        flops_total: None,
        seed: cfg.seed,
        trials: cfg.trials,
        ber_stderr: None,
    };
    let mut stubs = Vec::new();
    match cfg.sweep {
        SweepKind::Ber | SweepKind::SumRate => {
            for kind in &cfg.precoders {
                for &ebno in &cfg.ebno_db {
                    stubs.push(blank(kind.tag().to_string(), None, Some(ebno)));
                }
            }
        }
        SweepKind::CsiSweep => {
            for kind in &cfg.precoders {
                for &s_e2 in &cfg.sigma_e2 {
                    stubs.push(blank(kind.tag().to_string(), Some(s_e2), Some(cfg.ebno_db[0])));
                }
            }
        }
        SweepKind::Flops => {
            let grid: Vec<f64> = if !cfg.sweep_users.is_empty() {
                cfg.sweep_users.iter().map(|&k| k as f64).collect()
            } else {
                cfg.sweep_rx.iter().map(|&n| n as f64).collect()
            };
            for kind in &cfg.precoders {
                for &p in &grid {
                    stubs.push(blank(kind.tag().to_string(), Some(p), None));
                }
            }
        }
        SweepKind::CondPdf => unreachable!("CONDPDF is expanded by run_cond_pdf"),
    }
    Ok(stubs)
}

fn compute_point(
    cfg: &ExperimentConfig,
    stub: ExperimentResult,
) -> Result<ExperimentResult, HarnessError> {
    match cfg.sweep {
        SweepKind::Ber | SweepKind::CsiSweep => compute_ber_point(cfg, stub),
        SweepKind::SumRate => compute_sumrate_point(cfg, stub),
        SweepKind::Flops => compute_flops_point(cfg, stub),
        SweepKind::CondPdf => unreachable!("CONDPDF is expanded by run_cond_pdf"),
    }
}

fn kind_of(stub: &ExperimentResult) -> Result<PrecoderKind, HarnessError> {
    stub.precoder
        .parse()
        .map_err(|e: String| HarnessError::Internal(e))
}

fn compute_ber_point(
    cfg: &ExperimentConfig,
    mut stub: ExperimentResult,
) -> Result<ExperimentResult, HarnessError> {
    let kind = kind_of(&stub)?;
    let base = cfg.system()?;
    let ebno = stub.ebno_db.expect("BER point carries an Eb/N0");
    let noise_var = ebno_to_noise_var(ebno, &base);
    let system = base.with_noise_var(noise_var);
    let opts = cfg.options();

    let (point, csi) = match cfg.sweep {
        SweepKind::CsiSweep => {
            let s_e2 = stub.param.expect("CSI point carries sigma_e2");
            let index = cfg
                .sigma_e2
                .iter()
                .position(|&x| x == s_e2)
                .unwrap_or_default() as u64;
            let model = CsiErrorModel::new(s_e2, Complex::new(cfg.corr_r, 0.0))
                .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
            (index, Some(model))
        }
        _ => {
            let index = cfg
                .ebno_db
                .iter()
                .position(|&x| x == ebno)
                .unwrap_or_default() as u64;
            (index, None)
        }
    };

    let outcomes: Vec<Result<u64, HarnessError>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| run_ber_trial(&system, kind, csi.as_ref(), &opts, cfg, point, trial))
        .collect();
    let mut bit_errors = 0u64;
    for o in outcomes {
        bit_errors += o?;
    }
    let bits = cfg.trials * cfg.packet_len * system.n_rx() as u64 * QPSK_BITS as u64;
    let ber = bit_errors as f64 / bits as f64;
    stub.ber = Some(ber);
    stub.bit_errors = Some(bit_errors);
    stub.bits = Some(bits);
    if cfg.errbars {
        stub.ber_stderr = Some((ber * (1.0 - ber) / bits as f64).sqrt());
    }
    Ok(stub)
}

const MAX_REDRAWS: u64 = 16;

fn run_ber_trial(
    system: &SystemConfig<f64>,
    kind: PrecoderKind,
    csi: Option<&CsiErrorModel<f64>>,
    opts: &PrecoderOptions<f64>,
    cfg: &ExperimentConfig,
    point: u64,
    trial: u64,
) -> Result<u64, HarnessError> {
    for attempt in 0..MAX_REDRAWS {
        let mut rng = stream_rng(cfg.seed, point, trial, attempt);
        let drawn = generate_rayleigh(system, &mut rng);
        // Under imperfect CSI the correlated channel is the physical one;
        // only the additive estimation error separates design from truth.
        let (cs, design) = match csi {
            Some(model) => {
                let physical = shape_with_correlation(&drawn, model.corr_r)
                    .map_err(|e| HarnessError::Internal(e.to_string()))?;
                let estimate = perturb_with_error(&physical, model.sigma_e2, &mut rng);
                (physical, estimate)
            }
            None => (drawn.clone(), drawn),
        };
        if check_dimensionality(&design)
            .map_err(|e| HarnessError::Internal(e.to_string()))?
            .is_err()
        {
            continue; // degenerate draw; redraw with the next attempt stream
        }
        let sol = match build_precoder(kind, &design, system, opts) {
            Ok(sol) => sol,
            Err(
                PrecodingError::Kernel(_)
                | PrecodingError::SingularEffectiveChannel
                | PrecodingError::EmptyNullSpace { .. },
            ) => continue,
            Err(e) => return Err(e.into()),
        };

        let mut errors = 0u64;
        let n_bits = system.n_rx() * QPSK_BITS;
        for _ in 0..cfg.packet_len {
            let bits: Vec<u8> = (0..n_bits).map(|_| rng.gen_range(0..2u8)).collect();
            let d = qpsk_modulate::<f64>(&bits).map_err(|e| HarnessError::Internal(e.to_string()))?;
            let rv = transmit(&cs, &sol, &d, system.xi(), system.noise_var(), &mut rng)
                .map_err(|e| HarnessError::Internal(e.to_string()))?;
            let det = receive(&rv, &sol).map_err(|e| HarnessError::Internal(e.to_string()))?;
            errors += detection_bit_errors(&d, &det)
                .map_err(|e| HarnessError::Internal(e.to_string()))?;
        }
        return Ok(errors);
    }
    Err(HarnessError::Internal(format!(
        "trial {trial} exhausted {MAX_REDRAWS} redraws (degenerate channels)"
    )))
}

fn compute_sumrate_point(
    cfg: &ExperimentConfig,
    mut stub: ExperimentResult,
) -> Result<ExperimentResult, HarnessError> {
    let kind = kind_of(&stub)?;
    let base = cfg.system()?;
    let ebno = stub.ebno_db.expect("SUMRATE point carries an Eb/N0");
    let noise_var = ebno_to_noise_var(ebno, &base);
    let system = base.with_noise_var(noise_var);
    let opts = cfg.options();
    let point = cfg
        .ebno_db
        .iter()
        .position(|&x| x == ebno)
        .unwrap_or_default() as u64;

    let rates: Vec<Result<f64, HarnessError>> = (0..cfg.trials)
        .into_par_iter()
        .map(|trial| -> Result<f64, HarnessError> {
            for attempt in 0..MAX_REDRAWS {
                let mut rng = stream_rng(cfg.seed, point, trial, attempt);
                let cs = generate_rayleigh(&system, &mut rng);
                if check_dimensionality(&cs)
                    .map_err(|e| HarnessError::Internal(e.to_string()))?
                    .is_err()
                {
                    continue;
                }
                let sol = match build_precoder(kind, &cs, &system, &opts) {
                    Ok(sol) => sol,
                    Err(
                        PrecodingError::Kernel(_)
                        | PrecodingError::SingularEffectiveChannel
                        | PrecodingError::EmptyNullSpace { .. },
                    ) => continue,
                    Err(e) => return Err(e.into()),
                };
                // Scale the precoder to spend the power budget exactly
                // (unit-energy symbol convention for rate evaluation).
                let scale = (system.xi() / sol.assembled.fro_norm_sqr()).sqrt();
                let p = sol.assembled.scale(scale);
                return sum_rate(cs.combined(), &p, system.noise_var())
                    .map_err(HarnessError::from);
            }
            Err(HarnessError::Internal(format!(
                "trial {trial} exhausted {MAX_REDRAWS} redraws"
            )))
        })
        .collect();

    let mut total = 0.0;
    for r in rates {
        total += r?;
    }
    stub.sum_rate_bits = Some(total / cfg.trials as f64);
    Ok(stub)
}

fn compute_flops_point(
    cfg: &ExperimentConfig,
    mut stub: ExperimentResult,
) -> Result<ExperimentResult, HarnessError> {
    let kind = kind_of(&stub)?;
    let p = stub.param.expect("FLOPS point carries a grid value") as usize;
    let (users, n_i) = if !cfg.sweep_users.is_empty() {
        (p, cfg.user_rx[0])
    } else {
        (cfg.user_rx.len(), p)
    };
    let n_tx = users * n_i;
    let ebno = cfg.ebno_db.first().copied().unwrap_or(15.0);
    let base = SystemConfig::uniform(n_tx, users, n_i, 1.0)
        .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
    let system = base.with_noise_var(ebno_to_noise_var(ebno, &base));

    let mut report = flops_model(kind, &system)?;
    if kind.is_lattice_aided() {
        let trials = cfg.trials.min(200);
        let measured = measure_clll_flops(kind, &system, trials, cfg.seed, &cfg.options())?;
        report = report.with_measured_clll(measured);
    }
    stub.flops_total = Some(report.total());
    Ok(stub)
}

/// Expand the CONDPDF sweep into one row per sample, with the ln-cond value
/// in the `param` column.
fn run_cond_pdf(cfg: &ExperimentConfig) -> Result<Vec<ExperimentResult>, HarnessError> {
    let samples = cond_pdf_experiment(6, cfg.trials as usize, cfg.delta, cfg.seed)?;
    let row = |set: &str, value: f64| ExperimentResult {
        precoder: set.to_string(),
        sweep: SweepKind::CondPdf,
        param: Some(value),
        ebno_db: None,
        ber: None,
        bit_errors: None,
        bits: None,
        sum_rate_bits: None,
        flops_total: None,
        seed: cfg.seed,
        trials: cfg.trials,
        ber_stderr: None,
    };
    let mut rows: Vec<ExperimentResult> = Vec::with_capacity(2 * cfg.trials as usize);
    rows.extend(samples.unreduced.iter().map(|&v| row("UNREDUCED", v)));
    rows.extend(samples.reduced.iter().map(|&v| row("REDUCED", v)));
    Ok(rows)
}

const CSV_HEADER: &str =
    "precoder,sweep,param,ebno_db,ber,bit_errors,bits,sum_rate_bits,flops_total,seed,trials";

/// Format a float with ten significant digits.
pub fn fmt_g10(x: f64) -> String {
    format!("{x:.9e}")
}

fn csv_line(r: &ExperimentResult, errbars: bool) -> String {
    let f = |v: Option<f64>| v.map(fmt_g10).unwrap_or_default();
    let u = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut line = format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        r.precoder,
        r.sweep.tag(),
        f(r.param),
        f(r.ebno_db),
        f(r.ber),
        u(r.bit_errors),
        u(r.bits),
        f(r.sum_rate_bits),
        f(r.flops_total),
        r.seed,
        r.trials
    );
    if errbars {
        line.push(',');
        line.push_str(&f(r.ber_stderr));
    }
    line
}

/// Write results sorted by (precoder, param, ebno_db) under the fixed
/// 11-column schema (12 with `errbars`).
pub fn write_csv(
    results: &[ExperimentResult],
    path: &str,
    errbars: bool,
) -> Result<(), HarnessError> {
    let io_err = |e: std::io::Error| HarnessError::Io {
        path: path.to_string(),
        message: e.to_string(),
    };
    let mut sorted: Vec<&ExperimentResult> = results.iter().collect();
    sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    if errbars {
        out.push_str(",ber_stderr");
    }
    out.push('\n');
    for r in sorted {
        out.push_str(&csv_line(r, errbars));
        out.push('\n');
    }
    if let Some(dir) = Path::new(path).parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(io_err)?;
        }
    }
    std::fs::write(path, out).map_err(io_err)
}

/// Parse a results file previously written by `write_csv`; a missing file
/// yields an empty list, a foreign header discards the file.
fn load_existing(path: &str, errbars: bool) -> Result<Vec<ExperimentResult>, HarnessError> {
    if path.is_empty() || !Path::new(path).exists() {
        return Ok(Vec::new());
    }
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io {
        path: path.to_string(),
        message: e.to_string(),
    })?;
    let mut lines = text.lines();
    let expected = if errbars {
        format!("{CSV_HEADER},ber_stderr")
    } else {
        CSV_HEADER.to_string()
    };
    match lines.next() {
        Some(h) if h == expected => {}
        _ => return Ok(Vec::new()),
    }
    let mut out = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 11 {
            return Ok(Vec::new()); // corrupted; recompute everything
        }
        let opt_f = |s: &str| -> Option<f64> { s.parse().ok() };
        let opt_u = |s: &str| -> Option<u64> { s.parse().ok() };
        let Ok(sweep) = fields[1].parse::<SweepKind>() else {
            return Ok(Vec::new());
        };
        out.push(ExperimentResult {
            precoder: fields[0].to_string(),
            sweep,
            param: opt_f(fields[2]),
            ebno_db: opt_f(fields[3]),
            ber: opt_f(fields[4]),
            bit_errors: opt_u(fields[5]),
            bits: opt_u(fields[6]),
            sum_rate_bits: opt_f(fields[7]),
            flops_total: opt_f(fields[8]),
            seed: opt_u(fields[9]).unwrap_or_default(),
            trials: opt_u(fields[10]).unwrap_or_default(),
            ber_stderr: fields.get(11).and_then(|s| opt_f(s)),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_ber_cfg(path: &str) -> ExperimentConfig {
        ExperimentConfig {
            user_rx: vec![2, 2],
            n_tx: 4,
            precoders: vec![PrecoderKind::GziZf, PrecoderKind::LrGziZf],
            ebno_db: vec![5.0, 10.0],
            trials: 40,
            packet_len: 5,
            seed: 3,
            output_path: path.to_string(),
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn parse_and_validate_roundtrip() {
        let text = "
            # layout
            n_tx = 8
            user_rx = 2,2,2,2
            sweep = BER
            precoders = RBD, LR-S-GMI-MMSE
            ebno_db = 0, 5, 10
            trials = 100
            packet_len = 10
            seed = 42
            output_path = out.csv
        ";
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.n_tx, 8);
        assert_eq!(cfg.precoders, vec![PrecoderKind::Rbd, PrecoderKind::LrSgmiMmse]);
        assert_eq!(cfg.ebno_db, vec![0.0, 5.0, 10.0]);
        assert_eq!(cfg.seed, 42);
    }

    #[test]
    fn parse_rejects_unknown_keys_and_bad_values() {
        assert!(matches!(
            ExperimentConfig::parse("nonsense = 1"),
            Err(HarnessError::ConfigInvalid(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("trials = -2"),
            Err(HarnessError::ConfigInvalid(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("precoders = QR-RBD"),
            Err(HarnessError::ConfigInvalid(_))
        ));
    }

    #[test]
    fn validation_catches_sweep_requirements() {
        let mut cfg = ExperimentConfig::default();
        cfg.sweep = SweepKind::CsiSweep;
        cfg.ebno_db = vec![5.0, 10.0];
        assert!(cfg.validate().is_err());
        cfg.ebno_db = vec![15.0];
        assert!(cfg.validate().is_ok());

        let mut cfg = ExperimentConfig::default();
        cfg.sweep = SweepKind::Flops;
        cfg.precoders = vec![PrecoderKind::Bd];
        assert!(cfg.validate().is_err());
        cfg.precoders = vec![PrecoderKind::Rbd];
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn fmt_g10_is_ten_significant_digits() {
        assert_eq!(fmt_g10(0.12649110640673518), "1.264911064e-1");
        assert_eq!(fmt_g10(1.0), "1.000000000e0");
        assert_eq!(fmt_g10(0.0), "0.000000000e0");
    }

    #[test]
    fn csv_columns_fixed_at_eleven() {
        let r = ExperimentResult {
            precoder: "RBD".into(),
            sweep: SweepKind::Ber,
            param: None,
            ebno_db: Some(5.0),
            ber: Some(0.25),
            bit_errors: Some(10),
            bits: Some(40),
            sum_rate_bits: None,
            flops_total: None,
            seed: 1,
            trials: 1,
            ber_stderr: None,
        };
        let line = csv_line(&r, false);
        assert_eq!(line.split(',').count(), 11);
        assert_eq!(CSV_HEADER.split(',').count(), 11);
        let with_err = csv_line(&r, true);
        assert_eq!(with_err.split(',').count(), 12);
    }

    #[test]
    fn csv_roundtrips_through_parser() {
        let dir = std::env::temp_dir().join("mimo_precode_csv_roundtrip");
        let _ = std::fs::remove_dir_all(&dir);
        let path = dir.join("row.csv");
        let path = path.to_str().unwrap();
        let r = ExperimentResult {
            precoder: "S-GMI".into(),
            sweep: SweepKind::Ber,
            param: None,
            ebno_db: Some(7.5),
            ber: Some(0.012345678901),
            bit_errors: Some(321),
            bits: Some(26000),
            sum_rate_bits: None,
            flops_total: None,
            seed: 9,
            trials: 13,
            ber_stderr: None,
        };
        write_csv(&[r.clone()], path, false).unwrap();
        let back = load_existing(path, false).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0].precoder, r.precoder);
        assert_eq!(back[0].bit_errors, r.bit_errors);
        assert_eq!(back[0].dedupe_key(), r.dedupe_key());
    }

    #[test]
    fn sort_order_matches_comparison_oracle() {
        let mk = |p: &str, param: Option<f64>, ebno: Option<f64>| ExperimentResult {
            precoder: p.into(),
            sweep: SweepKind::Ber,
            param,
            ebno_db: ebno,
            ber: None,
            bit_errors: None,
            bits: None,
            sum_rate_bits: None,
            flops_total: None,
            seed: 0,
            trials: 0,
            ber_stderr: None,
        };
        let mut rows = vec![
            mk("S-GMI", None, Some(10.0)),
            mk("BD", Some(2.0), Some(0.0)),
            mk("BD", Some(1.0), Some(5.0)),
            mk("BD", Some(1.0), Some(0.0)),
            mk("RBD", None, Some(0.0)),
        ];
        rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        let order: Vec<(String, Option<f64>, Option<f64>)> = rows
            .iter()
            .map(|r| (r.precoder.clone(), r.param, r.ebno_db))
            .collect();
        // Oracle: lexicographic on the tuple with None first.
        let mut oracle = order.clone();
        oracle.sort_by(|a, b| {
            (a.0.clone(), a.1.unwrap_or(f64::NEG_INFINITY), a.2.unwrap_or(f64::NEG_INFINITY))
                .partial_cmp(&(
                    b.0.clone(),
                    b.1.unwrap_or(f64::NEG_INFINITY),
                    b.2.unwrap_or(f64::NEG_INFINITY),
                ))
                .unwrap()
        });
        assert_eq!(order, oracle);
    }

    #[test]
    fn rerun_with_same_seed_is_byte_identical_and_resumable() {
        let dir = std::env::temp_dir().join("mimo_precode_rerun");
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ber.csv");
        let cfg = tiny_ber_cfg(path.to_str().unwrap());

        run_experiment(&cfg).unwrap();
        let first = std::fs::read(&path).unwrap();

        // Recompute from scratch.
        std::fs::remove_file(&path).unwrap();
        run_experiment(&cfg).unwrap();
        let second = std::fs::read(&path).unwrap();
        assert_eq!(first, second, "fresh rerun not byte-identical");

        // Resume: nothing recomputed, file unchanged.
        run_experiment(&cfg).unwrap();
        let third = std::fs::read(&path).unwrap();
        assert_eq!(first, third, "resumed rerun not byte-identical");
    }

    #[test]
    fn resume_adds_only_missing_points() {
        let dir = std::env::temp_dir().join("mimo_precode_resume");
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ber.csv");

        let mut cfg = tiny_ber_cfg(path.to_str().unwrap());
        cfg.ebno_db = vec![5.0];
        run_experiment(&cfg).unwrap();
        let partial = load_existing(path.to_str().unwrap(), false).unwrap();
        assert_eq!(partial.len(), 2);

        cfg.ebno_db = vec![5.0, 10.0];
        let all = run_experiment(&cfg).unwrap();
        assert_eq!(all.len(), 4);
        // The 5 dB rows must be identical to the first run's.
        let merged = load_existing(path.to_str().unwrap(), false).unwrap();
        for p in &partial {
            assert!(merged.iter().any(|r| r == p), "resumed row changed: {p:?}");
        }
    }

    #[test]
    fn ber_points_have_consistent_bit_accounting() {
        let dir = std::env::temp_dir().join("mimo_precode_bits");
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("b.csv");
        let mut cfg = tiny_ber_cfg(path.to_str().unwrap());
        cfg.ebno_db = vec![8.0];
        let results = run_experiment(&cfg).unwrap();
        for r in &results {
            let bits = r.bits.unwrap();
            assert_eq!(bits, cfg.trials * cfg.packet_len * 4 * 2);
            assert!((r.ber.unwrap() - r.bit_errors.unwrap() as f64 / bits as f64).abs() < 1e-15);
        }
    }

    #[test]
    fn condpdf_rows_fit_schema() {
        let dir = std::env::temp_dir().join("mimo_precode_condpdf");
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("cond.csv");
        let cfg = ExperimentConfig {
            sweep: SweepKind::CondPdf,
            trials: 25,
            output_path: path.to_str().unwrap().to_string(),
            ..ExperimentConfig::default()
        };
        let rows = run_experiment(&cfg).unwrap();
        assert_eq!(rows.len(), 50);
        assert!(rows.iter().all(|r| r.param.is_some()));
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(CSV_HEADER));
    }
}
