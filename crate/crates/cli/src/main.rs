//! Command-line driver: runs the sweeps described by a flat config file,
//! with flag overrides winning over file values.
//!
//! Exit codes: 0 on success, 2 on configuration errors, 3 on I/O errors.

use clap::{Args, Parser, Subcommand};
use mimo_precode::harness::{run_experiment, ExperimentConfig, HarnessError, SweepKind};
use mimo_precode::metrics::CondPdfSamples;

#[derive(Parser)]
#[command(
    name = "mimo-precode",
    version,
    about = "Multiuser-MIMO downlink precoding simulator (BD / RBD / S-GMI / lattice-aided)"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep configured in the file (BER, SUMRATE, CSI_SWEEP, ...).
    Simulate {
        /// Path to a flat `key = value` experiment config.
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate the closed-form complexity models over a dimension grid.
    Flops {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Sample condition-number PDFs of effective channels before and after
    /// lattice reduction.
    Condpdf {
        config: String,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    /// Precoder tags, comma separated (e.g. RBD,S-GMI,LR-S-GMI-MMSE).
    #[arg(long = "precoder", value_delimiter = ',')]
    precoder: Vec<String>,
    /// Eb/N0 grid in dB, comma separated.
    #[arg(long = "ebno", value_delimiter = ',', allow_hyphen_values = true)]
    ebno: Vec<f64>,
    /// Monte Carlo trials per sweep point.
    #[arg(long)]
    trials: Option<u64>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Sweep kind (BER | SUMRATE | CONDPDF | FLOPS | CSI_SWEEP).
    #[arg(long)]
    sweep: Option<String>,
    /// Output CSV path.
    #[arg(long)]
    out: Option<String>,
    /// Append the binomial standard-error column.
    #[arg(long)]
    errbars: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<(), HarnessError> {
        if !self.precoder.is_empty() {
            cfg.precoders = self
                .precoder
                .iter()
                .map(|s| s.parse())
                .collect::<Result<_, String>>()
                .map_err(HarnessError::ConfigInvalid)?;
        }
        if !self.ebno.is_empty() {
            cfg.ebno_db = self.ebno.clone();
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(sweep) = &self.sweep {
            cfg.sweep = sweep.parse().map_err(HarnessError::ConfigInvalid)?;
        }
        if let Some(out) = &self.out {
            cfg.output_path = out.clone();
        }
        if self.errbars {
            cfg.errbars = true;
        }
        Ok(())
    }
}

fn main() {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                HarnessError::ConfigInvalid(_) => 2,
                HarnessError::Io { .. } => 3,
                HarnessError::Internal(_) => 1,
            }
        }
    };
    std::process::exit(code);
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let (path, overrides, forced) = match cli.command {
        Command::Simulate { config, overrides } => (config, overrides, None),
        Command::Flops { config, overrides } => (config, overrides, Some(SweepKind::Flops)),
        Command::Condpdf { config, overrides } => (config, overrides, Some(SweepKind::CondPdf)),
    };
    let mut cfg = ExperimentConfig::load(&path)?;
    if let Some(sweep) = forced {
        cfg.sweep = sweep;
    }
    overrides.apply(&mut cfg)?;
    cfg.validate()?;

    let results = run_experiment(&cfg)?;
    match cfg.sweep {
        SweepKind::CondPdf => {
            for set in ["UNREDUCED", "REDUCED"] {
                let values: Vec<f64> = results
                    .iter()
                    .filter(|r| r.precoder == set)
                    .filter_map(|r| r.param)
                    .collect();
                if !values.is_empty() {
                    println!(
                        "{set:>10}: {} samples, mean ln-cond {:.4}, std {:.4}",
                        values.len(),
                        CondPdfSamples::mean(&values),
                        CondPdfSamples::std(&values)
                    );
                }
            }
        }
        _ => {
            for r in &results {
                let mut line = format!("{:>14} {}", r.precoder, r.sweep);
                if let Some(p) = r.param {
                    line.push_str(&format!(" param={p}"));
                }
                if let Some(e) = r.ebno_db {
                    line.push_str(&format!(" ebno={e}dB"));
                }
                if let Some(b) = r.ber {
                    line.push_str(&format!(" ber={b:.3e}"));
                }
                if let Some(c) = r.sum_rate_bits {
                    line.push_str(&format!(" rate={c:.3} bits"));
                }
                if let Some(f) = r.flops_total {
                    line.push_str(&format!(" flops={f:.2}"));
                }
                println!("{line}");
            }
        }
    }
    println!("wrote {} rows to {}", results.len(), cfg.output_path);
    Ok(())
}
