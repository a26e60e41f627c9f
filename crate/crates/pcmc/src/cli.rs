//! The `pcmc` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 optimizer failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use pcmc_core::axioms::{audit, AuditConfig};
use pcmc_core::data::{
    self, derive_seed, gen_bladechest_circle, gen_mnl_simplex, gen_random_q, random_triplets,
};
use pcmc_core::eval::{learning_curve, prediction_error, CurveConfig, FitSpec, MNL_TOL};
use pcmc_core::luce::{default_mmnl_k, fit_mmnl, fit_mnl_smoothed};
use pcmc_core::model::log_likelihood_counts;
use pcmc_core::param::{fit_bladechest, q_from_btl};
use pcmc_core::{pcmc, BladeChestVariant, Error, FitConfig, FittedModel, PcmcModel};

use crate::io::{self, DataError, Format};
use crate::json::{self, FitReportFile, ModelFileError, Num};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_OPTIMIZER: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "pcmc",
    version,
    about = "Pairwise Choice Markov Chain models of discrete choice"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Family {
    Pcmc,
    Mnl,
    Mmnl,
    Bladechest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variant {
    Distance,
    Inner,
}

impl From<Variant> for BladeChestVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Distance => BladeChestVariant::Distance,
            Variant::Inner => BladeChestVariant::Inner,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Regime {
    Randq,
    Mnl,
    Bladechest,
}

#[derive(Debug, clap::Args)]
struct DataArgs {
    /// Dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Dataset format: chosen-set-v1 or sf-matrix.
    #[arg(long, default_value = "chosen-set-v1")]
    format: Format,
}

#[derive(Debug, clap::Args)]
struct FitArgs {
    /// Additive smoothing added to every observed count.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Mixture components (default: smallest k with more parameters than PCMC).
    #[arg(long)]
    k: Option<usize>,
    /// Blade-Chest embedding dimension.
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Blade-Chest pairwise score.
    #[arg(long, value_enum, default_value = "distance")]
    variant: Variant,
    /// Seed for restarts and random splits.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Iteration cap for each optimizer run.
    #[arg(long, default_value_t = 1000)]
    max_iters: usize,
    /// Starts for the mixture and embedding fits.
    #[arg(long, default_value_t = 5)]
    restarts: usize,
}

impl FitArgs {
    fn config(&self) -> FitConfig {
        FitConfig {
            max_iters: self.max_iters,
            smoothing_alpha: self.alpha,
            seed: self.seed,
            restarts: self.restarts,
            ..FitConfig::default()
        }
    }

    fn spec(&self, family: Family) -> FitSpec {
        match family {
            Family::Pcmc => FitSpec::Pcmc,
            Family::Mnl => FitSpec::Mnl,
            Family::Mmnl => FitSpec::Mmnl { k: self.k },
            Family::Bladechest => FitSpec::BladeChest {
                d: self.d,
                variant: self.variant.into(),
            },
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model to a dataset.
    Fit {
        /// Model family to fit.
        #[arg(long, value_enum)]
        model: Family,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        fit: FitArgs,
        /// Model JSON output.
        #[arg(long)]
        out: PathBuf,
        /// Optional fit report JSON output.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a saved model against a dataset.
    Eval {
        /// Model JSON written by `fit`.
        #[arg(long)]
        model_file: PathBuf,
        #[command(flatten)]
        data: DataArgs,
        /// Error report JSON output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Learning curves over random train/test splits.
    Curve {
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated model families.
        #[arg(long, value_delimiter = ',', default_value = "pcmc,mnl,mmnl")]
        models: Vec<Family>,
        /// Comma-separated shares of the training split.
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.4,0.6,0.8,1.0")]
        fractions: Vec<f64>,
        /// Random train/test splits per fraction.
        #[arg(long, default_value_t = 10)]
        permutations: usize,
        /// Share of the data in each training split.
        #[arg(long, default_value_t = 0.75)]
        train_fraction: f64,
        #[command(flatten)]
        fit: FitArgs,
        /// Learning-curve CSV output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a saved model against choice axioms.
    Audit {
        /// Model JSON written by `fit`.
        #[arg(long)]
        model_file: PathBuf,
        /// Copies per item for the uniform-expansion check.
        #[arg(long, default_value_t = 2)]
        expand_k: usize,
        /// Audit report JSON output.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a synthetic dataset.
    Synth {
        /// Generating model family.
        #[arg(long, value_enum)]
        regime: Regime,
        /// Number of alternatives (at least 3).
        #[arg(long)]
        n: usize,
        /// Number of observations to draw.
        #[arg(long)]
        samples: usize,
        /// Master seed for every random draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of random triplets used as choice sets.
        #[arg(long, default_value_t = 25)]
        sets: usize,
        /// Dataset output in chosen-set-v1 format.
        #[arg(long)]
        out: PathBuf,
        /// Optional JSON output of the generating model.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

/// A failure mapped to an exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Optimizer(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Optimizer(_) => EXIT_OPTIMIZER,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::OptimizerFailure { .. } | Error::NoConvergence { .. } => {
                CliError::Optimizer(e.to_string())
            }
            Error::InvalidConfig(_) | Error::InvalidK | Error::NegativeAlpha(_) => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        match e {
            DataError::Model(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn load_model(path: &Path) -> Result<FittedModel, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    json::model_from_json(&text).map_err(|e| match e {
        ModelFileError::Json(_) => CliError::Data(format!("{}: {e}", path.display())),
        ModelFileError::Model(inner) => CliError::Data(format!("{}: {inner}", path.display())),
    })
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    io::write_file(path, contents).map_err(CliError::from)
}

fn fit_report(
    family: Family,
    args: &FitArgs,
    d: &pcmc_core::ChoiceDataset,
) -> Result<FitReportFile, CliError> {
    let cfg = args.config();
    cfg.validate()?;
    Ok(match family {
        Family::Pcmc => FitReportFile::from_report(&pcmc::fit(d, &cfg)?, FittedModel::Pcmc),
        Family::Mmnl => {
            let k = args.k.unwrap_or_else(|| default_mmnl_k(d.n()));
            FitReportFile::from_report(&fit_mmnl(d, k, &cfg)?, FittedModel::Mmnl)
        }
        Family::Bladechest => FitReportFile::from_report(
            &fit_bladechest(d, args.d, args.variant.into(), &cfg)?,
            FittedModel::BladeChest,
        ),
        Family::Mnl => {
            let m = fit_mnl_smoothed(d, MNL_TOL, cfg.smoothing_alpha)?;
            let t = data::smooth(&data::counts(d), cfg.smoothing_alpha)?;
            let loglik = log_likelihood_counts(&m, &t)?;
            FitReportFile {
                params: (&FittedModel::Mnl(m)).into(),
                loglik: Num(loglik),
                initial_loglik: None,
                iterations: None,
                converged: Some(true),
                constraint_violation: Num(0.0),
            }
        }
    })
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit {
            model,
            data,
            fit,
            out,
            report,
        } => {
            let d = io::load(&data.data, data.format)?;
            let r = fit_report(model, &fit, &d)?;
            let m = FittedModel::try_from(r.params.clone())?;
            write(&out, &json::model_to_json(&m))?;
            if let Some(path) = report {
                write(&path, &r.to_json())?;
            }
        }
        Command::Eval {
            model_file,
            data,
            out,
        } => {
            let m = load_model(&model_file)?;
            let d = io::load(&data.data, data.format)?;
            if d.n() > m.n_items() {
                return Err(CliError::Data(format!(
                    "dataset has {} items but the model covers {}",
                    d.n(),
                    m.n_items()
                )));
            }
            let d = pcmc_core::ChoiceDataset::new(m.n_items(), d.observations().to_vec())?;
            write(
                &out,
                &json::error_report_to_json(&prediction_error(&m, &d)?),
            )?;
        }
        Command::Curve {
            data,
            models,
            fractions,
            permutations,
            train_fraction,
            fit,
            out,
        } => {
            if models.is_empty() {
                return Err(CliError::Usage("--models needs at least one family".into()));
            }
            let d = io::load(&data.data, data.format)?;
            let specs: Vec<FitSpec> = models.iter().map(|&f| fit.spec(f)).collect();
            let cfg = CurveConfig {
                fractions,
                permutations,
                seed: fit.seed,
                train_fraction,
                fit: fit.config(),
            };
            let curve = learning_curve(&d, &specs, &cfg)?;
            for (mi, name) in curve.models.iter().enumerate() {
                for (fi, &failed) in curve.failures[mi].iter().enumerate() {
                    if failed > 0 {
                        log::warn!(
                            "{name} at fraction {}: {failed} of {permutations} fits failed",
                            curve.fractions[fi]
                        );
                    }
                }
            }
            write(&out, &json::curve_to_csv(&curve))?;
        }
        Command::Audit {
            model_file,
            expand_k,
            out,
        } => {
            let m = load_model(&model_file)?;
            let q = match &m {
                FittedModel::Pcmc(p) => Some(p.q().clone()),
                FittedModel::Mnl(g) => Some(q_from_btl(g.gamma())?),
                FittedModel::BladeChest(b) => Some(b.rate_matrix()),
                FittedModel::Mmnl(_) => None,
            };
            let cfg = AuditConfig {
                expand_k,
                ..AuditConfig::default()
            };
            let report = audit(&m, q.as_ref(), &cfg)?;
            write(&out, &json::audit_to_json(m.family(), &report))?;
        }
        Command::Synth {
            regime,
            n,
            samples,
            seed,
            sets,
            out,
            truth,
        } => {
            if n < 3 {
                return Err(CliError::Usage("--n must be at least 3".into()));
            }
            if samples == 0 {
                return Err(CliError::Usage("--samples must be at least 1".into()));
            }
            let model = match regime {
                Regime::Randq => {
                    let r = gen_random_q(n, seed);
                    log::info!(
                        "rescaled {} pairs to satisfy q_ij + q_ji >= 1",
                        r.repaired_pairs
                    );
                    FittedModel::Pcmc(PcmcModel::new(r.q)?)
                }
                Regime::Mnl => FittedModel::Mnl(gen_mnl_simplex(n, seed)),
                Regime::Bladechest => FittedModel::BladeChest(gen_bladechest_circle(n, seed)),
            };
            let choice_sets = random_triplets(n, sets.max(1), derive_seed(seed, 1));
            let d = data::sample(&model, &choice_sets, samples, derive_seed(seed, 2))?;
            io::save(&d, &out)?;
            if let Some(path) = truth {
                write(&path, &json::model_to_json(&model))?;
            }
        }
    }
    Ok(())
}

use pcmc_core::ChoiceModel as _;

/// Parses arguments, runs the command, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    match execute(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
