//! Command-line driver: classify, quadrature, simulate, analyze,
//! corrector-scan, and the full report pipeline.
//!
//! Exit codes: 0 success, 1 internal error, 2 out-of-scope parameters,
//! 3 config parse failure.

mod config;
mod pipeline;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use driftflow::theory;
use driftflow::Regime;

use config::ExperimentConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    OutOfScope(String),
    Internal(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 3,
            CliError::OutOfScope(_) => 2,
            CliError::Internal(_) => 1,
        }
    }

    fn from_io(e: std::io::Error) -> Self {
        CliError::Internal(format!("i/o error: {e}"))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::OutOfScope(m) => write!(f, "out-of-scope parameters: {m}"),
            CliError::Internal(m) => write!(f, "{m}"),
        }
    }
}

impl From<driftflow::Error> for CliError {
    fn from(e: driftflow::Error) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::from_io(e)
    }
}

#[derive(Parser)]
#[command(
    name = "driftflow",
    about = "Tracer transport in a Markovian Gaussian random flow with mean drift",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Quantity {
    TaylorKubo,
    FbmCovariance,
    CorrectorVariance,
    CorrectorGradientVariance,
}

#[derive(Subcommand)]
enum Command {
    /// Classify the (alpha, beta) point into its scaling regime.
    Classify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value = "text")]
        format: OutputFormat,
    },
    /// Evaluate one of the closed-form spectral integrals.
    Quadrature {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        quantity: Quantity,
        /// Regularizer for the Taylor-Kubo integral.
        #[arg(long, default_value_t = 0.0)]
        eps: f64,
        /// Resolvent parameter for the corrector integrals.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, default_value_t = 1e-5)]
        tol: f64,
    },
    /// Run the trajectory ensemble and write msd.csv.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the scaling exponent of an existing msd.csv.
    Analyze {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scan the corrector integrals over descending lambda values.
    CorrectorScan {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated descending list, e.g. "1e-1,1e-2,1e-3".
        #[arg(long)]
        lambdas: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pipeline: classify, quadrature, simulate, analyze, summary.json.
    Report {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    workers: Option<usize>,
) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.field.seed = s;
    }
    if let Some(w) = workers {
        cfg.ensemble.workers = w;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Classify { config, format } => {
            let cfg = ExperimentConfig::load(&config)?;
            let report = cfg
                .spectrum
                .classify()
                .map_err(|e| CliError::OutOfScope(e.to_string()))?;
            match format {
                OutputFormat::Json => {
                    println!("{}", serde_json::to_string_pretty(&report).unwrap());
                }
                OutputFormat::Text => {
                    match report.regime {
                        Regime::Diffusive => println!("regime: Diffusive"),
                        Regime::FractionalBm => println!(
                            "regime: FractionalBM delta={} H={}",
                            report.delta.unwrap(),
                            report.hurst.unwrap()
                        ),
                        Regime::OutOfScope => println!("regime: OutOfScope"),
                    }
                    println!("reason: {}", report.reason);
                }
            }
            if report.regime == Regime::OutOfScope {
                return Err(CliError::OutOfScope(report.reason));
            }
            Ok(())
        }
        Command::Quadrature { config, quantity, eps, lambda, tol } => {
            let cfg = ExperimentConfig::load(&config)?;
            let params = &cfg.spectrum;
            let record = match quantity {
                Quantity::TaylorKubo => {
                    let d = theory::taylor_kubo(params, eps, tol);
                    quad_record(params, "taylor_kubo", d.value.to_rows(), d.error_estimate.to_rows(), d.converged, d.divergence_suspected, d.evaluations)
                }
                Quantity::FbmCovariance => {
                    let d = theory::fbm_covariance(params, tol)?;
                    quad_record(params, "fbm_covariance", d.value.to_rows(), d.error_estimate.to_rows(), d.converged, d.divergence_suspected, d.evaluations)
                }
                Quantity::CorrectorVariance => {
                    let l = lambda.ok_or_else(|| {
                        CliError::Config("--lambda is required for corrector quantities".into())
                    })?;
                    let d = theory::corrector_variance(params, l, tol);
                    quad_record(params, "corrector_variance", d.value, d.error_estimate, d.converged, d.divergence_suspected, d.evaluations)
                }
                Quantity::CorrectorGradientVariance => {
                    let l = lambda.ok_or_else(|| {
                        CliError::Config("--lambda is required for corrector quantities".into())
                    })?;
                    let d = theory::corrector_gradient_variance(params, l, tol);
                    quad_record(params, "corrector_gradient_variance", d.value, d.error_estimate, d.converged, d.divergence_suspected, d.evaluations)
                }
            };
            println!("{}", serde_json::to_string_pretty(&record).unwrap());
            Ok(())
        }
        Command::Simulate { config, seed, workers, out } => {
            let cfg = load_config(&config, seed, workers)?;
            let dir = pipeline::resolve_out_dir(&cfg, out.as_deref());
            pipeline::simulate(&cfg, &dir)
        }
        Command::Analyze { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let dir = pipeline::resolve_out_dir(&cfg, out.as_deref());
            let result = pipeline::analyze(&cfg, &dir)?;
            println!("{}", serde_json::to_string_pretty(&result).unwrap());
            Ok(())
        }
        Command::CorrectorScan { config, lambdas, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let values: Vec<f64> = lambdas
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<f64>()
                        .map_err(|e| CliError::Config(format!("bad lambda {s:?}: {e}")))
                })
                .collect::<Result<_, _>>()?;
            match out {
                Some(path) => {
                    let mut f = std::fs::File::create(path)?;
                    pipeline::corrector_scan(&cfg, &values, &mut f)
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    pipeline::corrector_scan(&cfg, &values, &mut lock)
                }
            }
        }
        Command::Report { config, seed, workers, out } => {
            let cfg = load_config(&config, seed, workers)?;
            let dir = pipeline::resolve_out_dir(&cfg, out.as_deref());
            let summary = pipeline::report(&cfg, &dir)?;
            println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            Ok(())
        }
    }
}

fn quad_record<V: serde::Serialize, E: serde::Serialize>(
    params: &driftflow::SpectrumParams,
    quantity: &str,
    value: V,
    error: E,
    converged: bool,
    divergence_suspected: bool,
    evaluations: u64,
) -> serde_json::Value {
    serde_json::json!({
        "params": params,
        "quantity": quantity,
        "value": value,
        "error": error,
        "converged": converged,
        "divergence_suspected": divergence_suspected,
        "evaluations": evaluations,
    })
}
