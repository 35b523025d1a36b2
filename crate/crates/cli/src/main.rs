//! `lpconc`: rates, Monte Carlo sweeps, anti-concentration searches,
//! embedding tables and tabular-data diagnostics from the command line.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Parser, Serialize)]
#[command(name = "lpconc", version, about = "Concentration and anti-concentration of fractional l^p quasi-norms")]
pub struct Cli {
    /// Worker threads; defaults to the number of available cores.
    #[arg(long, global = true, env = "LPCONC_WORKERS")]
    pub workers: Option<usize>,
    /// Output file; standard output when absent.
    #[arg(long, short, global = true)]
    pub out: Option<PathBuf>,
    /// Output format. `rates` defaults to csv, every other command to json.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum McNorm {
    /// Component-law `μ_p`.
    Analytic,
    /// Pooled sample mean of `|x|^p`.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataNorm {
    Pooled,
    PerColumn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PStarMethod {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Missing {
    /// Drop rows with missing cells.
    Reject,
    /// Replace missing cells with the column mean.
    Mean,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Rate functions Λ± over (p, δ) grids.
    Rates(RatesArgs),
    /// Monte Carlo concentration frequency over (p, n) grids.
    Curve(CurveArgs),
    /// Relative contrast between pairs of random vectors.
    Contrast(ContrastArgs),
    /// Largest p whose concentration probability is at most Δ.
    Pstar(PStarArgs),
    /// Concentration and contrast tables for synthetic embeddings.
    Embedsim(EmbedArgs),
    /// Ingest a CSV file and report its concentration curve.
    Diagnose(DiagnoseArgs),
    /// Zero-impute a dataset and compare it with the original.
    Perturb(PerturbArgs),
    /// Check the modelling assumptions for a distribution.
    Validate(ValidateArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct RatesArgs {
    /// Component law, e.g. `uniform:b=1`, `twopoint:a=0.5,r=1`, `normal`.
    #[arg(long)]
    pub dist: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub delta: Vec<f64>,
    /// Add small-p closed forms and the φ(p)δ² approximation where available.
    #[arg(long)]
    pub closed_form: bool,
    /// Add the uniform-in-p rates f*±(δ).
    #[arg(long)]
    pub uniform: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct CurveArgs {
    #[arg(long)]
    pub dist: String,
    /// Exponents; 30 log-spaced values on [0.001, 10] when absent.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    /// Dimensions; 10,30,100,300,1000,3000 when absent.
    #[arg(long, value_delimiter = ',')]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Monte Carlo sample count per cell.
    #[serde(rename = "M")]
    #[arg(long = "M", default_value_t = 10_000)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = McNorm::Analytic)]
    pub normalization: McNorm,
}

#[derive(Debug, Args, Serialize)]
pub struct ContrastArgs {
    #[arg(long)]
    pub dist: String,
    #[arg(long, value_delimiter = ',', required = true)]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Number of vector pairs per cell.
    #[serde(rename = "M")]
    #[arg(long = "M", default_value_t = 10_000)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = McNorm::Analytic)]
    pub normalization: McNorm,
}

#[derive(Debug, Args, Serialize)]
pub struct PStarArgs {
    #[arg(long)]
    pub dist: String,
    #[arg(long)]
    pub n: u64,
    #[arg(long)]
    pub delta: f64,
    /// Target concentration probability Δ.
    #[serde(rename = "Delta")]
    #[arg(long = "Delta")]
    pub target: f64,
    /// Exact binomial path or Monte Carlo; chosen from the law when absent.
    #[arg(long, value_enum)]
    pub method: Option<PStarMethod>,
    #[arg(long, default_value_t = lpconc::anti_concentration::DEFAULT_MC_SAMPLES)]
    pub mc_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Berry-Esseen constant in [0.4097, 0.56].
    #[arg(long = "C", default_value_t = lpconc::anti_concentration::BERRY_ESSEEN_C_MAX)]
    pub c_const: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct EmbedArgs {
    /// Embedding kinds among dense, sparse, relu, binary.
    #[arg(long, value_delimiter = ',', default_value = "dense,sparse,relu,binary")]
    pub kinds: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,0.5,1,2,10")]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    /// Vectors per kind; the contrast table uses M/2 disjoint pairs.
    #[serde(rename = "M")]
    #[arg(long = "M", default_value_t = 5000)]
    pub m: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct DataArgs {
    /// Input CSV with a header row.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Use an M×n uniform [0,1] matrix instead of a file, e.g. `500x30`.
    #[arg(long, conflicts_with = "input")]
    pub synthetic: Option<String>,
    /// Seed for the synthetic matrix.
    #[arg(long, default_value_t = 0)]
    pub data_seed: u64,
    /// Extra cell values treated as missing, on top of "", NA, NaN, nan, ?.
    #[arg(long, value_delimiter = ',')]
    pub missing_marker: Vec<String>,
    #[arg(long, value_enum, default_value_t = Missing::Reject)]
    pub missing: Missing,
    /// Remove constant columns.
    #[arg(long)]
    pub drop_constant: bool,
    /// Centre and scale every column.
    #[arg(long)]
    pub standardize: bool,
    /// Re-centre columns with fewer than this many distinct values at their mode.
    #[arg(long)]
    pub mode_shift: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Exponents; 30 log-spaced values on [0.001, 10] when absent.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = DataNorm::Pooled)]
    pub normalization: DataNorm,
}

#[derive(Debug, Args, Serialize)]
pub struct PerturbArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Zero-imputation probabilities.
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.02,0.03,0.04,0.05,0.06,0.07,0.08,0.09,0.1")]
    pub gap: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, value_enum, default_value_t = DataNorm::Pooled)]
    pub normalization: DataNorm,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dist: String,
    /// Exponents at which to report moments.
    #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
    pub p: Vec<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Some(w) = cli.workers {
        if w == 0 {
            eprintln!("error: --workers must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(w).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
