//! Command-line front end: argument parsing, model files, run artifacts.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;
pub mod plot;

use std::path::PathBuf;

use blocktoep::limitsets::Region;
use blocktoep::{Parallelism, C64};
use clap::{Args, Parser, Subcommand};

use crate::error::CliError;
use crate::plot::Format;

#[derive(Debug, Parser)]
#[command(
    name = "blocktoep",
    version,
    about = "Limit spectra of block tridiagonal Toeplitz operators with corner perturbations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output directory for payloads and manifest.json.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Size of the worker pool; 1 runs everything sequentially.
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Root seed for randomized steps; overrides the model file.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Grid scan and arc extraction of the limiting set, plus outliers.
    LimitSpectrum(LimitArgs),
    /// Eigenvalues of the finite operator H_N.
    FiniteSpectrum(FiniteArgs),
    /// Compares det(H_N - E) with the closed-form and Widom-sum evaluations.
    VerifyWidom(VerifyArgs),
    /// Ratios of q_I to their large-|E| leading terms.
    AsymptoticsCheck(AsymptoticsArgs),
    /// Nonvanishing of leading coefficients over random models.
    Genericity(GenericityArgs),
    /// Point series for plotting finite spectra against the limit sets.
    PlotData(PlotArgs),
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Model file (JSON).
    #[arg(long)]
    pub config: PathBuf,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Rank parameter r of Sigma_r and Lambda_r; defaults to rank A.
    #[arg(long)]
    pub r: Option<usize>,

    /// Grid nodes as NX,NY.
    #[arg(long, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,

    /// Scan window as re_min,re_max,im_min,im_max.
    #[arg(long, value_parser = parse_region, allow_hyphen_values = true)]
    pub region: Option<Region>,
}

#[derive(Debug, Args)]
pub struct LimitArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Dense,
    Fft,
    Widom,
}

#[derive(Debug, Args)]
pub struct FiniteArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of blocks; defaults to N in the model file.
    #[arg(long = "N")]
    pub n: Option<usize>,
    #[arg(long, value_enum, default_value_t = Method::Dense)]
    pub method: Method,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Energy as re,im.
    #[arg(long = "E", value_parser = parse_complex, allow_hyphen_values = true)]
    pub e: C64,
}

#[derive(Debug, Args)]
pub struct AsymptoticsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Energy as re,im; defaults to 1e4 * exp(0.7i).
    #[arg(long = "E", value_parser = parse_complex, allow_hyphen_values = true)]
    pub e: Option<C64>,
    /// Adds eps times a seeded Gaussian matrix to R and T first.
    #[arg(long)]
    pub perturb: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenericityArgs {
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    /// Block size of the random models.
    #[arg(long = "L", default_value_t = 2)]
    pub l: usize,
    /// Rank of A in the random models; defaults to L.
    #[arg(long)]
    pub r: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Finite sizes to include, comma separated.
    #[arg(long = "N", value_delimiter = ',')]
    pub n: Vec<usize>,
    #[command(flatten)]
    pub grid: GridArgs,
}

fn split_numbers(s: &str, count: usize) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != count {
        return Err(format!(
            "expected {count} comma-separated numbers, got `{s}`"
        ));
    }
    parts
        .iter()
        .map(|p| {
            p.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{p}` is not a finite number"))
        })
        .collect()
}

pub fn parse_complex(s: &str) -> Result<C64, String> {
    if !s.contains(',') {
        return split_numbers(s, 1).map(|v| C64::new(v[0], 0.0));
    }
    split_numbers(s, 2).map(|v| C64::new(v[0], v[1]))
}

pub fn parse_grid(s: &str) -> Result<(usize, usize), String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [x, y] => {
            let n = |p: &str| {
                p.parse::<usize>()
                    .map_err(|_| format!("`{p}` is not a grid size"))
            };
            Ok((n(x)?, n(y)?))
        }
        _ => Err(format!("expected NX,NY, got `{s}`")),
    }
}

pub fn parse_region(s: &str) -> Result<Region, String> {
    let v = split_numbers(s, 4)?;
    Region::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

/// Global settings shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Context {
    pub out: PathBuf,
    pub format: Format,
    pub mode: Parallelism,
    pub seed: Option<u64>,
    pub argv: Vec<String>,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv: Vec<String> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let mode = match cli.workers {
        Some(0) => {
            eprintln!("error: --workers must be at least 1");
            return 1;
        }
        Some(1) => Parallelism::Sequential,
        _ => Parallelism::Parallel,
    };
    let ctx = Context {
        out: cli.out.clone(),
        format: cli.format,
        mode,
        seed: cli.seed,
        argv: argv.iter().skip(1).cloned().collect(),
    };
    let result = match cli.workers {
        Some(w) if w > 1 => match rayon::ThreadPoolBuilder::new().num_threads(w).build() {
            Ok(pool) => pool.install(|| commands::dispatch(&cli.command, &ctx)),
            Err(e) => Err(CliError::BadConfig(format!("cannot start {w} workers: {e}")).into()),
        },
        _ => commands::dispatch(&cli.command, &ctx),
    };
    match result {
        Ok(outcome) => {
            for line in &outcome.lines {
                println!("{line}");
            }
            0
        }
        Err(failure) => {
            for line in &failure.lines {
                println!("{line}");
            }
            eprintln!("error: {}", failure.error);
            let code = failure.error.exit_code();
            if code == 2 {
                match commands::write_error_report(&ctx, &cli.command, &failure.error) {
                    Ok(path) => eprintln!("report written to {}", path.display()),
                    Err(e) => eprintln!("could not write the error report: {e}"),
                }
            }
            code
        }
    }
}
