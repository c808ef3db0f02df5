//! `convoy`: command-line front end for the convoy engines.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::Format;

#[derive(Debug, Parser)]
#[command(name = "convoy", version, about = "Convoy sizes in the multi-species ASEP speed process")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "CONVOY_THREADS", default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// q-Genocchi numbers B_0(1,q)..B_n(1,q), one coefficient row each.
    Genocchi {
        /// Largest index (at most 40).
        #[arg(long)]
        n: usize,
    },
    /// Expected convoy size E[Q_{n+1} - Q_1] from the exact engines.
    ConvoyExact(ExactArgs),
    /// Monte Carlo of the coupled queue.
    ConvoyMc(McArgs),
    /// Spectral (Karlin-McGregor) transition probabilities against matrix powers.
    KmVerify(KmArgs),
    /// Monte Carlo means of #C/sqrt(n) across several q.
    Universality(UniArgs),
    /// Weakly asymmetric limit densities and the expected gap.
    WeakLimit(WeakArgs),
    /// Second-class particle speeds from the ASEP simulator.
    AsepDemo(AsepArgs),
    /// Fast exact-identity checks; exits 1 on any failure.
    Selftest,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[arg(long)]
    pub n: usize,
    /// Asymmetry in [0,1); "p/q" selects exact arithmetic.
    #[arg(long)]
    pub q: String,
    /// Speed coordinate in (0,1); "p/q" selects exact arithmetic.
    #[arg(long)]
    pub x: String,
    #[arg(long, value_enum, default_value_t = MethodArg::Both)]
    pub method: MethodArg,
    /// Force exact rational arithmetic.
    #[arg(long)]
    pub exact: bool,
    /// Relative agreement tolerance for `--method both` in floating mode.
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Dp,
    Genocchi,
    Tasep,
    Both,
}

#[derive(Debug, Args)]
pub struct McArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub q: f64,
    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
    #[arg(long, default_value_t = 1000)]
    pub reps: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct KmArgs {
    #[arg(long)]
    pub q: f64,
    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
    /// Largest number of steps.
    #[arg(long, default_value_t = 20)]
    pub n: usize,
    /// Largest start and end level.
    #[arg(long, default_value_t = 8)]
    pub imax: usize,
    /// Allowed absolute disagreement.
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct UniArgs {
    /// Comma-separated asymmetries.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.0, 0.5, 0.9])]
    pub q: Vec<f64>,
    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    #[arg(long, default_value_t = 10_000)]
    pub reps: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DensityKind {
    /// Limiting law of X.
    X,
    /// Limiting law of Y.
    Y,
    /// Joint density f(at, y) as a function of y.
    Joint,
    /// Expected gap E[Y - X] only.
    Gap,
}

#[derive(Debug, Args)]
pub struct WeakArgs {
    #[arg(long)]
    pub gamma: f64,
    /// Speed coordinate; the diffusivity is c = x(1-x).
    #[arg(long, default_value_t = 0.5)]
    pub x: f64,
    #[arg(long, value_enum, default_value_t = DensityKind::X)]
    pub density: DensityKind,
    /// First coordinate for `--density joint`.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub at: f64,
    #[arg(long, default_value_t = -3.0, allow_negative_numbers = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 81)]
    pub points: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args)]
pub struct AsepArgs {
    #[arg(long)]
    pub q: f64,
    /// Ring size.
    #[arg(long, default_value_t = 400)]
    pub n: usize,
    /// Time horizon.
    #[arg(long, default_value_t = 50.0)]
    pub horizon: f64,
    #[arg(long, default_value_t = 200)]
    pub reps: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if cli.common.threads > 0 {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.common.threads).build_global();
    }
    let result = match &cli.command {
        Command::Genocchi { n } => commands::genocchi(*n, &cli.common),
        Command::ConvoyExact(a) => commands::convoy_exact(a, &cli.common),
        Command::ConvoyMc(a) => commands::convoy_mc(a, &cli.common),
        Command::KmVerify(a) => commands::km_verify(a, &cli.common),
        Command::Universality(a) => commands::universality(a, &cli.common),
        Command::WeakLimit(a) => commands::weak_limit(a, &cli.common),
        Command::AsepDemo(a) => commands::asep_demo(a, &cli.common),
        Command::Selftest => commands::selftest(&cli.common),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
