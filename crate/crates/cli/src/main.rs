//! `tracesum`: batch verification suites and scans over trace-function sums.

mod commands;
mod manifest;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tracesum_core::modarith::is_prime;
use tracesum_core::sums::{Coefficient, XRule};
use tracesum_core::tracefn::TraceVariant;

#[derive(Debug, Parser)]
#[command(name = "tracesum", version, about = "Exact identities and empirical bounds for sums of trace functions")]
struct Cli {
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; all cores when omitted.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized inputs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Unitary DFT of a trace function.
    Dft(DftArgs),
    /// |S_V(K, X)| against the theorem bound across moduli.
    SumScan(SumScanArgs),
    /// Random bilinear forms against the spectral bound.
    BilinearCheck(BilinearArgs),
    /// The F/O split of the amplified sum.
    AmplifierCheck(AmplifierArgs),
    /// Audit of the complete character-sum bounds on a grid.
    LemmaCheck(LemmaArgs),
    /// tau(n), lambda(n) and lambda(1, n).
    HeckeTable(HeckeArgs),
    /// Both sides of Poisson summation for a smoothed sum.
    PoissonCheck(PoissonArgs),
    /// Sup-norms and second moments of hyper-Kloosterman sums.
    KlStats(KlStatsArgs),
}

#[derive(Debug, Args, Serialize)]
struct DftArgs {
    #[arg(long, value_parser = trace_arg)]
    trace: String,
    #[arg(long, value_parser = prime_arg)]
    q: u64,
    /// Emit the inverse transform instead.
    #[arg(long)]
    inverse: bool,
}

#[derive(Debug, Args, Serialize)]
struct SumScanArgs {
    #[arg(long, value_parser = trace_arg)]
    trace: String,
    /// Comma-separated primes.
    #[arg(long = "q-list", value_delimiter = ',', required = true, value_parser = prime_arg)]
    q_list: Vec<u64>,
    /// `1000`, `q^1.5` or `2*q^1.5`.
    #[arg(long = "x-rule", default_value = "q^1.5", value_parser = x_rule_arg)]
    x_rule: String,
    #[arg(long, default_value_t = 2.0)]
    z: f64,
    /// `gl3`, `gl2-square-arg`, `gl2-squared` or `unit`.
    #[arg(long, default_value = "gl3", value_parser = coeff_arg)]
    coeff: String,
}

#[derive(Debug, Args, Serialize)]
struct BilinearArgs {
    #[arg(long, value_parser = prime_arg)]
    q: u64,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    /// Kernel; a random table when omitted.
    #[arg(long, value_parser = trace_arg)]
    trace: Option<String>,
}

#[derive(Debug, Args, Serialize)]
struct AmplifierArgs {
    #[arg(long, value_parser = prime_arg)]
    q: u64,
    #[arg(long = "X", default_value = "q^1.5", value_parser = x_rule_arg)]
    #[serde(rename = "X")]
    x: String,
    #[arg(long = "P")]
    #[serde(rename = "P")]
    p: u64,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    l: u64,
    #[arg(long, value_parser = trace_arg)]
    trace: String,
    #[arg(long, default_value_t = tracesum_core::amplifier::DECOMPOSITION_TOL)]
    tol: f64,
    #[arg(long, default_value_t = 2.0)]
    z: f64,
}

#[derive(Debug, Args, Serialize)]
struct LemmaArgs {
    #[arg(long = "r-max", default_value_t = 12)]
    r_max: u64,
    #[arg(long = "q", value_delimiter = ',', default_values_t = [17u64, 101], value_parser = prime_arg)]
    q: Vec<u64>,
    #[arg(long = "l-list", value_delimiter = ',', default_values_t = [3u64, 7, 11])]
    l_list: Vec<u64>,
    #[arg(long = "p-list", value_delimiter = ',', default_values_t = [5u64, 13])]
    p_list: Vec<u64>,
    #[arg(long = "n-max", default_value_t = 12)]
    n_max: i64,
}

#[derive(Debug, Args, Serialize)]
struct HeckeArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..=tracesum_core::heckecoef::TAU_LIMIT as u64))]
    limit: u64,
}

#[derive(Debug, Args, Serialize)]
struct PoissonArgs {
    #[arg(long, value_parser = trace_arg)]
    trace: String,
    #[arg(long, value_parser = prime_arg)]
    q: u64,
    #[arg(long = "X", default_value = "q^1.5", value_parser = x_rule_arg)]
    #[serde(rename = "X")]
    x: String,
    #[arg(long, default_value_t = 2.0)]
    z: f64,
}

#[derive(Debug, Args, Serialize)]
struct KlStatsArgs {
    #[arg(long = "q-list", value_delimiter = ',', required = true, value_parser = prime_arg)]
    q_list: Vec<u64>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(2..))]
    rank: u32,
}

fn trace_arg(s: &str) -> Result<String, String> {
    s.parse::<TraceVariant>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn x_rule_arg(s: &str) -> Result<String, String> {
    s.parse::<XRule>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn coeff_arg(s: &str) -> Result<String, String> {
    s.parse::<Coefficient>().map(|_| s.to_string()).map_err(|e| e.to_string())
}

fn prime_arg(s: &str) -> Result<u64, String> {
    let q: u64 = s.parse().map_err(|_| format!("`{s}` is not an integer"))?;
    if q < 3 || !is_prime(q) {
        return Err(format!("{q} is not an odd prime"));
    }
    Ok(q)
}

/// Whether the run's checks held.
pub enum Verdict {
    Pass,
    Fail(String),
}

fn main() -> ExitCode {
    run(std::env::args_os())
}

fn run(argv: impl IntoIterator<Item = OsString>) -> ExitCode {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads {n}: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::execute(&cli) {
        Ok(Verdict::Pass) => ExitCode::SUCCESS,
        Ok(Verdict::Fail(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            let verification = e
                .downcast_ref::<tracesum_core::Error>()
                .is_some_and(tracesum_core::Error::is_verification_failure);
            eprintln!("error: {e:#}");
            ExitCode::from(if verification { 2 } else { 1 })
        }
    }
}
