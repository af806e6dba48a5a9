//! `cirregime`: classify, analyze and simulate regime-switching CIR models.
//!
//! Every command prints one JSON document on stdout; diagnostics go to
//! stderr. Exit codes: 0 success, 1 domain or contract failure, 2 usage or
//! parse failure.

mod commands;
mod manifest;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cirregime::Exec;

/// Default master seed.
pub const DEFAULT_SEED: u64 = 20_150_701;

#[derive(Parser, Debug)]
#[command(name = "cirregime", version, about = "Regime-switching CIR toolkit")]
struct Cli {
    /// Worker threads; 1 runs sequentially, 0 or unset uses all cores.
    #[arg(long, global = true, env = "CIRREGIME_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SchemeArg {
    Exact,
    Euler,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check model conditions; exit 0 iff the model is usable.
    Validate { model: PathBuf },
    /// Recurrence and tail verdicts.
    Classify {
        model: PathBuf,
        /// Extra regime orderings for rate-level dependent models, one-based,
        /// e.g. "2,1,3;3,2,1".
        #[arg(long)]
        orderings: Option<String>,
        /// Comma-separated p values for an eta curve in the output.
        #[arg(long)]
        p_grid: Option<String>,
    },
    /// eta_p curve and kappa.
    Spectral {
        model: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        p_min: f64,
        #[arg(long, default_value_t = 4.0)]
        p_max: f64,
        #[arg(long, default_value_t = 81, value_parser = clap::value_parser!(u64).range(2..))]
        p_steps: u64,
        /// CSV file for the (p, eta) curve.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate paths to a CSV file.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 1.0, value_parser = positive)]
        x0: f64,
        #[arg(long, value_parser = positive)]
        horizon: f64,
        /// Output grid spacing.
        #[arg(long, value_parser = positive)]
        dt: f64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        paths: u64,
        #[arg(long, value_enum, default_value_t = SchemeArg::Exact)]
        scheme: SchemeArg,
        /// Euler steps per output interval.
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        substeps: u64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Stationary tail diagnostics.
    Tails {
        model: PathBuf,
        #[arg(long, default_value_t = 100_000, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, value_parser = positive)]
        burn_in: Option<f64>,
        /// Comma-separated moment orders.
        #[arg(long, default_value = "0.5,1,2,4")]
        p_list: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Directory for hill_sweep.csv and moments.csv.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Direct versus squared-Bessel time-changed law of r_t.
    BesselCheck {
        model: PathBuf,
        #[arg(long, default_value_t = 1.0, value_parser = positive)]
        t: f64,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        #[arg(long, default_value_t = 1.0, value_parser = positive)]
        x0: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Long-path time average of a functional.
    Ergodic {
        model: PathBuf,
        /// one | value | value^p:<p> | regime:<i> (one-based)
        #[arg(long, value_parser = commands::parse_functional)]
        f: commands::Functional,
        #[arg(long, default_value_t = 1e4, value_parser = positive)]
        horizon: f64,
        #[arg(long, default_value_t = 0.01, value_parser = positive)]
        dt: f64,
        #[arg(long, default_value_t = 1.0, value_parser = positive)]
        x0: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("must be positive and finite, got {v}"))
    }
}

/// Writes the stdout document; a closed pipe is not an error.
fn emit(v: &serde_json::Value) {
    let text = serde_json::to_string_pretty(v).expect("serializable");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            eprint!("{e}");
            let text = e.to_string();
            let msg = text.lines().next().unwrap_or_default().trim_start_matches("error: ");
            emit(&serde_json::json!({ "error": format!("usage: {msg}"), "exit_code": 2 }));
            return ExitCode::from(2);
        }
    };
    let exec = Exec::with_threads(cli.threads);
    match commands::run(cli.command, &exec) {
        Ok(outcome) => {
            emit(&outcome.json);
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            emit(&serde_json::json!({ "error": e.to_string(), "exit_code": code }));
            ExitCode::from(code)
        }
    }
}
