//! `spinphase`: data files for spectra, Berry phases, non-adiabatic corrections and the
//! four-spin entangling cycle.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use spinphase::{Integrator, PulseShape, SpinRep};

use crate::commands::Outcome;

#[derive(Debug, Parser)]
#[command(name = "spinphase", version, about = "Adiabatic cycles of spins with dipole and quadrupole coupling")]
struct Cli {
    /// Output file (default: stdout).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format. Curves default to csv; cycle and entangle emit json only.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Stretch factor for the entangling ramps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TuneArg {
    Auto,
    Fixed(f64),
}

fn parse_tune(s: &str) -> Result<TuneArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(TuneArg::Auto);
    }
    match s.parse::<f64>() {
        Ok(x) if x > 0.0 && x.is_finite() => Ok(TuneArg::Fixed(x)),
        _ => Err(format!("expected 'auto' or a positive number, got '{s}'")),
    }
}

/// S as an integer, a half-integer fraction (3/2) or a decimal (1.5).
fn parse_spin(s: &str) -> Result<SpinRep, String> {
    let value = match s.split_once('/') {
        Some((n, d)) => {
            let n: f64 = n.trim().parse().map_err(|_| format!("bad spin '{s}'"))?;
            let d: f64 = d.trim().parse().map_err(|_| format!("bad spin '{s}'"))?;
            n / d
        }
        None => s.trim().parse().map_err(|_| format!("bad spin '{s}'"))?,
    };
    let twice = 2.0 * value;
    if !twice.is_finite() || (twice - twice.round()).abs() > 1e-12 {
        return Err(format!("spin must be a multiple of 1/2, got '{s}'"));
    }
    SpinRep::new(twice.round() as i64).map_err(|e| e.to_string())
}

#[derive(Debug, Subcommand)]
enum Command {
    /// E(m,λ) and p(m,λ) for every level on a λ grid.
    #[command(allow_negative_numbers = true)]
    Spectrum {
        #[arg(long, value_parser = parse_spin)]
        spin: SpinRep,
        #[arg(long, default_value_t = 0.0)]
        lambda_min: f64,
        #[arg(long, default_value_t = 2.0)]
        lambda_max: f64,
        #[arg(long, default_value_t = 201)]
        n_points: usize,
    },
    /// A_α(θ̃) on the sphere chart λ = −2 cot θ̃.
    #[command(allow_negative_numbers = true)]
    GaugeSphere {
        #[arg(long, value_parser = parse_spin)]
        spin: SpinRep,
        #[arg(long)]
        m: f64,
        /// Interior points θ̃ = πk/(n+1), k = 1..n.
        #[arg(long, default_value_t = 179)]
        n_points: usize,
    },
    /// Magic coupling λ*(η) against its polynomial fit.
    #[command(allow_negative_numbers = true)]
    Magic {
        #[arg(long, value_parser = parse_spin)]
        spin: SpinRep,
        #[arg(long, default_value_t = 0.0)]
        eta_min: f64,
        #[arg(long, default_value_t = 0.5)]
        eta_max: f64,
        #[arg(long, default_value_t = 51)]
        n: usize,
    },
    /// End-of-ramp polarization for a list of ramp times.
    #[command(allow_negative_numbers = true)]
    Ramp {
        #[arg(long, value_parser = parse_spin)]
        spin: SpinRep,
        #[arg(long)]
        m: f64,
        #[arg(long)]
        lambda0: f64,
        #[arg(long, default_value = "blackman")]
        shape: PulseShape,
        /// Ramp durations, comma separated.
        #[arg(long = "T", value_delimiter = ',', required = true)]
        t: Vec<f64>,
        /// Integration steps per unit time.
        #[arg(long, default_value_t = 200.0)]
        steps: f64,
        #[arg(long, default_value = "midpoint")]
        integrator: Integrator,
    },
    /// Transverse coefficients p⁽²⁾ and C_xy on a λ grid.
    #[command(allow_negative_numbers = true)]
    Transverse {
        #[arg(long, value_parser = parse_spin)]
        spin: SpinRep,
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 0.0)]
        lambda_min: f64,
        #[arg(long, default_value_t = 2.0)]
        lambda_max: f64,
        #[arg(long, default_value_t = 201)]
        n: usize,
    },
    /// Adiabatic and mirror-extracted Berry phase of a schedule file.
    #[command(allow_negative_numbers = true)]
    Cycle {
        /// TOML schedule: optional [start] table and [[segment]] entries.
        schedule: PathBuf,
        #[arg(long, value_parser = parse_spin)]
        spin: SpinRep,
        #[arg(long)]
        m: f64,
        #[arg(long, default_value_t = 200.0)]
        steps: f64,
        #[arg(long, default_value = "midpoint")]
        integrator: Integrator,
    },
    /// Four-spin holonomic entangling cycle started from Φ⁽¹⁾.
    #[command(allow_negative_numbers = true)]
    Entangle {
        /// Coupling of the rotation stage (default: the λ with Δβ = −π).
        #[arg(long)]
        lambda0: Option<f64>,
        /// Stage time T: ramps last τT, the 3π rotation 2T.
        #[arg(long = "T", default_value_t = 25.0)]
        t: f64,
        /// Ramp stretch τ: a positive number or 'auto'.
        #[arg(long, default_value = "1", value_parser = parse_tune)]
        tune: TuneArg,
        #[arg(long, default_value_t = 200.0)]
        steps: f64,
        #[arg(long, default_value = "midpoint")]
        integrator: Integrator,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::ContractViolated(why)) => {
            eprintln!("adiabaticity contract violated: {why}");
            ExitCode::from(3)
        }
        // a closed downstream pipe (`| head`) is not a failure
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    use std::io::ErrorKind::BrokenPipe;
    e.chain().any(|c| {
        c.downcast_ref::<std::io::Error>().is_some_and(|io| io.kind() == BrokenPipe)
            || c.downcast_ref::<serde_json::Error>().and_then(|j| j.io_error_kind()) == Some(BrokenPipe)
    })
}
