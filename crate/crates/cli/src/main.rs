//! Command line front end: solve a configured bridge problem, run a
//! paired stability experiment, evaluate exact Wasserstein-1 distances,
//! or perturb a measure file.
//!
//! Exit codes: 0 success, 1 bad input, 2 iteration cap reached before the
//! tolerance, 3 a stability bound was violated.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use bridgelab::error::{Error, Result};
use bridgelab::formats::{
    build_stability_pair, build_solve_problem, load_experiment_config, load_measure,
    measure_to_file, resolve_path,
};
use bridgelab::ipfp::run_ipfp;
use bridgelab::measure::{perturb, PerturbMode};
use bridgelab::stability::run_stability_experiment;
use bridgelab::w1::wasserstein1;

const EXIT_INPUT: u8 = 1;
const EXIT_NO_CONVERGENCE: u8 = 2;
const EXIT_BOUND_VIOLATION: u8 = 3;

#[derive(Parser)]
#[command(
    name = "bridgelab",
    version,
    about = "Discrete entropic optimal transport with paired-run stability checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate a configured problem and emit per-sweep diagnostics as CSV.
    Solve {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Destination for the CSV; overrides the config's `out`, stdout
        /// when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Sweep cap; overrides the config.
        #[arg(long)]
        max_iters: Option<usize>,
        /// Fitted-marginal tolerance; overrides the config, 0 disables
        /// early stopping.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run the base and perturbed problems side by side and check every
    /// stability bound per sweep.
    Stability {
        /// Experiment config (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Destination for the report CSV; overrides the config's `out`,
        /// stdout when neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Replaces the configured perturbation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of sweeps to measure; overrides the config's max_iters.
        #[arg(long)]
        iters: Option<usize>,
    },
    /// Exact Wasserstein-1 distance between two measure files.
    W1 {
        a: PathBuf,
        b: PathBuf,
    },
    /// Apply a seeded perturbation to a measure file and emit the result.
    Perturb {
        /// Measure file (JSON).
        #[arg(long)]
        measure: PathBuf,
        #[arg(long)]
        mode: Mode,
        #[arg(long)]
        magnitude: f64,
        #[arg(long)]
        seed: u64,
        /// Destination for the perturbed measure; stdout when unset.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    WeightJitter,
    EmpiricalSubsample,
    PointJitter,
}

impl Mode {
    fn to_perturb(self) -> PerturbMode {
        match self {
            Mode::WeightJitter => PerturbMode::WeightJitter,
            Mode::EmpiricalSubsample => PerturbMode::EmpiricalSubsample,
            Mode::PointJitter => PerturbMode::PointJitter,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve {
            config,
            out,
            max_iters,
            tol,
        } => cmd_solve(&config, out.as_deref(), max_iters, tol),
        Command::Stability {
            config,
            out,
            seed,
            iters,
        } => cmd_stability(&config, out.as_deref(), seed, iters),
        Command::W1 { a, b } => cmd_w1(&a, &b),
        Command::Perturb {
            measure,
            mode,
            magnitude,
            seed,
            out,
        } => cmd_perturb(&measure, mode, magnitude, seed, out.as_deref()),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                Error::NonConvergence { .. } => ExitCode::from(EXIT_NO_CONVERGENCE),
                _ => ExitCode::from(EXIT_INPUT),
            }
        }
    }
}

/// Writes to the flag target, then the config target resolved against the
/// config file, then stdout.
fn write_output(
    flag_out: Option<&Path>,
    config_out: Option<&str>,
    config_path: &Path,
    text: &str,
) -> Result<()> {
    if let Some(path) = flag_out {
        std::fs::write(path, text)?;
        return Ok(());
    }
    if let Some(entry) = config_out {
        std::fs::write(resolve_path(config_path, entry), text)?;
        return Ok(());
    }
    print!("{text}");
    Ok(())
}

fn cmd_solve(
    config_path: &Path,
    out: Option<&Path>,
    max_iters: Option<usize>,
    tol: Option<f64>,
) -> Result<u8> {
    let config = load_experiment_config(config_path)?;
    let problem = build_solve_problem(&config, config_path)?;
    let max_iters = max_iters.unwrap_or(config.max_iters);
    let tol = tol.unwrap_or(config.tol);
    let trajectory = run_ipfp(&problem, max_iters, tol)?;
    write_output(out, config.out.as_deref(), config_path, &trajectory.to_csv())?;
    match trajectory.converged() {
        Some(n) => {
            log::info!("fitted marginals within {tol} after {n} sweeps");
            Ok(0)
        }
        None if tol > 0.0 => {
            let err = trajectory
                .diagnostics()
                .last()
                .map(|d| d.marginal_err)
                .unwrap_or(f64::NAN);
            eprintln!(
                "did not reach tolerance {tol} within {max_iters} sweeps \
                 (marginal error {err:e})"
            );
            Ok(EXIT_NO_CONVERGENCE)
        }
        None => Ok(0),
    }
}

fn cmd_stability(
    config_path: &Path,
    out: Option<&Path>,
    seed: Option<u64>,
    iters: Option<usize>,
) -> Result<u8> {
    let config = load_experiment_config(config_path)?;
    config.validate_stability()?;
    let (base, hat, seed_used) = build_stability_pair(&config, config_path, seed)?;
    let iters = iters.unwrap_or(config.max_iters);
    let mut report = run_stability_experiment(&base, &hat, iters)?;
    if let Some(s) = seed_used {
        report = report.with_seed(s);
    }
    write_output(out, config.out.as_deref(), config_path, &report.to_csv())?;

    let advisory = report.header.advisory();
    let mut fatal = 0usize;
    for (n, what) in report.violations() {
        // Every bound except the marginal lower bound scales with the
        // Lipschitz constant; when that constant is only a grid estimate
        // those checks cannot be treated as hard failures.
        let lip_dependent = what != "w1_couplings >= matching marginal w1";
        if advisory && lip_dependent {
            eprintln!("advisory: sweep {n}: {what} failed under an estimated constant");
        } else {
            eprintln!("violation: sweep {n}: {what} failed");
            fatal += 1;
        }
    }
    if fatal > 0 {
        Ok(EXIT_BOUND_VIOLATION)
    } else {
        Ok(0)
    }
}

fn cmd_w1(a: &Path, b: &Path) -> Result<u8> {
    let mu = load_measure(a)?;
    let nu = load_measure(b)?;
    let plan = wasserstein1(&mu, &nu)?;
    println!("{:.12}", plan.value());
    Ok(0)
}

fn cmd_perturb(
    measure_path: &Path,
    mode: Mode,
    magnitude: f64,
    seed: u64,
    out: Option<&Path>,
) -> Result<u8> {
    let measure = load_measure(measure_path)?;
    let perturbed = perturb(&measure, mode.to_perturb(), magnitude, seed)?;
    let text = serde_json::to_string_pretty(&measure_to_file(&perturbed))?;
    match out {
        Some(path) => std::fs::write(path, format!("{text}\n"))?,
        None => println!("{text}"),
    }
    Ok(0)
}
