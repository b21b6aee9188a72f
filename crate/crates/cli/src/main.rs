//! `plateau`: minimal surfaces spanning closed contours.
//!
//! Exit codes: 0 success, 1 input or I/O error, 2 not converged, 3 map not
//! univalent, 4 modulus at the bracket end, 5 check failed.

mod commands;
mod config;
mod output;

use clap::{Parser, Subcommand};
use commands::{exit_code, parse_bracket, parse_grid, EXIT_INPUT};
use config::Overrides;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "plateau", version, about = "Minimal surfaces spanning closed contours")]
struct Cli {
    /// Worker threads (default: PLATEAU_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Disc-type minimal surface spanning one contour.
    Solve {
        #[arg(long)]
        contour: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Also write the metric coefficients on the quadrature grid.
        #[arg(long)]
        metric_grid: bool,
    },
    /// Riemann map of a planar Jordan domain with a univalency check.
    Map2d {
        #[arg(long)]
        contour: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Preimage lattice for the univalency check, `G` or `GxG`.
        #[arg(long, default_value = "20", value_parser = parse_grid)]
        grid: usize,
        #[arg(long)]
        metric_grid: bool,
    },
    /// Annulus-type minimal surface spanning two contours.
    Annulus {
        #[arg(long)]
        contour1: PathBuf,
        #[arg(long)]
        contour2: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
        /// Search interval `a,b` for the modulus rho.
        #[arg(long, value_parser = parse_bracket)]
        modulus_bracket: Option<[f64; 2]>,
    },
    /// Re-derive a stored solve and check its invariants.
    Check {
        #[arg(long)]
        report: PathBuf,
        /// `surface.obj` (its `surface.boundary.csv` sidecar is read too) or
        /// the boundary CSV itself.
        #[arg(long)]
        surface: PathBuf,
        /// Refinement factor of the quadrature grid.
        #[arg(long, default_value_t = 1)]
        grid_scale: usize,
    },
}

fn threads(flag: Option<usize>) -> Result<usize, String> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var("PLATEAU_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|e| format!("PLATEAU_THREADS={v:?}: {e}")),
        _ => Ok(0),
    }
}

fn run(command: Command) -> plateau_core::Result<u8> {
    match command {
        Command::Solve {
            contour,
            out,
            overrides,
            metric_grid,
        } => commands::solve(&contour, &out, &overrides, metric_grid),
        Command::Map2d {
            contour,
            out,
            overrides,
            grid,
            metric_grid,
        } => commands::map2d(&contour, &out, &overrides, grid, metric_grid),
        Command::Annulus {
            contour1,
            contour2,
            out,
            overrides,
            modulus_bracket,
        } => commands::annulus(&contour1, &contour2, &out, &overrides, modulus_bracket),
        Command::Check {
            report,
            surface,
            grid_scale,
        } => commands::check(&report, &surface, grid_scale),
    }
}

fn main() -> ExitCode {
    // Usage errors are input errors; clap's own code 2 means non-convergence here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let pool = threads(cli.threads).and_then(|t| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| e.to_string())
    });
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INPUT);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
