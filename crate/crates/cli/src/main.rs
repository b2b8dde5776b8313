//! `cartan-kill`: Killing generators, symmetry strata and bundle BCH checks
//! for Cartan geometries, reported as JSON.

mod commands;
mod config;
mod report;

use clap::{Parser, Subcommand};
use commands::{BchArgs, Output};
use config::{CliError, Common};
use std::path::Path;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "cartan-kill", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Killing generators at a point, their stabilization and integrated fields
    Killing {
        #[command(flatten)]
        common: Common,
        /// Radius of the exponential ball for the integrated fields
        #[arg(long, default_value_t = 0.2)]
        radius: f64,
        /// Sample count in that ball
        #[arg(long, default_value_t = 3)]
        samples: usize,
    },
    /// Symmetry-dimension strata over a grid of base points
    Strata {
        #[command(flatten)]
        common: Common,
        /// One axis as lo:hi:steps; repeat per base axis (a single axis is reused)
        #[arg(long, allow_hyphen_values = true)]
        grid: Vec<String>,
        /// Neighbourhood half-width in grid steps for regularity
        #[arg(long, default_value_t = 1)]
        stencil: usize,
    },
    /// Bracket-polynomial series of log(exp X exp Y) and its bundle check
    Bch {
        #[command(flatten)]
        common: Common,
        /// Print a_k in the Lyndon basis
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..=cartan::bch::MAX_ORDER as u64))]
        order: Option<u64>,
        /// Compare fitted Taylor coefficients of zeta with the bracket polynomials
        #[arg(long)]
        verify: bool,
        #[arg(long, default_value_t = 4)]
        kmax: usize,
        /// First algebra vector (random from --seed when absent)
        #[arg(long, allow_hyphen_values = true)]
        x: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        y: Option<String>,
        /// Sampling step of the Taylor fit
        #[arg(long, default_value_t = cartan::bch::TaylorGrid::default().h)]
        h: f64,
        /// Polynomial degree of the Taylor fit
        #[arg(long, default_value_t = cartan::bch::TaylorGrid::default().degree)]
        degree: usize,
    },
    /// Invariant battery on one geometry
    Verify {
        #[command(flatten)]
        common: Common,
        /// List the checks and exit
        #[arg(long)]
        list: bool,
        /// Run only the named checks
        #[arg(long)]
        only: Vec<String>,
    },
}

fn write_outputs(common: &Common, out: &Output) -> Result<(), CliError> {
    let io_err = |p: &Path, e: std::io::Error| CliError::Input(format!("{}: {e}", p.display()));
    match &common.out {
        None => print!("{}", out.text),
        Some(path) => {
            std::fs::write(path, &out.text).map_err(|e| io_err(path, e))?;
            for (ext, text) in &out.side {
                let side = path.with_extension(ext);
                std::fs::write(&side, text).map_err(|e| io_err(&side, e))?;
            }
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, out) = match &cli.command {
        Command::Killing { common, radius, samples } => {
            common.validate()?;
            (common, commands::killing(common, *radius, *samples)?)
        }
        Command::Strata { common, grid, stencil } => {
            common.validate()?;
            (common, commands::strata(common, grid, *stencil)?)
        }
        Command::Bch { common, order, verify, kmax, x, y, h, degree } => {
            common.validate()?;
            let args = BchArgs {
                order: order.map(|k| k as usize),
                verify: *verify,
                kmax: *kmax,
                x: x.as_deref(),
                y: y.as_deref(),
                h: *h,
                degree: *degree,
            };
            (common, commands::bch(common, &args)?)
        }
        Command::Verify { common, list, only } => {
            if *list {
                (common, commands::verify_list())
            } else {
                common.validate()?;
                (common, commands::verify(common, only)?)
            }
        }
    };
    write_outputs(common, &out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cartan-kill: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
