mod commands;
mod input;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use perihyp::coupled::Side;
use perihyp::DEFAULT_EPS_RES;

use commands::{Exit, OracleArgs, SolveArgs, SolveMode, EXIT_PARSE, EXIT_RESONANCE, EXIT_VALIDATION};
use input::ParseError;

/// Time-periodic solutions of linear hyperbolic systems with reflection
/// boundary conditions.
#[derive(Parser)]
#[command(name = "perihyp", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Direct,
    Adjoint,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the structural conditions on the coefficients.
    Check {
        problem: PathBuf,
        /// Threshold turning the coupling sum into a verdict.
        #[arg(long)]
        le_threshold: Option<f64>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Sweep |det(I − R_s)| over |s| ≤ smax.
    Scan {
        problem: PathBuf,
        #[arg(long, default_value_t = 256)]
        smax: usize,
        #[arg(long, default_value_t = DEFAULT_EPS_RES)]
        eps_res: f64,
        /// Write s, abs_det, frob per mode.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Solve for the periodic response to a forcing file.
    Solve {
        problem: PathBuf,
        forcing: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        gamma: f64,
        #[arg(long, value_enum, default_value_t = SolveMode::Direct)]
        mode: SolveMode,
        #[arg(long, default_value_t = DEFAULT_EPS_RES)]
        eps_res: f64,
        /// Richardson stopping tolerance on successive differences.
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 101)]
        x_points: usize,
        #[arg(long, default_value_t = 32)]
        t_points: usize,
        /// Write x, t, u_1..u_n on the synthesis lattice.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Kernel of the direct or adjoint problem, mode by mode.
    Kernel {
        problem: PathBuf,
        #[arg(long, default_value_t = 16)]
        smax: usize,
        #[arg(long, value_enum, default_value_t = SideArg::Direct)]
        side: SideArg,
        #[arg(long, default_value_t = DEFAULT_EPS_RES)]
        eps_res: f64,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
    /// Compare against an explicit upwind run integrated to periodicity.
    Oracle {
        problem: PathBuf,
        forcing: PathBuf,
        #[arg(long, default_value_t = 200)]
        periods: usize,
        #[arg(long, default_value_t = 0.9)]
        cfl: f64,
        #[arg(long, default_value_t = 512)]
        cells: usize,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_EPS_RES)]
        eps_res: f64,
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Check { problem, le_threshold, out } => commands::check(problem, le_threshold, out),
        Command::Scan { problem, smax, eps_res, csv, out } => commands::scan(problem, smax, eps_res, csv, out),
        Command::Solve {
            problem,
            forcing,
            gamma,
            mode,
            eps_res,
            tol,
            max_iter,
            x_points,
            t_points,
            csv,
            out,
        } => commands::solve(SolveArgs {
            problem,
            forcing,
            gamma,
            mode,
            eps_res,
            tol,
            max_iter,
            x_points,
            t_points,
            csv,
            out,
        }),
        Command::Kernel { problem, smax, side, eps_res, csv, out } => {
            let side = match side {
                SideArg::Direct => Side::Direct,
                SideArg::Adjoint => Side::Adjoint,
            };
            commands::kernel(problem, smax, side, eps_res, csv, out)
        }
        Command::Oracle {
            problem,
            forcing,
            periods,
            cfl,
            cells,
            samples,
            eps_res,
            out,
        } => commands::oracle(OracleArgs {
            problem,
            forcing,
            periods,
            cfl,
            cells,
            samples,
            eps_res,
            out,
        }),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<Exit>() {
        return e.code as u8;
    }
    if err.downcast_ref::<ParseError>().is_some() {
        return EXIT_PARSE as u8;
    }
    match err.downcast_ref::<perihyp::Error>() {
        Some(perihyp::Error::ResonantMode { .. }) => EXIT_RESONANCE as u8,
        Some(_) => EXIT_VALIDATION as u8,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
