use std::path::PathBuf;

use anyhow::{Context, Result};
use num_complex::Complex64;
use perihyp::coupled::{
    coupled_mode_solve, fredholm_solve, kernel_basis, richardson_solve, solve_field, ModeDefects, Side,
};
use perihyp::fourier::{w_norm, FourierField, Grid, GridOptions};
use perihyp::oracle::{relative_mismatch, run_to_periodic, OracleOptions};
use perihyp::scan::scan_with;
use perihyp::verify::{relative_mode_residual, residual_report, ResidualReport};
use perihyp::{compute_phases, validate, Error, ProblemData};
use serde::Serialize;

use crate::input::{load_forcing, load_problem};
use crate::output::{emit, num, to_json, Csv};

/// Stops with a specific exit code after the report has been written.
#[derive(Debug)]
pub struct Exit {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_RESONANCE: i32 = 3;
pub const EXIT_PARSE: i32 = 4;

pub fn check(problem: PathBuf, le_threshold: Option<f64>, out: Option<PathBuf>) -> Result<()> {
    let p = load_problem(&problem)?;
    let report = validate(&p, le_threshold);
    emit(out.as_deref(), &to_json(&report))?;
    if !report.hard_checks_pass {
        return Err(Exit {
            code: EXIT_VALIDATION,
            message: "hard validity checks failed".into(),
        }
        .into());
    }
    Ok(())
}

pub fn scan(problem: PathBuf, s_max: usize, eps_res: f64, csv: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let p = load_problem(&problem)?;
    let report = scan_with(&p, s_max, eps_res);
    if let Some(path) = csv {
        let mut table = Csv::new(&["s".into(), "abs_det".into(), "frob".into()]);
        for m in &report.modes {
            table.row([m.s.to_string(), num(m.abs_det), num(m.frobenius)]);
        }
        table.write(&path).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(out.as_deref(), &to_json(&report))?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SolveMode {
    Direct,
    Richardson,
    Fredholm,
}

pub struct SolveArgs {
    pub problem: PathBuf,
    pub forcing: PathBuf,
    pub gamma: f64,
    pub mode: SolveMode,
    pub eps_res: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub x_points: usize,
    pub t_points: usize,
    pub csv: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct RichardsonModeSummary {
    s: i64,
    iterations: usize,
    last_ratio: Option<f64>,
}

#[derive(Serialize)]
struct SolveSummary {
    mode: &'static str,
    n: usize,
    s_max: usize,
    gamma: f64,
    grid_nodes: usize,
    /// Largest per-mode `‖L_s u^s − f^s‖ / ‖f^s‖` (absolute where `f^s = 0`).
    max_relative_residual: f64,
    /// Residual in the `γ − 1` weighted norm.
    residual: ResidualReport,
    w_norm_gamma: f64,
    w_norm_gamma_minus_1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    richardson: Option<Vec<RichardsonModeSummary>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    defects: Option<Vec<ModeDefects>>,
}

#[derive(Serialize)]
struct ResonanceReport {
    error: &'static str,
    resonant_modes: Vec<i64>,
    hint: &'static str,
}

/// Modes `s ≥ 0` whose boundary system is singular, listed with their negatives.
fn resonant_modes(p: &ProblemData, grid: &Grid, s_max: usize, eps_res: f64) -> Result<Vec<i64>> {
    let probe = perihyp::linalg::CMat::zeros(p.n(), grid.len());
    let mut found = Vec::new();
    for s in 0..=s_max as i64 {
        match coupled_mode_solve(p, s, grid, &probe, eps_res) {
            Ok(_) => {}
            Err(Error::ResonantMode { .. }) => found.push(s),
            Err(e) => return Err(e.into()),
        }
    }
    let mut all: Vec<i64> = found.iter().filter(|&&s| s > 0).map(|s| -s).rev().collect();
    all.extend(found);
    Ok(all)
}

fn mode_label(mode: SolveMode) -> &'static str {
    match mode {
        SolveMode::Direct => "direct",
        SolveMode::Richardson => "richardson",
        SolveMode::Fredholm => "fredholm",
    }
}

pub fn solve(args: SolveArgs) -> Result<()> {
    let p = load_problem(&args.problem)?;
    let forcing = load_forcing(&args.forcing)?;
    let grid = forcing.grid_for(&p);
    let f = forcing.field(&p, &grid).map_err(|m| Exit {
        code: EXIT_PARSE,
        message: format!("{}: {m}", args.forcing.display()),
    })?;

    let mut richardson = None;
    let mut defects = None;
    let u = match args.mode {
        SolveMode::Direct => match solve_field(&p, &f, Side::Direct, args.eps_res) {
            Ok(u) => u,
            Err(Error::ResonantMode { .. }) => {
                let report = ResonanceReport {
                    error: "resonant",
                    resonant_modes: resonant_modes(&p, &grid, forcing.s_max, args.eps_res)?,
                    hint: "rerun with --mode fredholm",
                };
                emit(args.out.as_deref(), &to_json(&report))?;
                return Err(Exit {
                    code: EXIT_RESONANCE,
                    message: format!("resonant modes {:?}; rerun with --mode fredholm", report.resonant_modes),
                }
                .into());
            }
            Err(e) => return Err(e.into()),
        },
        SolveMode::Richardson => {
            let phases = compute_phases(&p);
            let mut u = FourierField::zeros(grid.clone(), p.n(), forcing.s_max);
            let mut per_mode = Vec::new();
            for s in 0..=forcing.s_max as i64 {
                let out = richardson_solve(&p, &phases, &grid, s, f.mode(s), args.tol, args.max_iter, args.eps_res)?;
                per_mode.push(RichardsonModeSummary {
                    s,
                    iterations: out.iterations,
                    last_ratio: out.ratios.last().copied(),
                });
                u.set_mode(s, out.profile);
            }
            richardson = Some(per_mode);
            u
        }
        SolveMode::Fredholm => {
            let (u, d) = fredholm_solve(&p, &f, args.eps_res)?;
            defects = Some(d);
            u
        }
    };

    let mut max_relative_residual: f64 = 0.0;
    for s in 0..=forcing.s_max as i64 {
        let r = relative_mode_residual(&p, &grid, s, u.mode(s), f.mode(s), Side::Direct)?;
        max_relative_residual = max_relative_residual.max(r);
    }
    let summary = SolveSummary {
        mode: mode_label(args.mode),
        n: p.n(),
        s_max: forcing.s_max,
        gamma: args.gamma,
        grid_nodes: grid.len(),
        max_relative_residual,
        residual: residual_report(&p, &u, &f, args.gamma - 1.0, Side::Direct)?,
        w_norm_gamma: w_norm(&u, args.gamma),
        w_norm_gamma_minus_1: w_norm(&u, args.gamma - 1.0),
        richardson,
        defects,
    };
    if let Some(path) = &args.csv {
        write_solution_csv(&u, args.x_points, args.t_points)
            .write(path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    emit(args.out.as_deref(), &to_json(&summary))?;
    Ok(())
}

/// Real field on a uniform `x × t` lattice, one row per point.
fn write_solution_csv(u: &FourierField, x_points: usize, t_points: usize) -> Csv {
    let n = u.n();
    let mut header = vec!["x".to_string(), "t".to_string()];
    header.extend((1..=n).map(|j| format!("u_{j}")));
    let mut table = Csv::new(&header);
    let grid = u.grid();
    let xs: Vec<f64> = (0..x_points.max(2))
        .map(|i| i as f64 / (x_points.max(2) - 1) as f64)
        .collect();
    // mode values at each x, s ≥ 0
    let rows: Vec<Vec<Complex64>> = (0..=u.s_max() as i64)
        .flat_map(|s| {
            let prof = u.mode(s);
            (0..n).map(move |j| prof.row(j).iter().copied().collect())
        })
        .collect();
    let at_x: Vec<Vec<Complex64>> = xs
        .iter()
        .map(|&x| rows.iter().map(|r| grid.interpolate(r, x)).collect())
        .collect();
    for k in 0..t_points.max(1) {
        let t = 2.0 * std::f64::consts::PI * k as f64 / t_points.max(1) as f64;
        for (ix, &x) in xs.iter().enumerate() {
            let mut line = vec![num(x), num(t)];
            for j in 0..n {
                let mut v = at_x[ix][j].re;
                for s in 1..=u.s_max() {
                    let z = at_x[ix][s * n + j];
                    v += 2.0 * (z * Complex64::from_polar(1.0, s as f64 * t)).re;
                }
                line.push(num(v));
            }
            table.row(line);
        }
    }
    table
}

#[derive(Serialize)]
struct KernelDimension {
    s: i64,
    dim: usize,
}

#[derive(Serialize)]
struct KernelReport {
    side: Side,
    s_max: usize,
    eps_res: f64,
    formal: bool,
    total_dim: usize,
    dimensions: Vec<KernelDimension>,
    modes: Vec<perihyp::coupled::KernelMode>,
}

pub fn kernel(
    problem: PathBuf,
    s_max: usize,
    side: Side,
    eps_res: f64,
    csv: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let p = load_problem(&problem)?;
    let grid = Grid::for_problem(&p, s_max, GridOptions::default());
    let basis = kernel_basis(&p, s_max, side, &grid, eps_res)?;
    if let Some(path) = csv {
        let n = p.n();
        let mut header = vec!["s".to_string(), "basis".to_string(), "x".to_string()];
        for j in 1..=n {
            header.push(format!("re_u_{j}"));
            header.push(format!("im_u_{j}"));
        }
        let mut table = Csv::new(&header);
        let x = grid.nodes();
        for km in &basis.modes {
            for (b, prof) in km.profiles.iter().enumerate() {
                for (i, xi) in x.iter().enumerate() {
                    let mut line = vec![km.s.to_string(), (b + 1).to_string(), num(*xi)];
                    for j in 0..n {
                        line.push(num(prof[(j, i)].re));
                        line.push(num(prof[(j, i)].im));
                    }
                    table.row(line);
                }
            }
        }
        table.write(&path).with_context(|| format!("writing {}", path.display()))?;
    }
    let report = KernelReport {
        side,
        s_max,
        eps_res,
        formal: basis.formal,
        total_dim: basis.modes.iter().map(|k| k.dim()).sum(),
        dimensions: basis.modes.iter().map(|k| KernelDimension { s: k.s, dim: k.dim() }).collect(),
        modes: basis.modes,
    };
    emit(out.as_deref(), &to_json(&report))?;
    Ok(())
}

pub struct OracleArgs {
    pub problem: PathBuf,
    pub forcing: PathBuf,
    pub periods: usize,
    pub cfl: f64,
    pub cells: usize,
    pub samples: usize,
    pub eps_res: f64,
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct OracleReport {
    l2_mismatch: f64,
    /// Period-to-period deviation in the last period.
    final_deviation: f64,
    options: OracleOptions,
    dt: f64,
    steps_per_period: usize,
    achieved_cfl: f64,
    spectral_defects: Vec<ModeDefects>,
}

pub fn oracle(args: OracleArgs) -> Result<()> {
    let p = load_problem(&args.problem)?;
    let forcing = load_forcing(&args.forcing)?;
    let grid = forcing.grid_for(&p);
    let f = forcing.field(&p, &grid).map_err(|m| Exit {
        code: EXIT_PARSE,
        message: format!("{}: {m}", args.forcing.display()),
    })?;
    let opts = OracleOptions {
        periods: args.periods,
        samples_per_period: args.samples,
        cells: args.cells,
        cfl: args.cfl,
    };
    // the Fredholm path covers conservative instances with a resonant mean mode
    let (spectral, spectral_defects) = fredholm_solve(&p, &f, args.eps_res)?;
    let run = run_to_periodic(&p, &f, opts, None)?;
    let report = OracleReport {
        l2_mismatch: relative_mismatch(&run, &spectral),
        final_deviation: run.deviation,
        options: opts,
        dt: run.dt,
        steps_per_period: run.steps_per_period,
        achieved_cfl: run.cfl,
        spectral_defects,
    };
    emit(args.out.as_deref(), &to_json(&report))?;
    Ok(())
}
