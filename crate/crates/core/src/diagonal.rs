//! Per-mode solver for the decoupled system (off-diagonal coupling dropped).
//!
//! Mode `s` of component `j` solves `a_j u' + (is + b_jj) u = f_j^s`. With
//! `H_j(x) = exp(−isα_j(x) − β_j(x))` the solution is `u_j = H_j u_j(0) + P_j`
//! where `P_j(0) = 0` is built subcell by subcell with exact integrals of the
//! piecewise-linear forcing. The unknown inflow values at `x = 0` of the
//! components `m..n` solve `(I − R_s) y = rhs`.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{FourierField, Grid};
use crate::linalg::{self, serialize_cmat, CMat, I};
use crate::problem::{PhaseData, ProblemData};

/// Default threshold on `|det(I − R_s)|` (and on relative singular values)
/// below which a mode counts as resonant.
pub const DEFAULT_EPS_RES: f64 = 1e-10;

/// Below this `|z h|` the cell integral switches to its Taylor series.
const SERIES_SWITCH: f64 = 1e-3;

/// `(n−m)×(n−m)` matrix with entries
/// `Σ_{l<m} e^{is(α_j(1)−α_l(1)) + β_j(1)−β_l(1)} r1_jl r0_lk` for `j, k ≥ m`.
pub fn assemble_r(
    phases: &PhaseData,
    r0: &nalgebra::DMatrix<f64>,
    r1: &nalgebra::DMatrix<f64>,
    s: i64,
) -> CMat {
    let m = r0.nrows();
    let q = r1.nrows();
    let sf = s as f64;
    CMat::from_fn(q, q, |jj, kk| {
        let j = jj + m;
        (0..m)
            .map(|l| {
                let ph = Complex64::new(
                    phases.beta_end(j) - phases.beta_end(l),
                    sf * (phases.alpha_end(j) - phases.alpha_end(l)),
                );
                ph.exp() * (r1[(jj, l)] * r0[(l, kk)])
            })
            .sum()
    })
}

/// `det(I − R_s)`.
pub fn small_denominator(r: &CMat) -> Complex64 {
    let n = r.nrows();
    linalg::det(&(CMat::identity(n, n) - r))
}

/// `e^z − 1` without cancellation for small `|z|`.
fn exp_m1(z: Complex64) -> Complex64 {
    let (x, y) = (z.re, z.im);
    let half = (0.5 * y).sin();
    Complex64::new(x.exp_m1() * y.cos() - 2.0 * half * half, x.exp() * y.sin())
}

/// `∫_0^h e^{zy} (p0 + p1 y) dy`.
pub fn cell_integral(z: Complex64, h: f64, p0: Complex64, p1: Complex64) -> Complex64 {
    let w = z * h;
    if w.norm() < SERIES_SWITCH {
        // ∫_0^h e^{zy} y^k dy = h^{k+1} Σ_n w^n / (n! (n + k + 1))
        let mut t0 = Complex64::new(0.0, 0.0);
        let mut t1 = Complex64::new(0.0, 0.0);
        let mut term = Complex64::new(1.0, 0.0);
        for n in 0..8 {
            t0 += term / (n + 1) as f64;
            t1 += term / (n + 2) as f64;
            term *= w / (n + 1) as f64;
        }
        p0 * t0 * h + p1 * t1 * (h * h)
    } else {
        let em1 = exp_m1(w);
        let i0 = em1 / z;
        // ∫_0^h y e^{zy} dy = h e^{zh}/z − (e^{zh} − 1)/z²
        let i1 = (em1 + 1.0) * h / z - em1 / (z * z);
        p0 * i0 + p1 * i1
    }
}

/// Solve data for one mode. The boundary values and `R_s` stand in for the
/// coefficient family that maps forcing to boundary values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSolveArtifacts {
    pub s: i64,
    #[serde(serialize_with = "serialize_cmat")]
    pub r: CMat,
    pub det: Complex64,
    /// `u_j^s(0)` for every component.
    pub left_values: Vec<Complex64>,
    /// `u_j^s(1)` for every component.
    pub right_values: Vec<Complex64>,
}

/// Homogeneous factor `H_j(x) = exp(−isα_j(x) − β_j(x))` at every node of `grid`.
pub fn homogeneous_factors(phases: &PhaseData, grid: &Grid, s: i64) -> CMat {
    let n = phases.n();
    let part = grid.partition();
    let mut h = CMat::zeros(n, grid.len());
    for c in 0..part.cells() {
        let d = grid.spacing(c);
        for (k, i) in grid.cell_nodes(c).enumerate() {
            let y = d * k as f64;
            for j in 0..n {
                let alpha = phases.alpha_nodes(j)[c] + phases.alpha_slope(j, c) * y;
                let beta = phases.beta_nodes(j)[c] + phases.beta_slope(j, c) * y;
                h[(j, i)] = Complex64::new(-beta, -(s as f64) * alpha).exp();
            }
        }
    }
    h
}

/// Particular solution with zero value at `x = 0` for each component.
fn particular(p: &ProblemData, grid: &Grid, s: i64, f: &CMat) -> CMat {
    let n = p.n();
    let mut u = CMat::zeros(n, grid.len());
    for j in 0..n {
        let mut carry = Complex64::new(0.0, 0.0);
        for c in 0..p.cells() {
            let a = p.a(j, c);
            let lambda = (I * s as f64 + p.b(j, j, c)) / a;
            let d = grid.spacing(c);
            let decay = (-lambda * d).exp();
            let nodes = grid.cell_nodes(c);
            u[(j, nodes.start)] = carry;
            for i in nodes.start..nodes.end - 1 {
                // reversed variable σ = δ − τ keeps the integrand bounded
                let (f0, f1) = (f[(j, i)], f[(j, i + 1)]);
                let src = cell_integral(-lambda, d, f1, -(f1 - f0) / d) / a;
                u[(j, i + 1)] = decay * u[(j, i)] + src;
            }
            carry = u[(j, nodes.end - 1)];
        }
    }
    u
}

/// Solves mode `s` of the decoupled problem. `f` holds the forcing profile on `grid`.
pub fn diag_mode_solve(
    p: &ProblemData,
    phases: &PhaseData,
    grid: &Grid,
    s: i64,
    f: &CMat,
    eps_res: f64,
) -> Result<(CMat, ModeSolveArtifacts)> {
    let (n, m) = (p.n(), p.m());
    if f.shape() != (n, grid.len()) {
        return Err(Error::ShapeMismatch(format!(
            "forcing is {}x{}, expected {n}x{}",
            f.nrows(),
            f.ncols(),
            grid.len()
        )));
    }
    let r = assemble_r(phases, p.r0(), p.r1(), s);
    let det = small_denominator(&r);
    if det.norm() < eps_res {
        return Err(Error::ResonantMode {
            s,
            magnitude: det.norm(),
        });
    }
    let pt = particular(p, grid, s, f);
    let h = homogeneous_factors(phases, grid, s);
    let last = grid.last();

    // (I − R_s) y = (Σ_l r1_jl P_l(1) − P_j(1)) / H_j(1)
    let rhs = DVector::from_fn(n - m, |jj, _| {
        let j = jj + m;
        let mix: Complex64 = (0..m).map(|l| pt[(l, last)] * p.r1()[(jj, l)]).sum();
        (mix - pt[(j, last)]) / h[(j, last)]
    });
    let lhs = CMat::identity(n - m, n - m) - &r;
    let y = lhs
        .lu()
        .solve(&rhs)
        .ok_or(Error::ResonantMode { s, magnitude: det.norm() })?;

    let mut left = vec![Complex64::new(0.0, 0.0); n];
    for j in m..n {
        left[j] = y[j - m];
    }
    for l in 0..m {
        left[l] = (0..n - m).map(|k| y[k] * p.r0()[(l, k)]).sum();
    }
    let mut u = pt;
    for j in 0..n {
        for i in 0..grid.len() {
            u[(j, i)] += h[(j, i)] * left[j];
        }
    }
    let right = (0..n).map(|j| u[(j, last)]).collect();
    Ok((
        u,
        ModeSolveArtifacts {
            s,
            r,
            det,
            left_values: left,
            right_values: right,
        },
    ))
}

/// Mode-by-mode inverse of the decoupled operator. Negative modes are the
/// conjugate mirror of the positive ones.
pub fn apply_a_inv(
    p: &ProblemData,
    phases: &PhaseData,
    field: &FourierField,
    eps_res: f64,
) -> Result<FourierField> {
    if field.n() != p.n() || field.grid().partition() != p.partition() {
        return Err(Error::ShapeMismatch("field does not match the problem".into()));
    }
    let grid = field.grid();
    let solved: Vec<(i64, CMat)> = (0..=field.s_max() as i64)
        .into_par_iter()
        .map(|s| diag_mode_solve(p, phases, grid, s, field.mode(s), eps_res).map(|(u, _)| (s, u)))
        .collect::<Result<_>>()?;
    let mut out = FourierField::zeros(grid.clone(), p.n(), field.s_max());
    for (s, u) in solved {
        out.set_mode(s, u);
    }
    Ok(out)
}
