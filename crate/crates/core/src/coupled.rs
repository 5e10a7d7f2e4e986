//! Per-mode solver for the fully coupled system, direct and adjoint.
//!
//! Direct mode `s`:  `a u' = −(is + b) u + f`.
//! Adjoint mode `s`: `a φ' = (bᵀ − is) φ − g`.
//!
//! Both are written `y' = M y + G g` with `M`, `G` constant per cell and
//! integrated exactly for piecewise-linear sources with `φ₁`, `φ₂` blocks on
//! each subcell. The `n` unknown values at `x = 0` come from the `n`
//! boundary rows at the two ends.

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::diagonal::diag_mode_solve;
use crate::error::{Error, Result};
use crate::fourier::{FourierField, Grid};
use crate::linalg::{self, CMat, I};
use crate::problem::{PhaseData, ProblemData};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Direct,
    Adjoint,
}

#[derive(Debug, Clone)]
struct SubcellStep {
    /// `exp(M δ) − I`, formed as `M δ φ₁(M δ)` so its rounding error scales
    /// with `‖M δ‖`; stepping with `E` itself compounds an `O(ε)` error per subcell.
    increment: CMat,
    /// Weight of the source at the subcell's left node.
    w0: CMat,
    /// Weight of the source at the subcell's right node.
    w1: CMat,
}

#[derive(Debug, Clone)]
pub struct ModePropagator {
    pub s: i64,
    pub side: Side,
    /// `M_c` per cell.
    pub generators: Vec<CMat>,
    /// `E_c = exp(M_c h_c)` per cell.
    pub cell_exps: Vec<CMat>,
    /// `Φ` at each breakpoint, `Φ(x_0) = I`.
    pub fundamental: Vec<CMat>,
    grid: Grid,
    steps: Vec<SubcellStep>,
}

fn generator(p: &ProblemData, s: i64, side: Side, cell: usize) -> (CMat, CMat) {
    let n = p.n();
    let b = p.b_cell(cell);
    let is = I * s as f64;
    match side {
        Side::Direct => (
            CMat::from_fn(n, n, |j, k| {
                let d = if j == k { is } else { Complex64::new(0.0, 0.0) };
                -(d + b[(j, k)]) / p.a(j, cell)
            }),
            CMat::from_fn(n, n, |j, k| {
                Complex64::new(if j == k { 1.0 / p.a(j, cell) } else { 0.0 }, 0.0)
            }),
        ),
        Side::Adjoint => (
            CMat::from_fn(n, n, |j, k| {
                let d = if j == k { is } else { Complex64::new(0.0, 0.0) };
                (Complex64::new(b[(k, j)], 0.0) - d) / p.a(j, cell)
            }),
            CMat::from_fn(n, n, |j, k| {
                Complex64::new(if j == k { -1.0 / p.a(j, cell) } else { 0.0 }, 0.0)
            }),
        ),
    }
}

pub fn build_propagator(p: &ProblemData, s: i64, side: Side, grid: &Grid) -> Result<ModePropagator> {
    if grid.partition() != p.partition() {
        return Err(Error::ShapeMismatch("grid and problem use different partitions".into()));
    }
    let n = p.n();
    let mut generators = Vec::with_capacity(p.cells());
    let mut cell_exps = Vec::with_capacity(p.cells());
    let mut fundamental = vec![CMat::identity(n, n)];
    let mut steps = Vec::with_capacity(p.cells());
    for c in 0..p.cells() {
        let (m, g) = generator(p, s, side, c);
        let e = linalg::expm(&m, p.partition().width(c))?;
        let d = grid.spacing(c);
        let (_, phi1, phi2) = linalg::phi_blocks(&m, d)?;
        let dd = Complex64::new(d, 0.0);
        steps.push(SubcellStep {
            increment: &m * &phi1 * dd,
            w0: (&phi1 - &phi2) * &g * dd,
            w1: &phi2 * &g * dd,
        });
        let next = &e * fundamental.last().unwrap();
        fundamental.push(next);
        generators.push(m);
        cell_exps.push(e);
    }
    Ok(ModePropagator {
        s,
        side,
        generators,
        cell_exps,
        fundamental,
        grid: grid.clone(),
        steps,
    })
}

impl ModePropagator {
    pub fn end_matrix(&self) -> &CMat {
        self.fundamental.last().unwrap()
    }

    /// Marches `y(0) = start` across the grid with source `g` (or none).
    pub fn march(&self, start: &DVector<Complex64>, g: Option<&CMat>) -> CMat {
        let n = start.len();
        let grid = &self.grid;
        let mut out = CMat::zeros(n, grid.len());
        let mut y = start.clone();
        for (c, step) in self.steps.iter().enumerate() {
            let nodes = grid.cell_nodes(c);
            out.column_mut(nodes.start).copy_from(&y);
            for i in nodes.start..nodes.end - 1 {
                let mut next = &y + &step.increment * &y;
                if let Some(g) = g {
                    next += &step.w0 * g.column(i) + &step.w1 * g.column(i + 1);
                }
                out.column_mut(i + 1).copy_from(&next);
                y = next;
            }
        }
        out
    }

    /// Profile with zero start value driven by `g`.
    pub fn particular(&self, g: &CMat) -> CMat {
        self.march(&DVector::zeros(g.nrows()), Some(g))
    }
}

/// Boundary rows acting on the values at `x = 0` and `x = 1`. The first block
/// constrains `y(0)`, the second `y(1)`; together they have `n` rows.
pub fn boundary_rows(p: &ProblemData, side: Side) -> (CMat, CMat) {
    let (n, m) = (p.n(), p.m());
    let z = |v: f64| Complex64::new(v, 0.0);
    match side {
        Side::Direct => {
            // u_j(0) − Σ_{k≥m} r0_jk u_k(0) for j < m
            let l0 = CMat::from_fn(m, n, |j, k| {
                if k == j {
                    z(1.0)
                } else if k >= m {
                    z(-p.r0()[(j, k - m)])
                } else {
                    z(0.0)
                }
            });
            // u_j(1) − Σ_{l<m} r1_jl u_l(1) for j ≥ m
            let l1 = CMat::from_fn(n - m, n, |jj, k| {
                if k == jj + m {
                    z(1.0)
                } else if k < m {
                    z(-p.r1()[(jj, k)])
                } else {
                    z(0.0)
                }
            });
            (l0, l1)
        }
        Side::Adjoint => {
            let last = p.cells() - 1;
            // a_k(0) φ_k(0) + Σ_{j<m} r0_jk a_j(0) φ_j(0) for k ≥ m
            let l0 = CMat::from_fn(n - m, n, |kk, i| {
                let k = kk + m;
                if i == k {
                    z(p.a(k, 0))
                } else if i < m {
                    z(p.r0()[(i, kk)] * p.a(i, 0))
                } else {
                    z(0.0)
                }
            });
            // a_l(1) φ_l(1) + Σ_{j≥m} r1_jl a_j(1) φ_j(1) for l < m
            let l1 = CMat::from_fn(m, n, |l, i| {
                if i == l {
                    z(p.a(l, last))
                } else if i >= m {
                    z(p.r1()[(i - m, l)] * p.a(i, last))
                } else {
                    z(0.0)
                }
            });
            (l0, l1)
        }
    }
}

/// The `n × n` system for `y(0)`: `K y(0) = rhs`.
pub fn boundary_system(p: &ProblemData, prop: &ModePropagator, end_particular: Option<&DVector<Complex64>>) -> (CMat, DVector<Complex64>) {
    let n = p.n();
    let (l0, l1) = boundary_rows(p, prop.side);
    let mut k = CMat::zeros(n, n);
    let r0 = l0.nrows();
    k.rows_mut(0, r0).copy_from(&l0);
    k.rows_mut(r0, n - r0).copy_from(&(&l1 * prop.end_matrix()));
    let mut rhs = DVector::zeros(n);
    if let Some(pe) = end_particular {
        rhs.rows_mut(r0, n - r0).copy_from(&(-(&l1 * pe)));
    }
    (k, rhs)
}

fn end_column(u: &CMat) -> DVector<Complex64> {
    u.column(u.ncols() - 1).into_owned()
}

fn check_forcing(p: &ProblemData, grid: &Grid, f: &CMat) -> Result<()> {
    if f.shape() != (p.n(), grid.len()) {
        return Err(Error::ShapeMismatch(format!(
            "forcing is {}x{}, expected {}x{}",
            f.nrows(),
            f.ncols(),
            p.n(),
            grid.len()
        )));
    }
    Ok(())
}

/// `σ_min / σ_max` of the boundary system.
pub fn relative_sigma_min(k: &CMat) -> f64 {
    let (sigma, _) = linalg::svd_right(k);
    let max = sigma[0];
    if max == 0.0 {
        0.0
    } else {
        sigma[sigma.len() - 1] / max
    }
}

fn solve_side(p: &ProblemData, s: i64, side: Side, grid: &Grid, f: &CMat, eps_res: f64) -> Result<CMat> {
    check_forcing(p, grid, f)?;
    let prop = build_propagator(p, s, side, grid)?;
    let part = prop.particular(f);
    let (k, rhs) = boundary_system(p, &prop, Some(&end_column(&part)));
    let ratio = relative_sigma_min(&k);
    if ratio < eps_res {
        return Err(Error::ResonantMode { s, magnitude: ratio });
    }
    let y0 = k
        .lu()
        .solve(&rhs)
        .ok_or(Error::ResonantMode { s, magnitude: ratio })?;
    Ok(prop.march(&y0, Some(f)))
}

/// Mode `s` of the coupled direct problem. Resonance is reported as the
/// relative smallest singular value of the boundary system.
pub fn coupled_mode_solve(p: &ProblemData, s: i64, grid: &Grid, f: &CMat, eps_res: f64) -> Result<CMat> {
    solve_side(p, s, Side::Direct, grid, f, eps_res)
}

/// Mode `s` of the adjoint problem `−is φ − a φ' + bᵀ φ = g` with the adjoint
/// reflection conditions.
pub fn adjoint_mode_solve(p: &ProblemData, s: i64, grid: &Grid, g: &CMat, eps_res: f64) -> Result<CMat> {
    solve_side(p, s, Side::Adjoint, grid, g, eps_res)
}

/// Field version of [`coupled_mode_solve`] (or the adjoint side).
pub fn solve_field(p: &ProblemData, field: &FourierField, side: Side, eps_res: f64) -> Result<FourierField> {
    if field.n() != p.n() {
        return Err(Error::ShapeMismatch("field does not match the problem".into()));
    }
    let grid = field.grid();
    let solved: Vec<(i64, CMat)> = (0..=field.s_max() as i64)
        .into_par_iter()
        .map(|s| solve_side(p, s, side, grid, field.mode(s), eps_res).map(|u| (s, u)))
        .collect::<Result<_>>()?;
    let mut out = FourierField::zeros(grid.clone(), p.n(), field.s_max());
    for (s, u) in solved {
        out.set_mode(s, u);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RichardsonOutcome {
    pub profile: CMat,
    pub iterations: usize,
    /// `‖u_{k+1} − u_k‖ / ‖u_k − u_{k−1}‖` per iteration.
    pub ratios: Vec<f64>,
}

/// Fixed point of `u ← A_s⁻¹(f − b¹u)`, with `A_s` the decoupled operator.
#[allow(clippy::too_many_arguments)]
pub fn richardson_solve(
    p: &ProblemData,
    phases: &PhaseData,
    grid: &Grid,
    s: i64,
    f: &CMat,
    tol: f64,
    maxit: usize,
    eps_res: f64,
) -> Result<RichardsonOutcome> {
    check_forcing(p, grid, f)?;
    let off = p.off_diagonal();
    let apply_b1 = |u: &CMat| {
        let mut out = CMat::zeros(u.nrows(), u.ncols());
        for (c, bc) in off.iter().enumerate() {
            let bc = linalg::to_complex(bc);
            for i in grid.cell_nodes(c) {
                out.column_mut(i).copy_from(&(&bc * u.column(i)));
            }
        }
        out
    };
    let (mut u, _) = diag_mode_solve(p, phases, grid, s, f, eps_res)?;
    let mut prev_diff = f64::NAN;
    let mut ratios = Vec::new();
    for it in 1..=maxit {
        let (next, _) = diag_mode_solve(p, phases, grid, s, &(f - apply_b1(&u)), eps_res)?;
        let diff = grid.profile_norm(&(&next - &u));
        let size = grid.profile_norm(&next);
        u = next;
        if it > 1 {
            ratios.push(diff / prev_diff);
        }
        if diff <= tol * size || diff == 0.0 {
            return Ok(RichardsonOutcome {
                profile: u,
                iterations: it,
                ratios,
            });
        }
        if it >= 3 && ratios.last().is_some_and(|&r| r >= 1.0) {
            return Err(Error::NonContractive {
                ratio: *ratios.last().unwrap(),
                iterations: it,
            });
        }
        prev_diff = diff;
    }
    Err(Error::NonContractive {
        ratio: ratios.last().copied().unwrap_or(f64::NAN),
        iterations: maxit,
    })
}

/// Null space of one mode's boundary system, propagated to profiles that are
/// orthonormal in `L²(0, 1)`.
#[derive(Debug, Clone, Serialize)]
pub struct KernelMode {
    pub s: i64,
    pub side: Side,
    /// All singular values of the boundary system, decreasing.
    pub singular_values: Vec<f64>,
    #[serde(skip)]
    pub profiles: Vec<CMat>,
    /// Largest homogeneous boundary residual over the returned profiles.
    pub boundary_residual: f64,
}

impl KernelMode {
    pub fn dim(&self) -> usize {
        self.profiles.len()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelBasis {
    pub side: Side,
    /// Coefficient jumps make the adjoint formal; see [`ProblemData::has_constant_speeds`].
    pub formal: bool,
    pub modes: Vec<KernelMode>,
}

impl KernelBasis {
    pub fn dim_at(&self, s: i64) -> usize {
        self.modes.iter().find(|k| k.s == s).map_or(0, |k| k.dim())
    }

    pub fn mode(&self, s: i64) -> Option<&KernelMode> {
        self.modes.iter().find(|k| k.s == s)
    }
}

/// Modified Gram–Schmidt in the grid `L²` inner product.
fn orthonormalize(grid: &Grid, profiles: Vec<CMat>) -> Vec<CMat> {
    let mut out: Vec<CMat> = Vec::new();
    for mut v in profiles {
        for q in &out {
            let proj = grid.profile_inner(&v, q);
            v -= q * proj;
        }
        let norm = grid.profile_norm(&v);
        if norm > 0.0 {
            out.push(v / Complex64::new(norm, 0.0));
        }
    }
    out
}

pub fn mode_kernel(p: &ProblemData, s: i64, side: Side, grid: &Grid, eps_res: f64) -> Result<KernelMode> {
    let prop = build_propagator(p, s, side, grid)?;
    let (k, _) = boundary_system(p, &prop, None);
    let (sigma, v) = linalg::svd_right(&k);
    let max = sigma[0];
    let nulls: Vec<DVector<Complex64>> = sigma
        .iter()
        .enumerate()
        .filter(|(_, &sv)| sv < eps_res * max || max == 0.0)
        .map(|(i, _)| v.column(i).into_owned())
        .collect();
    let profiles = nulls.iter().map(|y0| prop.march(y0, None)).collect();
    let profiles = orthonormalize(grid, profiles);
    let (l0, l1) = boundary_rows(p, side);
    let boundary_residual = profiles
        .iter()
        .map(|u: &CMat| {
            let left = (&l0 * u.column(0)).norm();
            let right = (&l1 * u.column(u.ncols() - 1)).norm();
            left.max(right)
        })
        .fold(0.0, f64::max);
    Ok(KernelMode {
        s,
        side,
        singular_values: sigma,
        profiles,
        boundary_residual,
    })
}

/// Kernels of every mode `|s| ≤ s_max`; modes with an empty kernel are omitted.
pub fn kernel_basis(p: &ProblemData, s_max: usize, side: Side, grid: &Grid, eps_res: f64) -> Result<KernelBasis> {
    let positive: Vec<KernelMode> = (0..=s_max as i64)
        .into_par_iter()
        .map(|s| mode_kernel(p, s, side, grid, eps_res))
        .collect::<Result<_>>()?;
    let mut modes = Vec::new();
    for km in positive.iter().rev().filter(|k| k.s > 0 && k.dim() > 0) {
        modes.push(KernelMode {
            s: -km.s,
            profiles: km.profiles.iter().map(|u| u.map(|z| z.conj())).collect(),
            ..km.clone()
        });
    }
    modes.extend(positive.into_iter().filter(|k| k.dim() > 0));
    Ok(KernelBasis {
        side,
        formal: side == Side::Adjoint && !p.has_constant_speeds(),
        modes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeDefects {
    pub s: i64,
    /// `|∫ f^s · conj(φ_i) dx|` for each orthonormal adjoint kernel profile.
    pub defects: Vec<f64>,
}

/// Minimum-norm least-squares solution of one mode, with the forcing's
/// components along the adjoint kernel reported as defects.
pub fn fredholm_mode_solve(
    p: &ProblemData,
    s: i64,
    grid: &Grid,
    f: &CMat,
    eps_res: f64,
) -> Result<(CMat, Vec<f64>)> {
    check_forcing(p, grid, f)?;
    let prop = build_propagator(p, s, Side::Direct, grid)?;
    let part = prop.particular(f);
    let (k, rhs) = boundary_system(p, &prop, Some(&end_column(&part)));
    if relative_sigma_min(&k) >= eps_res {
        let y0 = k.lu().solve(&rhs).expect("checked nonsingular");
        return Ok((prop.march(&y0, Some(f)), Vec::new()));
    }
    let adjoint = mode_kernel(p, s, Side::Adjoint, grid, eps_res)?;
    let defects = adjoint
        .profiles
        .iter()
        .map(|phi| grid.profile_inner(f, phi).norm())
        .collect();
    let svd = k.svd(true, true);
    let cut = eps_res * svd.singular_values.max();
    let y0 = svd
        .solve(&rhs, cut)
        .map_err(|e| Error::Precondition(e.to_string()))?;
    let mut u = prop.march(&y0, Some(f));
    let direct = mode_kernel(p, s, Side::Direct, grid, eps_res)?;
    for psi in &direct.profiles {
        let c = grid.profile_inner(&u, psi);
        u -= psi * c;
    }
    Ok((u, defects))
}

/// Field version of [`fredholm_mode_solve`]; defects are listed for resonant modes `s ≥ 0`.
pub fn fredholm_solve(p: &ProblemData, field: &FourierField, eps_res: f64) -> Result<(FourierField, Vec<ModeDefects>)> {
    let grid = field.grid();
    let solved: Vec<(i64, CMat, Vec<f64>)> = (0..=field.s_max() as i64)
        .into_par_iter()
        .map(|s| fredholm_mode_solve(p, s, grid, field.mode(s), eps_res).map(|(u, d)| (s, u, d)))
        .collect::<Result<_>>()?;
    let mut out = FourierField::zeros(grid.clone(), p.n(), field.s_max());
    let mut defects = Vec::new();
    for (s, u, d) in solved {
        out.set_mode(s, u);
        if !d.is_empty() {
            defects.push(ModeDefects { s, defects: d });
        }
    }
    Ok((out, defects))
}

/// Removes from every mode its components along the adjoint kernel.
pub fn project_out_adjoint_kernel(p: &ProblemData, field: &FourierField, eps_res: f64) -> Result<FourierField> {
    let grid = field.grid();
    let mut out = field.clone();
    for s in 0..=field.s_max() as i64 {
        let km = mode_kernel(p, s, Side::Adjoint, grid, eps_res)?;
        if km.dim() == 0 {
            continue;
        }
        let mut f = field.mode(s).clone();
        for phi in &km.profiles {
            let c = grid.profile_inner(&f, phi);
            f -= phi * c;
        }
        out.set_mode(s, f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagonal::DEFAULT_EPS_RES;
    use crate::problem::{compute_phases, Partition};
    use nalgebra::DMatrix;
    use std::f64::consts::PI;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn diagonal_propagator_matches_phases() {
        let p = ProblemData::from_cells(
            Partition::new(vec![0.0, 0.3, 1.0]).unwrap(),
            1,
            vec![vec![1.5, 0.7], vec![-0.4, -2.0]],
            vec![vec![vec![0.2, 0.1], vec![0.0; 2]], vec![vec![0.0; 2], vec![0.5, -0.3]]],
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.5),
        )
        .unwrap();
        let grid = Grid::uniform(p.partition().clone(), 4);
        let ph = compute_phases(&p);
        let prop = build_propagator(&p, 6, Side::Direct, &grid).unwrap();
        for j in 0..2 {
            let expect = Complex64::new(-ph.beta_end(j), -6.0 * ph.alpha_end(j)).exp();
            assert!((prop.end_matrix()[(j, j)] - expect).norm() < 1e-13);
        }
        assert!(prop.end_matrix()[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn single_cell_static_exponential() {
        let b = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, 0.1, 0.4]);
        let p = ProblemData::from_cells(
            Partition::uniform(1),
            1,
            vec![vec![2.0], vec![-1.0]],
            vec![vec![vec![0.3], vec![-0.2]], vec![vec![0.1], vec![0.4]]],
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let grid = Grid::uniform(p.partition().clone(), 2);
        let prop = build_propagator(&p, 0, Side::Direct, &grid).unwrap();
        let ainv = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![0.5, -1.0]));
        let expect = (-(ainv * b)).exp();
        assert!((prop.end_matrix() - linalg::to_complex(&expect)).norm() < 1e-14);
        let inv = prop.end_matrix().clone().try_inverse().unwrap();
        assert!((prop.end_matrix() * inv - CMat::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn marching_reproduces_cell_exponentials() {
        let p = ProblemData::from_cells(
            Partition::new(vec![0.0, 0.5, 1.0]).unwrap(),
            1,
            vec![vec![1.0, 2.0], vec![-1.0, -0.5]],
            vec![vec![vec![0.1, 0.2], vec![0.3, -0.1]], vec![vec![0.0, 0.4], vec![0.2, 0.2]]],
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.5),
        )
        .unwrap();
        let grid = Grid::uniform(p.partition().clone(), 7);
        let prop = build_propagator(&p, 3, Side::Adjoint, &grid).unwrap();
        let y0 = DVector::from_vec(vec![c(1.0), Complex64::new(0.5, -0.2)]);
        let u = prop.march(&y0, None);
        let expect = prop.end_matrix() * &y0;
        assert!((end_column(&u) - expect).norm() < 1e-13);
    }

    #[test]
    fn source_weights_integrate_linear_forcing() {
        // a = 1, b = 0, s = 0: u' = f with f = x gives u = x²/2
        let p = ProblemData::from_cells(
            Partition::uniform(1),
            1,
            vec![vec![1.0], vec![-1.0]],
            vec![vec![vec![0.0]; 2]; 2],
            DMatrix::zeros(1, 1),
            DMatrix::zeros(1, 1),
        )
        .unwrap();
        let grid = Grid::uniform(p.partition().clone(), 5);
        let x = grid.nodes();
        let f = CMat::from_fn(2, grid.len(), |j, i| c(if j == 0 { x[i] } else { 0.0 }));
        let u = coupled_mode_solve(&p, 0, &grid, &f, DEFAULT_EPS_RES).unwrap();
        for (i, &xi) in x.iter().enumerate() {
            assert!((u[(0, i)] - xi * xi / 2.0).norm() < 1e-15);
        }
    }

    #[test]
    fn zero_forcing_zero_solution() {
        let p = ProblemData::from_cells(
            Partition::uniform(1),
            1,
            vec![vec![1.0], vec![-1.0]],
            vec![vec![vec![0.5], vec![0.1]], vec![vec![0.2], vec![0.5]]],
            DMatrix::from_element(1, 1, 0.9),
            DMatrix::from_element(1, 1, 0.9),
        )
        .unwrap();
        let grid = Grid::uniform(p.partition().clone(), 16);
        let u = coupled_mode_solve(&p, 2, &grid, &CMat::zeros(2, grid.len()), DEFAULT_EPS_RES).unwrap();
        assert_eq!(u.norm(), 0.0);
    }

    #[test]
    fn reflecting_pair_kernel() {
        let alpha = 2.0 / PI;
        let p = ProblemData::from_cells(
            Partition::uniform(1),
            1,
            vec![vec![alpha], vec![-alpha]],
            vec![vec![vec![0.0]; 2]; 2],
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, -1.0),
        )
        .unwrap();
        let grid = Grid::uniform(p.partition().clone(), 200);
        for side in [Side::Direct, Side::Adjoint] {
            let k1 = mode_kernel(&p, 1, side, &grid, DEFAULT_EPS_RES).unwrap();
            assert_eq!(k1.dim(), 1);
            let k2 = mode_kernel(&p, 2, side, &grid, DEFAULT_EPS_RES).unwrap();
            assert_eq!(k2.dim(), 0);
            // profile ∝ (e^{−ix/α}, e^{ix/α})
            let u = &k1.profiles[0];
            let x = grid.nodes();
            let scale = u[(0, 0)];
            for (i, &xi) in x.iter().enumerate() {
                let e = Complex64::new(0.0, xi / alpha).exp();
                assert!((u[(0, i)] - scale * e.conj()).norm() < 1e-12);
                assert!((u[(1, i)] - scale * e).norm() < 1e-12);
            }
            assert!((grid.profile_norm(u) - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn richardson_trivial_coupling() {
        let p = ProblemData::from_cells(
            Partition::uniform(2),
            1,
            vec![vec![1.0, 0.5], vec![-1.0, -1.0]],
            vec![vec![vec![0.3, 0.3], vec![0.0; 2]], vec![vec![0.0; 2], vec![0.1, 0.2]]],
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.5),
        )
        .unwrap();
        let ph = compute_phases(&p);
        let grid = Grid::uniform(p.partition().clone(), 10);
        let f = CMat::from_element(2, grid.len(), c(1.0));
        let out = richardson_solve(&p, &ph, &grid, 1, &f, 1e-12, 50, DEFAULT_EPS_RES).unwrap();
        assert_eq!(out.iterations, 1);
    }
}
