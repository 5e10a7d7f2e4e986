//! Forward operators, residuals, the duality pairing and the first-order
//! sensitivities of the solution map.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::coupled::{boundary_rows, solve_field, Side};
use crate::error::{Error, Result};
use crate::fourier::{FourierField, Grid};
use crate::linalg::{CMat, I};
use crate::problem::ProblemData;

/// Fourth-order finite-difference derivative along each row, computed cell by
/// cell with one-sided stencils at the cell ends.
pub fn fd4_derivative(grid: &Grid, u: &CMat) -> Result<CMat> {
    let mut du = CMat::zeros(u.nrows(), u.ncols());
    for c in 0..grid.partition().cells() {
        let r = grid.subcells(c);
        if r < 4 {
            return Err(Error::TooFewSubnodes { cell: c, have: r, need: 4 });
        }
        let nodes = grid.cell_nodes(c);
        let k = 1.0 / (12.0 * grid.spacing(c));
        let base = nodes.start;
        for j in 0..u.nrows() {
            let v = |i: usize| u[(j, base + i)];
            for i in 0..=r {
                let d = if i == 0 {
                    -25.0 * v(0) + 48.0 * v(1) - 36.0 * v(2) + 16.0 * v(3) - 3.0 * v(4)
                } else if i == 1 {
                    -3.0 * v(0) - 10.0 * v(1) + 18.0 * v(2) - 6.0 * v(3) + v(4)
                } else if i == r - 1 {
                    3.0 * v(r) + 10.0 * v(r - 1) - 18.0 * v(r - 2) + 6.0 * v(r - 3) - v(r - 4)
                } else if i == r {
                    25.0 * v(r) - 48.0 * v(r - 1) + 36.0 * v(r - 2) - 16.0 * v(r - 3) + 3.0 * v(r - 4)
                } else {
                    v(i - 2) - 8.0 * v(i - 1) + 8.0 * v(i + 1) - v(i + 2)
                };
                du[(j, base + i)] = d * k;
            }
        }
    }
    Ok(du)
}

/// Multiplies each node's column by the coefficient matrix of its cell.
pub fn apply_cellwise(grid: &Grid, mats: &[DMatrix<f64>], u: &CMat) -> CMat {
    let mut out = CMat::zeros(u.nrows(), u.ncols());
    for (c, m) in mats.iter().enumerate() {
        let mc = m.map(|v| Complex64::new(v, 0.0));
        for i in grid.cell_nodes(c) {
            out.column_mut(i).copy_from(&(&mc * u.column(i)));
        }
    }
    out
}

/// Multiplies row `j` by `d[(j, c)]` on every node of cell `c`.
pub fn scale_rows_cellwise(grid: &Grid, d: &DMatrix<f64>, u: &CMat) -> CMat {
    let mut out = u.clone();
    for c in 0..grid.partition().cells() {
        for i in grid.cell_nodes(c) {
            for j in 0..u.nrows() {
                out[(j, i)] *= d[(j, c)];
            }
        }
    }
    out
}

/// Mode `s` of the direct operator `is u + a u' + b u`, or of the adjoint
/// `−is u − a u' + bᵀ u`.
pub fn apply_mode_operator(p: &ProblemData, grid: &Grid, s: i64, u: &CMat, side: Side) -> Result<CMat> {
    if u.shape() != (p.n(), grid.len()) || grid.partition() != p.partition() {
        return Err(Error::ShapeMismatch("profile does not match problem and grid".into()));
    }
    let du = fd4_derivative(grid, u)?;
    let adu = scale_rows_cellwise(grid, p.a_matrix(), &du);
    let is = I * s as f64;
    Ok(match side {
        Side::Direct => u * is + adu + apply_cellwise(grid, p.b_cells(), u),
        Side::Adjoint => {
            let bt: Vec<DMatrix<f64>> = p.b_cells().iter().map(|b| b.transpose()).collect();
            u * (-is) - adu + apply_cellwise(grid, &bt, u)
        }
    })
}

pub fn apply_operator(p: &ProblemData, field: &FourierField, side: Side) -> Result<FourierField> {
    let mut out = FourierField::zeros(field.grid().clone(), field.n(), field.s_max());
    for s in 0..=field.s_max() as i64 {
        out.set_mode(s, apply_mode_operator(p, field.grid(), s, field.mode(s), side)?);
    }
    Ok(out)
}

/// Largest violation of the boundary conditions of `side` by a profile.
pub fn boundary_residual(p: &ProblemData, u: &CMat, side: Side) -> f64 {
    let (l0, l1) = boundary_rows(p, side);
    let left = (&l0 * u.column(0)).camax();
    let right = (&l1 * u.column(u.ncols() - 1)).camax();
    left.max(right)
}

/// `‖L_s u − f‖ / ‖f‖` in `L²(0, 1)`, with `‖f‖` replaced by 1 when `f = 0`.
pub fn relative_mode_residual(
    p: &ProblemData,
    grid: &Grid,
    s: i64,
    u: &CMat,
    f: &CMat,
    side: Side,
) -> Result<f64> {
    let r = apply_mode_operator(p, grid, s, u, side)? - f;
    let fnorm = grid.profile_norm(f);
    let rnorm = grid.profile_norm(&r);
    Ok(if fnorm > 0.0 { rnorm / fnorm } else { rnorm })
}

/// Residual of a solution field, per mode and in the weighted norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub gamma: f64,
    /// `(s, ‖L_s u^s − f^s‖_{L²})` for `s ≥ 0`.
    pub modes: Vec<(i64, f64)>,
    pub weighted_norm: f64,
    pub boundary: f64,
}

pub fn residual_report(p: &ProblemData, u: &FourierField, f: &FourierField, gamma: f64, side: Side) -> Result<ResidualReport> {
    let r = apply_operator(p, u, side)?.sub(f)?;
    let modes = (0..=r.s_max() as i64)
        .map(|s| (s, r.grid().profile_norm(r.mode(s))))
        .collect();
    let boundary = u
        .mode_indices()
        .map(|s| boundary_residual(p, u.mode(s), side))
        .fold(0.0, f64::max);
    Ok(ResidualReport {
        gamma,
        modes,
        weighted_norm: crate::fourier::w_norm(&r, gamma),
        boundary,
    })
}

/// `Σ_s ∫_0^1 f^s · conj(u^s) dx`, the mean over one period of `∫_0^1 f·u dx`.
pub fn inner_product_complex(f: &FourierField, u: &FourierField) -> Result<Complex64> {
    f.check_same_shape(u)?;
    Ok(f
        .mode_indices()
        .map(|s| f.grid().profile_inner(f.mode(s), u.mode(s)))
        .sum())
}

pub fn inner_product(f: &FourierField, u: &FourierField) -> Result<f64> {
    Ok(inner_product_complex(f, u)?.re)
}

/// `|⟨(A+B)u, ũ⟩ − ⟨u, (Ã+B̃)ũ⟩|` for `u` satisfying the direct and `ũ` the
/// adjoint reflection conditions.
pub fn duality_check(p: &ProblemData, u: &FourierField, ut: &FourierField) -> Result<f64> {
    if !p.has_constant_speeds() {
        return Err(Error::Precondition(
            "duality check needs each a_j constant on [0, 1]".into(),
        ));
    }
    u.check_same_shape(ut)?;
    for (field, side, name) in [(u, Side::Direct, "u"), (ut, Side::Adjoint, "adjoint field")] {
        let scale = field.max_abs().max(f64::MIN_POSITIVE);
        let worst = field
            .mode_indices()
            .map(|s| boundary_residual(p, field.mode(s), side))
            .fold(0.0, f64::max);
        if worst > 1e-8 * scale {
            return Err(Error::Precondition(format!(
                "{name} violates its boundary conditions by {worst:e}"
            )));
        }
    }
    let lhs = inner_product_complex(&apply_operator(p, u, Side::Direct)?, ut)?;
    let rhs = inner_product_complex(u, &apply_operator(p, ut, Side::Adjoint)?)?;
    Ok((lhs - rhs).norm())
}

/// Solution `û` of the direct problem and its derivative in the coupling
/// direction `b_dir` (one matrix per cell): `−(A+B)⁻¹(b_dir û)`.
pub fn sensitivity_b(
    p: &ProblemData,
    f: &FourierField,
    b_dir: &[DMatrix<f64>],
    eps_res: f64,
) -> Result<(FourierField, FourierField)> {
    if b_dir.len() != p.cells() || b_dir.iter().any(|b| b.shape() != (p.n(), p.n())) {
        return Err(Error::ShapeMismatch("coupling direction".into()));
    }
    let u = solve_field(p, f, Side::Direct, eps_res)?;
    let mut g = FourierField::zeros(u.grid().clone(), p.n(), u.s_max());
    for s in 0..=u.s_max() as i64 {
        g.set_mode(s, -apply_cellwise(u.grid(), b_dir, u.mode(s)));
    }
    let du = solve_field(p, &g, Side::Direct, eps_res)?;
    Ok((u, du))
}

/// Solution `û` and its derivative in the speed direction `a_dir` (`n × cells`):
/// `−(A+B)⁻¹(a_dir ∂ₓû)` with `∂ₓû = a⁻¹(f − is û − b û)` taken from the equation.
pub fn sensitivity_a(
    p: &ProblemData,
    f: &FourierField,
    a_dir: &DMatrix<f64>,
    eps_res: f64,
) -> Result<(FourierField, FourierField)> {
    if a_dir.shape() != p.a_matrix().shape() {
        return Err(Error::ShapeMismatch("speed direction".into()));
    }
    let u = solve_field(p, f, Side::Direct, eps_res)?;
    let ratio = a_dir.zip_map(p.a_matrix(), |d, a| -d / a);
    let grid = u.grid();
    let mut g = FourierField::zeros(grid.clone(), p.n(), u.s_max());
    for s in 0..=u.s_max() as i64 {
        let us = u.mode(s);
        let rest = f.mode(s) - us * (I * s as f64) - apply_cellwise(grid, p.b_cells(), us);
        g.set_mode(s, scale_rows_cellwise(grid, &ratio, &rest));
    }
    let du = solve_field(p, &g, Side::Direct, eps_res)?;
    Ok((u, du))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Partition;

    #[test]
    fn fd4_is_exact_on_quartics() {
        let grid = Grid::new(Partition::new(vec![0.0, 0.3, 1.0]).unwrap(), vec![5, 9]).unwrap();
        let x = grid.nodes();
        let u = CMat::from_fn(1, x.len(), |_, i| Complex64::new(x[i].powi(4) - x[i], 2.0 * x[i].powi(3)));
        let du = fd4_derivative(&grid, &u).unwrap();
        for (i, &xi) in x.iter().enumerate() {
            let expect = Complex64::new(4.0 * xi.powi(3) - 1.0, 6.0 * xi * xi);
            assert!((du[(0, i)] - expect).norm() < 1e-11, "{i}");
        }
        let coarse = Grid::uniform(Partition::uniform(1), 3);
        let err = fd4_derivative(&coarse, &CMat::zeros(1, 4)).unwrap_err();
        assert_eq!(err, Error::TooFewSubnodes { cell: 0, have: 3, need: 4 });
    }

    #[test]
    fn zero_field_maps_to_zero() {
        let p = ProblemData::from_cells(
            Partition::uniform(1),
            1,
            vec![vec![1.0], vec![-1.0]],
            vec![vec![vec![0.3], vec![0.1]], vec![vec![0.2], vec![0.4]]],
            DMatrix::from_element(1, 1, 0.5),
            DMatrix::from_element(1, 1, 0.5),
        )
        .unwrap();
        let grid = Grid::uniform(p.partition().clone(), 8);
        let z = FourierField::zeros(grid, 2, 2);
        for side in [Side::Direct, Side::Adjoint] {
            assert_eq!(apply_operator(&p, &z, side).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn cos_pairing() {
        let grid = Grid::uniform(Partition::uniform(1), 4);
        let mut f = FourierField::zeros(grid.clone(), 1, 2);
        f.set_mode(1, CMat::from_element(1, grid.len(), Complex64::new(0.5, 0.0)));
        assert!((inner_product(&f, &f).unwrap() - 0.5).abs() < 1e-15);
        let mut g = FourierField::zeros(grid.clone(), 1, 2);
        g.set_mode(2, CMat::from_element(1, grid.len(), Complex64::new(0.5, 0.0)));
        assert_eq!(inner_product(&f, &g).unwrap(), 0.0);
    }
}
