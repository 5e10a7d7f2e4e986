mod common;

use common::*;
use nalgebra::DMatrix;
use perihyp::coupled::{
    boundary_system, build_propagator, coupled_mode_solve, fredholm_mode_solve, fredholm_solve, kernel_basis, mode_kernel,
    project_out_adjoint_kernel, relative_sigma_min, richardson_solve, Side,
};
use perihyp::diagonal::{diag_mode_solve, DEFAULT_EPS_RES};
use perihyp::fourier::{FourierField, Grid, GridOptions};
use perihyp::problem::{compute_phases, validate, Partition, ProblemData};
use perihyp::verify::{boundary_residual, relative_mode_residual};
use perihyp::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn screened(rng: &mut ChaCha8Rng, spec: InstanceSpec) -> ProblemData {
    loop {
        let p = random_instance(rng, spec);
        if validate(&p, None).condunif.pass {
            return p;
        }
    }
}

#[test]
fn reduces_to_diagonal_without_coupling() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for _ in 0..100 {
        let p = screened(&mut rng, InstanceSpec::default()).with_scaled_coupling(0.0);
        let ph = compute_phases(&p);
        let s: i64 = rng.random_range(-64..=64);
        let grid = Grid::for_problem(&p, s.unsigned_abs() as usize, GridOptions { phase_step: 0.05, min_subcells: 8 });
        let f = cellwise_affine_profile(&mut rng, &grid, p.n());
        let (ud, _) = diag_mode_solve(&p, &ph, &grid, s, &f, DEFAULT_EPS_RES).unwrap();
        let uc = coupled_mode_solve(&p, s, &grid, &f, DEFAULT_EPS_RES).unwrap();
        assert!(max_rel(&uc, &ud) < 1e-11, "s={s}: {:e}", max_rel(&uc, &ud));
    }
}

#[test]
fn coupled_residual_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for _ in 0..15 {
        let p = screened(&mut rng, InstanceSpec::default());
        let s: i64 = rng.random_range(-20..=20);
        let grid = Grid::for_problem(&p, s.unsigned_abs() as usize, GridOptions::default());
        let f = cellwise_affine_profile(&mut rng, &grid, p.n());
        let u = match coupled_mode_solve(&p, s, &grid, &f, DEFAULT_EPS_RES) {
            Ok(u) => u,
            Err(Error::ResonantMode { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let res = relative_mode_residual(&p, &grid, s, &u, &f, Side::Direct).unwrap();
        assert!(res < 1e-9, "residual {res:e}");
        assert!(boundary_residual(&p, &u, Side::Direct) < 1e-12 * u.camax());
        let v = perihyp::coupled::adjoint_mode_solve(&p, s, &grid, &f, DEFAULT_EPS_RES).unwrap();
        let res = relative_mode_residual(&p, &grid, s, &v, &f, Side::Adjoint).unwrap();
        assert!(res < 1e-9, "adjoint residual {res:e}");
        let br = boundary_residual(&p, &v, Side::Adjoint);
        assert!(br < 1e-11 * v.camax(), "adjoint boundary {br:e} vs {:e}", v.camax());
    }
}

#[test]
fn zero_forcing() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let p = screened(&mut rng, InstanceSpec::default());
    let grid = Grid::uniform(p.partition().clone(), 8);
    let u = coupled_mode_solve(&p, 4, &grid, &perihyp::linalg::CMat::zeros(p.n(), grid.len()), DEFAULT_EPS_RES).unwrap();
    assert_eq!(u.camax(), 0.0);
}

#[test]
fn refinement_leaves_end_matrix_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..10 {
        let p = random_instance(&mut rng, InstanceSpec::default());
        let q = p.refined(2);
        let s = rng.random_range(-10..10);
        let a = build_propagator(&p, s, Side::Direct, &Grid::uniform(p.partition().clone(), 2)).unwrap();
        let b = build_propagator(&q, s, Side::Direct, &Grid::uniform(q.partition().clone(), 1)).unwrap();
        let rel = (a.end_matrix() - b.end_matrix()).norm() / a.end_matrix().norm();
        assert!(rel < 1e-12, "{rel:e}");
    }
}

/// Small coupling relative to the diagonal part.
fn weakly_coupled(rng: &mut ChaCha8Rng) -> ProblemData {
    screened(rng, InstanceSpec { coupling: 0.6, reflection: 0.5, ..InstanceSpec::default() })
}

#[test]
fn richardson_converges_in_one_step_without_coupling() {
    let mut rng = ChaCha8Rng::seed_from_u64(105);
    let p = weakly_coupled(&mut rng).with_scaled_coupling(0.0);
    let ph = compute_phases(&p);
    let grid = Grid::uniform(p.partition().clone(), 16);
    let f = cellwise_affine_profile(&mut rng, &grid, p.n());
    let out = richardson_solve(&p, &ph, &grid, 2, &f, 1e-12, 10, DEFAULT_EPS_RES).unwrap();
    assert_eq!(out.iterations, 1);
}

#[test]
fn contraction_ratio_scales_with_coupling() {
    let p = ProblemData::from_cells(
        Partition::uniform(2),
        1,
        vec![vec![1.0, 1.5], vec![-1.2, -0.8]],
        vec![vec![vec![0.5, 0.3], vec![1.0, 0.6]], vec![vec![0.8, 1.1], vec![0.4, 0.2]]],
        DMatrix::from_element(1, 1, 0.5),
        DMatrix::from_element(1, 1, 0.6),
    )
    .unwrap();
    let ph = compute_phases(&p);
    let grid = Grid::for_problem(&p, 3, GridOptions::default());
    let mut rng = ChaCha8Rng::seed_from_u64(106);
    let f = cellwise_affine_profile(&mut rng, &grid, p.n());
    let ratio = |tau: f64| {
        let q = p.with_scaled_coupling(tau);
        let out = richardson_solve(&q, &ph, &grid, 3, &f, 1e-13, 200, DEFAULT_EPS_RES).unwrap();
        // the last few ratios are polluted by roundoff
        let mut mid = out.ratios[4..].to_vec();
        mid.sort_by(f64::total_cmp);
        mid[mid.len() / 2]
    };
    let r1 = ratio(1.0);
    let r2 = ratio(0.5);
    assert!(r1 < 1.0);
    assert!((r1 / r2 - 2.0).abs() < 0.1, "{r1} {r2}");
}

#[test]
fn richardson_matches_direct_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(107);
    for _ in 0..5 {
        let p = weakly_coupled(&mut rng);
        let ph = compute_phases(&p);
        let s: i64 = rng.random_range(-5..=5);
        let grid = Grid::for_problem(&p, s.unsigned_abs() as usize, GridOptions { phase_step: 2e-4, min_subcells: 64 });
        let f = cellwise_affine_profile(&mut rng, &grid, p.n());
        let tol = 1e-12;
        let out = match richardson_solve(&p, &ph, &grid, s, &f, tol, 500, DEFAULT_EPS_RES) {
            Ok(o) => o,
            Err(Error::NonContractive { .. }) => continue,
            Err(e) => panic!("{e}"),
        };
        let u = coupled_mode_solve(&p, s, &grid, &f, DEFAULT_EPS_RES).unwrap();
        let d = grid.profile_norm(&(&out.profile - &u)) / grid.profile_norm(&u);
        assert!(d < 1e-8, "{d:e}");
    }
}

#[test]
fn noncontractive_reported() {
    // strong coupling between equal-magnitude counter-propagating components
    let p = ProblemData::from_cells(
        Partition::uniform(1),
        1,
        vec![vec![1.0], vec![-1.0]],
        vec![vec![vec![0.0], vec![8.0]], vec![vec![8.0], vec![0.0]]],
        DMatrix::from_element(1, 1, 0.2),
        DMatrix::from_element(1, 1, 0.2),
    )
    .unwrap();
    let ph = compute_phases(&p);
    let grid = Grid::uniform(p.partition().clone(), 64);
    let f = perihyp::linalg::CMat::from_element(2, grid.len(), c(1.0));
    let err = richardson_solve(&p, &ph, &grid, 1, &f, 1e-10, 100, DEFAULT_EPS_RES).unwrap_err();
    assert!(matches!(err, Error::NonContractive { ratio, .. } if ratio >= 1.0), "{err}");
}

#[test]
fn reflecting_pair_kernels() {
    for p_ in 0..=3 {
        for q in 1..=3i64 {
            let alpha = 2.0 * q as f64 / ((2 * p_ + 1) as f64 * PI);
            let p = reflecting_pair(alpha);
            let s_max = 7 * q as usize;
            let grid = Grid::for_problem(&p, s_max, GridOptions::default());
            let direct = kernel_basis(&p, s_max, Side::Direct, &grid, DEFAULT_EPS_RES).unwrap();
            let adjoint = kernel_basis(&p, s_max, Side::Adjoint, &grid, DEFAULT_EPS_RES).unwrap();
            for k in 0..=3 {
                let r = (2 * k + 1) * q;
                if (r * (2 * p_ as i64 + 1) / q) % 2 == 1 {
                    assert!(direct.dim_at(r) >= 1 && direct.dim_at(-r) >= 1, "p={p_} q={q} r={r}");
                }
            }
            for s in -(s_max as i64)..=s_max as i64 {
                assert_eq!(direct.dim_at(s), adjoint.dim_at(s), "s={s}");
            }
            for km in direct.modes.iter().chain(&adjoint.modes) {
                for u in &km.profiles {
                    let zero = perihyp::linalg::CMat::zeros(2, grid.len());
                    let res = relative_mode_residual(&p, &grid, km.s, u, &zero, km.side).unwrap();
                    assert!(res < 1e-9, "kernel residual {res:e}");
                    assert!((grid.profile_norm(u) - 1.0).abs() < 1e-12);
                }
                assert!(km.boundary_residual < 1e-10);
            }
        }
    }
}

#[test]
fn nonresonant_kernel_is_empty() {
    let p = reflecting_pair(1.0 / PI);
    let grid = Grid::uniform(p.partition().clone(), 64);
    for s in -10..=10 {
        assert_eq!(mode_kernel(&p, s, Side::Direct, &grid, DEFAULT_EPS_RES).unwrap().dim(), 0);
    }
}

fn equal_speed_problem(b21: f64, r0: f64, r1: f64) -> ProblemData {
    ProblemData::from_cells(
        Partition::uniform(1),
        1,
        vec![vec![1.0], vec![1.0]],
        vec![vec![vec![0.0], vec![0.0]], vec![vec![b21], vec![0.0]]],
        DMatrix::from_element(1, 1, r0),
        DMatrix::from_element(1, 1, r1),
    )
    .unwrap()
}

fn sigma_ratio(b21: f64, r0: f64, r1: f64, s: i64) -> f64 {
    let p = equal_speed_problem(b21, r0, r1);
    let grid = Grid::uniform(p.partition().clone(), 4);
    let prop = build_propagator(&p, s, Side::Direct, &grid).unwrap();
    relative_sigma_min(&boundary_system(&p, &prop, None).0)
}

#[test]
fn equal_speed_critical_coupling_located_by_search() {
    // golden-section search over b21 for the most singular boundary system
    let (r0, r1) = (0.5, 1.0);
    let (mut lo, mut hi) = (-3.0f64, 3.0f64);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let f = |b: f64| sigma_ratio(b, r0, r1, 3);
    // coarse bracket first
    let grid_pts: Vec<f64> = (0..=600).map(|i| lo + (hi - lo) * i as f64 / 600.0).collect();
    let best = grid_pts.iter().copied().min_by(|a, b| f(*a).total_cmp(&f(*b))).unwrap();
    lo = best - 0.01;
    hi = best + 0.01;
    for _ in 0..200 {
        let (x1, x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
        if f(x1) < f(x2) {
            hi = x2;
        } else {
            lo = x1;
        }
    }
    let b_star = 0.5 * (lo + hi);
    assert!((b_star - (1.0 - r0 * r1) / r0).abs() < 1e-6, "{b_star}");
}

fn resonant_pair() -> (ProblemData, Grid) {
    // R_s = −e^{iπs}: every odd mode is resonant
    let p = reflecting_pair(2.0 / PI);
    let grid = Grid::for_problem(&p, 3, GridOptions::default());
    (p, grid)
}

#[test]
fn fredholm_defect_of_adjoint_kernel_element() {
    let (p, grid) = resonant_pair();
    let adj = mode_kernel(&p, 1, Side::Adjoint, &grid, DEFAULT_EPS_RES).unwrap();
    assert_eq!(adj.dim(), 1);
    let (_, defects) = fredholm_mode_solve(&p, 1, &grid, &adj.profiles[0], DEFAULT_EPS_RES).unwrap();
    assert_eq!(defects.len(), 1);
    assert!((defects[0] - 1.0).abs() < 1e-12, "{}", defects[0]);
}

#[test]
fn fredholm_solves_orthogonal_forcing() {
    let (p, grid) = resonant_pair();
    let mut rng = ChaCha8Rng::seed_from_u64(108);
    // orthogonal forcing kept affine so the solver's linear source model is exact
    let mut f = FourierField::zeros(grid.clone(), 2, 3);
    for s in 0..=3 {
        let g1 = cellwise_affine_profile(&mut rng, &grid, 2);
        let km = mode_kernel(&p, s, Side::Adjoint, &grid, DEFAULT_EPS_RES).unwrap();
        let prof = match km.profiles.first() {
            Some(phi) => {
                let g2 = cellwise_affine_profile(&mut rng, &grid, 2);
                let k = grid.profile_inner(&g1, phi) / grid.profile_inner(&g2, phi);
                g1 - g2 * k
            }
            None => g1,
        };
        f.set_mode(s, prof);
    }
    let projected = project_out_adjoint_kernel(&p, &f, DEFAULT_EPS_RES).unwrap();
    assert!(projected.sub(&f).unwrap().max_abs() < 1e-12);
    let (u, defects) = fredholm_solve(&p, &f, DEFAULT_EPS_RES).unwrap();
    assert_eq!(defects.iter().map(|d| d.s).collect::<Vec<_>>(), vec![1, 3]);
    assert!(defects.iter().flat_map(|d| &d.defects).all(|&d| d < 1e-12));
    for s in 0..=3 {
        let res = relative_mode_residual(&p, &grid, s, u.mode(s), f.mode(s), Side::Direct).unwrap();
        assert!(res < 1e-8, "s={s}: {res:e}");
        assert!(boundary_residual(&p, u.mode(s), Side::Direct) < 1e-10);
        for psi in &mode_kernel(&p, s, Side::Direct, &grid, DEFAULT_EPS_RES).unwrap().profiles {
            assert!(grid.profile_inner(u.mode(s), psi).norm() < 1e-12);
        }
    }
}

#[test]
fn resonant_mode_rejected_by_unique_solver() {
    let (p, grid) = resonant_pair();
    let f = perihyp::linalg::CMat::from_element(2, grid.len(), c(1.0));
    assert!(matches!(
        coupled_mode_solve(&p, 1, &grid, &f, DEFAULT_EPS_RES),
        Err(Error::ResonantMode { s: 1, .. })
    ));
    assert!(coupled_mode_solve(&p, 2, &grid, &f, DEFAULT_EPS_RES).is_ok());
}

/// Mode `r` of `u₁ = sin r(t − x/α)`, `u₂ = sin r(t + x/α)`.
fn sine_kernel_mode(alpha: f64, r: i64, grid: &Grid) -> perihyp::linalg::CMat {
    let x = grid.nodes();
    let k = r as f64 / alpha;
    let half = num_complex::Complex64::new(0.0, -0.5);
    perihyp::linalg::CMat::from_fn(2, x.len(), |j, i| {
        let sign = if j == 0 { -1.0 } else { 1.0 };
        half * num_complex::Complex64::from_polar(1.0, sign * k * x[i])
    })
}

#[test]
fn explicit_sine_kernel_lies_in_computed_kernel() {
    let alpha = 2.0 / PI;
    let p = reflecting_pair(alpha);
    let grid = Grid::for_problem(&p, 5, GridOptions::default());
    for k in 0..3 {
        let r = 2 * k + 1;
        for s in [r, -r] {
            let mut u = sine_kernel_mode(alpha, r, &grid);
            if s < 0 {
                u = u.map(|z| z.conj());
            }
            let norm = grid.profile_norm(&u);
            let zero = perihyp::linalg::CMat::zeros(2, grid.len());
            let res = relative_mode_residual(&p, &grid, s, &u, &zero, Side::Direct).unwrap() / norm;
            assert!(res < 1e-9, "{res:e}");
            assert!(boundary_residual(&p, &u, Side::Direct) < 1e-14);
            let km = mode_kernel(&p, s, Side::Direct, &grid, DEFAULT_EPS_RES).unwrap();
            let mut rest = u.clone();
            for psi in &km.profiles {
                let c = grid.profile_inner(&rest, psi);
                rest -= psi * c;
            }
            assert!(grid.profile_norm(&rest) < 1e-12 * norm);
        }
    }
}

#[test]
fn explicit_critical_coupling_kernel() {
    // u₁ = sin l(t − x), u₂ = (1/r0 − b x) sin l(t − x) at b = (1 − r0 r1)/r0
    let (r0, r1) = (0.5, 1.0);
    let b = (1.0 - r0 * r1) / r0;
    let p = equal_speed_problem(b, r0, r1);
    let grid = Grid::uniform(p.partition().clone(), 1600);
    let x = grid.nodes();
    for l in 1..=4i64 {
        let u = perihyp::linalg::CMat::from_fn(2, x.len(), |j, i| {
            let e = num_complex::Complex64::from_polar(1.0, -(l as f64) * x[i]);
            if j == 0 { e } else { e * (1.0 / r0 - b * x[i]) }
        });
        let zero = perihyp::linalg::CMat::zeros(2, grid.len());
        let res = relative_mode_residual(&p, &grid, l, &u, &zero, Side::Direct).unwrap() / grid.profile_norm(&u);
        assert!(res < 1e-9, "{res:e}");
        assert!(boundary_residual(&p, &u, Side::Direct) < 1e-14);
        assert_eq!(mode_kernel(&p, l, Side::Direct, &grid, DEFAULT_EPS_RES).unwrap().dim(), 1);
    }
    // the opposite sign is not critical
    assert!(sigma_ratio(-b, r0, r1, 2) > 1e-2);
    assert!(sigma_ratio(b, r0, r1, 2) < 1e-13);
}
