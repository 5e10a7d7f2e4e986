#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use perihyp::fourier::{FourierField, Grid};
use perihyp::linalg::CMat;
use perihyp::problem::{Partition, ProblemData};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

pub fn crand<R: Rng>(rng: &mut R) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// m = 1, n = 2, a = (α, −α), b = 0, r0 = 1, r1 = −1.
pub fn reflecting_pair(alpha: f64) -> ProblemData {
    ProblemData::from_cells(
        Partition::uniform(1),
        1,
        vec![vec![alpha], vec![-alpha]],
        vec![vec![vec![0.0]; 2]; 2],
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::from_element(1, 1, -1.0),
    )
    .unwrap()
}

pub fn random_partition(rng: &mut ChaCha8Rng, max_cells: usize) -> Partition {
    let cells = rng.random_range(1..=max_cells);
    let mut cuts: Vec<f64> = (1..cells).map(|_| rng.random_range(0.05..0.95)).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 0.02);
    let mut bp = vec![0.0];
    bp.extend(cuts);
    bp.push(1.0);
    Partition::new(bp).unwrap()
}

#[derive(Clone, Copy, Debug)]
pub struct InstanceSpec {
    pub max_n: usize,
    pub max_cells: usize,
    /// Off-diagonal coupling magnitude bound.
    pub coupling: f64,
    pub constant_speeds: bool,
    pub reflection: f64,
}

impl Default for InstanceSpec {
    fn default() -> Self {
        Self {
            max_n: 4,
            max_cells: 8,
            coupling: 0.5,
            constant_speeds: false,
            reflection: 0.9,
        }
    }
}

/// Random data with the conventional sign pattern.
pub fn random_instance(rng: &mut ChaCha8Rng, spec: InstanceSpec) -> ProblemData {
    let n = rng.random_range(2..=spec.max_n);
    let m = rng.random_range(1..n);
    let part = random_partition(rng, spec.max_cells);
    let cells = part.cells();
    let a: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let sign = if j < m { 1.0 } else { -1.0 };
            let v = rng.random_range(0.3..2.0);
            (0..cells)
                .map(|_| sign * if spec.constant_speeds { v } else { rng.random_range(0.3..2.0) })
                .collect()
        })
        .collect();
    let b: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|j| {
            (0..n)
                .map(|k| {
                    (0..cells)
                        .map(|_| {
                            if j == k {
                                rng.random_range(-0.3..1.0)
                            } else {
                                rng.random_range(-spec.coupling..=spec.coupling)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let r = spec.reflection;
    let r0 = DMatrix::from_fn(m, n - m, |_, _| rng.random_range(-r..r));
    let r1 = DMatrix::from_fn(n - m, m, |_, _| rng.random_range(-r..r));
    ProblemData::from_cells(part, m, a, b, r0, r1).unwrap()
}

/// Random forcing that is affine on every partition cell (jumps allowed at breakpoints).
pub fn cellwise_affine_profile(rng: &mut ChaCha8Rng, grid: &Grid, n: usize) -> CMat {
    let part = grid.partition();
    let x = grid.nodes();
    let mut f = CMat::zeros(n, grid.len());
    for cell in 0..part.cells() {
        for j in 0..n {
            let (v0, slope) = (crand(rng), crand(rng));
            for i in grid.cell_nodes(cell) {
                f[(j, i)] = v0 + slope * (x[i] - part.left(cell));
            }
        }
    }
    f
}

pub fn cellwise_affine_field(rng: &mut ChaCha8Rng, grid: &Grid, n: usize, s_max: usize) -> FourierField {
    let mut f = FourierField::zeros(grid.clone(), n, s_max);
    for s in 0..=s_max as i64 {
        let prof = cellwise_affine_profile(rng, grid, n);
        f.set_mode(s, prof);
    }
    f
}

pub fn max_rel(a: &CMat, b: &CMat) -> f64 {
    (a - b).camax() / b.camax().max(1e-300)
}
