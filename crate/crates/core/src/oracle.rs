//! First-order upwind time stepping of the initial-boundary value problem.
//!
//! Completely independent of the spectral machinery: it integrates
//! `∂_t u + a ∂_x u + b u = f` forward in time on a uniform refinement of the
//! partition and lets dissipation pull the state onto the periodic orbit.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fourier::{FourierField, Grid};
use crate::problem::ProblemData;

/// Unique nodes on `[0, 1]` with the partition breakpoints among them.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleGrid {
    pub x: Vec<f64>,
    /// Cell of the segment `(x_{i−1}, x_i)` for `i ≥ 1`.
    left_cell: Vec<usize>,
}

impl OracleGrid {
    /// About `cells` segments in total, distributed over partition cells by width.
    pub fn new(p: &ProblemData, cells: usize) -> Self {
        let part = p.partition();
        let mut x = vec![0.0];
        let mut left_cell = vec![usize::MAX];
        for c in 0..part.cells() {
            let h = part.width(c);
            let r = ((cells as f64 * h).round() as usize).max(1);
            for k in 1..=r {
                x.push(if k == r {
                    part.breakpoints()[c + 1]
                } else {
                    part.left(c) + h * k as f64 / r as f64
                });
                left_cell.push(c);
            }
        }
        Self { x, left_cell }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn min_spacing(&self) -> f64 {
        self.x.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    /// Trapezoid-rule `L²(0, 1)` norm of an `n × nodes` array.
    pub fn l2(&self, u: &DMatrix<f64>) -> f64 {
        let mut sum = 0.0;
        for i in 1..self.x.len() {
            let d = self.x[i] - self.x[i - 1];
            for j in 0..u.nrows() {
                sum += 0.5 * d * (u[(j, i - 1)].powi(2) + u[(j, i)].powi(2));
            }
        }
        sum.sqrt()
    }
}

/// Where node `i` of component `j` takes its transport derivative from.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Upwind {
    Left { cell: usize, delta: f64 },
    Right { cell: usize, delta: f64 },
    None { cell: usize },
}

impl Upwind {
    fn cell(self) -> usize {
        match self {
            Upwind::Left { cell, .. } | Upwind::Right { cell, .. } | Upwind::None { cell } => cell,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteppingState {
    pub grid: OracleGrid,
    pub t: f64,
    /// `n × nodes`.
    pub u: DMatrix<f64>,
    pub dt: f64,
    pub cfl: f64,
    upwind: Vec<Vec<Upwind>>,
}

impl SteppingState {
    pub fn new(p: &ProblemData, grid: OracleGrid, dt: f64, u: DMatrix<f64>) -> Result<Self> {
        let (n, m) = (p.n(), p.m());
        let last = p.cells() - 1;
        for j in 0..n {
            let inward = if j < m { 1.0 } else { -1.0 };
            if p.a(j, 0) * inward <= 0.0 || p.a(j, last) * inward <= 0.0 {
                return Err(Error::Precondition(format!(
                    "upwind oracle needs a_{} {} 0 at both ends",
                    j + 1,
                    if j < m { ">" } else { "<" }
                )));
            }
        }
        if u.shape() != (n, grid.len()) {
            return Err(Error::ShapeMismatch("initial state".into()));
        }
        let amax = p.a_matrix().amax();
        let cfl = dt * amax / grid.min_spacing();
        if !(cfl > 0.0 && cfl <= 1.0 + 1e-12) {
            return Err(Error::CflViolation(cfl));
        }
        let nodes = grid.len();
        let upwind = (0..n)
            .map(|j| {
                (0..nodes)
                    .map(|i| {
                        let left = (i > 0).then(|| (grid.left_cell[i], grid.x[i] - grid.x[i - 1]));
                        let right = (i + 1 < nodes)
                            .then(|| (grid.left_cell[i + 1], grid.x[i + 1] - grid.x[i]));
                        match (left, right) {
                            (Some((cell, delta)), _) if p.a(j, cell) > 0.0 => Upwind::Left { cell, delta },
                            (_, Some((cell, delta))) if p.a(j, cell) < 0.0 => Upwind::Right { cell, delta },
                            (Some((cell, _)), _) | (None, Some((cell, _))) => Upwind::None { cell },
                            (None, None) => unreachable!("grid has at least two nodes"),
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            grid,
            t: 0.0,
            u,
            dt,
            cfl,
            upwind,
        })
    }

    /// Cell whose coefficients node `i` of component `j` uses.
    pub fn coefficient_cell(&self, j: usize, i: usize) -> usize {
        self.upwind[j][i].cell()
    }

    /// One explicit step with the forcing `f` (`n × nodes`) sampled at the current time.
    pub fn step(&mut self, p: &ProblemData, f: &DMatrix<f64>) -> Result<()> {
        let (n, m) = (p.n(), p.m());
        let nodes = self.grid.len();
        if f.shape() != (n, nodes) {
            return Err(Error::ShapeMismatch("forcing sample".into()));
        }
        let u = &self.u;
        let mut next = u.clone();
        for j in 0..n {
            for i in 0..nodes {
                let up = self.upwind[j][i];
                let cell = up.cell();
                let transport = match up {
                    Upwind::Left { delta, .. } => p.a(j, cell) * (u[(j, i)] - u[(j, i - 1)]) / delta,
                    Upwind::Right { delta, .. } => p.a(j, cell) * (u[(j, i + 1)] - u[(j, i)]) / delta,
                    Upwind::None { .. } => 0.0,
                };
                let coupling: f64 = (0..n).map(|k| p.b(j, k, cell) * u[(k, i)]).sum();
                next[(j, i)] = u[(j, i)] - self.dt * (transport + coupling - f[(j, i)]);
            }
        }
        let last = nodes - 1;
        for j in 0..m {
            next[(j, 0)] = (m..n).map(|k| p.r0()[(j, k - m)] * next[(k, 0)]).sum();
        }
        for j in m..n {
            next[(j, last)] = (0..m).map(|l| p.r1()[(j - m, l)] * next[(l, last)]).sum();
        }
        self.u = next;
        self.t += self.dt;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleOptions {
    pub periods: usize,
    pub samples_per_period: usize,
    pub cells: usize,
    pub cfl: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            periods: 200,
            samples_per_period: 32,
            cells: 512,
            cfl: 0.9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    pub grid: OracleGrid,
    /// Sample times within the final period, starting at 0.
    pub times: Vec<f64>,
    /// Final-period samples, each `n × nodes`.
    pub samples: Vec<DMatrix<f64>>,
    /// Per period: RMS over samples of the `L²` distance to the previous period.
    pub deviation_history: Vec<f64>,
    pub deviation: f64,
    pub dt: f64,
    pub steps_per_period: usize,
    pub cfl: f64,
}

/// Forcing modes evaluated at the oracle nodes, for each component using the
/// cell its upwind stencil reads from.
struct NodalForcing {
    /// `(s, n × nodes)` for `s ≥ 0`.
    modes: Vec<(i64, DMatrix<Complex64>)>,
}

impl NodalForcing {
    fn new(field: &FourierField, state: &SteppingState) -> Self {
        let grid = field.grid();
        let (n, nodes) = (field.n(), state.grid.len());
        let modes = (0..=field.s_max() as i64)
            .filter(|&s| field.mode(s).iter().any(|z| *z != Complex64::new(0.0, 0.0)))
            .map(|s| {
                let prof = field.mode(s);
                let m = DMatrix::from_fn(n, nodes, |j, i| {
                    interpolate_in_cell(grid, prof, j, state.coefficient_cell(j, i), state.grid.x[i])
                });
                (s, m)
            })
            .collect();
        Self { modes }
    }

    fn at(&self, t: f64, n: usize, nodes: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(n, nodes);
        for (s, m) in &self.modes {
            if *s == 0 {
                out += m.map(|z| z.re);
            } else {
                let e = Complex64::from_polar(1.0, *s as f64 * t);
                out += m.map(|z| 2.0 * (z * e).re);
            }
        }
        out
    }
}

fn interpolate_in_cell(grid: &Grid, prof: &DMatrix<Complex64>, j: usize, cell: usize, x: f64) -> Complex64 {
    let x0 = grid.partition().left(cell);
    let d = grid.spacing(cell);
    let local = ((x - x0) / d).clamp(0.0, grid.subcells(cell) as f64);
    let k = (local.floor() as usize).min(grid.subcells(cell) - 1);
    let w = local - k as f64;
    let i = grid.cell_nodes(cell).start + k;
    prof[(j, i)] * (1.0 - w) + prof[(j, i + 1)] * w
}

/// Samples a spectral field at the oracle nodes and times.
pub fn sample_spectral(field: &FourierField, grid: &OracleGrid, times: &[f64]) -> Vec<DMatrix<f64>> {
    let fg = field.grid();
    let n = field.n();
    let at_nodes: Vec<(i64, DMatrix<Complex64>)> = (0..=field.s_max() as i64)
        .map(|s| {
            let prof = field.mode(s);
            let m = DMatrix::from_fn(n, grid.len(), |j, i| {
                let cell = fg.partition().locate(grid.x[i]);
                interpolate_in_cell(fg, prof, j, cell, grid.x[i])
            });
            (s, m)
        })
        .collect();
    times
        .iter()
        .map(|&t| {
            let mut out = DMatrix::zeros(n, grid.len());
            for (s, m) in &at_nodes {
                if *s == 0 {
                    out += m.map(|z| z.re);
                } else {
                    let e = Complex64::from_polar(1.0, *s as f64 * t);
                    out += m.map(|z| 2.0 * (z * e).re);
                }
            }
            out
        })
        .collect()
}

/// RMS over samples of the `L²(0, 1)` norm.
pub fn sampled_norm(grid: &OracleGrid, samples: &[DMatrix<f64>]) -> f64 {
    let sum: f64 = samples.iter().map(|u| grid.l2(u).powi(2)).sum();
    (sum / samples.len() as f64).sqrt()
}

/// Integrates `periods` full periods from `initial` (zero if `None`).
pub fn run_to_periodic(
    p: &ProblemData,
    forcing: &FourierField,
    opts: OracleOptions,
    initial: Option<&DMatrix<f64>>,
) -> Result<OracleRun> {
    if !(opts.cfl > 0.0 && opts.cfl <= 1.0) {
        return Err(Error::CflViolation(opts.cfl));
    }
    if opts.samples_per_period == 0 || opts.periods == 0 {
        return Err(Error::Precondition("periods and samples must be positive".into()));
    }
    if forcing.n() != p.n() || forcing.grid().partition() != p.partition() {
        return Err(Error::ShapeMismatch("forcing does not match the problem".into()));
    }
    let grid = OracleGrid::new(p, opts.cells);
    let amax = p.a_matrix().amax();
    let min_steps = (2.0 * PI * amax / (opts.cfl * grid.min_spacing())).ceil() as usize;
    let spp = opts.samples_per_period;
    let steps = min_steps.div_ceil(spp).max(1) * spp;
    let dt = 2.0 * PI / steps as f64;
    let u0 = match initial {
        Some(u) => u.clone(),
        None => DMatrix::zeros(p.n(), grid.len()),
    };
    let mut state = SteppingState::new(p, grid.clone(), dt, u0)?;
    let f = NodalForcing::new(forcing, &state);
    let (n, nodes) = (p.n(), grid.len());
    let stride = steps / spp;

    let mut previous: Option<Vec<DMatrix<f64>>> = None;
    let mut history = Vec::with_capacity(opts.periods);
    let mut samples = Vec::new();
    for period in 0..opts.periods {
        samples = Vec::with_capacity(spp);
        for k in 0..steps {
            if k % stride == 0 {
                samples.push(state.u.clone());
            }
            // time measured from the start of the period keeps the phase exact
            let t = (period * steps + k) as f64 * dt;
            state.step(p, &f.at(t, n, nodes))?;
        }
        if let Some(prev) = &previous {
            let diffs: Vec<DMatrix<f64>> = samples.iter().zip(prev).map(|(a, b)| a - b).collect();
            history.push(sampled_norm(&grid, &diffs));
        }
        previous = Some(samples.clone());
    }
    let times = (0..spp).map(|k| (k * stride) as f64 * dt).collect();
    Ok(OracleRun {
        deviation: history.last().copied().unwrap_or(f64::NAN),
        grid,
        times,
        samples,
        deviation_history: history,
        dt,
        steps_per_period: steps,
        cfl: state.cfl,
    })
}

/// Relative `L²` mismatch of the final oracle period against a spectral solution.
pub fn relative_mismatch(run: &OracleRun, spectral: &FourierField) -> f64 {
    let reference = sample_spectral(spectral, &run.grid, &run.times);
    let diffs: Vec<DMatrix<f64>> = run.samples.iter().zip(&reference).map(|(a, b)| a - b).collect();
    let num = sampled_norm(&run.grid, &diffs);
    let den = sampled_norm(&run.grid, &reference);
    if den > 0.0 {
        num / den
    } else {
        num
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Partition;

    fn transport(r0: f64, r1: f64) -> ProblemData {
        ProblemData::from_cells(
            Partition::uniform(1),
            1,
            vec![vec![1.0], vec![-1.0]],
            vec![vec![vec![0.0]; 2]; 2],
            DMatrix::from_element(1, 1, r0),
            DMatrix::from_element(1, 1, r1),
        )
        .unwrap()
    }

    #[test]
    fn zero_stays_zero() {
        let p = transport(0.0, 0.0);
        let grid = OracleGrid::new(&p, 16);
        let mut st = SteppingState::new(&p, grid.clone(), 0.05, DMatrix::zeros(2, grid.len())).unwrap();
        for _ in 0..10 {
            st.step(&p, &DMatrix::zeros(2, grid.len())).unwrap();
        }
        assert_eq!(st.u.amax(), 0.0);
    }

    #[test]
    fn constant_preserved() {
        let p = transport(1.0, 1.0);
        let grid = OracleGrid::new(&p, 20);
        let mut st = SteppingState::new(&p, grid.clone(), 0.04, DMatrix::from_element(2, grid.len(), 1.5)).unwrap();
        for _ in 0..25 {
            st.step(&p, &DMatrix::zeros(2, grid.len())).unwrap();
        }
        assert!((st.u.add_scalar(-1.5)).amax() < 1e-14);
    }

    #[test]
    fn unit_cfl_shifts_one_cell() {
        let p = transport(0.0, 0.0);
        let grid = OracleGrid::new(&p, 10);
        let u0 = DMatrix::from_fn(2, grid.len(), |j, i| if j == 0 && i == 3 { 1.0 } else { 0.0 });
        let mut st = SteppingState::new(&p, grid.clone(), 0.1, u0).unwrap();
        st.step(&p, &DMatrix::zeros(2, grid.len())).unwrap();
        for i in 0..grid.len() {
            assert!((st.u[(0, i)] - if i == 4 { 1.0 } else { 0.0 }).abs() < 1e-15);
        }
    }

    #[test]
    fn cfl_checked() {
        let p = transport(0.0, 0.0);
        let grid = OracleGrid::new(&p, 10);
        let err = SteppingState::new(&p, grid.clone(), 0.2, DMatrix::zeros(2, grid.len())).unwrap_err();
        assert!(matches!(err, Error::CflViolation(_)));
        let f = FourierField::zeros(Grid::uniform(p.partition().clone(), 4), 2, 1);
        let opts = OracleOptions { cfl: 1.5, ..OracleOptions::default() };
        assert!(matches!(run_to_periodic(&p, &f, opts, None), Err(Error::CflViolation(_))));
    }

    #[test]
    fn reflection_cycle_energy_nonincreasing() {
        let p = transport(0.8, -0.6);
        let grid = OracleGrid::new(&p, 64);
        let x = grid.x.clone();
        let u0 = DMatrix::from_fn(2, grid.len(), |j, i| {
            let s = (PI * x[i]).sin();
            if j == 0 { s * s } else { 0.5 * s }
        });
        let mut st = SteppingState::new(&p, grid.clone(), 1.0 / 64.0, u0).unwrap();
        let mut energy = grid.l2(&st.u);
        // one reflection cycle is a round trip of length 2 at unit speed
        for _ in 0..6 {
            for _ in 0..128 {
                st.step(&p, &DMatrix::zeros(2, grid.len())).unwrap();
            }
            let e = grid.l2(&st.u);
            assert!(e <= energy * (1.0 + 1e-12));
            energy = e;
        }
    }
}
