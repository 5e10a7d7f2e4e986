//! Spatial grids, truncated Fourier-mode families and the weighted norms.
//!
//! Stored coefficients follow `u^s(x) = (1/2π) ∫_0^{2π} u(x, t) e^{-ist} dt`,
//! so `u(x, t) = Σ_s u^s(x) e^{ist}`. Profiles are piecewise linear between
//! grid nodes; every partition cell carries its own run of nodes, so a
//! profile may jump at a breakpoint.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::problem::{Partition, ProblemData};

/// Uniform subdivision of each partition cell. Node storage is per cell:
/// cell `c` owns `subcells[c] + 1` nodes, and adjacent cells both store
/// their shared breakpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    partition: Partition,
    subcells: Vec<usize>,
    offsets: Vec<usize>,
}

/// How finely [`Grid::for_problem`] resolves oscillation and damping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridOptions {
    /// Largest phase change `|s| δ / |a_j| + |b_jk| δ / |a_j|` allowed across one subcell.
    pub phase_step: f64,
    pub min_subcells: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        Self {
            phase_step: 0.005,
            min_subcells: 64,
        }
    }
}

impl Grid {
    pub fn new(partition: Partition, subcells: Vec<usize>) -> Result<Self> {
        if subcells.len() != partition.cells() {
            return Err(Error::ShapeMismatch(format!(
                "{} subcell counts for {} cells",
                subcells.len(),
                partition.cells()
            )));
        }
        if let Some(c) = subcells.iter().position(|&r| r == 0) {
            return Err(Error::TooFewSubnodes { cell: c, have: 0, need: 1 });
        }
        let mut offsets = Vec::with_capacity(subcells.len() + 1);
        let mut acc = 0;
        for &r in &subcells {
            offsets.push(acc);
            acc += r + 1;
        }
        offsets.push(acc);
        Ok(Self {
            partition,
            subcells,
            offsets,
        })
    }

    pub fn uniform(partition: Partition, subcells: usize) -> Self {
        let cells = partition.cells();
        Self::new(partition, vec![subcells.max(1); cells]).unwrap()
    }

    /// Nodes only at the breakpoints.
    pub fn breakpoints(partition: Partition) -> Self {
        Self::uniform(partition, 1)
    }

    /// Subcell counts large enough that modes up to `s_max` change phase by at most
    /// `opts.phase_step` per subcell.
    pub fn for_problem(p: &ProblemData, s_max: usize, opts: GridOptions) -> Self {
        let part = p.partition().clone();
        let subcells = (0..p.cells())
            .map(|c| {
                let h = part.width(c);
                let rate = (0..p.n())
                    .map(|j| {
                        let coupling: f64 = (0..p.n()).map(|k| p.b(j, k, c).abs()).sum();
                        (s_max as f64 + coupling) / p.a(j, c).abs()
                    })
                    .fold(0.0, f64::max);
                let need = (rate * h / opts.phase_step).ceil() as usize;
                need.max(opts.min_subcells).max(1)
            })
            .collect();
        Self::new(part, subcells).unwrap()
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn subcells(&self, cell: usize) -> usize {
        self.subcells[cell]
    }

    pub fn subcell_counts(&self) -> &[usize] {
        &self.subcells
    }

    pub fn len(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Index range of the nodes owned by `cell`.
    pub fn cell_nodes(&self, cell: usize) -> std::ops::Range<usize> {
        self.offsets[cell]..self.offsets[cell + 1]
    }

    pub fn spacing(&self, cell: usize) -> f64 {
        self.partition.width(cell) / self.subcells[cell] as f64
    }

    /// Node positions, with breakpoints repeated once per adjacent cell.
    pub fn nodes(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        for c in 0..self.partition.cells() {
            let x0 = self.partition.left(c);
            let r = self.subcells[c];
            for k in 0..=r {
                x.push(if k == r {
                    self.partition.breakpoints()[c + 1]
                } else {
                    x0 + self.spacing(c) * k as f64
                });
            }
        }
        x
    }

    pub fn first(&self) -> usize {
        0
    }

    pub fn last(&self) -> usize {
        self.len() - 1
    }

    /// Linear interpolation of per-node values at `x`, using the cell `x` belongs to.
    pub fn interpolate(&self, values: &[Complex64], x: f64) -> Complex64 {
        let c = self.partition.locate(x);
        let delta = self.spacing(c);
        let local = ((x - self.partition.left(c)) / delta).max(0.0);
        let k = (local.floor() as usize).min(self.subcells[c] - 1);
        let w = local - k as f64;
        let i = self.offsets[c] + k;
        values[i] * (1.0 - w) + values[i + 1] * w
    }

    /// Re-expresses profiles stored on `self` on another grid over the same partition.
    pub fn resample(&self, profile: &CMat, target: &Grid) -> CMat {
        assert_eq!(self.partition, target.partition, "grids on different partitions");
        let mut out = CMat::zeros(profile.nrows(), target.len());
        for c in 0..target.partition.cells() {
            let (r_src, r_dst) = (self.subcells[c], target.subcells[c]);
            for (k, i) in target.cell_nodes(c).enumerate() {
                let local = k as f64 * r_src as f64 / r_dst as f64;
                let kk = (local.floor() as usize).min(r_src - 1);
                let w = (local - kk as f64).clamp(0.0, 1.0);
                let src = self.offsets[c] + kk;
                for j in 0..profile.nrows() {
                    out[(j, i)] = profile[(j, src)] * (1.0 - w) + profile[(j, src + 1)] * w;
                }
            }
        }
        out
    }

    /// Nodal quadrature weights of one cell: composite Simpson, closed by the
    /// 3/8 rule on the last three subcells when the count is odd. A single
    /// subcell falls back to the trapezoid rule.
    fn cell_weights(&self, cell: usize) -> Vec<f64> {
        let r = self.subcells(cell);
        let d = self.spacing(cell);
        let mut w = vec![0.0; r + 1];
        if r == 1 {
            w[0] = d / 2.0;
            w[1] = d / 2.0;
            return w;
        }
        let simpson = if r % 2 == 0 { r } else { r - 3 };
        for k in (0..simpson).step_by(2) {
            w[k] += d / 3.0;
            w[k + 1] += 4.0 * d / 3.0;
            w[k + 2] += d / 3.0;
        }
        if simpson < r {
            for (k, c) in [1.0, 3.0, 3.0, 1.0].iter().enumerate() {
                w[simpson + k] += 3.0 * d / 8.0 * c;
            }
        }
        w
    }

    /// `∫_0^1 f ḡ dx`, fourth order; exact for profiles affine on each cell.
    pub fn integrate_product(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        let mut sum = Complex64::new(0.0, 0.0);
        for c in 0..self.partition.cells() {
            let range = self.cell_nodes(c);
            if self.subcells(c) == 1 {
                // exact for the linear interpolant
                let i = range.start;
                let (f0, f1, g0, g1) = (f[i], f[i + 1], g[i].conj(), g[i + 1].conj());
                sum += (f0 * g0 * 2.0 + f0 * g1 + f1 * g0 + f1 * g1 * 2.0) * (self.spacing(c) / 6.0);
                continue;
            }
            for (w, i) in self.cell_weights(c).into_iter().zip(range) {
                sum += f[i] * g[i].conj() * w;
            }
        }
        sum
    }

    /// `∫_0^1 |f|² dx` with the same rule as [`Grid::integrate_product`].
    pub fn integrate_sq(&self, f: &[Complex64]) -> f64 {
        self.integrate_product(f, f).re
    }

    /// `∫_0^1 Σ_j f_j ḡ_j dx` over component rows.
    pub fn profile_inner(&self, f: &CMat, g: &CMat) -> Complex64 {
        (0..f.nrows())
            .map(|j| {
                let fr: Vec<Complex64> = f.row(j).iter().copied().collect();
                let gr: Vec<Complex64> = g.row(j).iter().copied().collect();
                self.integrate_product(&fr, &gr)
            })
            .sum()
    }

    /// `(∫_0^1 Σ_j |f_j|² dx)^{1/2}`.
    pub fn profile_norm(&self, f: &CMat) -> f64 {
        (0..f.nrows())
            .map(|j| {
                let fr: Vec<Complex64> = f.row(j).iter().copied().collect();
                self.integrate_sq(&fr)
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Modes `−S..=S` of an n-component field; `modes[s + S]` is `n × nodes`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierField {
    grid: Grid,
    n: usize,
    s_max: usize,
    modes: Vec<CMat>,
}

impl FourierField {
    pub fn zeros(grid: Grid, n: usize, s_max: usize) -> Self {
        let modes = (0..2 * s_max + 1)
            .map(|_| CMat::zeros(n, grid.len()))
            .collect();
        Self {
            grid,
            n,
            s_max,
            modes,
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn s_max(&self) -> usize {
        self.s_max
    }

    pub fn mode(&self, s: i64) -> &CMat {
        &self.modes[self.index(s)]
    }

    pub fn mode_mut(&mut self, s: i64) -> &mut CMat {
        let i = self.index(s);
        &mut self.modes[i]
    }

    /// Sets mode `s` and its conjugate mirror `−s`. At `s = 0` the real part is kept.
    pub fn set_mode(&mut self, s: i64, profile: CMat) {
        assert_eq!(profile.shape(), (self.n, self.grid.len()));
        if s == 0 {
            *self.mode_mut(0) = profile.map(|z| Complex64::new(z.re, 0.0));
        } else {
            *self.mode_mut(-s) = profile.map(|z| z.conj());
            *self.mode_mut(s) = profile;
        }
    }

    fn index(&self, s: i64) -> usize {
        assert!(
            s.unsigned_abs() as usize <= self.s_max,
            "mode {s} outside truncation {}",
            self.s_max
        );
        (s + self.s_max as i64) as usize
    }

    pub fn mode_indices(&self) -> impl Iterator<Item = i64> {
        let s = self.s_max as i64;
        -s..=s
    }

    /// Largest `|u^{−s} − conj(u^s)|` over modes and nodes.
    pub fn hermitian_defect(&self) -> (i64, f64) {
        let mut worst = (0, 0.0);
        for s in 0..=self.s_max as i64 {
            let d = self
                .mode(s)
                .iter()
                .zip(self.mode(-s).iter())
                .map(|(a, b)| (a.conj() - b).norm())
                .fold(0.0, f64::max);
            if d > worst.1 {
                worst = (s, d);
            }
        }
        worst
    }

    pub fn check_hermitian(&self) -> Result<()> {
        let scale = self
            .modes
            .iter()
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        let (s, d) = self.hermitian_defect();
        if d > 1e-12 * scale.max(1.0) {
            return Err(Error::NotHermitian { s, defect: d });
        }
        Ok(())
    }

    pub fn scaled(&self, k: f64) -> Self {
        let mut out = self.clone();
        for m in &mut out.modes {
            *m *= Complex64::new(k, 0.0);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.modes.iter_mut().zip(&other.modes) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scaled(-1.0))
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.n != other.n || self.s_max != other.s_max || self.grid != other.grid {
            return Err(Error::ShapeMismatch(
                "fields differ in components, truncation or grid".into(),
            ));
        }
        Ok(())
    }

    /// Same field on another grid over the same partition.
    pub fn resampled(&self, target: &Grid) -> Self {
        let modes = self
            .modes
            .iter()
            .map(|m| self.grid.resample(m, target))
            .collect();
        Self {
            grid: target.clone(),
            n: self.n,
            s_max: self.s_max,
            modes,
        }
    }

    /// Same grid with truncation raised or lowered to `s_max`.
    pub fn retruncated(&self, s_max: usize) -> Self {
        let mut out = Self::zeros(self.grid.clone(), self.n, s_max);
        let keep = s_max.min(self.s_max) as i64;
        for s in -keep..=keep {
            *out.mode_mut(s) = self.mode(s).clone();
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.modes
            .iter()
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Real samples `values[k]` (`n × nodes`) at equispaced times `t_k = 2πk/T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledField {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub values: Vec<DMatrix<f64>>,
}

pub fn period_times(samples: usize) -> Vec<f64> {
    (0..samples)
        .map(|k| 2.0 * PI * k as f64 / samples as f64)
        .collect()
}

/// Temporal DFT at each node, normalized to the stored convention.
pub fn analyze(samples: &SampledField, s_max: usize) -> Result<FourierField> {
    let t = samples.values.len();
    if t < 2 * s_max + 1 {
        return Err(Error::Aliasing {
            samples: t,
            s_max,
            needed: 2 * s_max + 1,
        });
    }
    let (n, nodes) = samples.values[0].shape();
    if nodes != samples.grid.len() || samples.values.iter().any(|v| v.shape() != (n, nodes)) {
        return Err(Error::ShapeMismatch("sample arrays do not match the grid".into()));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(t);
    let mut out = FourierField::zeros(samples.grid.clone(), n, s_max);
    let mut buf = vec![Complex64::new(0.0, 0.0); t];
    let scale = 1.0 / t as f64;
    for j in 0..n {
        for i in 0..nodes {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = Complex64::new(samples.values[k][(j, i)], 0.0);
            }
            fft.process(&mut buf);
            for s in -(s_max as i64)..=s_max as i64 {
                let idx = s.rem_euclid(t as i64) as usize;
                out.mode_mut(s)[(j, i)] = buf[idx] * scale;
            }
        }
    }
    Ok(out)
}

/// Real field `Σ_s u^s(x) e^{ist}` at the requested times.
pub fn synthesize(field: &FourierField, times: &[f64]) -> Result<SampledField> {
    field.check_hermitian()?;
    let (n, nodes) = (field.n(), field.grid().len());
    let values = times
        .iter()
        .map(|&t| {
            let mut v = field.mode(0).map(|z| z.re);
            for s in 1..=field.s_max() as i64 {
                let e = Complex64::from_polar(1.0, s as f64 * t);
                let m = field.mode(s);
                for j in 0..n {
                    for i in 0..nodes {
                        v[(j, i)] += 2.0 * (m[(j, i)] * e).re;
                    }
                }
            }
            v
        })
        .collect();
    Ok(SampledField {
        grid: field.grid().clone(),
        times: times.to_vec(),
        values,
    })
}

/// Per-mode `∫_0^1 ‖u^s‖² dx`, indexed by `s + S`.
pub fn mode_energies(field: &FourierField) -> Vec<f64> {
    field
        .mode_indices()
        .map(|s| field.grid().profile_norm(field.mode(s)).powi(2))
        .collect()
}

/// `sqrt(4π² Σ_s (1+s²)^γ ∫_0^1 ‖u^s‖² dx)`.
pub fn w_norm(field: &FourierField, gamma: f64) -> f64 {
    let energies = mode_energies(field);
    let sum: f64 = field
        .mode_indices()
        .zip(energies)
        .map(|(s, e)| (1.0 + (s * s) as f64).powf(gamma) * e)
        .sum();
    (4.0 * PI * PI * sum).sqrt()
}
