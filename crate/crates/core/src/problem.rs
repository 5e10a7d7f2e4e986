//! Problem data for the periodic-reflection problem
//!
//! ```text
//! ∂_t u_j + a_j(x) ∂_x u_j + Σ_k b_jk(x) u_k = f_j(x, t),   x ∈ (0, 1)
//! u(x, t + 2π) = u(x, t)
//! u_j(0, t) = Σ_{k>m} r0_jk u_k(0, t),  j ≤ m
//! u_j(1, t) = Σ_{k≤m} r1_jk u_k(1, t),  j > m
//! ```
//!
//! Coefficients are piecewise constant on one shared [`Partition`], so the
//! phase functions `α_j = ∫ 1/a_j` and `β_j = ∫ b_jj/a_j` are exact
//! continuous piecewise-linear functions. Components are indexed from zero in
//! code: `0..m` are prescribed at `x = 0`, `m..n` at `x = 1`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Ordered breakpoints `0 = x_0 < x_1 < … < x_N = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    breakpoints: Vec<f64>,
}

impl Partition {
    pub fn new(breakpoints: Vec<f64>) -> Result<Self> {
        if breakpoints.len() < 2 {
            return Err(Error::InvalidPartition(
                "breakpoints: need at least two entries".into(),
            ));
        }
        if breakpoints[0] != 0.0 {
            return Err(Error::InvalidPartition(
                "breakpoints: first entry must be 0".into(),
            ));
        }
        if *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::InvalidPartition(
                "breakpoints: last entry must be 1".into(),
            ));
        }
        if let Some(i) = breakpoints.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidPartition(format!(
                "breakpoints: not strictly increasing at index {}",
                i + 1
            )));
        }
        Ok(Self { breakpoints })
    }

    pub fn uniform(cells: usize) -> Self {
        assert!(cells >= 1);
        let mut breakpoints: Vec<f64> = (0..=cells).map(|i| i as f64 / cells as f64).collect();
        breakpoints[cells] = 1.0;
        Self { breakpoints }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn cells(&self) -> usize {
        self.breakpoints.len() - 1
    }

    pub fn left(&self, cell: usize) -> f64 {
        self.breakpoints[cell]
    }

    pub fn width(&self, cell: usize) -> f64 {
        self.breakpoints[cell + 1] - self.breakpoints[cell]
    }

    /// Cell containing `x`; breakpoints belong to the cell on their right
    /// except `x = 1`.
    pub fn locate(&self, x: f64) -> usize {
        let n = self.cells();
        match self
            .breakpoints
            .binary_search_by(|b| b.partial_cmp(&x).expect("NaN position"))
        {
            Ok(i) => i.min(n - 1),
            Err(i) => i.saturating_sub(1).min(n - 1),
        }
    }

    /// Splits every cell into `factor` equal pieces.
    pub fn refine(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        let mut breakpoints = Vec::with_capacity(self.cells() * factor + 1);
        for c in 0..self.cells() {
            let (x0, h) = (self.left(c), self.width(c));
            for k in 0..factor {
                breakpoints.push(x0 + h * k as f64 / factor as f64);
            }
        }
        breakpoints.push(1.0);
        Self { breakpoints }
    }
}

/// A function that is constant on each cell of a [`Partition`].
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstantFn {
    partition: Partition,
    values: Vec<f64>,
}

impl PiecewiseConstantFn {
    pub fn new(partition: Partition, values: Vec<f64>) -> Result<Self> {
        if values.len() != partition.cells() {
            return Err(Error::ShapeMismatch(format!(
                "{} values for {} cells",
                values.len(),
                partition.cells()
            )));
        }
        Ok(Self { partition, values })
    }

    pub fn constant(partition: Partition, value: f64) -> Self {
        let values = vec![value; partition.cells()];
        Self { partition, values }
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.partition.locate(x)]
    }

    pub fn integral(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(c, v)| v * self.partition.width(c))
            .sum()
    }
}

/// Coefficients of the correlated random walk the problem was mapped from.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomWalk {
    pub a_plus: Vec<f64>,
    pub a_minus: Vec<f64>,
    pub mu_plus: Vec<f64>,
    pub mu_minus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemData {
    partition: Partition,
    n: usize,
    m: usize,
    /// `a[(j, c)]`: speed of component `j` on cell `c`.
    a: DMatrix<f64>,
    /// `b[c]`: the full coupling matrix on cell `c`.
    b: Vec<DMatrix<f64>>,
    r0: DMatrix<f64>,
    r1: DMatrix<f64>,
    random_walk: Option<RandomWalk>,
}

impl ProblemData {
    /// Builds problem data from per-cell values: `a[j][c]`, `b[j][k][c]`.
    pub fn from_cells(
        partition: Partition,
        m: usize,
        a: Vec<Vec<f64>>,
        b: Vec<Vec<Vec<f64>>>,
        r0: DMatrix<f64>,
        r1: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.len();
        let cells = partition.cells();
        if n < 2 || m < 1 || m >= n {
            return Err(Error::InvalidProblem(format!(
                "need 1 <= m < n, got m = {m}, n = {n}"
            )));
        }
        for (j, row) in a.iter().enumerate() {
            if row.len() != cells {
                return Err(Error::ShapeMismatch(format!(
                    "a[{j}] has {} values for {cells} cells",
                    row.len()
                )));
            }
        }
        if b.len() != n || b.iter().any(|row| row.len() != n) {
            return Err(Error::ShapeMismatch(format!("b must be {n}x{n}")));
        }
        for (j, row) in b.iter().enumerate() {
            for (k, vals) in row.iter().enumerate() {
                if vals.len() != cells {
                    return Err(Error::ShapeMismatch(format!(
                        "b[{j}][{k}] has {} values for {cells} cells",
                        vals.len()
                    )));
                }
            }
        }
        let a_mat = DMatrix::from_fn(n, cells, |j, c| a[j][c]);
        let b_cells = (0..cells)
            .map(|c| DMatrix::from_fn(n, n, |j, k| b[j][k][c]))
            .collect();
        Self::from_matrices(partition, m, a_mat, b_cells, r0, r1)
    }

    /// Builds problem data from piecewise-constant functions sharing one partition.
    pub fn new(
        m: usize,
        a: Vec<PiecewiseConstantFn>,
        b: Vec<Vec<PiecewiseConstantFn>>,
        r0: DMatrix<f64>,
        r1: DMatrix<f64>,
    ) -> Result<Self> {
        let partition = a
            .first()
            .ok_or_else(|| Error::InvalidProblem("no components".into()))?
            .partition()
            .clone();
        let shared = a.iter().all(|f| f.partition() == &partition)
            && b.iter().flatten().all(|f| f.partition() == &partition);
        if !shared {
            return Err(Error::InvalidProblem(
                "all coefficients must share one partition".into(),
            ));
        }
        let a_vals = a.iter().map(|f| f.values().to_vec()).collect();
        let b_vals = b
            .iter()
            .map(|row| row.iter().map(|f| f.values().to_vec()).collect())
            .collect();
        Self::from_cells(partition, m, a_vals, b_vals, r0, r1)
    }

    pub(crate) fn from_matrices(
        partition: Partition,
        m: usize,
        a: DMatrix<f64>,
        b: Vec<DMatrix<f64>>,
        r0: DMatrix<f64>,
        r1: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if r0.shape() != (m, n - m) {
            return Err(Error::ShapeMismatch(format!(
                "r0 must be {m}x{}, got {}x{}",
                n - m,
                r0.nrows(),
                r0.ncols()
            )));
        }
        if r1.shape() != (n - m, m) {
            return Err(Error::ShapeMismatch(format!(
                "r1 must be {}x{m}, got {}x{}",
                n - m,
                r1.nrows(),
                r1.ncols()
            )));
        }
        for c in 0..partition.cells() {
            for j in 0..n {
                let v = a[(j, c)];
                if v == 0.0 || !v.is_finite() {
                    return Err(Error::ZeroSpeed { component: j, cell: c });
                }
            }
        }
        let finite = b.iter().all(|bc| bc.iter().all(|v| v.is_finite()))
            && r0.iter().chain(r1.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidProblem("non-finite coefficient".into()));
        }
        Ok(Self {
            partition,
            n,
            m,
            a,
            b,
            r0,
            r1,
            random_walk: None,
        })
    }

    /// Maps the correlated random walk
    /// `∂_t u± ± ∂_x(a± u±) = ∓(μ+ u+ − μ− u−)` with zero-flux ends onto
    /// the reflection problem (n = 2, m = 1). For piecewise-constant speeds
    /// the `∂_x a±` terms vanish almost everywhere and are dropped.
    pub fn from_random_walk(
        a_plus: &PiecewiseConstantFn,
        a_minus: &PiecewiseConstantFn,
        mu_plus: &PiecewiseConstantFn,
        mu_minus: &PiecewiseConstantFn,
    ) -> Result<Self> {
        let partition = a_plus.partition().clone();
        if [a_minus, mu_plus, mu_minus]
            .iter()
            .any(|f| f.partition() != &partition)
        {
            return Err(Error::InvalidProblem(
                "random-walk coefficients must share one partition".into(),
            ));
        }
        for (name, f) in [("a_plus", a_plus), ("a_minus", a_minus)] {
            if let Some(c) = f.values().iter().position(|&v| !(v > 0.0)) {
                return Err(Error::InvalidProblem(format!(
                    "{name} must be positive, cell {c} has {}",
                    f.values()[c]
                )));
            }
        }
        let cells = partition.cells();
        let ap = a_plus.values();
        let am = a_minus.values();
        let mp = mu_plus.values();
        let mm = mu_minus.values();
        let a = DMatrix::from_fn(2, cells, |j, c| if j == 0 { ap[c] } else { -am[c] });
        let b = (0..cells)
            .map(|c| DMatrix::from_row_slice(2, 2, &[mp[c], -mm[c], -mp[c], mm[c]]))
            .collect();
        let r0 = DMatrix::from_element(1, 1, am[0] / ap[0]);
        let r1 = DMatrix::from_element(1, 1, ap[cells - 1] / am[cells - 1]);
        let mut p = Self::from_matrices(partition, 1, a, b, r0, r1)?;
        p.random_walk = Some(RandomWalk {
            a_plus: ap.to_vec(),
            a_minus: am.to_vec(),
            mu_plus: mp.to_vec(),
            mu_minus: mm.to_vec(),
        });
        Ok(p)
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cells(&self) -> usize {
        self.partition.cells()
    }

    pub fn a(&self, j: usize, cell: usize) -> f64 {
        self.a[(j, cell)]
    }

    pub fn b(&self, j: usize, k: usize, cell: usize) -> f64 {
        self.b[cell][(j, k)]
    }

    /// Speeds as an `n × cells` matrix.
    pub fn a_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b_cell(&self, cell: usize) -> &DMatrix<f64> {
        &self.b[cell]
    }

    pub fn b_cells(&self) -> &[DMatrix<f64>] {
        &self.b
    }

    pub fn r0(&self) -> &DMatrix<f64> {
        &self.r0
    }

    pub fn r1(&self) -> &DMatrix<f64> {
        &self.r1
    }

    pub fn random_walk(&self) -> Option<&RandomWalk> {
        self.random_walk.as_ref()
    }

    pub fn a_fn(&self, j: usize) -> PiecewiseConstantFn {
        let values = (0..self.cells()).map(|c| self.a[(j, c)]).collect();
        PiecewiseConstantFn {
            partition: self.partition.clone(),
            values,
        }
    }

    pub fn b_fn(&self, j: usize, k: usize) -> PiecewiseConstantFn {
        let values = (0..self.cells()).map(|c| self.b[c][(j, k)]).collect();
        PiecewiseConstantFn {
            partition: self.partition.clone(),
            values,
        }
    }

    /// True when every cell has `a_j > 0` for `j < m` and `a_j < 0` otherwise.
    pub fn has_conventional_signs(&self) -> bool {
        (0..self.cells()).all(|c| {
            (0..self.n).all(|j| {
                if j < self.m {
                    self.a[(j, c)] > 0.0
                } else {
                    self.a[(j, c)] < 0.0
                }
            })
        })
    }

    /// True when each speed is the same constant on every cell.
    pub fn has_constant_speeds(&self) -> bool {
        (0..self.n).all(|j| (1..self.cells()).all(|c| self.a[(j, c)] == self.a[(j, 0)]))
    }

    /// Same problem with coupling replaced by `b`.
    pub fn with_b(&self, b: Vec<DMatrix<f64>>) -> Result<Self> {
        if b.len() != self.cells() || b.iter().any(|bc| bc.shape() != (self.n, self.n)) {
            return Err(Error::ShapeMismatch("coupling matrices".into()));
        }
        let mut p = self.clone();
        p.b = b;
        p.random_walk = None;
        Ok(p)
    }

    /// Same problem with speeds replaced by `a` (`n × cells`).
    pub fn with_a(&self, a: DMatrix<f64>) -> Result<Self> {
        if a.shape() != self.a.shape() {
            return Err(Error::ShapeMismatch("speed matrix".into()));
        }
        let p = Self::from_matrices(
            self.partition.clone(),
            self.m,
            a,
            self.b.clone(),
            self.r0.clone(),
            self.r1.clone(),
        )?;
        Ok(p)
    }

    /// The off-diagonal coupling `b¹ = b − diag(b)` on each cell.
    pub fn off_diagonal(&self) -> Vec<DMatrix<f64>> {
        self.b
            .iter()
            .map(|bc| {
                let mut o = bc.clone();
                o.fill_diagonal(0.0);
                o
            })
            .collect()
    }

    /// `b⁰ + τ b¹`.
    pub fn with_scaled_coupling(&self, tau: f64) -> Self {
        let b = self
            .b
            .iter()
            .map(|bc| {
                DMatrix::from_fn(self.n, self.n, |j, k| {
                    if j == k {
                        bc[(j, k)]
                    } else {
                        tau * bc[(j, k)]
                    }
                })
            })
            .collect();
        let mut p = self.clone();
        p.b = b;
        p.random_walk = None;
        p
    }

    /// Same data on `partition.refine(factor)`.
    pub fn refined(&self, factor: usize) -> Self {
        let partition = self.partition.refine(factor);
        let cells = partition.cells();
        let a = DMatrix::from_fn(self.n, cells, |j, c| self.a[(j, c / factor)]);
        let b = (0..cells).map(|c| self.b[c / factor].clone()).collect();
        let random_walk = self.random_walk.as_ref().map(|rw| {
            let expand = |v: &[f64]| (0..cells).map(|c| v[c / factor]).collect();
            RandomWalk {
                a_plus: expand(&rw.a_plus),
                a_minus: expand(&rw.a_minus),
                mu_plus: expand(&rw.mu_plus),
                mu_minus: expand(&rw.mu_minus),
            }
        });
        Self {
            partition,
            n: self.n,
            m: self.m,
            a,
            b,
            r0: self.r0.clone(),
            r1: self.r1.clone(),
            random_walk,
        }
    }
}

/// Phase functions `α_j(x) = ∫_0^x 1/a_j` and `β_j(x) = ∫_0^x b_jj/a_j`,
/// stored as node values on the partition breakpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseData {
    partition: Partition,
    alpha: Vec<Vec<f64>>,
    beta: Vec<Vec<f64>>,
    alpha_slope: Vec<Vec<f64>>,
    beta_slope: Vec<Vec<f64>>,
}

impl PhaseData {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Node values of `α_j` on the breakpoints.
    pub fn alpha_nodes(&self, j: usize) -> &[f64] {
        &self.alpha[j]
    }

    pub fn beta_nodes(&self, j: usize) -> &[f64] {
        &self.beta[j]
    }

    pub fn alpha_slope(&self, j: usize, cell: usize) -> f64 {
        self.alpha_slope[j][cell]
    }

    pub fn beta_slope(&self, j: usize, cell: usize) -> f64 {
        self.beta_slope[j][cell]
    }

    pub fn alpha(&self, j: usize, x: f64) -> f64 {
        let c = self.partition.locate(x);
        self.alpha[j][c] + self.alpha_slope[j][c] * (x - self.partition.left(c))
    }

    pub fn beta(&self, j: usize, x: f64) -> f64 {
        let c = self.partition.locate(x);
        self.beta[j][c] + self.beta_slope[j][c] * (x - self.partition.left(c))
    }

    pub fn alpha_end(&self, j: usize) -> f64 {
        *self.alpha[j].last().unwrap()
    }

    pub fn beta_end(&self, j: usize) -> f64 {
        *self.beta[j].last().unwrap()
    }
}

/// Exact piecewise-linear antiderivatives of `1/a_j` and `b_jj/a_j`.
pub fn compute_phases(p: &ProblemData) -> PhaseData {
    let cells = p.cells();
    let mut alpha = vec![vec![0.0; cells + 1]; p.n()];
    let mut beta = vec![vec![0.0; cells + 1]; p.n()];
    let mut alpha_slope = vec![vec![0.0; cells]; p.n()];
    let mut beta_slope = vec![vec![0.0; cells]; p.n()];
    for j in 0..p.n() {
        for c in 0..cells {
            let h = p.partition().width(c);
            let a = p.a(j, c);
            alpha_slope[j][c] = 1.0 / a;
            beta_slope[j][c] = p.b(j, j, c) / a;
            alpha[j][c + 1] = alpha[j][c] + h / a;
            beta[j][c + 1] = beta[j][c] + h * p.b(j, j, c) / a;
        }
    }
    PhaseData {
        partition: p.partition().clone(),
        alpha,
        beta,
        alpha_slope,
        beta_slope,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStatus {
    Pass,
    /// Some cell has `a_j = a_k` and `b_jk = 0`; the factor `c_jk` is not unique there.
    PassDegenerate,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairVerdict {
    pub j: usize,
    pub k: usize,
    pub status: PairStatus,
    pub failing_cells: Vec<usize>,
    pub degenerate_cells: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpeedMargin {
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientBound {
    pub sum: f64,
    pub threshold: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReflectionSize {
    pub r0_squared_sum: f64,
    pub r1_squared_sum: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UniformBound {
    pub value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dissipativity {
    /// Per component: ess inf of `±b_jj/a_j − Σ_{k≠j}(|b_jk/a_j| + |b_jk/a_k|)`.
    pub margins: Vec<f64>,
    pub pass: bool,
    /// `min_{j, cells} b_jj`.
    pub min_diagonal_damping: f64,
}

/// Verdicts for the structural conditions; failing conditions are verdicts,
/// not errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub n: usize,
    pub m: usize,
    pub cells: usize,
    pub ge: SpeedMargin,
    pub le: CoefficientBound,
    pub pairs: Vec<PairVerdict>,
    pub kleinr: ReflectionSize,
    pub condunif: UniformBound,
    pub coef2: Dissipativity,
    pub ne_integral: Option<f64>,
    pub conventional_signs: bool,
    pub constant_speeds: bool,
    pub warnings: Vec<String>,
    pub hard_checks_pass: bool,
}

impl ConditionReport {
    pub fn pairs_pass(&self) -> bool {
        self.pairs.iter().all(|p| p.status != PairStatus::Fail)
    }
}

/// Left-hand side of the uniform sufficient condition
/// `Σ_{j,k>m} Σ_{l≤m} e^{2(β_j(1) − β_l(1))} |r1_jl r0_lk|²`.
pub fn condunif_value(p: &ProblemData, phases: &PhaseData) -> f64 {
    let (n, m) = (p.n(), p.m());
    let mut sum = 0.0;
    for j in m..n {
        for k in m..n {
            for l in 0..m {
                let prod = p.r1()[(j - m, l)] * p.r0()[(l, k - m)];
                sum += (2.0 * (phases.beta_end(j) - phases.beta_end(l))).exp() * prod * prod;
            }
        }
    }
    sum
}

/// Evaluates every condition. `le_threshold` turns the raw coefficient sum
/// into a verdict; `None` only reports it.
pub fn validate(p: &ProblemData, le_threshold: Option<f64>) -> ConditionReport {
    let (n, m, cells) = (p.n(), p.m(), p.cells());
    let phases = compute_phases(p);

    let margin = (0..n)
        .flat_map(|j| (0..cells).map(move |c| (j, c)))
        .map(|(j, c)| p.a(j, c).abs())
        .fold(f64::INFINITY, f64::min);
    let ge = SpeedMargin {
        margin,
        pass: margin > 0.0,
    };

    let diag_sup: f64 = (0..n)
        .map(|j| (0..cells).map(|c| p.b(j, j, c).abs()).fold(0.0, f64::max))
        .sum();
    let r_abs: f64 = p.r0().iter().chain(p.r1().iter()).map(|v| v.abs()).sum();
    let le_sum = diag_sup + r_abs;
    let le = CoefficientBound {
        sum: le_sum,
        threshold: le_threshold,
        pass: le_threshold.map(|t| le_sum <= t),
    };

    let mut pairs = Vec::new();
    for j in 0..n {
        for k in 0..n {
            if j == k {
                continue;
            }
            let mut failing_cells = Vec::new();
            let mut degenerate_cells = Vec::new();
            for c in 0..cells {
                if p.a(j, c) == p.a(k, c) {
                    if p.b(j, k, c) != 0.0 {
                        failing_cells.push(c);
                    } else {
                        degenerate_cells.push(c);
                    }
                }
            }
            let status = if !failing_cells.is_empty() {
                PairStatus::Fail
            } else if !degenerate_cells.is_empty() {
                PairStatus::PassDegenerate
            } else {
                PairStatus::Pass
            };
            pairs.push(PairVerdict {
                j,
                k,
                status,
                failing_cells,
                degenerate_cells,
            });
        }
    }

    let r0_sq: f64 = p.r0().iter().map(|v| v * v).sum();
    let r1_sq: f64 = p.r1().iter().map(|v| v * v).sum();
    let kleinr = ReflectionSize {
        r0_squared_sum: r0_sq,
        r1_squared_sum: r1_sq,
        pass: r0_sq <= 1.0 && r1_sq <= 1.0,
    };

    let cu = condunif_value(p, &phases);
    let condunif = UniformBound {
        value: cu,
        pass: cu < 1.0,
    };

    let margins: Vec<f64> = (0..n)
        .map(|j| {
            (0..cells)
                .map(|c| {
                    let aj = p.a(j, c);
                    let sign = if j < m { 1.0 } else { -1.0 };
                    let off: f64 = (0..n)
                        .filter(|&k| k != j)
                        .map(|k| {
                            let bjk = p.b(j, k, c);
                            (bjk / aj).abs() + (bjk / p.a(k, c)).abs()
                        })
                        .sum();
                    sign * p.b(j, j, c) / aj - off
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let min_diagonal_damping = (0..n)
        .flat_map(|j| (0..cells).map(move |c| (j, c)))
        .map(|(j, c)| p.b(j, j, c))
        .fold(f64::INFINITY, f64::min);
    let coef2 = Dissipativity {
        pass: margins.iter().all(|&v| v > 0.0),
        margins,
        min_diagonal_damping,
    };

    let ne_integral = p.random_walk().map(|rw| {
        (0..cells)
            .map(|c| {
                p.partition().width(c)
                    * (rw.mu_plus[c] / rw.a_plus[c] + rw.mu_minus[c] / rw.a_minus[c])
            })
            .sum()
    });

    let conventional_signs = p.has_conventional_signs();
    let constant_speeds = p.has_constant_speeds();
    let mut warnings = Vec::new();
    if !conventional_signs {
        warnings.push(format!(
            "speeds do not follow the convention a_j > 0 for j <= {m}, a_j < 0 for j > {m}"
        ));
    }
    if let Some(pv) = pairs.iter().find(|pv| pv.status == PairStatus::Fail) {
        warnings.push(format!(
            "coupling b_{}{} is nonzero where a_{} = a_{} (cells {:?})",
            pv.j + 1,
            pv.k + 1,
            pv.j + 1,
            pv.k + 1,
            pv.failing_cells
        ));
    }
    if m > 1 && condunif.pass && m as f64 * condunif.value >= 1.0 {
        warnings.push(format!(
            "condunif sum is below 1 but with m = {m} it does not bound |R_s|; scan the modes"
        ));
    }

    ConditionReport {
        n,
        m,
        cells,
        hard_checks_pass: ge.pass,
        ge,
        le,
        pairs,
        kleinr,
        condunif,
        coef2,
        ne_integral,
        conventional_signs,
        constant_speeds,
        warnings,
    }
}
