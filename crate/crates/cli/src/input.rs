//! Problem and forcing files.
//!
//! Both are TOML documents carrying a `schema` key. Component indices in
//! files are 1-based.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use perihyp::fourier::{FourierField, Grid, GridOptions};
use perihyp::linalg::CMat;
use perihyp::{Partition, PiecewiseConstantFn, ProblemData};
use serde::Deserialize;

pub const PROBLEM_SCHEMA: &str = "perihyp.problem/1";
pub const FORCING_SCHEMA: &str = "perihyp.forcing/1";

/// A file that could not be turned into problem or forcing data.
#[derive(Debug)]
pub struct ParseError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ParseError {}

fn parse_err(path: &Path, message: impl Into<String>) -> ParseError {
    ParseError {
        path: path.display().to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemFile {
    schema: String,
    breakpoints: Vec<f64>,
    m: Option<usize>,
    /// `a[j][cell]`.
    a: Option<Vec<Vec<f64>>>,
    /// `b[j][k][cell]`; zero when absent.
    b: Option<Vec<Vec<Vec<f64>>>>,
    /// `m × (n − m)`, rows listed in order.
    r0: Option<Vec<Vec<f64>>>,
    /// `(n − m) × m`.
    r1: Option<Vec<Vec<f64>>>,
    random_walk: Option<RandomWalkFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RandomWalkFile {
    a_plus: Vec<f64>,
    a_minus: Vec<f64>,
    mu_plus: Vec<f64>,
    mu_minus: Vec<f64>,
}

fn read(path: &Path) -> Result<String, ParseError> {
    std::fs::read_to_string(path).map_err(|e| parse_err(path, format!("cannot read file: {e}")))
}

fn check_schema(path: &Path, found: &str, expected: &str) -> Result<(), ParseError> {
    if found != expected {
        return Err(parse_err(
            path,
            format!("field `schema`: expected \"{expected}\", found \"{found}\""),
        ));
    }
    Ok(())
}

fn dense(path: &Path, field: &str, rows: &[Vec<f64>], shape: (usize, usize)) -> Result<DMatrix<f64>, ParseError> {
    if rows.len() != shape.0 || rows.iter().any(|r| r.len() != shape.1) {
        return Err(parse_err(
            path,
            format!("field `{field}`: expected a {}x{} array", shape.0, shape.1),
        ));
    }
    Ok(DMatrix::from_fn(shape.0, shape.1, |i, j| rows[i][j]))
}

pub fn load_problem(path: &Path) -> Result<ProblemData, ParseError> {
    let text = read(path)?;
    let file: ProblemFile = toml::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    check_schema(path, &file.schema, PROBLEM_SCHEMA)?;
    let partition =
        Partition::new(file.breakpoints).map_err(|e| parse_err(path, format!("field `breakpoints`: {e}")))?;
    let cells = partition.cells();

    if let Some(rw) = file.random_walk {
        if file.a.is_some() || file.b.is_some() || file.r0.is_some() || file.r1.is_some() || file.m.is_some() {
            return Err(parse_err(
                path,
                "`random_walk` excludes the fields `m`, `a`, `b`, `r0`, `r1`",
            ));
        }
        let f = |name: &str, v: Vec<f64>| {
            PiecewiseConstantFn::new(partition.clone(), v)
                .map_err(|e| parse_err(path, format!("field `random_walk.{name}`: {e}")))
        };
        let (ap, am) = (f("a_plus", rw.a_plus)?, f("a_minus", rw.a_minus)?);
        let (mp, mm) = (f("mu_plus", rw.mu_plus)?, f("mu_minus", rw.mu_minus)?);
        return ProblemData::from_random_walk(&ap, &am, &mp, &mm)
            .map_err(|e| parse_err(path, format!("section `random_walk`: {e}")));
    }

    let m = file.m.ok_or_else(|| parse_err(path, "missing field `m`"))?;
    let a = file.a.ok_or_else(|| parse_err(path, "missing field `a`"))?;
    let n = a.len();
    if let Some(j) = a.iter().position(|row| row.len() != cells) {
        return Err(parse_err(
            path,
            format!("field `a`: row {} has {} values, expected {cells}", j + 1, a[j].len()),
        ));
    }
    let b = match file.b {
        Some(b) => {
            let ok = b.len() == n && b.iter().all(|row| row.len() == n && row.iter().all(|v| v.len() == cells));
            if !ok {
                return Err(parse_err(path, format!("field `b`: expected {n}x{n} entries of {cells} values")));
            }
            b
        }
        None => vec![vec![vec![0.0; cells]; n]; n],
    };
    if m == 0 || m >= n {
        return Err(parse_err(path, format!("field `m`: need 0 < m < n = {n}, got {m}")));
    }
    let r0 = match &file.r0 {
        Some(r) => dense(path, "r0", r, (m, n - m))?,
        None => DMatrix::zeros(m, n - m),
    };
    let r1 = match &file.r1 {
        Some(r) => dense(path, "r1", r, (n - m, m))?,
        None => DMatrix::zeros(n - m, m),
    };
    ProblemData::from_cells(partition, m, a, b, r0, r1).map_err(|e| parse_err(path, e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ForcingFile {
    schema: String,
    s_max: usize,
    grid: Option<GridFile>,
    #[serde(default)]
    mode: Vec<ModeEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    phase_step: Option<f64>,
    min_subcells: Option<usize>,
}

/// One component of one mode: per cell, complex values `[re, im]` at the
/// left and right cell ends (`left` alone means constant on each cell).
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModeEntry {
    s: i64,
    component: usize,
    left: Vec<[f64; 2]>,
    right: Option<Vec<[f64; 2]>>,
}

/// Forcing as read from file: the mode profiles are built on a grid chosen
/// for the problem at hand.
#[derive(Debug, Clone)]
pub struct Forcing {
    pub s_max: usize,
    pub grid_options: GridOptions,
    entries: Vec<(i64, usize, Vec<(Complex64, Complex64)>)>,
}

impl Forcing {
    pub fn grid_for(&self, p: &ProblemData) -> Grid {
        Grid::for_problem(p, self.s_max, self.grid_options)
    }

    /// Samples the forcing on `grid`; each mode is cellwise affine.
    pub fn field(&self, p: &ProblemData, grid: &Grid) -> Result<FourierField, String> {
        let n = p.n();
        let cells = p.cells();
        let mut modes: Vec<CMat> = vec![CMat::zeros(n, grid.len()); self.s_max + 1];
        let x = grid.nodes();
        for (s, component, values) in &self.entries {
            if *component == 0 || *component > n {
                return Err(format!("mode s = {s}: component {component} outside 1..={n}"));
            }
            if values.len() != cells {
                return Err(format!(
                    "mode s = {s}, component {component}: {} cells given, problem has {cells}",
                    values.len()
                ));
            }
            let prof = &mut modes[*s as usize];
            for (c, (l, r)) in values.iter().enumerate() {
                let x0 = grid.partition().left(c);
                let w = grid.partition().width(c);
                for i in grid.cell_nodes(c) {
                    let t = (x[i] - x0) / w;
                    prof[(component - 1, i)] += l * (1.0 - t) + r * t;
                }
            }
        }
        if let Some(bad) = modes[0].iter().find(|z| z.im != 0.0) {
            return Err(format!("mode s = 0 must be real, found imaginary part {}", bad.im));
        }
        let mut field = FourierField::zeros(grid.clone(), n, self.s_max);
        for (s, prof) in modes.into_iter().enumerate() {
            field.set_mode(s as i64, prof);
        }
        Ok(field)
    }
}

pub fn load_forcing(path: &Path) -> Result<Forcing, ParseError> {
    let text = read(path)?;
    let file: ForcingFile = toml::from_str(&text).map_err(|e| parse_err(path, e.to_string()))?;
    check_schema(path, &file.schema, FORCING_SCHEMA)?;
    let mut grid_options = GridOptions::default();
    if let Some(g) = file.grid {
        if let Some(v) = g.phase_step {
            if !(v > 0.0 && v.is_finite()) {
                return Err(parse_err(path, "field `grid.phase_step`: must be positive"));
            }
            grid_options.phase_step = v;
        }
        if let Some(v) = g.min_subcells {
            if v < 4 {
                return Err(parse_err(path, "field `grid.min_subcells`: must be at least 4"));
            }
            grid_options.min_subcells = v;
        }
    }
    let mut entries = Vec::new();
    for (k, e) in file.mode.into_iter().enumerate() {
        if e.s < 0 || e.s as usize > file.s_max {
            return Err(parse_err(
                path,
                format!("mode entry {}: field `s` must lie in 0..={} (negative modes are implied)", k + 1, file.s_max),
            ));
        }
        let left: Vec<Complex64> = e.left.iter().map(|v| Complex64::new(v[0], v[1])).collect();
        let right = match e.right {
            Some(r) if r.len() != left.len() => {
                return Err(parse_err(
                    path,
                    format!("mode entry {}: fields `left` and `right` differ in length", k + 1),
                ))
            }
            Some(r) => r.iter().map(|v| Complex64::new(v[0], v[1])).collect(),
            None => left.clone(),
        };
        entries.push((e.s, e.component, left.into_iter().zip(right).collect()));
    }
    Ok(Forcing {
        s_max: file.s_max,
        grid_options,
        entries,
    })
}
