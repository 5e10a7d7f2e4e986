//! Dense complex linear algebra for the small per-cell systems.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serializer;

use crate::error::{Error, Result};

pub type CMat = DMatrix<Complex64>;

pub(crate) const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Serializes a complex matrix as rows of `[re, im]` pairs.
pub fn serialize_cmat<S: Serializer>(m: &CMat, ser: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::Serialize;
    let rows: Vec<Vec<Complex64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    rows.serialize(ser)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMat {
    m.map(|v| Complex64::new(v, 0.0))
}

fn norm1(a: &CMat) -> f64 {
    (0..a.ncols())
        .map(|j| a.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const PADE9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA: [(usize, f64); 4] = [
    (3, 1.495585217958292e-2),
    (5, 2.539398330063230e-1),
    (7, 9.504178996162932e-1),
    (9, 2.097847961257068e0),
];
const THETA13: f64 = 5.371920351148152;

/// Norms past this are rejected outright; squaring would need > 2^60 steps' worth
/// of dynamic range.
const MAX_NORM: f64 = 1e15;

/// `exp(M h)` by scaling and squaring with a diagonal Padé core (degrees 3–13).
pub fn expm(m: &CMat, h: f64) -> Result<CMat> {
    assert!(m.is_square());
    let a = m * Complex64::new(h, 0.0);
    let n = a.nrows();
    let norm = norm1(&a);
    if !norm.is_finite() || norm > MAX_NORM {
        return Err(Error::ExpOverflow(norm));
    }
    let id = CMat::identity(n, n);
    if norm == 0.0 {
        return Ok(id);
    }

    for &(deg, theta) in &THETA {
        if norm <= theta {
            let coef: &[f64] = match deg {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(&a, coef);
        }
    }

    let s = ((norm / THETA13).log2().ceil()).max(0.0) as i32;
    let scaled = &a * Complex64::new(2f64.powi(-s), 0.0);
    let mut r = pade13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
        if r.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::ExpOverflow(norm));
        }
    }
    Ok(r)
}

fn c(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn pade_low(a: &CMat, b: &[f64]) -> Result<CMat> {
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let a2 = a * a;
    let mut even = &id * c(b[0]);
    let mut odd = &id * c(b[1]);
    let mut pw = id.clone();
    let mut k = 2;
    while k < b.len() {
        pw = &pw * &a2;
        even += &pw * c(b[k]);
        if k + 1 < b.len() {
            odd += &pw * c(b[k + 1]);
        }
        k += 2;
    }
    let u = a * odd;
    solve_pade(even, u)
}

fn pade13(a: &CMat) -> Result<CMat> {
    let b = &PADE13;
    let n = a.nrows();
    let id = CMat::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * c(b[13]) + &a4 * c(b[11]) + &a2 * c(b[9]);
    let u = a * (&a6 * inner_u + &a6 * c(b[7]) + &a4 * c(b[5]) + &a2 * c(b[3]) + &id * c(b[1]));
    let inner_v = &a6 * c(b[12]) + &a4 * c(b[10]) + &a2 * c(b[8]);
    let v = &a6 * inner_v + &a6 * c(b[6]) + &a4 * c(b[4]) + &a2 * c(b[2]) + &id * c(b[0]);
    solve_pade(v, u)
}

fn solve_pade(v: CMat, u: CMat) -> Result<CMat> {
    let p = &v + &u;
    let q = v - u;
    let lu = q.lu();
    lu.solve(&p)
        .ok_or_else(|| Error::ExpOverflow(f64::INFINITY))
}

/// Blocks `(e^{A}, φ₁(A), φ₂(A))` for `A = M δ`, read off the exponential of
/// the augmented matrix `[[A, I, 0], [0, 0, I], [0, 0, 0]]`.
pub fn phi_blocks(m: &CMat, delta: f64) -> Result<(CMat, CMat, CMat)> {
    let n = m.nrows();
    let mut aug = CMat::zeros(3 * n, 3 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(m * c(delta)));
    for i in 0..n {
        aug[(i, n + i)] = c(1.0);
        aug[(n + i, 2 * n + i)] = c(1.0);
    }
    let e = expm(&aug, 1.0)?;
    Ok((
        e.view((0, 0), (n, n)).into_owned(),
        e.view((0, n), (n, n)).into_owned(),
        e.view((0, 2 * n), (n, n)).into_owned(),
    ))
}

pub fn det(m: &CMat) -> Complex64 {
    if m.nrows() == 0 {
        return c(1.0);
    }
    m.clone().lu().determinant()
}

/// Singular values in decreasing order together with the right singular vectors
/// (as columns, matching the order).
pub fn svd_right(m: &CMat) -> (Vec<f64>, CMat) {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^H");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let v = CMat::from_fn(m.ncols(), order.len(), |r, k| v_t[(order[k], r)].conj());
    (sigma, v)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .fold(0.0, |a: f64, &b| a.max(b))
}
