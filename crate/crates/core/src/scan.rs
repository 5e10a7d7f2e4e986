//! Sweeps `s ↦ det(I − R_s)` to classify an instance.

use rayon::prelude::*;
use serde::Serialize;

use crate::diagonal::{assemble_r, small_denominator, DEFAULT_EPS_RES};
use crate::linalg;
use crate::problem::{condunif_value, compute_phases, PhaseData, ProblemData};

/// Upper end of the near-resonance band.
pub const MARGINAL_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeReport {
    pub s: i64,
    pub abs_det: f64,
    pub frobenius: f64,
    pub spectral: f64,
    pub resonant: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// No scanned determinant below the marginal threshold.
    Uniform,
    Marginal,
    Resonant,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanReport {
    pub s_max: usize,
    pub eps_res: f64,
    pub min_abs_det: f64,
    pub argmin_s: i64,
    pub max_frobenius: f64,
    /// Left-hand side of the uniform sufficient condition.
    pub condunif: f64,
    /// Rigorous bound on `‖R_s‖_F²`: `m` times `condunif` (Cauchy–Schwarz over the outgoing index).
    pub frobenius_bound: f64,
    pub resonant_modes: Vec<i64>,
    pub verdict: Verdict,
    pub modes: Vec<ModeReport>,
}

/// The s-independent bound on `‖R_s‖_F²`. The condition sum alone only bounds
/// it when `m = 1`; with several outgoing components at `x = 0` the cross terms
/// can exceed it.
pub fn frobenius_bound(p: &ProblemData, phases: &PhaseData) -> f64 {
    p.m() as f64 * condunif_value(p, phases)
}

pub fn scan(p: &ProblemData, s_max: usize) -> ScanReport {
    scan_with(p, s_max, DEFAULT_EPS_RES)
}

pub fn scan_with(p: &ProblemData, s_max: usize, eps_res: f64) -> ScanReport {
    let phases = compute_phases(p);
    let smax = s_max as i64;
    let modes: Vec<ModeReport> = (-smax..=smax)
        .into_par_iter()
        .map(|s| {
            let r = assemble_r(&phases, p.r0(), p.r1(), s);
            let abs_det = small_denominator(&r).norm();
            ModeReport {
                s,
                abs_det,
                frobenius: r.norm(),
                spectral: linalg::spectral_norm(&r),
                resonant: abs_det < eps_res,
            }
        })
        .collect();
    let (argmin_s, min_abs_det) = modes
        .iter()
        .map(|m| (m.s, m.abs_det))
        .fold((0, f64::INFINITY), |acc, v| if v.1 < acc.1 { v } else { acc });
    let max_frobenius = modes.iter().map(|m| m.frobenius).fold(0.0, f64::max);
    let resonant_modes: Vec<i64> = modes.iter().filter(|m| m.resonant).map(|m| m.s).collect();
    let verdict = if !resonant_modes.is_empty() {
        Verdict::Resonant
    } else if min_abs_det <= MARGINAL_THRESHOLD {
        Verdict::Marginal
    } else {
        Verdict::Uniform
    };
    ScanReport {
        s_max,
        eps_res,
        min_abs_det,
        argmin_s,
        max_frobenius,
        condunif: condunif_value(p, &phases),
        frobenius_bound: frobenius_bound(p, &phases),
        resonant_modes,
        verdict,
        modes,
    }
}
