//! Measurement protocols built from the engines: curves, peaks, exponent fits,
//! line scans of the parabolic probe, gaps and simultaneous-estimation bounds.
//!
//! Sweeps parallelize over grid points; every function returns results in grid
//! order so the outcome does not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fisher::{
    total_uncertainty, time_normalized, Evaluator, FisherMatrix, Povm, FD_TOLERANCE,
};
use crate::probe::{Family, Potential, ProbeSpec};
use crate::scaling::{
    collapse, collapse_bootstrap, find_peak, find_peak_refined, fit_decay_exponent,
    fit_decay_window, fit_power_law, half_plateau_crossover, CollapseParams, CollapseResult,
    CollapseStderr, CurveFamily, DecayFit, FitResult, Peak, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED,
};
use crate::spectral::{gap_of, GapRecord};

pub fn spec_for(family: Family, l: usize, potential: Potential) -> Result<ProbeSpec> {
    ProbeSpec::new(l, 1.0, potential, family)
}

/// One point of a single-parameter QFI curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QfiSample {
    pub h: f64,
    pub qfi: f64,
    pub step: f64,
    pub flag: String,
}

impl QfiSample {
    pub fn ok(&self) -> bool {
        self.flag.is_empty() && self.qfi.is_finite() && self.qfi > 0.0
    }
}

pub fn flag_of(e: &Error) -> String {
    match e {
        Error::Degenerate { .. } => "degenerate".into(),
        Error::StepSearch { .. } => "step-search".into(),
        Error::NoConvergence { .. } => "no-convergence".into(),
        other => format!("error: {other}").replace(',', ";"),
    }
}

pub fn qfi_sample(ev: &Evaluator, family: Family, l: usize, gamma: f64, h: f64) -> QfiSample {
    let run = || -> Result<(f64, f64, bool)> {
        let spec = spec_for(family, l, Potential::monomial(h, gamma))?;
        let p = ev.point(&spec)?;
        Ok((p.qfi().get(0, 0), p.derivatives[0].step, p.degenerate))
    };
    match run() {
        Ok((qfi, step, degenerate)) => QfiSample {
            h,
            qfi,
            step,
            flag: if degenerate { "degenerate".into() } else { String::new() },
        },
        Err(e) => QfiSample {
            h,
            qfi: f64::NAN,
            step: f64::NAN,
            flag: flag_of(&e),
        },
    }
}

pub fn qfi_curve(ev: &Evaluator, family: Family, l: usize, gamma: f64, grid: &[f64]) -> Vec<QfiSample> {
    grid.par_iter()
        .map(|&h| qfi_sample(ev, family, l, gamma, h))
        .collect()
}

/// `(h, F)` pairs of the usable samples.
pub fn usable(samples: &[QfiSample]) -> Vec<(f64, f64)> {
    samples.iter().filter(|s| s.ok()).map(|s| (s.h, s.qfi)).collect()
}

/// Peak of a curve. An interior maximum that does not beat the first sample by more
/// than the finite-difference tolerance is a plateau and reported as a boundary peak.
pub fn plateau_aware_peak(curve: &[(f64, f64)]) -> Result<Peak> {
    let mut p = find_peak(curve)?;
    if !p.boundary && p.f_max <= curve[0].1 * (1.0 + FD_TOLERANCE) {
        p.boundary = true;
    }
    Ok(p)
}

/// Peak of the QFI curve, refined by golden-section search when it is interior.
pub fn qfi_peak(
    ev: &Evaluator,
    family: Family,
    l: usize,
    gamma: f64,
    samples: &[QfiSample],
) -> Result<Peak> {
    let curve = usable(samples);
    let coarse = plateau_aware_peak(&curve)?;
    if coarse.boundary {
        return Ok(coarse);
    }
    find_peak_refined(&curve, |h| {
        let s = qfi_sample(ev, family, l, gamma, h);
        if s.ok() {
            Ok(s.qfi)
        } else {
            Err(Error::Fit(format!("refinement failed at h = {h:e}: {}", s.flag)))
        }
    })
}

/// Rightmost interior local maximum that rises above its left neighbour by more than
/// the finite-difference tolerance, i.e. the last peak before the localized tail.
pub fn last_prominent_maximum(curve: &[(f64, f64)]) -> Option<(f64, f64)> {
    (1..curve.len().saturating_sub(1))
        .rev()
        .find(|&i| {
            let f = curve[i].1;
            f > curve[i - 1].1 * (1.0 + FD_TOLERANCE) && f >= curve[i + 1].1
        })
        .map(|i| curve[i])
}

/// Tail exponent. For an interior peak the window is `[3 h_max, 1e3 h_max]`. When the
/// global maximum is a plateau but a later local peak exists (many-body curves), that
/// peak anchors the window instead. A curve that simply decays from a plateau uses a
/// window anchored at the half-plateau field, with distances still measured from the
/// maximum.
pub fn tail_fit(curve: &[(f64, f64)]) -> Result<DecayFit> {
    let peak = plateau_aware_peak(curve)?;
    if !peak.boundary {
        return fit_decay_exponent(curve, peak.h_max);
    }
    if let Some((h_loc, _)) = last_prominent_maximum(curve) {
        return fit_decay_exponent(curve, h_loc);
    }
    let h_half = half_plateau_crossover(curve)
        .ok_or_else(|| Error::Fit("curve never falls to half its maximum".into()))?;
    let mut d = fit_decay_window(curve, peak.h_max, 3.0 * h_half - peak.h_max, 1e3 * h_half - peak.h_max)?;
    d.window = (3.0 * h_half, 1e3 * h_half);
    Ok(d)
}

/// Size-scaling exponent from `(L, F)` pairs with bootstrap-free OLS errors.
pub fn size_exponent(values: &[(usize, f64)]) -> Result<FitResult> {
    let pts: Vec<(f64, f64)> = values.iter().map(|&(l, f)| (l as f64, f)).collect();
    fit_power_law(&pts)
}

/// QFI at a fixed field, for every size.
pub fn fixed_field_qfi(ev: &Evaluator, family: Family, sizes: &[usize], gamma: f64, h: f64) -> Vec<QfiSample> {
    sizes
        .par_iter()
        .map(|&l| qfi_sample(ev, family, l, gamma, h))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollapseOutcome {
    pub result: CollapseResult,
    pub stderr: CollapseStderr,
}

pub fn collapse_with_bootstrap(family: &CurveFamily, init: CollapseParams, resamples: usize) -> Result<CollapseOutcome> {
    let result = collapse(family, init)?;
    let stderr = collapse_bootstrap(family, &result, resamples, BOOTSTRAP_SEED);
    Ok(CollapseOutcome { result, stderr })
}

pub fn default_collapse_resamples() -> usize {
    BOOTSTRAP_RESAMPLES
}

/// Fisher data of a two-field (parabolic) point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSample {
    pub l: usize,
    pub h1: f64,
    pub h2: f64,
    pub qfi: Option<FisherMatrix>,
    pub cfi: Option<FisherMatrix>,
    pub gap: f64,
    pub trace_inv: Option<f64>,
    pub weak_comm_residual: f64,
    /// `||[L1, L2]|| / sqrt(F11 F22)`, the commutator size relative to the SLD scale.
    pub commutator_rel: f64,
    pub flag: String,
}

impl MatrixSample {
    pub fn ok(&self) -> bool {
        self.flag.is_empty() && self.qfi.is_some()
    }
}

pub fn matrix_sample(ev: &Evaluator, family: Family, l: usize, h1: f64, h2: f64) -> MatrixSample {
    let mut out = MatrixSample {
        l,
        h1,
        h2,
        qfi: None,
        cfi: None,
        gap: f64::NAN,
        trace_inv: None,
        weak_comm_residual: f64::NAN,
        commutator_rel: f64::NAN,
        flag: String::new(),
    };
    let spec = match spec_for(family, l, Potential::parabolic(h1, h2)) {
        Ok(s) => s,
        Err(e) => {
            out.flag = flag_of(&e);
            return out;
        }
    };
    match ev.point(&spec) {
        Ok(p) => {
            let q = p.qfi();
            let sld = p.sld();
            out.gap = p.gap;
            out.weak_comm_residual = sld.trace_commutator.abs();
            out.commutator_rel = sld.commutator_norm / (q.get(0, 0) * q.get(1, 1)).sqrt().max(f64::MIN_POSITIVE);
            out.cfi = p.cfi(Povm::for_family(family)).ok();
            // a singular matrix leaves its entries meaningful; only the bound is missing
            out.trace_inv = total_uncertainty(&q, None).ok();
            if p.degenerate {
                out.flag = "degenerate".into();
            }
            out.qfi = Some(q);
        }
        Err(e) => out.flag = flag_of(&e),
    }
    out
}

/// Scan along `h1 = factor * h2 * (L - 1)`.
pub fn line_scan(ev: &Evaluator, family: Family, l: usize, factor: f64, h2_grid: &[f64]) -> Vec<MatrixSample> {
    h2_grid
        .par_iter()
        .map(|&h2| matrix_sample(ev, family, l, factor * h2 * (l as f64 - 1.0), h2))
        .collect()
}

/// Matrix entry selector: quantum or classical, `(i, j)`; off-diagonals by magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Entry {
    Q11,
    Q22,
    Q12,
    C11,
    C22,
    C12,
}

impl Entry {
    pub fn value(self, s: &MatrixSample) -> Option<f64> {
        let (m, i, j) = match self {
            Entry::Q11 => (s.qfi, 0, 0),
            Entry::Q22 => (s.qfi, 1, 1),
            Entry::Q12 => (s.qfi, 0, 1),
            Entry::C11 => (s.cfi, 0, 0),
            Entry::C22 => (s.cfi, 1, 1),
            Entry::C12 => (s.cfi, 0, 1),
        };
        m.map(|m| m.get(i, j).abs()).filter(|v| v.is_finite() && *v > 0.0)
    }

    pub fn name(self) -> &'static str {
        match self {
            Entry::Q11 => "f11",
            Entry::Q22 => "f22",
            Entry::Q12 => "f12",
            Entry::C11 => "c11",
            Entry::C22 => "c22",
            Entry::C12 => "c12",
        }
    }
}

/// `(h2, entry)` pairs over the usable samples of a line scan.
pub fn entry_curve(scan: &[MatrixSample], entry: Entry) -> Vec<(f64, f64)> {
    scan.iter()
        .filter(|s| s.ok())
        .filter_map(|s| entry.value(s).map(|v| (s.h2, v)))
        .collect()
}

/// Peak of a matrix entry along a line, golden-section refined when interior.
pub fn line_peak(
    ev: &Evaluator,
    family: Family,
    l: usize,
    factor: f64,
    scan: &[MatrixSample],
    entry: Entry,
) -> Result<Peak> {
    let curve = entry_curve(scan, entry);
    let coarse = plateau_aware_peak(&curve)?;
    if coarse.boundary {
        return Ok(coarse);
    }
    find_peak_refined(&curve, |h2| {
        let s = matrix_sample(ev, family, l, factor * h2 * (l as f64 - 1.0), h2);
        if !s.ok() {
            return Err(Error::Fit(format!("refinement failed at h2 = {h2:e}: {}", s.flag)));
        }
        entry
            .value(&s)
            .ok_or_else(|| Error::Fit(format!("no {} at h2 = {h2:e}", entry.name())))
    })
}

/// Smallest `Tr[F^-1]` along a line, golden-section refined in `ln h2`.
pub fn line_trace_minimum(
    ev: &Evaluator,
    family: Family,
    l: usize,
    factor: f64,
    scan: &[MatrixSample],
) -> Result<MatrixSample> {
    let curve: Vec<(f64, f64)> = scan
        .iter()
        .filter(|s| s.ok())
        .filter_map(|s| s.trace_inv.map(|t| (s.h2, 1.0 / t)))
        .collect();
    let coarse = find_peak(&curve)?;
    let at = |h2: f64| matrix_sample(ev, family, l, factor * h2 * (l as f64 - 1.0), h2);
    if coarse.boundary {
        return Ok(at(coarse.h_max));
    }
    let refined = find_peak_refined(&curve, |h2| {
        let s = at(h2);
        match (s.ok(), s.trace_inv) {
            (true, Some(t)) => Ok(1.0 / t),
            _ => Err(Error::Fit(format!("refinement failed at h2 = {h2:e}"))),
        }
    })?;
    Ok(at(refined.h_max))
}

pub fn gap_sample(ev: &Evaluator, family: Family, l: usize, h1: f64, h2: f64) -> Result<GapRecord> {
    let spec = spec_for(family, l, Potential::parabolic(h1, h2))?;
    let h = ev.hamiltonian(&spec)?;
    gap_of(&h, &ev.options.solver)
}

/// Gap-scaling regimes of the parabolic probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GapRegime {
    /// Fixed fields.
    Fixed { h1: f64, h2: f64 },
    /// `h1 = factor * h2 * (L - 1)` at fixed `h2`.
    Line { h2: f64, factor: f64 },
}

impl GapRegime {
    pub fn fields(&self, l: usize) -> (f64, f64) {
        match *self {
            GapRegime::Fixed { h1, h2 } => (h1, h2),
            GapRegime::Line { h2, factor } => (factor * h2 * (l as f64 - 1.0), h2),
        }
    }
}

/// Gap exponent `z` from `gap ~ L^-z` (returned fit has slope `-z`).
pub fn gap_scaling(ev: &Evaluator, family: Family, sizes: &[usize], regime: GapRegime) -> Result<(FitResult, Vec<(usize, GapRecord)>)> {
    let gaps: Vec<(usize, GapRecord)> = sizes
        .par_iter()
        .map(|&l| {
            let (h1, h2) = regime.fields(l);
            gap_sample(ev, family, l, h1, h2).map(|g| (l, g))
        })
        .collect::<Result<_>>()?;
    let fit = size_exponent(&gaps.iter().map(|(l, g)| (*l, g.gap)).collect::<Vec<_>>())?;
    Ok((fit, gaps))
}

/// Fisher matrix multiplied by the gap of the same point.
pub fn normalized_entries(s: &MatrixSample) -> Result<FisherMatrix> {
    let q = s.qfi.ok_or_else(|| Error::Fit("no Fisher matrix at this point".into()))?;
    time_normalized(&q, s.gap)
}
