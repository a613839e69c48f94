//! Exponent extraction: linear and power-law fits, tail decay, peaks and data collapse.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BOOTSTRAP_RESAMPLES: usize = 200;
pub const BOOTSTRAP_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub stderr_intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn fit_linear(points: &[(f64, f64)]) -> Result<FitResult> {
    let n = points.len();
    if n < 3 {
        return Err(Error::Fit(format!("need at least 3 points, got {n}")));
    }
    if points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
        return Err(Error::Fit("non-finite input".into()));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 1e-300) || sxx <= 1e-24 * points.iter().map(|p| p.0 * p.0).sum::<f64>() {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    let s2 = sse / (nf - 2.0);
    let stderr_slope = (s2 / sxx).sqrt();
    let stderr_intercept = (s2 * (1.0 / nf + mx * mx / sxx)).sqrt();
    let r_squared = if syy > 0.0 {
        (1.0 - sse / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(FitResult {
        slope,
        intercept,
        stderr_slope,
        stderr_intercept,
        r_squared,
        n_points: n,
    })
}

/// Least squares on `(ln x, ln y)`; the slope is the exponent.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::Fit("power-law fit needs positive x and y".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    fit_linear(&logs)
}

/// `beta = a * gamma + b`.
pub fn fit_beta_gamma(betas: &[(f64, f64)]) -> Result<FitResult> {
    fit_linear(betas)
}

/// `1/nu = a * gamma + b`.
pub fn fit_inverse_nu(points: &[(f64, f64)]) -> Result<FitResult> {
    fit_linear(points)
}

/// Bootstrap standard errors `(slope, intercept)` of a fit by resampling points.
pub fn bootstrap_fit<F>(points: &[(f64, f64)], fit: F, resamples: usize, seed: u64) -> (f64, f64)
where
    F: Fn(&[(f64, f64)]) -> Result<FitResult> + Sync,
{
    let n = points.len();
    let samples: Vec<(f64, f64)> = (0..resamples)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let pick: Vec<(f64, f64)> = (0..n).map(|_| points[rng.random_range(0..n)]).collect();
            fit(&pick).ok().map(|f| (f.slope, f.intercept))
        })
        .collect();
    let sd = |vals: Vec<f64>| {
        let m = vals.len() as f64;
        if m < 2.0 {
            return f64::NAN;
        }
        let mean = vals.iter().sum::<f64>() / m;
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    };
    (
        sd(samples.iter().map(|s| s.0).collect()),
        sd(samples.iter().map(|s| s.1).collect()),
    )
}

/// Tail fit `F ~ (h - h_max)^(-alpha)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub alpha: f64,
    pub fit: FitResult,
    pub window: (f64, f64),
}

/// Fits the points whose distance `h - h_max` lies in `[d_lo, d_hi]`.
pub fn fit_decay_window(curve: &[(f64, f64)], h_max: f64, d_lo: f64, d_hi: f64) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .filter(|&&(h, f)| {
            let d = h - h_max;
            d >= d_lo && d <= d_hi && f > 0.0
        })
        .map(|&(h, f)| (h - h_max, f))
        .collect();
    if pts.len() < 5 {
        return Err(Error::Fit(format!(
            "decay fit needs at least 5 tail points, found {}",
            pts.len()
        )));
    }
    let fit = fit_power_law(&pts)?;
    Ok(DecayFit {
        alpha: -fit.slope,
        fit,
        window: (d_lo, d_hi),
    })
}

/// Tail fit over `h` in `[3 h_max, 1e3 h_max]`.
pub fn fit_decay_exponent(curve: &[(f64, f64)], h_max: f64) -> Result<DecayFit> {
    if !(h_max > 0.0) {
        return Err(Error::Fit("decay fit needs a positive reference field".into()));
    }
    let mut d = fit_decay_window(curve, h_max, 2.0 * h_max, 999.0 * h_max)?;
    d.window = (3.0 * h_max, 1e3 * h_max);
    Ok(d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub h_max: f64,
    pub f_max: f64,
    pub index: usize,
    /// The maximum sits on the first or last sample; the grid must be extended.
    pub boundary: bool,
}

/// Coarse argmax; ties go to the smaller `h`. Samples must be sorted by `h`.
pub fn find_peak(curve: &[(f64, f64)]) -> Result<Peak> {
    if curve.is_empty() {
        return Err(Error::Fit("empty curve".into()));
    }
    let mut idx = 0;
    for (i, &(_, f)) in curve.iter().enumerate() {
        if f > curve[idx].1 {
            idx = i;
        }
    }
    Ok(Peak {
        h_max: curve[idx].0,
        f_max: curve[idx].1,
        index: idx,
        boundary: idx == 0 || idx + 1 == curve.len(),
    })
}

/// Coarse argmax followed by golden-section search in `ln h` between the neighbours.
pub fn find_peak_refined<F>(curve: &[(f64, f64)], eval: F) -> Result<Peak>
where
    F: Fn(f64) -> Result<f64>,
{
    let coarse = find_peak(curve)?;
    if coarse.boundary {
        return Ok(coarse);
    }
    let (lo, hi) = (curve[coarse.index - 1].0, curve[coarse.index + 1].0);
    if !(lo > 0.0) {
        return Ok(coarse);
    }
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = eval(c.exp())?;
    let mut fd = eval(d.exp())?;
    let mut best = (coarse.h_max, coarse.f_max);
    for _ in 0..60 {
        if (b - a).abs() < 1e-6 {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = eval(c.exp())?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = eval(d.exp())?;
        }
        for (x, f) in [(c, fc), (d, fd)] {
            if f > best.1 || (f == best.1 && x.exp() < best.0) {
                best = (x.exp(), f);
            }
        }
    }
    Ok(Peak {
        h_max: best.0,
        f_max: best.1,
        index: coarse.index,
        boundary: false,
    })
}

/// Field where a curve that starts on a plateau first falls to half its maximum
/// (log-log interpolation between the bracketing samples).
pub fn half_plateau_crossover(curve: &[(f64, f64)]) -> Option<f64> {
    let peak = find_peak(curve).ok()?;
    let half = 0.5 * peak.f_max;
    for i in peak.index + 1..curve.len() {
        let (h1, f1) = curve[i];
        if f1 <= half {
            let (h0, f0) = curve[i - 1];
            if !(h0 > 0.0 && f0 > 0.0 && f1 > 0.0) {
                return Some(h1);
            }
            let t = (half.ln() - f0.ln()) / (f1.ln() - f0.ln());
            return Some((h0.ln() + t * (h1.ln() - h0.ln())).exp());
        }
    }
    None
}

/// Reference field for tail fits: the interior maximum if there is one, otherwise
/// the half-plateau crossover of a curve that decays monotonically from the start.
pub fn reference_field(curve: &[(f64, f64)]) -> Result<f64> {
    let peak = find_peak(curve)?;
    if !peak.boundary {
        return Ok(peak.h_max);
    }
    half_plateau_crossover(curve)
        .ok_or_else(|| Error::Fit("curve never falls to half its maximum".into()))
}

// ---------------------------------------------------------------------------
// Nelder-Mead

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Derivative-free simplex minimization.
pub fn nelder_mead<F>(f: F, x0: &[f64], steps: &[f64], tol: f64, max_iter: usize) -> Minimum
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f(x0)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += steps[i];
        let v = f(&x);
        simplex.push((x, v));
    }
    let order = |s: &mut Vec<(Vec<f64>, f64)>| {
        s.sort_by(|a, b| a.1.total_cmp(&b.1));
    };
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        order(&mut simplex);
        let best = simplex[0].1;
        let worst = simplex[n].1;
        let size = (1..=n)
            .map(|i| {
                simplex[i]
                    .0
                    .iter()
                    .zip(&simplex[0].0)
                    .zip(steps)
                    .map(|((a, b), s)| ((a - b) / s).abs())
                    .fold(0.0_f64, f64::max)
            })
            .fold(0.0_f64, f64::max);
        if (worst - best).abs() <= tol * (best.abs() + tol) && size < 1e-6 {
            converged = true;
            break;
        }
        iterations += 1;
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|p| p.0[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (w - c))
                .collect()
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = f(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let x0 = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    p.0 = p.0.iter().zip(&x0).map(|(a, b)| b + 0.5 * (a - b)).collect();
                    p.1 = f(&p.0);
                }
            }
        }
    }
    order(&mut simplex);
    let (x, value) = simplex.swap_remove(0);
    Minimum {
        x,
        value,
        iterations,
        converged,
    }
}

// ---------------------------------------------------------------------------
// Data collapse

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveFamily {
    /// `(L, samples)` with samples sorted by `h` and positive values.
    pub members: Vec<(usize, Vec<(f64, f64)>)>,
}

impl CurveFamily {
    pub fn new(members: Vec<(usize, Vec<(f64, f64)>)>) -> Result<Self> {
        if members.len() < 3 {
            return Err(Error::Fit(format!(
                "collapse needs at least 3 sizes, got {}",
                members.len()
            )));
        }
        for (l, s) in &members {
            if s.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                return Err(Error::Fit(format!("samples of L = {l} not strictly increasing in h")));
            }
            if s.iter().any(|p| !(p.1 > 0.0) || !p.1.is_finite()) {
                return Err(Error::Fit(format!("samples of L = {l} must be positive")));
            }
        }
        Ok(CurveFamily { members })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseParams {
    pub h_c: f64,
    pub alpha: f64,
    pub nu: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseResult {
    pub h_c: f64,
    pub alpha: f64,
    pub nu: f64,
    pub quality: f64,
    pub iterations: usize,
    /// Quality of the raw, unscaled curves.
    pub baseline: f64,
    /// The optimizer hit its iteration cap without meeting the tolerance.
    pub stagnated: bool,
}

/// Minimum fraction of scaled points that must overlap another curve.
const MIN_OVERLAP: f64 = 0.25;

/// Scaled curve in log-log coordinates, `(ln x, ln y)`, keeping points with `h > h_c`.
fn scaled(l: usize, samples: &[(f64, f64)], h_c: f64, inv_nu: f64, a_over_nu: f64) -> Vec<(f64, f64)> {
    let ln_l = (l as f64).ln();
    samples
        .iter()
        .filter(|p| p.0 > h_c)
        .map(|&(h, f)| (inv_nu * ln_l + (h - h_c).ln(), f.ln() - a_over_nu * ln_l))
        .collect()
}

fn interpolate(curve: &[(f64, f64)], x: f64) -> Option<f64> {
    if curve.len() < 2 || x < curve[0].0 || x > curve[curve.len() - 1].0 {
        return None;
    }
    let i = curve.partition_point(|p| p.0 < x);
    if i == 0 {
        return Some(curve[0].1);
    }
    let (x0, y0) = curve[i - 1];
    let (x1, y1) = curve[i];
    if x1 == x0 {
        return Some(y0);
    }
    Some(y0 + (x - x0) / (x1 - x0) * (y1 - y0))
}

/// Mean squared deviation (in `ln y`) of every scaled point from the master curve
/// formed by the other sizes; `+inf` when too few points can be cross-validated.
pub fn collapse_quality(family: &CurveFamily, p: CollapseParams) -> f64 {
    if !(p.nu > 0.0) || !p.nu.is_finite() {
        return f64::INFINITY;
    }
    let curves: Vec<Vec<(f64, f64)>> = family
        .members
        .iter()
        .map(|(l, s)| scaled(*l, s, p.h_c, 1.0 / p.nu, p.alpha / p.nu))
        .collect();
    deviation(&curves)
}

fn deviation(curves: &[Vec<(f64, f64)>]) -> f64 {
    let total: usize = curves.iter().map(|c| c.len()).sum();
    let mut sum = 0.0;
    let mut used = 0usize;
    for (i, ci) in curves.iter().enumerate() {
        for &(x, y) in ci {
            let mut acc = 0.0;
            let mut m = 0;
            for (j, cj) in curves.iter().enumerate() {
                if i == j {
                    continue;
                }
                if let Some(v) = interpolate(cj, x) {
                    acc += v;
                    m += 1;
                }
            }
            if m > 0 {
                sum += (y - acc / m as f64).powi(2);
                used += 1;
            }
        }
    }
    if total == 0 || (used as f64) < MIN_OVERLAP * total as f64 {
        return f64::INFINITY;
    }
    sum / used as f64
}

/// Deviation of the raw curves, `ln F` against `ln h`.
pub fn baseline_quality(family: &CurveFamily) -> f64 {
    let curves: Vec<Vec<(f64, f64)>> = family
        .members
        .iter()
        .map(|(_, s)| {
            s.iter()
                .filter(|p| p.0 > 0.0)
                .map(|&(h, f)| (h.ln(), f.ln()))
                .collect()
        })
        .collect();
    deviation(&curves)
}

/// Fits `F = L^(alpha/nu) G(L^(1/nu) (h - h_c))` by simplex descent with restarts.
///
/// The search runs over `(h_c / s, alpha/nu, 1/nu)` where `s` is the magnitude of the
/// initial `h_c` (or the smallest sampled field when that is zero).
pub fn collapse(family: &CurveFamily, init: CollapseParams) -> Result<CollapseResult> {
    let min_h = family
        .members
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| p.0))
        .filter(|h| *h > 0.0)
        .fold(f64::INFINITY, f64::min);
    let scale = if init.h_c.abs() > 0.0 {
        init.h_c.abs()
    } else if min_h.is_finite() {
        min_h
    } else {
        1.0
    };
    let to_params = |u: &[f64]| CollapseParams {
        h_c: u[0] * scale,
        alpha: u[1] / u[2],
        nu: 1.0 / u[2],
    };
    let objective = |u: &[f64]| {
        if !(u[2] > 0.0) {
            return f64::INFINITY;
        }
        collapse_quality(family, to_params(u))
    };
    let u0 = [init.h_c / scale, init.alpha / init.nu, 1.0 / init.nu];
    if !objective(&u0).is_finite() {
        return Err(Error::NoOverlap);
    }
    let steps = [0.5, 0.05 * u0[1].abs().max(1.0), 0.05 * u0[2].abs().max(1.0)];
    let mut best = nelder_mead(objective, &u0, &steps, 1e-12, 4000);
    let mut iterations = best.iterations;
    let mut stagnated = !best.converged;
    let perturbations = [[0.3, 0.03, -0.02], [-0.3, -0.03, 0.02], [0.0, 0.05, 0.05]];
    for pert in perturbations {
        let start: Vec<f64> = best
            .x
            .iter()
            .zip(pert)
            .zip(&steps)
            .map(|((x, p), s)| x + p * x.abs().max(*s))
            .collect();
        let start = if objective(&start).is_finite() { start } else { best.x.clone() };
        let m = nelder_mead(objective, &start, &steps, 1e-12, 4000);
        iterations += m.iterations;
        if m.value < best.value {
            stagnated = !m.converged;
            best = m;
        }
    }
    if !best.value.is_finite() {
        return Err(Error::NoOverlap);
    }
    let p = to_params(&best.x);
    Ok(CollapseResult {
        h_c: p.h_c,
        alpha: p.alpha,
        nu: p.nu,
        quality: best.value,
        iterations,
        baseline: baseline_quality(family),
        stagnated,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseStderr {
    pub h_c: f64,
    pub alpha: f64,
    pub nu: f64,
}

/// Bootstrap spread of the collapse optimum from per-curve resampling of the points.
pub fn collapse_bootstrap(
    family: &CurveFamily,
    optimum: &CollapseResult,
    resamples: usize,
    seed: u64,
) -> CollapseStderr {
    let init = CollapseParams {
        h_c: optimum.h_c,
        alpha: optimum.alpha,
        nu: optimum.nu,
    };
    let fits: Vec<CollapseParams> = (0..resamples)
        .into_par_iter()
        .filter_map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(r as u64));
            let members = family
                .members
                .iter()
                .map(|(l, s)| {
                    let mut idx: Vec<usize> = (0..s.len()).map(|_| rng.random_range(0..s.len())).collect();
                    idx.sort_unstable();
                    idx.dedup();
                    (*l, idx.into_iter().map(|i| s[i]).collect())
                })
                .collect();
            let fam = CurveFamily { members };
            collapse_quick(&fam, init).ok()
        })
        .collect();
    let sd = |f: &dyn Fn(&CollapseParams) -> f64| {
        let m = fits.len() as f64;
        if m < 2.0 {
            return f64::NAN;
        }
        let mean = fits.iter().map(f).sum::<f64>() / m;
        (fits.iter().map(|p| (f(p) - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
    };
    CollapseStderr {
        h_c: sd(&|p| p.h_c),
        alpha: sd(&|p| p.alpha),
        nu: sd(&|p| p.nu),
    }
}

/// Single simplex run from `init`, used for bootstrap refits.
fn collapse_quick(family: &CurveFamily, init: CollapseParams) -> Result<CollapseParams> {
    let scale = if init.h_c.abs() > 0.0 { init.h_c.abs() } else { 1e-12 };
    let objective = |u: &[f64]| {
        if !(u[2] > 0.0) {
            return f64::INFINITY;
        }
        collapse_quality(
            family,
            CollapseParams {
                h_c: u[0] * scale,
                alpha: u[1] / u[2],
                nu: 1.0 / u[2],
            },
        )
    };
    let u0 = [init.h_c / scale, init.alpha / init.nu, 1.0 / init.nu];
    let steps = [0.5, 0.05 * u0[1].abs().max(1.0), 0.05 * u0[2].abs().max(1.0)];
    let m = nelder_mead(objective, &u0, &steps, 1e-10, 1500);
    if !m.value.is_finite() {
        return Err(Error::NoOverlap);
    }
    Ok(CollapseParams {
        h_c: m.x[0] * scale,
        alpha: m.x[1] / m.x[2],
        nu: 1.0 / m.x[2],
    })
}

/// Log-spaced grid with `per_decade` points per decade over `[lo, hi]`, endpoints included.
pub fn log_grid_per_decade(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let decades = (hi / lo).log10();
    let count = (decades * per_decade as f64).round() as usize + 1;
    log_grid(lo, hi, count)
}

pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| {
            if i == 0 {
                lo
            } else if i + 1 == count {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64)
            }
        })
        .collect()
}

pub fn lin_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = (1..=6).map(|i| (i as f64, 3.0 * (i as f64).powi(2))).collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!((f.intercept - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn noisy_power_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<(f64, f64)> = (1..=20)
            .map(|i| {
                let x = i as f64;
                let noise = 1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0);
                (x, 5.0 * x.powf(1.5) * noise)
            })
            .collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.slope - 1.5).abs() < 0.05);
    }

    #[test]
    fn exact_line_recovered() {
        let pts: Vec<(f64, f64)> = [0.5, 1.0, 1.5, 2.0, 2.5].iter().map(|&g| (g, 2.0 * g + 4.0)).collect();
        let f = fit_beta_gamma(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept - 4.0).abs() < 1e-12);
        assert!(f.stderr_slope < 1e-10);
        let f = fit_inverse_nu(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_linear(&[(1.0, 1.0), (2.0, 2.0)]).is_err());
        assert!(fit_linear(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
        assert!(fit_power_law(&[(1.0, 1.0), (2.0, -2.0), (3.0, 3.0)]).is_err());
    }

    #[test]
    fn synthetic_decay() {
        let h0 = 1e-6;
        let curve: Vec<(f64, f64)> = log_grid(1e-6 * 1.01, 1e-1, 300)
            .into_iter()
            .map(|h| (h, (h - h0).powi(-2)))
            .collect();
        let d = fit_decay_exponent(&curve, h0).unwrap();
        assert!((d.alpha - 2.0).abs() < 1e-10);
        assert!(fit_decay_exponent(&curve[..3], h0).is_err());
    }

    #[test]
    fn peak_ties_and_boundary() {
        let c = [(1.0, 1.0), (2.0, 3.0), (3.0, 3.0), (4.0, 0.5)];
        let p = find_peak(&c).unwrap();
        assert_eq!(p.index, 1);
        assert!(!p.boundary);
        let mono = [(1.0, 5.0), (2.0, 3.0), (3.0, 1.0)];
        assert!(find_peak(&mono).unwrap().boundary);
        assert!(find_peak_refined(&mono, |_| Ok(0.0)).unwrap().boundary);
    }

    #[test]
    fn refined_peak_of_smooth_function() {
        let f = |h: f64| -> f64 { -(h.ln() - 2e-3f64.ln()).powi(2) + 10.0 };
        let curve: Vec<(f64, f64)> = log_grid(1e-5, 1e-1, 41).into_iter().map(|h| (h, f(h))).collect();
        let p = find_peak_refined(&curve, |h| Ok(f(h))).unwrap();
        assert!((p.h_max / 2e-3 - 1.0).abs() < 1e-4);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = nelder_mead(f, &[-1.2, 1.0], &[0.1, 0.1], 1e-14, 5000);
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4);
    }

    #[test]
    fn half_plateau() {
        let curve: Vec<(f64, f64)> = log_grid(1e-6, 1.0, 121)
            .into_iter()
            .map(|h| (h, 1.0 / (1.0 + (h / 1e-3).powi(2))))
            .collect();
        let h = half_plateau_crossover(&curve).unwrap();
        assert!((h / 1e-3 - 1.0).abs() < 0.01);
    }

    #[test]
    fn grids() {
        let g = log_grid_per_decade(1e-14, 1e-1, 40);
        assert_eq!(g.len(), 521);
        assert_eq!(g[0], 1e-14);
        assert_eq!(*g.last().unwrap(), 1e-1);
        assert_eq!(lin_grid(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }
}
