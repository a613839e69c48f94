//! Property checks shared by the proptest suite and the acceptance runner.
#![allow(dead_code)]

use std::path::Path;

use nalgebra::DMatrix;
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use stark_core::config::{Grid, Scenario, SweepConfig};
use stark_core::fisher::{central_difference, qfi_scalar, Evaluator, StepPolicy, FD_TOLERANCE};
use stark_core::probe::{
    build_single_particle, enumerate_half_filling, mirror_commutator_norm, potential_values, Family, Hamiltonian, Potential, ProbeSpec,
    SectorBasis, SparseHamiltonian,
};
use stark_core::protocols::matrix_sample;
use stark_core::scaling::{
    baseline_quality, collapse, collapse_quality, fit_linear, fit_power_law, CollapseParams, CurveFamily,
};
use stark_core::spectral::{dense_spectrum, full_spectrum, gauge_fix};
use stark_core::sweep::{read_rows, Runner};

pub type Check = Result<(), TestCaseError>;

fn sym_min_eig(m: &[[f64; 2]; 2]) -> f64 {
    let (a, b, d) = (m[0][0], m[0][1], m[1][1]);
    0.5 * (a + d) - (0.25 * (a - d).powi(2) + b * b).sqrt()
}

pub fn even_l(max: usize) -> impl Strategy<Value = usize> {
    (1..=max / 2).prop_map(|k| 2 * k)
}

pub fn site_fields(l: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, l)
}

/// Log-uniform positive field.
pub fn log_field(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.log10()..hi.log10()).prop_map(|e| 10f64.powf(e))
}

// -- probe models -------------------------------------------------------------

/// Half-filling masks counted independently of the library enumeration.
fn sector_masks(l: usize) -> Vec<u32> {
    (0u32..1 << l).filter(|m| m.count_ones() as usize == l / 2).collect()
}

/// Symmetry, sector closure and (for small L) the number of hopping entries.
pub fn sector_closure(l: usize, v: &[f64]) -> Check {
    let basis = std::sync::Arc::new(enumerate_half_filling(l).map_err(|e| TestCaseError::fail(e.to_string()))?);
    let masks = sector_masks(l);
    prop_assert_eq!(basis.len(), masks.len());
    let h = SparseHamiltonian::from_site_energies(basis.clone(), 1.0, v).unwrap();
    let dense = h.to_dense();
    prop_assert!((&dense - dense.transpose()).amax() == 0.0, "not symmetric");
    for &(i, j, x) in &h.offdiagonal {
        let (a, b) = (basis.state(i), basis.state(j));
        prop_assert_eq!(a.count_ones() as usize, l / 2);
        prop_assert_eq!(b.count_ones() as usize, l / 2);
        let diff = a ^ b;
        prop_assert!(diff.count_ones() == 2 && (diff >> diff.trailing_zeros()) == 0b11, "not an adjacent exchange");
        prop_assert_eq!(x, 2.0);
    }
    if l <= 8 {
        let bonds: usize = masks
            .iter()
            .map(|m| (0..l - 1).filter(|&i| ((m >> i) & 1) != ((m >> (i + 1)) & 1)).count())
            .sum();
        prop_assert_eq!(h.offdiagonal.len(), bonds / 2);
    }
    Ok(())
}

/// The parabolic chain commutes with the mirror exactly on `h1 = h2 (L - 1)`.
///
/// The commutator's max-norm is fixed by the site-energy differences
/// `d_i = V_i - V_(L+1-i)`: `max |d_i|` for one particle and `sum |d_i|` for the
/// half-filled chain (the sector contains the configuration aligned with `sign d`).
pub fn mirror_iff_line(family: Family, l: usize, h2: f64, factor: f64) -> Check {
    let potential = Potential::on_line(h2, factor, l);
    let spec = ProbeSpec::new(l, 1.0, potential, family).unwrap();
    let h = Hamiltonian::build(&spec, None).unwrap();
    let norm = mirror_commutator_norm(&h);
    let v = potential_values(&potential, l).unwrap();
    let d: Vec<f64> = (0..l).map(|i| (v[i] - v[l - 1 - i]).abs()).collect();
    let expected = match family {
        Family::SingleParticle => d.iter().cloned().fold(0.0, f64::max),
        Family::ManyBodyHalfFilling => d.iter().sum(),
    };
    let scale = 1.0 + h.max_abs_entry();
    prop_assert!((norm - expected).abs() <= 1e-12 * scale + 1e-9 * expected, "{norm:e} vs {expected:e}");
    prop_assert_eq!(norm <= 1e-12 * scale, factor == 1.0, "norm {:e}", norm);
    Ok(())
}

/// Ground energy never exceeds a Rayleigh quotient.
pub fn variational_bound(ev: &Evaluator, spec: &ProbeSpec, trial: &[f64]) -> Check {
    let h = ev.hamiltonian(spec).unwrap();
    let e0 = ev.lowest(spec, 1).unwrap().ground().energy;
    let dim = h.dim();
    let v: Vec<f64> = (0..dim).map(|i| trial[i % trial.len()] + 1e-3 * i as f64).collect();
    let mut hv = vec![0.0; dim];
    h.apply(&v, &mut hv);
    let num: f64 = v.iter().zip(&hv).map(|(a, b)| a * b).sum();
    let den: f64 = v.iter().map(|a| a * a).sum();
    let scale = 1.0 + h.max_abs_entry();
    prop_assert!(e0 <= num / den + 1e-10 * scale, "E0 = {e0} above Rayleigh {}", num / den);
    Ok(())
}

/// Sum of the full spectrum equals the trace.
pub fn trace_sum(l: usize, potential: Potential) -> Check {
    let spec = ProbeSpec::single_particle(l, potential).unwrap();
    let t = build_single_particle(&spec).unwrap();
    let s = full_spectrum(&t).unwrap();
    let trace: f64 = t.diag.iter().sum();
    let total: f64 = s.energies.iter().sum();
    let scale = 1.0 + t.diag.iter().map(|x| x.abs()).sum::<f64>();
    prop_assert!((trace - total).abs() <= 1e-9 * scale, "trace {trace} vs sum {total}");
    Ok(())
}

// -- Fisher information -------------------------------------------------------

/// Symmetry and PSD of QFI and CFI, and CFI below QFI, at a parabolic point.
pub fn fisher_order(ev: &Evaluator, family: Family, l: usize, h1: f64, h2: f64) -> Check {
    let s = matrix_sample(ev, family, l, h1, h2);
    let (Some(q), Some(c)) = (s.qfi, s.cfi) else {
        // solver refusals are flagged, never silent
        prop_assert!(!s.flag.is_empty());
        return Ok(());
    };
    let norm = q.norm().max(f64::MIN_POSITIVE);
    prop_assert!(q.is_symmetric() && c.is_symmetric());
    prop_assert!(q.min_eigenvalue() >= -1e-10 * norm, "QFI not PSD");
    prop_assert!(c.min_eigenvalue() >= -1e-10 * c.norm().max(f64::MIN_POSITIVE), "CFI not PSD");
    let diff = [
        [q.entries[0][0] - c.entries[0][0], q.entries[0][1] - c.entries[0][1]],
        [q.entries[1][0] - c.entries[1][0], q.entries[1][1] - c.entries[1][1]],
    ];
    prop_assert!(sym_min_eig(&diff) >= -3.0 * FD_TOLERANCE * norm, "CFI exceeds QFI");
    Ok(())
}

/// Flipping eigenvector signs before differencing changes no Fisher value.
pub fn gauge_invariance(ev: &Evaluator, spec: &ProbeSpec, flips: u64) -> Check {
    let Potential::Monomial { h, gamma } = spec.potential else {
        return Err(TestCaseError::reject("monomial probes only"));
    };
    let ground = |x: f64| -> stark_core::Result<Vec<f64>> {
        let s = spec.with_potential(Potential::monomial(x, gamma));
        Ok(ev.lowest(&s, 1)?.ground().vector.clone())
    };
    let counter = std::cell::Cell::new(0u32);
    let flipped = |x: f64| -> stark_core::Result<Vec<f64>> {
        let n = counter.get();
        counter.set(n + 1);
        let v = ground(x)?;
        Ok(if (flips >> (n % 64)) & 1 == 1 { v.into_iter().map(|a| -a).collect() } else { v })
    };
    let center = ground(h).unwrap();
    let neg_center: Vec<f64> = center.iter().map(|a| -a).collect();
    let policy = StepPolicy::default();
    let a = central_difference(h, &center, &policy, ground);
    let b = central_difference(h, &neg_center, &policy, flipped);
    match (a, b) {
        (Ok(a), Ok(b)) => {
            let qa = qfi_scalar(&center, &a.derivative);
            let qb = qfi_scalar(&neg_center, &b.derivative);
            prop_assert!((qa - qb).abs() <= 1e-10 * qa.abs().max(f64::MIN_POSITIVE), "{qa} vs {qb}");
        }
        (Err(_), Err(_)) => {}
        (a, b) => return Err(TestCaseError::fail(format!("one route failed: {:?} / {:?}", a.err(), b.err()))),
    }
    Ok(())
}

/// Dense eigenvectors of a gauged symmetric matrix agree with the library gauge.
pub fn gauge_is_deterministic(m: DMatrix<f64>) -> Check {
    let s = dense_spectrum(m.clone());
    let mut v = s.vectors.unwrap()[0].clone();
    let before = v.clone();
    gauge_fix(&mut v);
    prop_assert_eq!(v, before);
    Ok(())
}

// -- scaling ------------------------------------------------------------------

/// Multiplying F by c shifts only the intercept, by ln c.
pub fn power_law_scale(points: &[(f64, f64)], c: f64) -> Check {
    let a = fit_power_law(points).unwrap();
    let scaled: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x, c * y)).collect();
    let b = fit_power_law(&scaled).unwrap();
    prop_assert!((a.slope - b.slope).abs() <= 1e-9 * (1.0 + a.slope.abs()));
    prop_assert!((b.intercept - a.intercept - c.ln()).abs() <= 1e-9 * (1.0 + a.intercept.abs() + c.ln().abs()));
    Ok(())
}

/// Shifting x by t keeps the slope and moves the intercept by -slope t.
pub fn linear_translation(points: &[(f64, f64)], t: f64) -> Check {
    let a = fit_linear(points).unwrap();
    let moved: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x + t, y)).collect();
    let b = fit_linear(&moved).unwrap();
    let tol = 1e-8 * (1.0 + a.slope.abs() + a.intercept.abs() + t.abs() * a.slope.abs());
    prop_assert!((a.slope - b.slope).abs() <= tol);
    prop_assert!((b.intercept - (a.intercept - a.slope * t)).abs() <= tol);
    Ok(())
}

/// `F(h, L) = L^(alpha/nu) G((h - h_c) L^(1/nu))`, `G(x) = 1 / (1 + x^2)`.
pub fn synthetic_family(p: CollapseParams, sizes: &[usize], grid: &[f64]) -> CurveFamily {
    let members = sizes
        .iter()
        .map(|&l| {
            let lf = l as f64;
            let curve = grid
                .iter()
                .map(|&h| {
                    let x = (h - p.h_c) * lf.powf(1.0 / p.nu);
                    (h, lf.powf(p.alpha / p.nu) / (1.0 + x * x))
                })
                .collect();
            (l, curve)
        })
        .collect();
    CurveFamily::new(members).unwrap()
}

/// The optimizer never returns something worse than its start or the raw curves.
pub fn collapse_improves(truth: CollapseParams, init: CollapseParams, grid: &[f64]) -> Check {
    let fam = synthetic_family(truth, &[101, 201, 301, 401, 501], grid);
    let start = collapse_quality(&fam, init);
    let Ok(r) = collapse(&fam, init) else {
        prop_assert!(!start.is_finite());
        return Ok(());
    };
    prop_assert!(r.quality <= start, "quality {} above start {start}", r.quality);
    prop_assert!(r.quality <= baseline_quality(&fam), "quality {} above baseline", r.quality);
    Ok(())
}

// -- sweep plumbing -----------------------------------------------------------

fn table_rows(dir: &Path) -> Vec<Vec<String>> {
    read_rows(dir, "qfi_sweep.csv").unwrap().unwrap()
}

fn sweep_config(dir: &Path, sizes: &[usize], gammas: &[f64], count: usize, workers: usize) -> SweepConfig {
    let mut cfg = SweepConfig::new(Scenario::QfiSweep, Family::SingleParticle);
    cfg.sizes = sizes.to_vec();
    cfg.gamma = gammas.to_vec();
    cfg.h = Some(Grid::Log {
        start: 1e-8,
        stop: 1e-1,
        count,
    });
    cfg.out = dir.to_path_buf();
    cfg.workers = workers;
    cfg
}

/// 1 worker and 8 workers give identical sorted rows; a rerun solves nothing.
pub fn scheduling_and_resume(sizes: &[usize], gammas: &[f64], count: usize) -> Check {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = Runner::new(sweep_config(a.path(), sizes, gammas, count, 1)).unwrap().run().unwrap();
    let eight = Runner::new(sweep_config(b.path(), sizes, gammas, count, 8)).unwrap().run().unwrap();
    prop_assert_eq!(one.computed, sizes.len() * gammas.len() * count);
    prop_assert_eq!(eight.computed, one.computed);
    prop_assert_eq!(table_rows(a.path()), table_rows(b.path()));
    let again = Runner::new(sweep_config(a.path(), sizes, gammas, count, 3)).unwrap().run().unwrap();
    prop_assert_eq!(again.computed, 0);
    prop_assert_eq!(again.reused, one.computed);
    Ok(())
}

/// Spin value convention used by the independent Hamiltonian builders below.
pub fn spin(mask: u32, site: usize) -> f64 {
    SectorBasis::spin(mask, site)
}
