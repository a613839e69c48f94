//! Human-readable summary of scenario outputs plus plot-ready CSV files.
//!
//! Everything here is a pure function of the files in the output directory, so
//! regenerating a report from unchanged outputs gives identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::num;
use crate::error::{Error, Result};
use crate::store::{LINE_PEAKS, POINTS, QFI_SWEEP};
use crate::sweep::{read_json, read_rows, CollapseRecord, DecayRecord, FitRecord, COLLAPSE_JSON, DECAY_JSON, FITS_JSON};

pub const REPORT_TXT: &str = "report.txt";
pub const PLOT_BETA_GAMMA: &str = "plot_beta_gamma.csv";
pub const PLOT_COLLAPSE: &str = "plot_collapse.csv";
pub const PLOT_LINE_PEAKS: &str = "plot_line_peaks.csv";
pub const PLOT_POINTS: &str = "plot_points.csv";

/// Files a report can be built from.
const INPUTS: [&str; 8] = [
    FITS_JSON,
    COLLAPSE_JSON,
    DECAY_JSON,
    "qfi_sweep.csv",
    "qfi_matrix.csv",
    "cfi_sweep.csv",
    "gap.csv",
    "points.csv",
];

/// Reference exponents and their tolerances.
#[derive(Debug, Clone, Copy)]
enum Target {
    /// Linear law `y = a x + b`.
    Pair { a: f64, b: f64, tol_a: f64, tol_b: f64 },
    /// Single exponent.
    Slope { value: f64, tol: f64 },
}

fn target_for(scenario: &str) -> Option<(&'static str, Target)> {
    let pair = |a, b, tol_a, tol_b| Target::Pair { a, b, tol_a, tol_b };
    let slope = |value, tol| Target::Slope { value, tol };
    Some(match scenario {
        "beta-gamma:single-particle" => ("single-particle beta(gamma)", pair(1.99, 3.97, 0.15, 0.30)),
        "beta-gamma:many-body" => ("many-body beta(gamma) at h = 1e-6", pair(3.69, -0.45, 0.5, 0.8)),
        "inverse-nu:single-particle" => ("single-particle 1/nu(gamma)", pair(1.01, 1.97, 0.15, 0.20)),
        "beta-f11:single-particle:line=1" => ("peak F11 on h1 = h2(L-1)", slope(6.47, 0.2)),
        "beta-f22:single-particle:line=1" => ("peak F22 on h1 = h2(L-1)", slope(8.47, 0.2)),
        "beta-f12:single-particle:line=1" => ("peak F12 on h1 = h2(L-1)", slope(7.47, 0.2)),
        "beta-c11:single-particle:line=1" => ("peak C11 on h1 = h2(L-1)", slope(6.37, 0.25)),
        "beta-c22:single-particle:line=1" => ("peak C22 on h1 = h2(L-1)", slope(8.38, 0.25)),
        "beta-c12:single-particle:line=1" => ("peak C12 on h1 = h2(L-1)", slope(7.36, 0.25)),
        "gap:single-particle:extended" => ("gap, extended (h1 = 5.5e-10, h2 = 1e-12)", slope(-1.99, 0.10)),
        "gap:single-particle:near-transition" => ("gap at the F11 peak of h1 = 1.1 h2(L-1)", slope(-2.10, 0.20)),
        "gap:single-particle:localized" => ("gap, localized (h1 = 5.5, h2 = 0.01)", slope(0.77, 0.10)),
        "gap:many-body:h1=1e-4,h2=1e-4" => ("many-body gap at h1 = h2 = 1e-4", slope(-0.76, 0.20)),
        "trace:single-particle:trace-min:line=1" => ("min Tr[F^-1] on h1 = h2(L-1)", slope(-6.30, 0.30)),
        "trace:many-body:fixed:h1=1e-4,h2=1e-4" => ("many-body Tr[F^-1] at h1 = h2 = 1e-4", slope(-3.20, 0.50)),
        "normalized-f11:single-particle:peak-f11:line=1.1" => ("time-normalized F11 at the peak", slope(4.37, 0.3)),
        "normalized-f22:single-particle:peak-f11:line=1.1" => ("time-normalized F22 at the peak", slope(6.37, 0.3)),
        "normalized-f12:single-particle:peak-f11:line=1.1" => ("time-normalized F12 at the peak", slope(5.37, 0.3)),
        "normalized-f11:many-body:fixed:h1=1e-4,h2=1e-4" => ("many-body time-normalized F11", slope(2.47, 0.6)),
        "normalized-f22:many-body:fixed:h1=1e-4,h2=1e-4" => ("many-body time-normalized F22", slope(5.00, 0.6)),
        "normalized-f12:many-body:fixed:h1=1e-4,h2=1e-4" => ("many-body time-normalized F12", slope(3.73, 0.6)),
        _ => return None,
    })
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Two significant digits, switching to exponent form for small values.
fn se(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-2 {
        format!("{x:.1e}")
    } else {
        format!("{x:.3}")
    }
}

/// Preferred stderr: bootstrap when available, least squares otherwise.
fn stderrs(f: &FitRecord) -> (f64, f64) {
    (
        f.bootstrap_stderr_slope.unwrap_or(f.stderr_slope),
        f.bootstrap_stderr_intercept.unwrap_or(f.stderr_intercept),
    )
}

fn fit_line(f: &FitRecord) -> String {
    let (se_a, se_b) = stderrs(f);
    match target_for(&f.scenario) {
        Some((label, Target::Pair { a, b, tol_a, tol_b })) => {
            let ok = (f.slope - a).abs() <= tol_a && (f.intercept - b).abs() <= tol_b;
            format!(
                "{label}: a = {:.2} ± {}, b = {:.2} ± {}, target ({a:.2}, {b:.2}): {}",
                f.slope,
                se(se_a),
                f.intercept,
                se(se_b),
                verdict(ok)
            )
        }
        Some((label, Target::Slope { value, tol })) => {
            let ok = (f.slope - value).abs() <= tol;
            format!("{label}: slope = {:.2} ± {}, target {value:.2} ± {tol}: {}", f.slope, se(se_a), verdict(ok))
        }
        None => format!(
            "{}: slope = {:.4} ± {se_a:.4}, intercept = {:.4} ± {se_b:.4}, r2 = {:.6}, n = {}",
            f.scenario, f.slope, f.intercept, f.r2, f.n
        ),
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.2e}")).unwrap_or_else(|| "n/a".into())
}

fn collapse_line(c: &CollapseRecord) -> String {
    let se = &c.bootstrap_stderr;
    let mut line = format!(
        "{} collapse gamma = {}: h_c = {:.3e} ± {}, alpha = {:.3} ± {}, nu = {:.4} ± {}, quality = {:.3e}",
        c.family,
        num(c.gamma),
        c.h_c,
        opt(se.h_c),
        c.alpha,
        opt(se.alpha),
        c.nu,
        opt(se.nu),
        c.quality
    );
    if c.family == "single-particle" && c.gamma == 2.0 {
        let ok = (c.nu - 0.25).abs() <= 0.05 && (c.alpha - 2.0).abs() <= 0.1;
        let _ = write!(line, ", target (alpha, nu) = (2.00, 0.25): {}", verdict(ok));
    }
    line
}

fn decay_line(d: &DecayRecord) -> String {
    let target = match (d.family.as_str(), d.gamma == 2.0) {
        ("single-particle", true) => Some((2.0, 0.05)),
        ("many-body", true) if d.l <= 14 => Some((4.0, 0.5)),
        _ => None,
    };
    match (d.alpha, &d.error) {
        (Some(alpha), _) => {
            let mut line = format!(
                "{} tail L = {} gamma = {}: alpha = {:.3} ± {}, n = {}",
                d.family,
                d.l,
                num(d.gamma),
                alpha,
                opt(d.stderr),
                d.n
            );
            if let Some((value, tol)) = target {
                let _ = write!(line, ", target {value:.2} ± {tol}: {}", verdict((alpha - value).abs() <= tol));
            }
            line
        }
        (None, err) => format!(
            "{} tail L = {} gamma = {}: no fit ({}){}",
            d.family,
            d.l,
            num(d.gamma),
            err.as_deref().unwrap_or("unknown"),
            if target.is_some() { ": FAIL" } else { "" }
        ),
    }
}

/// alpha/nu from the collapse against the peak exponent beta for the same gamma.
fn consistency_lines(fits: &[FitRecord], collapses: &[CollapseRecord]) -> Vec<String> {
    let mut out = Vec::new();
    for c in collapses {
        let key = format!("beta:{}:gamma={}", c.family, num(c.gamma));
        let Some(beta) = fits.iter().find(|f| f.scenario == key) else { continue };
        let ratio = c.alpha / c.nu;
        let se_ratio = match (c.bootstrap_stderr.alpha, c.bootstrap_stderr.nu) {
            (Some(sa), Some(sn)) => ratio * ((sa / c.alpha).powi(2) + (sn / c.nu).powi(2)).sqrt(),
            _ => 0.0,
        };
        let se_beta = stderrs(beta).0;
        let combined = (se_ratio.powi(2) + se_beta.powi(2)).sqrt();
        out.push(format!(
            "{} gamma = {}: alpha/nu = {:.4} ± {:.4}, beta = {:.4} ± {:.4}: {}",
            c.family,
            num(c.gamma),
            ratio,
            se_ratio,
            beta.slope,
            se_beta,
            verdict((ratio - beta.slope).abs() <= combined)
        ));
    }
    out
}

fn csv(path: &Path, header: &str, rows: &[Vec<String>]) -> Result<PathBuf> {
    let mut text = String::new();
    text.push_str(header);
    text.push('\n');
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}

fn beta_gamma_rows(fits: &[FitRecord]) -> Vec<Vec<String>> {
    let mut rows: Vec<(String, f64, Vec<String>)> = fits
        .iter()
        .filter_map(|f| {
            let rest = f.scenario.strip_prefix("beta:")?;
            let (family, g) = rest.split_once(":gamma=")?;
            let gamma: f64 = g.parse().ok()?;
            let se = stderrs(f).0;
            Some((family.to_string(), gamma, vec![family.to_string(), num(gamma), num(f.slope), num(se)]))
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    rows.into_iter().map(|r| r.2).collect()
}

/// Curves rescaled with the fitted collapse parameters.
fn collapse_rows(collapses: &[CollapseRecord], sweep: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for c in collapses {
        for r in sweep {
            let (Ok(l), Ok(g), Ok(h), Ok(q)) = (r[1].parse::<f64>(), r[2].parse::<f64>(), r[3].parse::<f64>(), r[4].parse::<f64>()) else {
                continue;
            };
            if r[0] != c.family || g != c.gamma || !r[7].is_empty() || !(q > 0.0) {
                continue;
            }
            let x = (h - c.h_c) * l.powf(1.0 / c.nu);
            let y = q * l.powf(-c.alpha / c.nu);
            out.push(vec![c.family.clone(), num(c.gamma), r[1].clone(), num(h), num(x), num(y)]);
        }
    }
    out
}

/// Assembles `report.txt` and the plot-data files in `dir`.
pub fn emit_report(dir: &Path) -> Result<Vec<PathBuf>> {
    emit_report_with(dir, 1.0)
}

/// As [`emit_report`], with the number `p` of protocol repetitions a separable
/// (one parameter at a time) strategy needs. Bounds in `plot_points.csv` gain a
/// column multiplied by `p` so both strategies can be plotted side by side.
pub fn emit_report_with(dir: &Path, repetitions: f64) -> Result<Vec<PathBuf>> {
    if !(repetitions.is_finite() && repetitions >= 1.0) {
        return Err(Error::InvalidProbe(format!("repetitions must be >= 1, got {repetitions}")));
    }
    let present: Vec<&str> = INPUTS.iter().copied().filter(|n| dir.join(n).exists()).collect();
    if present.is_empty() {
        return Err(Error::NothingToReport(dir.to_path_buf()));
    }
    let fits: Vec<FitRecord> = read_json(dir, FITS_JSON)?.unwrap_or_default();
    let collapses: Vec<CollapseRecord> = read_json(dir, COLLAPSE_JSON)?.unwrap_or_default();
    let decays: Vec<DecayRecord> = read_json(dir, DECAY_JSON)?.unwrap_or_default();
    let sweep = read_rows(dir, QFI_SWEEP.0)?;
    if !collapses.is_empty() && sweep.is_none() {
        return Err(Error::MissingInputs(vec![QFI_SWEEP.0.to_string()]));
    }

    let mut text = String::new();
    let mut files = Vec::new();
    let _ = writeln!(text, "inputs: {}", present.join(", "));
    if repetitions != 1.0 {
        let _ = writeln!(text, "separable protocol repetitions: p = {}", num(repetitions));
    }

    // row counts and flagged rows per table
    let mut tables = BTreeMap::new();
    for name in present.iter().filter(|n| n.ends_with(".csv")) {
        if let Some(rows) = read_rows(dir, name)? {
            let flagged = if *name == "gap.csv" {
                rows.iter().filter(|r| !r[4].parse::<f64>().is_ok_and(f64::is_finite)).count()
            } else {
                rows.iter().filter(|r| r.last().is_some_and(|f| !f.is_empty())).count()
            };
            tables.insert(name.to_string(), (rows.len(), flagged));
        }
    }
    if !tables.is_empty() {
        let _ = writeln!(text, "\n[tables]");
        for (name, (n, flagged)) in &tables {
            let _ = writeln!(text, "{name}: {n} rows, {flagged} flagged");
        }
    }

    let (targeted, other): (Vec<&FitRecord>, Vec<&FitRecord>) = fits.iter().partition(|f| target_for(&f.scenario).is_some());
    if !targeted.is_empty() {
        let _ = writeln!(text, "\n[reference exponents]");
        for f in &targeted {
            let _ = writeln!(text, "{}", fit_line(f));
        }
    }
    if !collapses.is_empty() {
        let _ = writeln!(text, "\n[collapse]");
        for c in &collapses {
            let _ = writeln!(text, "{}", collapse_line(c));
        }
        let lines = consistency_lines(&fits, &collapses);
        if !lines.is_empty() {
            let _ = writeln!(text, "\n[alpha/nu vs beta]");
            for l in lines {
                let _ = writeln!(text, "{l}");
            }
        }
    }
    if !decays.is_empty() {
        let _ = writeln!(text, "\n[localized tail]");
        for d in &decays {
            let _ = writeln!(text, "{}", decay_line(d));
        }
    }
    if !other.is_empty() {
        let _ = writeln!(text, "\n[other fits]");
        for f in &other {
            let _ = writeln!(text, "{}", fit_line(f));
        }
    }

    let beta = beta_gamma_rows(&fits);
    if !beta.is_empty() {
        files.push(csv(&dir.join(PLOT_BETA_GAMMA), "family,gamma,beta,stderr", &beta)?);
    }
    if let Some(sweep) = &sweep {
        let rows = collapse_rows(&collapses, sweep);
        if !rows.is_empty() {
            files.push(csv(&dir.join(PLOT_COLLAPSE), "family,gamma,L,h,x,y", &rows)?);
        }
    }
    if let Some(rows) = read_rows(dir, LINE_PEAKS.0)? {
        let rows: Vec<Vec<String>> = rows.into_iter().filter(|r| r[6] != "error").collect();
        files.push(csv(&dir.join(PLOT_LINE_PEAKS), "family,L,line,entry,h2_max,f_max,boundary", &rows)?);
    }
    if let Some(rows) = read_rows(dir, POINTS.0)? {
        let rows: Vec<Vec<String>> = rows
            .into_iter()
            .map(|r| {
                let separable = r[11].parse::<f64>().map(|t| num(t * repetitions)).unwrap_or_else(|_| r[11].clone());
                vec![r[0].clone(), r[1].clone(), r[2].clone(), r[3].clone(), r[4].clone(), r[11].clone(), separable, r[12].clone()]
            })
            .collect();
        files.push(csv(&dir.join(PLOT_POINTS), "family,L,role,h1,h2,trace_inv,trace_inv_separable,gap", &rows)?);
    }

    let report = dir.join(REPORT_TXT);
    fs::write(&report, text)?;
    files.insert(0, report);
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(scenario: &str, slope: f64, intercept: f64) -> FitRecord {
        FitRecord {
            scenario: scenario.into(),
            slope,
            intercept,
            stderr_slope: 0.004,
            stderr_intercept: 0.02,
            r2: 1.0,
            n: 6,
            bootstrap_stderr_slope: None,
            bootstrap_stderr_intercept: None,
        }
    }

    #[test]
    fn beta_gamma_line_format() {
        let line = fit_line(&fit("beta-gamma:single-particle", 1.99, 3.97));
        assert_eq!(
            line,
            "single-particle beta(gamma): a = 1.99 ± 4.0e-3, b = 3.97 ± 0.020, target (1.99, 3.97): PASS"
        );
        assert!(fit_line(&fit("beta-gamma:single-particle", 2.3, 3.97)).ends_with("FAIL"));
    }

    #[test]
    fn empty_directory_has_nothing_to_report() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(emit_report(dir.path()), Err(Error::NothingToReport(_))));
    }

    #[test]
    fn collapse_without_sweep_lists_missing_input() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(COLLAPSE_JSON), "[]").unwrap();
        fs::write(dir.path().join(FITS_JSON), "[]").unwrap();
        assert!(emit_report(dir.path()).is_ok());
        let c = CollapseRecord {
            family: "single-particle".into(),
            gamma: 2.0,
            sizes: vec![101],
            h_c: 0.0,
            alpha: 2.0,
            nu: 0.25,
            quality: 0.0,
            iterations: 1,
            baseline: 1.0,
            stagnated: false,
            bootstrap_stderr: crate::sweep::StderrTriple { h_c: None, alpha: None, nu: None },
        };
        fs::write(dir.path().join(COLLAPSE_JSON), serde_json::to_string(&[c]).unwrap()).unwrap();
        match emit_report(dir.path()) {
            Err(Error::MissingInputs(names)) => assert_eq!(names, ["qfi_sweep.csv"]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
