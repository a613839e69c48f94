//! Scenario execution: grid sweeps on a worker pool, resumable tables, derived
//! fits and the figure recipes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{default_gamma_grid, num, Figure, Grid, PotentialKind, Scenario, SweepConfig};
use crate::error::{Error, Result};
use crate::fisher::{
    probabilities, qfi_perturbative, EvalOptions, Evaluator, FisherKind, FisherMatrix, FisherMethod,
};
use crate::probe::{Family, Potential};
use crate::protocols::{
    flag_of, gap_sample, line_peak, line_trace_minimum, matrix_sample, qfi_peak, qfi_sample, spec_for,
    tail_fit, usable, Entry, MatrixSample, QfiSample,
};
use crate::scaling::{
    bootstrap_fit, collapse, collapse_bootstrap, fit_beta_gamma, fit_inverse_nu, fit_power_law, CollapseParams,
    CurveFamily, FitResult, Peak,
};
use crate::spectral::full_spectrum;
use crate::store::{self, Table, CFI_SWEEP, GAP, LINE_PEAKS, PEAKS, POINTS, QFI_MATRIX, QFI_SWEEP, SPECTRUM, WAVEFUNCTION};

type Schema = (&'static str, &'static str, usize);

pub const FITS_JSON: &str = "fits.json";
pub const COLLAPSE_JSON: &str = "collapse.json";
pub const DECAY_JSON: &str = "decay_fit.json";

/// One entry of `fits.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub scenario: String,
    pub slope: f64,
    pub intercept: f64,
    pub stderr_slope: f64,
    pub stderr_intercept: f64,
    pub r2: f64,
    pub n: usize,
    /// Bootstrap spread of slope and intercept (absent when it could not be formed).
    pub bootstrap_stderr_slope: Option<f64>,
    pub bootstrap_stderr_intercept: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StderrTriple {
    pub h_c: Option<f64>,
    pub alpha: Option<f64>,
    pub nu: Option<f64>,
}

/// One entry of `collapse.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseRecord {
    pub family: String,
    pub gamma: f64,
    pub sizes: Vec<usize>,
    pub h_c: f64,
    pub alpha: f64,
    pub nu: f64,
    pub quality: f64,
    pub iterations: usize,
    pub baseline: f64,
    pub stagnated: bool,
    pub bootstrap_stderr: StderrTriple,
}

/// One entry of `decay_fit.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayRecord {
    pub family: String,
    pub l: usize,
    pub gamma: f64,
    pub alpha: Option<f64>,
    pub stderr: Option<f64>,
    pub window: Option<(f64, f64)>,
    pub n: usize,
    pub error: Option<String>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

fn fit_record(scenario: String, fit: &FitResult, boot: (f64, f64)) -> FitRecord {
    FitRecord {
        scenario,
        slope: fit.slope,
        intercept: fit.intercept,
        stderr_slope: fit.stderr_slope,
        stderr_intercept: fit.stderr_intercept,
        r2: fit.r_squared,
        n: fit.n_points,
        bootstrap_stderr_slope: finite(boot.0),
        bootstrap_stderr_intercept: finite(boot.1),
    }
}

/// What a run produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunSummary {
    pub files: Vec<PathBuf>,
    /// Rows computed in this run.
    pub computed: usize,
    /// Rows taken over from earlier runs.
    pub reused: usize,
    /// Rows whose flag records a solver failure.
    pub failures: usize,
    pub config_hash: String,
}

/// Flags that mark a failed solve, as opposed to diagnostics such as `degenerate`.
pub fn is_failure_flag(flag: &str) -> bool {
    flag.split(';').any(|f| f.starts_with("step-search") || f.starts_with("no-convergence") || f.starts_with("error"))
}

fn parse_num(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

fn join_flags(a: &str, b: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a};{b}"),
    }
}

/// Grid densities and size caps of a recipe.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Quick,
    Default,
    Full,
}

impl Mode {
    pub fn of(cfg: &SweepConfig) -> Mode {
        if cfg.quick {
            Mode::Quick
        } else if cfg.full {
            Mode::Full
        } else {
            Mode::Default
        }
    }

    fn density(self, default: usize) -> usize {
        if self == Mode::Quick {
            (default / 2).max(1)
        } else {
            default
        }
    }
}

pub struct Runner {
    cfg: SweepConfig,
    hash: String,
    strict: Evaluator,
    lenient: Evaluator,
    pool: rayon::ThreadPool,
    tables: Mutex<BTreeMap<&'static str, Arc<Mutex<Table>>>>,
    fits: Mutex<Vec<FitRecord>>,
    collapses: Mutex<Vec<CollapseRecord>>,
    decays: Mutex<Vec<DecayRecord>>,
    /// Print a single-line progress counter on stderr.
    pub progress: bool,
}

/// Runs a scenario and writes its outputs under `cfg.out`.
pub fn run_scenario(cfg: &SweepConfig) -> Result<RunSummary> {
    Runner::new(cfg.clone())?.run()
}

/// Quick mode for plain scenarios: half the grid density and the smaller sizes.
fn quick_adjusted(mut cfg: SweepConfig) -> SweepConfig {
    if !cfg.quick || matches!(cfg.scenario, Scenario::Reproduce(_)) {
        return cfg;
    }
    let halve = |g: &mut Option<Grid>| {
        if let Some(grid) = g {
            match grid {
                Grid::Log { count, .. } | Grid::Lin { count, .. } => *count = (*count).div_ceil(2).max(2),
                Grid::List(_) => {}
            }
        }
    };
    halve(&mut cfg.h);
    halve(&mut cfg.h1);
    halve(&mut cfg.h2);
    let cap = match cfg.family {
        Family::SingleParticle => 301,
        Family::ManyBodyHalfFilling => 12,
    };
    let min_keep = if cfg.scenario == Scenario::Collapse { 3 } else { 1 };
    let mut sizes = cfg.sizes.clone();
    sizes.sort_unstable();
    let kept: Vec<usize> = sizes.iter().copied().filter(|&l| l <= cap).collect();
    cfg.sizes = if kept.len() >= min_keep { kept } else { sizes.into_iter().take(min_keep).collect() };
    cfg
}

impl Runner {
    pub fn new(cfg: SweepConfig) -> Result<Runner> {
        let problems = cfg.problems();
        if !problems.is_empty() {
            return Err(Error::Config(problems));
        }
        let hash = cfg.hash();
        let cfg = quick_adjusted(cfg);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::Unsupported(format!("cannot start worker pool: {e}")))?;
        let strict = Evaluator::new(EvalOptions {
            allow_degenerate: cfg.allow_degenerate,
            ..EvalOptions::default()
        });
        let lenient = Evaluator::new(EvalOptions {
            allow_degenerate: true,
            ..EvalOptions::default()
        });
        Ok(Runner {
            hash,
            cfg,
            strict,
            lenient,
            pool,
            tables: Mutex::new(BTreeMap::new()),
            fits: Mutex::new(Vec::new()),
            collapses: Mutex::new(Vec::new()),
            decays: Mutex::new(Vec::new()),
            progress: false,
        })
    }

    pub fn config(&self) -> &SweepConfig {
        &self.cfg
    }

    fn out(&self) -> &Path {
        &self.cfg.out
    }

    fn table(&self, schema: Schema) -> Result<Arc<Mutex<Table>>> {
        let mut tables = self.tables.lock().expect("table registry");
        if let Some(t) = tables.get(schema.0) {
            return Ok(t.clone());
        }
        let t = Arc::new(Mutex::new(Table::open(self.out(), schema, &self.hash)?));
        tables.insert(schema.0, t.clone());
        Ok(t)
    }

    fn row(&self, schema: Schema, key: &[String]) -> Result<Option<Vec<String>>> {
        let t = self.table(schema)?;
        let t = t.lock().expect("table");
        Ok(t.get(key).cloned())
    }

    /// Evaluates every key not yet present in all `schemas`, in parallel on the pool.
    /// `key_of` gives the key checked in each table, `compute` the rows for each table.
    fn run_points<K, KF, CF>(&self, label: &str, schemas: &[Schema], keys: &[K], key_of: KF, compute: CF) -> Result<()>
    where
        K: Sync,
        KF: Fn(&K) -> Vec<Vec<String>> + Sync,
        CF: Fn(&K) -> Vec<Vec<Vec<String>>> + Sync,
    {
        let tables: Vec<Arc<Mutex<Table>>> = schemas.iter().map(|s| self.table(*s)).collect::<Result<_>>()?;
        let pending: Vec<&K> = keys
            .iter()
            .filter(|k| {
                let ks = key_of(k);
                tables.iter().zip(&ks).any(|(t, key)| !t.lock().expect("table").contains(key))
            })
            .collect();
        if pending.is_empty() {
            return Ok(());
        }
        let total = pending.len();
        let done = AtomicUsize::new(0);
        self.pool.install(|| {
            pending.par_iter().try_for_each(|k| -> Result<()> {
                let rows = compute(k);
                for ((t, rs), key) in tables.iter().zip(rows).zip(key_of(k)) {
                    let mut t = t.lock().expect("table");
                    if t.contains(&key) {
                        continue;
                    }
                    for r in rs {
                        t.insert(r)?;
                    }
                }
                let n = done.fetch_add(1, Ordering::Relaxed) + 1;
                if self.progress {
                    eprint!("\r[{label}] {n}/{total}");
                    if n == total {
                        eprintln!();
                    }
                }
                Ok(())
            })
        })
    }

    fn push_fit(&self, scenario: String, points: &[(f64, f64)], power_law: bool) {
        let fit = if power_law { fit_power_law(points) } else { fit_beta_gamma(points) };
        let Ok(fit) = fit else { return };
        let boot = if self.cfg.resamples > 0 && points.len() >= 3 {
            if power_law {
                bootstrap_fit(points, fit_power_law, self.cfg.resamples, self.cfg.seed)
            } else {
                bootstrap_fit(points, fit_beta_gamma, self.cfg.resamples, self.cfg.seed)
            }
        } else {
            (f64::NAN, f64::NAN)
        };
        self.fits.lock().expect("fits").push(fit_record(scenario, &fit, boot));
    }

    pub fn run(self) -> Result<RunSummary> {
        match self.cfg.scenario {
            Scenario::Spectrum => self.spectrum()?,
            Scenario::QfiSweep => {
                let hs = self.cfg.h.as_ref().map(Grid::values).unwrap_or_default();
                self.ensure_qfi(self.cfg.family, &self.cfg.gamma, &self.cfg.sizes, &hs, self.cfg.method)?;
            }
            Scenario::QfiMatrixGrid => self.matrix_grid(&[QFI_MATRIX])?,
            Scenario::CfiSweep => self.matrix_grid(&[CFI_SWEEP])?,
            Scenario::GapSweep => self.gap_sweep()?,
            Scenario::Collapse => {
                let hs = self.cfg.h.as_ref().map(Grid::values).unwrap_or_default();
                let (family, sizes) = (self.cfg.family, self.cfg.sizes.clone());
                self.ensure_qfi(family, &self.cfg.gamma, &sizes, &hs, self.cfg.method)?;
                for &g in &self.cfg.gamma {
                    self.decay_fits(family, g, &sizes, &hs)?;
                    self.collapse_fit(family, g, &sizes, &hs)?;
                }
                self.inverse_nu_fit(family);
            }
            Scenario::BetaGamma => {
                let hs = self.cfg.h.as_ref().map(Grid::values).unwrap_or_default();
                self.beta_gamma(self.cfg.family, &self.cfg.gamma.clone(), &self.cfg.sizes.clone(), &hs)?;
            }
            Scenario::MultiParamTrace => self.trace_scenario()?,
            Scenario::Reproduce(fig) => self.reproduce(fig)?,
        }
        self.finish()
    }

    fn finish(self) -> Result<RunSummary> {
        let mut summary = RunSummary {
            config_hash: self.hash.clone(),
            ..RunSummary::default()
        };
        fs::create_dir_all(self.out())?;
        let tables = std::mem::take(&mut *self.tables.lock().expect("table registry"));
        for (_, t) in tables {
            let t = Arc::try_unwrap(t)
                .map_err(|_| Error::Unsupported("table still shared at finish".into()))?
                .into_inner()
                .expect("table");
            summary.computed += t.computed;
            summary.reused += t.len() - t.computed;
            summary.failures += t
                .sorted_rows()
                .iter()
                .filter(|r| {
                    let flag = r.last().map(String::as_str).unwrap_or("");
                    is_failure_flag(flag) || (t.name() == GAP.0 && !parse_num(flag).is_finite())
                })
                .count();
            summary.files.push(t.finish()?);
        }
        let mut fits = self.fits.into_inner().expect("fits");
        fits.sort_by(|a, b| a.scenario.cmp(&b.scenario));
        if !fits.is_empty() {
            summary.files.push(write_json(self.cfg.out.as_path(), FITS_JSON, &fits)?);
        }
        let collapses = self.collapses.into_inner().expect("collapses");
        if !collapses.is_empty() {
            summary.files.push(write_json(self.cfg.out.as_path(), COLLAPSE_JSON, &collapses)?);
        }
        let decays = self.decays.into_inner().expect("decays");
        if !decays.is_empty() {
            summary.files.push(write_json(self.cfg.out.as_path(), DECAY_JSON, &decays)?);
        }
        summary.files.sort();
        Ok(summary)
    }

    // -- single-parameter QFI ------------------------------------------------

    fn qfi_key(family: Family, l: usize, gamma: f64, h: f64) -> Vec<String> {
        vec![family.key().into(), l.to_string(), num(gamma), num(h)]
    }

    fn compute_qfi(&self, family: Family, l: usize, gamma: f64, h: f64, method: FisherMethod) -> Vec<String> {
        let mut row = Self::qfi_key(family, l, gamma, h);
        let (qfi, step, flag) = match method {
            FisherMethod::FiniteDifference => {
                let s = qfi_sample(&self.strict, family, l, gamma, h);
                (s.qfi, s.step, s.flag)
            }
            FisherMethod::Perturbative => {
                match spec_for(family, l, Potential::monomial(h, gamma)).and_then(|s| qfi_perturbative(&s)) {
                    Ok(p) => (p.total, 0.0, String::new()),
                    Err(e) => (f64::NAN, 0.0, flag_of(&e)),
                }
            }
        };
        row.extend([num(qfi), method.key().into(), num(step), flag]);
        row
    }

    pub fn ensure_qfi(&self, family: Family, gammas: &[f64], sizes: &[usize], hs: &[f64], method: FisherMethod) -> Result<()> {
        let keys: Vec<(usize, f64, f64)> = sizes
            .iter()
            .flat_map(|&l| gammas.iter().flat_map(move |&g| hs.iter().map(move |&h| (l, g, h))))
            .collect();
        self.run_points(
            "qfi",
            &[QFI_SWEEP],
            &keys,
            |&(l, g, h)| vec![Self::qfi_key(family, l, g, h)],
            |&(l, g, h)| vec![vec![self.compute_qfi(family, l, g, h, method)]],
        )
    }

    /// Samples of one curve, read back from the table.
    pub fn qfi_curve(&self, family: Family, l: usize, gamma: f64, hs: &[f64]) -> Result<Vec<QfiSample>> {
        let t = self.table(QFI_SWEEP)?;
        let t = t.lock().expect("table");
        Ok(hs
            .iter()
            .filter_map(|&h| t.get(&Self::qfi_key(family, l, gamma, h)))
            .map(|r| QfiSample {
                h: parse_num(&r[3]),
                qfi: parse_num(&r[4]),
                step: parse_num(&r[6]),
                flag: r[7].clone(),
            })
            .collect())
    }

    fn peak_key(family: Family, l: usize, gamma: f64) -> Vec<String> {
        vec![family.key().into(), l.to_string(), num(gamma)]
    }

    /// Refined QFI peaks for every `(L, gamma)`.
    pub fn ensure_peaks(&self, family: Family, gammas: &[f64], sizes: &[usize], hs: &[f64]) -> Result<()> {
        let keys: Vec<(usize, f64)> = sizes.iter().flat_map(|&l| gammas.iter().map(move |&g| (l, g))).collect();
        self.run_points(
            "peaks",
            &[PEAKS],
            &keys,
            |&(l, g)| vec![Self::peak_key(family, l, g)],
            |&(l, g)| {
                let mut row = Self::peak_key(family, l, g);
                let peak = self
                    .qfi_curve(family, l, g, hs)
                    .and_then(|s| qfi_peak(&self.strict, family, l, g, &s));
                match peak {
                    Ok(p) => row.extend([num(p.h_max), num(p.f_max), p.boundary.to_string()]),
                    Err(_) => row.extend(["nan".into(), "nan".into(), "error".into()]),
                }
                vec![vec![row]]
            },
        )
    }

    pub fn peak(&self, family: Family, l: usize, gamma: f64) -> Result<Option<Peak>> {
        Ok(self.row(PEAKS, &Self::peak_key(family, l, gamma))?.and_then(|r| {
            let (h_max, f_max) = (parse_num(&r[3]), parse_num(&r[4]));
            (h_max.is_finite() && f_max.is_finite()).then_some(Peak {
                h_max,
                f_max,
                index: 0,
                boundary: r[5] == "true",
            })
        }))
    }

    /// Per-gamma size exponents and the linear law over gamma.
    fn beta_gamma(&self, family: Family, gammas: &[f64], sizes: &[usize], hs: &[f64]) -> Result<()> {
        self.ensure_qfi(family, gammas, sizes, hs, self.cfg.method)?;
        let fixed_field = family == Family::ManyBodyHalfFilling;
        if !fixed_field {
            self.ensure_peaks(family, gammas, sizes, hs)?;
        }
        let mut betas = Vec::new();
        for &g in gammas {
            let mut pts = Vec::new();
            for &l in sizes {
                let value = if fixed_field {
                    self.qfi_curve(family, l, g, &hs[..1])?
                        .first()
                        .filter(|s| s.ok())
                        .map(|s| s.qfi)
                } else {
                    self.peak(family, l, g)?.map(|p| p.f_max)
                };
                if let Some(v) = value {
                    pts.push((l as f64, v));
                }
            }
            if pts.len() >= 3 {
                if let Ok(fit) = fit_power_law(&pts) {
                    betas.push((g, fit.slope));
                }
                self.push_fit(format!("beta:{}:gamma={}", family.key(), num(g)), &pts, true);
            }
        }
        if betas.len() >= 3 {
            self.push_fit(format!("beta-gamma:{}", family.key()), &betas, false);
        }
        Ok(())
    }

    fn decay_fits(&self, family: Family, gamma: f64, sizes: &[usize], hs: &[f64]) -> Result<()> {
        for &l in sizes {
            let curve = usable(&self.qfi_curve(family, l, gamma, hs)?);
            let rec = match tail_fit(&curve) {
                Ok(d) => DecayRecord {
                    family: family.key().into(),
                    l,
                    gamma,
                    alpha: finite(d.alpha),
                    stderr: finite(d.fit.stderr_slope),
                    window: Some(d.window),
                    n: d.fit.n_points,
                    error: None,
                },
                Err(e) => DecayRecord {
                    family: family.key().into(),
                    l,
                    gamma,
                    alpha: None,
                    stderr: None,
                    window: None,
                    n: 0,
                    error: Some(e.to_string()),
                },
            };
            self.decays.lock().expect("decays").push(rec);
        }
        Ok(())
    }

    fn collapse_fit(&self, family: Family, gamma: f64, sizes: &[usize], hs: &[f64]) -> Result<()> {
        let mut members = Vec::new();
        for &l in sizes {
            members.push((l, usable(&self.qfi_curve(family, l, gamma, hs)?)));
        }
        let Ok(fam) = CurveFamily::new(members) else { return Ok(()) };
        let init = CollapseParams {
            h_c: 1e-12,
            alpha: 2.0,
            nu: 1.0 / (gamma + 2.0),
        };
        let Ok(r) = collapse(&fam, init) else { return Ok(()) };
        let se = if self.cfg.resamples > 0 {
            self.pool.install(|| collapse_bootstrap(&fam, &r, self.cfg.resamples, self.cfg.seed))
        } else {
            crate::scaling::CollapseStderr {
                h_c: f64::NAN,
                alpha: f64::NAN,
                nu: f64::NAN,
            }
        };
        self.collapses.lock().expect("collapses").push(CollapseRecord {
            family: family.key().into(),
            gamma,
            sizes: sizes.to_vec(),
            h_c: r.h_c,
            alpha: r.alpha,
            nu: r.nu,
            quality: r.quality,
            iterations: r.iterations,
            baseline: r.baseline,
            stagnated: r.stagnated,
            bootstrap_stderr: StderrTriple {
                h_c: finite(se.h_c),
                alpha: finite(se.alpha),
                nu: finite(se.nu),
            },
        });
        Ok(())
    }

    fn inverse_nu_fit(&self, family: Family) {
        let pts: Vec<(f64, f64)> = self
            .collapses
            .lock()
            .expect("collapses")
            .iter()
            .filter(|c| c.family == family.key())
            .map(|c| (c.gamma, 1.0 / c.nu))
            .collect();
        if pts.len() >= 3 {
            if let Ok(fit) = fit_inverse_nu(&pts) {
                let boot = if self.cfg.resamples > 0 {
                    bootstrap_fit(&pts, fit_inverse_nu, self.cfg.resamples, self.cfg.seed)
                } else {
                    (f64::NAN, f64::NAN)
                };
                self.fits
                    .lock()
                    .expect("fits")
                    .push(fit_record(format!("inverse-nu:{}", family.key()), &fit, boot));
            }
        }
    }

    // -- spectra -------------------------------------------------------------

    fn spectrum(&self) -> Result<()> {
        let family = self.cfg.family;
        let kind = self.cfg.potential;
        let mut keys = Vec::new();
        for &l in &self.cfg.sizes {
            match kind {
                PotentialKind::Monomial => {
                    let hs = self.cfg.h.as_ref().map(Grid::values).unwrap_or_default();
                    for &g in &self.cfg.gamma {
                        keys.extend(hs.iter().map(|&h| (l, g, h)));
                    }
                }
                PotentialKind::Parabolic => keys.extend(self.cfg.field_pairs(l).into_iter().map(|(a, b)| (l, a, b))),
            }
        }
        let prefix = |l: usize, a: f64, b: f64| vec![family.key().to_string(), l.to_string(), kind.key().into(), num(a), num(b)];
        self.run_points(
            "spectrum",
            &[SPECTRUM],
            &keys,
            |&(l, a, b)| {
                let mut k = prefix(l, a, b);
                k.push("1".into());
                vec![k]
            },
            |&(l, a, b)| {
                let potential = match kind {
                    PotentialKind::Monomial => Potential::monomial(b, a),
                    PotentialKind::Parabolic => Potential::parabolic(a, b),
                };
                let energies = spec_for(family, l, potential).and_then(|spec| match family {
                    Family::SingleParticle => {
                        let h = crate::probe::build_single_particle(&spec)?;
                        let mut e = full_spectrum(&h)?.energies;
                        if let Some(n) = self.cfg.levels {
                            e.truncate(n);
                        }
                        Ok(e)
                    }
                    Family::ManyBodyHalfFilling => {
                        let k = self.cfg.levels.unwrap_or(4);
                        let low = self.strict.lowest(&spec, k)?;
                        Ok(low.pairs.iter().map(|p| p.energy).collect())
                    }
                });
                let rows = match energies {
                    Ok(e) => e
                        .iter()
                        .enumerate()
                        .map(|(i, en)| {
                            let mut r = prefix(l, a, b);
                            r.extend([(i + 1).to_string(), num(*en)]);
                            r
                        })
                        .collect(),
                    Err(_) => {
                        let mut r = prefix(l, a, b);
                        r.extend(["1".into(), "nan".into()]);
                        vec![r]
                    }
                };
                vec![rows]
            },
        )
    }

    // -- two-parameter probes ------------------------------------------------

    fn matrix_key(l: usize, h1: f64, h2: f64) -> Vec<String> {
        vec![l.to_string(), num(h1), num(h2)]
    }

    fn cfi_key(family: Family, l: usize, h1: f64, h2: f64, povm: &str) -> Vec<String> {
        vec![family.key().into(), l.to_string(), num(h1), num(h2), povm.into()]
    }

    fn matrix_rows(family: Family, s: &MatrixSample) -> (Vec<String>, Vec<String>) {
        let povm = crate::fisher::Povm::for_family(family).key();
        let mut q = Self::matrix_key(s.l, s.h1, s.h2);
        let mut flag = s.flag.clone();
        match &s.qfi {
            Some(m) => {
                if s.trace_inv.is_none() {
                    flag = join_flags(&flag, "ill-conditioned");
                }
                q.extend([
                    num(m.get(0, 0)),
                    num(m.get(0, 1)),
                    num(m.get(1, 1)),
                    num(s.trace_inv.unwrap_or(f64::NAN)),
                    num(s.weak_comm_residual),
                ]);
            }
            None => q.extend(std::iter::repeat_n("nan".to_string(), 5)),
        }
        q.push(flag);
        let mut c = Self::cfi_key(family, s.l, s.h1, s.h2, povm);
        match &s.cfi {
            Some(m) => {
                c.extend([num(m.get(0, 0)), num(m.get(0, 1)), num(m.get(1, 1))]);
                c.push(s.flag.clone());
            }
            None => {
                c.extend(std::iter::repeat_n("nan".to_string(), 3));
                c.push(if s.flag.is_empty() { "error: cfi unavailable".into() } else { s.flag.clone() });
            }
        }
        (q, c)
    }

    fn evaluator(&self, lenient: bool) -> &Evaluator {
        if lenient {
            &self.lenient
        } else {
            &self.strict
        }
    }

    /// Two-parameter samples for `(L, h1, h2)` points, written to the chosen tables
    /// (`QFI_MATRIX` and/or `CFI_SWEEP`).
    fn ensure_matrix(&self, family: Family, points: &[(usize, f64, f64)], schemas: &[Schema], lenient: bool) -> Result<()> {
        let povm = crate::fisher::Povm::for_family(family).key();
        let ev = self.evaluator(lenient);
        self.run_points(
            "matrix",
            schemas,
            points,
            |&(l, a, b)| {
                schemas
                    .iter()
                    .map(|s| {
                        if s.0 == QFI_MATRIX.0 {
                            Self::matrix_key(l, a, b)
                        } else {
                            Self::cfi_key(family, l, a, b, povm)
                        }
                    })
                    .collect()
            },
            |&(l, a, b)| {
                let s = matrix_sample(ev, family, l, a, b);
                let (q, c) = Self::matrix_rows(family, &s);
                schemas
                    .iter()
                    .map(|sch| if sch.0 == QFI_MATRIX.0 { vec![q.clone()] } else { vec![c.clone()] })
                    .collect()
            },
        )
    }

    /// Reassembles a sample from the tables (the gap is not stored there).
    pub fn stored_sample(&self, family: Family, l: usize, h1: f64, h2: f64) -> Result<Option<MatrixSample>> {
        let Some(q) = self.row(QFI_MATRIX, &Self::matrix_key(l, h1, h2))? else {
            return Ok(None);
        };
        let povm = crate::fisher::Povm::for_family(family).key();
        let c = self.row(CFI_SWEEP, &Self::cfi_key(family, l, h1, h2, povm))?;
        let matrix = |a: f64, b: f64, d: f64, kind| FisherMatrix {
            order: 2,
            entries: [[a, b], [b, d]],
            kind,
            method: FisherMethod::FiniteDifference,
            weak_commutativity_residual: None,
            degenerate: false,
        };
        let (f11, f12, f22) = (parse_num(&q[3]), parse_num(&q[4]), parse_num(&q[5]));
        let flag = q[8].clone();
        let qfi = f11.is_finite().then(|| matrix(f11, f12, f22, FisherKind::Quantum));
        let cfi = c.and_then(|c| {
            let v = (parse_num(&c[5]), parse_num(&c[6]), parse_num(&c[7]));
            v.0.is_finite().then(|| matrix(v.0, v.1, v.2, FisherKind::Classical))
        });
        let solver_flag = flag
            .split(';')
            .filter(|f| *f != "ill-conditioned")
            .collect::<Vec<_>>()
            .join(";");
        Ok(Some(MatrixSample {
            l,
            h1,
            h2,
            qfi,
            cfi,
            gap: f64::NAN,
            trace_inv: finite(parse_num(&q[6])),
            weak_comm_residual: parse_num(&q[7]),
            commutator_rel: f64::NAN,
            flag: solver_flag,
        }))
    }

    fn matrix_grid(&self, schemas: &[Schema]) -> Result<()> {
        let points: Vec<(usize, f64, f64)> = self
            .cfg
            .sizes
            .iter()
            .flat_map(|&l| self.cfg.field_pairs(l).into_iter().map(move |(a, b)| (l, a, b)))
            .collect();
        self.ensure_matrix(self.cfg.family, &points, schemas, self.cfg.allow_degenerate)
    }

    fn gap_key(family: Family, l: usize, h1: f64, h2: f64) -> Vec<String> {
        vec![family.key().into(), l.to_string(), num(h1), num(h2)]
    }

    fn ensure_gaps(&self, family: Family, points: &[(usize, f64, f64)]) -> Result<()> {
        self.run_points(
            "gap",
            &[GAP],
            points,
            |&(l, a, b)| vec![Self::gap_key(family, l, a, b)],
            |&(l, a, b)| {
                let g = gap_sample(&self.strict, family, l, a, b).map(|g| g.gap).unwrap_or(f64::NAN);
                let mut r = Self::gap_key(family, l, a, b);
                r.push(num(g));
                vec![vec![r]]
            },
        )
    }

    fn gap(&self, family: Family, l: usize, h1: f64, h2: f64) -> Result<f64> {
        Ok(self
            .row(GAP, &Self::gap_key(family, l, h1, h2))?
            .map(|r| parse_num(&r[4]))
            .unwrap_or(f64::NAN))
    }

    /// Gap exponents for fixed fields or a line at fixed `h2`.
    fn gap_fit(&self, family: Family, label: &str, points: &[(usize, f64, f64)]) -> Result<()> {
        self.ensure_gaps(family, points)?;
        let mut pts = Vec::new();
        for &(l, a, b) in points {
            let g = self.gap(family, l, a, b)?;
            if g.is_finite() && g > 0.0 {
                pts.push((l as f64, g));
            }
        }
        if pts.len() >= 3 {
            self.push_fit(format!("gap:{}:{label}", family.key()), &pts, true);
        }
        Ok(())
    }

    fn gap_sweep(&self) -> Result<()> {
        let family = self.cfg.family;
        let sizes = &self.cfg.sizes;
        let h2s = self.cfg.h2.as_ref().map(Grid::values).unwrap_or_default();
        match (self.cfg.line, &self.cfg.h1) {
            (Some(f), _) => {
                for &b in &h2s {
                    let pts: Vec<_> = sizes.iter().map(|&l| (l, f * b * (l as f64 - 1.0), b)).collect();
                    self.gap_fit(family, &format!("line={},h2={}", num(f), num(b)), &pts)?;
                }
            }
            (None, Some(h1)) => {
                for &a in &h1.values() {
                    for &b in &h2s {
                        let pts: Vec<_> = sizes.iter().map(|&l| (l, a, b)).collect();
                        self.gap_fit(family, &format!("h1={},h2={}", num(a), num(b)), &pts)?;
                    }
                }
            }
            (None, None) => {}
        }
        Ok(())
    }

    fn point_key(family: Family, l: usize, role: &str) -> Vec<String> {
        vec![family.key().into(), l.to_string(), role.into()]
    }

    fn point_row(family: Family, role: &str, s: &MatrixSample) -> Vec<String> {
        let mut r = Self::point_key(family, s.l, role);
        r.extend([num(s.h1), num(s.h2)]);
        for m in [&s.qfi, &s.cfi] {
            match m {
                Some(m) => r.extend([num(m.get(0, 0)), num(m.get(0, 1)), num(m.get(1, 1))]),
                None => r.extend(std::iter::repeat_n("nan".to_string(), 3)),
            }
        }
        r.extend([num(s.trace_inv.unwrap_or(f64::NAN)), num(s.gap)]);
        let mut flag = s.flag.clone();
        if s.qfi.is_none() && flag.is_empty() {
            flag = "error: no Fisher matrix".into();
        } else if s.qfi.is_some() && s.trace_inv.is_none() {
            flag = join_flags(&flag, "ill-conditioned");
        }
        r.push(flag);
        r
    }

    /// A special point read back from `points.csv`.
    pub fn stored_point(&self, family: Family, l: usize, role: &str) -> Result<Option<MatrixSample>> {
        Ok(self.row(POINTS, &Self::point_key(family, l, role))?.map(|r| {
            let v: Vec<f64> = r[3..13].iter().map(|s| parse_num(s)).collect();
            let matrix = |a: f64, b: f64, d: f64, kind| {
                a.is_finite().then_some(FisherMatrix {
                    order: 2,
                    entries: [[a, b], [b, d]],
                    kind,
                    method: FisherMethod::FiniteDifference,
                    weak_commutativity_residual: None,
                    degenerate: false,
                })
            };
            MatrixSample {
                l,
                h1: v[0],
                h2: v[1],
                qfi: matrix(v[2], v[3], v[4], FisherKind::Quantum),
                cfi: matrix(v[5], v[6], v[7], FisherKind::Classical),
                gap: v[9],
                trace_inv: finite(v[8]),
                weak_comm_residual: f64::NAN,
                commutator_rel: f64::NAN,
                flag: r[13].clone(),
            }
        }))
    }

    fn line_points(sizes: &[usize], factor: f64, h2s: &[f64]) -> Vec<(usize, f64, f64)> {
        sizes
            .iter()
            .flat_map(|&l| h2s.iter().map(move |&b| (l, factor * b * (l as f64 - 1.0), b)))
            .collect()
    }

    fn line_scan_stored(&self, family: Family, l: usize, factor: f64, h2s: &[f64]) -> Result<Vec<MatrixSample>> {
        let mut out = Vec::new();
        for &b in h2s {
            if let Some(s) = self.stored_sample(family, l, factor * b * (l as f64 - 1.0), b)? {
                out.push(s);
            }
        }
        Ok(out)
    }

    fn line_peak_key(family: Family, l: usize, factor: f64, entry: Entry) -> Vec<String> {
        vec![family.key().into(), l.to_string(), num(factor), entry.name().into()]
    }

    /// Refined peaks of matrix entries along a line for each size.
    fn ensure_line_peaks(&self, family: Family, sizes: &[usize], factor: f64, h2s: &[f64], entries: &[Entry]) -> Result<()> {
        let keys: Vec<(usize, Entry)> = sizes.iter().flat_map(|&l| entries.iter().map(move |&e| (l, e))).collect();
        let lenient = factor == 1.0;
        self.run_points(
            "line peaks",
            &[LINE_PEAKS],
            &keys,
            |&(l, e)| vec![Self::line_peak_key(family, l, factor, e)],
            |&(l, e)| {
                let mut row = Self::line_peak_key(family, l, factor, e);
                let peak = self
                    .line_scan_stored(family, l, factor, h2s)
                    .and_then(|scan| line_peak(self.evaluator(lenient), family, l, factor, &scan, e));
                match peak {
                    Ok(p) => row.extend([num(p.h_max), num(p.f_max), p.boundary.to_string()]),
                    Err(_) => row.extend(["nan".into(), "nan".into(), "error".into()]),
                }
                vec![vec![row]]
            },
        )
    }

    pub fn line_peak(&self, family: Family, l: usize, factor: f64, entry: Entry) -> Result<Option<Peak>> {
        Ok(self.row(LINE_PEAKS, &Self::line_peak_key(family, l, factor, entry))?.and_then(|r| {
            let (h, f) = (parse_num(&r[4]), parse_num(&r[5]));
            (h.is_finite() && f.is_finite()).then_some(Peak {
                h_max: h,
                f_max: f,
                index: 0,
                boundary: r[6] == "true",
            })
        }))
    }

    fn line_peak_fits(&self, family: Family, sizes: &[usize], factor: f64, entries: &[Entry]) -> Result<()> {
        for &e in entries {
            let mut pts = Vec::new();
            for &l in sizes {
                if let Some(p) = self.line_peak(family, l, factor, e)? {
                    pts.push((l as f64, p.f_max));
                }
            }
            if pts.len() >= 3 {
                self.push_fit(format!("beta-{}:{}:line={}", e.name(), family.key(), num(factor)), &pts, true);
            }
        }
        Ok(())
    }

    /// Full evaluation (with gap) at a named point, stored in `points.csv`.
    fn ensure_point<F>(&self, family: Family, keys: &[(usize, String)], lenient: bool, fields: F) -> Result<()>
    where
        F: Fn(usize, &str) -> Option<(f64, f64)> + Sync,
    {
        let ev = self.evaluator(lenient);
        self.run_points(
            "points",
            &[POINTS],
            keys,
            |(l, role)| vec![Self::point_key(family, *l, role)],
            |(l, role)| {
                let s = match fields(*l, role) {
                    Some((a, b)) => matrix_sample(ev, family, *l, a, b),
                    None => MatrixSample {
                        l: *l,
                        h1: f64::NAN,
                        h2: f64::NAN,
                        qfi: None,
                        cfi: None,
                        gap: f64::NAN,
                        trace_inv: None,
                        weak_comm_residual: f64::NAN,
                        commutator_rel: f64::NAN,
                        flag: "error: location unavailable".into(),
                    },
                };
                vec![vec![Self::point_row(family, role, &s)]]
            },
        )
    }

    /// Minimum of `Tr[F^-1]` along a line for each size.
    fn trace_minima(&self, family: Family, sizes: &[usize], factor: f64, h2s: &[f64]) -> Result<()> {
        let role = format!("trace-min:line={}", num(factor));
        let lenient = factor == 1.0;
        let keys: Vec<(usize, String)> = sizes.iter().map(|&l| (l, role.clone())).collect();
        self.ensure_point(family, &keys, lenient, |l, _| {
            let scan = self.line_scan_stored(family, l, factor, h2s).ok()?;
            let s = line_trace_minimum(self.evaluator(lenient), family, l, factor, &scan).ok()?;
            Some((s.h1, s.h2))
        })?;
        self.point_fit(family, sizes, &role, "trace", |s| s.trace_inv)
    }

    fn point_fit(&self, family: Family, sizes: &[usize], role: &str, name: &str, value: impl Fn(&MatrixSample) -> Option<f64>) -> Result<()> {
        let mut pts = Vec::new();
        for &l in sizes {
            if let Some(v) = self.stored_point(family, l, role)?.as_ref().and_then(&value) {
                if v.is_finite() && v > 0.0 {
                    pts.push((l as f64, v));
                }
            }
        }
        if pts.len() >= 3 {
            self.push_fit(format!("{name}:{}:{role}", family.key()), &pts, true);
        }
        Ok(())
    }

    /// Time-normalized entries `F * gap` at a named point.
    fn normalized_fits(&self, family: Family, sizes: &[usize], role: &str) -> Result<()> {
        for (name, i, j) in [("normalized-f11", 0, 0), ("normalized-f22", 1, 1), ("normalized-f12", 0, 1)] {
            self.point_fit(family, sizes, role, name, |s| {
                s.qfi.map(|q| (q.get(i, j) * s.gap).abs()).filter(|v| s.gap > 0.0 && v.is_finite())
            })?;
        }
        Ok(())
    }

    fn trace_scenario(&self) -> Result<()> {
        let family = self.cfg.family;
        let sizes = self.cfg.sizes.clone();
        let h2s = self.cfg.h2.as_ref().map(Grid::values).unwrap_or_default();
        self.matrix_grid(&[QFI_MATRIX])?;
        match self.cfg.line {
            Some(f) => self.trace_minima(family, &sizes, f, &h2s),
            None => {
                let role = "trace-min:grid";
                let keys: Vec<(usize, String)> = sizes.iter().map(|&l| (l, role.to_string())).collect();
                self.ensure_point(family, &keys, self.cfg.allow_degenerate, |l, _| {
                    let mut best: Option<(f64, f64, f64)> = None;
                    for (a, b) in self.cfg.field_pairs(l) {
                        let s = self.stored_sample(family, l, a, b).ok().flatten()?;
                        if let (true, Some(t)) = (s.ok(), s.trace_inv) {
                            if best.is_none_or(|(_, _, bt)| t < bt) {
                                best = Some((a, b, t));
                            }
                        }
                    }
                    best.map(|(a, b, _)| (a, b))
                })?;
                self.point_fit(family, &sizes, role, "trace", |s| s.trace_inv)
            }
        }
    }

    // -- wavefunctions -------------------------------------------------------

    fn ensure_wavefunctions(&self, points: &[(usize, f64, f64)]) -> Result<()> {
        self.run_points(
            "wavefunction",
            &[WAVEFUNCTION],
            points,
            |&(l, a, b)| vec![vec![l.to_string(), num(a), num(b), "1".into()]],
            |&(l, a, b)| {
                let probs = spec_for(Family::SingleParticle, l, Potential::parabolic(a, b))
                    .and_then(|spec| self.lenient.lowest(&spec, 1))
                    .map(|low| probabilities(&low.ground().vector))
                    .unwrap_or_else(|_| vec![f64::NAN; l]);
                let rows = probs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| vec![l.to_string(), num(a), num(b), (i + 1).to_string(), num(*p)])
                    .collect();
                vec![rows]
            },
        )
    }

    // -- figure recipes ------------------------------------------------------

    fn reproduce(&self, fig: Figure) -> Result<()> {
        let mode = Mode::of(&self.cfg);
        let sp_sizes: Vec<usize> = if mode == Mode::Quick { vec![101, 201, 301] } else { vec![101, 201, 301, 401, 501] };
        let line_h2: Vec<f64> = Grid::per_decade(1e-13, 1e-3, mode.density(20)).values();
        let q_entries = [Entry::Q11, Entry::Q22, Entry::Q12];
        let c_entries = [Entry::C11, Entry::C22, Entry::C12];
        let mb_param_sizes: Vec<usize> = if mode == Mode::Quick { vec![8, 10, 12] } else { vec![8, 10, 12, 14, 16] };
        let sp = Family::SingleParticle;
        let mb = Family::ManyBodyHalfFilling;
        let both_tables = [QFI_MATRIX, CFI_SWEEP];
        match fig {
            Figure::Fig1 => {
                let gammas = if mode == Mode::Quick { vec![1.0, 2.0, 3.0] } else { default_gamma_grid() };
                let hs = Grid::per_decade(1e-14, 1e-1, mode.density(40)).values();
                self.beta_gamma(sp, &gammas, &sp_sizes, &hs)?;
                self.decay_fits(sp, 2.0, &sp_sizes, &hs)?;
                for &g in &gammas {
                    self.collapse_fit(sp, g, &sp_sizes, &hs)?;
                }
                self.inverse_nu_fit(sp);
            }
            Figure::Fig2 => {
                let sizes: Vec<usize> = match mode {
                    Mode::Quick => vec![6, 8, 10, 12],
                    Mode::Default => vec![6, 8, 10, 12, 14, 16],
                    Mode::Full => vec![6, 8, 10, 12, 14, 16, 18],
                };
                // the many-body tail sits at fields of order J, above the default grid
                let hs = Grid::per_decade(1e-14, 1e2, mode.density(40)).values();
                self.ensure_qfi(mb, &[2.0], &sizes, &hs, FisherMethod::FiniteDifference)?;
                self.decay_fits(mb, 2.0, &sizes, &hs)?;
                let gammas = if mode == Mode::Quick { vec![1.0, 2.0, 3.0] } else { default_gamma_grid() };
                self.beta_gamma(mb, &gammas, &sizes, &[1e-6])?;
            }
            Figure::Fig3 => {
                let per = mode.density(10);
                let grid: Vec<(usize, f64, f64)> = Grid::per_decade(1e-9, 1e1, per)
                    .values()
                    .into_iter()
                    .flat_map(|a| Grid::per_decade(1e-11, 1e-1, per).values().into_iter().map(move |b| (101, a, b)))
                    .collect();
                self.ensure_matrix(sp, &grid, &[QFI_MATRIX], true)?;
                let mut wave = vec![(101, 5.5, 0.01)];
                for factor in [1.0, 1.1] {
                    self.ensure_matrix(sp, &Self::line_points(&sp_sizes, factor, &line_h2), &both_tables, factor == 1.0)?;
                    self.ensure_line_peaks(sp, &sp_sizes, factor, &line_h2, &q_entries)?;
                    self.line_peak_fits(sp, &sp_sizes, factor, &q_entries)?;
                    if let Some(p) = self.line_peak(sp, 101, factor, Entry::Q11)? {
                        wave.push((101, factor * p.h_max * 100.0, p.h_max));
                    }
                }
                self.ensure_wavefunctions(&wave)?;
            }
            Figure::Fig5 => {
                for factor in [1.0, 1.1] {
                    self.ensure_matrix(sp, &Self::line_points(&sp_sizes, factor, &line_h2), &both_tables, factor == 1.0)?;
                    let entries: Vec<Entry> = q_entries.iter().chain(&c_entries).copied().collect();
                    self.ensure_line_peaks(sp, &sp_sizes, factor, &line_h2, &entries)?;
                    self.line_peak_fits(sp, &sp_sizes, factor, &entries)?;
                }
            }
            Figure::Fig6 => {
                let fixed = |h1: f64, h2: f64| sp_sizes.iter().map(|&l| (l, h1, h2)).collect::<Vec<_>>();
                self.gap_fit(sp, "extended", &fixed(5.5e-10, 1e-12))?;
                self.gap_fit(sp, "localized", &fixed(5.5, 0.01))?;
                // near the transition: the QFI peak of the offset line
                self.ensure_matrix(sp, &Self::line_points(&sp_sizes, 1.1, &line_h2), &both_tables, false)?;
                self.ensure_line_peaks(sp, &sp_sizes, 1.1, &line_h2, &[Entry::Q11])?;
                let role = "peak-f11:line=1.1";
                let keys: Vec<(usize, String)> = sp_sizes.iter().map(|&l| (l, role.to_string())).collect();
                self.ensure_point(sp, &keys, false, |l, _| {
                    let p = self.line_peak(sp, l, 1.1, Entry::Q11).ok().flatten()?;
                    Some((1.1 * p.h_max * (l as f64 - 1.0), p.h_max))
                })?;
                let mut near = Vec::new();
                for &l in &sp_sizes {
                    if let Some(s) = self.stored_point(sp, l, role)? {
                        near.push((l, s.h1, s.h2));
                    }
                }
                self.gap_fit(sp, "near-transition", &near)?;
                self.normalized_fits(sp, &sp_sizes, role)?;
                self.many_body_operating_point(&mb_param_sizes)?;
                let role = "fixed:h1=1e-4,h2=1e-4";
                self.normalized_fits(mb, &mb_param_sizes, role)?;
                let pts: Vec<_> = mb_param_sizes.iter().map(|&l| (l, 1e-4, 1e-4)).collect();
                self.gap_fit(mb, "h1=1e-4,h2=1e-4", &pts)?;
            }
            Figure::Fig7 => {
                let per = mode.density(10);
                let grid: Vec<(usize, f64, f64)> = Grid::per_decade(1e-9, 1e1, per)
                    .values()
                    .into_iter()
                    .flat_map(|a| Grid::per_decade(1e-11, 1e-1, per).values().into_iter().map(move |b| (101, a, b)))
                    .collect();
                self.ensure_matrix(sp, &grid, &[QFI_MATRIX], true)?;
                for factor in [1.0, 1.1] {
                    self.ensure_matrix(sp, &Self::line_points(&sp_sizes, factor, &line_h2), &both_tables, factor == 1.0)?;
                    self.trace_minima(sp, &sp_sizes, factor, &line_h2)?;
                }
                self.many_body_operating_point(&mb_param_sizes)?;
                self.point_fit(mb, &mb_param_sizes, "fixed:h1=1e-4,h2=1e-4", "trace", |s| s.trace_inv)?;
            }
        }
        Ok(())
    }

    fn many_body_operating_point(&self, sizes: &[usize]) -> Result<()> {
        let role = "fixed:h1=1e-4,h2=1e-4";
        let keys: Vec<(usize, String)> = sizes.iter().map(|&l| (l, role.to_string())).collect();
        self.ensure_point(Family::ManyBodyHalfFilling, &keys, false, |_, _| Some((1e-4, 1e-4)))
    }
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut f = fs::File::create(&path)?;
    serde_json::to_writer_pretty(&mut f, value)?;
    writeln!(f)?;
    Ok(path)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(dir: &Path, name: &str) -> Result<Option<T>> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(serde_json::from_str(&fs::read_to_string(path)?)?))
}

/// Rows of a finished table (metadata and header skipped).
pub fn read_rows(dir: &Path, name: &str) -> Result<Option<Vec<Vec<String>>>> {
    let path = dir.join(name);
    if !path.exists() {
        return Ok(None);
    }
    Ok(Some(store::read_table(&path)?.1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qfi_config(dir: &Path, workers: usize) -> SweepConfig {
        let text = format!(
            "scenario = qfi-sweep\ngamma = 1,2\nL = 11,21\nh = log:1e-6:1e-1:6\nout = {}\nworkers = {workers}\n",
            dir.display()
        );
        SweepConfig::parse(&text).unwrap()
    }

    fn body(path: &Path) -> String {
        let text = fs::read_to_string(path).unwrap();
        text.lines().skip(1).collect::<Vec<_>>().join("\n")
    }

    #[test]
    fn sweep_rows_cover_the_grid_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = qfi_config(dir.path(), 2);
        let first = run_scenario(&cfg).unwrap();
        assert_eq!(first.computed, 2 * 2 * 6);
        assert_eq!(first.failures, 0);
        let rows = read_rows(dir.path(), QFI_SWEEP.0).unwrap().unwrap();
        assert_eq!(rows.len(), 24);
        let before = body(&dir.path().join(QFI_SWEEP.0));
        let second = run_scenario(&cfg).unwrap();
        assert_eq!(second.computed, 0);
        assert_eq!(second.reused, 24);
        assert_eq!(before, body(&dir.path().join(QFI_SWEEP.0)));
    }

    #[test]
    fn perturbative_method_fills_rows() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = qfi_config(dir.path(), 1);
        cfg.method = FisherMethod::Perturbative;
        let s = run_scenario(&cfg).unwrap();
        assert_eq!(s.failures, 0);
        let rows = read_rows(dir.path(), QFI_SWEEP.0).unwrap().unwrap();
        assert!(rows.iter().all(|r| r[5] == "perturbative" && parse_num(&r[4]) > 0.0));
    }

    #[test]
    fn failure_flags() {
        assert!(is_failure_flag("step-search"));
        assert!(is_failure_flag("degenerate;error: x"));
        assert!(!is_failure_flag("degenerate;ill-conditioned"));
        assert!(!is_failure_flag(""));
    }
}
