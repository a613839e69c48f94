//! Flat `key = value` sweep configuration.
//!
//! One assignment per line, `#` starts a comment, lists are comma separated and
//! field grids are written `log:start:stop:count` or `lin:start:stop:count`.
//! Parsing reports every problem it finds, not only the first.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fisher::{FisherMethod, Povm};
use crate::probe::Family;
use crate::scaling::{lin_grid, log_grid, log_grid_per_decade, BOOTSTRAP_RESAMPLES, BOOTSTRAP_SEED};

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Figure {
    Fig1,
    Fig2,
    Fig3,
    Fig5,
    Fig6,
    Fig7,
}

impl Figure {
    pub const ALL: [Figure; 6] = [Figure::Fig1, Figure::Fig2, Figure::Fig3, Figure::Fig5, Figure::Fig6, Figure::Fig7];

    pub fn key(self) -> &'static str {
        match self {
            Figure::Fig1 => "fig1",
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig5 => "fig5",
            Figure::Fig6 => "fig6",
            Figure::Fig7 => "fig7",
        }
    }

    pub fn parse(s: &str) -> Option<Figure> {
        Figure::ALL.into_iter().find(|f| f.key() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Spectrum,
    QfiSweep,
    QfiMatrixGrid,
    CfiSweep,
    GapSweep,
    Collapse,
    BetaGamma,
    MultiParamTrace,
    Reproduce(Figure),
}

impl Scenario {
    pub const NAMES: [&'static str; 9] = [
        "spectrum",
        "qfi-sweep",
        "qfi-matrix",
        "cfi-sweep",
        "gap-sweep",
        "collapse",
        "fit-beta-gamma",
        "multiparam-trace",
        "reproduce",
    ];

    pub fn key(self) -> &'static str {
        match self {
            Scenario::Spectrum => "spectrum",
            Scenario::QfiSweep => "qfi-sweep",
            Scenario::QfiMatrixGrid => "qfi-matrix",
            Scenario::CfiSweep => "cfi-sweep",
            Scenario::GapSweep => "gap-sweep",
            Scenario::Collapse => "collapse",
            Scenario::BetaGamma => "fit-beta-gamma",
            Scenario::MultiParamTrace => "multiparam-trace",
            Scenario::Reproduce(_) => "reproduce",
        }
    }

    /// Potential kind the scenario works with, if it is fixed.
    fn potential(self) -> Option<PotentialKind> {
        match self {
            Scenario::QfiSweep | Scenario::Collapse | Scenario::BetaGamma => Some(PotentialKind::Monomial),
            Scenario::QfiMatrixGrid | Scenario::CfiSweep | Scenario::GapSweep | Scenario::MultiParamTrace => {
                Some(PotentialKind::Parabolic)
            }
            Scenario::Spectrum | Scenario::Reproduce(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PotentialKind {
    Monomial,
    Parabolic,
}

impl PotentialKind {
    pub fn key(self) -> &'static str {
        match self {
            PotentialKind::Monomial => "monomial",
            PotentialKind::Parabolic => "parabolic",
        }
    }
}

/// Field values to sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Grid {
    Log { start: f64, stop: f64, count: usize },
    Lin { start: f64, stop: f64, count: usize },
    List(Vec<f64>),
}

impl Grid {
    /// Log grid with `per_decade` points per decade, endpoints included.
    pub fn per_decade(start: f64, stop: f64, per_decade: usize) -> Grid {
        let count = log_grid_per_decade(start, stop, per_decade).len();
        Grid::Log { start, stop, count }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Log { start, stop, count } => log_grid(*start, *stop, *count),
            Grid::Lin { start, stop, count } => lin_grid(*start, *stop, *count),
            Grid::List(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Grid::Log { count, .. } | Grid::Lin { count, .. } => *count,
            Grid::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn parse(key: &str, text: &str, errors: &mut Vec<String>) -> Option<Grid> {
        let kind = text.split(':').next().unwrap_or("");
        if kind == "log" || kind == "lin" {
            let parts: Vec<&str> = text.split(':').collect();
            if parts.len() != 4 {
                errors.push(format!("malformed grid `{key} = {text}`: expected {kind}:start:stop:count"));
                return None;
            }
            let start = parse_f64(key, parts[1], errors);
            let stop = parse_f64(key, parts[2], errors);
            let count = match parts[3].trim().parse::<usize>() {
                Ok(c) => Some(c),
                Err(_) => {
                    errors.push(format!("malformed grid `{key} = {text}`: count must be a non-negative integer"));
                    None
                }
            };
            let (start, stop, count) = (start?, stop?, count?);
            if count == 0 {
                errors.push(format!("grid `{key}` must be non-empty"));
                return None;
            }
            if kind == "log" {
                if !(start > 0.0 && stop > 0.0) {
                    errors.push(format!("`{key}`: log grid requires positive endpoints"));
                    return None;
                }
                Some(Grid::Log { start, stop, count })
            } else {
                Some(Grid::Lin { start, stop, count })
            }
        } else {
            let values = parse_list(key, text, errors, |s| s.parse::<f64>().ok().filter(|v| v.is_finite()))?;
            if values.is_empty() {
                errors.push(format!("grid `{key}` must be non-empty"));
                return None;
            }
            Some(Grid::List(values))
        }
    }

    fn render(&self) -> String {
        match self {
            Grid::Log { start, stop, count } => format!("log:{}:{}:{}", num(*start), num(*stop), count),
            Grid::Lin { start, stop, count } => format!("lin:{}:{}:{}", num(*start), num(*stop), count),
            Grid::List(v) => v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(","),
        }
    }
}

/// Shortest text that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let a = x.abs();
    if a == 0.0 || (1e-3..1e6).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn parse_f64(key: &str, s: &str, errors: &mut Vec<String>) -> Option<f64> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Some(v),
        _ => {
            errors.push(format!("`{key}`: `{}` is not a finite number", s.trim()));
            None
        }
    }
}

fn parse_list<T>(key: &str, text: &str, errors: &mut Vec<String>, f: impl Fn(&str) -> Option<T>) -> Option<Vec<T>> {
    let mut out = Vec::new();
    let mut ok = true;
    for item in text.split(',') {
        let item = item.trim();
        match f(item) {
            Some(v) => out.push(v),
            None => {
                errors.push(format!("`{key}`: cannot read list item `{item}`"));
                ok = false;
            }
        }
    }
    ok.then_some(out)
}

fn parse_bool(key: &str, s: &str, errors: &mut Vec<String>) -> Option<bool> {
    match s {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => {
            errors.push(format!("`{key}`: expected true or false, found `{s}`"));
            None
        }
    }
}

pub fn parse_family(s: &str) -> Option<Family> {
    match s {
        "single-particle" => Some(Family::SingleParticle),
        "many-body" => Some(Family::ManyBodyHalfFilling),
        _ => None,
    }
}

pub fn parse_povm(s: &str) -> Option<Povm> {
    match s {
        "position" => Some(Povm::PositionBasis),
        "spin-configuration" => Some(Povm::SpinConfigurationBasis),
        _ => None,
    }
}

const KEYS: [&str; 20] = [
    "scenario", "figure", "family", "potential", "gamma", "L", "h", "h1", "h2", "line", "method", "povm",
    "levels", "resamples", "allow_degenerate", "out", "workers", "seed", "quick", "full",
];

/// Everything a run needs. Fields that do not apply to the scenario stay `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub scenario: Scenario,
    pub family: Family,
    pub potential: PotentialKind,
    pub gamma: Vec<f64>,
    pub sizes: Vec<usize>,
    pub h: Option<Grid>,
    pub h1: Option<Grid>,
    pub h2: Option<Grid>,
    /// Ties the linear field to the quadratic one, `h1 = line * h2 * (L - 1)`.
    pub line: Option<f64>,
    pub method: FisherMethod,
    pub povm: Option<Povm>,
    /// Number of levels written by the spectrum scenario (`None` = all for single-particle).
    pub levels: Option<usize>,
    pub resamples: usize,
    pub allow_degenerate: bool,
    pub out: PathBuf,
    pub workers: usize,
    pub seed: u64,
    pub quick: bool,
    pub full: bool,
}

pub fn default_sizes(family: Family) -> Vec<usize> {
    match family {
        Family::SingleParticle => vec![101, 201, 301, 401, 501],
        Family::ManyBodyHalfFilling => vec![6, 8, 10, 12, 14, 16],
    }
}

/// `0.25, 0.5, ..., 3`.
pub fn default_gamma_grid() -> Vec<f64> {
    (1..=12).map(|k| k as f64 * 0.25).collect()
}

pub fn default_field_grid() -> Grid {
    Grid::per_decade(1e-14, 1e-1, 40)
}

impl SweepConfig {
    /// Defaults for a scenario and family; parsing starts from here.
    pub fn new(scenario: Scenario, family: Family) -> SweepConfig {
        let potential = scenario.potential().unwrap_or(PotentialKind::Monomial);
        let monomial = potential == PotentialKind::Monomial;
        let gamma = match (scenario, family) {
            (Scenario::BetaGamma, _) => default_gamma_grid(),
            _ if monomial => vec![2.0],
            _ => Vec::new(),
        };
        let h = match (scenario, family) {
            (Scenario::BetaGamma, Family::ManyBodyHalfFilling) => Some(Grid::List(vec![1e-6])),
            (Scenario::Spectrum, _) => Some(Grid::List(vec![0.0])),
            _ if monomial => Some(default_field_grid()),
            _ => None,
        };
        SweepConfig {
            scenario,
            family,
            potential,
            gamma,
            sizes: default_sizes(family),
            h,
            h1: None,
            h2: None,
            line: None,
            method: FisherMethod::FiniteDifference,
            povm: None,
            levels: None,
            resamples: BOOTSTRAP_RESAMPLES,
            allow_degenerate: false,
            out: PathBuf::from("results"),
            workers: 1,
            seed: BOOTSTRAP_SEED,
            quick: false,
            full: false,
        }
    }

    pub fn reproduce(figure: Figure) -> SweepConfig {
        SweepConfig::new(Scenario::Reproduce(figure), Family::SingleParticle)
    }

    pub fn parse(text: &str) -> Result<SweepConfig> {
        let mut errors = Vec::new();
        let mut raw: BTreeMap<String, String> = BTreeMap::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                errors.push(format!("line {}: expected `key = value`", n + 1));
                continue;
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                errors.push(format!("line {}: unknown key `{k}`", n + 1));
            } else if v.is_empty() {
                errors.push(format!("line {}: `{k}` has no value", n + 1));
            } else if raw.insert(k.to_string(), v.to_string()).is_some() {
                errors.push(format!("line {}: duplicate key `{k}`", n + 1));
            }
        }

        let family = match raw.get("family") {
            None => Family::SingleParticle,
            Some(s) => parse_family(s).unwrap_or_else(|| {
                errors.push(format!("unknown family `{s}`; expected single-particle or many-body"));
                Family::SingleParticle
            }),
        };
        let scenario = match raw.get("scenario").map(String::as_str) {
            None => {
                errors.push("missing key `scenario`".into());
                return Err(Error::Config(errors));
            }
            Some("reproduce") => match raw.get("figure").map(String::as_str) {
                None => {
                    errors.push("scenario reproduce needs `figure`".into());
                    return Err(Error::Config(errors));
                }
                Some(f) => match Figure::parse(f) {
                    Some(fig) => Scenario::Reproduce(fig),
                    None => {
                        errors.push(format!(
                            "unknown figure `{f}`; expected one of {}",
                            Figure::ALL.map(Figure::key).join(", ")
                        ));
                        return Err(Error::Config(errors));
                    }
                },
            },
            Some(s) => match Scenario::NAMES.iter().position(|n| *n == s) {
                Some(i) => [
                    Scenario::Spectrum,
                    Scenario::QfiSweep,
                    Scenario::QfiMatrixGrid,
                    Scenario::CfiSweep,
                    Scenario::GapSweep,
                    Scenario::Collapse,
                    Scenario::BetaGamma,
                    Scenario::MultiParamTrace,
                ][i],
                None => {
                    errors.push(format!("unknown scenario `{s}`; expected one of {}", Scenario::NAMES.join(", ")));
                    return Err(Error::Config(errors));
                }
            },
        };
        if raw.contains_key("figure") && !matches!(scenario, Scenario::Reproduce(_)) {
            errors.push(format!("`figure` only applies to scenario reproduce, not {}", scenario.key()));
        }

        let mut c = SweepConfig::new(scenario, family);
        if let Some(p) = raw.get("potential") {
            match p.as_str() {
                "monomial" => c.potential = PotentialKind::Monomial,
                "parabolic" => c.potential = PotentialKind::Parabolic,
                other => errors.push(format!("unknown potential `{other}`; expected monomial or parabolic")),
            }
            if let Some(fixed) = scenario.potential() {
                if fixed != c.potential {
                    errors.push(format!("scenario {} needs a {} potential", scenario.key(), fixed.key()));
                }
            }
        } else if scenario == Scenario::Spectrum && (raw.contains_key("h1") || raw.contains_key("h2")) {
            c.potential = PotentialKind::Parabolic;
        }
        if c.potential == PotentialKind::Parabolic {
            c.gamma.clear();
            c.h = None;
        }

        if let Some(s) = raw.get("gamma") {
            if let Some(v) = parse_list("gamma", s, &mut errors, |x| x.parse::<f64>().ok().filter(|g| g.is_finite())) {
                c.gamma = v;
            }
        }
        if let Some(s) = raw.get("L") {
            if let Some(v) = parse_list("L", s, &mut errors, |x| x.parse::<usize>().ok()) {
                c.sizes = v;
            }
        }
        for key in ["h", "h1", "h2"] {
            if let Some(s) = raw.get(key) {
                let g = Grid::parse(key, s, &mut errors);
                match key {
                    "h" => c.h = g,
                    "h1" => c.h1 = g,
                    _ => c.h2 = g,
                }
            }
        }
        if let Some(s) = raw.get("line") {
            c.line = parse_f64("line", s, &mut errors);
        }
        if let Some(s) = raw.get("method") {
            match s.as_str() {
                "perturbative" => c.method = FisherMethod::Perturbative,
                "finite-difference" => c.method = FisherMethod::FiniteDifference,
                other => errors.push(format!("unknown method `{other}`; expected perturbative or finite-difference")),
            }
        }
        if let Some(s) = raw.get("povm") {
            match parse_povm(s) {
                Some(p) => c.povm = Some(p),
                None => errors.push(format!("unknown povm `{s}`; expected position or spin-configuration")),
            }
        }
        if let Some(s) = raw.get("levels") {
            match s.parse::<usize>() {
                Ok(n) if n > 0 => c.levels = Some(n),
                _ => errors.push(format!("`levels` must be a positive integer, found `{s}`")),
            }
        }
        if let Some(s) = raw.get("resamples") {
            match s.parse::<usize>() {
                Ok(n) => c.resamples = n,
                Err(_) => errors.push(format!("`resamples` must be a non-negative integer, found `{s}`")),
            }
        }
        if let Some(s) = raw.get("workers") {
            match s.parse::<usize>() {
                Ok(n) => c.workers = n,
                Err(_) => errors.push(format!("`workers` must be a positive integer, found `{s}`")),
            }
        }
        if let Some(s) = raw.get("seed") {
            match s.parse::<u64>() {
                Ok(n) => c.seed = n,
                Err(_) => errors.push(format!("`seed` must be an unsigned integer, found `{s}`")),
            }
        }
        if let Some(s) = raw.get("out") {
            c.out = PathBuf::from(s);
        }
        for key in ["allow_degenerate", "quick", "full"] {
            if let Some(b) = raw.get(key).and_then(|s| parse_bool(key, s, &mut errors)) {
                match key {
                    "allow_degenerate" => c.allow_degenerate = b,
                    "quick" => c.quick = b,
                    _ => c.full = b,
                }
            }
        }

        errors.extend(c.problems());
        if errors.is_empty() {
            Ok(c)
        } else {
            Err(Error::Config(errors))
        }
    }

    /// Cross-field validation; empty when the config is runnable.
    pub fn problems(&self) -> Vec<String> {
        let mut e = Vec::new();
        let s = self.scenario.key();
        if self.workers == 0 {
            e.push("`workers` must be at least 1".into());
        }
        if self.quick && self.full {
            e.push("`quick` and `full` are mutually exclusive".into());
        }
        if let Scenario::Reproduce(_) = self.scenario {
            return e;
        }
        if self.sizes.is_empty() {
            e.push("`L` must list at least one size".into());
        }
        for &l in &self.sizes {
            if l < 2 {
                e.push(format!("L = {l} is too small; need at least 2 sites"));
            }
            if self.family == Family::ManyBodyHalfFilling && (l % 2 == 1 || l > 30) {
                e.push(format!("many-body probes need even L <= 30, got {l}"));
            }
        }
        match self.potential {
            PotentialKind::Monomial => {
                if self.gamma.is_empty() {
                    e.push(format!("scenario {s} needs `gamma`"));
                }
                for &g in &self.gamma {
                    if !(g > 0.0) {
                        e.push(format!("gamma = {g} must be > 0 (uniform shift carries no signal)"));
                    }
                }
                if self.h.is_none() {
                    e.push(format!("scenario {s} needs an `h` grid"));
                }
                for key in ["h1", "h2", "line"] {
                    let set = match key {
                        "h1" => self.h1.is_some(),
                        "h2" => self.h2.is_some(),
                        _ => self.line.is_some(),
                    };
                    if set {
                        e.push(format!("`{key}` does not apply to a monomial potential"));
                    }
                }
            }
            PotentialKind::Parabolic => {
                if !self.gamma.is_empty() || self.h.is_some() {
                    e.push("`gamma` and `h` do not apply to a parabolic potential".into());
                }
                if self.h2.is_none() {
                    e.push(format!("scenario {s} needs an `h2` grid"));
                }
                match (&self.h1, self.line) {
                    (None, None) => e.push(format!("scenario {s} needs either `h1` or `line`")),
                    (Some(_), Some(_)) => e.push("give either `h1` or `line`, not both".into()),
                    _ => {}
                }
            }
        }
        if self.method == FisherMethod::Perturbative {
            if self.family != Family::SingleParticle {
                e.push("method perturbative needs the single-particle family (no closed many-body spectrum)".into());
            }
            if !matches!(self.scenario, Scenario::QfiSweep | Scenario::BetaGamma | Scenario::Collapse) {
                e.push(format!("method perturbative does not apply to scenario {s}"));
            }
        }
        if let Some(p) = self.povm {
            if self.scenario != Scenario::CfiSweep {
                e.push(format!("`povm` does not apply to scenario {s}"));
            } else if p != Povm::for_family(self.family) {
                e.push(format!("povm {} does not match the {} family", p.key(), self.family.key()));
            }
        }
        if self.levels.is_some() && self.scenario != Scenario::Spectrum {
            e.push(format!("`levels` does not apply to scenario {s}"));
        }
        if self.family == Family::ManyBodyHalfFilling && self.scenario == Scenario::BetaGamma {
            if let Some(h) = &self.h {
                if h.len() != 1 {
                    e.push("many-body fit-beta-gamma uses one fixed field; give a single `h`".into());
                }
            }
        }
        if self.scenario == Scenario::Collapse && self.sizes.len() < 3 {
            e.push("collapse needs at least 3 sizes".into());
        }
        e
    }

    /// Canonical text; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut t = self.physics_text();
        let _ = writeln!(t, "out = {}", self.out.display());
        let _ = writeln!(t, "workers = {}", self.workers);
        t
    }

    /// Serialized form without the execution-only keys (`out`, `workers`).
    fn physics_text(&self) -> String {
        let mut t = String::new();
        let _ = writeln!(t, "scenario = {}", self.scenario.key());
        if let Scenario::Reproduce(f) = self.scenario {
            let _ = writeln!(t, "figure = {}", f.key());
        }
        let _ = writeln!(t, "family = {}", self.family.key());
        let _ = writeln!(t, "potential = {}", self.potential.key());
        if !self.gamma.is_empty() {
            let g: Vec<String> = self.gamma.iter().map(|x| num(*x)).collect();
            let _ = writeln!(t, "gamma = {}", g.join(","));
        }
        let l: Vec<String> = self.sizes.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(t, "L = {}", l.join(","));
        for (k, g) in [("h", &self.h), ("h1", &self.h1), ("h2", &self.h2)] {
            if let Some(g) = g {
                let _ = writeln!(t, "{k} = {}", g.render());
            }
        }
        if let Some(f) = self.line {
            let _ = writeln!(t, "line = {}", num(f));
        }
        let _ = writeln!(t, "method = {}", self.method.key());
        if let Some(p) = self.povm {
            let _ = writeln!(t, "povm = {}", p.key());
        }
        if let Some(n) = self.levels {
            let _ = writeln!(t, "levels = {n}");
        }
        let _ = writeln!(t, "resamples = {}", self.resamples);
        let _ = writeln!(t, "allow_degenerate = {}", self.allow_degenerate);
        let _ = writeln!(t, "seed = {}", self.seed);
        let _ = writeln!(t, "quick = {}", self.quick);
        let _ = writeln!(t, "full = {}", self.full);
        t
    }

    /// First 16 hex digits of the SHA-256 of the physics part of the config. Worker
    /// count and output directory do not change results and are left out.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.physics_text().as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn povm(&self) -> Povm {
        self.povm.unwrap_or(Povm::for_family(self.family))
    }

    /// `(h1, h2)` field pairs for size `l` (parabolic scenarios).
    pub fn field_pairs(&self, l: usize) -> Vec<(f64, f64)> {
        let h2 = self.h2.as_ref().map(Grid::values).unwrap_or_default();
        match (self.line, &self.h1) {
            (Some(f), _) => h2.iter().map(|&b| (f * b * (l as f64 - 1.0), b)).collect(),
            (None, Some(h1)) => {
                let h1 = h1.values();
                h1.iter().flat_map(|&a| h2.iter().map(move |&b| (a, b))).collect()
            }
            (None, None) => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "scenario = qfi-sweep\ngamma = 2\nL = 101,201,301,401,501\nh = log:1e-14:1e-2:240\n";

    #[test]
    fn example_config_parses() {
        let c = SweepConfig::parse(EXAMPLE).unwrap();
        assert_eq!(c.scenario, Scenario::QfiSweep);
        assert_eq!(c.gamma, vec![2.0]);
        assert_eq!(c.sizes, vec![101, 201, 301, 401, 501]);
        let h = c.h.as_ref().unwrap();
        assert_eq!(h.len(), 240);
        assert_eq!(h.values().len(), 240);
    }

    #[test]
    fn negative_log_endpoint_is_rejected() {
        let err = SweepConfig::parse("scenario = qfi-sweep\nh = log:-1:1:10\n").unwrap_err();
        assert!(err.to_string().contains("log grid requires positive endpoints"), "{err}");
    }

    #[test]
    fn all_errors_are_reported() {
        let text = "scenario = qfi-sweep\nfamily = many-body\nL = 7,8\nh = lin:0:1:0\nbogus = 3\nmethod = perturbative\n";
        let Error::Config(errors) = SweepConfig::parse(text).unwrap_err() else {
            panic!("expected a config error");
        };
        assert!(errors.len() >= 4, "{errors:?}");
        assert!(errors.iter().any(|e| e.contains("unknown key `bogus`")));
        assert!(errors.iter().any(|e| e.contains("even L")));
        assert!(errors.iter().any(|e| e.contains("non-empty")));
        assert!(errors.iter().any(|e| e.contains("perturbative")));
    }

    #[test]
    fn roundtrip_is_identity() {
        let texts = [
            EXAMPLE.to_string(),
            "scenario = qfi-matrix\nL = 101\nh1 = 0.5,1e-3\nh2 = lin:0:0.01:5\nout = /tmp/x\nworkers = 3\n".into(),
            "scenario = cfi-sweep\nfamily = many-body\nL = 8,10\nline = 1.1\nh2 = log:1e-6:1e-2:9\n".into(),
            "scenario = reproduce\nfigure = fig6\nquick = true\n".into(),
        ];
        for t in texts {
            let c = SweepConfig::parse(&t).unwrap();
            let again = SweepConfig::parse(&c.serialize()).unwrap();
            assert_eq!(c, again);
            assert_eq!(c.serialize(), again.serialize());
        }
    }

    #[test]
    fn hash_ignores_execution_keys() {
        let a = SweepConfig::parse(EXAMPLE).unwrap();
        let mut b = a.clone();
        b.workers = 8;
        b.out = PathBuf::from("elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn scenario_family_mismatch() {
        let err = SweepConfig::parse("scenario = cfi-sweep\nL = 101\nline = 1\nh2 = 1e-6\npovm = spin-configuration\n")
            .unwrap_err();
        assert!(err.to_string().contains("does not match"), "{err}");
        let err = SweepConfig::parse("scenario = reproduce\nfigure = fig4\n").unwrap_err();
        assert!(err.to_string().contains("unknown figure"), "{err}");
    }
}
