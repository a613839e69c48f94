//! Potentials, Hamiltonians, the half-filling sector basis and the mirror operator.
//!
//! Conventions used throughout the crate:
//!
//! * energies and fields are in units of the hopping `J` (default `J = 1`);
//! * the monomial potential is `V_i = h * i^gamma` with 1-based sites `i = 1..=L`;
//! * the parabolic potential is `V_i = h1 * (i-1) - h2 * (i-1)^2`, i.e. it uses the
//!   0-based offset. The two kinds differ by a uniform shift at `gamma = 1`, which
//!   leaves every eigenvector (and therefore every Fisher quantity) unchanged;
//! * many-body states are bit-masks where bit `k` is site `k + 1` and a set bit is
//!   spin up (`s = +1`).

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Field parameter a Fisher quantity is taken with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Param {
    /// Monomial strength `h`.
    H,
    /// Parabolic linear field `h1`.
    H1,
    /// Parabolic quadratic field `h2`.
    H2,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::H => "h",
            Param::H1 => "h1",
            Param::H2 => "h2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Potential {
    Monomial { h: f64, gamma: f64 },
    Parabolic { h1: f64, h2: f64 },
}

impl Potential {
    pub fn monomial(h: f64, gamma: f64) -> Self {
        Potential::Monomial { h, gamma }
    }

    pub fn parabolic(h1: f64, h2: f64) -> Self {
        Potential::Parabolic { h1, h2 }
    }

    /// Parabolic potential on the mirror-symmetric line `h1 = factor * h2 * (L - 1)`.
    pub fn on_line(h2: f64, factor: f64, l: usize) -> Self {
        Potential::Parabolic {
            h1: factor * h2 * (l as f64 - 1.0),
            h2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Potential::Monomial { h, gamma } => {
                if !gamma.is_finite() || gamma <= 0.0 {
                    return Err(Error::DegeneratePotential { gamma });
                }
                if !h.is_finite() {
                    return Err(Error::InvalidProbe(format!("non-finite field h = {h}")));
                }
            }
            Potential::Parabolic { h1, h2 } => {
                if !h1.is_finite() || !h2.is_finite() {
                    return Err(Error::InvalidProbe(format!(
                        "non-finite fields h1 = {h1}, h2 = {h2}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Negative fields are representable but lie outside the studied regime.
    pub fn has_negative_fields(&self) -> bool {
        match *self {
            Potential::Monomial { h, .. } => h < 0.0,
            Potential::Parabolic { h1, h2 } => h1 < 0.0 || h2 < 0.0,
        }
    }

    pub fn params(&self) -> &'static [Param] {
        match self {
            Potential::Monomial { .. } => &[Param::H],
            Potential::Parabolic { .. } => &[Param::H1, Param::H2],
        }
    }

    pub fn get(&self, param: Param) -> Result<f64> {
        match (*self, param) {
            (Potential::Monomial { h, .. }, Param::H) => Ok(h),
            (Potential::Parabolic { h1, .. }, Param::H1) => Ok(h1),
            (Potential::Parabolic { h2, .. }, Param::H2) => Ok(h2),
            _ => Err(Error::Unsupported(format!(
                "parameter {} not present in {self:?}",
                param.name()
            ))),
        }
    }

    pub fn with(&self, param: Param, value: f64) -> Result<Potential> {
        let mut out = *self;
        match (&mut out, param) {
            (Potential::Monomial { h, .. }, Param::H) => *h = value,
            (Potential::Parabolic { h1, .. }, Param::H1) => *h1 = value,
            (Potential::Parabolic { h2, .. }, Param::H2) => *h2 = value,
            _ => {
                return Err(Error::Unsupported(format!(
                    "parameter {} not present in {self:?}",
                    param.name()
                )))
            }
        }
        Ok(out)
    }

    /// `dV_i / d(param)` for every site; the perturbation operator of that field.
    pub fn profile(&self, param: Param, l: usize) -> Result<Vec<f64>> {
        self.validate()?;
        match (*self, param) {
            (Potential::Monomial { gamma, .. }, Param::H) => {
                Ok((1..=l).map(|i| (i as f64).powf(gamma)).collect())
            }
            (Potential::Parabolic { .. }, Param::H1) => Ok((0..l).map(|x| x as f64).collect()),
            (Potential::Parabolic { .. }, Param::H2) => {
                Ok((0..l).map(|x| -((x * x) as f64)).collect())
            }
            _ => Err(Error::Unsupported(format!(
                "parameter {} not present in {self:?}",
                param.name()
            ))),
        }
    }
}

/// Site energies `V_1..V_L` of a potential.
pub fn potential_values(potential: &Potential, l: usize) -> Result<Vec<f64>> {
    if l < 2 {
        return Err(Error::InvalidProbe(format!("L = {l} must be at least 2")));
    }
    potential.validate()?;
    Ok(match *potential {
        Potential::Monomial { h, gamma } => (1..=l).map(|i| h * (i as f64).powf(gamma)).collect(),
        Potential::Parabolic { h1, h2 } => (0..l)
            .map(|x| {
                let x = x as f64;
                h1 * x - h2 * x * x
            })
            .collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Family {
    SingleParticle,
    ManyBodyHalfFilling,
}

impl Family {
    pub fn key(self) -> &'static str {
        match self {
            Family::SingleParticle => "single-particle",
            Family::ManyBodyHalfFilling => "many-body",
        }
    }
}

/// Full physical configuration of a probe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub l: usize,
    pub j: f64,
    pub potential: Potential,
    pub family: Family,
}

impl ProbeSpec {
    pub fn new(l: usize, j: f64, potential: Potential, family: Family) -> Result<Self> {
        let spec = ProbeSpec {
            l,
            j,
            potential,
            family,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn single_particle(l: usize, potential: Potential) -> Result<Self> {
        Self::new(l, 1.0, potential, Family::SingleParticle)
    }

    pub fn many_body(l: usize, potential: Potential) -> Result<Self> {
        Self::new(l, 1.0, potential, Family::ManyBodyHalfFilling)
    }

    pub fn validate(&self) -> Result<()> {
        if self.l < 2 {
            return Err(Error::InvalidProbe(format!("L = {} must be at least 2", self.l)));
        }
        if !(self.j > 0.0) || !self.j.is_finite() {
            return Err(Error::InvalidProbe(format!("J = {} must be positive", self.j)));
        }
        if self.family == Family::ManyBodyHalfFilling {
            if self.l % 2 != 0 {
                return Err(Error::SectorUndefined { l: self.l });
            }
            if self.l > 30 {
                return Err(Error::InvalidProbe(format!(
                    "L = {} exceeds the 30-site bit-mask limit",
                    self.l
                )));
            }
        }
        self.potential.validate()
    }

    pub fn with_potential(&self, potential: Potential) -> Self {
        ProbeSpec { potential, ..*self }
    }

    pub fn with_param(&self, param: Param, value: f64) -> Result<Self> {
        Ok(self.with_potential(self.potential.with(param, value)?))
    }
}

/// Single-particle tight-binding Hamiltonian with open boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct TridiagonalHamiltonian {
    pub diag: Vec<f64>,
    pub offdiag: Vec<f64>,
}

impl TridiagonalHamiltonian {
    pub fn from_site_energies(diag: Vec<f64>, j: f64) -> Self {
        let offdiag = vec![j; diag.len().saturating_sub(1)];
        TridiagonalHamiltonian { diag, offdiag }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.offdiag[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.offdiag[i] * x[i + 1];
            }
            y[i] = acc;
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut m = nalgebra::DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
        }
        for (i, &t) in self.offdiag.iter().enumerate() {
            m[(i, i + 1)] = t;
            m[(i + 1, i)] = t;
        }
        m
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.diag
            .iter()
            .chain(self.offdiag.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Max-norm of `HM - MH` with `M|i> = |L+1-i>`.
    pub fn mirror_commutator_norm(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        // (HM - MH)_{ab} = H_{a, n-1-b} - H_{n-1-a, b}
        for a in 0..n {
            for b in [a.wrapping_sub(1), a, a + 1] {
                if b >= n {
                    continue;
                }
                let mb = n - 1 - b;
                let ma = n - 1 - a;
                worst = worst.max((self.entry(a, mb) - self.entry(ma, b)).abs());
            }
            // entries that are structurally non-zero in either product
            let mb = n - 1 - a;
            for b in [mb.wrapping_sub(1), mb, mb + 1] {
                if b >= n {
                    continue;
                }
                let ma = n - 1 - a;
                worst = worst.max((self.entry(a, n - 1 - b) - self.entry(ma, b)).abs());
            }
        }
        worst
    }

    fn entry(&self, a: usize, b: usize) -> f64 {
        if a == b {
            self.diag[a]
        } else if a + 1 == b {
            self.offdiag[a]
        } else if b + 1 == a {
            self.offdiag[b]
        } else {
            0.0
        }
    }
}

pub fn build_single_particle(spec: &ProbeSpec) -> Result<TridiagonalHamiltonian> {
    spec.validate()?;
    if spec.family != Family::SingleParticle {
        return Err(Error::Unsupported(
            "build_single_particle needs a single-particle spec".into(),
        ));
    }
    let v = potential_values(&spec.potential, spec.l)?;
    Ok(TridiagonalHamiltonian::from_site_energies(v, spec.j))
}

/// Canonically ordered basis of the `S_z^tot = 0` sector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SectorBasis {
    l: usize,
    states: Vec<u32>,
}

impl SectorBasis {
    pub fn sites(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[u32] {
        &self.states
    }

    pub fn state(&self, k: usize) -> u32 {
        self.states[k]
    }

    /// Ordinal of a bit-mask, `None` if it lies outside the sector.
    pub fn index_of(&self, mask: u32) -> Option<usize> {
        self.states.binary_search(&mask).ok()
    }

    /// Site reversal `|s_1 ... s_L> -> |s_L ... s_1>`.
    pub fn mirror(&self, mask: u32) -> u32 {
        mask.reverse_bits() >> (32 - self.l)
    }

    /// `s_i = +-1` for site `i` (0-based bit index).
    pub fn spin(mask: u32, bit: usize) -> f64 {
        if (mask >> bit) & 1 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Per-state value of `sum_i w_i s_i`; the diagonal operator of a site profile.
    pub fn diagonal_operator(&self, weights: &[f64]) -> Vec<f64> {
        self.states
            .iter()
            .map(|&m| {
                weights
                    .iter()
                    .enumerate()
                    .map(|(i, w)| w * Self::spin(m, i))
                    .sum()
            })
            .collect()
    }
}

pub fn enumerate_half_filling(l: usize) -> Result<SectorBasis> {
    if l % 2 != 0 {
        return Err(Error::SectorUndefined { l });
    }
    if !(2..=30).contains(&l) {
        return Err(Error::InvalidProbe(format!(
            "L = {l} outside the supported range 2..=30"
        )));
    }
    let half = (l / 2) as u32;
    let mut states = Vec::with_capacity(binomial(l, l / 2));
    // Gosper's hack walks fixed-popcount masks in increasing order.
    let mut m: u32 = (1u32 << half) - 1;
    let limit: u64 = 1u64 << l;
    while (m as u64) < limit {
        states.push(m);
        let c = m & m.wrapping_neg();
        let r = m.wrapping_add(c);
        if r == 0 {
            break;
        }
        m = (((r ^ m) >> 2) / c) | r;
    }
    Ok(SectorBasis { l, states })
}

pub fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
}

/// Heisenberg chain in the half-filling sector, stored as diagonal plus upper triples.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    pub dim: usize,
    pub diagonal: Vec<f64>,
    /// `(row, col, value)` with `row < col`; the lower triangle is implied.
    pub offdiagonal: Vec<(usize, usize, f64)>,
    basis: Arc<SectorBasis>,
}

impl SparseHamiltonian {
    pub fn from_site_energies(basis: Arc<SectorBasis>, j: f64, v: &[f64]) -> Result<Self> {
        let l = basis.sites();
        if v.len() != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                found: v.len(),
            });
        }
        let dim = basis.len();
        let mut diagonal = Vec::with_capacity(dim);
        let mut offdiagonal = Vec::new();
        for (k, &m) in basis.states().iter().enumerate() {
            let mut e = 0.0;
            for i in 0..l - 1 {
                e += j * SectorBasis::spin(m, i) * SectorBasis::spin(m, i + 1);
            }
            for (i, vi) in v.iter().enumerate() {
                e += vi * SectorBasis::spin(m, i);
            }
            diagonal.push(e);
            for i in 0..l - 1 {
                if ((m >> i) & 1) != ((m >> (i + 1)) & 1) {
                    let t = m ^ (0b11 << i);
                    let col = basis
                        .index_of(t)
                        .expect("adjacent exchange preserves the sector");
                    if k < col {
                        offdiagonal.push((k, col, 2.0 * j));
                    }
                }
            }
        }
        Ok(SparseHamiltonian {
            dim,
            diagonal,
            offdiagonal,
            basis,
        })
    }

    pub fn basis(&self) -> &SectorBasis {
        &self.basis
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for ((yi, d), xi) in y.iter_mut().zip(&self.diagonal).zip(x) {
            *yi = d * xi;
        }
        for &(r, c, v) in &self.offdiagonal {
            y[r] += v * x[c];
            y[c] += v * x[r];
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(
            &self.diagonal,
        ));
        for &(r, c, v) in &self.offdiagonal {
            m[(r, c)] = v;
            m[(c, r)] = v;
        }
        m
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.diagonal
            .iter()
            .copied()
            .chain(self.offdiagonal.iter().map(|t| t.2))
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Max-norm of `HM - MH` where `M` reverses the site order of each basis state.
    pub fn mirror_commutator_norm(&self) -> f64 {
        let b = &*self.basis;
        let mirror: Vec<usize> = b
            .states()
            .iter()
            .map(|&m| b.index_of(b.mirror(m)).expect("sector is mirror-closed"))
            .collect();
        // (HM - MH)_{ab} = H_{a, M b} - H_{M a, b}; compare H with M H M entrywise.
        let mut worst = 0.0_f64;
        for k in 0..self.dim {
            worst = worst.max((self.diagonal[k] - self.diagonal[mirror[k]]).abs());
        }
        let mut entries: Vec<(usize, usize, f64)> = self.offdiagonal.clone();
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        for &(r, c, v) in &self.offdiagonal {
            let (mr, mc) = (mirror[r], mirror[c]);
            let key = (mr.min(mc), mr.max(mc));
            let mirrored = entries
                .binary_search_by(|e| (e.0, e.1).cmp(&key))
                .map(|i| entries[i].2)
                .unwrap_or(0.0);
            worst = worst.max((v - mirrored).abs());
        }
        worst
    }
}

pub fn build_many_body(spec: &ProbeSpec, basis: Arc<SectorBasis>) -> Result<SparseHamiltonian> {
    spec.validate()?;
    if spec.family != Family::ManyBodyHalfFilling {
        return Err(Error::Unsupported(
            "build_many_body needs a many-body spec".into(),
        ));
    }
    if basis.sites() != spec.l {
        return Err(Error::DimensionMismatch {
            expected: spec.l,
            found: basis.sites(),
        });
    }
    let v = potential_values(&spec.potential, spec.l)?;
    SparseHamiltonian::from_site_energies(basis, spec.j, &v)
}

/// Either Hamiltonian representation.
#[derive(Debug, Clone)]
pub enum Hamiltonian {
    Tridiagonal(TridiagonalHamiltonian),
    Sparse(SparseHamiltonian),
}

impl Hamiltonian {
    /// Builds the Hamiltonian of `spec`; many-body specs need a cached basis of matching size.
    pub fn build(spec: &ProbeSpec, basis: Option<Arc<SectorBasis>>) -> Result<Self> {
        match spec.family {
            Family::SingleParticle => Ok(Hamiltonian::Tridiagonal(build_single_particle(spec)?)),
            Family::ManyBodyHalfFilling => {
                let basis = match basis {
                    Some(b) => b,
                    None => Arc::new(enumerate_half_filling(spec.l)?),
                };
                Ok(Hamiltonian::Sparse(build_many_body(spec, basis)?))
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Hamiltonian::Tridiagonal(t) => t.dim(),
            Hamiltonian::Sparse(s) => s.dim,
        }
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Hamiltonian::Tridiagonal(t) => t.apply(x, y),
            Hamiltonian::Sparse(s) => s.apply(x, y),
        }
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        match self {
            Hamiltonian::Tridiagonal(t) => t.to_dense(),
            Hamiltonian::Sparse(s) => s.to_dense(),
        }
    }

    pub fn max_abs_entry(&self) -> f64 {
        match self {
            Hamiltonian::Tridiagonal(t) => t.max_abs_entry(),
            Hamiltonian::Sparse(s) => s.max_abs_entry(),
        }
    }
}

pub fn mirror_commutator_norm(h: &Hamiltonian) -> f64 {
    match h {
        Hamiltonian::Tridiagonal(t) => t.mirror_commutator_norm(),
        Hamiltonian::Sparse(s) => s.mirror_commutator_norm(),
    }
}

/// Diagonal perturbation operator `dH/d(param)` in the working basis of `spec`.
pub fn perturbation_diagonal(
    spec: &ProbeSpec,
    param: Param,
    basis: Option<&SectorBasis>,
) -> Result<Vec<f64>> {
    let profile = spec.potential.profile(param, spec.l)?;
    match spec.family {
        Family::SingleParticle => Ok(profile),
        Family::ManyBodyHalfFilling => {
            let owned;
            let b = match basis {
                Some(b) => b,
                None => {
                    owned = enumerate_half_filling(spec.l)?;
                    &owned
                }
            };
            Ok(b.diagonal_operator(&profile))
        }
    }
}
