//! Quantum and classical Fisher information of ground states.
//!
//! Derivatives of the gauge-fixed ground vector are taken by central differences
//! with an adaptive step: the step is halved or doubled until the endpoint overlap
//! deficit `1 - <psi(theta - d/2)|psi(theta + d/2)>` lands in a fixed window. Since
//! the deficit behaves like `d^2 F / 8`, the window pins the truncation/cancellation
//! balance independently of how large `F` is.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::{
    enumerate_half_filling, Family, Hamiltonian, Param, Potential, ProbeSpec, SectorBasis,
};
use crate::spectral::{analytic_bloch, ground_pairs, ground_pairs_from, LowestPairs, SolverOptions};

/// Outcomes with probability below this are left out of the classical sum.
pub const PROBABILITY_FLOOR: f64 = 1e-14;
/// Relative agreement expected between independent Fisher routes.
pub const FD_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepPolicy {
    pub relative: f64,
    pub floor: f64,
    pub window: (f64, f64),
    pub max_adjustments: usize,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            relative: 1e-6,
            floor: 1e-13,
            window: (1e-10, 1e-4),
            max_adjustments: 40,
        }
    }
}

impl StepPolicy {
    pub fn initial_step(&self, theta: f64) -> f64 {
        (self.relative * theta.abs()).max(self.floor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative {
    pub direction: Param,
    pub step: f64,
    /// Raw central difference.
    pub vector: Vec<f64>,
    /// `vector` with its component along the ground state removed.
    pub orthogonal: Vec<f64>,
    pub overlap_deficit: f64,
    pub adjustments: usize,
}

/// Central-difference result for a generic parameterized family.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralDifference {
    pub derivative: Vec<f64>,
    pub step: f64,
    pub overlap_deficit: f64,
    pub adjustments: usize,
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `||a - b||^2 / 2`, equal to `1 - <a|b>` for unit vectors but free of cancellation.
fn deficit(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()
}

fn align(v: &mut [f64], reference: &[f64]) {
    if dot(v, reference) < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Adaptive central difference of `state(theta)`; endpoints are sign-aligned to `center`.
pub fn central_difference<F>(
    theta: f64,
    center: &[f64],
    policy: &StepPolicy,
    state: F,
) -> Result<CentralDifference>
where
    F: Fn(f64) -> Result<Vec<f64>>,
{
    let mut step = policy.initial_step(theta);
    let (lo, hi) = policy.window;
    let mut adjustments = 0;
    loop {
        let mut plus = state(theta + 0.5 * step)?;
        let mut minus = state(theta - 0.5 * step)?;
        align(&mut plus, center);
        align(&mut minus, center);
        let d = deficit(&plus, &minus);
        let within = (lo..=hi).contains(&d);
        if within || adjustments >= policy.max_adjustments {
            if !within {
                return Err(Error::StepSearch {
                    adjustments,
                    deficit: d,
                    step,
                });
            }
            let derivative = plus
                .iter()
                .zip(&minus)
                .map(|(p, m)| (p - m) / step)
                .collect();
            return Ok(CentralDifference {
                derivative,
                step,
                overlap_deficit: d,
                adjustments,
                plus,
                minus,
            });
        }
        if d > hi {
            step *= 0.5;
        } else {
            step *= 2.0;
        }
        adjustments += 1;
    }
}

/// `4 [<dpsi|dpsi> - <psi|dpsi>^2]` for a unit vector `psi`.
pub fn qfi_scalar(psi: &[f64], dpsi: &[f64]) -> f64 {
    let overlap = dot(psi, dpsi);
    (4.0 * (dot(dpsi, dpsi) - overlap * overlap)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FisherKind {
    Quantum,
    Classical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FisherMethod {
    Perturbative,
    FiniteDifference,
}

impl FisherMethod {
    pub fn key(self) -> &'static str {
        match self {
            FisherMethod::Perturbative => "perturbative",
            FisherMethod::FiniteDifference => "finite-difference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Povm {
    PositionBasis,
    SpinConfigurationBasis,
}

impl Povm {
    pub fn key(self) -> &'static str {
        match self {
            Povm::PositionBasis => "position",
            Povm::SpinConfigurationBasis => "spin-configuration",
        }
    }

    pub fn for_family(family: Family) -> Povm {
        match family {
            Family::SingleParticle => Povm::PositionBasis,
            Family::ManyBodyHalfFilling => Povm::SpinConfigurationBasis,
        }
    }
}

/// Symmetric `order x order` Fisher matrix (`order` is 1 or 2; unused slots are zero).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherMatrix {
    pub order: usize,
    pub entries: [[f64; 2]; 2],
    pub kind: FisherKind,
    pub method: FisherMethod,
    /// `|Tr(rho [L1, L2])|`; quantum order-2 matrices only.
    pub weak_commutativity_residual: Option<f64>,
    pub degenerate: bool,
}

impl FisherMatrix {
    pub fn scalar(value: f64, kind: FisherKind, method: FisherMethod) -> Self {
        FisherMatrix {
            order: 1,
            entries: [[value, 0.0], [0.0, 0.0]],
            kind,
            method,
            weak_commutativity_residual: None,
            degenerate: false,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// Smallest eigenvalue.
    pub fn min_eigenvalue(&self) -> f64 {
        if self.order == 1 {
            return self.entries[0][0];
        }
        let [[a, b], [_, d]] = self.entries;
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d).powi(2) + b * b).sqrt();
        mean - rad
    }

    pub fn max_eigenvalue(&self) -> f64 {
        if self.order == 1 {
            return self.entries[0][0];
        }
        let [[a, b], [_, d]] = self.entries;
        0.5 * (a + d) + (0.25 * (a - d).powi(2) + b * b).sqrt()
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries[0][1] == self.entries[1][0]
    }
}

/// Probabilities `|<k|psi>|^2` in the working basis.
pub fn probabilities(psi: &[f64]) -> Vec<f64> {
    psi.iter().map(|x| x * x).collect()
}

/// Classical Fisher matrix from probabilities and their derivatives (one slice per parameter).
pub fn cfi_from_probabilities(p: &[f64], dp: &[&[f64]]) -> Vec<Vec<f64>> {
    let n = dp.len();
    let mut out = vec![vec![0.0; n]; n];
    for (k, &pk) in p.iter().enumerate() {
        if pk < PROBABILITY_FLOOR {
            continue;
        }
        for i in 0..n {
            for j in i..n {
                out[i][j] += dp[i][k] * dp[j][k] / pk;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            out[i][j] = out[j][i];
        }
    }
    out
}

/// Pure-state SLDs `L_i = 2(|d_i><psi| + |psi><d_i|)` kept in factored form.
#[derive(Debug, Clone, PartialEq)]
pub struct SldPair {
    pub psi: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub trace_commutator: f64,
    /// Frobenius norm of `[L1, L2]`.
    pub commutator_norm: f64,
    /// Largest `||d rho - (rho L + L rho)/2||` over the two operators.
    pub defining_residual: f64,
}

impl SldPair {
    /// Dense form of `L_i` (`i` = 0 or 1); only sensible for small dimensions.
    pub fn to_dense(&self, i: usize) -> DMatrix<f64> {
        let d = if i == 0 { &self.d1 } else { &self.d2 };
        let n = self.psi.len();
        DMatrix::from_fn(n, n, |r, c| 2.0 * (d[r] * self.psi[c] + self.psi[r] * d[c]))
    }
}

/// Builds the SLD pair and evaluates the commutator diagnostics exactly inside
/// `span{psi, d1, d2}`, where both operators live.
pub fn sld_pair(psi: &[f64], d1: &[f64], d2: &[f64]) -> SldPair {
    // orthonormal basis of the span
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(3);
    for v in [psi, d1, d2] {
        let mut w = v.to_vec();
        for _ in 0..2 {
            for b in &basis {
                let p = dot(b, &w);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
            }
        }
        let n = dot(&w, &w).sqrt();
        let scale = dot(v, v).sqrt().max(f64::MIN_POSITIVE);
        if n > 1e-13 * scale {
            w.iter_mut().for_each(|x| *x /= n);
            basis.push(w);
        }
    }
    let coords = |v: &[f64]| {
        let mut c = [0.0; 3];
        for (k, b) in basis.iter().enumerate() {
            c[k] = dot(b, v);
        }
        c
    };
    let cp = coords(psi);
    let c1 = coords(d1);
    let c2 = coords(d2);
    let outer = |a: [f64; 3], b: [f64; 3]| {
        Matrix3::from_fn(|r, c| a[r] * b[c])
    };
    let l1 = (outer(c1, cp) + outer(cp, c1)) * 2.0;
    let l2 = (outer(c2, cp) + outer(cp, c2)) * 2.0;
    let rho = outer(cp, cp);
    let comm = l1 * l2 - l2 * l1;
    let trace_commutator = (rho * comm).trace();
    let commutator_norm = comm.norm();
    let residual = |l: &Matrix3<f64>, c: [f64; 3]| {
        let drho = outer(c, cp) + outer(cp, c);
        (drho - (rho * l + l * rho) * 0.5).norm()
    };
    let defining_residual = residual(&l1, c1).max(residual(&l2, c2));
    SldPair {
        psi: psi.to_vec(),
        d1: d1.to_vec(),
        d2: d2.to_vec(),
        trace_commutator,
        commutator_norm,
        defining_residual,
    }
}

/// `Tr[W F^-1]` through the explicit inverse; `w = None` means the identity.
pub fn total_uncertainty(f: &FisherMatrix, w: Option<[[f64; 2]; 2]>) -> Result<f64> {
    let lmin = f.min_eigenvalue();
    let lmax = f.max_eigenvalue();
    let condition = if lmin > 0.0 { lmax / lmin } else { f64::INFINITY };
    if !(lmin > 0.0) || condition > 1e15 {
        return Err(Error::IllConditioned { condition });
    }
    let w = w.unwrap_or([[1.0, 0.0], [0.0, 1.0]]);
    if f.order == 1 {
        return Ok(w[0][0] / f.entries[0][0]);
    }
    let [[a, b], [_, d]] = f.entries;
    let det = a * d - b * b;
    let inv = [[d / det, -b / det], [-b / det, a / det]];
    let mut tr = 0.0;
    for (i, row) in w.iter().enumerate() {
        for (k, wik) in row.iter().enumerate() {
            tr += wik * inv[k][i];
        }
    }
    Ok(tr)
}

/// Entrywise `F * gap`, i.e. `F / t` with preparation time `t = 1/gap`.
pub fn time_normalized(f: &FisherMatrix, gap: f64) -> Result<FisherMatrix> {
    if !(gap > 0.0) {
        return Err(Error::ZeroGap);
    }
    let mut out = *f;
    for row in out.entries.iter_mut() {
        for x in row.iter_mut() {
            *x *= gap;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbativeQfi {
    pub total: f64,
    /// The `k = 2` term alone, a lower bound on `total`.
    pub lower_bound: f64,
}

/// Zero-field sum over the excited Bloch states for a single-particle monomial probe.
pub fn qfi_perturbative(spec: &ProbeSpec) -> Result<PerturbativeQfi> {
    spec.validate()?;
    if spec.family != Family::SingleParticle {
        return Err(Error::Unsupported(
            "perturbative QFI needs the single-particle Bloch spectrum".into(),
        ));
    }
    let Potential::Monomial { gamma, .. } = spec.potential else {
        return Err(Error::Unsupported(
            "perturbative QFI is defined for monomial potentials".into(),
        ));
    };
    let l = spec.l;
    let lp1 = (l + 1) as f64;
    let q = std::f64::consts::PI / lp1;
    let weights: Vec<f64> = (1..=l)
        .map(|i| (i as f64).powf(gamma) * (i as f64 * q).sin())
        .collect();
    let mut total = 0.0;
    let mut lower_bound = 0.0;
    for k in 2..=l {
        let kq = k as f64 * q;
        let n: f64 = weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * ((i + 1) as f64 * kq).sin())
            .sum();
        let d = (kq.cos() - q.cos()).powi(2);
        let term = n * n / d;
        total += term;
        if k == 2 {
            lower_bound = term;
        }
    }
    let pref = 4.0 / (spec.j * spec.j * lp1 * lp1);
    Ok(PerturbativeQfi {
        total: pref * total,
        lower_bound: pref * lower_bound,
    })
}

/// Zero-field sum over states using the Bloch eigenvectors, a second route to the same number.
pub fn qfi_sum_over_states(spec: &ProbeSpec) -> Result<f64> {
    let Potential::Monomial { gamma, .. } = spec.potential else {
        return Err(Error::Unsupported("monomial potentials only".into()));
    };
    let bloch = analytic_bloch(spec.l, spec.j)?;
    let vecs = bloch.vectors.as_ref().unwrap();
    let h1: Vec<f64> = (1..=spec.l).map(|i| (i as f64).powf(gamma)).collect();
    let g = &vecs[0];
    let mut f = 0.0;
    for k in 1..spec.l {
        let m: f64 = (0..spec.l).map(|i| vecs[k][i] * h1[i] * g[i]).sum();
        let de = bloch.energies[k] - bloch.energies[0];
        f += m * m / (de * de);
    }
    Ok(4.0 * f)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalOptions {
    pub solver: SolverOptions,
    pub step: StepPolicy,
    /// Proceed on a degenerate ground state (symmetric-line handling) instead of failing.
    pub allow_degenerate: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            solver: SolverOptions::default(),
            step: StepPolicy::default(),
            allow_degenerate: false,
        }
    }
}

/// Ground state and its derivatives along every field of the potential.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherPoint {
    pub spec: ProbeSpec,
    pub energy: f64,
    pub gap: f64,
    pub degenerate: bool,
    pub psi: Vec<f64>,
    pub derivatives: Vec<StateDerivative>,
    pub plus: Vec<Vec<f64>>,
    pub minus: Vec<Vec<f64>>,
}

impl FisherPoint {
    pub fn qfi(&self) -> FisherMatrix {
        let n = self.derivatives.len();
        let mut entries = [[0.0; 2]; 2];
        for i in 0..n {
            for j in i..n {
                let di = &self.derivatives[i].vector;
                let dj = &self.derivatives[j].vector;
                let v = 4.0 * (dot(di, dj) - dot(di, &self.psi) * dot(&self.psi, dj));
                entries[i][j] = v;
                entries[j][i] = v;
            }
        }
        let weak = (n == 2).then(|| self.sld().trace_commutator.abs());
        FisherMatrix {
            order: n,
            entries,
            kind: FisherKind::Quantum,
            method: FisherMethod::FiniteDifference,
            weak_commutativity_residual: weak,
            degenerate: self.degenerate,
        }
    }

    pub fn cfi(&self, povm: Povm) -> Result<FisherMatrix> {
        if Povm::for_family(self.spec.family) != povm {
            return Err(Error::Unsupported(format!(
                "{} measurement does not match the {} family",
                povm.key(),
                self.spec.family.key()
            )));
        }
        let p = probabilities(&self.psi);
        let dps: Vec<Vec<f64>> = self
            .derivatives
            .iter()
            .enumerate()
            .map(|(k, d)| {
                self.plus[k]
                    .iter()
                    .zip(&self.minus[k])
                    .map(|(a, b)| (a * a - b * b) / d.step)
                    .collect()
            })
            .collect();
        let refs: Vec<&[f64]> = dps.iter().map(|v| v.as_slice()).collect();
        let c = cfi_from_probabilities(&p, &refs);
        let n = c.len();
        let mut entries = [[0.0; 2]; 2];
        for i in 0..n {
            for j in 0..n {
                entries[i][j] = c[i][j];
            }
        }
        Ok(FisherMatrix {
            order: n,
            entries,
            kind: FisherKind::Classical,
            method: FisherMethod::FiniteDifference,
            weak_commutativity_residual: None,
            degenerate: self.degenerate,
        })
    }

    /// SLD pair of a two-field point built from the ground-orthogonal derivatives.
    pub fn sld(&self) -> SldPair {
        let d2 = self
            .derivatives
            .get(1)
            .map(|d| d.orthogonal.as_slice())
            .unwrap_or(&self.derivatives[0].orthogonal);
        sld_pair(&self.psi, &self.derivatives[0].orthogonal, d2)
    }
}

/// Evaluates Fisher quantities; caches sector bases across calls.
#[derive(Debug, Default)]
pub struct Evaluator {
    pub options: EvalOptions,
    bases: Mutex<HashMap<usize, Arc<SectorBasis>>>,
}

impl Evaluator {
    pub fn new(options: EvalOptions) -> Self {
        Evaluator {
            options,
            bases: Mutex::new(HashMap::new()),
        }
    }

    pub fn basis(&self, l: usize) -> Result<Arc<SectorBasis>> {
        let mut cache = self.bases.lock().expect("basis cache poisoned");
        if let Some(b) = cache.get(&l) {
            return Ok(b.clone());
        }
        let b = Arc::new(enumerate_half_filling(l)?);
        cache.insert(l, b.clone());
        Ok(b)
    }

    pub fn hamiltonian(&self, spec: &ProbeSpec) -> Result<Hamiltonian> {
        let basis = match spec.family {
            Family::ManyBodyHalfFilling => Some(self.basis(spec.l)?),
            Family::SingleParticle => None,
        };
        Hamiltonian::build(spec, basis)
    }

    pub fn lowest(&self, spec: &ProbeSpec, k: usize) -> Result<LowestPairs> {
        let h = self.hamiltonian(spec)?;
        ground_pairs(&h, k, &self.options.solver)
    }

    /// Ground vector of a nearby point; iterative solves start from `near`.
    fn ground_vector(&self, spec: &ProbeSpec, near: &[f64]) -> Result<Vec<f64>> {
        let h = self.hamiltonian(spec)?;
        let lp = ground_pairs_from(&h, 1, &self.options.solver, Some(near))?;
        Ok(lp.pairs.into_iter().next().unwrap().vector)
    }

    fn derivative_at(
        &self,
        spec: &ProbeSpec,
        param: Param,
        psi: &[f64],
    ) -> Result<(StateDerivative, Vec<f64>, Vec<f64>)> {
        let theta = spec.potential.get(param)?;
        let cd = central_difference(theta, psi, &self.options.step, |x| {
            self.ground_vector(&spec.with_param(param, x)?, psi)
        })?;
        let overlap = dot(psi, &cd.derivative);
        let orthogonal = cd
            .derivative
            .iter()
            .zip(psi)
            .map(|(d, p)| d - overlap * p)
            .collect();
        Ok((
            StateDerivative {
                direction: param,
                step: cd.step,
                vector: cd.derivative,
                orthogonal,
                overlap_deficit: cd.overlap_deficit,
                adjustments: cd.adjustments,
            },
            cd.plus,
            cd.minus,
        ))
    }

    pub fn differentiate(&self, spec: &ProbeSpec, param: Param) -> Result<StateDerivative> {
        let point = self.lowest(spec, 2)?;
        self.check_degeneracy(&point)?;
        Ok(self.derivative_at(spec, param, &point.ground().vector)?.0)
    }

    fn check_degeneracy(&self, lp: &LowestPairs) -> Result<()> {
        if lp.degenerate && !self.options.allow_degenerate {
            let gap = lp.gap().unwrap_or(0.0);
            return Err(Error::Degenerate {
                gap,
                threshold: crate::spectral::degeneracy_threshold(lp.ground().energy),
            });
        }
        Ok(())
    }

    pub fn point(&self, spec: &ProbeSpec) -> Result<FisherPoint> {
        let lp = self.lowest(spec, 2)?;
        self.check_degeneracy(&lp)?;
        let gap = lp.gap().unwrap_or(f64::NAN);
        let degenerate = lp.degenerate;
        let ground = lp.pairs.into_iter().next().unwrap();
        let mut derivatives = Vec::new();
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for &param in spec.potential.params() {
            let (d, p, m) = self.derivative_at(spec, param, &ground.vector)?;
            derivatives.push(d);
            plus.push(p);
            minus.push(m);
        }
        Ok(FisherPoint {
            spec: *spec,
            energy: ground.energy,
            gap,
            degenerate,
            psi: ground.vector,
            derivatives,
            plus,
            minus,
        })
    }
}

pub fn differentiate_ground_state(
    spec: &ProbeSpec,
    direction: Param,
    policy: &StepPolicy,
) -> Result<StateDerivative> {
    Evaluator::new(EvalOptions {
        step: *policy,
        ..Default::default()
    })
    .differentiate(spec, direction)
}

pub fn qfi_matrix(spec: &ProbeSpec) -> Result<FisherMatrix> {
    Ok(Evaluator::default().point(spec)?.qfi())
}

pub fn cfi_matrix(spec: &ProbeSpec, povm: Povm) -> Result<FisherMatrix> {
    Evaluator::default().point(spec)?.cfi(povm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(theta: f64) -> Result<Vec<f64>> {
        Ok(vec![theta.cos(), theta.sin()])
    }

    #[test]
    fn analytic_circle_derivative() {
        let theta = 0.3;
        let cd = central_difference(theta, &circle(theta).unwrap(), &StepPolicy::default(), circle)
            .unwrap();
        assert!((cd.derivative[0] + theta.sin()).abs() < 1e-8);
        assert!((cd.derivative[1] - theta.cos()).abs() < 1e-8);
        let psi = circle(theta).unwrap();
        assert!((qfi_scalar(&psi, &cd.derivative) - 4.0).abs() < 1e-6);
    }

    #[test]
    fn constant_state_has_zero_qfi() {
        assert_eq!(qfi_scalar(&[1.0, 0.0], &[0.0, 0.0]), 0.0);
    }

    #[test]
    fn global_sign_flip_is_harmless() {
        let theta = 0.7;
        let center = circle(theta).unwrap();
        let flipped = |t: f64| circle(t).map(|v| v.into_iter().map(|x| -x).collect());
        let a = central_difference(theta, &center, &StepPolicy::default(), circle).unwrap();
        let b = central_difference(theta, &center, &StepPolicy::default(), flipped).unwrap();
        assert!((qfi_scalar(&center, &a.derivative) - qfi_scalar(&center, &b.derivative)).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_cfi() {
        for theta in [0.2_f64, 0.5, 0.9] {
            let p = [theta, 1.0 - theta];
            let dp = [1.0, -1.0];
            let c = cfi_from_probabilities(&p, &[&dp]);
            assert!((c[0][0] - 1.0 / (theta * (1.0 - theta))).abs() < 1e-12);
        }
    }

    #[test]
    fn diagonal_total_uncertainty() {
        let f = FisherMatrix {
            order: 2,
            entries: [[4.0, 0.0], [0.0, 8.0]],
            kind: FisherKind::Quantum,
            method: FisherMethod::FiniteDifference,
            weak_commutativity_residual: None,
            degenerate: false,
        };
        assert!((total_uncertainty(&f, None).unwrap() - 0.375).abs() < 1e-15);
        let singular = FisherMatrix {
            entries: [[1.0, 1.0], [1.0, 1.0]],
            ..f
        };
        assert!(matches!(
            total_uncertainty(&singular, None),
            Err(Error::IllConditioned { .. })
        ));
        let t = time_normalized(&f, 0.5).unwrap();
        assert_eq!(t.entries, [[2.0, 0.0], [0.0, 4.0]]);
        assert!(matches!(time_normalized(&f, 0.0), Err(Error::ZeroGap)));
    }

    #[test]
    fn perturbative_routes_agree_and_bound_holds() {
        for l in [11, 40, 101] {
            for gamma in [0.5, 1.0, 2.0] {
                let spec = ProbeSpec::single_particle(l, Potential::monomial(0.0, gamma)).unwrap();
                let p = qfi_perturbative(&spec).unwrap();
                let s = qfi_sum_over_states(&spec).unwrap();
                assert!((p.total - s).abs() < 1e-9 * s, "L={l} g={gamma}: {} vs {s}", p.total);
                assert!(p.total >= p.lower_bound);
            }
        }
    }

    #[test]
    fn perturbative_rejects_other_families() {
        let mb = ProbeSpec::many_body(6, Potential::monomial(0.0, 1.0)).unwrap();
        assert!(matches!(qfi_perturbative(&mb), Err(Error::Unsupported(_))));
        let par = ProbeSpec::single_particle(6, Potential::parabolic(0.0, 0.0)).unwrap();
        assert!(qfi_perturbative(&par).is_err());
    }

    #[test]
    fn finite_difference_matches_perturbative_for_linear_field() {
        let spec = ProbeSpec::single_particle(101, Potential::monomial(1e-10, 1.0)).unwrap();
        let fd = qfi_matrix(&spec).unwrap().get(0, 0);
        let pt = qfi_perturbative(&spec).unwrap().total;
        assert!((fd - pt).abs() / pt < 1e-3, "{fd} vs {pt}");
    }

    #[test]
    fn sld_defining_identity_and_commutator() {
        let spec = ProbeSpec::single_particle(21, Potential::parabolic(1e-3, 2e-5)).unwrap();
        let point = Evaluator::default().point(&spec).unwrap();
        let sld = point.sld();
        assert!(sld.defining_residual <= 1e-8 * point.qfi().norm().max(1.0));
        assert!(sld.trace_commutator.abs() <= 1e-8 * point.qfi().norm());
        // dense check of the factored operators on a small chain
        let l1 = sld.to_dense(0);
        let l2 = sld.to_dense(1);
        let psi = DMatrix::from_column_slice(21, 1, &point.psi);
        let rho = &psi * psi.transpose();
        let tr = (&rho * (&l1 * &l2 - &l2 * &l1)).trace();
        assert!((tr - sld.trace_commutator).abs() <= 1e-9 * (l1.norm() * l2.norm()).max(1.0));
        assert!(((&l1 * &l2 - &l2 * &l1).norm() - sld.commutator_norm).abs()
            <= 1e-9 * (l1.norm() * l2.norm()));
    }

    #[test]
    fn cfi_needs_matching_measurement() {
        let spec = ProbeSpec::single_particle(11, Potential::parabolic(1e-3, 1e-4)).unwrap();
        let point = Evaluator::default().point(&spec).unwrap();
        assert!(point.cfi(Povm::SpinConfigurationBasis).is_err());
        let c = point.cfi(Povm::PositionBasis).unwrap();
        let q = point.qfi();
        assert!((c.get(0, 0) - q.get(0, 0)).abs() < FD_TOLERANCE * q.get(0, 0));
    }

    #[test]
    fn step_search_failure_is_reported() {
        let flat = |_: f64| Ok(vec![1.0, 0.0]);
        let err = central_difference(0.1, &[1.0, 0.0], &StepPolicy::default(), flat).unwrap_err();
        assert!(matches!(err, Error::StepSearch { adjustments: 40, .. }));
    }
}
