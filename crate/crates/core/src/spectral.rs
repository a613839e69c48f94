//! Eigen-decompositions, ground states and gaps.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe::{Hamiltonian, ProbeSpec, SparseHamiltonian, TridiagonalHamiltonian};

/// Largest single-particle size handled by the dense path.
pub const DENSE_CAP: usize = 2048;
/// Seed of the iterative solver's start vector.
pub const DEFAULT_SOLVER_SEED: u64 = 0x5eed_57a2;

#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub energy: f64,
    pub vector: Vec<f64>,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    pub vectors: Option<Vec<Vec<f64>>>,
    pub gap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub gap: f64,
    pub e1: f64,
    pub e2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub kind: SolverKind,
    /// Relative residual target, `||Hv - Ev|| <= tolerance * max(1, |E|)`.
    pub tolerance: f64,
    pub max_matvecs: usize,
    pub krylov_dim: usize,
    pub seed: u64,
    /// Sparse sectors up to this dimension are diagonalized densely under `Auto`.
    pub dense_threshold: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            kind: SolverKind::Auto,
            tolerance: 1e-11,
            max_matvecs: 50_000,
            krylov_dim: 48,
            seed: DEFAULT_SOLVER_SEED,
            dense_threshold: 128,
        }
    }
}

/// The lowest eigenpairs together with a degeneracy flag.
#[derive(Debug, Clone, PartialEq)]
pub struct LowestPairs {
    pub pairs: Vec<EigenPair>,
    pub degenerate: bool,
}

impl LowestPairs {
    pub fn ground(&self) -> &EigenPair {
        &self.pairs[0]
    }

    pub fn gap(&self) -> Option<f64> {
        (self.pairs.len() >= 2).then(|| self.pairs[1].energy - self.pairs[0].energy)
    }
}

pub fn degeneracy_threshold(e1: f64) -> f64 {
    1e-12 * e1.abs().max(1.0)
}

/// Makes the largest-magnitude component positive; ties go to the lowest index.
/// Magnitudes within a relative `1e-10` of the maximum count as tied.
pub fn gauge_fix(v: &mut [f64]) {
    let max = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let Some(best) = v.iter().position(|x| x.abs() >= max * (1.0 - 1e-10)) else {
        return;
    };
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn inverse_participation_ratio(v: &[f64]) -> f64 {
    v.iter().map(|x| x.powi(4)).sum()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual_of(h: &dyn Fn(&[f64], &mut [f64]), e: f64, v: &[f64]) -> f64 {
    let mut w = vec![0.0; v.len()];
    h(v, &mut w);
    w.iter()
        .zip(v)
        .map(|(a, b)| (a - e * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Dense symmetric eigen-decomposition, ascending and gauge-fixed.
pub fn dense_spectrum(m: DMatrix<f64>) -> Spectrum {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let energies: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            gauge_fix(&mut v);
            v
        })
        .collect();
    let gap = if n >= 2 { energies[1] - energies[0] } else { 0.0 };
    Spectrum {
        energies,
        vectors: Some(vectors),
        gap,
    }
}

pub fn full_spectrum(h: &TridiagonalHamiltonian) -> Result<Spectrum> {
    if h.dim() > DENSE_CAP {
        return Err(Error::Unsupported(format!(
            "dense spectrum limited to L <= {DENSE_CAP}, got {}",
            h.dim()
        )));
    }
    Ok(dense_spectrum(h.to_dense()))
}

/// Number of eigenvalues of the tridiagonal matrix strictly below `x`.
pub fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let scale = diag
        .iter()
        .chain(off)
        .fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
    let tiny = f64::EPSILON * f64::EPSILON * scale;
    let mut count = 0;
    let mut q = diag[0] - x;
    if q.abs() < tiny {
        q = -tiny;
    }
    if q < 0.0 {
        count += 1;
    }
    for i in 1..diag.len() {
        q = diag[i] - x - off[i - 1] * off[i - 1] / q;
        if q.abs() < tiny {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// `k`-th smallest eigenvalue (0-based) by Sturm bisection.
pub fn tridiagonal_eigenvalue(diag: &[f64], off: &[f64], k: usize) -> f64 {
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 }
            + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let pad = 1e-12 * (hi - lo).abs().max(1.0);
    lo -= pad;
    hi += pad;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `(T - shift) x = b` by Gaussian elimination with partial pivoting.
fn tridiagonal_solve(diag: &[f64], off: &[f64], shift: f64, b: &mut [f64]) {
    let n = diag.len();
    let scale = diag
        .iter()
        .chain(off)
        .fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
    let guard = f64::EPSILON * scale;
    // rows stored as (main, upper, upper2) after pivoting
    let mut a: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let mut c: Vec<f64> = off.to_vec();
    c.push(0.0);
    let mut sub: Vec<f64> = off.to_vec();
    let mut c2 = vec![0.0; n];
    for i in 0..n - 1 {
        if sub[i].abs() > a[i].abs() {
            // swap rows i and i+1
            let (ai, ci, c2i, bi) = (a[i], c[i], c2[i], b[i]);
            a[i] = sub[i];
            c[i] = a[i + 1];
            c2[i] = c[i + 1];
            b[i] = b[i + 1];
            sub[i] = ai;
            a[i + 1] = ci;
            c[i + 1] = c2i;
            b[i + 1] = bi;
        }
        if a[i].abs() < guard {
            a[i] = guard;
        }
        let f = sub[i] / a[i];
        a[i + 1] -= f * c[i];
        c[i + 1] -= f * c2[i];
        b[i + 1] -= f * b[i];
    }
    if a[n - 1].abs() < guard {
        a[n - 1] = guard;
    }
    b[n - 1] /= a[n - 1];
    if n >= 2 {
        b[n - 2] = (b[n - 2] - c[n - 2] * b[n - 1]) / a[n - 2];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        b[i] = (b[i] - c[i] * b[i + 1] - c2[i] * b[i + 2]) / a[i];
    }
}

fn orthonormalize_against(v: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    for _ in 0..2 {
        for u in basis {
            let p = dot(u, v);
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= p * y);
        }
    }
    let n = norm(v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

fn start_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Lowest `k` pairs of a tridiagonal matrix by bisection and inverse iteration.
pub fn tridiagonal_lowest(t: &TridiagonalHamiltonian, k: usize, seed: u64) -> Result<Vec<EigenPair>> {
    let n = t.dim();
    if k == 0 || k > n {
        return Err(Error::InvalidProbe(format!("cannot take {k} pairs of a {n}-dim matrix")));
    }
    let scale = t.max_abs_entry().max(f64::MIN_POSITIVE);
    let apply = |x: &[f64], y: &mut [f64]| t.apply(x, y);
    let mut out: Vec<EigenPair> = Vec::with_capacity(k);
    let mut cluster: Vec<Vec<f64>> = Vec::new();
    for idx in 0..k {
        let e = tridiagonal_eigenvalue(&t.diag, &t.offdiag, idx);
        if let Some(prev) = out.last() {
            if (e - prev.energy).abs() > 1e-3 * scale {
                cluster.clear();
            }
        }
        let mut v = start_vector(n, seed.wrapping_add(idx as u64));
        let mut res = f64::INFINITY;
        for _ in 0..8 {
            tridiagonal_solve(&t.diag, &t.offdiag, e, &mut v);
            if orthonormalize_against(&mut v, &cluster) == 0.0 {
                v = start_vector(n, seed.wrapping_add(1000 + idx as u64));
                orthonormalize_against(&mut v, &cluster);
            }
            res = residual_of(&apply, e, &v);
            if res <= 1e-13 * scale.max(1.0) {
                break;
            }
        }
        gauge_fix(&mut v);
        cluster.push(v.clone());
        out.push(EigenPair {
            energy: e,
            vector: v,
            residual: res,
        });
    }
    Ok(out)
}

/// Restarted Krylov eigensolver for the lowest `k` pairs; the matrix is touched only via `apply`.
///
/// The basis is kept fully orthogonal and the projected matrix is formed explicitly
/// from stored images `A v`, so restarting with Ritz vectors (plus the current
/// residual direction) is exact. Convergence is checked every few expansions.
pub fn krylov_lowest(
    apply: &dyn Fn(&[f64], &mut [f64]),
    n: usize,
    k: usize,
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> Result<Vec<EigenPair>> {
    if k == 0 || k > n {
        return Err(Error::InvalidProbe(format!("cannot take {k} pairs of a {n}-dim matrix")));
    }
    let m = opts.krylov_dim.max(2 * k + 8).min(n);
    let keep = (m / 2).max(k + 1).min(m - 1).max(k);
    let chunk = 8;
    let mut v: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut first = match start {
        Some(s) if s.len() == n => s.to_vec(),
        _ => start_vector(n, opts.seed),
    };
    if orthonormalize_against(&mut first, &[]) == 0.0 {
        first = start_vector(n, opts.seed);
    }
    v.push(first);
    let mut w: Vec<Vec<f64>> = Vec::with_capacity(m);
    // lower triangle of V^T A V, row i holds columns 0..=i
    let mut hrows: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut matvecs = 0usize;
    let mut reseed = 1u64;
    let mut last_residual = f64::INFINITY;
    loop {
        let target = (v.len() + chunk).min(m);
        loop {
            while w.len() < v.len() {
                let mut y = vec![0.0; n];
                apply(&v[w.len()], &mut y);
                matvecs += 1;
                w.push(y);
            }
            if v.len() >= target {
                break;
            }
            let mut c = w.last().unwrap().clone();
            let c_norm = norm(&c).max(f64::MIN_POSITIVE);
            let r = orthonormalize_against(&mut c, &v);
            if r <= 1e-12 * c_norm {
                // invariant subspace; continue with a fresh direction
                c = start_vector(n, opts.seed.wrapping_add(reseed));
                reseed += 1;
                if orthonormalize_against(&mut c, &v) <= 1e-8 {
                    break;
                }
            }
            v.push(c);
        }
        let p = v.len();
        while hrows.len() < p {
            let i = hrows.len();
            let row: Vec<f64> = (0..=i)
                .map(|j| 0.5 * (dot(&v[i], &w[j]) + dot(&v[j], &w[i])))
                .collect();
            hrows.push(row);
        }
        let hmat = DMatrix::<f64>::from_fn(p, p, |i, j| if j <= i { hrows[i][j] } else { hrows[j][i] });
        let eig = SymmetricEigen::new(hmat);
        let mut order: Vec<usize> = (0..p).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let ritz = |col: usize| -> (Vec<f64>, Vec<f64>) {
            let s = eig.eigenvectors.column(col);
            let mut y = vec![0.0; n];
            let mut ay = vec![0.0; n];
            for i in 0..p {
                let si = s[i];
                if si != 0.0 {
                    y.iter_mut().zip(&v[i]).for_each(|(a, b)| *a += si * b);
                    ay.iter_mut().zip(&w[i]).for_each(|(a, b)| *a += si * b);
                }
            }
            (y, ay)
        };
        let mut converged = true;
        let mut pairs = Vec::with_capacity(k);
        for &col in order.iter().take(k) {
            let theta = eig.eigenvalues[col];
            let (y, ay) = ritz(col);
            let res = ay
                .iter()
                .zip(&y)
                .map(|(a, b)| (a - theta * b).powi(2))
                .sum::<f64>()
                .sqrt();
            if res > opts.tolerance * theta.abs().max(1.0) {
                converged = false;
            }
            last_residual = res;
            pairs.push((theta, y));
        }
        if converged || p == n {
            return Ok(pairs
                .into_iter()
                .map(|(theta, mut y)| {
                    let nv = norm(&y);
                    y.iter_mut().for_each(|x| *x /= nv);
                    gauge_fix(&mut y);
                    let residual = residual_of(apply, theta, &y);
                    EigenPair {
                        energy: theta,
                        vector: y,
                        residual,
                    }
                })
                .collect());
        }
        if matvecs >= opts.max_matvecs {
            return Err(Error::NoConvergence {
                iterations: matvecs,
                residual: last_residual,
            });
        }
        if p < m {
            continue;
        }
        // restart: retained Ritz vectors plus the residual direction of the basis
        let mut cont = w[p - 1].clone();
        orthonormalize_against(&mut cont, &v);
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut images: Vec<Vec<f64>> = Vec::with_capacity(m);
        for &col in order.iter().take(keep.min(p)) {
            let (y, ay) = ritz(col);
            let mut y2 = y;
            let nv = orthonormalize_against(&mut y2, &basis);
            if nv > 0.5 {
                let ay2 = if (nv - 1.0).abs() > 1e-12 {
                    let mut t = vec![0.0; n];
                    apply(&y2, &mut t);
                    matvecs += 1;
                    t
                } else {
                    ay
                };
                basis.push(y2);
                images.push(ay2);
            }
        }
        if orthonormalize_against(&mut cont, &basis) > 1e-10 {
            basis.push(cont);
        } else {
            let mut fresh = start_vector(n, opts.seed.wrapping_add(reseed));
            reseed += 1;
            orthonormalize_against(&mut fresh, &basis);
            basis.push(fresh);
        }
        v = basis;
        w = images;
        hrows.clear();
    }
}

fn sparse_lowest(
    h: &SparseHamiltonian,
    k: usize,
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> Result<Vec<EigenPair>> {
    let dense = match opts.kind {
        SolverKind::Dense => true,
        SolverKind::Iterative => false,
        SolverKind::Auto => h.dim <= opts.dense_threshold,
    };
    if dense {
        let spec = dense_spectrum(h.to_dense());
        let vectors = spec.vectors.unwrap();
        let apply = |x: &[f64], y: &mut [f64]| h.apply(x, y);
        return Ok((0..k.min(h.dim))
            .map(|i| EigenPair {
                energy: spec.energies[i],
                residual: residual_of(&apply, spec.energies[i], &vectors[i]),
                vector: vectors[i].clone(),
            })
            .collect());
    }
    let apply = |x: &[f64], y: &mut [f64]| h.apply(x, y);
    krylov_lowest(&apply, h.dim, k, opts, start)
}

/// The `k` lowest eigenpairs; with `k >= 2` the result carries the degeneracy flag.
pub fn ground_pairs(h: &Hamiltonian, k: usize, opts: &SolverOptions) -> Result<LowestPairs> {
    ground_pairs_from(h, k, opts, None)
}

/// As [`ground_pairs`], warm-starting iterative solves from `start` when given.
pub fn ground_pairs_from(
    h: &Hamiltonian,
    k: usize,
    opts: &SolverOptions,
    start: Option<&[f64]>,
) -> Result<LowestPairs> {
    let pairs = match h {
        Hamiltonian::Tridiagonal(t) => match opts.kind {
            SolverKind::Dense => {
                let s = full_spectrum(t)?;
                let vectors = s.vectors.unwrap();
                let apply = |x: &[f64], y: &mut [f64]| t.apply(x, y);
                (0..k.min(t.dim()))
                    .map(|i| EigenPair {
                        energy: s.energies[i],
                        residual: residual_of(&apply, s.energies[i], &vectors[i]),
                        vector: vectors[i].clone(),
                    })
                    .collect()
            }
            SolverKind::Iterative => {
                let apply = |x: &[f64], y: &mut [f64]| t.apply(x, y);
                krylov_lowest(&apply, t.dim(), k, opts, start)?
            }
            SolverKind::Auto => tridiagonal_lowest(t, k, opts.seed)?,
        },
        Hamiltonian::Sparse(s) => sparse_lowest(s, k, opts, start)?,
    };
    let degenerate = pairs.len() >= 2
        && pairs[1].energy - pairs[0].energy < degeneracy_threshold(pairs[0].energy);
    Ok(LowestPairs { pairs, degenerate })
}

pub fn energy_gap(spec: &ProbeSpec, opts: &SolverOptions) -> Result<GapRecord> {
    let h = Hamiltonian::build(spec, None)?;
    gap_of(&h, opts)
}

pub fn gap_of(h: &Hamiltonian, opts: &SolverOptions) -> Result<GapRecord> {
    let lp = ground_pairs(h, 2, opts)?;
    let e1 = lp.pairs[0].energy;
    let e2 = lp.pairs[1].energy;
    Ok(GapRecord {
        gap: (e2 - e1).max(0.0),
        e1,
        e2,
    })
}

/// Closed-form spectrum of the uniform open chain.
pub fn analytic_bloch(l: usize, j: f64) -> Result<Spectrum> {
    if l < 2 {
        return Err(Error::InvalidProbe(format!("L = {l} must be at least 2")));
    }
    let lp1 = (l + 1) as f64;
    let norm = (2.0 / lp1).sqrt();
    let mut energies = Vec::with_capacity(l);
    let mut vectors = Vec::with_capacity(l);
    for k in 1..=l {
        let q = k as f64 * std::f64::consts::PI / lp1;
        energies.push(-2.0 * j * q.cos());
        let mut v: Vec<f64> = (1..=l)
            .map(|site| {
                let sign = if site % 2 == 0 { 1.0 } else { -1.0 };
                sign * norm * (site as f64 * q).sin()
            })
            .collect();
        gauge_fix(&mut v);
        vectors.push(v);
    }
    let gap = energies[1] - energies[0];
    Ok(Spectrum {
        energies,
        vectors: Some(vectors),
        gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::probe::{enumerate_half_filling, Potential};
    use std::sync::Arc;

    #[test]
    fn two_site_chain() {
        let t = TridiagonalHamiltonian::from_site_energies(vec![0.0, 0.0], 1.0);
        let s = full_spectrum(&t).unwrap();
        assert!((s.energies[0] + 1.0).abs() < 1e-14);
        assert!((s.energies[1] - 1.0).abs() < 1e-14);
        let v = s.vectors.unwrap();
        let r = 1.0 / 2f64.sqrt();
        assert!((v[0][0].abs() - r).abs() < 1e-14 && (v[0][0] + v[0][1]).abs() < 1e-14);
        assert!((v[1][0] - r).abs() < 1e-14 && (v[1][1] - r).abs() < 1e-14);
    }

    #[test]
    fn bloch_matches_dense_at_zero_field() {
        for l in [2, 5, 7, 40] {
            let t = TridiagonalHamiltonian::from_site_energies(vec![0.0; l], 1.0);
            let a = analytic_bloch(l, 1.0).unwrap();
            let d = full_spectrum(&t).unwrap();
            for k in 0..l {
                assert!((a.energies[k] - d.energies[k]).abs() < 1e-12);
                let (va, vd) = (&a.vectors.as_ref().unwrap()[k], &d.vectors.as_ref().unwrap()[k]);
                for i in 0..l {
                    assert!((va[i] - vd[i]).abs() < 1e-10, "L={l} k={k} i={i}");
                }
            }
        }
    }

    #[test]
    fn bloch_orthonormal() {
        let a = analytic_bloch(7, 1.0).unwrap();
        let v = a.vectors.unwrap();
        for i in 0..7 {
            for j in 0..7 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(&v[i], &v[j]) - expect).abs() < 1e-13);
            }
        }
        assert!(analytic_bloch(1, 1.0).is_err());
    }

    #[test]
    fn bisection_agrees_with_dense() {
        let spec = ProbeSpec::single_particle(6, Potential::monomial(1.0, 2.0)).unwrap();
        let Hamiltonian::Tridiagonal(t) = Hamiltonian::build(&spec, None).unwrap() else {
            unreachable!()
        };
        let d = full_spectrum(&t).unwrap();
        for k in 0..6 {
            let e = tridiagonal_eigenvalue(&t.diag, &t.offdiag, k);
            assert!((e - d.energies[k]).abs() < 1e-12 * d.energies[k].abs().max(1.0));
        }
        let pairs = tridiagonal_lowest(&t, 3, 1).unwrap();
        for (k, p) in pairs.iter().enumerate() {
            let dv = &d.vectors.as_ref().unwrap()[k];
            for i in 0..6 {
                assert!((p.vector[i] - dv[i]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn strong_linear_field_localizes_on_first_site() {
        let spec = ProbeSpec::single_particle(3, Potential::monomial(1e3, 1.0)).unwrap();
        let h = Hamiltonian::build(&spec, None).unwrap();
        let g = ground_pairs(&h, 1, &SolverOptions::default()).unwrap();
        assert!(g.ground().vector[0].powi(2) > 0.999);
    }

    #[test]
    fn many_body_small_cases() {
        let spec = ProbeSpec::many_body(2, Potential::parabolic(0.0, 0.0)).unwrap();
        let h = Hamiltonian::build(&spec, None).unwrap();
        let g = ground_pairs(&h, 2, &SolverOptions::default()).unwrap();
        assert!((g.pairs[0].energy + 3.0).abs() < 1e-13);
        assert!((g.gap().unwrap() - 4.0).abs() < 1e-13);
    }

    #[test]
    fn krylov_matches_dense_on_sector() {
        for l in [4, 8, 10] {
            let spec = ProbeSpec::many_body(l, Potential::monomial(1e-6, 2.0)).unwrap();
            let basis = Arc::new(enumerate_half_filling(l).unwrap());
            let h = Hamiltonian::build(&spec, Some(basis)).unwrap();
            let dense = ground_pairs(
                &h,
                2,
                &SolverOptions {
                    kind: SolverKind::Dense,
                    ..Default::default()
                },
            )
            .unwrap();
            let iter = ground_pairs(
                &h,
                2,
                &SolverOptions {
                    kind: SolverKind::Iterative,
                    ..Default::default()
                },
            )
            .unwrap();
            for k in 0..2 {
                let e = dense.pairs[k].energy;
                assert!((e - iter.pairs[k].energy).abs() < 1e-10 * e.abs().max(1.0));
                assert!(iter.pairs[k].residual <= 1e-10 * e.abs().max(1.0));
            }
            let ov = dot(&dense.pairs[0].vector, &iter.pairs[0].vector);
            assert!((ov - 1.0).abs() < 1e-10, "L={l} overlap {ov}");
        }
    }

    #[test]
    fn krylov_on_tridiagonal_matches_bisection() {
        let spec = ProbeSpec::single_particle(301, Potential::monomial(1e-6, 2.0)).unwrap();
        let h = Hamiltonian::build(&spec, None).unwrap();
        let a = ground_pairs(&h, 2, &SolverOptions::default()).unwrap();
        let b = ground_pairs(
            &h,
            2,
            &SolverOptions {
                kind: SolverKind::Iterative,
                ..Default::default()
            },
        )
        .unwrap();
        for k in 0..2 {
            assert!((a.pairs[k].energy - b.pairs[k].energy).abs() < 1e-10);
        }
    }

    #[test]
    fn uniform_gap_formula() {
        let l = 30;
        let spec = ProbeSpec::single_particle(l, Potential::parabolic(0.0, 0.0)).unwrap();
        let g = energy_gap(&spec, &SolverOptions::default()).unwrap();
        let q = std::f64::consts::PI / (l as f64 + 1.0);
        let expect = 2.0 * (q.cos() - (2.0 * q).cos());
        assert!((g.gap - expect).abs() < 1e-12);
    }

    #[test]
    fn gauge_ties_go_to_lowest_index() {
        let mut v = vec![-0.5, 0.5, 0.1];
        gauge_fix(&mut v);
        assert_eq!(v, vec![0.5, -0.5, -0.1]);
    }
}
