//! Library results against routes built from scratch in test code.

use nalgebra::{DMatrix, SymmetricEigen};
use stark_core::fisher::{total_uncertainty, Evaluator, FisherKind, FisherMatrix, FisherMethod, Povm};
use stark_core::probe::{enumerate_half_filling, Family, Potential, ProbeSpec, SparseHamiltonian};
use stark_core::spectral::{energy_gap, SolverOptions};

fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

/// Full 2^L Heisenberg chain from Pauli products; site 1 is the rightmost factor.
fn heisenberg_full(l: usize, j: f64, v: &[f64]) -> DMatrix<f64> {
    let x = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    // sigma_y (x) sigma_y is real
    let yy = DMatrix::from_row_slice(4, 4, &[0., 0., 0., -1., 0., 0., 1., 0., 0., 1., 0., 0., -1., 0., 0., 0.]);
    // basis index bit 1 is spin up
    let z = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
    let embed = |op: &DMatrix<f64>, site: usize, width: usize| {
        let left = DMatrix::<f64>::identity(1 << (l - site - width), 1 << (l - site - width));
        let right = DMatrix::<f64>::identity(1 << site, 1 << site);
        kron(&kron(&left, op), &right)
    };
    let n = 1 << l;
    let mut h = DMatrix::<f64>::zeros(n, n);
    for i in 0..l - 1 {
        let bond = kron(&x, &x) + &yy + kron(&z, &z);
        h += embed(&bond, i, 2) * j;
    }
    for (i, vi) in v.iter().enumerate() {
        h += embed(&z, i, 1) * *vi;
    }
    h
}

fn sorted_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

#[test]
fn sector_spectrum_matches_pauli_construction() {
    for l in [2usize, 4, 6, 8] {
        let v: Vec<f64> = (0..l).map(|i| 0.3 * (i as f64).sin() + 0.05 * i as f64).collect();
        let full = heisenberg_full(l, 1.0, &v);
        let basis = enumerate_half_filling(l).unwrap();
        let idx: Vec<usize> = basis.states().iter().map(|&m| m as usize).collect();
        let block = DMatrix::from_fn(idx.len(), idx.len(), |a, b| full[(idx[a], idx[b])]);
        // the sector block is closed: no weight leaks to other magnetizations
        for &a in &idx {
            for c in 0..(1usize << l) {
                if (c.count_ones() as usize) != l / 2 {
                    assert_eq!(full[(a, c)], 0.0);
                }
            }
        }
        let oracle = sorted_eigenvalues(block);
        let sb = SparseHamiltonian::from_site_energies(std::sync::Arc::new(basis), 1.0, &v).unwrap();
        let ours = sorted_eigenvalues(sb.to_dense());
        for (a, b) in oracle.iter().zip(&ours) {
            assert!((a - b).abs() < 1e-10, "L = {l}: {a} vs {b}");
        }
    }
}

#[test]
fn two_site_gap_is_four_j() {
    let spec = ProbeSpec::many_body(2, Potential::monomial(0.0, 1.0)).unwrap();
    let g = energy_gap(&spec, &SolverOptions::default()).unwrap();
    assert!((g.gap - 4.0).abs() < 1e-12);
    assert!((g.e1 + 3.0).abs() < 1e-12);
}

/// Ground state, its parameter derivatives from first-order perturbation theory,
/// and the QFI and CFI matrices built from them.
struct Analytic {
    q: [[f64; 2]; 2],
    c: [[f64; 2]; 2],
}

fn analytic_fisher(h: DMatrix<f64>, dh: [Vec<f64>; 2]) -> Analytic {
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let g = order[0];
    let e0 = eig.eigenvalues[g];
    let psi = eig.eigenvectors.column(g).into_owned();
    let dim = psi.len();
    let derivs: Vec<Vec<f64>> = dh
        .iter()
        .map(|d| {
            let mut out = vec![0.0; dim];
            for &n in &order[1..] {
                let phi = eig.eigenvectors.column(n);
                let m: f64 = (0..dim).map(|k| phi[k] * d[k] * psi[k]).sum();
                let w = m / (e0 - eig.eigenvalues[n]);
                for k in 0..dim {
                    out[k] += w * phi[k];
                }
            }
            out
        })
        .collect();
    let mut q = [[0.0; 2]; 2];
    let mut c = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            q[a][b] = 4.0 * (0..dim).map(|k| derivs[a][k] * derivs[b][k]).sum::<f64>();
            c[a][b] = (0..dim)
                .filter(|&k| psi[k] * psi[k] >= 1e-14)
                .map(|k| {
                    let (da, db) = (2.0 * psi[k] * derivs[a][k], 2.0 * psi[k] * derivs[b][k]);
                    da * db / (psi[k] * psi[k])
                })
                .sum();
        }
    }
    Analytic { q, c }
}

fn assert_close(ours: &FisherMatrix, oracle: &[[f64; 2]; 2], rel: f64, what: &str) {
    let scale = (oracle[0][0] * oracle[1][1]).sqrt();
    for a in 0..2 {
        for b in 0..2 {
            let d = (ours.get(a, b) - oracle[a][b]).abs();
            assert!(d <= rel * scale, "{what} [{a}{b}]: {} vs {}", ours.get(a, b), oracle[a][b]);
        }
    }
}

#[test]
fn single_particle_fisher_matrices_match_perturbation_theory() {
    let ev = Evaluator::default();
    for (l, h1, h2) in [(31usize, 1e-3, 1e-5), (61, 2e-4, 3e-6), (41, 0.3, 1e-3)] {
        let spec = ProbeSpec::single_particle(l, Potential::parabolic(h1, h2)).unwrap();
        let h = ev.hamiltonian(&spec).unwrap().to_dense();
        let d1: Vec<f64> = (0..l).map(|i| i as f64).collect();
        let d2: Vec<f64> = (0..l).map(|i| -((i * i) as f64)).collect();
        let oracle = analytic_fisher(h, [d1, d2]);
        let p = ev.point(&spec).unwrap();
        assert_close(&p.qfi(), &oracle.q, 1e-3, "QFI");
        assert_close(&p.cfi(Povm::PositionBasis).unwrap(), &oracle.c, 1e-3, "CFI");
    }
}

#[test]
fn many_body_fisher_matrices_match_perturbation_theory() {
    let ev = Evaluator::default();
    for (l, h1, h2) in [(6usize, 1e-2, 1e-3), (8, 1e-4, 1e-4)] {
        let spec = ProbeSpec::many_body(l, Potential::parabolic(h1, h2)).unwrap();
        let h = ev.hamiltonian(&spec).unwrap().to_dense();
        let basis = enumerate_half_filling(l).unwrap();
        // dH/dh1 = sum_i (i-1) s_i, dH/dh2 = -sum_i (i-1)^2 s_i, read off each configuration
        let weight = |m: u32, f: &dyn Fn(f64) -> f64| -> f64 {
            (0..l).map(|i| f(i as f64) * if (m >> i) & 1 == 1 { 1.0 } else { -1.0 }).sum()
        };
        let d1: Vec<f64> = basis.states().iter().map(|&m| weight(m, &|x| x)).collect();
        let d2: Vec<f64> = basis.states().iter().map(|&m| weight(m, &|x| -x * x)).collect();
        let oracle = analytic_fisher(h, [d1, d2]);
        let p = ev.point(&spec).unwrap();
        assert_close(&p.qfi(), &oracle.q, 1e-3, "QFI");
        assert_close(&p.cfi(Povm::SpinConfigurationBasis).unwrap(), &oracle.c, 1e-3, "CFI");
    }
}

#[test]
fn total_uncertainty_matches_explicit_inverse() {
    for entries in [[[4.0, 1.0], [1.0, 3.0]], [[1e8, 3e7], [3e7, 1e7]], [[2.5, -0.7], [-0.7, 0.9]]] {
        let f = FisherMatrix {
            order: 2,
            entries,
            kind: FisherKind::Quantum,
            method: FisherMethod::FiniteDifference,
            weak_commutativity_residual: None,
            degenerate: false,
        };
        let inv = DMatrix::from_row_slice(2, 2, &[entries[0][0], entries[0][1], entries[1][0], entries[1][1]])
            .try_inverse()
            .unwrap();
        let t = total_uncertainty(&f, None).unwrap();
        assert!((t - inv.trace()).abs() <= 1e-12 * inv.trace().abs(), "{t} vs {}", inv.trace());
    }
}

#[test]
fn family_keys_are_stable() {
    assert_eq!(Family::SingleParticle.key(), "single-particle");
    assert_eq!(Family::ManyBodyHalfFilling.key(), "many-body");
}
