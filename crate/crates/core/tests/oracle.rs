//! Cross-checks against nalgebra's dense eigensolvers and closed forms.

use nalgebra::{Complex, DMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resonator_dos::capacitance::{
    capacitance_matrix, material_matrix, quasiperiodic_capacitance, symmetrized_capacitance, SymTridiagonal,
};
use resonator_dos::eigen::{eig_hermitian_dense, eig_sym_tridiag, eig_sym_tridiag_bisection, EigOptions};
use resonator_dos::geometry::{assemble, make_standard_blocks, Block, BlockSequence, ResonatorArray};
use resonator_dos::propagation::block_propagation;

fn random_tridiagonal(rng: &mut ChaCha8Rng) -> SymTridiagonal {
    let n = rng.random_range(1..=50);
    let diag = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
    let off = (0..n - 1).map(|_| rng.random_range(-3.0..3.0)).collect();
    SymTridiagonal::new(diag, off).unwrap()
}

fn dense(m: &SymTridiagonal) -> DMatrix<f64> {
    let n = m.dim();
    let mut a = DMatrix::zeros(n, n);
    for (i, j, v) in m.triplets() {
        a[(i, j)] = v;
    }
    a
}

fn sorted_eigs(a: DMatrix<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}

fn random_array(rng: &mut ChaCha8Rng, n: usize) -> ResonatorArray {
    let lengths = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
    let spacings = (0..n).map(|_| rng.random_range(0.2..3.0)).collect();
    let speeds = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
    ResonatorArray::new(lengths, spacings, speeds).unwrap()
}

#[test]
fn ql_and_bisection_match_dense_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let opts = EigOptions::default();
    for _ in 0..100 {
        let m = random_tridiagonal(&mut rng);
        let oracle = sorted_eigs(dense(&m));
        let ql = eig_sym_tridiag(&m, &opts).unwrap();
        let bis = eig_sym_tridiag_bisection(&m, &opts).unwrap();
        for ((a, b), c) in oracle.iter().zip(ql.values()).zip(bis.values()) {
            assert!((a - b).abs() < 1e-9, "QL {b} vs {a}");
            assert!((a - c).abs() < 1e-9, "bisection {c} vs {a}");
        }
    }
}

#[test]
fn symmetrised_matrix_has_the_spectrum_of_vc() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..30 {
        let n = rng.random_range(2..20);
        let array = random_array(&mut rng, n);
        let c = dense(&capacitance_matrix(&array));
        let v = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(material_matrix(&array)));
        let mut vc: Vec<f64> = (v * c).complex_eigenvalues().iter().map(|z| z.re).collect();
        vc.sort_by(f64::total_cmp);
        let sym = eig_sym_tridiag(&symmetrized_capacitance(&array), &EigOptions::default()).unwrap();
        let scale = sym.values().last().unwrap().max(1.0);
        for (a, b) in vc.iter().zip(sym.values()) {
            assert!((a - b).abs() < 1e-9 * scale, "{a} vs {b}");
        }
    }
}

#[test]
fn hermitian_solver_matches_dense_complex_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..40 {
        let n = rng.random_range(1..25);
        let array = random_array(&mut rng, n);
        let half = std::f64::consts::PI / array.total_length();
        let alpha = rng.random_range(-half..half);
        let q = quasiperiodic_capacitance(&array, alpha);
        let flat = q.matrix.to_dense();
        let a = DMatrix::from_fn(n, n, |i, j| {
            let z = flat[i * n + j];
            Complex::new(z.re, z.im)
        });
        let mut oracle: Vec<f64> = a.symmetric_eigen().eigenvalues.iter().copied().collect();
        oracle.sort_by(f64::total_cmp);
        let ours = eig_hermitian_dense(&q.matrix, &EigOptions::default()).unwrap();
        for (x, y) in oracle.iter().zip(ours.values()) {
            assert!((x - y).abs() < 1e-9 * oracle.last().unwrap().abs().max(1.0), "{x} vs {y}");
        }
    }
}

/// For a periodised block the eigenvalues at quasimomentum alpha are the roots of
/// `tr P(lambda) = 2 cos(alpha L)`.
#[test]
fn bloch_condition_links_band_functions_and_traces() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..30 {
        let n = rng.random_range(1..5);
        let lengths: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let spacings: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let speeds: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
        let block = Block::new(lengths.clone(), spacings.clone(), speeds.clone()).unwrap();
        let array = ResonatorArray::new(lengths, spacings, speeds).unwrap();
        let big_l = array.total_length();
        for frac in [0.0, 0.3, 0.7, 1.0] {
            let alpha = frac * std::f64::consts::PI / big_l;
            let q = quasiperiodic_capacitance(&array, alpha);
            let spec = eig_hermitian_dense(&q.matrix, &EigOptions::default()).unwrap();
            let target = 2.0 * (alpha * big_l).cos();
            for &lambda in spec.values() {
                let t = block_propagation(&block, lambda).trace();
                let scale = 1.0 + t.abs();
                assert!((t - target).abs() < 1e-7 * scale, "tr = {t}, 2cos = {target}, lambda = {lambda}");
            }
        }
    }
}

#[test]
fn standard_dimer_band_edges_from_quasiperiodic_matrix() {
    let dimer = ResonatorArray::new(vec![1.0, 1.0], vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
    let opts = EigOptions::default();
    let at_zero = eig_hermitian_dense(&quasiperiodic_capacitance(&dimer, 0.0).matrix, &opts).unwrap();
    let edge = std::f64::consts::PI / dimer.total_length();
    let at_edge = eig_hermitian_dense(&quasiperiodic_capacitance(&dimer, edge).matrix, &opts).unwrap();
    for (got, want) in at_zero.values().iter().zip([0.0, 3.0]) {
        assert!((got - want).abs() < 1e-10, "{got}");
    }
    for (got, want) in at_edge.values().iter().zip([1.0, 2.0]) {
        assert!((got - want).abs() < 1e-10, "{got}");
    }
}

/// Weyl: eigenvalues move by at most the spectral norm of a perturbation.
#[test]
fn eigenvalues_are_lipschitz_in_the_matrix() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let opts = EigOptions::default();
    for _ in 0..50 {
        let m = random_tridiagonal(&mut rng);
        let eps: Vec<f64> = (0..m.dim()).map(|_| rng.random_range(-1e-3..1e-3)).collect();
        let bound = eps.iter().fold(0.0f64, |a, e| a.max(e.abs()));
        let diag = m.diag().iter().zip(&eps).map(|(d, e)| d + e).collect();
        let p = SymTridiagonal::new(diag, m.offdiag().to_vec()).unwrap();
        let a = eig_sym_tridiag(&m, &opts).unwrap();
        let b = eig_sym_tridiag(&p, &opts).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= bound + 1e-12);
        }
    }
}

/// A unit vector with small residual certifies an eigenvalue within the residual.
#[test]
fn residual_bound_certifies_localised_modes() {
    let blocks = make_standard_blocks();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let symbols: Vec<u8> = (0..200).map(|_| rng.random_range(1..=2)).collect();
    let array = assemble(&blocks, &BlockSequence::new(symbols).unwrap()).unwrap();
    let m = symmetrized_capacitance(&array);
    let a = dense(&m);
    let eig = a.clone().symmetric_eigen();
    let ours = eig_sym_tridiag(&m, &EigOptions::default()).unwrap();
    for k in 0..m.dim() {
        let v = eig.eigenvectors.column(k);
        let mu = eig.eigenvalues[k];
        let residual = (&a * v - v * mu).norm();
        let nearest = ours
            .values()
            .iter()
            .map(|x| (x - mu).abs())
            .fold(f64::INFINITY, f64::min);
        assert!(nearest <= residual + 1e-10, "{nearest} > {residual}");
    }
}
