//! Acceptance checks. Each criterion prints one `PASS` or `FAIL` line; the process
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resonator_dos::capacitance::{symmetrized_capacitance, SymTridiagonal};
use resonator_dos::eigen::{eig_sym_tridiag, EigOptions};
use resonator_dos::experiments::{run_accuracy_sweep, run_convergence, ExperimentConfig};
use resonator_dos::geometry::{
    assemble, make_standard_blocks, standard_blocks_with_dimer_spacing, ResonatorArray,
};
use resonator_dos::metaatom::{
    build_table, direct_window_spectrum, enumerate_meta_atoms, estimate_upper_spectrum, meta_atom_count,
    meta_atom_count_by_length, STANDARD_WINDOW,
};
use resonator_dos::propagation::{band_intervals, block_propagation, larger_eigenvalue_modulus};
use resonator_dos::sampling::{fibonacci_sequence, Bound, SamplerSpec};
use resonator_dos::spectral_stats::{autocovariance, k_grid, structure_factor_tapered, window_wasserstein, Bandwidth, Taper};
use resonator_dos::thouless::{analyse, median};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn iid_half() -> SamplerSpec {
    SamplerSpec::Iid { probs: vec![0.5, 0.5] }
}

fn quadratic_roots(a: f64, b: f64, c: f64) -> (f64, f64) {
    let disc = (b * b - 4.0 * a * c).sqrt();
    ((-b - disc) / (2.0 * a), (-b + disc) / (2.0 * a))
}

fn band_edges() -> Outcome {
    let blocks = make_standard_blocks();
    let start = Instant::now();
    let single = band_intervals(blocks.get(1).unwrap(), 5.0, 2000).unwrap();
    let dimer = band_intervals(blocks.get(2).unwrap(), 5.0, 2000).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    // 2 - 4x = -2 and 2x^2 - 6x + 2 = +-2.
    let single_expected = [(0.0, 1.0)];
    let (a0, a3) = quadratic_roots(2.0, -6.0, 0.0);
    let (a1, a2) = quadratic_roots(2.0, -6.0, 4.0);
    let dimer_expected = [(a0, a1), (a2, a3)];
    let close = |got: &[(f64, f64)], want: &[(f64, f64)]| {
        got.len() == want.len()
            && got
                .iter()
                .zip(want)
                .all(|(g, w)| (g.0 - w.0).abs() < 1e-8 && (g.1 - w.1).abs() < 1e-8)
    };
    let pass = close(single.intervals(), &single_expected) && close(dimer.intervals(), &dimer_expected) && seconds < 1.0;
    outcome(
        pass,
        format!("single {:?}, dimer {:?}, {seconds:.3} s", single.intervals(), dimer.intervals()),
    )
}

fn decay_rates() -> Outcome {
    let standard = make_standard_blocks();
    let deep = standard_blocks_with_dimer_spacing(0.25);
    let xi_a = larger_eigenvalue_modulus(&block_propagation(standard.get(1).unwrap(), 2.5)).unwrap();
    let xi_b = larger_eigenvalue_modulus(&block_propagation(deep.get(1).unwrap(), 8.5)).unwrap();
    let want_a = (8.0 + 60f64.sqrt()) / 2.0;
    let want_b = (32.0 + 1020f64.sqrt()) / 2.0;
    let pass = (xi_a - want_a).abs() < 1e-10
        && (xi_b - want_b).abs() < 1e-10
        && (xi_a / 8.0 - 1.0).abs() < 0.02
        && (xi_b / 32.0 - 1.0).abs() < 0.02;
    outcome(pass, format!("|xi2(2.5)| = {xi_a:.12}, |xi2(8.5)| = {xi_b:.12}"))
}

fn saxon_hutner() -> Outcome {
    let blocks = make_standard_blocks();
    let start = Instant::now();
    let mut forbidden = 0;
    let mut missing = 0;
    for seed in 0..20 {
        let chi = iid_half().sample(100, seed).unwrap();
        let array = assemble(&blocks, &chi).unwrap();
        let spec = eig_sym_tridiag(&symmetrized_capacitance(&array), &EigOptions::default()).unwrap();
        forbidden += spec
            .values()
            .iter()
            .filter(|&&x| (1.05..=1.95).contains(&x) || (3.05..=10.0).contains(&x))
            .count();
        if spec.in_open_interval(2.05, 2.95).is_empty() {
            missing += 1;
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    outcome(
        forbidden == 0 && missing == 0 && seconds < 10.0,
        format!("{forbidden} eigenvalues in shared gaps, {missing} realisations without hybridisation modes, {seconds:.2} s"),
    )
}

fn counting_identity() -> Outcome {
    let mut mismatches = Vec::new();
    for l in 1..=10usize {
        for p in 0..=l {
            let enumerated = enumerate_meta_atoms(l, p).unwrap().len() as u128;
            let a = meta_atom_count(l as u64, p as u64);
            let b = meta_atom_count_by_length(l as u64, p as u64);
            if enumerated != a || a != b {
                mismatches.push((l, p, enumerated, a, b));
            }
        }
    }
    outcome(mismatches.is_empty(), format!("{} mismatches over 1 <= L <= 10", mismatches.len()))
}

fn meta_atom_accuracy() -> Outcome {
    let blocks = make_standard_blocks();
    let w = STANDARD_WINDOW;
    let start = Instant::now();
    let chi = iid_half().sample(10_000, 0).unwrap();
    let direct = direct_window_spectrum(&chi, &blocks, w).unwrap();
    let error = |l: usize, p: usize| {
        let table = build_table(l, p, 4, &blocks, w).unwrap();
        let est = estimate_upper_spectrum(&chi, &table).unwrap();
        window_wasserstein(&direct, &est.values, w.lo, w.hi).unwrap()
    };
    let e8 = error(8, 4);
    let e3 = error(3, 1);
    let e9 = error(9, 4);
    let seconds = start.elapsed().as_secs_f64();
    outcome(
        e8 <= 0.05 && e9 < e3 && seconds < 120.0,
        format!("W(L=8,P=4) = {e8:.4}, W(L=3,P=1) = {e3:.4}, W(L=9,P=4) = {e9:.4}, {seconds:.1} s"),
    )
}

fn linear_scaling() -> Outcome {
    let blocks = make_standard_blocks();
    let table = build_table(8, 4, 4, &blocks, STANDARD_WINDOW).unwrap();
    let small = iid_half().sample(100_000, 1).unwrap();
    let large = iid_half().sample(200_000, 2).unwrap();
    let best = |chi| {
        (0..3)
            .map(|_| {
                let t = Instant::now();
                std::hint::black_box(estimate_upper_spectrum(chi, &table).unwrap());
                t.elapsed().as_secs_f64()
            })
            .fold(f64::INFINITY, f64::min)
    };
    let (t1, t2) = (best(&small), best(&large));
    outcome(
        t2 <= 3.0 * t1,
        format!("{:.2} ms at M=1e5, {:.2} ms at M=2e5, ratio {:.2}", t1 * 1e3, t2 * 1e3, t2 / t1),
    )
}

fn ergodic_convergence() -> Outcome {
    let mut config = ExperimentConfig::default();
    config.sizes = (4..=10).map(|p| 1usize << p).collect();
    config.repetitions = 20;
    config.reference_size = 1 << 13;
    let start = Instant::now();
    let (curve, _) = run_convergence(&config).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let pts = &curve.points;
    // Successive means are independent, so a rise is tolerated up to the standard
    // error of their difference.
    let monotone = pts
        .windows(2)
        .all(|w| w[1].mean - w[0].mean <= w[0].std_error.hypot(w[1].std_error));
    let at = |m: usize| pts.iter().find(|p| p.m == m).unwrap().mean;
    let (m4, m10) = (at(1 << 4), at(1 << 10));
    let means: Vec<String> = pts.iter().map(|p| format!("{:.4}", p.mean)).collect();
    outcome(
        monotone && m10 < m4 / 4.0 && seconds < 300.0,
        format!("means [{}], {seconds:.1} s", means.join(", ")),
    )
}

fn hyperuniformity() -> Outcome {
    let start = Instant::now();
    let k = k_grid(64);
    let khat = |spec: SamplerSpec| {
        let chi = spec.sample(100_000, 0).unwrap();
        structure_factor_tapered(&autocovariance(&chi, 50).unwrap(), &k, Taper::Hann)
    };
    let iid = khat(iid_half());
    let chunk = khat(SamplerSpec::Chunk { chunks: vec![vec![2, 1], vec![1, 2]] });
    let softmax = khat(SamplerSpec::Softmax { probs: vec![0.5, 0.5], beta: 1.0, growth: Default::default() });
    let bound = khat(SamplerSpec::BoundLength {
        probs: vec![0.5, 0.5],
        bounds: vec![Bound::Unbounded, Bound::Limit(2)],
    });
    let seconds = start.elapsed().as_secs_f64();
    let threshold = 0.1 * iid.last().unwrap();
    let iid_dev = iid.iter().map(|x| (x - 0.25).abs()).fold(0.0, f64::max);
    let pass = chunk[0] < threshold && softmax[0] < threshold && iid_dev < 0.03 && bound[0] >= threshold && seconds < 30.0;
    outcome(
        pass,
        format!(
            "threshold {threshold:.4}: chunk {:.2e}, softmax {:.2e}, bound-length {:.4}; iid max dev {iid_dev:.4}; {seconds:.1} s",
            chunk[0], softmax[0], bound[0]
        ),
    )
}

fn thouless_contrast() -> Outcome {
    let blocks = make_standard_blocks();
    let start = Instant::now();
    let chi = iid_half().sample(100, 0).unwrap();
    let array = assemble(&blocks, &chi).unwrap();
    let report = analyse(&array, &blocks, Bandwidth::Auto).unwrap();
    let hyb = median(&report.ratios_in(2.05, 2.95)).unwrap_or(f64::NAN);
    let pass_band = median(&report.ratios_in(0.05, 0.95)).unwrap_or(f64::NAN);
    let seconds = start.elapsed().as_secs_f64();
    outcome(
        hyb < 0.5 * pass_band && seconds < 30.0,
        format!("median g {hyb:.3e} in (2.05, 2.95) vs {pass_band:.3e} in (0.05, 0.95), {seconds:.2} s"),
    )
}

fn solver_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=50);
        let diag: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let off: Vec<f64> = (0..n - 1).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut dense = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            dense[(i, i)] = diag[i];
            if i + 1 < n {
                dense[(i, i + 1)] = off[i];
                dense[(i + 1, i)] = off[i];
            }
        }
        let mut oracle: Vec<f64> = dense.symmetric_eigen().eigenvalues.iter().copied().collect();
        oracle.sort_by(f64::total_cmp);
        let ours = eig_sym_tridiag(&SymTridiagonal::new(diag, off).unwrap(), &EigOptions::default()).unwrap();
        for (a, b) in oracle.iter().zip(ours.values()) {
            worst = worst.max((a - b).abs());
        }
    }
    let mut worst_invariant = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=50);
        let array = ResonatorArray::new(
            (0..n).map(|_| rng.random_range(0.2..3.0)).collect(),
            (0..n).map(|_| rng.random_range(0.2..3.0)).collect(),
            (0..n).map(|_| rng.random_range(0.5..2.0)).collect(),
        )
        .unwrap();
        let m = symmetrized_capacitance(&array);
        let spec = eig_sym_tridiag(&m, &EigOptions::default()).unwrap();
        let scale = m.norm_bound().max(1.0);
        // Smallest eigenvalue is zero and none is negative, relative to the matrix scale.
        let zero_mode = spec.values()[0].abs() / scale;
        let negative = spec.values().iter().fold(0.0f64, |acc, &x| acc.max(-x)) / scale;
        worst_invariant = worst_invariant.max(zero_mode).max(negative);
    }
    outcome(
        worst < 1e-9 && worst_invariant < 1e-10,
        format!("max eigenvalue difference {worst:.2e}, max zero-mode/PSD violation {worst_invariant:.2e}"),
    )
}

fn dependent_sampling_accuracy() -> Outcome {
    let mut config = ExperimentConfig::default();
    config.accuracy_sweep.lengths = vec![3];
    config.accuracy_sweep.size = 15_000;
    config.accuracy_sweep.samplers = vec![
        SamplerSpec::BoundLength {
            probs: vec![0.5, 0.5],
            bounds: vec![Bound::Unbounded, Bound::Limit(2)],
        },
        SamplerSpec::Chunk { chunks: vec![vec![2, 1], vec![1, 2]] },
        SamplerSpec::Softmax { probs: vec![0.5, 0.5], beta: 1.0, growth: Default::default() },
        SamplerSpec::Fibonacci { order: None },
    ];
    let start = Instant::now();
    let (points, _) = run_accuracy_sweep(&config).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let pass = points.iter().all(|p| p.wasserstein < 1e-2) && seconds < 180.0;
    let listed: Vec<String> = points
        .iter()
        .map(|p| format!("{} {:.4}", p.sampler, p.wasserstein))
        .collect();
    outcome(pass, format!("L=3: {}, {seconds:.1} s", listed.join(", ")))
}

fn fibonacci_structure() -> Outcome {
    let (mut a, mut b) = (1usize, 1usize);
    let mut bad = Vec::new();
    for order in 0..=20u32 {
        let seq = fibonacci_sequence(order);
        let length_ok = seq.len() == a;
        let no_11 = !seq.windows(2).any(|w| w == [1, 1]);
        let no_222 = !seq.windows(3).any(|w| w == [2, 2, 2]);
        if !(length_ok && no_11 && no_222) {
            bad.push(order);
        }
        (a, b) = (b, a + b);
    }
    outcome(bad.is_empty(), format!("orders failing: {bad:?}"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("band edges", band_edges),
        ("decay rates", decay_rates),
        ("no modes in shared gaps", saxon_hutner),
        ("meta-atom counting identity", counting_identity),
        ("meta-atom accuracy", meta_atom_accuracy),
        ("linear-time estimation", linear_scaling),
        ("ergodic convergence", ergodic_convergence),
        ("hyperuniformity", hyperuniformity),
        ("Thouless contrast", thouless_contrast),
        ("solver oracle equivalence", solver_oracle),
        ("dependent-sampling accuracy", dependent_sampling_accuracy),
        ("Fibonacci structure", fibonacci_structure),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let result = check();
        let status = if result.pass { "PASS" } else { "FAIL" };
        println!("{status} criterion {:>2} {name}: {}", i + 1, result.detail);
        if !result.pass {
            failed += 1;
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
