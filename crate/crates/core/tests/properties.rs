use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

use oscchain::force::SpectralMeasure;
use oscchain::lattice::{Boundary, InteractionKernel, DEFAULT_SCAN_POINTS};
use oscchain::operator::{dense_exponential, generator, kernel_bound, ChainOperator, ChainState};
use oscchain::stationary::{
    cross_covariance_quadrature, h_k_quadrature, h_k_residue, inner_root_radius, stationary_covariance,
    DEFAULT_N_LAMBDA,
};
use oscchain::stats::{ensemble_mean, variance_estimate};

/// Positive kernels: `a(0)` exceeds `2 sum |a(k)|` by at least `pin`.
fn kernels() -> impl Strategy<Value = InteractionKernel> {
    (prop::collection::vec(-1.0..1.0_f64, 1..=3), 0.5..3.0_f64).prop_map(|(tail, pin)| {
        let a0 = 2.0 * tail.iter().map(|a| a.abs()).sum::<f64>() + pin;
        let mut half = vec![a0];
        half.extend(tail);
        InteractionKernel::new(half).unwrap()
    })
}

fn s1() -> InteractionKernel {
    InteractionKernel::nearest_neighbour(3.0, -1.0).unwrap()
}

fn random_state(values: &[f64]) -> ChainState {
    let n = values.len() / 2;
    ChainState::new(values[..n].to_vec(), values[n..2 * n].to_vec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn symbol_is_even_and_periodic(kernel in kernels(), lambda in -10.0..10.0_f64) {
        let w = kernel.omega_squared(lambda);
        prop_assert!((w - kernel.omega_squared(-lambda)).abs() <= 1e-12 * w.abs().max(1.0));
        prop_assert!((w - kernel.omega_squared(lambda + TAU)).abs() <= 1e-12 * w.abs().max(1.0));
    }

    #[test]
    fn spectral_set_brackets_the_symbol(kernel in kernels()) {
        let set = kernel.spectral_set(DEFAULT_SCAN_POINTS).unwrap();
        prop_assert!(0.0 < set.e1 && set.e1 <= set.e2);
        for i in 0..997 {
            let w = kernel.omega_squared(TAU * i as f64 / 997.0);
            prop_assert!(set.e1 - 1e-12 <= w && w <= set.e2 + 1e-12);
        }
        prop_assert!((kernel.omega_squared(set.argmin) - set.e1).abs() <= 1e-9);
        prop_assert!((kernel.omega_squared(set.argmax) - set.e2).abs() <= 1e-9);
    }

    #[test]
    fn polynomial_matches_symbol_on_the_circle(kernel in kernels(), x in 0.0..4.0_f64, lambda in 0.0..TAU) {
        let poly = kernel.symbol_polynomial(x).unwrap();
        let degree = poly.degree();
        for j in 0..=degree {
            prop_assert_eq!(poly.coeffs[j], poly.coeffs[degree - j]);
        }
        let z = Complex64::from_polar(1.0, lambda);
        let expected = z.powi(kernel.radius() as i32) * (kernel.omega_squared(lambda) - x * x);
        prop_assert!((poly.eval(z) - expected).norm() <= 1e-12 * (1.0 + expected.norm()));
    }

    #[test]
    fn covariance_function_is_even_and_bounded(mass in 0.1..2.0_f64, x in 0.0..6.0_f64, s in -20.0..20.0_f64) {
        let measure = SpectralMeasure::symmetric_atoms(&[(x, mass), (x + 1.5, 0.5 * mass)]).unwrap();
        let b0 = measure.covariance_b(0.0);
        prop_assert!((measure.covariance_b(s) - measure.covariance_b(-s)).abs() <= 1e-14);
        prop_assert!(measure.covariance_b(s).abs() <= b0 + 1e-14);
    }

    #[test]
    fn gap_check_is_monotone_in_the_band(x in 0.0..5.0_f64, pin in 0.2..3.0_f64, extra in 0.0..2.0_f64) {
        let narrow = InteractionKernel::nearest_neighbour(2.0 + pin, -1.0).unwrap();
        let wide = InteractionKernel::nearest_neighbour(2.0 + pin + extra, -1.0 - 0.5 * extra).unwrap();
        let narrow_set = narrow.spectral_set(DEFAULT_SCAN_POINTS).unwrap();
        let mut wide_set = wide.spectral_set(DEFAULT_SCAN_POINTS).unwrap();
        // the union band contains the narrow one
        wide_set.e1 = wide_set.e1.min(narrow_set.e1);
        wide_set.e2 = wide_set.e2.max(narrow_set.e2);
        let measure = SpectralMeasure::symmetric_atoms(&[(x, 0.5)]).unwrap();
        let (narrow_report, wide_report) = (measure.check_gap(&narrow_set), measure.check_gap(&wide_set));
        prop_assert!(wide_report.margin <= narrow_report.margin + 1e-15);
        prop_assert!(!(wide_report.pass && !narrow_report.pass));
        prop_assert_eq!(narrow_report.pass, narrow_report.margin > 0.0);
    }

    #[test]
    fn homogeneous_evolution_conserves_energy(
        kernel in kernels(),
        values in prop::collection::vec(-1.0..1.0_f64, 24),
        t in 0.0..50.0_f64,
        free in any::<bool>(),
    ) {
        let boundary = if free { Boundary::Free } else { Boundary::Periodic };
        let op = ChainOperator::new(kernel.truncated_v(12, boundary).unwrap());
        // periodic truncations of a positive symbol are positive definite;
        // free truncations are compressions of those
        let op = op.unwrap();
        let s0 = random_state(&values);
        let h0 = s0.energy(&kernel, boundary);
        let h = op.evolve_homogeneous(&s0, t).energy(&kernel, boundary);
        prop_assert!((h - h0).abs() <= 1e-10 * h0.max(1.0));
    }

    #[test]
    fn evolution_is_a_group(
        values in prop::collection::vec(-1.0..1.0_f64, 20),
        t1 in -5.0..5.0_f64,
        t2 in -5.0..5.0_f64,
    ) {
        let kernel = s1();
        let op = ChainOperator::new(kernel.truncated_v(10, Boundary::Free).unwrap()).unwrap();
        let s0 = random_state(&values);
        let two_step = op.evolve_homogeneous(&op.evolve_homogeneous(&s0, t2), t1);
        let one_step = op.evolve_homogeneous(&s0, t1 + t2);
        for (a, b) in two_step.q.iter().chain(&two_step.p).zip(one_step.q.iter().chain(&one_step.p)) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn kernel_bound_holds_on_free_chains(kernel in kernels(), offset in 0usize..10, t in 0.0..4.0_f64) {
        let v_norm = kernel.spectral_set(DEFAULT_SCAN_POINTS).unwrap().e2;
        let radius = kernel.radius();
        let n = 2 * (offset + (v_norm.sqrt() * t * radius as f64).ceil() as usize) + 8;
        let op = ChainOperator::new(kernel.truncated_v(n, Boundary::Free).unwrap()).unwrap();
        let blocks = op.propagator_blocks(t);
        let (bc, bs) = kernel_bound(v_norm, radius, offset, t);
        let center = n / 2 - offset / 2;
        let (c, s) = (blocks.cos[(center, center + offset)].abs(), blocks.sin_over_root[(center, center + offset)].abs());
        prop_assert!(c <= bc * (1.0 + 1e-12) + 1e-14, "C {} > {}", c, bc);
        prop_assert!(s <= bs * (1.0 + 1e-12) + 1e-14, "S {} > {}", s, bs);
    }

    #[test]
    fn residues_and_quadrature_agree(kernel in kernels(), gap in 0.3..2.0_f64, above in any::<bool>()) {
        let set = kernel.spectral_set(DEFAULT_SCAN_POINTS).unwrap();
        let (lo, hi) = set.frequency_band();
        let x = if above || lo <= gap { hi + gap } else { lo - gap };
        let r = inner_root_radius(&kernel, x).unwrap();
        for m in -20..=20_i64 {
            let residue = h_k_residue(&kernel, x, m).unwrap();
            let quad = h_k_quadrature(&kernel, x, m, DEFAULT_N_LAMBDA).unwrap();
            prop_assert!((residue - quad).abs() < 1e-8, "m = {}: {} vs {}", m, residue, quad);
        }
        // h_m = sum_s c_s z_s^m, so |h_m|^(1/m) tends to R from below up to
        // the prefactor; at m = 40 the prefactor's root is within a few percent
        let h40 = h_k_residue(&kernel, x, 40).unwrap().abs();
        prop_assert!(h40.powf(1.0 / 40.0) <= (r + 1e-6) * 1.2, "{} vs R = {}", h40.powf(1.0 / 40.0), r);
    }

    #[test]
    fn single_root_envelope(pin in 0.2..3.0_f64, c in 0.2..1.5_f64, gap in 0.1..2.0_f64, above in any::<bool>()) {
        let kernel = InteractionKernel::nearest_neighbour(2.0 * c + pin, -c).unwrap();
        let (lo, hi) = kernel.spectral_set(DEFAULT_SCAN_POINTS).unwrap().frequency_band();
        let x = if above || lo <= gap { hi + gap } else { lo - gap };
        let r = inner_root_radius(&kernel, x).unwrap();
        let h0 = h_k_residue(&kernel, x, 0).unwrap();
        for m in -20..=20_i64 {
            let h = h_k_residue(&kernel, x, m).unwrap();
            prop_assert!(h.abs() <= h0.abs() * (r + 1e-6).powi(m.abs() as i32) + 1e-300);
        }
    }

    #[test]
    fn stationary_covariances_are_psd(x in 3.0..6.0_f64, mass in 0.1..1.0_f64) {
        let cov = stationary_covariance(&s1(), &SpectralMeasure::symmetric_atoms(&[(x, mass), (0.5, 0.2)]).unwrap(), 0, (-6, 6)).unwrap();
        for m in [&cov.cqq, &cov.cpp] {
            prop_assert!((m - m.transpose()).abs().max() == 0.0);
            let min = SymmetricEigen::new(m.clone()).eigenvalues.min();
            prop_assert!(min > -1e-10);
        }
        prop_assert!(cov.cqp().abs().max() == 0.0);
    }

    #[test]
    fn estimators_ignore_replica_order(values in prop::collection::vec(-5.0..5.0_f64, 3..60), seed in any::<u64>()) {
        let mut shuffled = values.clone();
        // deterministic Fisher-Yates from the seed
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            shuffled.swap(i, (state % (i as u64 + 1)) as usize);
        }
        let (a, b) = (ensemble_mean(&values).unwrap(), ensemble_mean(&shuffled).unwrap());
        prop_assert!((a.mean - b.mean).abs() <= 1e-12 && (a.stderr - b.stderr).abs() <= 1e-12);
        let (a, b) = (variance_estimate(&values).unwrap(), variance_estimate(&shuffled).unwrap());
        prop_assert!((a.mean - b.mean).abs() <= 1e-12 && (a.stderr - b.stderr).abs() <= 1e-12);
    }
}

#[test]
fn circulant_eigenvalues_are_symbol_samples() {
    let kernel = InteractionKernel::new(vec![4.0, -1.0, 0.3, 0.2]).unwrap();
    for n in [8, 16, 64] {
        let v = kernel.truncated_v(n, Boundary::Periodic).unwrap();
        let mut eig: Vec<f64> = SymmetricEigen::new(v).eigenvalues.iter().copied().collect();
        let mut symbol: Vec<f64> = (0..n).map(|m| kernel.omega_squared(TAU * m as f64 / n as f64)).collect();
        eig.sort_by(f64::total_cmp);
        symbol.sort_by(f64::total_cmp);
        for (a, b) in eig.iter().zip(&symbol) {
            assert!((a - b).abs() < 1e-10, "N = {n}: {a} vs {b}");
        }
    }
}

#[test]
fn spectral_propagator_matches_dense_exponential() {
    let kernel = s1();
    for n in [4, 8, 16] {
        let v = kernel.truncated_v(n, Boundary::Free).unwrap();
        let op = ChainOperator::new(v.clone()).unwrap();
        for t in [0.1, 0.7, 3.0] {
            let dense = dense_exponential(&(generator(&v) * t));
            let spectral = op.propagator_blocks(t).to_exponential(&v);
            assert!((dense - spectral).abs().max() < 1e-9);
        }
    }
}

#[test]
fn blocks_at_time_zero_and_symmetry() {
    let op = ChainOperator::new(s1().truncated_v(9, Boundary::Free).unwrap()).unwrap();
    let zero = op.propagator_blocks(0.0);
    assert!((&zero.cos - DMatrix::<f64>::identity(9, 9)).abs().max() < 1e-14);
    assert!(zero.sin_over_root.abs().max() < 1e-14);
    let b = op.propagator_blocks(1.3);
    assert!((&b.cos - b.cos.transpose()).abs().max() < 1e-13);
    assert!((&b.sin_over_root - b.sin_over_root.transpose()).abs().max() < 1e-13);
}

#[test]
fn sine_block_decays_faster_than_geometric() {
    let kernel = s1();
    let op = ChainOperator::new(kernel.truncated_v(96, Boundary::Free).unwrap()).unwrap();
    let b = op.propagator_blocks(1.0);
    // successive ratios of |S_{c, c+d}| shrink with d; beyond d = 8 the
    // entries sit at the roundoff floor of the eigendecomposition
    let s: Vec<f64> = (0..=8).map(|d| b.sin_over_root[(48, 48 + d)].abs()).collect();
    let ratios: Vec<f64> = s.windows(2).map(|w| w[1] / w[0]).collect();
    for pair in ratios.windows(2) {
        assert!(pair[1] < pair[0]);
    }
    for (d, v) in s.iter().enumerate() {
        assert!(*v <= kernel_bound(5.0, 1, d, 1.0).1);
    }
}

#[test]
fn symmetric_measure_has_no_cross_covariance() {
    let measure = SpectralMeasure::symmetric_atoms(&[(3.0, 0.5), (0.4, 0.25)]).unwrap();
    let cross = cross_covariance_quadrature(&s1(), &measure, 0, (-5, 5), DEFAULT_N_LAMBDA).unwrap();
    assert!(cross.iter().all(|z| z.norm() < 1e-12));
}

#[test]
fn h_is_even_in_the_offset() {
    let kernel = InteractionKernel::new(vec![5.0, 0.0, 1.0]).unwrap();
    for m in 0..15 {
        let a = h_k_residue(&kernel, PI / 3.0, m).unwrap();
        let b = h_k_residue(&kernel, PI / 3.0, -m).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn residues_inside_the_band_fail_fast() {
    let kernel = InteractionKernel::new(vec![5.0, 0.0, 1.0]).unwrap();
    assert!(matches!(
        h_k_residue(&kernel, 2.0 * PI / 3.0, 1),
        Err(oscchain::Error::InsideSpectrum { .. })
    ));
}
