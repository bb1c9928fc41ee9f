use oscchain::experiment::par_replicas;
use oscchain::force::{SpectralMeasure, SynthesisMode};
use oscchain::lattice::{Boundary, InteractionKernel};
use oscchain::operator::{ChainOperator, ChainState, DuhamelQuadrature};
use oscchain::simulator::{decompose_epsilon, simulate, stationary_trajectory, InitialCondition, Integrator, SimConfig};
use oscchain::stationary::{energy_limit_alpha, resolving_points, transient_mean_energy, DEFAULT_N_LAMBDA};
use oscchain::stats::ensemble_mean;

fn s1() -> InteractionKernel {
    InteractionKernel::nearest_neighbour(3.0, -1.0).unwrap()
}

fn atoms3() -> SpectralMeasure {
    SpectralMeasure::symmetric_atoms(&[(3.0, 0.5)]).unwrap()
}

fn max_diff(a: &ChainState, b: &ChainState) -> f64 {
    a.q.iter()
        .chain(&a.p)
        .zip(b.q.iter().chain(&b.p))
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn verlet_tracks_the_mode_exact_solution() {
    let kernel = s1();
    let force = atoms3().synthesize(5, SynthesisMode::GaussianAmplitudes, 32).unwrap();
    let mut config = SimConfig::periodic(64, 0, vec![2.5, 5.0, 10.0]);
    config.initial = InitialCondition::Random { seed: 9, scale: 0.3 };
    let exact = simulate(&config, &kernel, &force).unwrap();
    config.integrator = Integrator::Verlet { dt: 1e-3 };
    let verlet = simulate(&config, &kernel, &force).unwrap();
    for (a, b) in exact.states.iter().zip(&verlet.states) {
        assert!(max_diff(a, b) < 1e-5, "{}", max_diff(a, b));
    }
}

#[test]
fn duhamel_formula_matches_the_simulator() {
    let kernel = s1();
    let force = atoms3().synthesize(2, SynthesisMode::GaussianAmplitudes, 32).unwrap();
    let n = 16;
    let op = ChainOperator::new(kernel.truncated_v(n, Boundary::Periodic).unwrap()).unwrap();
    let mut config = SimConfig::periodic(n, 3, vec![0.4, 3.7]);
    config.initial = InitialCondition::Random { seed: 4, scale: 1.0 };
    let psi0 = config.initial.materialize(n).unwrap();
    let traj = simulate(&config, &kernel, &force).unwrap();
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let closed = op.duhamel_forced(&psi0, &force, 3, *t, DuhamelQuadrature::ClosedForm).unwrap();
        assert!(max_diff(&closed, state) < 1e-10);
        let simpson = op
            .duhamel_forced(&psi0, &force, 3, *t, DuhamelQuadrature::Simpson { dt: t / 2048.0 })
            .unwrap();
        assert!(max_diff(&simpson, state) < 1e-8);
    }
}

#[test]
fn near_field_is_insensitive_to_ring_size() {
    let kernel = s1();
    let force = atoms3().synthesize(8, SynthesisMode::RandomPhases, 32).unwrap();
    let times = vec![5.0, 10.0, 20.0];
    let small = simulate(&SimConfig::periodic(64, 0, times.clone()), &kernel, &force).unwrap();
    let large = simulate(&SimConfig::periodic(128, 0, times), &kernel, &force).unwrap();
    for (a, b) in small.states.iter().zip(&large.states) {
        for d in -8_i64..=8 {
            let (i, j) = (d.rem_euclid(64) as usize, d.rem_euclid(128) as usize);
            assert!((a.q[i] - b.q[j]).abs() < 1e-8, "site {d}: {} vs {}", a.q[i], b.q[j]);
        }
    }
}

/// Fourth-order central differences of the sampled solution against the
/// equations of motion `q' = p`, `q'' = p' = -V q + f(t) e_n`.
#[test]
fn sampled_solutions_satisfy_the_equations_of_motion() {
    let kernel = s1();
    let n = 32;
    let site = 5;
    let force = atoms3().synthesize(3, SynthesisMode::GaussianAmplitudes, 32).unwrap();
    let v = kernel.truncated_v(n, Boundary::Periodic).unwrap();
    let h = 5e-3;
    for t0 in [1.0, 7.3, 40.0] {
        let times: Vec<f64> = (-2..=2).map(|k| t0 + k as f64 * h).collect();
        let mut config = SimConfig::periodic(n, site, times.clone());
        config.initial = InitialCondition::Random { seed: 1, scale: 0.5 };
        let forced = simulate(&config, &kernel, &force).unwrap();
        let eta = stationary_trajectory(&kernel, &force, &SimConfig::periodic(n, site, times)).unwrap();
        for traj in [&forced, &eta] {
            let s = &traj.states;
            let mid = &s[2];
            let vq = &v * nalgebra::DVector::from_column_slice(&mid.q);
            for k in 0..n {
                let q = |i: usize| s[i].q[k];
                let p = |i: usize| s[i].p[k];
                let dq = (-q(4) + 8.0 * q(3) - 8.0 * q(1) + q(0)) / (12.0 * h);
                let dp = (-p(4) + 8.0 * p(3) - 8.0 * p(1) + p(0)) / (12.0 * h);
                let ddq = (-q(4) + 16.0 * q(3) - 30.0 * q(2) + 16.0 * q(1) - q(0)) / (12.0 * h * h);
                let drive = if k == site { force.evaluate(t0) } else { 0.0 };
                assert!((dq - mid.p[k]).abs() < 1e-8, "q' at t = {t0}, k = {k}");
                assert!((dp + vq[k] - drive).abs() < 1e-8, "p' at t = {t0}, k = {k}");
                assert!((ddq + vq[k] - drive).abs() < 1e-8, "q'' at t = {t0}, k = {k}");
            }
        }
    }
}

/// `eps` solves the free equation, so it only depends on `eps(0)`.
#[test]
fn transient_depends_only_on_its_initial_value() {
    let kernel = s1();
    let n = 64;
    let times = vec![0.0, 3.0, 17.0, 60.0];
    let measure = atoms3();
    let fa = measure.synthesize(21, SynthesisMode::GaussianAmplitudes, 32).unwrap();
    let fb = measure.synthesize(22, SynthesisMode::GaussianAmplitudes, 32).unwrap();
    let base = SimConfig::periodic(n, 0, times);
    let eta_a = stationary_trajectory(&kernel, &fa, &base).unwrap();
    let eta_b = stationary_trajectory(&kernel, &fb, &base).unwrap();
    let psi_a = simulate(&base, &kernel, &fa).unwrap();

    // start b at eta_b(0) - eta_a(0) so that eps_b(0) = -eta_a(0) = eps_a(0)
    let (a0, b0) = (&eta_a.states[0], &eta_b.states[0]);
    let start = ChainState::new(
        b0.q.iter().zip(&a0.q).map(|(b, a)| b - a).collect(),
        b0.p.iter().zip(&a0.p).map(|(b, a)| b - a).collect(),
    )
    .unwrap();
    let mut config_b = base.clone();
    config_b.initial = InitialCondition::Explicit { state: start };
    let psi_b = simulate(&config_b, &kernel, &fb).unwrap();

    let eps_a = decompose_epsilon(&psi_a, &eta_a).unwrap();
    let eps_b = decompose_epsilon(&psi_b, &eta_b).unwrap();
    for (a, b) in eps_a.states.iter().zip(&eps_b.states) {
        assert!(max_diff(a, b) < 1e-12, "{}", max_diff(a, b));
    }
}

/// The zero-start mean energy settles at twice the stationary energy, with
/// an `O(t^{-1/2})` approach.
#[test]
fn transient_energy_curve_settles_at_twice_alpha() {
    let kernel = s1();
    let measure = atoms3();
    let alpha = energy_limit_alpha(&kernel, &measure, DEFAULT_N_LAMBDA).unwrap().alpha;
    let times: Vec<f64> = (1..=100).map(|i| 10.0 * i as f64).collect();
    let scaled: Vec<f64> = times
        .iter()
        .map(|&t| {
            let e = transient_mean_energy(&kernel, &measure, t, resolving_points(&kernel, t)).unwrap();
            assert!(e >= 0.0);
            t.sqrt() * (e - 2.0 * alpha).abs()
        })
        .collect();
    let early = scaled[..10].iter().copied().fold(0.0, f64::max);
    let all = scaled.iter().copied().fold(0.0, f64::max);
    assert!(all <= 2.0 * early, "sqrt(t) deviation grows: {early} -> {all}");
    // measured against alpha the scaled deviation grows like sqrt(t)
    let e_end = transient_mean_energy(&kernel, &measure, 1000.0, resolving_points(&kernel, 1000.0)).unwrap();
    assert!(1000f64.sqrt() * (e_end - alpha).abs() > 5.0);
}

/// Mean energy with a nonzero start exceeds the zero-start mean by `H(psi(0))`.
#[test]
fn initial_energy_adds_to_the_ensemble_mean() {
    let kernel = s1();
    let measure = atoms3();
    let n = 512;
    let mut state = ChainState::zeros(n);
    state.p[0] = 1.0;
    state.q[3] = -0.4;
    let h0 = state.energy(&kernel, Boundary::Periodic);
    let zero = SimConfig::periodic(n, 0, vec![150.0]);
    let mut offset = zero.clone();
    offset.initial = InitialCondition::Explicit { state };
    let diffs = par_replicas(2000, None, |r| {
        let f = measure.synthesize_replica(17, r, SynthesisMode::GaussianAmplitudes, 32)?;
        let a = simulate(&zero, &kernel, &f)?.states[0].energy(&kernel, Boundary::Periodic);
        let b = simulate(&offset, &kernel, &f)?.states[0].energy(&kernel, Boundary::Periodic);
        Ok(b - a)
    })
    .unwrap();
    let est = ensemble_mean(&diffs).unwrap();
    assert!(est.within(h0, 3.0), "{est:?} vs {h0}");
}
