//! Time-domain simulation of a finite chain driven at one site.
//!
//! The periodic chain is integrated exactly in Fourier modes
//! `lambda_m = 2 pi m / N`: each mode is a scalar oscillator of frequency
//! `omega(lambda_m)` driven by `f(t) e^{i n lambda_m}`, and a trigonometric
//! force has a closed-form response. Velocity Verlet is kept as an
//! independent integrator and is the only option on a free chain.

use std::sync::Arc;

use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::{replica_rng, ForceRealization};
use crate::lattice::{Boundary, InteractionKernel};
use crate::operator::{driven_response, ChainState};
use crate::stationary::stationary_mode_solution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Integrator {
    ModeExact,
    Verlet { dt: f64 },
}

impl Integrator {
    /// Verlet with at least 100 steps per period of the fastest mode.
    pub fn default_verlet(e2: f64) -> Self {
        Integrator::Verlet { dt: std::f64::consts::TAU / (100.0 * e2.sqrt()) }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialCondition {
    #[default]
    Zero,
    Explicit { state: ChainState },
    /// Independent centered normal deviations and momenta with standard
    /// deviation `scale`.
    Random { seed: u64, scale: f64 },
}

impl InitialCondition {
    pub fn materialize(&self, n: usize) -> Result<ChainState> {
        match self {
            InitialCondition::Zero => Ok(ChainState::zeros(n)),
            InitialCondition::Explicit { state } => {
                if state.len() != n {
                    return Err(Error::Config(format!(
                        "initial state has {} sites, lattice has {n}",
                        state.len()
                    )));
                }
                Ok(state.clone())
            }
            InitialCondition::Random { seed, scale } => {
                let mut rng = replica_rng(*seed, 0);
                let mut draw = || -> f64 { scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng) };
                let q = (0..n).map(|_| draw()).collect();
                let p = (0..n).map(|_| draw()).collect();
                Ok(ChainState { q, p })
            }
        }
    }
}

/// Simulation setup for one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_sites: usize,
    #[serde(default)]
    pub boundary: Boundary,
    pub forcing_site: usize,
    pub horizon: f64,
    pub sample_times: Vec<f64>,
    pub integrator: Integrator,
    #[serde(default)]
    pub initial: InitialCondition,
}

impl SimConfig {
    /// Periodic, mode-exact, zero start.
    pub fn periodic(n_sites: usize, forcing_site: usize, sample_times: Vec<f64>) -> Self {
        let horizon = sample_times.last().copied().unwrap_or(0.0);
        Self {
            n_sites,
            boundary: Boundary::Periodic,
            forcing_site,
            horizon,
            sample_times,
            integrator: Integrator::ModeExact,
            initial: InitialCondition::Zero,
        }
    }

    pub fn validate(&self, kernel: &InteractionKernel) -> Result<()> {
        kernel.check_size(self.n_sites)?;
        if self.forcing_site >= self.n_sites {
            return Err(Error::Config(format!(
                "forcing site {} outside lattice of {} sites",
                self.forcing_site, self.n_sites
            )));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(Error::Config("horizon must be finite and nonnegative".into()));
        }
        if self.sample_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sample times must be strictly increasing".into()));
        }
        if self.sample_times.iter().any(|t| !(0.0..=self.horizon).contains(t)) {
            return Err(Error::Config("sample times must lie in [0, horizon]".into()));
        }
        if let Integrator::Verlet { dt } = self.integrator {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config("verlet step must be positive".into()));
            }
        }
        if let InitialCondition::Explicit { state } = &self.initial {
            if state.len() != self.n_sites {
                return Err(Error::Config("initial state size does not match lattice".into()));
            }
        }
        Ok(())
    }
}

/// Which solution a trajectory holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// Solution from the configured initial condition.
    Forced,
    /// Stationary component `eta(t)`.
    Stationary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ChainState>,
    pub realization: ForceRealization,
    pub config: SimConfig,
    pub kind: TrajectoryKind,
}

impl Trajectory {
    /// CSV rows `t,site,q,p`.
    pub fn to_csv_rows(&self) -> String {
        let mut out = String::new();
        for (t, state) in self.times.iter().zip(&self.states) {
            for (k, (q, p)) in state.q.iter().zip(&state.p).enumerate() {
                out.push_str(&format!("{t:.16e},{k},{q:.16e},{p:.16e}\n"));
            }
        }
        out
    }
}

/// Fourier transforms in the chain's convention
/// `Q_m = sum_k q_k e^{i k lambda_m}`, `q_k = (1/N) sum_m Q_m e^{-i k lambda_m}`.
struct ModeBasis {
    n: usize,
    to_modes: Arc<dyn Fft<f64>>,
    to_sites: Arc<dyn Fft<f64>>,
    angles: Vec<f64>,
    omega_sq: Vec<f64>,
}

impl ModeBasis {
    fn new(kernel: &InteractionKernel, n: usize) -> Result<Self> {
        let mut planner = FftPlanner::new();
        let angles: Vec<f64> = crate::stationary::mode_angles(n).collect();
        let omega_sq: Vec<f64> = angles.iter().map(|&l| kernel.omega_squared(l)).collect();
        if let Some(&bad) = omega_sq.iter().find(|w| **w <= 0.0) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: bad });
        }
        Ok(Self {
            n,
            to_modes: planner.plan_fft_inverse(n),
            to_sites: planner.plan_fft_forward(n),
            angles,
            omega_sq,
        })
    }

    fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.to_modes.process(&mut buf);
        buf
    }

    fn inverse(&self, mut modes: Vec<Complex64>) -> Vec<f64> {
        self.to_sites.process(&mut modes);
        let scale = 1.0 / self.n as f64;
        modes.into_iter().map(|z| z.re * scale).collect()
    }
}

/// Integrates the configured chain and records the state at every sample time.
pub fn simulate(config: &SimConfig, kernel: &InteractionKernel, realization: &ForceRealization) -> Result<Trajectory> {
    config.validate(kernel)?;
    let initial = config.initial.materialize(config.n_sites)?;
    let states = match config.integrator {
        Integrator::ModeExact => mode_exact(config, kernel, realization, &initial)?,
        Integrator::Verlet { dt } => verlet(config, kernel, realization, &initial, dt),
    };
    Ok(Trajectory {
        times: config.sample_times.clone(),
        states,
        realization: realization.clone(),
        config: config.clone(),
        kind: TrajectoryKind::Forced,
    })
}

fn mode_exact(
    config: &SimConfig,
    kernel: &InteractionKernel,
    realization: &ForceRealization,
    initial: &ChainState,
) -> Result<Vec<ChainState>> {
    if config.boundary != Boundary::Periodic {
        return Err(Error::BoundaryUnsupported);
    }
    let basis = ModeBasis::new(kernel, config.n_sites)?;
    let q0 = basis.forward(&initial.q);
    let p0 = basis.forward(&initial.p);
    let site = config.forcing_site as f64;
    let drive: Vec<Complex64> = basis.angles.iter().map(|&l| Complex64::from_polar(1.0, site * l)).collect();

    config
        .sample_times
        .iter()
        .map(|&t| {
            let mut q_modes = Vec::with_capacity(basis.n);
            let mut p_modes = Vec::with_capacity(basis.n);
            for m in 0..basis.n {
                let w = basis.omega_sq[m].sqrt();
                let (s, c) = (w * t).sin_cos();
                let (dq, dp) = driven_response(w, realization, t)?;
                q_modes.push(q0[m] * c + p0[m] * (s / w) + drive[m] * dq);
                p_modes.push(q0[m] * (-w * s) + p0[m] * c + drive[m] * dp);
            }
            Ok(ChainState { q: basis.inverse(q_modes), p: basis.inverse(p_modes) })
        })
        .collect()
}

fn verlet(
    config: &SimConfig,
    kernel: &InteractionKernel,
    realization: &ForceRealization,
    initial: &ChainState,
    dt: f64,
) -> Vec<ChainState> {
    let n = config.n_sites;
    let site = config.forcing_site;
    let mut q = initial.q.clone();
    let mut p = initial.p.clone();
    let mut acc = vec![0.0; n];
    let accel = |q: &[f64], t: f64, out: &mut [f64]| {
        kernel.apply(q, config.boundary, out);
        for a in out.iter_mut() {
            *a = -*a;
        }
        out[site] += realization.evaluate(t);
    };
    let mut t = 0.0;
    accel(&q, t, &mut acc);
    let mut out = Vec::with_capacity(config.sample_times.len());
    for &target in &config.sample_times {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt).ceil() as usize;
            let h = span / steps as f64;
            for step in 0..steps {
                for k in 0..n {
                    p[k] += 0.5 * h * acc[k];
                    q[k] += h * p[k];
                }
                let now = t + (step + 1) as f64 * h;
                accel(&q, now, &mut acc);
                for k in 0..n {
                    p[k] += 0.5 * h * acc[k];
                }
            }
            t = target;
        }
        out.push(ChainState { q: q.clone(), p: p.clone() });
    }
    out
}

/// Stationary component `eta(t)` of the periodic chain at the sample times.
pub fn stationary_trajectory(
    kernel: &InteractionKernel,
    realization: &ForceRealization,
    config: &SimConfig,
) -> Result<Trajectory> {
    config.validate(kernel)?;
    if config.boundary != Boundary::Periodic {
        return Err(Error::BoundaryUnsupported);
    }
    let basis = ModeBasis::new(kernel, config.n_sites)?;
    let site = config.forcing_site as i64;
    let states = config
        .sample_times
        .iter()
        .map(|&t| {
            let mut q_modes = Vec::with_capacity(basis.n);
            let mut p_modes = Vec::with_capacity(basis.n);
            for m in 0..basis.n {
                let (q, p) = stationary_mode_solution(realization, basis.omega_sq[m], site, basis.angles[m], t)?;
                q_modes.push(q);
                p_modes.push(p);
            }
            Ok(ChainState { q: basis.inverse(q_modes), p: basis.inverse(p_modes) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Trajectory {
        times: config.sample_times.clone(),
        states,
        realization: realization.clone(),
        config: config.clone(),
        kind: TrajectoryKind::Stationary,
    })
}

/// Transient part `eps(t) = psi(t) - eta(t)` on the sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSeries {
    pub times: Vec<f64>,
    pub states: Vec<ChainState>,
}

impl EpsilonSeries {
    /// `max_k |eps_k(t)|` over the given sites.
    pub fn max_abs(&self, sites: &[usize]) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| sites.iter().map(|&k| s.q[k].abs()).fold(0.0, f64::max))
            .collect()
    }
}

pub fn decompose_epsilon(trajectory: &Trajectory, stationary: &Trajectory) -> Result<EpsilonSeries> {
    if trajectory.realization != stationary.realization {
        return Err(Error::MismatchedRuns("force realizations differ".into()));
    }
    let (a, b) = (&trajectory.config, &stationary.config);
    if a.n_sites != b.n_sites || a.boundary != b.boundary || a.forcing_site != b.forcing_site {
        return Err(Error::MismatchedRuns("lattice setups differ".into()));
    }
    if trajectory.times != stationary.times {
        return Err(Error::MismatchedRuns("sample times differ".into()));
    }
    let states = trajectory
        .states
        .iter()
        .zip(&stationary.states)
        .map(|(psi, eta)| ChainState {
            q: psi.q.iter().zip(&eta.q).map(|(a, b)| a - b).collect(),
            p: psi.p.iter().zip(&eta.p).map(|(a, b)| a - b).collect(),
        })
        .collect();
    Ok(EpsilonSeries { times: trajectory.times.clone(), states })
}

/// `(t, H(t))` with `H = 1/2 (p, p) + 1/2 (q, V q)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub points: Vec<(f64, f64)>,
}

impl EnergyTrace {
    pub fn to_csv_rows(&self) -> String {
        self.points.iter().map(|(t, h)| format!("{t:.16e},{h:.16e}\n")).collect()
    }

    /// Largest deviation from the first recorded value.
    pub fn drift(&self) -> f64 {
        let first = self.points.first().map_or(0.0, |p| p.1);
        self.points.iter().map(|p| (p.1 - first).abs()).fold(0.0, f64::max)
    }
}

pub fn energy_trace(times: &[f64], states: &[ChainState], kernel: &InteractionKernel, boundary: Boundary) -> EnergyTrace {
    EnergyTrace {
        points: times
            .iter()
            .zip(states)
            .map(|(&t, s)| (t, s.energy(kernel, boundary)))
            .collect(),
    }
}

impl Trajectory {
    pub fn energy_trace(&self, kernel: &InteractionKernel) -> EnergyTrace {
        energy_trace(&self.times, &self.states, kernel, self.config.boundary)
    }
}

impl EpsilonSeries {
    pub fn energy_trace(&self, kernel: &InteractionKernel, boundary: Boundary) -> EnergyTrace {
        energy_trace(&self.times, &self.states, kernel, boundary)
    }
}

/// Geometric grid `1, 2, 5, 10, 20, 50, ...` up to `horizon`, merged with
/// `extra` (sorted, deduplicated).
pub fn default_sample_times(horizon: f64, extra: &[f64]) -> Vec<f64> {
    let mut times = Vec::new();
    let mut decade = 1.0;
    'outer: loop {
        for m in [1.0, 2.0, 5.0] {
            let t = m * decade;
            if t > horizon {
                break 'outer;
            }
            times.push(t);
        }
        decade *= 10.0;
    }
    times.extend(extra.iter().copied().filter(|t| (0.0..=horizon).contains(t)));
    times.sort_by(f64::total_cmp);
    times.dedup();
    times
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::force::ForceTerm;

    fn s1() -> InteractionKernel {
        InteractionKernel::nearest_neighbour(3.0, -1.0).unwrap()
    }

    fn cos3() -> ForceRealization {
        ForceRealization::from_terms(vec![ForceTerm { frequency: 3.0, cos_amp: 1.0, sin_amp: 0.0 }])
    }

    #[test]
    fn unforced_zero_start_stays_at_rest() {
        let cfg = SimConfig::periodic(16, 0, vec![0.0, 1.0, 5.0]);
        let traj = simulate(&cfg, &s1(), &ForceRealization::zero()).unwrap();
        assert!(traj.states.iter().all(|s| s.q.iter().chain(&s.p).all(|v| *v == 0.0)));
    }

    #[test]
    fn uncoupled_chain_matches_driven_oscillator() {
        let flat = InteractionKernel::uncoupled(4.0).unwrap();
        let times = vec![0.5, 1.0, 3.3, 7.0];
        let traj = simulate(&SimConfig::periodic(4, 1, times.clone()), &flat, &cos3()).unwrap();
        for (t, s) in times.iter().zip(&traj.states) {
            let exact = ((2.0 * t).cos() - (3.0 * t).cos()) / 5.0;
            assert!((s.q[1] - exact).abs() < 1e-14);
            assert!(s.q[0].abs() < 1e-15 && s.q[2].abs() < 1e-15);
        }
    }

    #[test]
    fn mode_exact_requires_periodic_lattice() {
        let mut cfg = SimConfig::periodic(8, 0, vec![1.0]);
        cfg.boundary = Boundary::Free;
        assert_eq!(simulate(&cfg, &s1(), &cos3()), Err(Error::BoundaryUnsupported));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SimConfig::periodic(8, 0, vec![2.0, 1.0]);
        cfg.horizon = 3.0;
        assert!(matches!(cfg.validate(&s1()), Err(Error::Config(_))));
        let cfg = SimConfig::periodic(2, 0, vec![1.0]);
        assert!(matches!(cfg.validate(&s1()), Err(Error::TooSmall { .. })));
        let cfg = SimConfig::periodic(8, 9, vec![1.0]);
        assert!(cfg.validate(&s1()).is_err());
        let mut cfg = SimConfig::periodic(8, 0, vec![1.0]);
        cfg.integrator = Integrator::Verlet { dt: 0.0 };
        assert!(cfg.validate(&s1()).is_err());
    }

    #[test]
    fn stationary_start_has_no_transient() {
        let cfg = SimConfig::periodic(16, 3, vec![0.0]);
        let eta0 = stationary_trajectory(&s1(), &cos3(), &cfg).unwrap().states.remove(0);
        let mut cfg = SimConfig::periodic(16, 3, vec![0.0, 0.7, 4.0, 11.0]);
        cfg.initial = InitialCondition::Explicit { state: eta0 };
        let psi = simulate(&cfg, &s1(), &cos3()).unwrap();
        let eta = stationary_trajectory(&s1(), &cos3(), &cfg).unwrap();
        let eps = decompose_epsilon(&psi, &eta).unwrap();
        for s in &eps.states {
            assert!(s.q.iter().chain(&s.p).all(|v| v.abs() < 1e-13));
        }
    }

    #[test]
    fn mismatched_runs_are_rejected() {
        let cfg = SimConfig::periodic(8, 0, vec![1.0]);
        let a = simulate(&cfg, &s1(), &cos3()).unwrap();
        let b = stationary_trajectory(&s1(), &ForceRealization::zero(), &cfg).unwrap();
        assert!(matches!(decompose_epsilon(&a, &b), Err(Error::MismatchedRuns(_))));
    }

    #[test]
    fn random_initial_condition_is_reproducible() {
        let ic = InitialCondition::Random { seed: 5, scale: 0.1 };
        assert_eq!(ic.materialize(6).unwrap(), ic.materialize(6).unwrap());
    }

    #[test]
    fn default_grid() {
        assert_eq!(default_sample_times(25.0, &[3.0, 10.0]), vec![1.0, 2.0, 3.0, 5.0, 10.0, 20.0]);
    }

    #[test]
    fn energy_of_zero_state_is_zero() {
        let trace = energy_trace(&[0.0], &[ChainState::zeros(5)], &s1(), Boundary::Periodic);
        assert_eq!(trace.points, vec![(0.0, 0.0)]);
    }
}
