//! Experiment configuration and replica orchestration.
//!
//! Configurations are authored as TOML and echoed as JSON with every default
//! filled in. Unknown fields are rejected.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::{ForceRealization, SpectralMeasure, SynthesisMode};
use crate::lattice::{Boundary, InteractionKernel};
use crate::operator::ChainState;
use crate::simulator::{default_sample_times, InitialCondition, Integrator, SimConfig};
use crate::stationary::{DEFAULT_N_LAMBDA, DEFAULT_WINDOW_RADIUS};

fn default_n_sites() -> usize {
    64
}
fn default_horizon() -> f64 {
    200.0
}
fn default_replicas() -> usize {
    2000
}
fn default_seed() -> u64 {
    1
}
fn default_density_terms() -> usize {
    32
}
fn default_window() -> i64 {
    DEFAULT_WINDOW_RADIUS
}
fn default_profile_window() -> i64 {
    12
}
fn default_n_lambda() -> usize {
    DEFAULT_N_LAMBDA
}
fn default_integrator() -> Integrator {
    Integrator::ModeExact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub scenario: Option<String>,
    pub kernel: InteractionKernel,
    #[serde(default)]
    pub measure: SpectralMeasure,
    /// Forcing site; an index into the simulated lattice.
    #[serde(default)]
    pub forcing_site: usize,
    #[serde(default = "default_n_sites")]
    pub n_sites: usize,
    #[serde(default)]
    pub boundary: Boundary,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_replicas")]
    pub replicas: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default)]
    pub synthesis: SynthesisMode,
    #[serde(default = "default_density_terms")]
    pub n_density_terms: usize,
    /// Half-width of the analytic covariance window.
    #[serde(default = "default_window")]
    pub window: i64,
    /// Half-width of the simulated variance profile.
    #[serde(default = "default_profile_window")]
    pub profile_window: i64,
    #[serde(default = "default_n_lambda")]
    pub n_lambda: usize,
    #[serde(default)]
    pub initial: InitialCondition,
    /// Empty means the geometric default grid up to `horizon`.
    #[serde(default)]
    pub sample_times: Vec<f64>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    pub fn new(kernel: InteractionKernel, measure: SpectralMeasure) -> Self {
        Self {
            scenario: None,
            kernel,
            measure,
            forcing_site: 0,
            n_sites: default_n_sites(),
            boundary: Boundary::Periodic,
            horizon: default_horizon(),
            replicas: default_replicas(),
            seed: default_seed(),
            integrator: Integrator::ModeExact,
            synthesis: SynthesisMode::GaussianAmplitudes,
            n_density_terms: default_density_terms(),
            window: default_window(),
            profile_window: default_profile_window(),
            n_lambda: default_n_lambda(),
            initial: InitialCondition::Zero,
            sample_times: Vec::new(),
            output_dir: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg.materialized())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg.materialized())
    }

    /// Schema-level checks that need no numerics.
    pub fn validate(&self) -> Result<()> {
        if self.replicas < 2 {
            return Err(Error::Config(format!("replicas must be at least 2, got {}", self.replicas)));
        }
        if self.n_lambda < 16 {
            return Err(Error::Config("n_lambda must be at least 16".into()));
        }
        if self.window < 0 || self.profile_window < 0 {
            return Err(Error::Config("windows must be nonnegative".into()));
        }
        if self.n_density_terms == 0 {
            return Err(Error::Config("n_density_terms must be positive".into()));
        }
        self.sim_config().validate(&self.kernel)
    }

    /// Copy with every implicit default written out.
    pub fn materialized(mut self) -> Self {
        if self.sample_times.is_empty() {
            self.sample_times = default_sample_times(self.horizon, &[self.horizon]);
        }
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.clone().materialized()).expect("config serializes")
    }

    pub fn sim_config(&self) -> SimConfig {
        let sample_times = if self.sample_times.is_empty() {
            default_sample_times(self.horizon, &[self.horizon])
        } else {
            self.sample_times.clone()
        };
        SimConfig {
            n_sites: self.n_sites,
            boundary: self.boundary,
            forcing_site: self.forcing_site,
            horizon: self.horizon,
            sample_times,
            integrator: self.integrator,
            initial: self.initial.clone(),
        }
    }

    pub fn realization(&self, replica: u64) -> Result<ForceRealization> {
        self.measure
            .synthesize_replica(self.seed, replica, self.synthesis, self.n_density_terms)
    }

    /// Lattice indices within `radius` of the forcing site, with their
    /// signed offsets.
    pub fn window_sites(&self, radius: i64) -> Vec<(i64, usize)> {
        let n = self.n_sites as i64;
        let radius = radius.min((n - 1) / 2);
        (-radius..=radius)
            .map(|d| (d, (self.forcing_site as i64 + d).rem_euclid(n) as usize))
            .collect()
    }

    /// Built-in recipes.
    pub fn scenario(name: &str) -> Result<Self> {
        let s1_kernel = || InteractionKernel::nearest_neighbour(3.0, -1.0);
        let atoms3 = || SpectralMeasure::symmetric_atoms(&[(3.0, 0.5)]);
        let mut cfg = match name {
            "s1" => Self::new(s1_kernel()?, atoms3()?),
            "s1-offset" => {
                let mut cfg = Self::new(s1_kernel()?, atoms3()?);
                let mut state = ChainState::zeros(cfg.n_sites);
                state.p[cfg.forcing_site] = 1.0;
                cfg.initial = InitialCondition::Explicit { state };
                cfg
            }
            "uncoupled" => Self::new(InteractionKernel::uncoupled(4.0)?, atoms3()?),
            "two-atom" => Self::new(
                s1_kernel()?,
                SpectralMeasure::symmetric_atoms(&[(3.0, 0.25), (4.0, 0.25)])?,
            ),
            "gap-violation" => Self::new(s1_kernel()?, SpectralMeasure::symmetric_atoms(&[(2.0, 0.5)])?),
            "unpinned" => Self::new(InteractionKernel::nearest_neighbour(2.0, -1.0)?, atoms3()?),
            other => return Err(Error::Config(format!("unknown scenario '{other}'"))),
        };
        cfg.scenario = Some(name.to_string());
        Ok(cfg.materialized())
    }

    pub const SCENARIOS: [&'static str; 6] = ["s1", "s1-offset", "uncoupled", "two-atom", "gap-violation", "unpinned"];
}

/// Runs `job` for replicas `0..n` in parallel and returns the results in
/// replica order.
pub fn par_replicas<T, F>(n: usize, workers: Option<usize>, job: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let run = || (0..n as u64).into_par_iter().map(&job).collect::<Result<Vec<T>>>();
    match workers {
        Some(w) if w > 0 => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
        _ => run(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_with_defaults() {
        let text = r#"
            scenario = "custom"
            kernel = { a = [3.0, -1.0] }
            measure = { atoms = [[3.0, 0.5]] }
            replicas = 10
        "#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.n_sites, 64);
        assert_eq!(cfg.sample_times.last(), Some(&200.0));
        let echoed = ExperimentConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(echoed, cfg);
    }

    #[test]
    fn unknown_fields_and_zero_replicas_are_rejected() {
        let unknown = "kernel = { a = [3.0, -1.0] }\nfoo = 1\n";
        assert!(matches!(ExperimentConfig::from_toml(unknown), Err(Error::Config(_))));
        let zero = "kernel = { a = [3.0, -1.0] }\nreplicas = 0\n";
        assert!(matches!(ExperimentConfig::from_toml(zero), Err(Error::Config(_))));
        let bad_kernel = "kernel = { a = [] }\n";
        assert!(ExperimentConfig::from_toml(bad_kernel).is_err());
    }

    #[test]
    fn scenarios_build() {
        for name in ExperimentConfig::SCENARIOS {
            let cfg = ExperimentConfig::scenario(name).unwrap();
            assert_eq!(cfg.scenario.as_deref(), Some(name));
        }
        assert!(ExperimentConfig::scenario("nope").is_err());
    }

    #[test]
    fn offset_scenario_has_half_unit_energy() {
        let cfg = ExperimentConfig::scenario("s1-offset").unwrap();
        let state = cfg.initial.materialize(cfg.n_sites).unwrap();
        assert!((state.energy(&cfg.kernel, cfg.boundary) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn window_wraps_around_the_ring() {
        let mut cfg = ExperimentConfig::scenario("s1").unwrap();
        cfg.n_sites = 8;
        let w = cfg.window_sites(2);
        assert_eq!(w, vec![(-2, 6), (-1, 7), (0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn replicas_come_back_in_order() {
        let out = par_replicas(50, Some(3), |r| Ok(r * 2)).unwrap();
        assert_eq!(out, (0..50).map(|r| r * 2).collect::<Vec<_>>());
    }
}
