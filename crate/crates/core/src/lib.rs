//! Harmonic chains driven at one site by a stationary random force.
//!
//! The crate covers the whole pipeline: the interaction kernel and its
//! dispersion ([`lattice`]), the spectral measure of the force and sampled
//! realizations ([`force`]), finite-lattice propagators ([`operator`]), the
//! analytic stationary state of the infinite chain ([`stationary`]),
//! time-domain simulation ([`simulator`]), Monte Carlo estimators
//! ([`stats`]), experiment recipes ([`experiment`]) and the acceptance
//! checks ([`verify`]).

pub mod error;
pub mod experiment;
pub mod force;
pub mod lattice;
pub mod operator;
pub mod quadrature;
pub mod simulator;
pub mod stationary;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use force::{ForceRealization, ForceTerm, GapReport, SpectralMeasure, SynthesisMode};
pub use lattice::{Boundary, InteractionKernel, SpectralSet, SymbolPolynomial};
pub use operator::{ChainOperator, ChainState, PropagatorBlocks};
pub use simulator::{EnergyTrace, EpsilonSeries, InitialCondition, Integrator, SimConfig, Trajectory};
pub use stationary::{DecayEstimate, EnergyLimit, StationaryCovariance};
pub use stats::{EnsembleSummary, KsReport, MeanEstimate, VarianceProfile};
