use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("kernel is not positive: omega^2({lambda}) = {value} <= 0")]
    PositivityViolation { lambda: f64, value: f64 },

    #[error("kernel has zero support radius; use the constant-symbol path")]
    DegenerateSupport,

    #[error("lattice size {n} must exceed twice the support radius {radius}")]
    TooSmall { n: usize, radius: usize },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid spectral measure: {0}")]
    InvalidMeasure(String),

    #[error("spectral measure has zero total mass")]
    EmptyMeasure,

    #[error("operator is not positive definite (min eigenvalue {min_eigenvalue})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("frequency x = {x} has x^2 inside the spectral band [{e1}, {e2}]")]
    InsideSpectrum { x: f64, e1: f64, e2: f64 },

    #[error("symbol polynomial has a root within 1e-8 of the unit circle at x = {x}")]
    RootOnCircle { x: f64 },

    #[error("companion eigenvalue iteration did not converge at x = {x}")]
    RootFinding { x: f64 },

    #[error("repeated inner root of the symbol polynomial at x = {x}")]
    RepeatedRoot { x: f64 },

    #[error("spectral measure violates the gap condition (margin {margin})")]
    GapViolation { margin: f64 },

    #[error("forcing frequency {frequency} resonates with mode frequency {mode_frequency}")]
    Resonance { frequency: f64, mode_frequency: f64 },

    #[error("mode-exact integration needs a periodic lattice")]
    BoundaryUnsupported,

    #[error("trajectories come from different runs: {0}")]
    MismatchedRuns(String),

    #[error("not enough usable points for a decay fit ({usable} < 3)")]
    DegenerateWindow { usable: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("reference variance must be positive, got {0}")]
    DegenerateVariance(f64),

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    /// Numerical guard failures (gap, positivity) as opposed to bad input.
    pub fn is_numerical_guard(&self) -> bool {
        matches!(
            self,
            Error::PositivityViolation { .. }
                | Error::GapViolation { .. }
                | Error::InsideSpectrum { .. }
                | Error::RootOnCircle { .. }
                | Error::RootFinding { .. }
                | Error::Resonance { .. }
                | Error::NotPositiveDefinite { .. }
        )
    }
}
