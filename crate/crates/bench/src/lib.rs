//! Fixtures shared by the benchmarks.

use oscchain::force::{Atom, DensityPanel, ForceRealization, SpectralMeasure, SynthesisMode};
use oscchain::lattice::InteractionKernel;

pub fn nearest_neighbour() -> InteractionKernel {
    InteractionKernel::nearest_neighbour(3.0, -1.0).expect("static kernel")
}

/// Radius-3 kernel; three distinct inner roots at `x = 3`.
pub fn long_range() -> InteractionKernel {
    InteractionKernel::new(vec![4.0, -1.0, 0.3, 0.2]).expect("static kernel")
}

pub fn atoms() -> SpectralMeasure {
    SpectralMeasure::symmetric_atoms(&[(3.0, 0.5)]).expect("static measure")
}

/// Two atoms above the band plus a density panel below it.
pub fn mixed() -> SpectralMeasure {
    SpectralMeasure::new(
        vec![Atom { frequency: 3.0, mass: 0.25 }, Atom { frequency: 3.5, mass: 0.1 }],
        vec![DensityPanel { lo: 0.1, hi: 0.6, poly: vec![0.5, 1.0] }],
    )
    .expect("static measure")
}

pub fn realization(measure: &SpectralMeasure, seed: u64) -> ForceRealization {
    measure
        .synthesize(seed, SynthesisMode::GaussianAmplitudes, 32)
        .expect("measure has mass")
}
