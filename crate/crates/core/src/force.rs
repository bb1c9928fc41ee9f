//! Spectral description of the stationary driving force and sampled
//! realizations of it.
//!
//! A [`SpectralMeasure`] is symmetric about zero: every atom `(x, w)` stands
//! for mass `w` at both `+x` and `-x` (a single atom of mass `w` when
//! `x = 0`), and every density panel on `[u, v]` is mirrored onto `[-v, -u]`.
//! Realizations are finite sums `sum_j A_j cos(x_j t) + B_j sin(x_j t)`
//! whose ensemble covariance is exactly `B(s) = int e^{isx} mu(dx)` for the
//! atomic part and for the equal-mass discretization of the panels.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::SpectralSet;
use crate::quadrature::GaussLegendre;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub frequency: f64,
    pub mass: f64,
}

/// Polynomial density `c0 + c1 x + ...` on `[lo, hi]`, with `0 <= lo < hi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityPanel {
    pub lo: f64,
    pub hi: f64,
    pub poly: Vec<f64>,
}

impl DensityPanel {
    pub fn density(&self, x: f64) -> f64 {
        self.poly.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// `int_lo^x density`.
    pub fn cumulative(&self, x: f64) -> f64 {
        let anti = |y: f64| {
            self.poly
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (j, c)| acc * y + c / (j + 1) as f64)
                * y
        };
        anti(x) - anti(self.lo)
    }

    /// Mass on one side of the origin.
    pub fn mass(&self) -> f64 {
        self.cumulative(self.hi)
    }

    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo < 0.0 || self.hi <= self.lo {
            return Err(Error::InvalidMeasure(format!(
                "panel interval [{}, {}] must satisfy 0 <= u < v",
                self.lo, self.hi
            )));
        }
        if self.poly.is_empty() || self.poly.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidMeasure("panel polynomial must be non-empty and finite".into()));
        }
        let negative = GaussLegendre::n64()
            .mapped(self.lo, self.hi)
            .map(|(x, _)| x)
            .chain([self.lo, self.hi])
            .any(|x| self.density(x) < 0.0);
        if negative {
            return Err(Error::InvalidMeasure(format!(
                "density on [{}, {}] takes negative values",
                self.lo, self.hi
            )));
        }
        if self.mass() <= 0.0 {
            return Err(Error::InvalidMeasure("panel mass must be positive".into()));
        }
        Ok(())
    }
}

/// Symmetric finite spectral measure: atoms plus polynomial density panels.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "MeasureSpec", into = "MeasureSpec")]
pub struct SpectralMeasure {
    atoms: Vec<Atom>,
    panels: Vec<DensityPanel>,
}

/// On-disk form of a measure.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<[f64; 2]>,
    #[serde(default)]
    pub panels: Vec<PanelSpec>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PanelSpec {
    pub interval: [f64; 2],
    pub poly: Vec<f64>,
}

impl TryFrom<MeasureSpec> for SpectralMeasure {
    type Error = Error;

    fn try_from(spec: MeasureSpec) -> Result<Self> {
        let atoms = spec
            .atoms
            .iter()
            .map(|&[frequency, mass]| Atom { frequency, mass })
            .collect();
        let panels = spec
            .panels
            .into_iter()
            .map(|p| DensityPanel { lo: p.interval[0], hi: p.interval[1], poly: p.poly })
            .collect();
        SpectralMeasure::new(atoms, panels)
    }
}

impl From<SpectralMeasure> for MeasureSpec {
    fn from(m: SpectralMeasure) -> Self {
        MeasureSpec {
            atoms: m.atoms.iter().map(|a| [a.frequency, a.mass]).collect(),
            panels: m
                .panels
                .into_iter()
                .map(|p| PanelSpec { interval: [p.lo, p.hi], poly: p.poly })
                .collect(),
        }
    }
}

impl SpectralMeasure {
    /// Negative atom frequencies are folded onto `|x|`; repeated frequencies
    /// are merged.
    pub fn new(atoms: Vec<Atom>, panels: Vec<DensityPanel>) -> Result<Self> {
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            if !atom.frequency.is_finite() || !atom.mass.is_finite() || atom.mass <= 0.0 {
                return Err(Error::InvalidMeasure(format!(
                    "atom ({}, {}) needs a finite frequency and positive mass",
                    atom.frequency, atom.mass
                )));
            }
            let frequency = atom.frequency.abs();
            match merged.iter_mut().find(|a| a.frequency == frequency) {
                Some(existing) => existing.mass += atom.mass,
                None => merged.push(Atom { frequency, mass: atom.mass }),
            }
        }
        merged.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        for panel in &panels {
            panel.validate()?;
        }
        Ok(Self { atoms: merged, panels })
    }

    /// Atoms at `+-x` carrying `mass` each.
    pub fn symmetric_atoms(atoms: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            atoms.iter().map(|&(frequency, mass)| Atom { frequency, mass }).collect(),
            Vec::new(),
        )
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn panels(&self) -> &[DensityPanel] {
        &self.panels
    }

    /// `sigma^2 = B(0)`.
    pub fn total_mass(&self) -> f64 {
        self.half_line_nodes().map(|(_, w)| w).sum()
    }

    /// Quadrature nodes `x >= 0` with weights carrying the mass of both
    /// `+x` and `-x`. Exact for atoms; 64-point Gauss-Legendre per panel.
    /// Suitable for any integrand that is even in `x`.
    pub fn half_line_nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let atoms = self.atoms.iter().map(|a| {
            let weight = if a.frequency == 0.0 { a.mass } else { 2.0 * a.mass };
            (a.frequency, weight)
        });
        let panels = self.panels.iter().flat_map(|p| {
            GaussLegendre::n64()
                .mapped(p.lo, p.hi)
                .map(move |(x, w)| (x, 2.0 * w * p.density(x)))
        });
        atoms.chain(panels)
    }

    /// Nodes on the whole line, `+x` and `-x` listed separately.
    pub fn signed_nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.half_line_nodes().flat_map(|(x, w)| {
            if x == 0.0 {
                vec![(0.0, w)]
            } else {
                vec![(x, 0.5 * w), (-x, 0.5 * w)]
            }
        })
    }

    /// `B(s) = int e^{isx} mu(dx)`.
    pub fn covariance_b(&self, s: f64) -> f64 {
        self.half_line_nodes().map(|(x, w)| w * (x * s).cos()).sum()
    }

    /// Signed distance from `supp mu` to `+-[sqrt(e1), sqrt(e2)]`; negative
    /// (or zero) when the support touches the band.
    pub fn check_gap(&self, set: &SpectralSet) -> GapReport {
        let (a, b) = set.frequency_band();
        let point = |x: f64| {
            if x < a {
                a - x
            } else if x > b {
                x - b
            } else {
                -(x - a).min(b - x)
            }
        };
        let interval = |u: f64, v: f64| {
            if v < a {
                a - v
            } else if u > b {
                u - b
            } else {
                -(v.min(b) - u.max(a))
            }
        };
        let margin = self
            .atoms
            .iter()
            .map(|atom| point(atom.frequency))
            .chain(self.panels.iter().map(|p| interval(p.lo, p.hi)))
            .fold(f64::INFINITY, f64::min);
        GapReport { margin, pass: margin > 0.0 }
    }

    /// Largest frequency in the support.
    pub fn max_frequency(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.frequency)
            .chain(self.panels.iter().map(|p| p.hi))
            .fold(0.0, f64::max)
    }

    /// Draws replica 0 of the given seed.
    pub fn synthesize(&self, seed: u64, mode: SynthesisMode, n_density_terms: usize) -> Result<ForceRealization> {
        self.synthesize_replica(seed, 0, mode, n_density_terms)
    }

    /// Draws one realization from the `(seed, replica)` ChaCha stream.
    pub fn synthesize_replica(
        &self,
        seed: u64,
        replica: u64,
        mode: SynthesisMode,
        n_density_terms: usize,
    ) -> Result<ForceRealization> {
        if self.total_mass() <= 0.0 {
            return Err(Error::EmptyMeasure);
        }
        let mut rng = replica_rng(seed, replica);
        let mut terms = Vec::new();
        for (frequency, variance) in self.spectral_lines(n_density_terms) {
            let (cos_amp, sin_amp) = match mode {
                SynthesisMode::GaussianAmplitudes => {
                    let sd = variance.sqrt();
                    let a: f64 = rng.sample(StandardNormal);
                    let b: f64 = rng.sample(StandardNormal);
                    (sd * a, sd * b)
                }
                SynthesisMode::RandomPhases => {
                    let phase = rng.random::<f64>() * TAU;
                    let amplitude = (2.0 * variance).sqrt();
                    (amplitude * phase.cos(), amplitude * phase.sin())
                }
            };
            // sin(0 t) vanishes, so only the cosine amplitude matters at x = 0
            let sin_amp = if frequency == 0.0 { 0.0 } else { sin_amp };
            terms.push(ForceTerm { frequency, cos_amp, sin_amp });
        }
        Ok(ForceRealization { terms, seed, replica, mode })
    }

    /// `(x_j >= 0, Var of the x_j component)`. Atoms are exact; each panel
    /// is cut into equal-mass subpanels sampled at their midpoints.
    fn spectral_lines(&self, n_density_terms: usize) -> Vec<(f64, f64)> {
        let mut lines: Vec<(f64, f64)> = self
            .atoms
            .iter()
            .map(|a| (a.frequency, if a.frequency == 0.0 { a.mass } else { 2.0 * a.mass }))
            .collect();
        let n = n_density_terms.max(1);
        for panel in &self.panels {
            let mass = panel.mass();
            let mut left = panel.lo;
            for i in 1..=n {
                let right = if i == n {
                    panel.hi
                } else {
                    invert_cumulative(panel, mass * i as f64 / n as f64)
                };
                let mid = 0.5 * (left + right);
                let variance = if mid == 0.0 { mass / n as f64 } else { 2.0 * mass / n as f64 };
                lines.push((mid, variance));
                left = right;
            }
        }
        lines
    }
}

fn invert_cumulative(panel: &DensityPanel, target: f64) -> f64 {
    let (mut lo, mut hi) = (panel.lo, panel.hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if panel.cumulative(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * panel.hi.max(1.0) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Deterministic generator for replica `replica` of `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    #[default]
    GaussianAmplitudes,
    RandomPhases,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForceTerm {
    pub frequency: f64,
    pub cos_amp: f64,
    pub sin_amp: f64,
}

/// One sample path of the force, a finite trigonometric sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForceRealization {
    pub terms: Vec<ForceTerm>,
    pub seed: u64,
    pub replica: u64,
    pub mode: SynthesisMode,
}

impl ForceRealization {
    pub fn from_terms(terms: Vec<ForceTerm>) -> Self {
        Self { terms, seed: 0, replica: 0, mode: SynthesisMode::GaussianAmplitudes }
    }

    /// `f = 0`.
    pub fn zero() -> Self {
        Self::from_terms(Vec::new())
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|term| {
                let (s, c) = (term.frequency * t).sin_cos();
                term.cos_amp * c + term.sin_amp * s
            })
            .sum()
    }
}
