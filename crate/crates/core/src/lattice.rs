//! Interaction kernels and the objects derived from them: the dispersion
//! symbol `omega^2(lambda) = a(0) + 2 sum_k a(k) cos(k lambda)`, its range
//! (the spectral band `[e1, e2]`), the palindromic symbol polynomial used by
//! the residue calculus, and finite matrix realizations of the coupling
//! operator `V` with `V[k][j] = a(k - j)`.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform scan resolution used before extremum refinement.
pub const DEFAULT_SCAN_POINTS: usize = 4096;

const BISECTION_TOL: f64 = 1e-12;

/// Symmetric finite-range coupling `a(-K..=K)`, stored as the half `a(0..=K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct InteractionKernel {
    half: Vec<f64>,
}

/// On-disk form `{"a": [a0, a1, ..., aK]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub a: Vec<f64>,
}

impl TryFrom<KernelSpec> for InteractionKernel {
    type Error = Error;

    fn try_from(spec: KernelSpec) -> Result<Self> {
        InteractionKernel::new(spec.a)
    }
}

impl From<InteractionKernel> for KernelSpec {
    fn from(kernel: InteractionKernel) -> Self {
        KernelSpec { a: kernel.half }
    }
}

impl InteractionKernel {
    /// Builds a kernel from `a(0), a(1), ..., a(K)`. Trailing zeros are
    /// dropped so that the support radius is tight.
    pub fn new(mut half: Vec<f64>) -> Result<Self> {
        if half.is_empty() {
            return Err(Error::InvalidKernel("coefficient list is empty".into()));
        }
        if let Some(bad) = half.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidKernel(format!("non-finite coefficient {bad}")));
        }
        while half.len() > 1 && half[half.len() - 1] == 0.0 {
            half.pop();
        }
        Ok(Self { half })
    }

    /// Uncoupled pinned oscillators, `a(0) = stiffness`.
    pub fn uncoupled(stiffness: f64) -> Result<Self> {
        Self::new(vec![stiffness])
    }

    /// Nearest-neighbour chain `a(0) = diagonal`, `a(+-1) = coupling`.
    pub fn nearest_neighbour(diagonal: f64, coupling: f64) -> Result<Self> {
        Self::new(vec![diagonal, coupling])
    }

    /// Support radius `K`.
    pub fn radius(&self) -> usize {
        self.half.len() - 1
    }

    pub fn half_coefficients(&self) -> &[f64] {
        &self.half
    }

    /// `a(k)` for any integer `k`; zero outside the support.
    pub fn coeff(&self, k: i64) -> f64 {
        let k = k.unsigned_abs() as usize;
        self.half.get(k).copied().unwrap_or(0.0)
    }

    pub fn omega_squared(&self, lambda: f64) -> f64 {
        self.half
            .iter()
            .enumerate()
            .skip(1)
            .fold(self.half[0], |acc, (k, a)| acc + 2.0 * a * (k as f64 * lambda).cos())
    }

    /// `d omega^2 / d lambda`.
    pub fn omega_squared_derivative(&self, lambda: f64) -> f64 {
        self.half
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, a)| -2.0 * k as f64 * a * (k as f64 * lambda).sin())
            .sum()
    }

    /// Range of the symbol over a period, refined at critical points.
    ///
    /// A uniform scan locates sign changes of the derivative; each bracket is
    /// bisected down to `1e-12` in `lambda`. Fails with
    /// [`Error::PositivityViolation`] if the minimum is not strictly positive.
    pub fn spectral_set(&self, grid_points: usize) -> Result<SpectralSet> {
        let grid_points = grid_points.max(4 * self.radius() + 4);
        let step = TAU / grid_points as f64;

        let mut min = (0.0, self.omega_squared(0.0));
        let mut max = min;
        let mut consider = |lambda: f64, value: f64| {
            if value < min.1 {
                min = (lambda, value);
            }
            if value > max.1 {
                max = (lambda, value);
            }
        };

        let mut prev_lambda = 0.0;
        let mut prev_slope = self.omega_squared_derivative(0.0);
        for i in 1..=grid_points {
            let lambda = i as f64 * step;
            consider(lambda, self.omega_squared(lambda));
            let slope = self.omega_squared_derivative(lambda);
            if prev_slope != 0.0 && slope != 0.0 && prev_slope.signum() != slope.signum() {
                let critical = self.bisect_critical_point(prev_lambda, lambda, prev_slope);
                consider(critical, self.omega_squared(critical));
            }
            prev_lambda = lambda;
            prev_slope = slope;
        }

        if min.1 <= 0.0 {
            return Err(Error::PositivityViolation { lambda: min.0, value: min.1 });
        }
        Ok(SpectralSet {
            e1: min.1,
            e2: max.1,
            argmin: min.0,
            argmax: max.0,
        })
    }

    fn bisect_critical_point(&self, mut lo: f64, mut hi: f64, lo_slope: f64) -> f64 {
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            let slope = self.omega_squared_derivative(mid);
            if slope == 0.0 {
                return mid;
            }
            if slope.signum() == lo_slope.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `z^K (omega^2(z) - x^2)` as a polynomial of degree `2K`.
    pub fn symbol_polynomial(&self, x: f64) -> Result<SymbolPolynomial> {
        let radius = self.radius();
        if radius == 0 {
            return Err(Error::DegenerateSupport);
        }
        let mut coeffs = vec![0.0; 2 * radius + 1];
        for j in 1..=radius {
            coeffs[radius + j] = self.half[j];
            coeffs[radius - j] = self.half[j];
        }
        coeffs[radius] = self.half[0] - x * x;
        Ok(SymbolPolynomial { coeffs, x })
    }

    /// Dense `n x n` realization of `V`.
    pub fn truncated_v(&self, n: usize, boundary: Boundary) -> Result<DMatrix<f64>> {
        self.check_size(n)?;
        let radius = self.radius() as i64;
        let n_i = n as i64;
        Ok(DMatrix::from_fn(n, n, |i, j| {
            let d = i as i64 - j as i64;
            match boundary {
                Boundary::Free => self.coeff(d),
                Boundary::Periodic => {
                    // N > 2K so each residue class holds at most one offset.
                    let wrapped = d.rem_euclid(n_i);
                    if wrapped <= radius {
                        self.coeff(wrapped)
                    } else if n_i - wrapped <= radius {
                        self.coeff(n_i - wrapped)
                    } else {
                        0.0
                    }
                }
            }
        }))
    }

    /// `out = V q` without forming the matrix.
    pub fn apply(&self, q: &[f64], boundary: Boundary, out: &mut [f64]) {
        let n = q.len() as i64;
        let radius = self.radius() as i64;
        for (i, slot) in out.iter_mut().enumerate() {
            let i = i as i64;
            let mut acc = self.half[0] * q[i as usize];
            for k in 1..=radius {
                let a = self.half[k as usize];
                match boundary {
                    Boundary::Periodic => {
                        acc += a * (q[(i + k).rem_euclid(n) as usize] + q[(i - k).rem_euclid(n) as usize]);
                    }
                    Boundary::Free => {
                        if i + k < n {
                            acc += a * q[(i + k) as usize];
                        }
                        if i - k >= 0 {
                            acc += a * q[(i - k) as usize];
                        }
                    }
                }
            }
            *slot = acc;
        }
    }

    pub(crate) fn check_size(&self, n: usize) -> Result<()> {
        if n <= 2 * self.radius() {
            return Err(Error::TooSmall { n, radius: self.radius() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    Free,
}

/// Range `[e1, e2]` of `omega^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralSet {
    pub e1: f64,
    pub e2: f64,
    #[serde(skip)]
    pub argmin: f64,
    #[serde(skip)]
    pub argmax: f64,
}

impl SpectralSet {
    /// Frequencies `[sqrt(e1), sqrt(e2)]` of the propagating band.
    pub fn frequency_band(&self) -> (f64, f64) {
        (self.e1.sqrt(), self.e2.sqrt())
    }

    /// Whether `x^2` falls in `[e1 - tol, e2 + tol]`.
    pub fn contains_squared(&self, x: f64, tol: f64) -> bool {
        let x2 = x * x;
        x2 >= self.e1 - tol && x2 <= self.e2 + tol
    }
}

/// Coefficients in ascending powers of `z`; palindromic by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolPolynomial {
    pub coeffs: Vec<f64>,
    pub x: f64,
}

impl SymbolPolynomial {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficients from the leading power down, `[c_2K, ..., c_0]`.
    pub fn descending(&self) -> Vec<f64> {
        self.coeffs.iter().rev().copied().collect()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    pub fn eval_derivative(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, (j, &c)| acc * z + c * j as f64)
    }
}
