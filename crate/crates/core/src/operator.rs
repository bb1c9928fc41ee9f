//! Propagators of the linear chain `q'' = -V q + f(t) e_n` on a finite
//! lattice.
//!
//! With `A = [[0, I], [-V, 0]]`, `e^{At}` has blocks `cos(sqrt(V) t)` and
//! `sin(sqrt(V) t) / sqrt(V)`; both are evaluated through the spectral
//! decomposition of `V`. [`dense_exponential`] computes `e^{At}` by
//! scaling and squaring instead and serves as the independent check.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::ForceRealization;
use crate::lattice::InteractionKernel;
use crate::quadrature::simpson;

/// Smallest eigenvalue accepted as positive.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Forcing frequencies closer than this (in `omega^2 - x^2`) to a mode are
/// treated as resonant.
pub const RESONANCE_TOL: f64 = 1e-10;

/// Deviations `q` and momenta `p` on a finite lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
}

impl ChainState {
    pub fn new(q: Vec<f64>, p: Vec<f64>) -> Result<Self> {
        if q.len() != p.len() {
            return Err(Error::Config(format!("q has {} entries but p has {}", q.len(), p.len())));
        }
        if q.iter().chain(&p).any(|v| !v.is_finite()) {
            return Err(Error::Config("state entries must be finite".into()));
        }
        Ok(Self { q, p })
    }

    pub fn zeros(n: usize) -> Self {
        Self { q: vec![0.0; n], p: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// `H = 1/2 (p, p) + 1/2 (q, V q)` with `V` applied through the kernel.
    pub fn energy(&self, kernel: &InteractionKernel, boundary: crate::lattice::Boundary) -> f64 {
        let mut vq = vec![0.0; self.len()];
        kernel.apply(&self.q, boundary, &mut vq);
        0.5 * self.p.iter().map(|p| p * p).sum::<f64>() + 0.5 * dot(&self.q, &vq)
    }

    /// CSV rows `k,q_k,p_k`.
    pub fn to_csv_rows(&self) -> String {
        self.q
            .iter()
            .zip(&self.p)
            .enumerate()
            .map(|(k, (q, p))| format!("{k},{q:.16e},{p:.16e}\n"))
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `cos(sqrt(V) t)` and `sin(sqrt(V) t) / sqrt(V)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatorBlocks {
    pub cos: DMatrix<f64>,
    pub sin_over_root: DMatrix<f64>,
    pub t: f64,
}

impl PropagatorBlocks {
    /// Blocks of a periodic chain assembled from its Fourier modes
    /// `lambda_m = 2 pi m / N`.
    pub fn circulant(kernel: &InteractionKernel, n: usize, t: f64) -> Result<Self> {
        kernel.check_size(n)?;
        let modes: Vec<(f64, f64)> = (0..n)
            .map(|m| {
                let lambda = std::f64::consts::TAU * m as f64 / n as f64;
                (lambda, kernel.omega_squared(lambda))
            })
            .collect();
        if let Some(&(_, w2)) = modes.iter().find(|(_, w2)| *w2 <= POSITIVITY_FLOOR) {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: w2 });
        }
        let (cos_row, sin_row): (Vec<f64>, Vec<f64>) = (0..n)
            .map(|d| {
                modes.iter().fold((0.0, 0.0), |(c, s), &(lambda, w2)| {
                    let w = w2.sqrt();
                    let phase = (lambda * d as f64).cos();
                    (c + (w * t).cos() * phase, s + (w * t).sin() / w * phase)
                })
            })
            .map(|(c, s)| (c / n as f64, s / n as f64))
            .unzip();
        let at = |row: &[f64], i: usize, j: usize| row[(i + n - j) % n];
        Ok(Self {
            cos: DMatrix::from_fn(n, n, |i, j| at(&cos_row, i, j)),
            sin_over_root: DMatrix::from_fn(n, n, |i, j| at(&sin_row, i, j)),
            t,
        })
    }

    /// The full `2N x 2N` matrix `e^{At}`.
    pub fn to_exponential(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.cos.nrows();
        let mut out = DMatrix::zeros(2 * n, 2 * n);
        out.view_mut((0, 0), (n, n)).copy_from(&self.cos);
        out.view_mut((0, n), (n, n)).copy_from(&self.sin_over_root);
        out.view_mut((n, 0), (n, n)).copy_from(&(-(v * &self.sin_over_root)));
        out.view_mut((n, n), (n, n)).copy_from(&self.cos);
        out
    }
}

/// Spectral decomposition `V = U diag(omega^2) U^T` of a symmetric positive
/// definite coupling matrix.
#[derive(Debug, Clone)]
pub struct ChainOperator {
    matrix: DMatrix<f64>,
    modes: DMatrix<f64>,
    frequencies: DVector<f64>,
}

/// How the Duhamel convolution is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DuhamelQuadrature {
    /// Term-by-term closed form for trigonometric forces.
    ClosedForm,
    /// Composite Simpson with the given maximal step.
    Simpson { dt: f64 },
}

impl ChainOperator {
    pub fn new(v: DMatrix<f64>) -> Result<Self> {
        assert!(v.is_square(), "coupling matrix must be square");
        let eigen = SymmetricEigen::new(v.clone());
        let min = eigen.eigenvalues.min();
        if min <= POSITIVITY_FLOOR {
            return Err(Error::NotPositiveDefinite { min_eigenvalue: min });
        }
        Ok(Self {
            matrix: v,
            modes: eigen.eigenvectors,
            frequencies: eigen.eigenvalues.map(f64::sqrt),
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Mode frequencies `sqrt` of the eigenvalues of `V`.
    pub fn frequencies(&self) -> &DVector<f64> {
        &self.frequencies
    }

    /// Largest eigenvalue of `V`.
    pub fn spectral_radius(&self) -> f64 {
        let w = self.frequencies.max();
        w * w
    }

    fn spectral_function(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.dim(), self.dim(), |i, j| self.modes[(i, j)] * f(self.frequencies[j]));
        &scaled * self.modes.transpose()
    }

    pub fn propagator_blocks(&self, t: f64) -> PropagatorBlocks {
        PropagatorBlocks {
            cos: self.spectral_function(|w| (w * t).cos()),
            sin_over_root: self.spectral_function(|w| (w * t).sin() / w),
            t,
        }
    }

    pub fn evolve_homogeneous(&self, state: &ChainState, t: f64) -> ChainState {
        let q = self.modes.tr_mul(&DVector::from_column_slice(&state.q));
        let p = self.modes.tr_mul(&DVector::from_column_slice(&state.p));
        let mut q_t = DVector::zeros(self.dim());
        let mut p_t = DVector::zeros(self.dim());
        for j in 0..self.dim() {
            let w = self.frequencies[j];
            let (s, c) = (w * t).sin_cos();
            q_t[j] = c * q[j] + s / w * p[j];
            p_t[j] = -w * s * q[j] + c * p[j];
        }
        ChainState {
            q: (&self.modes * q_t).as_slice().to_vec(),
            p: (&self.modes * p_t).as_slice().to_vec(),
        }
    }

    /// `psi(t) = e^{At} psi(0) + int_0^t e^{A(t-s)} g f(s) ds`, `g = (0, e_site)`.
    pub fn duhamel_forced(
        &self,
        state0: &ChainState,
        force: &ForceRealization,
        site: usize,
        t: f64,
        quadrature: DuhamelQuadrature,
    ) -> Result<ChainState> {
        let mut state = self.evolve_homogeneous(state0, t);
        if force.terms.is_empty() || t == 0.0 {
            return Ok(state);
        }
        let n = self.dim();
        // modal amplitudes of the forced response, before weighting by U[site, j]
        let mut dq = DVector::zeros(n);
        let mut dp = DVector::zeros(n);
        for j in 0..n {
            let w = self.frequencies[j];
            let (q_j, p_j) = match quadrature {
                DuhamelQuadrature::ClosedForm => driven_response(w, force, t)?,
                DuhamelQuadrature::Simpson { dt } => (
                    simpson(0.0, t, dt, |s| force.evaluate(s) * (w * (t - s)).sin() / w),
                    simpson(0.0, t, dt, |s| force.evaluate(s) * (w * (t - s)).cos()),
                ),
            };
            let weight = self.modes[(site, j)];
            dq[j] = weight * q_j;
            dp[j] = weight * p_j;
        }
        let dq = &self.modes * dq;
        let dp = &self.modes * dp;
        for k in 0..n {
            state.q[k] += dq[k];
            state.p[k] += dp[k];
        }
        Ok(state)
    }
}

/// Zero-start response `(Q(t), Q'(t))` of `Q'' = -w^2 Q + f(t)`.
pub fn driven_response(w: f64, force: &ForceRealization, t: f64) -> Result<(f64, f64)> {
    let (sw, cw) = (w * t).sin_cos();
    let mut q = 0.0;
    let mut p = 0.0;
    for term in &force.terms {
        let x = term.frequency;
        let denom = w * w - x * x;
        if denom.abs() < RESONANCE_TOL {
            return Err(Error::Resonance { frequency: x, mode_frequency: w });
        }
        let (sx, cx) = (x * t).sin_cos();
        q += (term.cos_amp * (cx - cw) + term.sin_amp * (sx - x / w * sw)) / denom;
        p += (term.cos_amp * (w * sw - x * sx) + term.sin_amp * x * (cx - cw)) / denom;
    }
    Ok((q, p))
}

/// Upper bounds on `|C_{k,n}(t)|` and `|S_{k,n}(t)|` for a kernel of radius
/// `radius` and `||V|| <= v_norm`, with `rho = ceil(offset / radius)`:
/// `v^rho t^{2 rho} / (2 rho)! e^{sqrt(v) t}` and the same with `2 rho + 1`.
pub fn kernel_bound(v_norm: f64, radius: usize, offset: usize, t: f64) -> (f64, f64) {
    let rho = if offset == 0 {
        0
    } else {
        assert!(radius > 0, "a zero-radius kernel has no off-diagonal coupling");
        offset.div_ceil(radius)
    };
    let root = v_norm.sqrt() * t;
    // prod_{i=1}^{m} root / i, without overflowing the factorial
    let series_term = |m: usize| (1..=m).fold(1.0, |acc, i| acc * root / i as f64);
    let growth = root.exp();
    let bound_c = series_term(2 * rho) * growth;
    let bound_s = if v_norm > 0.0 {
        series_term(2 * rho + 1) / v_norm.sqrt() * growth
    } else if rho == 0 {
        t
    } else {
        0.0
    };
    (bound_c, bound_s)
}

/// `A = [[0, I], [-V, 0]]`.
pub fn generator(v: &DMatrix<f64>) -> DMatrix<f64> {
    let n = v.nrows();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    a.view_mut((0, n), (n, n)).fill_with_identity();
    a.view_mut((n, 0), (n, n)).copy_from(&(-v));
    a
}

/// `e^{M}` by degree-16 Taylor expansion of `M / 2^s` followed by `s`
/// squarings, with `s` chosen so that `||M||_1 / 2^s < 0.5`.
pub fn dense_exponential(m: &DMatrix<f64>) -> DMatrix<f64> {
    let norm = (0..m.ncols())
        .map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut squarings = 0;
    while norm / 2f64.powi(squarings) >= 0.5 {
        squarings += 1;
    }
    let scaled = m / 2f64.powi(squarings);
    let n = m.nrows();
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=16 {
        term = &term * &scaled / k as f64;
        result += &term;
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}
