//! Stationary response of the infinite chain to a force acting at one site.
//!
//! Everything here is built from the Fourier coefficients of the inverse
//! symbol,
//!
//! ```text
//! h_m(x) = (1/2pi) int_0^{2pi} e^{i m lambda} / (omega^2(lambda) - x^2) d lambda,
//! ```
//!
//! which are the entries `((V - x^2)^{-1})_{k,n}` with `m = n - k`. They are
//! available two ways: a periodic trapezoid rule in `lambda`, and a residue
//! sum over the roots of the symbol polynomial inside the unit circle. The
//! stationary covariances, the decay rate of site variances and the mean
//! energy constants are integrals of products of `h` against the spectral
//! measure of the force.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::force::{ForceRealization, SpectralMeasure};
use crate::lattice::{InteractionKernel, SpectralSet, DEFAULT_SCAN_POINTS};
use crate::operator::RESONANCE_TOL;
use crate::quadrature::periodic_mean;

/// Default number of trapezoid nodes in `lambda`.
pub const DEFAULT_N_LAMBDA: usize = 4096;

/// Default half-width of the site window around the forcing site.
pub const DEFAULT_WINDOW_RADIUS: i64 = 25;

const BAND_TOL: f64 = 1e-12;
const CIRCLE_TOL: f64 = 1e-8;
const REPEAT_TOL: f64 = 1e-8;
const SCHUR_MAX_ITER: usize = 10_000;

fn guard_outside_band(set: &SpectralSet, x: f64) -> Result<()> {
    if set.contains_squared(x, BAND_TOL) {
        return Err(Error::InsideSpectrum { x, e1: set.e1, e2: set.e2 });
    }
    Ok(())
}

fn guard_gap(kernel: &InteractionKernel, measure: &SpectralMeasure) -> Result<SpectralSet> {
    let set = kernel.spectral_set(DEFAULT_SCAN_POINTS)?;
    let report = measure.check_gap(&set);
    if !report.pass {
        return Err(Error::GapViolation { margin: report.margin });
    }
    Ok(set)
}

/// `h_m(x)` by the `n_lambda`-point trapezoid rule.
pub fn h_k_quadrature(kernel: &InteractionKernel, x: f64, m: i64, n_lambda: usize) -> Result<f64> {
    let set = kernel.spectral_set(DEFAULT_SCAN_POINTS)?;
    guard_outside_band(&set, x)?;
    Ok(h_quadrature_unchecked(kernel, x, m, n_lambda))
}

fn h_quadrature_unchecked(kernel: &InteractionKernel, x: f64, m: i64, n_lambda: usize) -> f64 {
    let x2 = x * x;
    let value = periodic_mean(n_lambda, |l| (m as f64 * l).cos() / (kernel.omega_squared(l) - x2));
    debug_assert!(
        periodic_mean(n_lambda, |l| (m as f64 * l).sin() / (kernel.omega_squared(l) - x2)).abs() < 1e-12,
        "odd part of h must vanish"
    );
    value
}

/// Roots of the symbol polynomial at `x` lying strictly inside the unit
/// circle. The polynomial is palindromic, so the remaining roots are their
/// reciprocals.
pub fn inner_roots(kernel: &InteractionKernel, x: f64) -> Result<Vec<Complex64>> {
    let poly = kernel.symbol_polynomial(x)?;
    let degree = poly.degree();
    let lead = poly.coeffs[degree];
    let companion = DMatrix::from_fn(degree, degree, |i, j| {
        if i == 0 {
            -poly.coeffs[degree - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    // the unshifted QR sweep can cycle on companion matrices with roots on
    // the circle, so the iteration count is capped
    let schur = Schur::try_new(companion, f64::EPSILON, SCHUR_MAX_ITER).ok_or(Error::RootFinding { x })?;
    let roots: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|&z| polish_root(&poly, z))
        .collect();
    if roots.iter().any(|z| (z.norm() - 1.0).abs() < CIRCLE_TOL) {
        return Err(Error::RootOnCircle { x });
    }
    let mut inner: Vec<Complex64> = roots.into_iter().filter(|z| z.norm() < 1.0).collect();
    inner.sort_by(|a, b| b.norm().total_cmp(&a.norm()).then(a.im.total_cmp(&b.im)));
    Ok(inner)
}

fn polish_root(poly: &crate::lattice::SymbolPolynomial, mut z: Complex64) -> Complex64 {
    for _ in 0..8 {
        let d = poly.eval_derivative(z);
        if d.norm() == 0.0 {
            break;
        }
        let step = poly.eval(z) / d;
        z -= step;
        if step.norm() <= 1e-16 * z.norm().max(1.0) {
            break;
        }
    }
    z
}

/// Largest modulus `R(x)` among the inner roots; `|h_m(x)| ~ R(x)^{|m|}`.
pub fn inner_root_radius(kernel: &InteractionKernel, x: f64) -> Result<f64> {
    if kernel.radius() == 0 {
        return Err(Error::DegenerateSupport);
    }
    let set = kernel.spectral_set(DEFAULT_SCAN_POINTS)?;
    if set.contains_squared(x, 0.0) {
        return Err(Error::RootOnCircle { x });
    }
    let inner = inner_roots(kernel, x)?;
    Ok(inner.first().map_or(0.0, |z| z.norm()))
}

/// Residue representation of `m -> h_m(x)` for one frequency.
#[derive(Debug, Clone)]
pub struct InverseSymbol {
    x: f64,
    form: InverseSymbolForm,
}

#[derive(Debug, Clone)]
enum InverseSymbolForm {
    /// `K = 0`: `h_0 = 1 / (a0 - x^2)`, all other coefficients vanish.
    Constant(f64),
    /// `(z_s, z_s^{K-1} / P'(z_s))` for each inner root.
    Residues(Vec<(Complex64, Complex64)>),
}

impl InverseSymbol {
    /// Prepares the residue sum; fails on roots near the circle or
    /// repeated inner roots.
    pub fn new(kernel: &InteractionKernel, x: f64) -> Result<Self> {
        let radius = kernel.radius();
        if radius == 0 {
            let denom = kernel.coeff(0) - x * x;
            if denom.abs() <= BAND_TOL {
                return Err(Error::RootOnCircle { x });
            }
            return Ok(Self { x, form: InverseSymbolForm::Constant(1.0 / denom) });
        }
        guard_outside_band(&kernel.spectral_set(DEFAULT_SCAN_POINTS)?, x)?;
        let inner = inner_roots(kernel, x)?;
        for (i, a) in inner.iter().enumerate() {
            if inner[i + 1..].iter().any(|b| (a - b).norm() < REPEAT_TOL) {
                return Err(Error::RepeatedRoot { x });
            }
        }
        let poly = kernel.symbol_polynomial(x)?;
        let residues = inner
            .into_iter()
            .map(|z| (z, z.powi(radius as i32 - 1) / poly.eval_derivative(z)))
            .collect();
        Ok(Self { x, form: InverseSymbolForm::Residues(residues) })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    /// `h_m(x)`; even in `m`.
    pub fn coefficient(&self, m: i64) -> f64 {
        let m = m.unsigned_abs();
        match &self.form {
            InverseSymbolForm::Constant(c) => {
                if m == 0 {
                    *c
                } else {
                    0.0
                }
            }
            InverseSymbolForm::Residues(residues) => {
                let sum: Complex64 = residues.iter().map(|(z, r)| r * z.powu(m as u32)).sum();
                debug_assert!(sum.im.abs() <= 1e-10 * sum.norm().max(1e-300) + 1e-14);
                sum.re
            }
        }
    }
}

/// `h_m(x)` from the residue sum.
pub fn h_k_residue(kernel: &InteractionKernel, x: f64, m: i64) -> Result<f64> {
    Ok(InverseSymbol::new(kernel, x)?.coefficient(m))
}

/// All coefficients `h_m(x)`, `m = 0..=max_offset`, by residues with a
/// quadrature fallback at repeated roots.
fn h_profile(kernel: &InteractionKernel, x: f64, max_offset: usize) -> Result<Vec<f64>> {
    match InverseSymbol::new(kernel, x) {
        Ok(symbol) => Ok((0..=max_offset as i64).map(|m| symbol.coefficient(m)).collect()),
        Err(Error::RepeatedRoot { .. } | Error::RootFinding { .. }) => Ok((0..=max_offset as i64)
            .map(|m| h_quadrature_unchecked(kernel, x, m, 4 * DEFAULT_N_LAMBDA))
            .collect()),
        Err(e) => Err(e),
    }
}

/// `R_A(ix) g` restricted to a window of sites, `g = (0, e_site)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolventAction {
    pub x: f64,
    pub sites: Vec<i64>,
    /// `-(V - x^2)^{-1} e_site`
    pub qpart: Vec<Complex64>,
    /// `-ix (V - x^2)^{-1} e_site`
    pub ppart: Vec<Complex64>,
}

pub fn resolvent_action(kernel: &InteractionKernel, x: f64, site: i64, window: (i64, i64)) -> Result<ResolventAction> {
    let set = kernel.spectral_set(DEFAULT_SCAN_POINTS)?;
    guard_outside_band(&set, x)?;
    let max_offset = (site - window.0).abs().max((site - window.1).abs()) as usize;
    let h = h_profile(kernel, x, max_offset)?;
    let sites: Vec<i64> = (window.0..=window.1).collect();
    let qpart: Vec<Complex64> = sites
        .iter()
        .map(|k| Complex64::new(-h[(site - k).unsigned_abs() as usize], 0.0))
        .collect();
    let ppart = qpart.iter().map(|q| Complex64::new(0.0, x) * q).collect();
    Ok(ResolventAction { x, sites, qpart, ppart })
}

/// Covariances of the stationary state `eta(0)` on a window of sites.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryCovariance {
    pub site: i64,
    pub k_min: i64,
    pub k_max: i64,
    /// `int h_k h_j mu(dx)`
    pub cqq: DMatrix<f64>,
    /// `int x^2 h_k h_j mu(dx)`
    pub cpp: DMatrix<f64>,
}

impl StationaryCovariance {
    pub fn sites(&self) -> impl Iterator<Item = i64> {
        self.k_min..=self.k_max
    }

    fn index(&self, k: i64) -> usize {
        (k - self.k_min) as usize
    }

    pub fn var_q(&self, k: i64) -> f64 {
        let i = self.index(k);
        self.cqq[(i, i)]
    }

    pub fn var_p(&self, k: i64) -> f64 {
        let i = self.index(k);
        self.cpp[(i, i)]
    }

    /// Position-momentum block; zero for a symmetric measure.
    pub fn cqp(&self) -> DMatrix<f64> {
        DMatrix::zeros(self.cqq.nrows(), self.cqq.ncols())
    }
}

/// Stationary covariance on `window = [k_min, k_max]` for forcing at `site`.
pub fn stationary_covariance(
    kernel: &InteractionKernel,
    measure: &SpectralMeasure,
    site: i64,
    window: (i64, i64),
) -> Result<StationaryCovariance> {
    guard_gap(kernel, measure)?;
    let (k_min, k_max) = window;
    assert!(k_min <= k_max, "empty window");
    let size = (k_max - k_min + 1) as usize;
    let max_offset = (site - k_min).abs().max((site - k_max).abs()) as usize;
    let mut cqq = DMatrix::zeros(size, size);
    let mut cpp = DMatrix::zeros(size, size);
    for (x, weight) in measure.half_line_nodes() {
        let h = h_profile(kernel, x, max_offset)?;
        let local: Vec<f64> = (k_min..=k_max).map(|k| h[(site - k).unsigned_abs() as usize]).collect();
        for i in 0..size {
            for j in i..size {
                let v = weight * local[i] * local[j];
                cqq[(i, j)] += v;
                cpp[(i, j)] += x * x * v;
            }
        }
    }
    cqq.fill_lower_triangle_with_upper_triangle();
    cpp.fill_lower_triangle_with_upper_triangle();
    Ok(StationaryCovariance { site, k_min, k_max, cqq, cpp })
}

/// Brute-force `int i x h_k h_j mu(dx)` over the full symmetric measure.
/// The odd weight cancels between `+x` and `-x`.
pub fn cross_covariance_quadrature(
    kernel: &InteractionKernel,
    measure: &SpectralMeasure,
    site: i64,
    window: (i64, i64),
    n_lambda: usize,
) -> Result<DMatrix<Complex64>> {
    guard_gap(kernel, measure)?;
    let size = (window.1 - window.0 + 1) as usize;
    let mut out = DMatrix::from_element(size, size, Complex64::new(0.0, 0.0));
    for (x, weight) in measure.signed_nodes() {
        let h: Vec<f64> = (window.0..=window.1)
            .map(|k| h_quadrature_unchecked(kernel, x, site - k, n_lambda))
            .collect();
        for i in 0..size {
            for j in 0..size {
                out[(i, j)] += Complex64::new(0.0, x) * weight * h[i] * h[j];
            }
        }
    }
    Ok(out)
}

/// Exponential envelope `Var_k <= c r^{|k - n|}` of the site variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    /// Fitted rate for position variances.
    pub rate: f64,
    /// Prefactor for position variances.
    pub c1: f64,
    /// Prefactor for momentum variances at the same rate.
    pub c2: f64,
    /// Rate fitted to the momentum variances alone.
    pub rate_p: f64,
}

impl DecayEstimate {
    pub fn bound(&self, distance: u64) -> (f64, f64) {
        let decay = self.rate.powi(distance as i32);
        (self.c1 * decay, self.c2 * decay)
    }
}

const FIT_FLOOR: f64 = 1e-300;
const SAFETY: f64 = 1.0001;

/// Least-squares fit of `log Var` against distance from the forcing site.
///
/// The prefactors are raised, if needed, until the envelope dominates every
/// window site.
pub fn variance_decay_fit(cov: &StationaryCovariance, site: i64) -> Result<DecayEstimate> {
    let points = |var: &dyn Fn(i64) -> f64| -> Vec<(f64, f64)> {
        cov.sites()
            .map(|k| ((k - site).abs() as f64, var(k)))
            .filter(|(_, v)| *v > FIT_FLOOR)
            .collect()
    };
    let q_points = points(&|k| cov.var_q(k));
    let p_points = points(&|k| cov.var_p(k));
    let distinct = |pts: &[(f64, f64)]| {
        let mut d: Vec<u64> = pts.iter().map(|p| p.0 as u64).collect();
        d.sort_unstable();
        d.dedup();
        d.len()
    };
    let usable = q_points.len().min(p_points.len());
    if usable < 3 || distinct(&q_points) < 2 {
        return Err(Error::DegenerateWindow { usable });
    }

    let (slope, intercept) = least_squares(&q_points);
    let rate = slope.exp();
    let (slope_p, intercept_p) = least_squares(&p_points);

    let dominating = |pts: &[(f64, f64)], intercept: f64| {
        pts.iter()
            .map(|(d, v)| v / rate.powf(*d))
            .fold(intercept.exp(), f64::max)
            * SAFETY
    };
    Ok(DecayEstimate {
        rate,
        c1: dominating(&q_points, intercept),
        c2: dominating(&p_points, intercept_p),
        rate_p: slope_p.exp(),
    })
}

fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mean_d = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_l = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), (d, v)| {
        let dd = d - mean_d;
        (sxy + dd * (v.ln() - mean_l), sxx + dd * dd)
    });
    let slope = sxy / sxx;
    (slope, mean_l - slope * mean_d)
}

/// `sup` over the support of `R(x)^2`: the predicted spatial decay rate.
pub fn predicted_decay_rate(kernel: &InteractionKernel, measure: &SpectralMeasure) -> Result<f64> {
    guard_gap(kernel, measure)?;
    measure
        .half_line_nodes()
        .map(|(x, _)| inner_root_radius(kernel, x).map(|r| r * r))
        .try_fold(0.0_f64, |acc, r| r.map(|r| acc.max(r)))
}

/// Mean energy of the stationary state together with a resolution check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyLimit {
    pub alpha: f64,
    pub error_estimate: f64,
}

/// `alpha = (1/4pi) int int (omega^2 + x^2) / (omega^2 - x^2)^2 d lambda mu(dx)`,
/// the mean energy of the stationary state.
pub fn energy_limit_alpha(kernel: &InteractionKernel, measure: &SpectralMeasure, n_lambda: usize) -> Result<EnergyLimit> {
    guard_gap(kernel, measure)?;
    let alpha_at = |n: usize| -> f64 {
        0.5 * measure
            .half_line_nodes()
            .map(|(x, w)| {
                let x2 = x * x;
                w * periodic_mean(n, |l| {
                    let w2 = kernel.omega_squared(l);
                    (w2 + x2) / ((w2 - x2) * (w2 - x2))
                })
            })
            .sum::<f64>()
    };
    let coarse = alpha_at(n_lambda);
    let fine = alpha_at(2 * n_lambda);
    Ok(EnergyLimit { alpha: coarse, error_estimate: (fine - coarse).abs() })
}

/// `1/2 (sum_{k,j} a(k-j) cqq[k][j] + sum_k cpp[k][k])` on the window.
pub fn alpha_from_covariance(kernel: &InteractionKernel, cov: &StationaryCovariance) -> f64 {
    let size = cov.cqq.nrows();
    let radius = kernel.radius();
    let mut potential = 0.0;
    for i in 0..size {
        let lo = i.saturating_sub(radius);
        let hi = (i + radius).min(size - 1);
        for j in lo..=hi {
            potential += kernel.coeff(i as i64 - j as i64) * cov.cqq[(i, j)];
        }
    }
    let kinetic: f64 = (0..size).map(|i| cov.cpp[(i, i)]).sum();
    0.5 * (potential + kinetic)
}

fn transient_integrand(kernel: &InteractionKernel, measure: &SpectralMeasure, n_lambda: usize, g: impl Fn(f64) -> f64) -> f64 {
    0.5 * measure
        .half_line_nodes()
        .map(|(x, w)| {
            w * periodic_mean(n_lambda, |l| {
                let omega = kernel.omega_squared(l).sqrt();
                g(x + omega) + g(x - omega)
            })
        })
        .sum::<f64>()
}

/// Trapezoid resolution that keeps `cos(t omega(lambda))` resolved at time `t`.
pub fn resolving_points(kernel: &InteractionKernel, t: f64) -> usize {
    // |d omega / d lambda| <= sum_k k |a(k)| / omega_min
    let slope: f64 = kernel
        .half_coefficients()
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, a)| k as f64 * a.abs())
        .sum();
    let omega_min = kernel.spectral_set(DEFAULT_SCAN_POINTS).map_or(1.0, |s| s.e1.sqrt());
    let needed = 8.0 * (t * slope / omega_min + kernel.radius() as f64) + 64.0;
    (needed.ceil() as usize).max(DEFAULT_N_LAMBDA)
}

/// Mean energy at time `t` of the solution started from rest:
/// `(1/4pi) int int I_+ + I_- d lambda mu(dx)` with
/// `I_pm = (1 - cos t (x pm omega)) / (x pm omega)^2`.
pub fn transient_mean_energy(kernel: &InteractionKernel, measure: &SpectralMeasure, t: f64, n_lambda: usize) -> Result<f64> {
    guard_gap(kernel, measure)?;
    Ok(transient_integrand(kernel, measure, n_lambda, |gamma| {
        // (1 - cos tg) / g^2 = 2 sin^2(tg/2) / g^2, stable for small tg
        let s = (0.5 * t * gamma).sin();
        2.0 * s * s / (gamma * gamma)
    }))
}

/// Long-time limit of [`transient_mean_energy`]:
/// `(1/4pi) int int 1/(x + omega)^2 + 1/(x - omega)^2`. It equals `2 alpha`:
/// the forced solution started from rest is the stationary state minus a
/// free wave, and the free wave keeps the energy `alpha` it starts with.
pub fn zero_start_energy_limit(kernel: &InteractionKernel, measure: &SpectralMeasure, n_lambda: usize) -> Result<f64> {
    guard_gap(kernel, measure)?;
    Ok(transient_integrand(kernel, measure, n_lambda, |gamma| 1.0 / (gamma * gamma)))
}

/// Stationary solution of `Q'' = -omega^2 Q + f(t) e^{i n lambda}` for one
/// Fourier mode, and its time derivative.
pub fn stationary_mode_solution(
    realization: &ForceRealization,
    omega_squared: f64,
    site: i64,
    lambda: f64,
    t: f64,
) -> Result<(Complex64, Complex64)> {
    let phase = Complex64::from_polar(1.0, site as f64 * lambda);
    let mut q = 0.0;
    let mut qdot = 0.0;
    for term in &realization.terms {
        let x = term.frequency;
        let denom = omega_squared - x * x;
        if denom.abs() < RESONANCE_TOL {
            return Err(Error::Resonance { frequency: x, mode_frequency: omega_squared.sqrt() });
        }
        let (s, c) = (x * t).sin_cos();
        q += (term.cos_amp * c + term.sin_amp * s) / denom;
        qdot += x * (term.sin_amp * c - term.cos_amp * s) / denom;
    }
    Ok((phase * q, phase * qdot))
}

/// Mode angles `2 pi m / n`.
pub fn mode_angles(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |m| TAU * m as f64 / n as f64)
}
