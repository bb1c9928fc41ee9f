//! Monte Carlo estimators used to compare simulated ensembles against the
//! analytic predictions.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::operator::ChainState;

/// Asymptotic 1% critical value of the Kolmogorov distribution.
pub const KS_CRITICAL_1PCT: f64 = 1.63;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl MeanEstimate {
    /// `|mean - target| <= k * stderr`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.mean - target).abs() <= k * self.stderr
    }

    /// Distance to `target` in standard errors.
    pub fn z_score(&self, target: f64) -> f64 {
        if self.stderr == 0.0 {
            if self.mean == target {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (self.mean - target) / self.stderr
        }
    }
}

/// Sample mean and its standard error `s / sqrt(n)`.
pub fn ensemble_mean(values: &[f64]) -> Result<MeanEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFew { needed: 2, got: n });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok(MeanEstimate { mean, stderr: (var / n as f64).sqrt(), n })
}

/// Unbiased sample variance with a fourth-moment standard error.
pub fn variance_estimate(values: &[f64]) -> Result<MeanEstimate> {
    let n = values.len();
    if n < 2 {
        return Err(Error::TooFew { needed: 2, got: n });
    }
    let nf = n as f64;
    let mean = values.iter().sum::<f64>() / nf;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / nf;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / nf;
    let var = m2 * nf / (nf - 1.0);
    let stderr = ((m4 - m2 * m2).max(0.0) / nf).sqrt();
    Ok(MeanEstimate { mean: var, stderr, n })
}

/// Sample covariance of paired draws with a standard error from the
/// variance of the centered products.
pub fn covariance_estimate(a: &[f64], b: &[f64]) -> Result<MeanEstimate> {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFew { needed: 2, got: n });
    }
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let mean_b = b.iter().sum::<f64>() / n as f64;
    let products: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - mean_a) * (y - mean_b)).collect();
    let est = ensemble_mean(&products)?;
    Ok(MeanEstimate { mean: est.mean * n as f64 / (n - 1) as f64, ..est })
}

/// Summary of several named quantities over one set of replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub n_replicas: usize,
    pub seeds: Vec<u64>,
    pub quantities: Vec<(String, MeanEstimate)>,
}

impl EnsembleSummary {
    pub fn new(seeds: Vec<u64>) -> Self {
        Self { n_replicas: 0, seeds, quantities: Vec::new() }
    }

    pub fn add(&mut self, name: &str, values: &[f64]) -> Result<&MeanEstimate> {
        let est = ensemble_mean(values)?;
        self.n_replicas = self.n_replicas.max(values.len());
        self.quantities.push((name.to_string(), est));
        Ok(&self.quantities.last().expect("just pushed").1)
    }
}

/// Per-site sample variances across replicas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceProfile {
    pub sites: Vec<usize>,
    pub var_q: Vec<MeanEstimate>,
    pub var_p: Vec<MeanEstimate>,
}

impl VarianceProfile {
    /// CSV rows `k,var_q,stderr_q,var_p,stderr_p,prediction_q,prediction_p`,
    /// with `k` the signed offset from `origin`.
    pub fn to_csv_rows(&self, labels: &[i64], predictions: &[(f64, f64)]) -> String {
        let mut out = String::new();
        for i in 0..self.sites.len() {
            let (pq, pp) = predictions.get(i).copied().unwrap_or((f64::NAN, f64::NAN));
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                labels[i], self.var_q[i].mean, self.var_q[i].stderr, self.var_p[i].mean, self.var_p[i].stderr, pq, pp
            ));
        }
        out
    }
}

/// Minimum replica count for a variance profile.
pub const MIN_PROFILE_REPLICAS: usize = 100;

pub fn variance_profile(states: &[ChainState], sites: &[usize]) -> Result<VarianceProfile> {
    if states.len() < MIN_PROFILE_REPLICAS {
        return Err(Error::TooFew { needed: MIN_PROFILE_REPLICAS, got: states.len() });
    }
    let column = |k: usize, pick: fn(&ChainState) -> &Vec<f64>| -> Vec<f64> {
        states.iter().map(|s| pick(s)[k]).collect()
    };
    let mut var_q = Vec::with_capacity(sites.len());
    let mut var_p = Vec::with_capacity(sites.len());
    for &k in sites {
        var_q.push(variance_estimate(&column(k, |s| &s.q))?);
        var_p.push(variance_estimate(&column(k, |s| &s.p))?);
    }
    Ok(VarianceProfile { sites: sites.to_vec(), var_q, var_p })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsReport {
    pub statistic: f64,
    pub threshold: f64,
    pub n: usize,
    pub pass: bool,
}

/// Kolmogorov-Smirnov distance to the centered normal with the given
/// variance, with the asymptotic 1% threshold `1.63 / sqrt(n)`.
pub fn ks_distance(samples: &[f64], variance: f64) -> Result<KsReport> {
    if !(variance > 0.0 && variance.is_finite()) {
        return Err(Error::DegenerateVariance(variance));
    }
    if samples.len() < 50 {
        return Err(Error::TooFew { needed: 50, got: samples.len() });
    }
    let normal = Normal::new(0.0, variance.sqrt()).map_err(|_| Error::DegenerateVariance(variance))?;
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let cdf = normal.cdf(x);
            (cdf - i as f64 / n).abs().max(((i + 1) as f64 / n - cdf).abs())
        })
        .fold(0.0, f64::max);
    let threshold = KS_CRITICAL_1PCT / n.sqrt();
    Ok(KsReport { statistic, threshold, n: sorted.len(), pass: statistic < threshold })
}

/// `sup_{t in [t_min, t_max]} sqrt(t) * value(t)` over a sampled series.
pub fn sqrt_t_decay_statistic(times: &[f64], max_abs: &[f64], t_min: f64, t_max: f64) -> f64 {
    assert!(t_min >= 1.0, "decay statistic needs t_min >= 1");
    times
        .iter()
        .zip(max_abs)
        .filter(|(t, _)| (t_min..=t_max).contains(*t))
        .map(|(t, v)| t.sqrt() * v)
        .fold(0.0, f64::max)
}
