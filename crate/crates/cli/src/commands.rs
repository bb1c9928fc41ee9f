use std::f64::consts::TAU;

use anyhow::Result;
use oscchain::experiment::{par_replicas, ExperimentConfig};
use oscchain::lattice::{Boundary, DEFAULT_SCAN_POINTS};
use oscchain::simulator::{decompose_epsilon, simulate, stationary_trajectory};
use oscchain::stationary::{
    energy_limit_alpha, predicted_decay_rate, resolving_points, stationary_covariance, transient_mean_energy,
    variance_decay_fit, DecayEstimate, StationaryCovariance,
};
use oscchain::stats::{ensemble_mean, ks_distance, sqrt_t_decay_statistic, variance_profile};
use oscchain::verify::{run_all, VerifyOptions};
use oscchain::{ChainState, Error};
use serde_json::json;

use crate::output::{num, OutDir};

pub const DISPERSION_POINTS: usize = 2048;

pub enum Status {
    Ok,
    AcceptanceFailed,
}

pub fn dispersion(cfg: &ExperimentConfig, out: &OutDir) -> Result<Status> {
    let set = cfg.kernel.spectral_set(DEFAULT_SCAN_POINTS)?;
    let rows: String = (0..DISPERSION_POINTS)
        .map(|j| {
            let lambda = TAU * j as f64 / DISPERSION_POINTS as f64;
            format!("{},{}\n", num(lambda), num(cfg.kernel.omega_squared(lambda)))
        })
        .collect();
    out.csv("dispersion.csv", "lambda,omega_squared", &rows)?;
    let (lo, hi) = set.frequency_band();
    out.json(
        "spectral_set.json",
        &json!({"e1": set.e1, "e2": set.e2, "argmin": set.argmin, "argmax": set.argmax, "frequency_band": [lo, hi]}),
    )?;
    println!("spectral set [{}, {}]", set.e1, set.e2);
    Ok(Status::Ok)
}

pub fn gap_check(cfg: &ExperimentConfig, out: &OutDir) -> Result<Status> {
    let set = cfg.kernel.spectral_set(DEFAULT_SCAN_POINTS)?;
    let report = cfg.measure.check_gap(&set);
    out.json(
        "gap.json",
        &json!({"e1": set.e1, "e2": set.e2, "frequency_band": set.frequency_band(), "margin": report.margin, "pass": report.pass}),
    )?;
    println!("gap margin {} ({})", report.margin, if report.pass { "pass" } else { "fail" });
    if !report.pass {
        return Err(Error::GapViolation { margin: report.margin }.into());
    }
    Ok(Status::Ok)
}

pub fn alpha(cfg: &ExperimentConfig, out: &OutDir) -> Result<Status> {
    let set = cfg.kernel.spectral_set(DEFAULT_SCAN_POINTS)?;
    let margin = cfg.measure.check_gap(&set).margin;
    let limit = energy_limit_alpha(&cfg.kernel, &cfg.measure, cfg.n_lambda)?;
    out.json(
        "alpha.json",
        &json!({"alpha": limit.alpha, "error_estimate": limit.error_estimate, "margin": margin}),
    )?;
    println!("alpha = {} (error estimate {})", limit.alpha, limit.error_estimate);
    Ok(Status::Ok)
}

/// Decay envelope; a zero-radius kernel keeps all variance on the forcing
/// site, so its rate is zero.
fn decay(cfg: &ExperimentConfig, cov: &StationaryCovariance) -> Result<(DecayEstimate, f64)> {
    if cfg.kernel.radius() == 0 {
        let estimate = DecayEstimate { rate: 0.0, c1: cov.var_q(0), c2: cov.var_p(0), rate_p: 0.0 };
        return Ok((estimate, 0.0));
    }
    Ok((variance_decay_fit(cov, 0)?, predicted_decay_rate(&cfg.kernel, &cfg.measure)?))
}

pub fn covariance(cfg: &ExperimentConfig, out: &OutDir) -> Result<Status> {
    let cov = stationary_covariance(&cfg.kernel, &cfg.measure, 0, (-cfg.window, cfg.window))?;
    let (fit, predicted) = decay(cfg, &cov)?;
    let rows: String = cov
        .sites()
        .map(|k| {
            let bound = if fit.rate == 0.0 && k != 0 { 0.0 } else { fit.bound(k.unsigned_abs()).0 };
            format!("{k},{},{},{}\n", num(cov.var_q(k)), num(cov.var_p(k)), num(bound))
        })
        .collect();
    out.csv("covariance.csv", "k,var_q,var_p,bound", &rows)?;
    out.json(
        "decay.json",
        &json!({"r": fit.rate, "c1": fit.c1, "c2": fit.c2, "r_p": fit.rate_p, "predicted_r": predicted}),
    )?;
    println!("decay rate {} (predicted {})", fit.rate, predicted);
    Ok(Status::Ok)
}

struct ReplicaRun {
    energies: Vec<f64>,
    last: ChainState,
    /// `(sup sqrt(t)|eps| on the full window, on the early window, eps energy drift)`
    epsilon: Option<(f64, f64, f64)>,
}

pub fn simulate_ensemble(cfg: &ExperimentConfig, out: &OutDir, workers: Option<usize>) -> Result<Status> {
    let set = cfg.kernel.spectral_set(DEFAULT_SCAN_POINTS)?;
    let gap = cfg.measure.check_gap(&set);
    if !gap.pass {
        return Err(Error::GapViolation { margin: gap.margin }.into());
    }
    let sim = cfg.sim_config();
    let times = sim.sample_times.clone();
    let h0 = cfg.initial.materialize(cfg.n_sites)?.energy(&cfg.kernel, cfg.boundary);
    let all_sites: Vec<usize> = (0..cfg.n_sites).collect();
    let t_lo = times.iter().copied().find(|t| *t >= 1.0);
    let t_hi = times.last().copied().unwrap_or(0.0);
    let t_split = t_lo.map(|lo| lo + (t_hi - lo) / 10.0);
    let with_epsilon = cfg.boundary == Boundary::Periodic && t_lo.is_some();

    let runs = par_replicas(cfg.replicas, workers, |r| {
        let force = cfg.realization(r)?;
        let traj = simulate(&sim, &cfg.kernel, &force)?;
        let energies = traj.energy_trace(&cfg.kernel).points.iter().map(|p| p.1).collect();
        let epsilon = if with_epsilon {
            let eta = stationary_trajectory(&cfg.kernel, &force, &sim)?;
            let eps = decompose_epsilon(&traj, &eta)?;
            let envelope = eps.max_abs(&all_sites);
            let (lo, split) = (t_lo.unwrap_or(1.0), t_split.unwrap_or(1.0));
            Some((
                sqrt_t_decay_statistic(&times, &envelope, lo, t_hi),
                sqrt_t_decay_statistic(&times, &envelope, lo, split),
                eps.energy_trace(&cfg.kernel, cfg.boundary).drift(),
            ))
        } else {
            None
        };
        let last = traj.states.last().cloned().unwrap_or_else(|| ChainState::zeros(cfg.n_sites));
        Ok(ReplicaRun { energies, last, epsilon })
    })?;

    let mut rows = String::new();
    for (i, &t) in times.iter().enumerate() {
        let values: Vec<f64> = runs.iter().map(|r| r.energies[i]).collect();
        let est = ensemble_mean(&values)?;
        let predicted = transient_mean_energy(&cfg.kernel, &cfg.measure, t, resolving_points(&cfg.kernel, t))? + h0;
        rows.push_str(&format!("{},{},{},{}\n", num(t), num(est.mean), num(est.stderr), num(predicted)));
    }
    out.csv("energy_trace.csv", "t,mean_energy,stderr,predicted", &rows)?;

    let window = cfg.window_sites(cfg.profile_window);
    let labels: Vec<i64> = window.iter().map(|w| w.0).collect();
    let sites: Vec<usize> = window.iter().map(|w| w.1).collect();
    let finals: Vec<ChainState> = runs.iter().map(|r| r.last.clone()).collect();
    let profile = variance_profile(&finals, &sites)?;
    let k_max = labels.iter().map(|k| k.abs()).max().unwrap_or(0);
    let cov = stationary_covariance(&cfg.kernel, &cfg.measure, 0, (-k_max, k_max))?;
    let predictions: Vec<(f64, f64)> = labels.iter().map(|&k| (cov.var_q(k), cov.var_p(k))).collect();
    out.csv(
        "variance_profile.csv",
        "k,var_q,stderr_q,var_p,stderr_p,predicted_q,predicted_p",
        &profile.to_csv_rows(&labels, &predictions),
    )?;

    let samples: Vec<f64> = finals.iter().map(|s| s.q[cfg.forcing_site]).collect();
    let ks = ks_distance(&samples, cov.var_q(0))?;
    out.json("ks.json", &json!({"t": t_hi, "variance": cov.var_q(0), "report": ks}))?;

    let epsilon = if with_epsilon {
        let stats: Vec<(f64, f64, f64)> = runs.iter().filter_map(|r| r.epsilon).collect();
        let ratios: Vec<f64> = stats.iter().map(|s| s.0 / s.1).collect();
        json!({
            "available": true,
            "t_min": t_lo,
            "t_split": t_split,
            "t_max": t_hi,
            "max_statistic": stats.iter().map(|s| s.0).fold(0.0, f64::max),
            "max_ratio": ratios.iter().copied().fold(0.0, f64::max),
            "mean_ratio": ratios.iter().sum::<f64>() / ratios.len() as f64,
            "max_energy_drift": stats.iter().map(|s| s.2).fold(0.0, f64::max),
        })
    } else {
        json!({"available": false, "reason": "needs a periodic lattice and sample times >= 1"})
    };
    out.json("epsilon_stat.json", &epsilon)?;
    println!("{} replicas, KS {} (threshold {})", cfg.replicas, ks.statistic, ks.threshold);
    Ok(Status::Ok)
}

pub fn verify(cfg: Option<&ExperimentConfig>, seed: u64, workers: Option<usize>, out: &OutDir) -> Result<Status> {
    let reports = run_all(&VerifyOptions { seed, workers });
    for r in &reports {
        println!("{}", r.line());
    }
    let config_check = match cfg {
        Some(cfg) => match cfg.kernel.spectral_set(DEFAULT_SCAN_POINTS) {
            Ok(set) => {
                let gap = cfg.measure.check_gap(&set);
                json!({"margin": gap.margin, "pass": gap.pass, "expected_failure": !gap.pass})
            }
            Err(e) => json!({"error": e.to_string(), "expected_failure": true}),
        },
        None => serde_json::Value::Null,
    };
    let failed: Vec<u8> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    out.json(
        "verify.json",
        &json!({"passed": failed.is_empty(), "failed": failed, "criteria": reports, "config_check": config_check}),
    )?;
    Ok(if failed.is_empty() { Status::Ok } else { Status::AcceptanceFailed })
}
