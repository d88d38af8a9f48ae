//! Empirical convergence checks and localization scoring.

use rayon::prelude::*;
use serde::Serialize;

use crate::detector::{DetectorSpec, Particle};
use crate::error::{Error, Result};
use crate::filter::{run_sir, Ensemble, PosteriorSummary, SirConfig};
use crate::geometry::Scene;
use crate::measurement::MeasurementFrame;

/// Distance in the plane between the posterior mean and the truth.
pub fn localization_error(summary: &PosteriorSummary, truth: &Particle) -> f64 {
    summary.mean_position().distance(truth.position())
}

/// Fraction of consecutive pairs with `r[k+1] <= r[k]` over the trailing
/// `tail_fraction` of the series.
pub fn radius_monotonicity_stat(r_series: &[f64], tail_fraction: f64) -> Result<f64> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "tail fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    let len = ((r_series.len() as f64) * tail_fraction).ceil() as usize;
    let tail = &r_series[r_series.len() - len.min(r_series.len())..];
    if tail.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "need at least 2 radii in the tail, got {}",
            tail.len()
        )));
    }
    if tail.iter().any(|r| !r.is_finite()) {
        return Err(Error::NonFinite("cluster radius"));
    }
    let ok = tail.windows(2).filter(|w| w[1] <= w[0]).count();
    Ok(ok as f64 / (tail.len() - 1) as f64)
}

/// Everything a filter run needs apart from particle count and seed. The
/// frames are fixed so that all runs target the same posterior.
#[derive(Debug, Clone)]
pub struct MseSetup {
    pub config: SirConfig,
    pub scene: Scene,
    pub detectors: Vec<DetectorSpec>,
    pub frames: Vec<MeasurementFrame>,
    pub truth: Option<Particle>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub n_values: Vec<usize>,
    pub mse_values: Vec<f64>,
    /// Least-squares slope of ln MSE against ln N. Absent when any MSE is
    /// zero (for instance a constant test function).
    pub loglog_slope: Option<f64>,
    pub reference_n: usize,
    pub seeds: usize,
    pub reference_value: f64,
    /// Monotone fraction of the reference run's radius series (tail 0.5).
    pub radius_monotone_fraction: f64,
    /// Localization error of the reference run, when the truth is known.
    pub final_error_m: Option<f64>,
}

/// Equal-weight average of `phi` over the post-resampling ensemble.
pub fn ensemble_expectation<F>(ensemble: &Ensemble, phi: &F) -> Result<f64>
where
    F: Fn(&Particle) -> f64 + Sync,
{
    let mut sum = 0.0;
    for p in ensemble.particles() {
        let v = phi(p);
        if !v.is_finite() {
            return Err(Error::NonFinite("test function value"));
        }
        sum += v;
    }
    Ok(sum / ensemble.len() as f64)
}

/// Ordinary least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::DegenerateInput("slope needs two points".into()));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("slope needs distinct abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Self-convergence study of the filter's estimate of `<π_k, φ>`.
///
/// The unreachable exact posterior is stood in for by one run with
/// `reference_n` particles on seed `base_seed`. Each tested `N` is run on
/// seeds `base_seed + 1 ..= base_seed + seeds`, and its mean squared
/// deviation from the reference is reported.
pub fn mse_slope_experiment<F>(
    setup: &MseSetup,
    phi: &F,
    n_values: &[usize],
    reference_n: usize,
    seeds: usize,
    base_seed: u64,
) -> Result<ConvergenceReport>
where
    F: Fn(&Particle) -> f64 + Sync,
{
    if n_values.is_empty() || seeds == 0 {
        return Err(Error::InvalidArgument(
            "need at least one particle count and one seed".into(),
        ));
    }
    if n_values.iter().any(|&n| n >= reference_n) {
        return Err(Error::InvalidArgument(format!(
            "reference_n ({reference_n}) must exceed every tested N"
        )));
    }
    let run_with = |n: usize, seed: u64| {
        let config = SirConfig {
            n_particles: n,
            record_history: false,
            ..setup.config.clone()
        };
        run_sir(&config, &setup.scene, &setup.detectors, &setup.frames, seed)
    };

    let reference = run_with(reference_n, base_seed)?;
    let reference_value = ensemble_expectation(&reference.final_ensemble, phi)?;
    let radius_monotone_fraction = radius_monotonicity_stat(&reference.r_series(), 0.5)?;
    let final_error_m = match (&setup.truth, reference.final_summary()) {
        (Some(t), Some(s)) => Some(localization_error(s, t)),
        _ => None,
    };

    let jobs: Vec<(usize, u64)> = n_values
        .iter()
        .flat_map(|&n| (1..=seeds as u64).map(move |s| (n, base_seed + s)))
        .collect();
    let deviations = jobs
        .par_iter()
        .map(|&(n, seed)| {
            let run = run_with(n, seed)?;
            Ok((ensemble_expectation(&run.final_ensemble, phi)? - reference_value).powi(2))
        })
        .collect::<Result<Vec<f64>>>()?;
    let mse_values: Vec<f64> = deviations
        .chunks(seeds)
        .map(|c| c.iter().sum::<f64>() / seeds as f64)
        .collect();

    let loglog_slope = if mse_values.iter().all(|&m| m > 0.0) && n_values.len() >= 2 {
        let lx: Vec<f64> = n_values.iter().map(|&n| (n as f64).ln()).collect();
        let ly: Vec<f64> = mse_values.iter().map(|m| m.ln()).collect();
        Some(ols_slope(&lx, &ly)?)
    } else {
        None
    };

    Ok(ConvergenceReport {
        n_values: n_values.to_vec(),
        mse_values,
        loglog_slope,
        reference_n,
        seeds,
        reference_value,
        radius_monotone_fraction,
        final_error_m,
    })
}
