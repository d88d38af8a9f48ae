use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::detector::{expected_counts, log_likelihood, DetectorSpec, ForwardModel, LikelihoodMode, Particle};
use crate::error::{Error, Result};
use crate::geometry::{Point2, Scene};
use crate::measurement::MeasurementFrame;

use super::prior::PriorSpec;

/// Everything needed to score a particle against one frame.
#[derive(Debug, Clone, Copy)]
pub struct ObservationModel<'a> {
    pub detectors: &'a [DetectorSpec],
    pub scene: &'a Scene,
    pub model: ForwardModel,
    pub likelihood: LikelihoodMode,
    /// Add `B·Δt` to the forward model (simulated pipelines); off when the
    /// data are already background-subtracted.
    pub include_background: bool,
}

impl ObservationModel<'_> {
    pub fn expected(&self, p: &Particle) -> Result<Vec<f64>> {
        self.detectors
            .iter()
            .map(|d| expected_counts(self.model, p, d, self.scene, self.include_background))
            .collect()
    }

    pub fn log_likelihood(&self, p: &Particle, frame: &MeasurementFrame) -> Result<f64> {
        log_likelihood(&frame.counts, &self.expected(p)?, self.likelihood)
    }
}

/// Number of particles replaced for fraction `f`: `floor(f·N)`.
pub fn replace_count(f: f64, n: usize) -> usize {
    // The epsilon absorbs representation error such as 0.6 * 5 = 2.9999...
    ((f * n as f64) + 1e-9).floor() as usize
}

fn check_fraction(f: f64) -> Result<()> {
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "resample fraction must lie in (0, 1), got {f}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PosteriorSummary {
    pub mean: Particle,
    /// Covariance of `(x, y, intensity)`.
    pub covariance: [[f64; 3]; 3],
    pub map_particle: Particle,
}

impl PosteriorSummary {
    pub fn mean_position(&self) -> Point2 {
        self.mean.position()
    }
}

/// Weighted mean, covariance and arg-max of a particle set. Ties in the
/// arg-max go to the lowest index. Weights need not be normalized.
pub fn posterior_summary(particles: &[Particle], weights: &[f64]) -> PosteriorSummary {
    assert_eq!(particles.len(), weights.len());
    assert!(!particles.is_empty(), "summary of an empty particle set");
    let total: f64 = weights.iter().sum();
    let as_vec = |p: &Particle| [p.x, p.y, p.intensity];
    let mut mean = [0.0; 3];
    for (p, w) in particles.iter().zip(weights) {
        for (m, v) in mean.iter_mut().zip(as_vec(p)) {
            *m += w * v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= total);
    let mut cov = [[0.0; 3]; 3];
    for (p, w) in particles.iter().zip(weights) {
        let v = as_vec(p);
        for i in 0..3 {
            for j in 0..3 {
                cov[i][j] += w * (v[i] - mean[i]) * (v[j] - mean[j]);
            }
        }
    }
    cov.iter_mut().flatten().for_each(|c| *c /= total);
    let mut best = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > weights[best] {
            best = i;
        }
    }
    PosteriorSummary {
        mean: Particle::new(mean[0], mean[1], mean[2]),
        covariance: cov,
        map_particle: particles[best],
    }
}

/// Particles with log-weights and normalized weights.
///
/// After [`Ensemble::resample_sort_replace`] the first
/// [`retained_count`](Ensemble::retained_count) particles are the survivors,
/// in rank order, followed by the fresh draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    particles: Vec<Particle>,
    log_weights: Vec<f64>,
    norm_weights: Vec<f64>,
    retained: usize,
}

impl Ensemble {
    /// Equal weights `1/N`.
    pub fn uniform(particles: Vec<Particle>) -> Self {
        let n = particles.len();
        Self {
            log_weights: vec![0.0; n],
            norm_weights: vec![1.0 / n as f64; n],
            retained: 0,
            particles,
        }
    }

    /// Builds a normalized ensemble from explicit log-weights.
    pub fn with_log_weights(particles: Vec<Particle>, log_weights: Vec<f64>) -> Result<Self> {
        if particles.len() != log_weights.len() {
            return Err(Error::LengthMismatch {
                expected: particles.len(),
                found: log_weights.len(),
            });
        }
        let mut e = Self::uniform(particles);
        e.log_weights = log_weights;
        e.normalize_weights()?;
        Ok(e)
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn norm_weights(&self) -> &[f64] {
        &self.norm_weights
    }

    pub fn retained_count(&self) -> usize {
        self.retained
    }

    /// Survivors of the last resampling (all particles before the first).
    pub fn retained(&self) -> &[Particle] {
        if self.retained == 0 {
            &self.particles
        } else {
            &self.particles[..self.retained]
        }
    }

    /// Sets each log-weight to the frame log-likelihood of its particle.
    /// Particles are scored in parallel; each score is independent, so the
    /// result matches sequential evaluation bit for bit.
    pub fn compute_log_weights(
        &mut self,
        frame: &MeasurementFrame,
        obs: &ObservationModel<'_>,
    ) -> Result<()> {
        if frame.len() != obs.detectors.len() {
            return Err(Error::LengthMismatch {
                expected: obs.detectors.len(),
                found: frame.len(),
            });
        }
        self.log_weights = self
            .particles
            .par_iter()
            .map(|p| obs.log_likelihood(p, frame))
            .collect::<Result<Vec<_>>>()?;
        Ok(())
    }

    /// Softmax of the log-weights with max subtraction.
    pub fn normalize_weights(&mut self) -> Result<()> {
        let max = self
            .log_weights
            .iter()
            .copied()
            .filter(|l| l.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateLikelihood { step: None });
        }
        let mut w: Vec<f64> = self
            .log_weights
            .iter()
            .map(|&l| if l.is_nan() { 0.0 } else { (l - max).exp() })
            .collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|x| *x /= total);
        self.norm_weights = w;
        Ok(())
    }

    /// Particle indices from highest to lowest weight; ties keep index order.
    ///
    /// Ranks by log-weight, which orders identically to the normalized
    /// weights but survives exp() underflow.
    pub fn ranking(&self) -> Vec<usize> {
        let key = |i: usize| {
            let l = self.log_weights[i];
            if l.is_nan() {
                f64::NEG_INFINITY
            } else {
                l
            }
        };
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)));
        idx
    }

    /// Keeps the top `N − floor(f·N)` particles and replaces the rest with
    /// draws from `importance`; weights reset to `1/N`. Returns the number
    /// replaced.
    pub fn resample_sort_replace<R: Rng + ?Sized>(
        &mut self,
        f: f64,
        importance: &PriorSpec,
        rng: &mut R,
    ) -> Result<usize> {
        check_fraction(f)?;
        let n = self.len();
        let n_replace = replace_count(f, n);
        let keep = n - n_replace;
        let order = self.ranking();
        let mut next: Vec<Particle> = order[..keep].iter().map(|&i| self.particles[i]).collect();
        next.extend(importance.sample_n(n_replace, rng)?);
        *self = Self::uniform(next);
        self.retained = keep;
        Ok(n_replace)
    }

    pub fn summary(&self) -> PosteriorSummary {
        posterior_summary(&self.particles, &self.norm_weights)
    }

    /// Equal-weight summary of the survivors of the last resampling.
    pub fn retained_summary(&self) -> PosteriorSummary {
        let kept = self.retained();
        posterior_summary(kept, &vec![1.0; kept.len()])
    }

    /// Distance from the boundary particle (the highest-ranked particle
    /// outside the retained top `N − floor(f·N)`) to the unweighted mean
    /// position of the retained set.
    pub fn cluster_radius(&self, f: f64) -> Result<f64> {
        check_fraction(f)?;
        let n = self.len();
        if n < 2 {
            return Err(Error::InvalidArgument(format!(
                "cluster radius needs at least 2 particles, got {n}"
            )));
        }
        let keep = n - replace_count(f, n);
        if keep == n {
            return Err(Error::InvalidArgument(format!(
                "fraction {f} replaces no particle out of {n}; no boundary particle"
            )));
        }
        let order = self.ranking();
        let mut c = Point2::default();
        for &i in &order[..keep] {
            c = c + self.particles[i].position();
        }
        let c = c * (1.0 / keep as f64);
        Ok(self.particles[order[keep]].position().distance(c))
    }
}
