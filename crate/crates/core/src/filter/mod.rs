//! Sampling-importance-resampling filter for a static point source.
//!
//! Each step scores every particle by the log-likelihood of the current
//! frame, normalizes with a softmax, keeps the top `N − floor(f·N)`
//! particles and refills the rest from the importance distribution. The
//! state is static, so prediction is the identity.

mod ensemble;
mod kde;
mod prior;

use std::fmt;
use std::str::FromStr;

pub use ensemble::{
    posterior_summary, replace_count, Ensemble, ObservationModel, PosteriorSummary,
};
pub use kde::{
    kde_fit, kde_sample, KdeModel, LOG_INTENSITY_FLOOR_FRACTION, MAX_KDE_ATTEMPTS,
    POSITION_BANDWIDTH_FLOOR,
};
pub use prior::PriorSpec;

use crate::detector::{DetectorSpec, ForwardModel, LikelihoodMode};
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, Point2, Scene};
use crate::measurement::MeasurementFrame;
use crate::rng::{RandomStream, StreamName};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    /// Uniform over the scene bounds.
    Box,
    /// Uniform over the convex hull of the (initial) detector positions.
    Hull,
    /// Hull prior, switching replacements to a refreshed KDE of the
    /// survivors once the schedule starts.
    Kde,
}

impl FromStr for PriorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "box" => Ok(PriorKind::Box),
            "hull" => Ok(PriorKind::Hull),
            "kde" => Ok(PriorKind::Kde),
            other => Err(Error::InvalidArgument(format!(
                "unknown prior `{other}` (expected box, hull or kde)"
            ))),
        }
    }
}

impl fmt::Display for PriorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PriorKind::Box => "box",
            PriorKind::Hull => "hull",
            PriorKind::Kde => "kde",
        })
    }
}

/// When the KDE importance distribution is (re)built.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KdeSchedule {
    pub fit_after: usize,
    pub refit_every: usize,
}

impl Default for KdeSchedule {
    fn default() -> Self {
        Self {
            fit_after: 10,
            refit_every: 3,
        }
    }
}

impl KdeSchedule {
    pub fn due(&self, k: usize) -> bool {
        k >= self.fit_after && (k - self.fit_after).is_multiple_of(self.refit_every.max(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SirConfig {
    pub n_particles: usize,
    pub resample_fraction: f64,
    pub prior: PriorKind,
    pub kde: KdeSchedule,
    pub model: ForwardModel,
    pub likelihood: LikelihoodMode,
    pub include_background: bool,
    /// Keep a copy of every weighted ensemble (memory heavy for long runs).
    pub record_history: bool,
}

impl SirConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles < 2 {
            return Err(Error::InvalidArgument(format!(
                "need at least 2 particles, got {}",
                self.n_particles
            )));
        }
        if !(self.resample_fraction > 0.0 && self.resample_fraction < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "resample fraction must lie in (0, 1), got {}",
                self.resample_fraction
            )));
        }
        if self.kde.refit_every == 0 {
            return Err(Error::InvalidArgument("KDE refit interval must be at least 1".into()));
        }
        Ok(())
    }
}

/// Samples `n` i.i.d. particles from `prior` with weights `1/n`.
pub fn init_ensemble(prior: &PriorSpec, n: usize, rng: &mut RandomStream) -> Result<Ensemble> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 particles, got {n}"
        )));
    }
    Ok(Ensemble::uniform(prior.sample_n(n, rng)?))
}

/// What one filter step produced.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub k: usize,
    /// Cluster radius of the weighted ensemble before resampling.
    pub radius: f64,
    /// Posterior estimate: the weighted ensemble before resampling.
    pub summary: PosteriorSummary,
    /// Equal-weight summary of the particles that survived resampling.
    pub retained: PosteriorSummary,
    /// The weighted ensemble, when history recording is on.
    pub ensemble: Option<Ensemble>,
}

#[derive(Debug, Clone)]
pub struct SirRun {
    pub steps: Vec<StepRecord>,
    pub final_ensemble: Ensemble,
}

impl SirRun {
    pub fn r_series(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.radius).collect()
    }

    pub fn summary_series(&self) -> Vec<PosteriorSummary> {
        self.steps.iter().map(|s| s.summary.clone()).collect()
    }

    pub fn final_summary(&self) -> Option<&PosteriorSummary> {
        self.steps.last().map(|s| &s.summary)
    }
}

/// Stepwise filter state. Owns the init, resample and KDE streams derived
/// from the run seed.
#[derive(Debug, Clone)]
pub struct SirFilter {
    config: SirConfig,
    scene: Scene,
    base_prior: PriorSpec,
    importance: PriorSpec,
    ensemble: Ensemble,
    k: usize,
    resample_rng: RandomStream,
    kde_rng: RandomStream,
}

impl SirFilter {
    /// `network` is the detector layout whose convex hull bounds the hull
    /// and KDE priors.
    pub fn new(config: SirConfig, scene: &Scene, network: &[Point2], seed: u64) -> Result<Self> {
        config.validate()?;
        let base_prior = match config.prior {
            PriorKind::Box => PriorSpec::uniform_box(scene),
            PriorKind::Hull | PriorKind::Kde => {
                PriorSpec::uniform_hull(convex_hull(network)?, scene)
            }
        };
        let mut init_rng = RandomStream::named(seed, StreamName::Init);
        let ensemble = init_ensemble(&base_prior, config.n_particles, &mut init_rng)?;
        Ok(Self {
            importance: base_prior.clone(),
            base_prior,
            ensemble,
            k: 0,
            resample_rng: RandomStream::named(seed, StreamName::Resample),
            kde_rng: RandomStream::named(seed, StreamName::Kde),
            scene: scene.clone(),
            config,
        })
    }

    pub fn config(&self) -> &SirConfig {
        &self.config
    }

    pub fn ensemble(&self) -> &Ensemble {
        &self.ensemble
    }

    pub fn base_prior(&self) -> &PriorSpec {
        &self.base_prior
    }

    pub fn importance(&self) -> &PriorSpec {
        &self.importance
    }

    pub fn steps_taken(&self) -> usize {
        self.k
    }

    /// Weight, normalize, measure the cluster radius, resample, summarize.
    pub fn step(&mut self, frame: &MeasurementFrame, detectors: &[DetectorSpec]) -> Result<StepRecord> {
        self.k += 1;
        let k = self.k;
        let obs = ObservationModel {
            detectors,
            scene: &self.scene,
            model: self.config.model,
            likelihood: self.config.likelihood,
            include_background: self.config.include_background,
        };
        self.ensemble.compute_log_weights(frame, &obs)?;
        self.ensemble.normalize_weights().map_err(|e| e.at_step(k))?;

        let f = self.config.resample_fraction;
        let radius = self.ensemble.cluster_radius(f)?;
        let summary = self.ensemble.summary();
        let snapshot = self.config.record_history.then(|| self.ensemble.clone());

        let rng = if self.importance.is_kde() {
            &mut self.kde_rng
        } else {
            &mut self.resample_rng
        };
        self.ensemble.resample_sort_replace(f, &self.importance, rng)?;
        let retained = self.ensemble.retained_summary();

        if self.config.prior == PriorKind::Kde && self.config.kde.due(k) {
            let model = KdeModel::fit(self.ensemble.retained(), self.scene.intensity_range())?;
            self.importance = PriorSpec::Kde {
                model,
                bounds: *self.scene.bounds(),
                intensity: *self.scene.intensity_range(),
            };
        }

        Ok(StepRecord {
            k,
            radius,
            summary,
            retained,
            ensemble: snapshot,
        })
    }
}

/// Runs the filter over a fixed frame sequence from static detectors.
pub fn run_sir(
    config: &SirConfig,
    scene: &Scene,
    detectors: &[DetectorSpec],
    frames: &[MeasurementFrame],
    seed: u64,
) -> Result<SirRun> {
    if frames.is_empty() {
        return Err(Error::InvalidArgument("run_sir needs at least one frame".into()));
    }
    let network: Vec<Point2> = detectors.iter().map(|d| d.position).collect();
    let mut filter = SirFilter::new(config.clone(), scene, &network, seed)?;
    let steps = frames
        .iter()
        .map(|f| filter.step(f, detectors))
        .collect::<Result<Vec<_>>>()?;
    Ok(SirRun {
        steps,
        final_ensemble: filter.ensemble,
    })
}
