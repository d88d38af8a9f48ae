//! Synthetic Poisson observations and background handling.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::detector::{expected_counts, DetectorSpec, ForwardModel, Particle};
use crate::error::{Error, Result};
use crate::geometry::Scene;
use crate::rng::{RandomStream, StreamName};

/// One time step of counts, ordered like the detector list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeasurementFrame {
    /// 1-based step index.
    pub time_index: usize,
    pub counts: Vec<u64>,
}

impl MeasurementFrame {
    pub fn new(time_index: usize, counts: Vec<u64>) -> Self {
        Self { time_index, counts }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Exact Poisson draw. `rand_distr` uses inversion for small means and a
/// transformed-rejection sampler for large ones; a zero mean yields zero.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> Result<u64> {
    if !mean.is_finite() || mean < 0.0 {
        return Err(Error::NonFinite("poisson mean"));
    }
    if mean == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(mean).map_err(|e| Error::InvalidArgument(format!("poisson({mean}): {e}")))?;
    Ok(dist.sample(rng) as u64)
}

/// Draws `y_j ~ Poisson(u_j(source) + B_j Δt_j)` independently per detector.
pub fn simulate_observation<R: Rng + ?Sized>(
    source: &Particle,
    detectors: &[DetectorSpec],
    scene: &Scene,
    model: ForwardModel,
    time_index: usize,
    rng: &mut R,
) -> Result<MeasurementFrame> {
    let counts = detectors
        .iter()
        .map(|d| {
            let mean = expected_counts(model, source, d, scene, true)?;
            poisson(mean, rng)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementFrame::new(time_index, counts))
}

/// `n` consecutive frames from static detectors, indexed from 1.
pub fn simulate_frames<R: Rng + ?Sized>(
    source: &Particle,
    detectors: &[DetectorSpec],
    scene: &Scene,
    model: ForwardModel,
    n: usize,
    rng: &mut R,
) -> Result<Vec<MeasurementFrame>> {
    (1..=n)
        .map(|k| simulate_observation(source, detectors, scene, model, k, rng))
        .collect()
}

/// Subtracts a fresh Poisson background draw from each count, clamping
/// negative results to zero.
pub fn subtract_background<R: Rng + ?Sized>(
    raw: &MeasurementFrame,
    bg_means: &[f64],
    rng: &mut R,
) -> Result<MeasurementFrame> {
    if raw.len() != bg_means.len() {
        return Err(Error::LengthMismatch {
            expected: raw.len(),
            found: bg_means.len(),
        });
    }
    let counts = raw
        .counts
        .iter()
        .zip(bg_means)
        .map(|(&y, &m)| Ok(y.saturating_sub(poisson(m, rng)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementFrame::new(raw.time_index, counts))
}

/// Independent frames with `counts_j ~ Poisson(base_means[j])`.
pub fn augment_measurements<R: Rng + ?Sized>(
    base_means: &[f64],
    n_frames: usize,
    rng: &mut R,
) -> Result<Vec<MeasurementFrame>> {
    if n_frames == 0 {
        return Err(Error::InvalidArgument("n_frames must be at least 1".into()));
    }
    if let Some(m) = base_means.iter().find(|m| !(m.is_finite() && **m >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "augmentation mean must be finite and non-negative, got {m}"
        )));
    }
    (1..=n_frames)
        .map(|k| {
            let counts = base_means
                .iter()
                .map(|&m| poisson(m, rng))
                .collect::<Result<Vec<_>>>()?;
            Ok(MeasurementFrame::new(k, counts))
        })
        .collect()
}

/// Per-detector time average of a set of frames.
pub fn mean_counts(frames: &[MeasurementFrame]) -> Vec<f64> {
    let Some(first) = frames.first() else {
        return Vec::new();
    };
    let mut sums = vec![0.0; first.len()];
    for f in frames {
        for (s, &c) in sums.iter_mut().zip(&f.counts) {
            *s += c as f64;
        }
    }
    sums.iter().map(|s| s / frames.len() as f64).collect()
}

/// Background-only frames, `Poisson(B_j Δt_j)` per detector, indexed from 1.
pub fn simulate_background<R: Rng + ?Sized>(
    detectors: &[DetectorSpec],
    n: usize,
    rng: &mut R,
) -> Result<Vec<MeasurementFrame>> {
    (1..=n)
        .map(|k| {
            let counts = detectors
                .iter()
                .map(|d| poisson(d.background_mean(), rng))
                .collect::<Result<Vec<_>>>()?;
            Ok(MeasurementFrame::new(k, counts))
        })
        .collect()
}

/// Turns recorded frames into filter input: subtracts a Poisson background
/// draw from every count when `bg_means` is given, then, when
/// `augment_frames` is given, replaces the record by that many frames drawn
/// around its per-detector mean. Uses the background and augmentation
/// streams of `seed`.
pub fn prepare_replay(
    raw: &[MeasurementFrame],
    bg_means: Option<&[f64]>,
    augment_frames: Option<usize>,
    seed: u64,
) -> Result<Vec<MeasurementFrame>> {
    if raw.is_empty() {
        return Err(Error::DegenerateInput("no frames to replay".into()));
    }
    let frames = match bg_means {
        Some(m) => {
            let mut rng = RandomStream::named(seed, StreamName::Background);
            raw.iter()
                .map(|f| subtract_background(f, m, &mut rng))
                .collect::<Result<Vec<_>>>()?
        }
        None => raw.to_vec(),
    };
    match augment_frames {
        Some(n) => {
            let mut rng = RandomStream::named(seed, StreamName::Augment);
            augment_measurements(&mean_counts(&frames), n, &mut rng)
        }
        None => Ok(frames),
    }
}
