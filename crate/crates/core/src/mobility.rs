//! Moveable detectors that step toward the current posterior mean while
//! steering around buildings.

use std::fmt;
use std::str::FromStr;

use log::warn;
use rand::Rng;

use crate::detector::{DetectorSpec, Particle};
use crate::error::{Error, Result};
use crate::filter::{SirConfig, SirFilter, SirRun};
use crate::geometry::{Point2, Scene, GEOM_TOL};
use crate::measurement::simulate_observation;
use crate::rng::{RandomStream, StreamName};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MobilityStrategy {
    /// Move toward the weighted posterior mean; hull importance throughout.
    MeanPursuit,
    /// Same moves, with replacements drawn from a refreshed KDE.
    Kde,
}

impl FromStr for MobilityStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean-pursuit" => Ok(MobilityStrategy::MeanPursuit),
            "kde" => Ok(MobilityStrategy::Kde),
            other => Err(Error::InvalidArgument(format!(
                "unknown mobility strategy `{other}` (expected mean-pursuit or kde)"
            ))),
        }
    }
}

impl fmt::Display for MobilityStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MobilityStrategy::MeanPursuit => "mean-pursuit",
            MobilityStrategy::Kde => "kde",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoveConfig {
    /// Meters per move.
    pub step_length: f64,
    /// Frames between moves.
    pub cadence: usize,
    /// First frame after which detectors move.
    pub first_move: usize,
    pub max_random_tries: usize,
}

impl Default for MoveConfig {
    fn default() -> Self {
        Self {
            step_length: 1.0,
            cadence: 1,
            first_move: 1,
            max_random_tries: 64,
        }
    }
}

impl MoveConfig {
    /// Default schedule for a strategy. The KDE variant moves less often and
    /// starts later, once the density has been fitted.
    pub fn for_strategy(strategy: MobilityStrategy) -> Self {
        match strategy {
            MobilityStrategy::MeanPursuit => Self::default(),
            MobilityStrategy::Kde => Self {
                cadence: 3,
                first_move: 10,
                ..Self::default()
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_length.is_finite() && self.step_length > 0.0) {
            return Err(Error::config("mobility.step_length", "must be positive"));
        }
        if self.cadence == 0 {
            return Err(Error::config("mobility.cadence", "must be at least 1"));
        }
        if self.first_move == 0 {
            return Err(Error::config("mobility.first_move", "must be at least 1"));
        }
        Ok(())
    }

    /// Whether detectors move after frame `k`.
    pub fn due(&self, k: usize) -> bool {
        k >= self.first_move && (k - self.first_move).is_multiple_of(self.cadence)
    }
}

fn free_move(scene: &Scene, from: Point2, to: Point2) -> bool {
    scene.bounds().contains(to) && !scene.segment_blocked(from, to)
}

/// One move of one detector toward `target`.
///
/// Tries the straight step, then the coordinate direction that ends closer
/// to the target, then the other coordinate direction, then up to
/// `max_random_tries` uniformly random headings. A detector that finds no
/// free heading stays put.
pub fn move_detector<R: Rng + ?Sized>(
    det: &DetectorSpec,
    target: Point2,
    scene: &Scene,
    cfg: &MoveConfig,
    rng: &mut R,
) -> DetectorSpec {
    let pos = det.position;
    let delta = target - pos;
    let dist = delta.norm();
    if dist <= GEOM_TOL {
        return det.clone();
    }
    let moved = |p: Point2| DetectorSpec {
        position: p,
        ..det.clone()
    };

    let direct = pos + delta * (cfg.step_length.min(dist) / dist);
    if free_move(scene, pos, direct) {
        return moved(direct);
    }

    let sx = if delta.x < 0.0 { -1.0 } else { 1.0 };
    let sy = if delta.y < 0.0 { -1.0 } else { 1.0 };
    let along_x = pos + Point2::new(sx * cfg.step_length, 0.0);
    let along_y = pos + Point2::new(0.0, sy * cfg.step_length);
    let (first, second) = if along_y.distance(target) < along_x.distance(target) {
        (along_y, along_x)
    } else {
        (along_x, along_y)
    };
    for c in [first, second] {
        if free_move(scene, pos, c) {
            return moved(c);
        }
    }

    for _ in 0..cfg.max_random_tries {
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let c = pos + Point2::new(theta.cos(), theta.sin()) * cfg.step_length;
        if free_move(scene, pos, c) {
            return moved(c);
        }
    }
    warn!(
        "detector {} at ({:.2}, {:.2}) found no free heading; staying put",
        det.id, pos.x, pos.y
    );
    det.clone()
}

#[derive(Debug, Clone)]
pub struct MobileRun {
    pub run: SirRun,
    /// Detector positions used for each frame.
    pub detector_history: Vec<Vec<Point2>>,
}

/// Simulates frames online from the current detector positions, filters
/// them, and moves every detector toward the weighted posterior mean after
/// each due frame.
///
/// Streams match [`crate::filter::run_sir`] fed with
/// [`crate::measurement::simulate_frames`] on the measurement stream, so a
/// run with no due moves reproduces the static run exactly.
pub fn run_sir_mobile(
    config: &SirConfig,
    scene: &Scene,
    detectors: &[DetectorSpec],
    source: &Particle,
    n_frames: usize,
    moves: &MoveConfig,
    seed: u64,
) -> Result<MobileRun> {
    moves.validate()?;
    if n_frames == 0 {
        return Err(Error::InvalidArgument("need at least one frame".into()));
    }
    let mut dets = detectors.to_vec();
    if let Some(d) = dets.iter().find(|d| scene.building_at(d.position).is_some()) {
        return Err(Error::config(
            format!("detectors.{}", d.id),
            "detector starts inside a building",
        ));
    }
    let network: Vec<Point2> = dets.iter().map(|d| d.position).collect();
    let mut filter = SirFilter::new(config.clone(), scene, &network, seed)?;
    let mut measurement_rng = RandomStream::named(seed, StreamName::Measurement);
    let mut mobility_rng = RandomStream::named(seed, StreamName::Mobility);

    let mut steps = Vec::with_capacity(n_frames);
    let mut history = Vec::with_capacity(n_frames);
    for k in 1..=n_frames {
        let frame = simulate_observation(source, &dets, scene, config.model, k, &mut measurement_rng)?;
        history.push(dets.iter().map(|d| d.position).collect());
        let record = filter.step(&frame, &dets)?;
        if moves.due(k) {
            let target = record.summary.mean_position();
            for d in dets.iter_mut() {
                *d = move_detector(d, target, scene, moves, &mut mobility_rng);
            }
        }
        steps.push(record);
    }
    Ok(MobileRun {
        run: SirRun {
            steps,
            final_ensemble: filter.ensemble().clone(),
        },
        detector_history: history,
    })
}
