//! Bayesian localization of a static radiation source with a
//! sampling-importance-resampling particle filter.
//!
//! The crate covers the whole pipeline: scene geometry with attenuating
//! buildings, detector response models, Poisson count simulation, the
//! filter itself, moveable detectors, convergence diagnostics, and
//! scenario/count/result files.

pub mod detector;
pub mod diagnostics;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod io;
pub mod measurement;
pub mod mobility;
pub mod rng;

pub use detector::{DetectorSpec, ForwardModel, LikelihoodMode, Particle};
pub use error::{Error, ErrorCategory, Result};
pub use filter::{run_sir, PriorKind, SirConfig, SirFilter, SirRun};
pub use geometry::{BuildingPolygon, Bounds, IntensityRange, Point2, Scene};
pub use measurement::MeasurementFrame;
pub use rng::{RandomStream, StreamName};
