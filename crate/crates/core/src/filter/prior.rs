use rand::Rng;

use crate::detector::Particle;
use crate::error::Result;
use crate::geometry::{Bounds, ConvexHull, IntensityRange, Scene};

use super::kde::KdeModel;

/// Sampling distribution for initial particles and for replacements.
#[derive(Debug, Clone)]
pub enum PriorSpec {
    /// Uniform over a rectangle times a linear intensity interval.
    UniformBox {
        bounds: Bounds,
        intensity: IntensityRange,
    },
    /// Uniform over a convex hull times a linear intensity interval.
    UniformHull {
        hull: ConvexHull,
        intensity: IntensityRange,
    },
    /// Kernel density estimate truncated to the domain.
    Kde {
        model: KdeModel,
        bounds: Bounds,
        intensity: IntensityRange,
    },
}

impl PriorSpec {
    pub fn uniform_box(scene: &Scene) -> Self {
        PriorSpec::UniformBox {
            bounds: *scene.bounds(),
            intensity: *scene.intensity_range(),
        }
    }

    pub fn uniform_hull(hull: ConvexHull, scene: &Scene) -> Self {
        PriorSpec::UniformHull {
            hull,
            intensity: *scene.intensity_range(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Particle> {
        match self {
            PriorSpec::UniformBox { bounds, intensity } => {
                let p = bounds.sample(rng);
                Ok(Particle::new(p.x, p.y, intensity.sample(rng)))
            }
            PriorSpec::UniformHull { hull, intensity } => {
                let p = hull.sample_uniform(rng)?;
                Ok(Particle::new(p.x, p.y, intensity.sample(rng)))
            }
            PriorSpec::Kde {
                model,
                bounds,
                intensity,
            } => model.draw(bounds, intensity, rng),
        }
    }

    pub fn sample_n<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<Particle>> {
        (0..n).map(|_| self.sample(rng)).collect()
    }

    pub fn is_kde(&self) -> bool {
        matches!(self, PriorSpec::Kde { .. })
    }
}
