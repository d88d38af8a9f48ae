//! Gaussian product-kernel density estimate over `(x, y, ln I)`.
//!
//! Intensity is handled in log space so that kernels centred on weak
//! sources never put mass below zero. Bandwidths follow Scott's rule,
//! `h = σ̂ · n^(-1/7)` for three dimensions, with floors so that a collapsed
//! particle cloud still yields a proper density.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::detector::Particle;
use crate::error::{Error, Result};
use crate::geometry::{Bounds, IntensityRange, Point2};

/// Minimum positional bandwidth, meters.
pub const POSITION_BANDWIDTH_FLOOR: f64 = 0.1;
/// Minimum log-intensity bandwidth as a fraction of `ln(I_max / I_min)`.
pub const LOG_INTENSITY_FLOOR_FRACTION: f64 = 0.01;
/// Consecutive rejections tolerated for a single draw (99.9% rejection).
pub const MAX_KDE_ATTEMPTS: usize = 1000;

const DIMS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct KdeModel {
    support: Vec<[f64; DIMS]>,
    bandwidths: [f64; DIMS],
}

impl KdeModel {
    pub fn fit(particles: &[Particle], intensity: &IntensityRange) -> Result<Self> {
        if particles.is_empty() {
            return Err(Error::DegenerateInput("KDE needs at least one particle".into()));
        }
        if particles.iter().any(|p| !p.is_finite() || p.intensity <= 0.0) {
            return Err(Error::NonFinite("KDE support particle"));
        }
        let support: Vec<[f64; DIMS]> = particles
            .iter()
            .map(|p| [p.x, p.y, p.intensity.ln()])
            .collect();
        let n = support.len() as f64;
        let scott = n.powf(-1.0 / (DIMS as f64 + 4.0));
        let floors = [
            POSITION_BANDWIDTH_FLOOR,
            POSITION_BANDWIDTH_FLOOR,
            LOG_INTENSITY_FLOOR_FRACTION * (intensity.max / intensity.min).ln(),
        ];
        let mut bandwidths = [0.0; DIMS];
        for d in 0..DIMS {
            let sd = if support.len() > 1 {
                let mean = support.iter().map(|s| s[d]).sum::<f64>() / n;
                (support.iter().map(|s| (s[d] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            bandwidths[d] = (sd * scott).max(floors[d]);
        }
        Ok(Self {
            support,
            bandwidths,
        })
    }

    /// Bandwidths in `(m, m, ln Bq)`.
    pub fn bandwidths(&self) -> [f64; DIMS] {
        self.bandwidths
    }

    /// Support points in `(x, y, ln I)`.
    pub fn support(&self) -> &[[f64; DIMS]] {
        &self.support
    }

    /// One draw truncated to `bounds × intensity` by rejection.
    pub fn draw<R: Rng + ?Sized>(
        &self,
        bounds: &Bounds,
        intensity: &IntensityRange,
        rng: &mut R,
    ) -> Result<Particle> {
        for _ in 0..MAX_KDE_ATTEMPTS {
            let c = self.support[rng.random_range(0..self.support.len())];
            let mut z = [0.0; DIMS];
            for d in 0..DIMS {
                let e: f64 = rng.sample(StandardNormal);
                z[d] = c[d] + self.bandwidths[d] * e;
            }
            let i = z[2].exp();
            if bounds.contains(Point2::new(z[0], z[1])) && intensity.contains(i) {
                return Ok(Particle::new(z[0], z[1], i));
            }
        }
        Err(Error::KdeMassOutside {
            accepted: 0,
            attempts: MAX_KDE_ATTEMPTS,
        })
    }

    pub fn sample<R: Rng + ?Sized>(
        &self,
        n: usize,
        bounds: &Bounds,
        intensity: &IntensityRange,
        rng: &mut R,
    ) -> Result<Vec<Particle>> {
        if n == 0 {
            return Err(Error::InvalidArgument("KDE sample size must be at least 1".into()));
        }
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            match self.draw(bounds, intensity, rng) {
                Ok(p) => out.push(p),
                Err(Error::KdeMassOutside { attempts, .. }) => {
                    return Err(Error::KdeMassOutside {
                        accepted: out.len(),
                        attempts: out.len() + attempts,
                    })
                }
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }
}

pub fn kde_fit(particles: &[Particle], intensity: &IntensityRange) -> Result<KdeModel> {
    KdeModel::fit(particles, intensity)
}

pub fn kde_sample<R: Rng + ?Sized>(
    kde: &KdeModel,
    n: usize,
    bounds: &Bounds,
    intensity: &IntensityRange,
    rng: &mut R,
) -> Result<Vec<Particle>> {
    kde.sample(n, bounds, intensity, rng)
}
