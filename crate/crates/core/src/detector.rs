//! Forward models from a source hypothesis to expected detector counts, and
//! the per-frame likelihood kernels that score them.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point2, Scene};

/// Source-detector distances below this are clamped (meters).
pub const DISTANCE_FLOOR: f64 = 0.1;

/// Expected counts are floored here inside `ln(u)` (counts).
pub const EXPECTED_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub id: String,
    pub position: Point2,
    /// Facial area, m².
    pub area: f64,
    /// Intrinsic efficiency in (0, 1].
    pub efficiency: f64,
    /// Dwell (integration) time, s.
    pub dwell: f64,
    /// Background rate, counts/s.
    pub background_rate: f64,
}

impl DetectorSpec {
    pub fn new(
        id: impl Into<String>,
        position: Point2,
        area: f64,
        efficiency: f64,
        dwell: f64,
        background_rate: f64,
    ) -> Result<Self> {
        let d = Self {
            id: id.into(),
            position,
            area,
            efficiency,
            dwell,
            background_rate,
        };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.position.is_finite()
            || ![self.area, self.efficiency, self.dwell, self.background_rate]
                .iter()
                .all(|v| v.is_finite())
        {
            return Err(Error::NonFinite("detector parameters"));
        }
        let field = if self.area <= 0.0 {
            "area"
        } else if self.efficiency <= 0.0 || self.efficiency > 1.0 {
            "efficiency"
        } else if self.dwell <= 0.0 {
            "dwell"
        } else if self.background_rate < 0.0 {
            "background_rate"
        } else {
            return Ok(());
        };
        Err(Error::config(
            format!("detectors.{}.{field}", self.id),
            "out of range",
        ))
    }

    /// Mean background counts per frame, `B·Δt`.
    pub fn background_mean(&self) -> f64 {
        self.background_rate * self.dwell
    }

    /// `ε·A·Δt / 4π`, the distance-independent part of the response.
    fn geometric_gain(&self) -> f64 {
        self.efficiency * self.area * self.dwell / (4.0 * PI)
    }
}

/// A point-source hypothesis `(x, y, I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub x: f64,
    pub y: f64,
    /// Activity in Bq.
    pub intensity: f64,
}

impl Particle {
    pub const fn new(x: f64, y: f64, intensity: f64) -> Self {
        Self { x, y, intensity }
    }

    pub fn position(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.intensity.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForwardModel {
    /// Free-field inverse-square ("quadratic attenuation").
    Qa,
    /// Inverse-square times building attenuation along the straight ray.
    Rt,
}

impl FromStr for ForwardModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "qa" => Ok(ForwardModel::Qa),
            "rt" => Ok(ForwardModel::Rt),
            other => Err(Error::InvalidArgument(format!(
                "unknown model `{other}` (expected qa or rt)"
            ))),
        }
    }
}

impl fmt::Display for ForwardModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ForwardModel::Qa => "qa",
            ForwardModel::Rt => "rt",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LikelihoodMode {
    Poisson,
    /// Homoscedastic Gaussian with standard deviation `sigma` counts.
    Gaussian { sigma: f64 },
}

impl LikelihoodMode {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "gaussian sigma must be positive, got {sigma}"
            )));
        }
        Ok(LikelihoodMode::Gaussian { sigma })
    }
}

/// Parses `poisson` or `gaussian:SIGMA`.
impl FromStr for LikelihoodMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("poisson") {
            return Ok(LikelihoodMode::Poisson);
        }
        if let Some(rest) = s.strip_prefix("gaussian:") {
            let sigma = rest.trim().parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("bad gaussian sigma `{rest}`"))
            })?;
            return LikelihoodMode::gaussian(sigma);
        }
        Err(Error::InvalidArgument(format!(
            "unknown likelihood `{s}` (expected poisson or gaussian:SIGMA)"
        )))
    }
}

impl fmt::Display for LikelihoodMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LikelihoodMode::Poisson => f.write_str("poisson"),
            LikelihoodMode::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
        }
    }
}

fn check_inputs(p: &Particle, det: &DetectorSpec) -> Result<()> {
    if !p.is_finite() || !det.position.is_finite() {
        return Err(Error::NonFinite("source or detector position"));
    }
    Ok(())
}

/// Free-field expected source counts `I·ε·A·Δt / (4π d²)`, with `d`
/// clamped to [`DISTANCE_FLOOR`].
pub fn qa_response(p: &Particle, det: &DetectorSpec) -> Result<f64> {
    check_inputs(p, det)?;
    let d2 = p
        .position()
        .distance_sq(det.position)
        .max(DISTANCE_FLOOR * DISTANCE_FLOOR);
    Ok(p.intensity * det.geometric_gain() / d2)
}

/// [`qa_response`] attenuated by `exp(-Σ ℓ_h/λ_h)` over the buildings the
/// straight source-detector ray crosses.
pub fn rt_response(p: &Particle, det: &DetectorSpec, scene: &Scene) -> Result<f64> {
    let qa = qa_response(p, det)?;
    if scene.buildings().is_empty() {
        return Ok(qa);
    }
    Ok(qa * (-scene.optical_depth(p.position(), det.position)).exp())
}

/// Expected counts for one detector, optionally including the background
/// mean `B·Δt`.
pub fn expected_counts(
    model: ForwardModel,
    p: &Particle,
    det: &DetectorSpec,
    scene: &Scene,
    include_background: bool,
) -> Result<f64> {
    let u = match model {
        ForwardModel::Qa => qa_response(p, det)?,
        ForwardModel::Rt => rt_response(p, det, scene)?,
    };
    Ok(if include_background {
        u + det.background_mean()
    } else {
        u
    })
}

/// `ln(n!)` via log-gamma.
pub fn ln_factorial(n: u64) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Joint log-likelihood of independent detector counts.
///
/// Poisson: `Σ y ln u − u − ln y!` with `u` floored at [`EXPECTED_FLOOR`].
/// Gaussian: `−d/2 ln(2πσ²) − SS/(2σ²)`.
pub fn log_likelihood(observed: &[u64], expected: &[f64], mode: LikelihoodMode) -> Result<f64> {
    if observed.len() != expected.len() {
        return Err(Error::LengthMismatch {
            expected: expected.len(),
            found: observed.len(),
        });
    }
    if expected.iter().any(|u| !u.is_finite() || *u < 0.0) {
        return Err(Error::NonFinite("expected counts"));
    }
    let ll = match mode {
        LikelihoodMode::Poisson => observed
            .iter()
            .zip(expected)
            .map(|(&y, &u)| {
                let u = u.max(EXPECTED_FLOOR);
                y as f64 * u.ln() - u - ln_factorial(y)
            })
            .sum(),
        LikelihoodMode::Gaussian { sigma } => {
            let var = sigma * sigma;
            let ss: f64 = observed
                .iter()
                .zip(expected)
                .map(|(&y, &u)| (y as f64 - u).powi(2))
                .sum();
            -0.5 * observed.len() as f64 * (2.0 * PI * var).ln() - ss / (2.0 * var)
        }
    };
    Ok(ll)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BuildingPolygon, Bounds, IntensityRange};
    use crate::rng::RandomStream;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn unit_det(x: f64, y: f64) -> DetectorSpec {
        DetectorSpec::new("d", Point2::new(x, y), 1.0, 1.0, 1.0, 0.0).unwrap()
    }

    fn urban_det(x: f64, y: f64) -> DetectorSpec {
        DetectorSpec::new("u", Point2::new(x, y), 0.0058, 0.62, 5.0, 300.0).unwrap()
    }

    fn open_scene() -> Scene {
        Scene::open(
            Bounds::new(-100., 100., -100., 100.).unwrap(),
            IntensityRange::new(1.0, 1e12).unwrap(),
        )
    }

    #[test]
    fn qa_unit_case() {
        let u = qa_response(&Particle::new(1.0, 0.0, 1.0), &unit_det(0., 0.)).unwrap();
        assert_relative_eq!(u, 1.0 / (4.0 * PI), max_relative = 1e-15);
        assert_relative_eq!(u, 0.0795775, epsilon = 1e-7);
    }

    #[test]
    fn qa_case1_detector4() {
        // d² = 32.2² + 47.9² = 3331.25; u = I ε A Δt / (4π d²).
        let det = urban_det(190.2, 50.1);
        let u = qa_response(&Particle::new(158.0, 98.0, 3.219e8), &det).unwrap();
        let oracle = 3.219e8 * 0.62 * 0.0058 * 5.0 / (4.0 * PI * 3331.25);
        assert_relative_eq!(u, oracle, max_relative = 1e-12);
        assert!((u - 138.26).abs() < 0.01, "{u}");
    }

    #[test]
    fn qa_inverse_square() {
        let det = unit_det(0., 0.);
        let near = qa_response(&Particle::new(2.0, 0.0, 5.0), &det).unwrap();
        let far = qa_response(&Particle::new(4.0, 0.0, 5.0), &det).unwrap();
        assert_relative_eq!(near, 4.0 * far, max_relative = 1e-14);
    }

    #[test]
    fn qa_clamps_at_distance_floor() {
        let det = unit_det(0., 0.);
        let on = qa_response(&Particle::new(0.0, 0.0, 1.0), &det).unwrap();
        let floor = qa_response(&Particle::new(DISTANCE_FLOOR, 0.0, 1.0), &det).unwrap();
        assert!(on.is_finite());
        assert_eq!(on, floor);
        assert!(qa_response(&Particle::new(f64::NAN, 0.0, 1.0), &det).is_err());
    }

    #[test]
    fn rt_equals_qa_without_buildings() {
        let det = unit_det(3., 4.);
        let p = Particle::new(-1.0, 2.0, 7.0);
        assert_eq!(
            rt_response(&p, &det, &open_scene()).unwrap(),
            qa_response(&p, &det).unwrap()
        );
    }

    #[test]
    fn rt_attenuation_factors() {
        let bounds = Bounds::new(-10., 10., -10., 10.).unwrap();
        let range = IntensityRange::new(1.0, 10.0).unwrap();
        let sq = |x0: f64, lambda: f64| {
            BuildingPolygon::new(
                vec![
                    Point2::new(x0, -1.),
                    Point2::new(x0 + 1., -1.),
                    Point2::new(x0 + 1., 1.),
                    Point2::new(x0, 1.),
                ],
                lambda,
            )
            .unwrap()
        };
        let det = unit_det(5., 0.);
        let p = Particle::new(-5.0, 0.0, 3.0);
        let qa = qa_response(&p, &det).unwrap();

        let one = Scene::new(bounds, vec![sq(0.0, 1.0)], range).unwrap();
        let rt = rt_response(&p, &det, &one).unwrap();
        assert_relative_eq!(rt / qa, (-1f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(rt / qa, 0.367879, epsilon = 1e-6);

        let two = Scene::new(bounds, vec![sq(-3.0, 1.0), sq(2.0, 0.5)], range).unwrap();
        let rt = rt_response(&p, &det, &two).unwrap();
        assert_relative_eq!(rt / qa, (-3f64).exp(), max_relative = 1e-12);
    }

    #[test]
    fn poisson_examples() {
        let ll = log_likelihood(&[0], &[1.0], LikelihoodMode::Poisson).unwrap();
        assert_relative_eq!(ll, -1.0, epsilon = 1e-14);
        let ll = log_likelihood(&[3], &[2.0], LikelihoodMode::Poisson).unwrap();
        let oracle = (8.0f64 / 6.0).ln() - 2.0;
        assert_relative_eq!(ll, oracle, epsilon = 1e-12);
        assert_relative_eq!(ll, -1.712318, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_exact_match() {
        let mode = LikelihoodMode::gaussian(1.0).unwrap();
        let ll = log_likelihood(&[4, 9], &[4.0, 9.0], mode).unwrap();
        assert_relative_eq!(ll, -(2.0 * PI).ln(), epsilon = 1e-14);
        assert_relative_eq!(ll, -1.837877, epsilon = 1e-6);
    }

    #[test]
    fn likelihood_errors() {
        assert!(matches!(
            log_likelihood(&[1, 2], &[1.0], LikelihoodMode::Poisson),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(log_likelihood(&[1], &[f64::NAN], LikelihoodMode::Poisson).is_err());
        assert!(LikelihoodMode::gaussian(0.0).is_err());
    }

    #[test]
    fn blocked_ray_stays_finite() {
        let ll = log_likelihood(&[5], &[0.0], LikelihoodMode::Poisson).unwrap();
        assert!(ll.is_finite());
    }

    #[test]
    fn likelihood_mode_parsing() {
        assert_eq!("poisson".parse::<LikelihoodMode>().unwrap(), LikelihoodMode::Poisson);
        assert_eq!(
            "gaussian:40".parse::<LikelihoodMode>().unwrap(),
            LikelihoodMode::Gaussian { sigma: 40.0 }
        );
        assert!("gaussian:-1".parse::<LikelihoodMode>().is_err());
        assert!("cauchy".parse::<LikelihoodMode>().is_err());
    }

    #[test]
    fn poisson_mode_at_floor_of_mean() {
        for &u in &[0.5f64, 1.0, 2.7, 13.2, 40.0, 151.5] {
            let best = (0..=(10.0 * u).ceil() as u64)
                .map(|y| (y, log_likelihood(&[y], &[u], LikelihoodMode::Poisson).unwrap()))
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap()
                .0;
            // At integer u both floor(u) and u-1 are modes.
            let ok = best == u.floor() as u64 || (u.fract() == 0.0 && best + 1 == u as u64);
            assert!(ok, "u={u}, argmax={best}");
        }
    }

    fn spearman(a: &[f64], b: &[f64]) -> f64 {
        fn ranks(v: &[f64]) -> Vec<f64> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
            let mut r = vec![0.0; v.len()];
            for (rank, &i) in idx.iter().enumerate() {
                r[i] = rank as f64;
            }
            r
        }
        let (ra, rb) = (ranks(a), ranks(b));
        let n = a.len() as f64;
        let d2: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - y).powi(2)).sum();
        1.0 - 6.0 * d2 / (n * (n * n - 1.0))
    }

    #[test]
    fn gaussian_and_poisson_rank_alike_at_high_counts() {
        let dets: Vec<DetectorSpec> = [
            (68.8, 35.8),
            (66.4, 119.5),
            (4.1, 48.1),
            (190.2, 50.1),
            (94.0, 99.9),
            (189.2, 19.2),
            (154.5, 3.0),
            (188.9, 141.3),
            (119.9, 160.0),
            (214.5, 77.9),
        ]
        .iter()
        .map(|&(x, y)| urban_det(x, y))
        .collect();
        let scene = Scene::open(
            Bounds::new(0., 250., 0., 180.).unwrap(),
            IntensityRange::new(5e8, 5e10).unwrap(),
        );
        let truth = Particle::new(158.0, 98.0, 3.219e8);
        let mut rng = RandomStream::new(5, 0);
        let means: Vec<f64> = dets
            .iter()
            .map(|d| expected_counts(ForwardModel::Qa, &truth, d, &scene, true).unwrap())
            .collect();
        assert!(means.iter().all(|&u| u > 30.0));
        let y: Vec<u64> = means
            .iter()
            .map(|&m| crate::measurement::poisson(m, &mut rng).unwrap())
            .collect();
        let sigma = (means.iter().sum::<f64>() / means.len() as f64).sqrt();
        let gauss = LikelihoodMode::gaussian(sigma).unwrap();
        let (mut lp, mut lg) = (Vec::new(), Vec::new());
        for _ in 0..1000 {
            let p = Particle::new(
                rng.random_range(0.0..250.0),
                rng.random_range(0.0..180.0),
                rng.random_range(5e8..5e10),
            );
            let u: Vec<f64> = dets
                .iter()
                .map(|d| expected_counts(ForwardModel::Qa, &p, d, &scene, true).unwrap())
                .collect();
            lp.push(log_likelihood(&y, &u, LikelihoodMode::Poisson).unwrap());
            lg.push(log_likelihood(&y, &u, gauss).unwrap());
        }
        let rho = spearman(&lp, &lg);
        assert!(rho > 0.99, "spearman {rho}");
    }

    proptest! {
        #[test]
        fn rt_never_exceeds_qa(
            px in -9.0..9.0f64, py in -9.0..9.0f64,
            dx in -9.0..9.0f64, dy in -9.0..9.0f64,
            i in 1.0..1e6f64,
        ) {
            let b = BuildingPolygon::new(
                vec![Point2::new(-2., -2.), Point2::new(2., -2.), Point2::new(2., 2.), Point2::new(-2., 2.)],
                1.5,
            ).unwrap();
            let scene = Scene::new(
                Bounds::new(-10., 10., -10., 10.).unwrap(),
                vec![b],
                IntensityRange::new(1.0, 1e7).unwrap(),
            ).unwrap();
            let det = unit_det(dx, dy);
            let p = Particle::new(px, py, i);
            prop_assert!(rt_response(&p, &det, &scene).unwrap() <= qa_response(&p, &det).unwrap());
        }

        #[test]
        fn qa_monotone(i in 1.0..1e9f64, d in 0.2..100.0f64, scale in 1.01..3.0f64) {
            let det = unit_det(0., 0.);
            let base = qa_response(&Particle::new(d, 0., i), &det).unwrap();
            prop_assert!(qa_response(&Particle::new(d, 0., i * scale), &det).unwrap() > base);
            prop_assert!(qa_response(&Particle::new(d * scale, 0., i), &det).unwrap() < base);
        }

        #[test]
        fn likelihood_permutation_equivariant(
            pairs in prop::collection::vec((0u64..500, 0.0..600.0f64), 1..12),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut RandomStream::new(seed, 0));
            for mode in [LikelihoodMode::Poisson, LikelihoodMode::Gaussian { sigma: 7.0 }] {
                let (y, u): (Vec<u64>, Vec<f64>) = pairs.iter().cloned().unzip();
                let (ys, us): (Vec<u64>, Vec<f64>) = shuffled.iter().cloned().unzip();
                let a = log_likelihood(&y, &u, mode).unwrap();
                let b = log_likelihood(&ys, &us, mode).unwrap();
                prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
            }
        }
    }
}
