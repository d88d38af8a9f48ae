//! Scenario files: TOML with `[scene]`, optional `[source]`,
//! `[[buildings]]`, `[detector_defaults]`, `[[detectors]]`, `[filter]`,
//! optional `[mobility]` and optional `[[background_detectors]]`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detector::{DetectorSpec, ForwardModel, LikelihoodMode, Particle};
use crate::error::{Error, Result};
use crate::filter::{KdeSchedule, PriorKind, SirConfig};
use crate::geometry::{Bounds, BuildingPolygon, IntensityRange, Point2, Scene};
use crate::mobility::{MobilityStrategy, MoveConfig};

/// Becquerels per curie.
pub const BQ_PER_CI: f64 = 3.7e10;

#[derive(Debug, Clone, PartialEq)]
pub struct FilterSettings {
    pub n_particles: usize,
    pub resample_fraction: f64,
    pub prior: PriorKind,
    pub likelihood: LikelihoodMode,
    pub model: ForwardModel,
    pub seed: u64,
    pub n_frames: usize,
    pub include_background: bool,
    pub kde: KdeSchedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilitySettings {
    pub strategy: MobilityStrategy,
    pub moves: MoveConfig,
}

/// A background-survey detector: only its position matters.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundDetector {
    pub id: String,
    pub position: Point2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: Option<String>,
    pub scene: Scene,
    pub detectors: Vec<DetectorSpec>,
    pub source_truth: Option<Particle>,
    pub filter: FilterSettings,
    pub mobility: Option<MobilitySettings>,
    pub background_detectors: Vec<BackgroundDetector>,
}

impl Scenario {
    /// Filter configuration. A KDE mobility strategy implies the KDE prior.
    pub fn sir_config(&self) -> SirConfig {
        let prior = match &self.mobility {
            Some(m) if m.strategy == MobilityStrategy::Kde => PriorKind::Kde,
            _ => self.filter.prior,
        };
        SirConfig {
            n_particles: self.filter.n_particles,
            resample_fraction: self.filter.resample_fraction,
            prior,
            kde: self.filter.kde,
            model: self.filter.model,
            likelihood: self.filter.likelihood,
            include_background: self.filter.include_background,
            record_history: false,
        }
    }

    pub fn network(&self) -> Vec<Point2> {
        self.detectors.iter().map(|d| d.position).collect()
    }

    /// Re-runs every invariant check; used after command-line overrides.
    pub fn validate(&self) -> Result<()> {
        let f = &self.filter;
        if f.n_particles < 2 {
            return Err(Error::config("filter.n_particles", "must be at least 2"));
        }
        if !(f.resample_fraction > 0.0 && f.resample_fraction < 1.0) {
            return Err(Error::config(
                "filter.resample_fraction",
                format!("must lie in (0, 1), got {}", f.resample_fraction),
            ));
        }
        if f.n_frames == 0 {
            return Err(Error::config("filter.n_frames", "must be at least 1"));
        }
        if f.kde.refit_every == 0 {
            return Err(Error::config("filter.kde_refit_every", "must be at least 1"));
        }
        if self.detectors.is_empty() {
            return Err(Error::config("detectors", "at least one detector is required"));
        }
        for (i, d) in self.detectors.iter().enumerate() {
            d.validate()?;
            if self.detectors[..i].iter().any(|o| o.id == d.id) {
                return Err(Error::config(format!("detectors.{}", d.id), "duplicate id"));
            }
            if !self.scene.bounds().contains(d.position) {
                return Err(Error::config(format!("detectors.{}", d.id), "outside the scene bounds"));
            }
            if self.scene.building_at(d.position).is_some() {
                return Err(Error::config(format!("detectors.{}", d.id), "inside a building"));
            }
        }
        if let Some(s) = &self.source_truth {
            if !s.is_finite() || s.intensity <= 0.0 {
                return Err(Error::config("source", "position and positive intensity required"));
            }
            if !self.scene.bounds().contains(s.position()) {
                return Err(Error::config("source", "outside the scene bounds"));
            }
        }
        if let Some(m) = &self.mobility {
            m.moves.validate()?;
        }
        Ok(())
    }
}

// Raw file layout.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    scene: RawScene,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<RawSource>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    buildings: Vec<RawBuilding>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    detector_defaults: Option<RawDetectorDefaults>,
    detectors: Vec<RawDetector>,
    filter: RawFilter,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mobility: Option<RawMobility>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    background_detectors: Vec<RawBackgroundDetector>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    intensity_min: f64,
    intensity_max: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    x: f64,
    y: f64,
    /// Bq.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intensity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intensity_mci: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intensity_uci: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBuilding {
    vertices: Vec<[f64; 2]>,
    mean_free_path: f64,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetectorDefaults {
    area: Option<f64>,
    efficiency: Option<f64>,
    dwell: Option<f64>,
    background_rate: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    id: String,
    x: f64,
    y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    area: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    efficiency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dwell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    background_rate: Option<f64>,
}

fn default_fraction() -> f64 {
    0.6
}
fn default_prior() -> String {
    "hull".into()
}
fn default_likelihood() -> String {
    "poisson".into()
}
fn default_fit_after() -> usize {
    KdeSchedule::default().fit_after
}
fn default_refit_every() -> usize {
    KdeSchedule::default().refit_every
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFilter {
    n_particles: usize,
    #[serde(default = "default_fraction")]
    resample_fraction: f64,
    #[serde(default = "default_prior")]
    prior: String,
    #[serde(default = "default_likelihood")]
    likelihood: String,
    model: String,
    #[serde(default)]
    seed: u64,
    n_frames: usize,
    #[serde(default = "default_true")]
    include_background: bool,
    #[serde(default = "default_fit_after")]
    kde_fit_after: usize,
    #[serde(default = "default_refit_every")]
    kde_refit_every: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMobility {
    strategy: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    step_length: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cadence: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    first_move: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_random_tries: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBackgroundDetector {
    id: String,
    x: f64,
    y: f64,
}

fn field_err(field: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::InvalidArgument(m) | Error::DegenerateInput(m) => Error::config(field, m),
        other => other,
    }
}

fn missing(field: String) -> Error {
    Error::config(field, "missing and no default given in [detector_defaults]")
}

impl RawScenario {
    fn into_scenario(self) -> Result<Scenario> {
        let s = &self.scene;
        let bounds = Bounds::new(s.x_min, s.x_max, s.y_min, s.y_max).map_err(field_err("scene"))?;
        let range = IntensityRange::new(s.intensity_min, s.intensity_max)
            .map_err(field_err("scene.intensity_min"))?;
        let mut buildings = Vec::with_capacity(self.buildings.len());
        for (i, b) in self.buildings.iter().enumerate() {
            let verts = b.vertices.iter().map(|v| Point2::new(v[0], v[1])).collect();
            let field = format!("buildings[{i}]");
            buildings.push(BuildingPolygon::new(verts, b.mean_free_path).map_err(field_err(&field))?);
        }
        let scene = Scene::new(bounds, buildings, range).map_err(field_err("buildings"))?;

        let defaults = self.detector_defaults.unwrap_or_default();
        let mut detectors = Vec::with_capacity(self.detectors.len());
        for d in &self.detectors {
            let pick = |v: Option<f64>, dflt: Option<f64>, name: &str| {
                v.or(dflt).ok_or_else(|| missing(format!("detectors.{}.{name}", d.id)))
            };
            detectors.push(DetectorSpec {
                id: d.id.clone(),
                position: Point2::new(d.x, d.y),
                area: pick(d.area, defaults.area, "area")?,
                efficiency: pick(d.efficiency, defaults.efficiency, "efficiency")?,
                dwell: pick(d.dwell, defaults.dwell, "dwell")?,
                background_rate: pick(d.background_rate, defaults.background_rate, "background_rate")?,
            });
        }

        let source_truth = match self.source {
            None => None,
            Some(src) => {
                let given = [
                    src.intensity,
                    src.intensity_mci.map(|v| v * 1e-3 * BQ_PER_CI),
                    src.intensity_uci.map(|v| v * 1e-6 * BQ_PER_CI),
                ];
                let mut it = given.into_iter().flatten();
                let intensity = match (it.next(), it.next()) {
                    (Some(i), None) => i,
                    _ => {
                        return Err(Error::config(
                            "source.intensity",
                            "give exactly one of intensity, intensity_mci, intensity_uci",
                        ))
                    }
                };
                Some(Particle::new(src.x, src.y, intensity))
            }
        };

        let f = &self.filter;
        let filter = FilterSettings {
            n_particles: f.n_particles,
            resample_fraction: f.resample_fraction,
            prior: f.prior.parse().map_err(field_err("filter.prior"))?,
            likelihood: f.likelihood.parse().map_err(field_err("filter.likelihood"))?,
            model: f.model.parse().map_err(field_err("filter.model"))?,
            seed: f.seed,
            n_frames: f.n_frames,
            include_background: f.include_background,
            kde: KdeSchedule {
                fit_after: f.kde_fit_after,
                refit_every: f.kde_refit_every,
            },
        };

        let mobility = match self.mobility {
            None => None,
            Some(m) => {
                let strategy: MobilityStrategy = m.strategy.parse().map_err(field_err("mobility.strategy"))?;
                let base = MoveConfig::for_strategy(strategy);
                Some(MobilitySettings {
                    strategy,
                    moves: MoveConfig {
                        step_length: m.step_length.unwrap_or(base.step_length),
                        cadence: m.cadence.unwrap_or(base.cadence),
                        first_move: m.first_move.unwrap_or(base.first_move),
                        max_random_tries: m.max_random_tries.unwrap_or(base.max_random_tries),
                    },
                })
            }
        };

        let background_detectors = self
            .background_detectors
            .into_iter()
            .map(|b| BackgroundDetector {
                id: b.id,
                position: Point2::new(b.x, b.y),
            })
            .collect();

        let scenario = Scenario {
            name: self.name,
            scene,
            detectors,
            source_truth,
            filter,
            mobility,
            background_detectors,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    fn from_scenario(s: &Scenario) -> Self {
        let b = s.scene.bounds();
        let r = s.scene.intensity_range();
        RawScenario {
            name: s.name.clone(),
            scene: RawScene {
                x_min: b.x_min,
                x_max: b.x_max,
                y_min: b.y_min,
                y_max: b.y_max,
                intensity_min: r.min,
                intensity_max: r.max,
            },
            source: s.source_truth.map(|p| RawSource {
                x: p.x,
                y: p.y,
                intensity: Some(p.intensity),
                intensity_mci: None,
                intensity_uci: None,
            }),
            buildings: s
                .scene
                .buildings()
                .iter()
                .map(|b| RawBuilding {
                    vertices: b.vertices().iter().map(|v| [v.x, v.y]).collect(),
                    mean_free_path: b.mean_free_path(),
                })
                .collect(),
            detector_defaults: None,
            detectors: s
                .detectors
                .iter()
                .map(|d| RawDetector {
                    id: d.id.clone(),
                    x: d.position.x,
                    y: d.position.y,
                    area: Some(d.area),
                    efficiency: Some(d.efficiency),
                    dwell: Some(d.dwell),
                    background_rate: Some(d.background_rate),
                })
                .collect(),
            filter: RawFilter {
                n_particles: s.filter.n_particles,
                resample_fraction: s.filter.resample_fraction,
                prior: s.filter.prior.to_string(),
                likelihood: s.filter.likelihood.to_string(),
                model: s.filter.model.to_string(),
                seed: s.filter.seed,
                n_frames: s.filter.n_frames,
                include_background: s.filter.include_background,
                kde_fit_after: s.filter.kde.fit_after,
                kde_refit_every: s.filter.kde.refit_every,
            },
            mobility: s.mobility.as_ref().map(|m| RawMobility {
                strategy: m.strategy.to_string(),
                step_length: Some(m.moves.step_length),
                cadence: Some(m.moves.cadence),
                first_move: Some(m.moves.first_move),
                max_random_tries: Some(m.moves.max_random_tries),
            }),
            background_detectors: s
                .background_detectors
                .iter()
                .map(|b| RawBackgroundDetector {
                    id: b.id.clone(),
                    x: b.position.x,
                    y: b.position.y,
                })
                .collect(),
        }
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Parses scenario text. `origin` only labels errors.
pub fn parse_scenario(text: &str, origin: &Path) -> Result<Scenario> {
    let raw: RawScenario = toml::from_str(text).map_err(|e| {
        let at = e
            .span()
            .map(|s| format!("line {}: ", line_of(text, s.start)))
            .unwrap_or_default();
        Error::Parse {
            path: origin.to_path_buf(),
            message: format!("{at}{}", e.message()),
        }
    })?;
    raw.into_scenario()
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text, path)
}

pub fn scenario_to_string(s: &Scenario) -> Result<String> {
    toml::to_string(&RawScenario::from_scenario(s))
        .map_err(|e| Error::config("scenario", format!("cannot serialize: {e}")))
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scenario_to_string(s)?).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
name = "tiny"

[scene]
x_min = 0.0
x_max = 100.0
y_min = 0.0
y_max = 50.0
intensity_min = 1e8
intensity_max = 1e10

[source]
x = 60.0
y = 20.0
intensity_mci = 8.7

[[buildings]]
vertices = [[10.0, 10.0], [20.0, 10.0], [20.0, 20.0], [10.0, 20.0]]
mean_free_path = 8.0

[detector_defaults]
area = 0.0058
efficiency = 0.62
dwell = 5.0
background_rate = 300.0

[[detectors]]
id = "a"
x = 5.0
y = 5.0

[[detectors]]
id = "b"
x = 90.0
y = 5.0
dwell = 2.0

[[detectors]]
id = "c"
x = 50.0
y = 45.0

[filter]
n_particles = 500
model = "rt"
n_frames = 20
seed = 4
"#;

    fn parse(text: &str) -> Result<Scenario> {
        parse_scenario(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_file_with_defaults() {
        let s = parse(MINIMAL).unwrap();
        assert_eq!(s.detectors.len(), 3);
        assert_eq!(s.detectors[1].dwell, 2.0);
        assert_eq!(s.detectors[2].area, 0.0058);
        let src = s.source_truth.unwrap();
        assert!((src.intensity - 3.219e8).abs() < 1.0);
        assert_eq!(s.filter.resample_fraction, 0.6);
        assert_eq!(s.filter.prior, PriorKind::Hull);
        assert_eq!(s.filter.likelihood, LikelihoodMode::Poisson);
        assert_eq!(s.filter.model, ForwardModel::Rt);
        assert!(s.mobility.is_none());
        assert_eq!(s.scene.buildings().len(), 1);
    }

    #[test]
    fn microcurie_conversion() {
        let text = MINIMAL.replace("intensity_mci = 8.7", "intensity_uci = 35.0");
        let s = parse(&text).unwrap();
        assert!((s.source_truth.unwrap().intensity - 1.295e6).abs() < 1e-6);
    }

    #[test]
    fn source_is_optional() {
        let start = MINIMAL.find("[source]").unwrap();
        let end = MINIMAL.find("[[buildings]]").unwrap();
        let text = format!("{}{}", &MINIMAL[..start], &MINIMAL[end..]);
        assert!(parse(&text).unwrap().source_truth.is_none());
    }

    #[test]
    fn bad_fraction_names_the_field() {
        let text = MINIMAL.replace("n_frames = 20", "n_frames = 20\nresample_fraction = 1.5");
        match parse(&text).unwrap_err() {
            Error::Config { field, .. } => assert!(field.contains("resample_fraction")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = MINIMAL.replace("n_frames = 20", "n_frames = 20\nbogus = 1");
        match parse(&text).unwrap_err() {
            Error::Parse { message, .. } => {
                assert!(message.contains("bogus"), "{message}");
                assert!(message.contains("line"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn detector_in_building_is_rejected() {
        let text = MINIMAL.replace("x = 5.0\ny = 5.0", "x = 15.0\ny = 15.0");
        assert!(matches!(parse(&text).unwrap_err(), Error::Config { .. }));
    }

    #[test]
    fn two_intensity_units_are_rejected() {
        let text = MINIMAL.replace("intensity_mci = 8.7", "intensity_mci = 8.7\nintensity = 1e9");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn kde_mobility_defaults() {
        let text = format!("{MINIMAL}\n[mobility]\nstrategy = \"kde\"\n");
        let s = parse(&text).unwrap();
        let m = s.mobility.as_ref().unwrap();
        assert_eq!(m.moves.cadence, 3);
        assert_eq!(m.moves.first_move, 10);
        assert_eq!(s.sir_config().prior, PriorKind::Kde);
    }

    #[test]
    fn round_trip() {
        let text = format!(
            "{MINIMAL}\n[mobility]\nstrategy = \"mean-pursuit\"\n\n[[background_detectors]]\nid = \"a\"\nx = 1.0\ny = 2.0\n"
        );
        let s = parse(&text).unwrap();
        let again = parse(&scenario_to_string(&s).unwrap()).unwrap();
        assert_eq!(s, again);

        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.toml");
        save_scenario(&s, &p).unwrap();
        assert_eq!(load_scenario(&p).unwrap(), s);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_scenario("/nonexistent/scenario.toml").unwrap_err(),
            Error::Io { .. }
        ));
    }
}
