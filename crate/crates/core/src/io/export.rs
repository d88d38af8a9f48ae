//! Run output: per-step particles, a JSON summary, an SVG scatter plot and
//! detector tracks.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::detector::{DetectorSpec, Particle};
use crate::diagnostics::localization_error;
use crate::error::{Error, Result};
use crate::filter::{PosteriorSummary, SirRun};
use crate::geometry::{ConvexHull, Point2, Scene};

pub struct ExportInput<'a> {
    pub scene: &'a Scene,
    /// Detector layout at the end of the run.
    pub detectors: &'a [DetectorSpec],
    pub run: &'a SirRun,
    pub truth: Option<Particle>,
    pub hull: Option<&'a ConvexHull>,
    /// Positions used for each frame, when detectors moved.
    pub detector_history: Option<&'a [Vec<Point2>]>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportedFiles {
    pub particles: PathBuf,
    pub summary: PathBuf,
    pub scatter: PathBuf,
    pub detectors: Option<PathBuf>,
}

#[derive(Serialize)]
struct StepOut<'a> {
    k: usize,
    radius: f64,
    /// Survivors after resampling, equal weights.
    summary: &'a PosteriorSummary,
    /// Weighted ensemble before resampling.
    retained: &'a PosteriorSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_m: Option<f64>,
}

#[derive(Serialize)]
struct SummaryOut<'a> {
    seed: u64,
    n_particles: usize,
    n_frames: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<Particle>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_error_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_summary: Option<&'a PosteriorSummary>,
    r_series: Vec<f64>,
    steps: Vec<StepOut<'a>>,
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

/// `step,index,x,y,intensity,weight` for every recorded weighted ensemble.
/// Without recorded history only the final survivors are written, at the
/// last step with equal weights.
pub fn write_particles(path: &Path, run: &SirRun) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(["step", "index", "x", "y", "intensity", "weight"]).map_err(&err)?;
    let mut any = false;
    for s in &run.steps {
        if let Some(e) = &s.ensemble {
            any = true;
            for (i, (p, wt)) in e.particles().iter().zip(e.norm_weights()).enumerate() {
                w.write_record(&[
                    s.k.to_string(),
                    i.to_string(),
                    p.x.to_string(),
                    p.y.to_string(),
                    p.intensity.to_string(),
                    wt.to_string(),
                ])
                .map_err(&err)?;
            }
        }
    }
    if !any {
        let k = run.steps.last().map_or(0, |s| s.k);
        let kept = run.final_ensemble.retained();
        let wt = 1.0 / kept.len() as f64;
        for (i, p) in kept.iter().enumerate() {
            w.write_record(&[
                k.to_string(),
                i.to_string(),
                p.x.to_string(),
                p.y.to_string(),
                p.intensity.to_string(),
                wt.to_string(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn summary_json(input: &ExportInput) -> Result<String> {
    let run = input.run;
    let err = |s: &PosteriorSummary| input.truth.map(|t| localization_error(s, &t));
    let out = SummaryOut {
        seed: input.seed,
        n_particles: run.final_ensemble.len(),
        n_frames: run.steps.len(),
        truth: input.truth,
        final_error_m: run.final_summary().and_then(err),
        final_summary: run.final_summary(),
        r_series: run.r_series(),
        steps: run
            .steps
            .iter()
            .map(|s| StepOut {
                k: s.k,
                radius: s.radius,
                summary: &s.summary,
                retained: &s.retained,
                error_m: err(&s.summary),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&out).map_err(|e| Error::DegenerateInput(format!("summary: {e}")))
}

struct Canvas {
    x0: f64,
    y1: f64,
    scale: f64,
}

impl Canvas {
    const MARGIN: f64 = 20.0;

    fn px(&self, p: Point2) -> (f64, f64) {
        (
            Self::MARGIN + (p.x - self.x0) * self.scale,
            Self::MARGIN + (self.y1 - p.y) * self.scale,
        )
    }

    fn points(&self, pts: &[Point2]) -> String {
        pts.iter()
            .map(|&p| {
                let (x, y) = self.px(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

/// Final survivors, detectors, hull, buildings, truth and posterior mean.
pub fn scatter_svg(input: &ExportInput) -> String {
    let b = input.scene.bounds();
    let width = 800.0;
    let scale = width / b.width();
    let height = b.height() * scale;
    let c = Canvas {
        x0: b.x_min,
        y1: b.y_max,
        scale,
    };
    let m = Canvas::MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="0 0 {:.0} {:.0}">"#,
        width + 2.0 * m,
        height + 2.0 * m,
        width + 2.0 * m,
        height + 2.0 * m
    );
    let _ = writeln!(
        s,
        r##"<rect class="domain" x="{m}" y="{m}" width="{width:.2}" height="{height:.2}" fill="white" stroke="#444"/>"##
    );
    for bld in input.scene.buildings() {
        let _ = writeln!(
            s,
            r##"<polygon class="building" points="{}" fill="#bbb" stroke="#555"/>"##,
            c.points(bld.vertices())
        );
    }
    if let Some(h) = input.hull {
        let _ = writeln!(
            s,
            r##"<polygon class="hull" points="{}" fill="none" stroke="#39c" stroke-dasharray="4 3"/>"##,
            c.points(h.vertices())
        );
    }
    if let Some(hist) = input.detector_history {
        for (j, det) in input.detectors.iter().enumerate() {
            let mut track: Vec<Point2> = hist.iter().filter_map(|row| row.get(j).copied()).collect();
            track.push(det.position);
            let _ = writeln!(
                s,
                r##"<polyline class="track" points="{}" fill="none" stroke="#2a2"/>"##,
                c.points(&track)
            );
        }
    }
    for p in input.run.final_ensemble.retained() {
        let (x, y) = c.px(p.position());
        let _ = writeln!(
            s,
            r##"<circle class="particle" cx="{x:.2}" cy="{y:.2}" r="1.5" fill="#c33" fill-opacity="0.4"/>"##
        );
    }
    for d in input.detectors {
        let (x, y) = c.px(d.position);
        let _ = writeln!(
            s,
            r##"<rect class="detector" x="{:.2}" y="{:.2}" width="7" height="7" fill="#126"><title>{}</title></rect>"##,
            x - 3.5,
            y - 3.5,
            d.id
        );
    }
    if let Some(t) = input.truth {
        let (x, y) = c.px(t.position());
        let _ = writeln!(
            s,
            r##"<path class="truth" d="M{:.2} {:.2} L{:.2} {:.2} M{:.2} {:.2} L{:.2} {:.2}" stroke="black" stroke-width="2"/>"##,
            x - 6.0,
            y - 6.0,
            x + 6.0,
            y + 6.0,
            x - 6.0,
            y + 6.0,
            x + 6.0,
            y - 6.0
        );
    }
    if let Some(f) = input.run.final_summary() {
        let (x, y) = c.px(f.mean_position());
        let _ = writeln!(
            s,
            r##"<circle class="mean" cx="{x:.2}" cy="{y:.2}" r="5" fill="none" stroke="#f80" stroke-width="2"/>"##
        );
    }
    s.push_str("</svg>\n");
    s
}

/// `step,detector_id,x,y` for every frame of a mobile run.
pub fn write_detector_tracks(path: &Path, ids: &[String], history: &[Vec<Point2>]) -> Result<()> {
    let err = csv_err(path);
    let mut w = csv::Writer::from_path(path).map_err(&err)?;
    w.write_record(["step", "detector_id", "x", "y"]).map_err(&err)?;
    for (k, row) in history.iter().enumerate() {
        for (id, p) in ids.iter().zip(row) {
            w.write_record(&[(k + 1).to_string(), id.clone(), p.x.to_string(), p.y.to_string()])
                .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn export_results(input: &ExportInput, out_dir: impl AsRef<Path>) -> Result<ExportedFiles> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = ExportedFiles {
        particles: dir.join("particles.csv"),
        summary: dir.join("summary.json"),
        scatter: dir.join("scatter.svg"),
        detectors: input.detector_history.map(|_| dir.join("detectors.csv")),
    };
    write_particles(&files.particles, input.run)?;
    fs::write(&files.summary, summary_json(input)?).map_err(|e| Error::io(&files.summary, e))?;
    fs::write(&files.scatter, scatter_svg(input)).map_err(|e| Error::io(&files.scatter, e))?;
    if let (Some(path), Some(hist)) = (&files.detectors, input.detector_history) {
        let ids: Vec<String> = input.detectors.iter().map(|d| d.id.clone()).collect();
        write_detector_tracks(path, &ids, hist)?;
    }
    Ok(files)
}
