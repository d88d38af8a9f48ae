//! Count tables: CSV with header `time_s,detector_id,bin_01..bin_21` or
//! `time_s,detector_id,counts`, one row per detector per time step.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::Point2;
use crate::measurement::MeasurementFrame;

pub const SPECTRAL_BINS: usize = 21;
/// 1-indexed photopeak bin for Cs-137 (621-704 keV).
pub const PHOTOPEAK_BIN: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinMode {
    /// Photopeak column only.
    Bin12,
    /// Sum over all spectral bins.
    Total,
}

impl FromStr for BinMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bin12" => Ok(BinMode::Bin12),
            "total" => Ok(BinMode::Total),
            other => Err(Error::InvalidArgument(format!(
                "unknown bin mode `{other}` (expected bin12 or total)"
            ))),
        }
    }
}

impl fmt::Display for BinMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BinMode::Bin12 => "bin12",
            BinMode::Total => "total",
        })
    }
}

/// Frames in time order, one count per detector in `detector_ids` order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CountsData {
    pub detector_ids: Vec<String>,
    pub times: Vec<i64>,
    pub frames: Vec<MeasurementFrame>,
}

impl CountsData {
    pub fn column(&self, id: &str) -> Option<Vec<u64>> {
        let j = self.detector_ids.iter().position(|d| d == id)?;
        Some(self.frames.iter().map(|f| f.counts[j]).collect())
    }

    /// Reorders columns to `order`; every id must be present.
    pub fn reorder(&self, order: &[String]) -> Result<CountsData> {
        let idx = order
            .iter()
            .map(|id| {
                self.detector_ids.iter().position(|d| d == id).ok_or_else(|| {
                    Error::config(
                        format!("detectors.{id}"),
                        "detector has no column in the counts file",
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(CountsData {
            detector_ids: order.to_vec(),
            times: self.times.clone(),
            frames: self
                .frames
                .iter()
                .map(|f| MeasurementFrame::new(f.time_index, idx.iter().map(|&j| f.counts[j]).collect()))
                .collect(),
        })
    }
}

#[derive(Clone, Copy)]
enum Schema {
    Spectral,
    Single,
}

fn schema_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn detect_schema(path: &Path, header: &csv::StringRecord) -> Result<Schema> {
    let cols: Vec<&str> = header.iter().map(str::trim).collect();
    if cols.len() < 3 || cols[0] != "time_s" || cols[1] != "detector_id" {
        return Err(schema_err(path, 1, "header must start with time_s,detector_id"));
    }
    if cols.len() == 3 && cols[2] == "counts" {
        return Ok(Schema::Single);
    }
    let bins: Vec<String> = (1..=SPECTRAL_BINS).map(|b| format!("bin_{b:02}")).collect();
    if cols.len() == 2 + SPECTRAL_BINS && cols[2..].iter().zip(&bins).all(|(c, b)| c == b) {
        return Ok(Schema::Spectral);
    }
    Err(schema_err(
        path,
        1,
        format!("expected a `counts` column or bin_01..bin_{SPECTRAL_BINS:02}"),
    ))
}

/// Reads a count table into frames.
///
/// Detector order follows first appearance. Every detector must report at
/// every time step present in the file. A single-column table already holds
/// the counts to use, so `bin_mode` only affects spectral tables.
pub fn ingest_counts(path: impl AsRef<Path>, bin_mode: BinMode) -> Result<CountsData> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| schema_err(path, 1, e.to_string()))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Ok(CountsData::default());
    }
    let schema = detect_schema(path, &header)?;

    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut readings: HashMap<(i64, usize), u64> = HashMap::new();
    let mut last_time: Vec<i64> = Vec::new();
    let mut times = BTreeSet::new();

    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            schema_err(path, line, e.to_string())
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let time: i64 = row[0]
            .parse()
            .map_err(|_| schema_err(path, line, format!("bad time `{}`", &row[0])))?;
        let id = row[1].to_string();
        let parse_count = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| schema_err(path, line, format!("bad count `{s}`")))
        };
        let count = match (schema, bin_mode) {
            (Schema::Single, _) => parse_count(&row[2])?,
            (Schema::Spectral, BinMode::Bin12) => parse_count(&row[1 + PHOTOPEAK_BIN])?,
            (Schema::Spectral, BinMode::Total) => {
                let mut sum = 0u64;
                for s in row.iter().skip(2) {
                    sum = sum.saturating_add(parse_count(s)?);
                }
                sum
            }
        };
        let j = *index.entry(id.clone()).or_insert_with(|| {
            ids.push(id.clone());
            last_time.push(i64::MIN);
            ids.len() - 1
        });
        if time <= last_time[j] {
            return Err(schema_err(
                path,
                line,
                format!("time {time} for detector `{id}` does not increase"),
            ));
        }
        last_time[j] = time;
        times.insert(time);
        readings.insert((time, j), count);
    }

    let times: Vec<i64> = times.into_iter().collect();
    let mut frames = Vec::with_capacity(times.len());
    for (k, &t) in times.iter().enumerate() {
        let mut counts = Vec::with_capacity(ids.len());
        for (j, id) in ids.iter().enumerate() {
            match readings.get(&(t, j)) {
                Some(&c) => counts.push(c),
                None => {
                    return Err(Error::Gap {
                        detector: id.clone(),
                        time_s: t,
                    })
                }
            }
        }
        frames.push(MeasurementFrame::new(k + 1, counts));
    }
    Ok(CountsData {
        detector_ids: ids,
        times,
        frames,
    })
}

/// Writes frames in the single-column schema; `time_s` is the frame's
/// time index.
pub fn write_counts(path: impl AsRef<Path>, detector_ids: &[String], frames: &[MeasurementFrame]) -> Result<()> {
    let path = path.as_ref();
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(["time_s", "detector_id", "counts"]).map_err(io)?;
    for f in frames {
        if f.counts.len() != detector_ids.len() {
            return Err(Error::LengthMismatch {
                expected: detector_ids.len(),
                found: f.counts.len(),
            });
        }
        for (id, c) in detector_ids.iter().zip(&f.counts) {
            w.write_record([f.time_index.to_string(), id.clone(), c.to_string()])
                .map_err(io)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn id_order(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<u64>(), b.parse::<u64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y),
        _ => a.cmp(b),
    }
}

/// Index of the nearest background detector for each position. Ties go
/// to the lowest id (numeric when both ids are integers).
pub fn nearest_background(positions: &[Point2], bg: &[(String, Point2)]) -> Result<Vec<usize>> {
    if bg.is_empty() {
        return Err(Error::DegenerateInput("no background detectors".into()));
    }
    Ok(positions
        .iter()
        .map(|p| {
            let mut best = 0;
            for j in 1..bg.len() {
                let (dj, db) = (p.distance_sq(bg[j].1), p.distance_sq(bg[best].1));
                if dj < db || (dj == db && id_order(&bg[j].0, &bg[best].0).is_lt()) {
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Mean background counts per frame for each detector, taken from its
/// nearest background-survey detector.
pub fn match_background(positions: &[Point2], bg: &[(String, Point2)], bg_data: &CountsData) -> Result<Vec<f64>> {
    if bg_data.frames.is_empty() {
        return Err(Error::DegenerateInput("background table has no frames".into()));
    }
    let nearest = nearest_background(positions, bg)?;
    nearest
        .into_iter()
        .map(|j| {
            let id = &bg[j].0;
            let col = bg_data.column(id).ok_or_else(|| {
                Error::config(
                    format!("background_detectors.{id}"),
                    "no column in the background counts file",
                )
            })?;
            Ok(col.iter().map(|&c| c as f64).sum::<f64>() / col.len() as f64)
        })
        .collect()
}
