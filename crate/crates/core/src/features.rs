//! Interval → fixed-shape feature vector, and z-score normalization.
//!
//! The window is split into `k` equal time bins. For each tracked object
//! (keyed by sensor and id) the records in a bin are averaged into one
//! `(range, radial_velocity, angle)` triple; bins where the object was not
//! seen stay zero. Objects are ranked by first detection time, then range
//! at first detection (closest first), then id, and the first `m` fill the
//! row slots. Everything past that is zero padding.

use std::collections::BTreeMap;
use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    DomainError, FeatureShape, FeatureVector, IntervalSample, Label, Sensor, TrackRecord,
    FEATURES_PER_OBJECT,
};
use crate::exec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch {
        expected: FeatureShape,
        found: FeatureShape,
    },
    #[error("feature csv line {line}: {reason}")]
    Csv { line: u64, reason: String },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Default, Clone, Copy)]
struct BinAccumulator {
    sum: [f64; FEATURES_PER_OBJECT],
    count: u32,
}

struct ObjectTrack {
    first_seen: f64,
    first_range: f64,
    key: (Sensor, u64),
    bins: Vec<BinAccumulator>,
}

fn bin_of(sample: &IntervalSample, k: usize, t: f64) -> usize {
    let rel = (t - sample.start()) / sample.duration();
    ((rel * k as f64).floor().max(0.0) as usize).min(k - 1)
}

/// Slot ordering key. Lexicographic: first seen, range at first sight, id, sensor.
pub fn slot_key(first_seen: f64, first_range: f64, key: (Sensor, u64)) -> impl Ord {
    (OrdF64(first_seen), OrdF64(first_range), key.1, key.0)
}

#[derive(Clone, Copy)]
struct OrdF64(f64);
impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn canonical_cmp(a: &TrackRecord, b: &TrackRecord) -> std::cmp::Ordering {
    a.object_key()
        .cmp(&b.object_key())
        .then(a.timestamp().total_cmp(&b.timestamp()))
        .then(a.range().total_cmp(&b.range()))
        .then(a.radial_velocity().total_cmp(&b.radial_velocity()))
        .then(a.angle().total_cmp(&b.angle()))
}

fn object_tracks(sample: &IntervalSample, k: usize) -> Vec<ObjectTrack> {
    // canonical order makes the bin sums independent of input record order
    let mut records = sample.records().to_vec();
    records.sort_by(canonical_cmp);

    let mut tracks: BTreeMap<(Sensor, u64), ObjectTrack> = BTreeMap::new();
    for r in &records {
        let key = r.object_key();
        let tr = tracks.entry(key).or_insert_with(|| ObjectTrack {
            first_seen: r.timestamp(),
            first_range: r.range(),
            key,
            bins: vec![BinAccumulator::default(); k],
        });
        let b = &mut tr.bins[bin_of(sample, k, r.timestamp())];
        b.sum[0] += r.range();
        b.sum[1] += r.radial_velocity();
        b.sum[2] += r.angle();
        b.count += 1;
    }
    let mut tracks: Vec<ObjectTrack> = tracks.into_values().collect();
    tracks.sort_by(|a, b| {
        slot_key(a.first_seen, a.first_range, a.key).cmp(&slot_key(
            b.first_seen,
            b.first_range,
            b.key,
        ))
    });
    tracks
}

/// Objects in slot order as `(sensor, id)`, including those beyond `m`.
pub fn slot_assignment(sample: &IntervalSample) -> Vec<(Sensor, u64)> {
    object_tracks(sample, 1)
        .into_iter()
        .map(|t| t.key)
        .collect()
}

pub fn featurize(sample: &IntervalSample, shape: FeatureShape) -> FeatureVector {
    let k = shape.timesteps();
    let mut values = vec![0.0; shape.len()];
    for (slot, tr) in object_tracks(sample, k)
        .into_iter()
        .take(shape.max_objects())
        .enumerate()
    {
        for (t, b) in tr.bins.iter().enumerate() {
            if b.count == 0 {
                continue;
            }
            let n = f64::from(b.count);
            for f in 0..FEATURES_PER_OBJECT {
                values[shape.index(slot, t, f)] = b.sum[f] / n;
            }
        }
    }
    FeatureVector::new(shape, values, sample.label()).expect("finite averages of finite records")
}

pub fn featurize_all(samples: &[IntervalSample], shape: FeatureShape) -> Vec<FeatureVector> {
    exec::map(samples, |s| featurize(s, shape))
}

/// Per-dimension z-score transform fitted on training vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    shape: FeatureShape,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Normalizer {
    /// Mean 0, scale 1: leaves vectors unchanged.
    pub fn identity(shape: FeatureShape) -> Self {
        Normalizer {
            shape,
            mean: vec![0.0; shape.len()],
            scale: vec![1.0; shape.len()],
        }
    }

    pub fn shape(&self) -> FeatureShape {
        self.shape
    }
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    fn check(&self, v: &FeatureVector) -> Result<(), FeatureError> {
        if v.shape() != self.shape {
            return Err(FeatureError::ShapeMismatch {
                expected: self.shape,
                found: v.shape(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, v: &FeatureVector) -> Result<FeatureVector, FeatureError> {
        self.check(v)?;
        let values = v
            .values()
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| (x - m) / s)
            .collect();
        Ok(FeatureVector::new(self.shape, values, v.label())?)
    }

    pub fn invert(&self, v: &FeatureVector) -> Result<FeatureVector, FeatureError> {
        self.check(v)?;
        let values = v
            .values()
            .iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(x, (m, s))| x * s + m)
            .collect();
        Ok(FeatureVector::new(self.shape, values, v.label())?)
    }
}

/// Fits per-dimension mean and population standard deviation.
/// Dimensions with zero (or non-finite) spread get scale 1.
pub fn fit_normalizer(train: &[FeatureVector]) -> Result<Normalizer, FeatureError> {
    let first = train.first().ok_or(FeatureError::EmptyTrainingSet)?;
    let shape = first.shape();
    if let Some(bad) = train.iter().find(|v| v.shape() != shape) {
        return Err(FeatureError::ShapeMismatch {
            expected: shape,
            found: bad.shape(),
        });
    }
    let n = train.len() as f64;
    let d = shape.len();
    let mut mean = vec![0.0; d];
    for v in train {
        for (m, x) in mean.iter_mut().zip(v.values()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for v in train {
        for ((acc, x), m) in var.iter_mut().zip(v.values()).zip(&mean) {
            let dx = x - m;
            *acc += dx * dx;
        }
    }
    let scale = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 0.0 && sd.is_finite() {
                sd
            } else {
                1.0
            }
        })
        .collect();
    Ok(Normalizer { shape, mean, scale })
}

pub fn apply_normalizer(
    norm: &Normalizer,
    v: &FeatureVector,
) -> Result<FeatureVector, FeatureError> {
    norm.apply(v)
}

/// Feature matrix CSV: `label,f0,...,f{D-1}`; empty label cell for unlabeled rows.
pub fn write_feature_csv<W: Write>(
    mut w: W,
    vectors: &[FeatureVector],
    shape: FeatureShape,
    comments: &[String],
) -> io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    write!(w, "label")?;
    for i in 0..shape.len() {
        write!(w, ",f{i}")?;
    }
    writeln!(w)?;
    for v in vectors {
        if let Some(l) = v.label() {
            write!(w, "{l}")?;
        }
        for x in v.values() {
            write!(w, ",{x}")?;
        }
        writeln!(w)?;
    }
    w.flush()
}

/// Reads a feature CSV back. The shape must be supplied since the file only
/// carries the flat dimension.
pub fn read_feature_csv<R: Read>(
    reader: R,
    shape: FeatureShape,
) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .from_reader(reader);
    let header_len = rdr
        .headers()
        .map_err(|e| FeatureError::Csv {
            line: 1,
            reason: e.to_string(),
        })?
        .len();
    if header_len != shape.len() + 1 {
        return Err(FeatureError::Csv {
            line: 1,
            reason: format!("{} columns for shape {shape}", header_len),
        });
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| FeatureError::Csv {
            line: 0,
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let label = match &row[0] {
            "" => None,
            s => Some(
                s.parse::<i64>()
                    .map_err(|_| FeatureError::Csv {
                        line,
                        reason: format!("bad label `{s}`"),
                    })
                    .and_then(|v| Label::try_from(v).map_err(FeatureError::from))?,
            ),
        };
        let values = row
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>().map_err(|_| FeatureError::Csv {
                    line,
                    reason: format!("bad value `{s}`"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        out.push(FeatureVector::new(shape, values, label)?);
    }
    Ok(out)
}
