//! Dataset files: canonical track CSV, annotation CSV and the manifest binding them.
//!
//! Track CSV header: `timestamp_s,sensor,object_id,range_m,radial_velocity_mps,angle_deg`.
//! Annotation CSV header: `start_s,end_s,label`.
//! Lines starting with `#` are comments (reproducibility headers) and are skipped.
//! Numbers are written with Rust's shortest round-trip formatting, so
//! writing and re-reading is bit-exact.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{validate_record, DomainError, IntervalSample, Label, RawRecord, TrackRecord};
use crate::exec;

pub const TRACK_HEADER: [&str; 6] = [
    "timestamp_s",
    "sensor",
    "object_id",
    "range_m",
    "radial_velocity_mps",
    "angle_deg",
];
pub const ANNOTATION_HEADER: [&str; 3] = ["start_s", "end_s", "label"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {reason}")]
    MalformedLine { line: u64, reason: String },
    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    HeaderMismatch { expected: String, found: String },
    #[error("line {line}: {source}")]
    InvalidRecord {
        line: u64,
        #[source]
        source: DomainError,
    },
    #[error("line {line}: label must be 0 or 1, found `{value}`")]
    BadLabelValue { line: u64, value: String },
    #[error("annotation [{start}, {end}) is empty or reversed")]
    InvalidInterval { start: f64, end: f64 },
    #[error("annotations overlap: [{a_start}, {a_end}) and [{b_start}, {b_end})")]
    OverlappingIntervals {
        a_start: f64,
        a_end: f64,
        b_start: f64,
        b_end: f64,
    },
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    ManifestEntry {
        path: PathBuf,
        #[source]
        source: Box<IngestError>,
    },
}

impl IngestError {
    fn io(path: &Path, source: io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrackFormat {
    #[default]
    CanonicalCsv,
}

/// One labeled window as stored on disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub interval_start: f64,
    pub interval_end: f64,
    pub label: Label,
}

impl AnnotationRecord {
    pub fn new(interval_start: f64, interval_end: f64, label: Label) -> Result<Self, IngestError> {
        if !(interval_start.is_finite() && interval_end.is_finite())
            || interval_end <= interval_start
        {
            return Err(IngestError::InvalidInterval {
                start: interval_start,
                end: interval_end,
            });
        }
        Ok(AnnotationRecord {
            interval_start,
            interval_end,
            label,
        })
    }
}

/// Rows of a CSV body with 1-based physical line numbers; `#` comment lines skipped.
fn csv_rows<R: Read>(reader: R) -> impl Iterator<Item = io::Result<(u64, Vec<String>)>> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader)
        .into_records()
        .map(|row| {
            let row = row.map_err(io::Error::other)?;
            let line = row.position().map_or(0, |p| p.line());
            Ok((line, row.iter().map(str::to_string).collect()))
        })
}

fn check_header(
    rows: &mut impl Iterator<Item = io::Result<(u64, Vec<String>)>>,
    expected: &[&str],
    path: &Path,
) -> Result<bool, IngestError> {
    match rows.next() {
        None => Ok(false),
        Some(Err(e)) => Err(IngestError::io(path, e)),
        Some(Ok((_, cols))) => {
            if cols.iter().map(String::as_str).eq(expected.iter().copied()) {
                Ok(true)
            } else {
                Err(IngestError::HeaderMismatch {
                    expected: expected.join(","),
                    found: cols.join(","),
                })
            }
        }
    }
}

fn parse_f64(line: u64, field: &str, s: &str) -> Result<f64, IngestError> {
    s.parse::<f64>().map_err(|_| IngestError::MalformedLine {
        line,
        reason: format!("{field}: `{s}` is not a number"),
    })
}

fn arity(line: u64, cols: &[String], expected: usize) -> Result<(), IngestError> {
    if cols.len() != expected {
        return Err(IngestError::MalformedLine {
            line,
            reason: format!("expected {expected} columns, found {}", cols.len()),
        });
    }
    Ok(())
}

/// Parses track records from any reader. `origin` is only used in error messages.
pub fn read_tracks<R: Read>(reader: R, origin: &Path) -> Result<Vec<TrackRecord>, IngestError> {
    let mut rows = csv_rows(reader);
    if !check_header(&mut rows, &TRACK_HEADER, origin)? {
        return Err(IngestError::HeaderMismatch {
            expected: TRACK_HEADER.join(","),
            found: String::new(),
        });
    }
    let mut out = Vec::new();
    for row in rows {
        let (line, cols) = row.map_err(|e| IngestError::io(origin, e))?;
        arity(line, &cols, TRACK_HEADER.len())?;
        let object_id = cols[2]
            .parse::<u64>()
            .map_err(|_| IngestError::MalformedLine {
                line,
                reason: format!("object_id: `{}` is not an unsigned integer", cols[2]),
            })?;
        let raw = RawRecord {
            timestamp: parse_f64(line, "timestamp_s", &cols[0])?,
            sensor: cols[1].clone(),
            object_id,
            range: parse_f64(line, "range_m", &cols[3])?,
            radial_velocity: parse_f64(line, "radial_velocity_mps", &cols[4])?,
            angle: parse_f64(line, "angle_deg", &cols[5])?,
        };
        out.push(
            validate_record(&raw).map_err(|source| IngestError::InvalidRecord { line, source })?,
        );
    }
    Ok(out)
}

/// Reads a track file. Records come back in file order.
pub fn parse_track_file(path: &Path, format: TrackFormat) -> Result<Vec<TrackRecord>, IngestError> {
    match format {
        TrackFormat::CanonicalCsv => {
            let f = fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
            read_tracks(f, path)
        }
    }
}

/// Parses annotations; output is sorted by start and checked for overlap.
pub fn read_annotations<R: Read>(
    reader: R,
    origin: &Path,
) -> Result<Vec<AnnotationRecord>, IngestError> {
    let mut rows = csv_rows(reader);
    if !check_header(&mut rows, &ANNOTATION_HEADER, origin)? {
        return Err(IngestError::HeaderMismatch {
            expected: ANNOTATION_HEADER.join(","),
            found: String::new(),
        });
    }
    let mut out = Vec::new();
    for row in rows {
        let (line, cols) = row.map_err(|e| IngestError::io(origin, e))?;
        arity(line, &cols, ANNOTATION_HEADER.len())?;
        let start = parse_f64(line, "start_s", &cols[0])?;
        let end = parse_f64(line, "end_s", &cols[1])?;
        let label = match cols[2].as_str() {
            "0" => Label::Unsafe,
            "1" => Label::Safe,
            other => {
                return Err(IngestError::BadLabelValue {
                    line,
                    value: other.to_string(),
                })
            }
        };
        out.push(AnnotationRecord::new(start, end, label)?);
    }
    out.sort_by(|a, b| a.interval_start.total_cmp(&b.interval_start));
    for w in out.windows(2) {
        if w[1].interval_start < w[0].interval_end {
            return Err(IngestError::OverlappingIntervals {
                a_start: w[0].interval_start,
                a_end: w[0].interval_end,
                b_start: w[1].interval_start,
                b_end: w[1].interval_end,
            });
        }
    }
    Ok(out)
}

pub fn parse_annotations(path: &Path) -> Result<Vec<AnnotationRecord>, IngestError> {
    let f = fs::File::open(path).map_err(|e| IngestError::io(path, e))?;
    read_annotations(f, path)
}

/// Builds one sample per annotation from the records falling in `[start, end)`.
///
/// Records inside a sample are ordered by timestamp (stable with respect
/// to input order). `annotations` must be non-overlapping, as returned by
/// [`parse_annotations`].
pub fn window_dataset(
    records: &[TrackRecord],
    annotations: &[AnnotationRecord],
    site_id: &str,
) -> Vec<IntervalSample> {
    let mut sorted: Vec<TrackRecord> = records.to_vec();
    sorted.sort_by(|a, b| a.timestamp().total_cmp(&b.timestamp()));
    annotations
        .iter()
        .map(|a| {
            let lo = sorted.partition_point(|r| r.timestamp() < a.interval_start);
            let hi = sorted.partition_point(|r| r.timestamp() < a.interval_end);
            IntervalSample::new(
                a.interval_start,
                a.interval_end - a.interval_start,
                sorted[lo..hi].to_vec(),
                Some(a.label),
                site_id,
            )
            .expect("records selected inside the annotation window")
        })
        .collect()
}

/// Writes records in canonical CSV. `comments` become leading `# ` lines.
pub fn write_tracks<W: Write>(
    mut w: W,
    records: &[TrackRecord],
    comments: &[String],
) -> io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{}", TRACK_HEADER.join(","))?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.timestamp(),
            r.sensor(),
            r.object_id(),
            r.range(),
            r.radial_velocity(),
            r.angle()
        )?;
    }
    w.flush()
}

pub fn write_annotations<W: Write>(
    mut w: W,
    annotations: &[AnnotationRecord],
    comments: &[String],
) -> io::Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{}", ANNOTATION_HEADER.join(","))?;
    for a in annotations {
        writeln!(w, "{},{},{}", a.interval_start, a.interval_end, a.label)?;
    }
    w.flush()
}

/// Converts labeled samples back to (records, annotations) for writing.
/// Unlabeled samples are skipped since annotations require a label.
pub fn samples_to_files(samples: &[IntervalSample]) -> (Vec<TrackRecord>, Vec<AnnotationRecord>) {
    let mut records = Vec::new();
    let mut annotations = Vec::new();
    for s in samples {
        let Some(label) = s.label() else { continue };
        records.extend_from_slice(s.records());
        annotations.push(AnnotationRecord {
            interval_start: s.start(),
            interval_end: s.end(),
            label,
        });
    }
    (records, annotations)
}

/// One (tracks, annotations, site, date) binding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub tracks: PathBuf,
    pub annotations: PathBuf,
    pub site: String,
    #[serde(default)]
    pub date: String,
}

/// TOML file with one `[[entry]]` table per data file pair. Relative paths
/// resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DatasetManifest {
    #[serde(default, rename = "entry")]
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<(), IngestError> {
        for (i, e) in self.entries.iter().enumerate() {
            if e.tracks.as_os_str().is_empty() || e.annotations.as_os_str().is_empty() {
                return Err(IngestError::Manifest(format!("entry {i}: empty path")));
            }
            if e.site.trim().is_empty() {
                return Err(IngestError::Manifest(format!("entry {i}: empty site id")));
            }
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str, base_dir: &Path) -> Result<Self, IngestError> {
        let mut m: DatasetManifest = toml::from_str(text)
            .map_err(|e| IngestError::Manifest(e.to_string().trim_end().to_string()))?;
        m.base_dir = base_dir.to_path_buf();
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let text = fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        DatasetManifest::from_toml_str(&text, base)
    }

    pub fn to_toml_string(&self, comments: &[String]) -> String {
        let mut out = String::new();
        for c in comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str(&toml::to_string(self).expect("manifest serializes"));
        out
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Parses every entry (in parallel when enabled) and concatenates the
    /// samples in manifest order.
    pub fn load_samples(&self) -> Result<Vec<IntervalSample>, IngestError> {
        self.validate()?;
        let per_entry = exec::try_map(&self.entries, |e| {
            let wrap = |path: PathBuf| {
                move |source: IngestError| IngestError::ManifestEntry {
                    path,
                    source: Box::new(source),
                }
            };
            let tp = self.resolve(&e.tracks);
            let ap = self.resolve(&e.annotations);
            let records =
                parse_track_file(&tp, TrackFormat::CanonicalCsv).map_err(wrap(tp.clone()))?;
            let annotations = parse_annotations(&ap).map_err(wrap(ap.clone()))?;
            Ok(window_dataset(&records, &annotations, &e.site))
        })?;
        Ok(per_entry.into_iter().flatten().collect())
    }
}
