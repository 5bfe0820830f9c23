//! Core value types shared by every stage of the pipeline.
//!
//! Units: seconds, meters, meters/second and degrees. Radial velocity is
//! positive when the object is approaching the robot and negative when it
//! is receding.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of values stored per object and timestep: range, radial velocity, angle.
pub const FEATURES_PER_OBJECT: usize = 3;

/// Default window length in seconds.
pub const DEFAULT_WINDOW_S: f64 = 5.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("field `{0}` is not finite")]
    NonFiniteField(&'static str),
    #[error("negative range {0} m")]
    NegativeRange(f64),
    #[error("unknown sensor `{0}`")]
    UnknownSensor(String),
    #[error("invalid label value {0}, expected 0 or 1")]
    BadLabel(i64),
    #[error("invalid feature shape: {0}")]
    InvalidShape(String),
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
}

/// The tracker that produced a detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sensor {
    RadarLeft,
    RadarRight,
    Laser,
}

impl Sensor {
    pub const ALL: [Sensor; 3] = [Sensor::RadarLeft, Sensor::RadarRight, Sensor::Laser];

    pub fn as_str(self) -> &'static str {
        match self {
            Sensor::RadarLeft => "radar_left",
            Sensor::RadarRight => "radar_right",
            Sensor::Laser => "laser",
        }
    }
}

impl fmt::Display for Sensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Sensor {
    type Err = DomainError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "radar_left" => Ok(Sensor::RadarLeft),
            "radar_right" => Ok(Sensor::RadarRight),
            "laser" => Ok(Sensor::Laser),
            other => Err(DomainError::UnknownSensor(other.to_string())),
        }
    }
}

/// Crossing decision. `Unsafe` is 0 and `Safe` is 1; `Safe` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Label {
    Unsafe = 0,
    Safe = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_bool_safe(safe: bool) -> Self {
        if safe {
            Label::Safe
        } else {
            Label::Unsafe
        }
    }

    pub fn is_safe(self) -> bool {
        self == Label::Safe
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.as_u8()
    }
}

impl TryFrom<u8> for Label {
    type Error = DomainError;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        Label::try_from(i64::from(v))
    }
}

impl TryFrom<i64> for Label {
    type Error = DomainError;

    fn try_from(v: i64) -> Result<Self, Self::Error> {
        match v {
            0 => Ok(Label::Unsafe),
            1 => Ok(Label::Safe),
            other => Err(DomainError::BadLabel(other)),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

/// An unvalidated detection, as read from a file or produced by a generator.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    pub timestamp: f64,
    pub sensor: String,
    pub object_id: u64,
    pub range: f64,
    pub radial_velocity: f64,
    pub angle: f64,
}

/// One timestamped detection of one tracked object.
///
/// Only obtainable through [`validate_record`] or [`TrackRecord::new`], so
/// every value satisfies: finite fields, `range >= 0`, `angle` in `[-180, 180)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    timestamp: f64,
    sensor: Sensor,
    object_id: u64,
    range: f64,
    radial_velocity: f64,
    angle: f64,
}

impl TrackRecord {
    pub fn new(
        timestamp: f64,
        sensor: Sensor,
        object_id: u64,
        range: f64,
        radial_velocity: f64,
        angle: f64,
    ) -> Result<Self, DomainError> {
        for (name, v) in [
            ("timestamp", timestamp),
            ("range", range),
            ("radial_velocity", radial_velocity),
            ("angle", angle),
        ] {
            if !v.is_finite() {
                return Err(DomainError::NonFiniteField(name));
            }
        }
        if range < 0.0 {
            return Err(DomainError::NegativeRange(range));
        }
        Ok(TrackRecord {
            timestamp,
            sensor,
            object_id,
            range,
            radial_velocity,
            angle: wrap_angle(angle),
        })
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }
    pub fn sensor(&self) -> Sensor {
        self.sensor
    }
    pub fn object_id(&self) -> u64 {
        self.object_id
    }
    /// Identity of the tracked object. Sensors do not share an ID space.
    pub fn object_key(&self) -> (Sensor, u64) {
        (self.sensor, self.object_id)
    }
    pub fn range(&self) -> f64 {
        self.range
    }
    pub fn radial_velocity(&self) -> f64 {
        self.radial_velocity
    }
    pub fn angle(&self) -> f64 {
        self.angle
    }

    pub fn to_raw(&self) -> RawRecord {
        RawRecord {
            timestamp: self.timestamp,
            sensor: self.sensor.as_str().to_string(),
            object_id: self.object_id,
            range: self.range,
            radial_velocity: self.radial_velocity,
            angle: self.angle,
        }
    }

    /// Same detection shifted in time and ID space. Used when concatenating runs.
    pub fn shifted(&self, dt: f64, id_offset: u64) -> Result<Self, DomainError> {
        TrackRecord::new(
            self.timestamp + dt,
            self.sensor,
            self.object_id + id_offset,
            self.range,
            self.radial_velocity,
            self.angle,
        )
    }
}

/// Wraps an angle in degrees into `[-180, 180)`. Values already inside are returned unchanged.
pub fn wrap_angle(angle: f64) -> f64 {
    if (-180.0..180.0).contains(&angle) {
        return angle;
    }
    let mut a = (angle + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if a >= 180.0 {
        a -= 360.0;
    }
    if a < -180.0 {
        a = -180.0;
    }
    a
}

/// Checks a candidate record and normalizes its angle.
pub fn validate_record(raw: &RawRecord) -> Result<TrackRecord, DomainError> {
    let sensor: Sensor = raw.sensor.parse()?;
    TrackRecord::new(
        raw.timestamp,
        sensor,
        raw.object_id,
        raw.range,
        raw.radial_velocity,
        raw.angle,
    )
}

/// All detections inside one `[start, start + duration)` window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSample {
    start: f64,
    duration: f64,
    records: Vec<TrackRecord>,
    label: Option<Label>,
    site_id: String,
}

impl IntervalSample {
    pub fn new(
        start: f64,
        duration: f64,
        records: Vec<TrackRecord>,
        label: Option<Label>,
        site_id: impl Into<String>,
    ) -> Result<Self, DomainError> {
        if !start.is_finite() || !duration.is_finite() || duration <= 0.0 {
            return Err(DomainError::InvalidInterval(format!(
                "start {start}, duration {duration}"
            )));
        }
        let end = start + duration;
        if let Some(r) = records
            .iter()
            .find(|r| r.timestamp() < start || r.timestamp() >= end)
        {
            return Err(DomainError::InvalidInterval(format!(
                "record at t={} outside [{start}, {end})",
                r.timestamp()
            )));
        }
        Ok(IntervalSample {
            start,
            duration,
            records,
            label,
            site_id: site_id.into(),
        })
    }

    pub fn start(&self) -> f64 {
        self.start
    }
    pub fn duration(&self) -> f64 {
        self.duration
    }
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
    pub fn records(&self) -> &[TrackRecord] {
        &self.records
    }
    pub fn label(&self) -> Option<Label> {
        self.label
    }
    pub fn site_id(&self) -> &str {
        &self.site_id
    }

    pub fn with_records(&self, records: Vec<TrackRecord>) -> Result<Self, DomainError> {
        IntervalSample::new(
            self.start,
            self.duration,
            records,
            self.label,
            self.site_id.clone(),
        )
    }
}

/// Dimensions of the flat feature vector: `max_objects × 3 × timesteps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "ShapeRepr", into = "ShapeRepr")]
pub struct FeatureShape {
    max_objects: usize,
    timesteps: usize,
}

#[derive(Serialize, Deserialize)]
struct ShapeRepr {
    max_objects: usize,
    timesteps: usize,
}

impl TryFrom<ShapeRepr> for FeatureShape {
    type Error = DomainError;
    fn try_from(r: ShapeRepr) -> Result<Self, Self::Error> {
        FeatureShape::new(r.max_objects, r.timesteps)
    }
}

impl From<FeatureShape> for ShapeRepr {
    fn from(s: FeatureShape) -> Self {
        ShapeRepr {
            max_objects: s.max_objects,
            timesteps: s.timesteps,
        }
    }
}

impl Default for FeatureShape {
    fn default() -> Self {
        FeatureShape {
            max_objects: 10,
            timesteps: 10,
        }
    }
}

impl FeatureShape {
    pub fn new(max_objects: usize, timesteps: usize) -> Result<Self, DomainError> {
        if max_objects == 0 || timesteps == 0 {
            return Err(DomainError::InvalidShape(format!(
                "m={max_objects}, k={timesteps}; both must be >= 1"
            )));
        }
        Ok(FeatureShape {
            max_objects,
            timesteps,
        })
    }

    pub fn max_objects(&self) -> usize {
        self.max_objects
    }
    pub fn timesteps(&self) -> usize {
        self.timesteps
    }
    pub fn features_per_object(&self) -> usize {
        FEATURES_PER_OBJECT
    }
    pub fn len(&self) -> usize {
        self.max_objects * FEATURES_PER_OBJECT * self.timesteps
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Flat index of `(slot, timestep, feature)` in row-major order.
    pub fn index(&self, slot: usize, timestep: usize, feature: usize) -> usize {
        debug_assert!(slot < self.max_objects && timestep < self.timesteps);
        debug_assert!(feature < FEATURES_PER_OBJECT);
        (slot * self.timesteps + timestep) * FEATURES_PER_OBJECT + feature
    }
}

impl fmt::Display for FeatureShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}x{}x{}",
            self.max_objects, FEATURES_PER_OBJECT, self.timesteps
        )
    }
}

/// Flat feature vector with an optional label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    shape: FeatureShape,
    values: Vec<f64>,
    label: Option<Label>,
}

impl FeatureVector {
    pub fn new(
        shape: FeatureShape,
        values: Vec<f64>,
        label: Option<Label>,
    ) -> Result<Self, DomainError> {
        if values.len() != shape.len() {
            return Err(DomainError::InvalidShape(format!(
                "{} values for shape {shape} (expected {})",
                values.len(),
                shape.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(DomainError::NonFiniteField("feature value"));
        }
        Ok(FeatureVector {
            shape,
            values,
            label,
        })
    }

    pub fn shape(&self) -> FeatureShape {
        self.shape
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn label(&self) -> Option<Label> {
        self.label
    }
    pub fn with_label(mut self, label: Option<Label>) -> Self {
        self.label = label;
        self
    }
    pub fn len(&self) -> usize {
        self.values.len()
    }
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
