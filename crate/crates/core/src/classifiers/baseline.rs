//! Time-to-collision rule.
//!
//! An interval is unsafe as soon as any single detection in it has a
//! constant-velocity time to collision under the threshold. Temporal
//! behavior is ignored.

use serde::{Deserialize, Serialize};

use crate::domain::{IntervalSample, Label, TrackRecord};

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    /// Seconds.
    pub ttc_threshold: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        BaselineParams {
            ttc_threshold: 10.0,
        }
    }
}

impl BaselineParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.ttc_threshold.is_nan() || self.ttc_threshold <= 0.0 {
            return Err(ModelError::InvalidParams(format!(
                "ttc_threshold must be > 0, got {}",
                self.ttc_threshold
            )));
        }
        Ok(())
    }
}

/// `range / radial_velocity` for approaching objects, `+inf` otherwise.
pub fn time_to_collision(record: &TrackRecord) -> f64 {
    if record.radial_velocity() > 0.0 {
        record.range() / record.radial_velocity()
    } else {
        f64::INFINITY
    }
}

pub fn baseline_classify(sample: &IntervalSample, p: &BaselineParams) -> Label {
    let unsafe_ = sample
        .records()
        .iter()
        .any(|r| time_to_collision(r) < p.ttc_threshold);
    Label::from_bool_safe(!unsafe_)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineModel {
    pub params: BaselineParams,
}

impl BaselineModel {
    pub fn new(params: BaselineParams) -> Result<Self, ModelError> {
        params.validate()?;
        Ok(BaselineModel { params })
    }

    pub fn predict(&self, sample: &IntervalSample) -> Label {
        baseline_classify(sample, &self.params)
    }
}
