//! Four binary classifiers behind one train/predict contract.
//!
//! [`ClassifierSpec`] names a classifier and its parameters;
//! [`ClassifierSpec::train`] turns labeled observations into a
//! [`TrainedModel`], which predicts from raw intervals (the baseline) or
//! from feature vectors (everything else) and round-trips through the
//! model file format described in [`model_file`].

pub mod baseline;
pub mod forest;
pub mod knn;
pub mod model_file;
pub mod svm;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{FeatureShape, FeatureVector, IntervalSample, Label};
use crate::features::{featurize, fit_normalizer, FeatureError};

pub use baseline::{baseline_classify, time_to_collision, BaselineModel, BaselineParams};
pub use forest::{forest_predict, gini, train_forest, ForestModel, ForestParams};
pub use knn::{knn_predict, train_knn, KnnModel, KnnParams};
pub use svm::{svm_predict, train_svm, Kernel, SvmModel, SvmParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("empty training set")]
    EmptySet,
    #[error("training data contains a single class")]
    SingleClassData,
    #[error("training sample {0} has no label")]
    Unlabeled(usize),
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch {
        expected: FeatureShape,
        found: FeatureShape,
    },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("gini of an empty node")]
    EmptyNode,
    #[error("the time-to-collision baseline needs raw interval records, not feature vectors")]
    NeedsRecords,
    #[error("model file version {found} is not supported (max {supported})")]
    VersionMismatch { found: u32, supported: u32 },
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Common checks: non-empty, labeled, one shape, both classes.
pub(crate) fn check_training_set(
    data: &[FeatureVector],
) -> Result<(FeatureShape, Vec<Label>), ModelError> {
    let first = data.first().ok_or(ModelError::EmptySet)?;
    let shape = first.shape();
    let mut labels = Vec::with_capacity(data.len());
    for (i, v) in data.iter().enumerate() {
        if v.shape() != shape {
            return Err(ModelError::ShapeMismatch {
                expected: shape,
                found: v.shape(),
            });
        }
        labels.push(v.label().ok_or(ModelError::Unlabeled(i))?);
    }
    if labels.iter().all(|l| *l == labels[0]) {
        return Err(ModelError::SingleClassData);
    }
    Ok((shape, labels))
}

/// A sample paired with its precomputed feature vector.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub sample: &'a IntervalSample,
    pub features: &'a FeatureVector,
}

impl Observation<'_> {
    pub fn label(&self) -> Option<Label> {
        self.sample.label()
    }
}

/// Classifier choice plus parameters. Serialized with a `classifier` tag, e.g.
/// `classifier = "forest"` followed by the parameter fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "classifier", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Forest(ForestParams),
    Svm(SvmParams),
    Knn(KnnParams),
    Baseline(BaselineParams),
}

impl ClassifierSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ClassifierSpec::Forest(_) => "forest",
            ClassifierSpec::Svm(_) => "svm",
            ClassifierSpec::Knn(_) => "knn",
            ClassifierSpec::Baseline(_) => "baseline",
        }
    }

    /// Default parameters for a classifier name.
    pub fn default_for(kind: &str) -> Option<Self> {
        Some(match kind {
            "forest" | "rf" => ClassifierSpec::Forest(ForestParams::default()),
            "svm" => ClassifierSpec::Svm(SvmParams::default()),
            "knn" => ClassifierSpec::Knn(KnnParams::default()),
            "baseline" | "ttc" => ClassifierSpec::Baseline(BaselineParams::default()),
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ClassifierSpec::Forest(p) => p.validate(),
            ClassifierSpec::Svm(p) => p.validate(),
            ClassifierSpec::Knn(p) => p.validate(),
            ClassifierSpec::Baseline(p) => p.validate(),
        }
    }

    /// Compact one-line description, stable across runs.
    pub fn describe(&self) -> String {
        match self {
            ClassifierSpec::Forest(p) => format!(
                "forest(n_trees={}, max_depth={}, min_samples={}, active_vars={}, bootstrap={}, seed={})",
                p.n_trees, p.max_depth, p.min_samples, p.active_vars, p.bootstrap, p.seed
            ),
            ClassifierSpec::Svm(p) => format!(
                "svm(kernel={:?}, c={}, gamma={}, coef0={}, tol={}, max_passes={})",
                p.kernel, p.c, p.gamma, p.coef0, p.kkt_tolerance, p.max_passes
            )
            .to_lowercase(),
            ClassifierSpec::Knn(p) => format!("knn(k={})", p.k),
            ClassifierSpec::Baseline(p) => format!("baseline(ttc_threshold={})", p.ttc_threshold),
        }
    }

    /// Trains on labeled observations. SVM and kNN fit a normalizer on
    /// exactly these observations; the forest and the baseline use raw values.
    pub fn train(
        &self,
        shape: FeatureShape,
        train: &[Observation<'_>],
    ) -> Result<TrainedModel, ModelError> {
        self.validate()?;
        if train.is_empty() {
            return Err(ModelError::EmptySet);
        }
        let vectors = || -> Result<Vec<FeatureVector>, ModelError> {
            train
                .iter()
                .enumerate()
                .map(|(i, o)| {
                    let label = o.label().ok_or(ModelError::Unlabeled(i))?;
                    if o.features.shape() != shape {
                        return Err(ModelError::ShapeMismatch {
                            expected: shape,
                            found: o.features.shape(),
                        });
                    }
                    Ok(o.features.clone().with_label(Some(label)))
                })
                .collect()
        };
        let body = match self {
            ClassifierSpec::Forest(p) => ModelBody::Forest(train_forest(&vectors()?, p)?),
            ClassifierSpec::Svm(p) => {
                let data = vectors()?;
                let norm = fit_normalizer(&data)?;
                ModelBody::Svm(train_svm(&data, p, norm)?)
            }
            ClassifierSpec::Knn(p) => {
                let data = vectors()?;
                let norm = fit_normalizer(&data)?;
                ModelBody::Knn(train_knn(&data, p, norm)?)
            }
            ClassifierSpec::Baseline(p) => {
                if let Some(i) = train.iter().position(|o| o.label().is_none()) {
                    return Err(ModelError::Unlabeled(i));
                }
                ModelBody::Baseline(BaselineModel::new(p.clone())?)
            }
        };
        Ok(TrainedModel {
            shape,
            metadata: BTreeMap::new(),
            body,
        })
    }

    /// Featurizes then trains. Convenience for callers holding bare samples.
    pub fn train_samples(
        &self,
        shape: FeatureShape,
        samples: &[IntervalSample],
    ) -> Result<TrainedModel, ModelError> {
        let features = crate::features::featurize_all(samples, shape);
        let obs: Vec<_> = samples
            .iter()
            .zip(&features)
            .map(|(sample, features)| Observation { sample, features })
            .collect();
        self.train(shape, &obs)
    }
}

impl fmt::Display for ClassifierSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelBody {
    Forest(ForestModel),
    Svm(SvmModel),
    Knn(KnnModel),
    Baseline(BaselineModel),
}

/// A trained classifier with the feature shape it expects and free-form
/// provenance metadata (run configuration, seed, training summary).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub shape: FeatureShape,
    pub metadata: BTreeMap<String, String>,
    pub body: ModelBody,
}

impl TrainedModel {
    pub fn kind(&self) -> &'static str {
        match self.body {
            ModelBody::Forest(_) => "forest",
            ModelBody::Svm(_) => "svm",
            ModelBody::Knn(_) => "knn",
            ModelBody::Baseline(_) => "baseline",
        }
    }

    /// `Some(false)` for an SVM whose solver hit the iteration cap.
    pub fn converged(&self) -> Option<bool> {
        match &self.body {
            ModelBody::Svm(m) => Some(m.converged()),
            _ => None,
        }
    }

    pub fn predict(&self, obs: Observation<'_>) -> Result<Label, ModelError> {
        match &self.body {
            ModelBody::Baseline(m) => Ok(m.predict(obs.sample)),
            _ => self.predict_vector(obs.features),
        }
    }

    pub fn predict_sample(&self, sample: &IntervalSample) -> Result<Label, ModelError> {
        match &self.body {
            ModelBody::Baseline(m) => Ok(m.predict(sample)),
            _ => self.predict_vector(&featurize(sample, self.shape)),
        }
    }

    /// Not available for the baseline, which needs the raw records.
    pub fn predict_vector(&self, v: &FeatureVector) -> Result<Label, ModelError> {
        if v.shape() != self.shape {
            return Err(ModelError::ShapeMismatch {
                expected: self.shape,
                found: v.shape(),
            });
        }
        match &self.body {
            ModelBody::Forest(m) => forest_predict(m, v),
            ModelBody::Svm(m) => svm_predict(m, v),
            ModelBody::Knn(m) => knn_predict(m, v),
            ModelBody::Baseline(_) => Err(ModelError::NeedsRecords),
        }
    }

    pub fn predict_all(&self, obs: &[Observation<'_>]) -> Result<Vec<Label>, ModelError> {
        crate::exec::try_map(obs, |o| self.predict(*o))
    }
}
