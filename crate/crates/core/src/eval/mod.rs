//! Metrics, splits, cross-validated grid search and the two experiment
//! protocols: a stratified train/test split and a held-out-site split.
//!
//! "Safe to cross" (label 1) is the positive class throughout, so a false
//! positive is an interval predicted safe that was actually unsafe.

mod cv;
mod report;
mod split;

use thiserror::Error;

use crate::classifiers::{ModelError, Observation};
use crate::domain::{FeatureShape, FeatureVector, IntervalSample, Label};
use crate::features::featurize_all;

pub use cv::{
    cross_validate, generalization_eval, grid_search, CvOutcome, FoldResult, GeneralizationOutcome,
    GridFile, GridResult, GridRow, GridSpec, SelectionMetric,
};
pub use report::{confusion, evaluate, ConfusionMatrix, EvalReport};
pub use split::{fold_assignment, stratified_split, stratified_split_labels, Split, SplitRatio};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("prediction and truth lengths differ ({pred} vs {truth})")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("nothing to evaluate")]
    Empty,
    #[error("too few samples: {found}, need at least {needed}")]
    TooFewSamples { found: usize, needed: usize },
    #[error("split needs both classes; only {0:?} present")]
    MissingClass(Label),
    #[error("sample {0} has no label")]
    Unlabeled(usize),
    #[error("fold too small: {0}")]
    FoldTooSmall(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("test site `{0}` is also a training site")]
    SiteOverlap(String),
    #[error("no samples for site(s) {0}")]
    EmptySite(String),
    #[error("site leakage: training set contains test-site sample {0}")]
    SiteLeak(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Samples with their feature vectors computed once up front.
#[derive(Debug, Clone)]
pub struct Corpus {
    shape: FeatureShape,
    samples: Vec<IntervalSample>,
    features: Vec<FeatureVector>,
}

impl Corpus {
    pub fn new(samples: Vec<IntervalSample>, shape: FeatureShape) -> Self {
        let features = featurize_all(&samples, shape);
        Corpus {
            shape,
            samples,
            features,
        }
    }

    pub fn shape(&self) -> FeatureShape {
        self.shape
    }
    pub fn len(&self) -> usize {
        self.samples.len()
    }
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
    pub fn samples(&self) -> &[IntervalSample] {
        &self.samples
    }
    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn observation(&self, i: usize) -> Observation<'_> {
        Observation {
            sample: &self.samples[i],
            features: &self.features[i],
        }
    }

    pub fn observations(&self, idx: &[usize]) -> Vec<Observation<'_>> {
        idx.iter().map(|&i| self.observation(i)).collect()
    }

    pub fn all_indices(&self) -> Vec<usize> {
        (0..self.len()).collect()
    }

    pub fn labels(&self) -> Result<Vec<Label>, EvalError> {
        self.samples
            .iter()
            .enumerate()
            .map(|(i, s)| s.label().ok_or(EvalError::Unlabeled(i)))
            .collect()
    }

    pub fn labels_at(&self, idx: &[usize]) -> Result<Vec<Label>, EvalError> {
        idx.iter()
            .map(|&i| self.samples[i].label().ok_or(EvalError::Unlabeled(i)))
            .collect()
    }

    /// Indices of samples whose site is in `sites`.
    pub fn indices_for_sites<'s>(&self, sites: impl IntoIterator<Item = &'s str>) -> Vec<usize> {
        let sites: Vec<&str> = sites.into_iter().collect();
        (0..self.len())
            .filter(|&i| sites.contains(&self.samples[i].site_id()))
            .collect()
    }

    /// Distinct site ids in first-appearance order.
    pub fn sites(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.samples {
            if !out.iter().any(|x| x == s.site_id()) {
                out.push(s.site_id().to_string());
            }
        }
        out
    }
}
