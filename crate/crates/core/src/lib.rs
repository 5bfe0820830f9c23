//! Street-crossing safety classification from radar tracks.
//!
//! Raw tracks are windowed into labelled intervals ([`ingest`]), turned into
//! fixed-length vectors ([`features`]), and classified as safe or unsafe by a
//! random forest, an SVM, kNN or a time-to-collision rule ([`classifiers`]).
//! [`eval`] runs splits, cross-validated grid search and cross-site tests;
//! [`synth`] generates labelled traffic for testing.

pub mod classifiers;
pub mod domain;
pub mod eval;
pub mod exec;
pub mod features;
pub mod ingest;
pub mod synth;

pub use classifiers::{ClassifierSpec, ModelError, Observation, TrainedModel};
pub use domain::{FeatureShape, FeatureVector, IntervalSample, Label, Sensor, TrackRecord};
pub use eval::{Corpus, EvalError, EvalReport};
