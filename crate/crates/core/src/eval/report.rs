use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::classifiers::{Observation, TrainedModel};
use crate::domain::Label;

use super::EvalError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// `None` when nothing was predicted safe.
    pub fn precision(&self) -> Option<f64> {
        let d = self.tp + self.fp;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    /// `None` when no sample was actually safe.
    pub fn recall(&self) -> Option<f64> {
        let d = self.tp + self.fn_;
        (d > 0).then(|| self.tp as f64 / d as f64)
    }

    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.tp + self.tn) as f64 / n as f64)
    }

    pub fn add(&mut self, pred: Label, truth: Label) {
        match (pred, truth) {
            (Label::Safe, Label::Safe) => self.tp += 1,
            (Label::Safe, Label::Unsafe) => self.fp += 1,
            (Label::Unsafe, Label::Unsafe) => self.tn += 1,
            (Label::Unsafe, Label::Safe) => self.fn_ += 1,
        }
    }

    /// Rows are truth, columns are prediction.
    pub fn to_csv(&self) -> String {
        format!(
            "truth,pred_unsafe,pred_safe\nunsafe,{},{}\nsafe,{},{}\n",
            self.tn, self.fp, self.fn_, self.tp
        )
    }
}

pub fn confusion(pred: &[Label], truth: &[Label]) -> Result<ConfusionMatrix, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut m = ConfusionMatrix::default();
    for (&p, &t) in pred.iter().zip(truth) {
        m.add(p, t);
    }
    Ok(m)
}

/// Evaluation summary. Undefined precision or recall is stored as `None`
/// (JSON `null`) and named in `flags`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classifier: String,
    pub split: String,
    pub seed: u64,
    pub confusion: ConfusionMatrix,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: f64,
    pub flags: Vec<String>,
    /// Provenance of the run that produced this report.
    #[serde(default)]
    pub run: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn from_confusion(
        confusion: ConfusionMatrix,
        classifier: impl Into<String>,
        split: impl Into<String>,
        seed: u64,
    ) -> Result<Self, EvalError> {
        let accuracy = confusion.accuracy().ok_or(EvalError::Empty)?;
        let precision = confusion.precision();
        let recall = confusion.recall();
        let mut flags = Vec::new();
        if precision.is_none() {
            flags.push("precision_undefined".to_string());
        }
        if recall.is_none() {
            flags.push("recall_undefined".to_string());
        }
        Ok(EvalReport {
            classifier: classifier.into(),
            split: split.into(),
            seed,
            confusion,
            precision,
            recall,
            accuracy,
            flags,
            run: BTreeMap::new(),
        })
    }

    pub fn from_predictions(
        pred: &[Label],
        truth: &[Label],
        classifier: impl Into<String>,
        split: impl Into<String>,
        seed: u64,
    ) -> Result<Self, EvalError> {
        Self::from_confusion(confusion(pred, truth)?, classifier, split, seed)
    }

    /// Stored metrics equal the ones recomputed from the confusion matrix.
    pub fn is_consistent(&self) -> bool {
        let c = &self.confusion;
        same(self.precision, c.precision())
            && same(self.recall, c.recall())
            && c.accuracy()
                .is_some_and(|a| a.to_bits() == self.accuracy.to_bits())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_table(&self) -> String {
        let pct = |v: Option<f64>| match v {
            Some(x) => format!("{:.1}%", 100.0 * x),
            None => "undefined".to_string(),
        };
        let c = &self.confusion;
        let mut s = String::new();
        let _ = writeln!(s, "classifier : {}", self.classifier);
        let _ = writeln!(s, "split      : {}", self.split);
        let _ = writeln!(s, "seed       : {}", self.seed);
        let _ = writeln!(s, "samples    : {}", c.total());
        let _ = writeln!(s);
        let _ = writeln!(s, "               pred unsafe  pred safe");
        let _ = writeln!(s, "  true unsafe  {:>11}  {:>9}", c.tn, c.fp);
        let _ = writeln!(s, "  true safe    {:>11}  {:>9}", c.fn_, c.tp);
        let _ = writeln!(s);
        let _ = writeln!(s, "precision  : {}", pct(self.precision));
        let _ = writeln!(s, "recall     : {}", pct(self.recall));
        let _ = writeln!(s, "accuracy   : {}", pct(Some(self.accuracy)));
        if !self.flags.is_empty() {
            let _ = writeln!(s, "flags      : {}", self.flags.join(", "));
        }
        s
    }
}

fn same(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (Some(x), Some(y)) => x.to_bits() == y.to_bits(),
        (None, None) => true,
        _ => false,
    }
}

/// Predicts every observation and scores it against its label.
pub fn evaluate(
    model: &TrainedModel,
    obs: &[Observation<'_>],
    split: &str,
    seed: u64,
) -> Result<EvalReport, EvalError> {
    if obs.is_empty() {
        return Err(EvalError::Empty);
    }
    let truth: Vec<Label> = obs
        .iter()
        .enumerate()
        .map(|(i, o)| o.label().ok_or(EvalError::Unlabeled(i)))
        .collect::<Result<_, _>>()?;
    let pred = model.predict_all(obs)?;
    let classifier = model
        .metadata
        .get("classifier")
        .cloned()
        .unwrap_or_else(|| model.kind().to_string());
    EvalReport::from_predictions(&pred, &truth, classifier, split, seed)
}
