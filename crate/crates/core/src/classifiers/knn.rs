use serde::{Deserialize, Serialize};

use crate::domain::{FeatureShape, FeatureVector, Label};
use crate::features::Normalizer;

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        KnnParams { k: 8 }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.k == 0 {
            return Err(ModelError::InvalidParams("k must be >= 1".into()));
        }
        Ok(())
    }
}

/// Normalized reference set with Euclidean majority voting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    params: KnnParams,
    normalizer: Normalizer,
    points: Vec<Vec<f64>>,
    labels: Vec<Label>,
}

impl KnnModel {
    pub fn params(&self) -> &KnnParams {
        &self.params
    }
    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }
    pub fn shape(&self) -> FeatureShape {
        self.normalizer.shape()
    }
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of the `k` nearest training points; distance ties go to the lower index.
    pub fn neighbors(&self, v: &FeatureVector) -> Result<Vec<usize>, ModelError> {
        let z = self.normalizer.apply(v)?;
        let mut d: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let s: f64 = p
                    .iter()
                    .zip(z.values())
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (s, i)
            })
            .collect();
        let k = self.params.k.min(d.len());
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, cmp);
            d.truncate(k);
        }
        d.sort_by(cmp);
        Ok(d.into_iter().map(|(_, i)| i).collect())
    }
}

pub fn train_knn(
    data: &[FeatureVector],
    p: &KnnParams,
    norm: Normalizer,
) -> Result<KnnModel, ModelError> {
    p.validate()?;
    if data.is_empty() {
        return Err(ModelError::EmptySet);
    }
    let mut points = Vec::with_capacity(data.len());
    let mut labels = Vec::with_capacity(data.len());
    for (i, v) in data.iter().enumerate() {
        labels.push(v.label().ok_or(ModelError::Unlabeled(i))?);
        points.push(norm.apply(v)?.values().to_vec());
    }
    Ok(KnnModel {
        params: p.clone(),
        normalizer: norm,
        points,
        labels,
    })
}

/// Majority of the k nearest labels. A tied vote is unsafe.
pub fn knn_predict(model: &KnnModel, v: &FeatureVector) -> Result<Label, ModelError> {
    let nn = model.neighbors(v)?;
    let safe = nn.iter().filter(|&&i| model.labels[i].is_safe()).count();
    Ok(Label::from_bool_safe(2 * safe > nn.len()))
}
