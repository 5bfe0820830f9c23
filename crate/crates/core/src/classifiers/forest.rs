//! Random forest of CART trees with Gini splits.
//!
//! Each tree sees a bootstrap resample of the training set and, at every
//! node, a fresh random subset of `active_vars` feature dimensions. Tree
//! `i` draws from ChaCha stream `i` of the user seed, so trees can be
//! grown in any order (or in parallel) with identical results.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{FeatureShape, FeatureVector, Label};
use crate::exec;

use super::{check_training_set, ModelError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples: usize,
    /// Clamped to the feature dimension at training time.
    pub active_vars: usize,
    /// Draw a bootstrap resample per tree. Disabling trains every tree on the full set.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: 100,
            min_samples: 50,
            active_vars: 100,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: &str| Err(ModelError::InvalidParams(m.to_string()));
        if self.n_trees == 0 {
            return bad("n_trees must be >= 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be >= 1");
        }
        if self.min_samples < 2 {
            return bad("min_samples must be >= 2");
        }
        if self.active_vars == 0 {
            return bad("active_vars must be >= 1");
        }
        Ok(())
    }
}

/// Gini impurity `1 - p0² - p1²` of a two-class node.
pub fn gini(n_unsafe: usize, n_safe: usize) -> Result<f64, ModelError> {
    let n = n_unsafe + n_safe;
    if n == 0 {
        return Err(ModelError::EmptyNode);
    }
    Ok(gini_unchecked(n_unsafe, n_safe))
}

#[inline]
fn gini_unchecked(n0: usize, n1: usize) -> f64 {
    let n = (n0 + n1) as f64;
    let p0 = n0 as f64 / n;
    let p1 = n1 as f64 / n;
    1.0 - (p0 * p0 + p1 * p1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        label: Label,
    },
    /// `x[feature] <= threshold` goes left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn single_leaf(label: Label) -> Self {
        Tree {
            nodes: vec![Node::Leaf { label }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn is_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn predict(&self, x: &[f64]) -> Label {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { label } => return label,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    shape: FeatureShape,
    params: ForestParams,
    trees: Vec<Tree>,
}

impl ForestModel {
    pub fn from_trees(shape: FeatureShape, params: ForestParams, trees: Vec<Tree>) -> Self {
        ForestModel {
            shape,
            params,
            trees,
        }
    }

    pub fn shape(&self) -> FeatureShape {
        self.shape
    }
    pub fn params(&self) -> &ForestParams {
        &self.params
    }
    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// `(unsafe votes, safe votes)`.
    pub fn votes(&self, v: &FeatureVector) -> Result<(usize, usize), ModelError> {
        if v.shape() != self.shape {
            return Err(ModelError::ShapeMismatch {
                expected: self.shape,
                found: v.shape(),
            });
        }
        let safe = self
            .trees
            .iter()
            .filter(|t| t.predict(v.values()).is_safe())
            .count();
        Ok((self.trees.len() - safe, safe))
    }
}

/// Majority vote. Ties go to unsafe.
pub fn forest_predict(model: &ForestModel, v: &FeatureVector) -> Result<Label, ModelError> {
    let (u, s) = model.votes(v)?;
    Ok(Label::from_bool_safe(s > u))
}

struct Matrix<'a> {
    rows: Vec<&'a [f64]>,
    labels: Vec<Label>,
}

fn majority(labels: &[Label], idx: &[usize]) -> (usize, usize, Label) {
    let safe = idx.iter().filter(|&&i| labels[i].is_safe()).count();
    let uns = idx.len() - safe;
    (uns, safe, Label::from_bool_safe(safe > uns))
}

struct SplitChoice {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn midpoint(a: f64, b: f64) -> f64 {
    let m = a * 0.5 + b * 0.5;
    if m >= b || m < a {
        a
    } else {
        m
    }
}

fn best_split(
    data: &Matrix,
    idx: &[usize],
    features: &[usize],
    parent: f64,
) -> Option<SplitChoice> {
    let n = idx.len();
    let total_safe = idx.iter().filter(|&&i| data.labels[i].is_safe()).count();
    let mut best: Option<SplitChoice> = None;
    let mut col: Vec<(f64, bool)> = Vec::with_capacity(n);
    for &f in features {
        col.clear();
        col.extend(
            idx.iter()
                .map(|&i| (data.rows[i][f], data.labels[i].is_safe())),
        );
        col.sort_by(|a, b| a.0.total_cmp(&b.0));
        if col[0].0 == col[n - 1].0 {
            continue;
        }
        let mut left_safe = 0usize;
        for i in 0..n - 1 {
            if col[i].1 {
                left_safe += 1;
            }
            if col[i].0 == col[i + 1].0 {
                continue;
            }
            let nl = i + 1;
            let nr = n - nl;
            let right_safe = total_safe - left_safe;
            let weighted = (nl as f64 * gini_unchecked(nl - left_safe, left_safe)
                + nr as f64 * gini_unchecked(nr - right_safe, right_safe))
                / n as f64;
            let gain = parent - weighted;
            if gain > 1e-12 && best.as_ref().is_none_or(|b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature: f,
                    threshold: midpoint(col[i].0, col[i + 1].0),
                    gain,
                });
            }
        }
    }
    best
}

fn grow_tree(data: &Matrix, dim: usize, p: &ForestParams, tree_index: u64) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    rng.set_stream(tree_index);
    let n = data.rows.len();
    let root: Vec<usize> = if p.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mtry = p.active_vars.min(dim);

    let mut nodes = vec![Node::Leaf {
        label: Label::Unsafe,
    }];
    // (node slot, sample indices, depth)
    let mut stack = vec![(0usize, root, 0usize)];
    while let Some((slot, idx, depth)) = stack.pop() {
        let (n0, n1, label) = majority(&data.labels, &idx);
        let leaf = Node::Leaf { label };
        if depth >= p.max_depth || idx.len() < p.min_samples || n0 == 0 || n1 == 0 {
            nodes[slot] = leaf;
            continue;
        }
        let features = index::sample(&mut rng, dim, mtry).into_vec();
        let Some(split) = best_split(data, &idx, &features, gini_unchecked(n0, n1)) else {
            nodes[slot] = leaf;
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| data.rows[i][split.feature] <= split.threshold);
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf {
            label: Label::Unsafe,
        });
        nodes.push(Node::Leaf {
            label: Label::Unsafe,
        });
        nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        // right first so the left subtree is expanded first
        stack.push((right, r, depth + 1));
        stack.push((left, l, depth + 1));
    }
    Tree { nodes }
}

pub fn train_forest(data: &[FeatureVector], p: &ForestParams) -> Result<ForestModel, ModelError> {
    p.validate()?;
    let (shape, labels) = check_training_set(data)?;
    let matrix = Matrix {
        rows: data.iter().map(|v| v.values()).collect(),
        labels,
    };
    let dim = shape.len();
    let trees = exec::map_range(p.n_trees, |t| grow_tree(&matrix, dim, p, t as u64));
    Ok(ForestModel {
        shape,
        params: p.clone(),
        trees,
    })
}
