//! Soft-margin SVM trained with SMO.
//!
//! Solves the dual `min ½ αᵀQα − Σα` subject to `0 ≤ α ≤ C`, `Σ αᵢyᵢ = 0`
//! with `Q_ij = yᵢyⱼK(xᵢ,xⱼ)`. Each step updates the maximally violating
//! pair (second-order choice of the second index). Iteration stops once the
//! KKT gap falls under `kkt_tolerance` or after `max_passes · N` pair
//! updates; hitting the cap is reported through [`SvmModel::converged`].
//!
//! The sigmoid kernel is not positive semi-definite, so for it the cap is
//! the expected way out.

use serde::{Deserialize, Serialize};

use crate::domain::{FeatureShape, FeatureVector, Label};
use crate::features::Normalizer;

use super::{check_training_set, ModelError};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Sigmoid,
    Rbf,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub kernel: Kernel,
    pub c: f64,
    pub gamma: f64,
    pub coef0: f64,
    pub kkt_tolerance: f64,
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            kernel: Kernel::Sigmoid,
            c: 2.0,
            gamma: 0.1,
            coef0: 0.0,
            kkt_tolerance: 1e-3,
            max_passes: 200,
        }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "C must be > 0, got {}",
                self.c
            )));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(ModelError::InvalidParams(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !self.coef0.is_finite()
            || self.kkt_tolerance.is_nan()
            || self.kkt_tolerance <= 0.0
            || self.max_passes == 0
        {
            return Err(ModelError::InvalidParams(
                "coef0 must be finite, kkt_tolerance > 0, max_passes >= 1".into(),
            ));
        }
        Ok(())
    }

    pub fn kernel_value(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kernel {
            Kernel::Linear => dot(a, b),
            Kernel::Sigmoid => (self.gamma * dot(a, b) + self.coef0).tanh(),
            Kernel::Rbf => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-self.gamma * d2).exp()
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportVector {
    pub x: Vec<f64>,
    pub alpha: f64,
    /// +1 for safe, −1 for unsafe.
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    params: SvmParams,
    normalizer: Normalizer,
    support: Vec<SupportVector>,
    bias: f64,
    converged: bool,
    iterations: usize,
}

impl SvmModel {
    pub fn params(&self) -> &SvmParams {
        &self.params
    }
    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }
    pub fn shape(&self) -> FeatureShape {
        self.normalizer.shape()
    }
    pub fn support_vectors(&self) -> &[SupportVector] {
        &self.support
    }
    pub fn bias(&self) -> f64 {
        self.bias
    }
    /// False when the iteration cap was reached before the KKT gap closed.
    pub fn converged(&self) -> bool {
        self.converged
    }
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// `Σ αᵢyᵢK(xᵢ, x) + b` on the normalized input.
    pub fn decision_value(&self, v: &FeatureVector) -> Result<f64, ModelError> {
        let z = self.normalizer.apply(v).map_err(ModelError::from)?;
        Ok(self
            .support
            .iter()
            .map(|sv| sv.alpha * sv.y * self.params.kernel_value(&sv.x, z.values()))
            .sum::<f64>()
            + self.bias)
    }
}

/// Positive decision value means safe; zero and below mean unsafe.
pub fn svm_predict(model: &SvmModel, v: &FeatureVector) -> Result<Label, ModelError> {
    Ok(Label::from_bool_safe(model.decision_value(v)? > 0.0))
}

struct Solution {
    alpha: Vec<f64>,
    bias: f64,
    converged: bool,
    iterations: usize,
}

fn solve(q: &[f64], y: &[f64], c: f64, eps: f64, max_iter: usize) -> Solution {
    let n = y.len();
    let qd: Vec<f64> = (0..n).map(|i| q[i * n + i]).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i maximizes -y_t G_t over I_up
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let ok = if y[t] > 0.0 {
                !upper(alpha[t])
            } else {
                !lower(alpha[t])
            };
            if ok && -y[t] * grad[t] >= gmax {
                gmax = -y[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        let qi = &q[i * n..(i + 1) * n];
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            let ok = if y[t] > 0.0 {
                !lower(alpha[t])
            } else {
                !upper(alpha[t])
            };
            if !ok {
                continue;
            }
            let yg = y[t] * grad[t];
            gmax2 = gmax2.max(yg);
            let diff = gmax + yg;
            if diff > 0.0 {
                let quad = qd[i] + qd[t] - 2.0 * y[i] * y[t] * qi[t];
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(diff * diff) / quad;
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = Some(t);
                }
            }
        }
        let Some(j) = j_sel.filter(|_| gmax + gmax2 >= eps) else {
            converged = true;
            break;
        };
        iterations += 1;

        let qj = &q[j * n..(j + 1) * n];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qij = qi[j];
        if y[i] != y[j] {
            let quad = qd[i] + qd[j] + 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = qd[i] + qd[j] - 2.0 * qij;
            let quad = if quad > 0.0 { quad } else { TAU };
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += qi[t] * di + qj[t] * dj;
        }
    }

    // bias from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb, mut sum_free, mut n_free) =
        (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if upper(alpha[t]) {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[t]) {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    Solution {
        alpha,
        bias: -rho,
        converged,
        iterations,
    }
}

/// Trains on `data` after applying `norm`.
pub fn train_svm(
    data: &[FeatureVector],
    p: &SvmParams,
    norm: Normalizer,
) -> Result<SvmModel, ModelError> {
    p.validate()?;
    let (_, labels) = check_training_set(data)?;
    let xs: Vec<Vec<f64>> = data
        .iter()
        .map(|v| norm.apply(v).map(|z| z.values().to_vec()))
        .collect::<Result<_, _>>()?;
    let y: Vec<f64> = labels
        .iter()
        .map(|l| if l.is_safe() { 1.0 } else { -1.0 })
        .collect();
    let n = xs.len();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let k = y[i] * y[j] * p.kernel_value(&xs[i], &xs[j]);
            q[i * n + j] = k;
            q[j * n + i] = k;
        }
    }
    let max_iter = p.max_passes.saturating_mul(n.max(1));
    let sol = solve(&q, &y, p.c, p.kkt_tolerance, max_iter);
    let support = xs
        .into_iter()
        .zip(sol.alpha.iter().zip(&y))
        .filter(|(_, (a, _))| **a > 0.0)
        .map(|(x, (&alpha, &y))| SupportVector { x, alpha, y })
        .collect();
    Ok(SvmModel {
        params: p.clone(),
        normalizer: norm,
        support,
        bias: sol.bias,
        converged: sol.converged,
        iterations: sol.iterations,
    })
}
