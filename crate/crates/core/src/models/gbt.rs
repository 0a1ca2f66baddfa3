//! Gradient-boosted regression trees under logistic loss.
//!
//! Scores start at the log-odds of the base rate. Each round fits a
//! regression tree to the residuals `y - sigmoid(score)` (the negative
//! gradient of log-loss), sets each leaf to the one-step Newton value
//! `sum(residual) / sum(p * (1 - p))` over its rows, and adds
//! `learning_rate` times the tree output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, TreeNode, TreeParams};
use super::{log_loss, logit, sigmoid, ModelError};
use crate::features::{FeatureMatrix, RowView};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtHyper {
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// `None` considers every column at each split.
    pub max_features: Option<usize>,
    pub seed: u64,
}

impl Default for GbtHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            n_estimators: 200,
            max_depth: 3,
            min_leaf: 5,
            max_features: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub init_score: f64,
    pub trees: Vec<TreeNode>,
    pub learning_rate: f64,
    pub n_estimators: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl GbtModel {
    pub fn score_row(&self, row: RowView<'_>) -> f64 {
        let boost: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        self.init_score + self.learning_rate * boost
    }

    pub fn predict_row(&self, row: RowView<'_>) -> f64 {
        sigmoid(self.score_row(row))
    }
}

pub fn fit_gbt(x: &FeatureMatrix, hyper: &GbtHyper) -> Result<GbtModel, ModelError> {
    fit_gbt_traced(x, hyper).map(|(m, _)| m)
}

/// Like [`fit_gbt`], also returning the training log-loss before the first
/// round and after each round.
pub fn fit_gbt_traced(x: &FeatureMatrix, hyper: &GbtHyper) -> Result<(GbtModel, Vec<f64>), ModelError> {
    super::check_labels(x.labels())?;
    if !(hyper.learning_rate > 0.0 && hyper.learning_rate <= 1.0) {
        return Err(ModelError::InvalidHyper("learning_rate must lie in (0, 1]".into()));
    }
    let n = x.n_rows();
    let y: Vec<f64> = x.labels().iter().map(|&v| f64::from(v)).collect();
    let base_rate = y.iter().sum::<f64>() / n as f64;
    let init_score = logit(base_rate);
    let params = TreeParams {
        max_depth: Some(hyper.max_depth),
        max_features: super::forest::resolve_max_features(hyper.max_features.or(Some(x.width())), x.width()),
        min_leaf: hyper.min_leaf,
    };
    let rows: Vec<usize> = (0..n).collect();
    let mut scores = vec![init_score; n];
    let mut losses = vec![log_loss(&scores, &y)];
    let mut trees = Vec::with_capacity(hyper.n_estimators);
    let mut residuals = vec![0.0; n];
    for round in 0..hyper.n_estimators {
        for ((r, s), t) in residuals.iter_mut().zip(&scores).zip(&y) {
            *r = t - sigmoid(*s);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_indexed(hyper.seed, round as u64));
        let mut tree = fit_tree(x, &rows, &residuals, &params, &mut rng);
        tree.refit_leaves(x, &rows, &mut |leaf_rows| newton_step(leaf_rows, &residuals, &y));
        for (i, s) in scores.iter_mut().enumerate() {
            *s += hyper.learning_rate * tree.predict(x.row(i));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(ModelError::NonFiniteScore { round });
        }
        losses.push(log_loss(&scores, &y));
        trees.push(tree);
    }
    Ok((
        GbtModel {
            init_score,
            trees,
            learning_rate: hyper.learning_rate,
            n_estimators: hyper.n_estimators,
            max_depth: hyper.max_depth,
            seed: hyper.seed,
        },
        losses,
    ))
}

/// `p * (1 - p)` is recovered from the residual as `(y - r) * (1 - y + r)`.
fn newton_step(rows: &[usize], residuals: &[f64], y: &[f64]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for &i in rows {
        let r = residuals[i];
        let p = y[i] - r;
        num += r;
        den += p * (1.0 - p);
    }
    if den < 1e-150 {
        0.0
    } else {
        num / den
    }
}
