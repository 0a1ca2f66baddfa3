//! Bagged regression-tree ensemble on 0/1 targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tree::{fit_tree, TreeNode, TreeParams};
use super::ModelError;
use crate::features::{FeatureMatrix, RowView};
use crate::{par, seed};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestHyper {
    pub n_estimators: usize,
    /// Columns tried per split. `None` means `ceil(width / 3)`.
    pub max_features: Option<usize>,
    /// `None` for unlimited depth.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestHyper {
    fn default() -> Self {
        Self {
            n_estimators: 400,
            max_features: None,
            max_depth: Some(12),
            min_leaf: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeNode>,
    pub n_estimators: usize,
    pub max_features: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl ForestModel {
    /// Arithmetic mean of the trees, summed in tree order.
    pub fn predict_row(&self, row: RowView<'_>) -> f64 {
        let total: f64 = self.trees.iter().map(|t| t.predict(row)).sum();
        total / self.trees.len() as f64
    }
}

pub fn resolve_max_features(requested: Option<usize>, width: usize) -> usize {
    match requested {
        Some(m) => m.clamp(1, width.max(1)),
        None => width.div_ceil(3).clamp(1, width.max(1)),
    }
}

/// Each tree sees a bootstrap resample of the rows, drawn from its own seed
/// (derived from the master seed and the tree index), so trees can be grown
/// in any order or in parallel with the same result.
pub fn fit_random_forest(x: &FeatureMatrix, hyper: &ForestHyper) -> Result<ForestModel, ModelError> {
    super::check_labels(x.labels())?;
    if hyper.n_estimators == 0 {
        return Err(ModelError::InvalidHyper("n_estimators must be >= 1".into()));
    }
    let n = x.n_rows();
    let targets: Vec<f64> = x.labels().iter().map(|&y| f64::from(y)).collect();
    let params = TreeParams {
        max_depth: hyper.max_depth,
        max_features: resolve_max_features(hyper.max_features, x.width()),
        min_leaf: hyper.min_leaf,
    };
    let trees = par::map_range(hyper.n_estimators, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_indexed(hyper.seed, i as u64));
        let rows: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
        fit_tree(x, &rows, &targets, &params, &mut rng)
    });
    Ok(ForestModel {
        trees,
        n_estimators: hyper.n_estimators,
        max_features: params.max_features,
        max_depth: hyper.max_depth,
        min_leaf: hyper.min_leaf,
        seed: hyper.seed,
    })
}
