//! Probability-of-repair learners behind one prediction interface.

pub mod forest;
pub mod gbt;
pub mod logistic;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureMatrix, RowView};

pub use forest::{fit_random_forest, ForestHyper, ForestModel};
pub use gbt::{fit_gbt, GbtHyper, GbtModel};
pub use logistic::{fit_logistic, LogisticHyper, LogisticModel};
pub use tree::{fit_tree, TreeNode, TreeParams};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("labels contain a single class; both repaired and not-repaired weeks are required")]
    SingleClassLabels,
    #[error("feature matrix contains a non-finite value")]
    NonFiniteFeature,
    #[error("row width {got} does not match model width {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyper(String),
    #[error("boosting produced a non-finite score in round {round}")]
    NonFiniteScore { round: usize },
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Mean log-loss of raw scores against 0/1 targets.
pub fn log_loss(scores: &[f64], y: &[f64]) -> f64 {
    let total: f64 = scores.iter().zip(y).map(|(&s, &t)| softplus(s) - t * s).sum();
    total / scores.len() as f64
}

pub(crate) fn check_labels(labels: &[u8]) -> Result<(), ModelError> {
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if pos == 0 || pos == labels.len() {
        Err(ModelError::SingleClassLabels)
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Logistic,
    Forest,
    Gbt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Logistic, ModelKind::Forest, ModelKind::Gbt];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Logistic => "logistic",
            Self::Forest => "forest",
            Self::Gbt => "gbt",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "logistic" | "lr" => Ok(Self::Logistic),
            "forest" | "rf" | "random_forest" => Ok(Self::Forest),
            "gbt" | "boosted" | "gradient_boosting" => Ok(Self::Gbt),
            other => Err(format!("unknown model kind `{other}` (logistic, forest, gbt)")),
        }
    }
}

/// Model kind plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Logistic(LogisticHyper),
    Forest(ForestHyper),
    Gbt(GbtHyper),
}

impl ModelConfig {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Logistic => Self::Logistic(LogisticHyper::default()),
            ModelKind::Forest => Self::Forest(ForestHyper::default()),
            ModelKind::Gbt => Self::Gbt(GbtHyper::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Logistic(_) => ModelKind::Logistic,
            Self::Forest(_) => ModelKind::Forest,
            Self::Gbt(_) => ModelKind::Gbt,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            Self::Logistic(h) => h.seed = seed,
            Self::Forest(h) => h.seed = seed,
            Self::Gbt(h) => h.seed = seed,
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskModel {
    Logistic(LogisticModel),
    Forest(ForestModel),
    Gbt(GbtModel),
}

impl RiskModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            Self::Logistic(_) => ModelKind::Logistic,
            Self::Forest(_) => ModelKind::Forest,
            Self::Gbt(_) => ModelKind::Gbt,
        }
    }

    /// Width the model expects, when it is recorded. Trees only know the
    /// highest column they split on.
    pub fn width(&self) -> Option<usize> {
        match self {
            Self::Logistic(m) => Some(m.weights.len()),
            _ => None,
        }
    }

    pub fn predict_row(&self, row: RowView<'_>) -> f64 {
        match self {
            Self::Logistic(m) => m.predict_row(row),
            Self::Forest(m) => m.predict_row(row),
            Self::Gbt(m) => m.predict_row(row),
        }
    }

    /// Probabilities for every row of `x`. `expected_width` is the width of
    /// the matrix the model was fitted on.
    pub fn predict_proba(&self, x: &FeatureMatrix, expected_width: usize) -> Result<Vec<f64>, ModelError> {
        if x.width() != expected_width || self.width().is_some_and(|w| w != x.width()) {
            return Err(ModelError::WidthMismatch {
                expected: expected_width,
                got: x.width(),
            });
        }
        Ok((0..x.n_rows()).map(|i| self.predict_row(x.row(i))).collect())
    }
}

pub fn fit_model(x: &FeatureMatrix, config: &ModelConfig) -> Result<RiskModel, ModelError> {
    Ok(match config {
        ModelConfig::Logistic(h) => RiskModel::Logistic(fit_logistic(x, h)?),
        ModelConfig::Forest(h) => RiskModel::Forest(fit_random_forest(x, h)?),
        ModelConfig::Gbt(h) => RiskModel::Gbt(fit_gbt(x, h)?),
    })
}
