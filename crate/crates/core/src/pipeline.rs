//! Encode, standardize, fit; and the JSON model document.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{standardize, Column, FeatureEncoder, FeatureError, FeatureMatrix, FeatureSpec};
use crate::models::{fit_model, ModelConfig, ModelError, RiskModel};
use crate::panel::{Panel, PanelRow};

pub const MODEL_FORMAT: &str = "fleetrisk-model";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("model document is `{format}` v{version}, expected `{MODEL_FORMAT}` v{MODEL_FORMAT_VERSION}")]
    Format { format: String, version: u32 },
    #[error("stored column metadata does not match the encoder ({stored} stored, {derived} derived)")]
    ColumnMismatch { stored: usize, derived: usize },
}

/// A fitted model together with everything needed to score new panel rows:
/// the vocabulary-bound encoder and the training column scales.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    encoder: FeatureEncoder,
    columns: Vec<Column>,
    scale: Vec<f64>,
    config: ModelConfig,
    model: RiskModel,
}

#[derive(Serialize, Deserialize)]
struct ModelDocument {
    format: String,
    version: u32,
    config: ModelConfig,
    feature_spec: FeatureSpec,
    encoder: FeatureEncoder,
    columns: Vec<Column>,
    scale: Vec<f64>,
    model: RiskModel,
}

impl TrainedModel {
    /// Encode `train` against its own vocabulary, standardize, fit.
    pub fn fit(train: &Panel, spec: FeatureSpec, config: &ModelConfig) -> Result<Self, PipelineError> {
        let encoder = FeatureEncoder::fit(train, spec)?;
        let raw = encoder.transform(train);
        Self::fit_matrix(encoder, &raw, config)
    }

    /// Standardize and fit a raw matrix that `encoder` produced (possibly
    /// with altered labels, as in a permutation control).
    pub fn fit_matrix(encoder: FeatureEncoder, raw: &FeatureMatrix, config: &ModelConfig) -> Result<Self, PipelineError> {
        let derived = encoder.columns();
        if raw.columns() != derived.as_slice() {
            return Err(PipelineError::ColumnMismatch {
                stored: raw.width(),
                derived: derived.len(),
            });
        }
        let x = standardize(raw);
        let model = fit_model(&x, config)?;
        Ok(Self {
            encoder,
            columns: derived,
            scale: x.scale().to_vec(),
            config: *config,
            model,
        })
    }

    pub fn encoder(&self) -> &FeatureEncoder {
        &self.encoder
    }

    pub fn spec(&self) -> FeatureSpec {
        self.encoder.spec
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn model(&self) -> &RiskModel {
        &self.model
    }

    /// Encoded and scaled matrix for `rows`, ready for the inner model.
    pub fn design(&self, rows: &[PanelRow]) -> FeatureMatrix {
        let mut x = self.encoder.transform_rows(rows);
        x.apply_scale(&self.scale).expect("encoder width matches scale");
        x
    }

    pub fn predict_rows(&self, rows: &[PanelRow]) -> Result<Vec<f64>, PipelineError> {
        Ok(self.model.predict_proba(&self.design(rows), self.columns.len())?)
    }

    pub fn predict_panel(&self, panel: &Panel) -> Result<Vec<f64>, PipelineError> {
        self.predict_rows(panel.rows())
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        let doc = ModelDocument {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_FORMAT_VERSION,
            config: self.config,
            feature_spec: self.encoder.spec,
            encoder: self.encoder.clone(),
            columns: self.columns.clone(),
            scale: self.scale.clone(),
            model: self.model.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        if doc.format != MODEL_FORMAT || doc.version != MODEL_FORMAT_VERSION {
            return Err(PipelineError::Format {
                format: doc.format,
                version: doc.version,
            });
        }
        let mut encoder = doc.encoder;
        encoder.spec = doc.feature_spec;
        let derived = encoder.columns();
        let model_width_ok = doc.model.width().is_none_or(|w| w == derived.len());
        if derived != doc.columns || doc.scale.len() != derived.len() || !model_width_ok {
            return Err(PipelineError::ColumnMismatch {
                stored: doc.columns.len(),
                derived: derived.len(),
            });
        }
        if let RiskModel::Logistic(m) = &doc.model {
            if m.columns != derived {
                return Err(PipelineError::ColumnMismatch {
                    stored: m.columns.len(),
                    derived: derived.len(),
                });
            }
        }
        Ok(Self {
            encoder,
            columns: doc.columns,
            scale: doc.scale,
            config: doc.config,
            model: doc.model,
        })
    }
}
