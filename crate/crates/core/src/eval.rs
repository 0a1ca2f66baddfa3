//! Train/test splits, the separation ratio, and the ablation and tuning
//! harnesses.
//!
//! The separation ratio is the mean predicted probability over weeks that
//! did see a repair divided by the mean over weeks that did not. A model
//! with no predictive ability scores 1.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureSpec;
use crate::models::ModelConfig;
use crate::panel::Panel;
use crate::par;
use crate::pipeline::{PipelineError, TrainedModel};

pub const HISTOGRAM_BINS: usize = 50;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("test fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("panel cannot be split: {0}")]
    DegeneratePanel(String),
    #[error("labels contain a single class")]
    SingleClassLabels,
    #[error("mean prediction over negative outcomes is zero")]
    ZeroFalseMean,
    #[error("{preds} predictions for {labels} labels")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("prediction {0} is not finite")]
    NonFinitePrediction(f64),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SplitSpec {
    /// Every row lands in test independently with probability `test_fraction`.
    RandomRow { test_fraction: f64, seed: u64 },
    /// The latest weeks holding at least `test_fraction` of the rows.
    Chronological { test_fraction: f64 },
}

impl SplitSpec {
    pub fn test_fraction(&self) -> f64 {
        match *self {
            Self::RandomRow { test_fraction, .. } | Self::Chronological { test_fraction } => test_fraction,
        }
    }
}

/// Partition `panel` into `(train, test)`.
pub fn split(panel: &Panel, spec: &SplitSpec) -> Result<(Panel, Panel), EvalError> {
    let f = spec.test_fraction();
    if !(f > 0.0 && f < 1.0) {
        return Err(EvalError::InvalidFraction(f));
    }
    let in_test: Vec<bool> = match *spec {
        SplitSpec::RandomRow { seed, .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            panel.rows().iter().map(|_| rng.gen::<f64>() < f).collect()
        }
        SplitSpec::Chronological { .. } => {
            let boundary = chronological_boundary(panel, f)?;
            panel.rows().iter().map(|r| r.week >= boundary).collect()
        }
    };
    let mut flags = in_test.iter();
    let test = panel.filter(|_| *flags.next().unwrap());
    let mut flags = in_test.iter();
    let train = panel.filter(|_| !*flags.next().unwrap());
    if train.is_empty() || test.is_empty() {
        return Err(EvalError::DegeneratePanel(format!(
            "{} train rows, {} test rows",
            train.len(),
            test.len()
        )));
    }
    Ok((train, test))
}

/// Latest week `b` such that rows with `week >= b` are at least `fraction`
/// of the panel.
pub fn chronological_boundary(panel: &Panel, fraction: f64) -> Result<u32, EvalError> {
    let weeks = panel.weeks();
    if weeks.len() < 2 {
        return Err(EvalError::DegeneratePanel("fewer than two distinct weeks".into()));
    }
    let mut per_week = std::collections::BTreeMap::new();
    for r in panel.rows() {
        *per_week.entry(r.week).or_insert(0usize) += 1;
    }
    let n = panel.len() as f64;
    let needed = fraction * n;
    let mut in_test = 0usize;
    for (&week, &count) in per_week.iter().rev() {
        in_test += count;
        // tolerance so that e.g. 30 of 100 counts as 30%
        if in_test as f64 >= needed - 1e-9 * n {
            if week == weeks[0] {
                return Err(EvalError::DegeneratePanel("test split would take every week".into()));
            }
            return Ok(week);
        }
    }
    unreachable!("fraction < 1 is always met before the first week")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mean_pred_true: f64,
    pub mean_pred_false: f64,
    pub ratio: f64,
    pub histogram_true: Vec<u64>,
    pub histogram_false: Vec<u64>,
    pub n_test: usize,
    pub n_true: usize,
    pub n_false: usize,
}

fn bin_of(p: f64) -> usize {
    ((p * HISTOGRAM_BINS as f64).floor().max(0.0) as usize).min(HISTOGRAM_BINS - 1)
}

pub fn separation_ratio(preds: &[f64], labels: &[u8]) -> Result<EvalReport, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            preds: preds.len(),
            labels: labels.len(),
        });
    }
    if let Some(&bad) = preds.iter().find(|p| !p.is_finite()) {
        return Err(EvalError::NonFinitePrediction(bad));
    }
    let mut sum = [0.0f64; 2];
    let mut count = [0usize; 2];
    let mut hist = [vec![0u64; HISTOGRAM_BINS], vec![0u64; HISTOGRAM_BINS]];
    for (&p, &y) in preds.iter().zip(labels) {
        let k = usize::from(y == 1);
        sum[k] += p;
        count[k] += 1;
        hist[k][bin_of(p)] += 1;
    }
    if count[0] == 0 || count[1] == 0 {
        return Err(EvalError::SingleClassLabels);
    }
    let mean_pred_false = sum[0] / count[0] as f64;
    let mean_pred_true = sum[1] / count[1] as f64;
    if mean_pred_false == 0.0 {
        return Err(EvalError::ZeroFalseMean);
    }
    let [histogram_false, histogram_true] = hist;
    Ok(EvalReport {
        mean_pred_true,
        mean_pred_false,
        ratio: mean_pred_true / mean_pred_false,
        histogram_true,
        histogram_false,
        n_test: preds.len(),
        n_true: count[1],
        n_false: count[0],
    })
}

impl EvalReport {
    /// `bin_lo,bin_hi,count` rows for one outcome class.
    pub fn write_histogram_csv<W: Write>(&self, outcome: bool, sink: W) -> Result<(), EvalError> {
        let counts = if outcome { &self.histogram_true } else { &self.histogram_false };
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["bin_lo", "bin_hi", "count"])?;
        let width = 1.0 / HISTOGRAM_BINS as f64;
        for (i, c) in counts.iter().enumerate() {
            w.write_record([
                format!("{}", i as f64 * width),
                format!("{}", (i + 1) as f64 * width),
                c.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Fit on `train`, score `test`.
pub fn evaluate(
    train: &Panel,
    test: &Panel,
    spec: FeatureSpec,
    config: &ModelConfig,
) -> Result<(TrainedModel, EvalReport), EvalError> {
    let model = TrainedModel::fit(train, spec, config)?;
    let preds = model.predict_panel(test)?;
    let report = separation_ratio(&preds, &test.labels())?;
    Ok((model, report))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationRow {
    pub spec: FeatureSpec,
    pub label: String,
    pub ratio: f64,
    pub mean_pred_true: f64,
    pub mean_pred_false: f64,
}

/// One fit per feature subset, all on the same split realization.
pub fn ablation(
    panel: &Panel,
    subsets: &[FeatureSpec],
    config: &ModelConfig,
    split_spec: &SplitSpec,
) -> Result<Vec<AblationRow>, EvalError> {
    if subsets.iter().any(FeatureSpec::is_empty) {
        return Err(PipelineError::Feature(crate::features::FeatureError::EmptySpec).into());
    }
    let (train, test) = split(panel, split_spec)?;
    par::map_slice(subsets, |&spec| {
        let (_, report) = evaluate(&train, &test, spec, config)?;
        Ok(AblationRow {
            spec,
            label: spec.label(),
            ratio: report.ratio,
            mean_pred_true: report.mean_pred_true,
            mean_pred_false: report.mean_pred_false,
        })
    })
    .into_iter()
    .collect()
}

pub fn write_ablation_csv<W: Write>(rows: &[AblationRow], sink: W) -> Result<(), EvalError> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "vehicle_id",
        "vehicle_type",
        "operational_weeks",
        "weeks_since_last_visit",
        "utilization",
        "unit",
        "ratio",
        "mean_pred_true",
        "mean_pred_false",
    ])?;
    let tick = |b: bool| if b { "1" } else { "0" }.to_string();
    for r in rows {
        let s = r.spec;
        w.write_record([
            tick(s.use_vehicle_id),
            tick(s.use_vehicle_type),
            tick(s.use_operational_weeks),
            tick(s.use_weeks_since_last_visit),
            tick(s.use_utilization),
            tick(s.use_unit),
            r.ratio.to_string(),
            r.mean_pred_true.to_string(),
            r.mean_pred_false.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Hyperparameter grid. Empty axes keep the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuneGrid {
    pub max_depth: Vec<usize>,
    pub n_estimators: Vec<usize>,
    pub learning_rate: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TuneResult {
    pub config: ModelConfig,
    pub ratio: f64,
}

impl TuneGrid {
    /// Every combination applied to `base`, in axis order depth, estimators,
    /// rate. Axes that do not apply to the model kind are ignored.
    pub fn configs(&self, base: &ModelConfig) -> Vec<ModelConfig> {
        let axis = |v: &[usize]| -> Vec<Option<usize>> {
            if v.is_empty() { vec![None] } else { v.iter().copied().map(Some).collect() }
        };
        let rates: Vec<Option<f64>> = if self.learning_rate.is_empty() {
            vec![None]
        } else {
            self.learning_rate.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        for d in axis(&self.max_depth) {
            for n in axis(&self.n_estimators) {
                for lr in &rates {
                    let mut c = *base;
                    match &mut c {
                        ModelConfig::Logistic(_) => {}
                        ModelConfig::Forest(h) => {
                            if let Some(d) = d {
                                h.max_depth = Some(d);
                            }
                            if let Some(n) = n {
                                h.n_estimators = n;
                            }
                        }
                        ModelConfig::Gbt(h) => {
                            if let Some(d) = d {
                                h.max_depth = d;
                            }
                            if let Some(n) = n {
                                h.n_estimators = n;
                            }
                            if let Some(lr) = lr {
                                h.learning_rate = *lr;
                            }
                        }
                    }
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
            }
        }
        out
    }
}

/// Grid search by test-split separation ratio. Results come back in grid
/// order; the best is the first with the highest ratio.
pub fn tune(
    panel: &Panel,
    spec: FeatureSpec,
    base: &ModelConfig,
    grid: &TuneGrid,
    split_spec: &SplitSpec,
) -> Result<(Vec<TuneResult>, usize), EvalError> {
    let (train, test) = split(panel, split_spec)?;
    let configs = grid.configs(base);
    let results: Vec<TuneResult> = par::map_slice(&configs, |c| {
        evaluate(&train, &test, spec, c).map(|(_, r)| TuneResult {
            config: *c,
            ratio: r.ratio,
        })
    })
    .into_iter()
    .collect::<Result<_, _>>()?;
    let best = results
        .iter()
        .enumerate()
        .fold(0, |b, (i, r)| if r.ratio > results[b].ratio { i } else { b });
    Ok((results, best))
}
