//! Flat JSON run configuration. Every key can also be given as a flag of the
//! same name (underscores become dashes); flags win over the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use fleetrisk::eval::TuneGrid;
use fleetrisk::models::ModelKind;
use fleetrisk::panel::{PanelOptions, UtilizationSource, DEFAULT_GAP_CAP};
use fleetrisk::{FeatureSpec, FleetConfig, MelSpec, ModelConfig, Policy, SchemaConfig, SplitSpec};
use serde::{Deserialize, Serialize};

use crate::UsageError;

pub const DEFAULT_SEED: u64 = 20_190_401;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Sub-work-order export. Defaults to `<out_dir>/subworkorders.csv`.
    pub input: Option<PathBuf>,
    /// Cumulative-units sidecar. Defaults to `<out_dir>/utilization.csv`
    /// when that file exists, else the constant-rate proxy is used.
    pub utilization: Option<PathBuf>,
    /// `name=header` lines mapping canonical column names to local headers.
    pub aliases: Option<PathBuf>,
    /// A prebuilt panel CSV; skips ingest when set.
    pub panel: Option<PathBuf>,
    /// Defaults to `<out_dir>/model.json`.
    pub model_file: Option<PathBuf>,
    /// `,`, `tab`, or any single byte.
    pub delimiter: String,

    pub include_scheduled: bool,
    pub start_date: Option<String>,
    pub end_week: Option<u32>,
    pub gap_cap: u32,
    pub utilization_rate: f64,
    pub type_rates: BTreeMap<String, f64>,

    /// Empty means every feature.
    pub features: Vec<String>,
    pub model: String,
    pub l2_lambda: Option<f64>,
    pub max_iters: Option<usize>,
    pub tol: Option<f64>,
    pub n_estimators: Option<usize>,
    pub max_depth: Option<usize>,
    pub max_features: Option<usize>,
    pub min_leaf: Option<usize>,
    pub learning_rate: Option<f64>,

    /// `chronological` or `random`.
    pub split: String,
    pub test_fraction: f64,

    /// `highest_risk` or `random`; the other policy is always run as a baseline.
    pub policy: String,
    /// `TYPE:MEL` or `TYPE:MEL:ASSIGNED`.
    pub mel: Vec<String>,

    pub grid_max_depth: Vec<usize>,
    pub grid_n_estimators: Vec<usize>,
    pub grid_learning_rate: Vec<f64>,

    pub n_vehicles: Option<usize>,
    pub n_weeks: Option<u32>,
    pub beta0: Option<f64>,
    pub beta_age: Option<f64>,
    pub beta_gap: Option<f64>,
    pub beta_util: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            out_dir: PathBuf::from("fleetrisk_out"),
            input: None,
            utilization: None,
            aliases: None,
            panel: None,
            model_file: None,
            delimiter: ",".into(),
            include_scheduled: true,
            start_date: None,
            end_week: None,
            gap_cap: DEFAULT_GAP_CAP,
            utilization_rate: 1.0,
            type_rates: BTreeMap::new(),
            features: Vec::new(),
            model: "logistic".into(),
            l2_lambda: None,
            max_iters: None,
            tol: None,
            n_estimators: None,
            max_depth: None,
            max_features: None,
            min_leaf: None,
            learning_rate: None,
            split: "chronological".into(),
            test_fraction: 0.3,
            policy: "highest_risk".into(),
            mel: Vec::new(),
            grid_max_depth: Vec::new(),
            grid_n_estimators: Vec::new(),
            grid_learning_rate: Vec::new(),
            n_vehicles: None,
            n_weeks: None,
            beta0: None,
            beta_age: None,
            beta_gap: None,
            beta_util: None,
        }
    }
}

/// Layer `overrides` (already-present flags only) over the file contents.
pub fn load(file: Option<&Path>, overrides: serde_json::Value) -> Result<RunConfig, UsageError> {
    let mut merged = match file {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| UsageError::new("--config", format!("cannot read {}: {e}", path.display())))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| UsageError::new("--config", format!("{}: {e}", path.display())))?;
            if !value.is_object() {
                return Err(UsageError::new("--config", "config file must hold a JSON object"));
            }
            value
        }
        None => serde_json::Value::Object(Default::default()),
    };
    if let (Some(base), serde_json::Value::Object(flags)) = (merged.as_object_mut(), overrides) {
        base.extend(flags);
    }
    serde_json::from_value(merged).map_err(|e| UsageError::new("--config", e.to_string()))
}

fn flag(key: &str) -> String {
    format!("--{}", key.replace('_', "-"))
}

fn bad(key: &str, msg: impl Into<String>) -> UsageError {
    UsageError::new(&flag(key), msg)
}

fn existing(key: &str, path: &Path) -> Result<PathBuf, UsageError> {
    if path.exists() {
        Ok(path.to_path_buf())
    } else {
        Err(bad(key, format!("{} does not exist", path.display())))
    }
}

impl RunConfig {
    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn input_path(&self) -> Result<PathBuf, UsageError> {
        let path = self.input.clone().unwrap_or_else(|| self.out_path("subworkorders.csv"));
        existing("input", &path)
    }

    pub fn utilization_path(&self) -> Result<Option<PathBuf>, UsageError> {
        match &self.utilization {
            Some(p) => existing("utilization", p).map(Some),
            None => {
                let p = self.out_path("utilization.csv");
                Ok(p.exists().then_some(p))
            }
        }
    }

    pub fn aliases_path(&self) -> Result<Option<PathBuf>, UsageError> {
        self.aliases.as_deref().map(|p| existing("aliases", p)).transpose()
    }

    pub fn panel_path(&self) -> Result<Option<PathBuf>, UsageError> {
        self.panel.as_deref().map(|p| existing("panel", p)).transpose()
    }

    pub fn model_path(&self) -> PathBuf {
        self.model_file.clone().unwrap_or_else(|| self.out_path("model.json"))
    }

    pub fn delimiter_byte(&self) -> Result<u8, UsageError> {
        match self.delimiter.as_str() {
            "tab" | "\\t" | "\t" => Ok(b'\t'),
            s if s.len() == 1 => Ok(s.as_bytes()[0]),
            other => Err(bad("delimiter", format!("expected one byte or `tab`, got `{other}`"))),
        }
    }

    pub fn schema(&self, aliases: Option<&str>) -> Result<SchemaConfig, UsageError> {
        let mut schema = SchemaConfig {
            delimiter: self.delimiter_byte()?,
            ..SchemaConfig::default()
        };
        if let Some(text) = aliases {
            schema.parse_aliases(text).map_err(|e| bad("aliases", e.to_string()))?;
        }
        Ok(schema)
    }

    /// Panel options minus the utilization source, which needs file I/O.
    pub fn panel_options(&self, utilization: UtilizationSource) -> Result<PanelOptions, UsageError> {
        let start = self
            .start_date
            .as_deref()
            .map(|s| {
                NaiveDate::parse_from_str(s, "%Y-%m-%d")
                    .map_err(|_| bad("start_date", format!("expected YYYY-MM-DD, got `{s}`")))
            })
            .transpose()?;
        Ok(PanelOptions {
            include_scheduled: self.include_scheduled,
            start,
            end_week: self.end_week,
            gap_cap: self.gap_cap,
            utilization,
        })
    }

    pub fn constant_rate(&self) -> UtilizationSource {
        UtilizationSource::ConstantRate {
            default_rate: self.utilization_rate,
            per_type: self.type_rates.clone(),
        }
    }

    pub fn feature_spec(&self) -> Result<FeatureSpec, UsageError> {
        if self.features.is_empty() {
            return Ok(FeatureSpec::all());
        }
        FeatureSpec::from_names(&self.features).map_err(|e| bad("features", e.to_string()))
    }

    pub fn model_kind(&self) -> Result<ModelKind, UsageError> {
        self.model.parse().map_err(|e: String| bad("model", e))
    }

    /// Hyperparameters with overrides applied; the seed is the model stream.
    pub fn model_config(&self) -> Result<ModelConfig, UsageError> {
        let mut config = ModelConfig::default_for(self.model_kind()?);
        match &mut config {
            ModelConfig::Logistic(h) => {
                if let Some(v) = self.l2_lambda {
                    h.l2_lambda = v;
                }
                if let Some(v) = self.max_iters {
                    h.max_iters = v;
                }
                if let Some(v) = self.tol {
                    h.tol = v;
                }
            }
            ModelConfig::Forest(h) => {
                if let Some(v) = self.n_estimators {
                    h.n_estimators = v;
                }
                if self.max_depth.is_some() {
                    h.max_depth = self.max_depth;
                }
                if self.max_features.is_some() {
                    h.max_features = self.max_features;
                }
                if let Some(v) = self.min_leaf {
                    h.min_leaf = v;
                }
            }
            ModelConfig::Gbt(h) => {
                if let Some(v) = self.n_estimators {
                    h.n_estimators = v;
                }
                if let Some(v) = self.max_depth {
                    h.max_depth = v;
                }
                if self.max_features.is_some() {
                    h.max_features = self.max_features;
                }
                if let Some(v) = self.min_leaf {
                    h.min_leaf = v;
                }
                if let Some(v) = self.learning_rate {
                    h.learning_rate = v;
                }
            }
        }
        Ok(config.with_seed(self.seeds().model))
    }

    pub fn split_spec(&self) -> Result<SplitSpec, UsageError> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(bad("test_fraction", format!("{} is not in (0, 1)", self.test_fraction)));
        }
        match self.split.as_str() {
            "chronological" => Ok(SplitSpec::Chronological {
                test_fraction: self.test_fraction,
            }),
            "random" => Ok(SplitSpec::RandomRow {
                test_fraction: self.test_fraction,
                seed: self.seeds().split,
            }),
            other => Err(bad("split", format!("expected chronological or random, got `{other}`"))),
        }
    }

    /// The configured policy first, the other as baseline.
    pub fn policies(&self) -> Result<[(&'static str, Policy); 2], UsageError> {
        let highest = ("proactive", Policy::HighestRisk);
        let random = (
            "random",
            Policy::RandomUniform {
                seed: self.seeds().policy,
            },
        );
        match self.policy.as_str() {
            "highest_risk" => Ok([highest, random]),
            "random" => Ok([random, highest]),
            other => Err(bad("policy", format!("expected highest_risk or random, got `{other}`"))),
        }
    }

    /// Parsed MEL entries; `assigned` is `None` when the entry omits it.
    pub fn mel_specs(&self) -> Result<Vec<(String, usize, Option<usize>)>, UsageError> {
        self.mel
            .iter()
            .map(|entry| {
                let parts: Vec<&str> = entry.rsplitn(3, ':').collect();
                let num = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| bad("mel", format!("`{entry}`: `{s}` is not a count")))
                };
                match parts.as_slice() {
                    [mel, ty] if !ty.is_empty() => Ok((ty.to_string(), num(mel)?, None)),
                    [last, mid, ty] if !ty.is_empty() => match mid.parse::<usize>() {
                        Ok(mel) => Ok((ty.to_string(), mel, Some(num(last)?))),
                        // a colon inside the type name
                        Err(_) => Ok((format!("{ty}:{mid}"), num(last)?, None)),
                    },
                    _ => Err(bad("mel", format!("expected TYPE:MEL[:ASSIGNED], got `{entry}`"))),
                }
            })
            .collect()
    }

    pub fn tune_grid(&self) -> TuneGrid {
        TuneGrid {
            max_depth: self.grid_max_depth.clone(),
            n_estimators: self.grid_n_estimators.clone(),
            learning_rate: self.grid_learning_rate.clone(),
        }
    }

    pub fn fleet_config(&self) -> FleetConfig {
        let d = FleetConfig::default();
        FleetConfig {
            n_vehicles: self.n_vehicles.unwrap_or(d.n_vehicles),
            n_weeks: self.n_weeks.unwrap_or(d.n_weeks),
            beta0: self.beta0.unwrap_or(d.beta0),
            beta_age: self.beta_age.unwrap_or(d.beta_age),
            beta_gap: self.beta_gap.unwrap_or(d.beta_gap),
            beta_util: self.beta_util.unwrap_or(d.beta_util),
            seed: self.seed,
            ..d
        }
    }

    pub fn seeds(&self) -> Seeds {
        use fleetrisk::seed::{derive, STREAM_MODEL, STREAM_POLICY, STREAM_SPLIT};
        Seeds {
            split: derive(self.seed, STREAM_SPLIT),
            model: derive(self.seed, STREAM_MODEL),
            policy: derive(self.seed, STREAM_POLICY),
        }
    }

    /// The config as recorded in the manifest: paths reduced to file names
    /// and the output directory dropped, so relocated runs compare equal.
    pub fn for_manifest(&self) -> serde_json::Value {
        let mut c = self.clone();
        let base = |p: &Option<PathBuf>| p.as_ref().and_then(|p| p.file_name()).map(PathBuf::from);
        c.input = base(&c.input);
        c.utilization = base(&c.utilization);
        c.aliases = base(&c.aliases);
        c.panel = base(&c.panel);
        c.model_file = base(&c.model_file);
        let mut v = serde_json::to_value(c).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("out_dir");
        }
        v
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Seeds {
    pub split: u64,
    pub model: u64,
    pub policy: u64,
}

pub fn mel_spec(vehicle_type: &str, mel: usize, assigned: usize) -> MelSpec {
    MelSpec {
        vehicle_type: vehicle_type.to_string(),
        mel,
        assigned,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"seed": 7, "model": "gbt", "test_fraction": 0.25}"#).unwrap();
        let cfg = load(Some(&path), serde_json::json!({"model": "forest"})).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.model, "forest");
        assert_eq!(cfg.test_fraction, 0.25);
        assert_eq!(cfg.split, "chronological");
    }

    #[test]
    fn unknown_keys_are_usage_errors() {
        let err = load(None, serde_json::json!({"sed": 1})).unwrap_err();
        assert!(err.to_string().contains("sed"), "{err}");
    }

    #[test]
    fn mel_entries() {
        let cfg = RunConfig {
            mel: vec!["TRUCK CARGO:3".into(), "SEDAN:2:5".into(), "A:B:4".into()],
            ..RunConfig::default()
        };
        assert_eq!(
            cfg.mel_specs().unwrap(),
            vec![
                ("TRUCK CARGO".into(), 3, None),
                ("SEDAN".into(), 2, Some(5)),
                ("A:B".into(), 4, None)
            ]
        );
        let bad = RunConfig {
            mel: vec!["SEDAN".into()],
            ..RunConfig::default()
        };
        assert!(bad.mel_specs().is_err());
    }

    #[test]
    fn model_overrides_apply_to_the_right_kind() {
        let cfg = RunConfig {
            model: "forest".into(),
            n_estimators: Some(50),
            learning_rate: Some(0.5),
            ..RunConfig::default()
        };
        match cfg.model_config().unwrap() {
            ModelConfig::Forest(h) => {
                assert_eq!(h.n_estimators, 50);
                assert_eq!(h.seed, cfg.seeds().model);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn manifest_config_drops_directories() {
        let cfg = RunConfig {
            input: Some(PathBuf::from("/tmp/a/b/export.csv")),
            ..RunConfig::default()
        };
        let v = cfg.for_manifest();
        assert_eq!(v["input"], "export.csv");
        assert!(v.get("out_dir").is_none());
    }
}
