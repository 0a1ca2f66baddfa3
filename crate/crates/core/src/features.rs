//! Design-matrix encoding.
//!
//! Categorical features (vehicle id, type, unit) are one-hot over the
//! training vocabulary plus an explicit unknown level; numeric features are
//! copied. Every row therefore has exactly one stored entry per selected
//! feature, so the matrix is kept as fixed-stride sparse rows: `stride`
//! `(column, value)` pairs per row, columns ascending. That keeps the vehicle
//! id group affordable for large fleets.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::logistic::LogisticModel;
use crate::panel::{Panel, PanelRow, Vocab};

/// Columns whose population standard deviation is at or below this are left
/// unscaled.
pub const STD_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("feature spec selects no features")]
    EmptySpec,
    #[error("cannot encode an empty panel")]
    EmptyPanel,
    #[error("unknown feature name `{0}`")]
    UnknownFeature(String),
    #[error("model was not fitted on a standardized matrix")]
    NotStandardized,
    #[error("scale vector has {got} entries, matrix has {expected} columns")]
    ScaleWidth { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub use_vehicle_id: bool,
    pub use_vehicle_type: bool,
    pub use_unit: bool,
    pub use_operational_weeks: bool,
    pub use_weeks_since_last_visit: bool,
    pub use_utilization: bool,
}

/// Feature names accepted by [`FeatureSpec::from_names`], in column order.
pub const FEATURE_NAMES: [&str; 6] = [
    "vehicle_id",
    "vehicle_type",
    "unit",
    "operational_weeks",
    "weeks_since_last_visit",
    "utilization",
];

impl FeatureSpec {
    pub const NONE: FeatureSpec = FeatureSpec {
        use_vehicle_id: false,
        use_vehicle_type: false,
        use_unit: false,
        use_operational_weeks: false,
        use_weeks_since_last_visit: false,
        use_utilization: false,
    };

    pub fn all() -> Self {
        Self::flags([true; 6])
    }

    fn flags(f: [bool; 6]) -> Self {
        Self {
            use_vehicle_id: f[0],
            use_vehicle_type: f[1],
            use_unit: f[2],
            use_operational_weeks: f[3],
            use_weeks_since_last_visit: f[4],
            use_utilization: f[5],
        }
    }

    fn as_flags(&self) -> [bool; 6] {
        [
            self.use_vehicle_id,
            self.use_vehicle_type,
            self.use_unit,
            self.use_operational_weeks,
            self.use_weeks_since_last_visit,
            self.use_utilization,
        ]
    }

    /// Accepts the names in [`FEATURE_NAMES`] plus the short aliases
    /// `id`, `type`, `age`, `gap`, `util`.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self, FeatureError> {
        let mut f = [false; 6];
        for n in names {
            let i = match n.as_ref().trim() {
                "vehicle_id" | "id" => 0,
                "vehicle_type" | "type" => 1,
                "unit" => 2,
                "operational_weeks" | "age" => 3,
                "weeks_since_last_visit" | "gap" => 4,
                "utilization" | "util" => 5,
                other => return Err(FeatureError::UnknownFeature(other.to_string())),
            };
            f[i] = true;
        }
        let spec = Self::flags(f);
        if spec.is_empty() {
            return Err(FeatureError::EmptySpec);
        }
        Ok(spec)
    }

    pub fn names(&self) -> Vec<&'static str> {
        FEATURE_NAMES
            .iter()
            .zip(self.as_flags())
            .filter_map(|(n, on)| on.then_some(*n))
            .collect()
    }

    /// `vehicle_type+operational_weeks` style label.
    pub fn label(&self) -> String {
        self.names().join("+")
    }

    pub fn is_empty(&self) -> bool {
        !self.as_flags().iter().any(|&f| f)
    }
}

/// The six ablation rows of the feature-influence table, most to least.
pub fn ablation_subsets() -> Vec<FeatureSpec> {
    let t = true;
    let f = false;
    // id, type, unit, age, gap, util
    vec![
        FeatureSpec::flags([t, t, t, t, t, t]),
        FeatureSpec::flags([f, t, t, t, t, t]),
        FeatureSpec::flags([f, t, f, t, t, t]),
        FeatureSpec::flags([f, t, f, t, t, f]),
        FeatureSpec::flags([f, t, f, t, f, f]),
        FeatureSpec::flags([f, f, f, t, f, f]),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Categorical {
    VehicleId,
    VehicleType,
    Unit,
}

impl Categorical {
    fn name(self) -> &'static str {
        match self {
            Self::VehicleId => "vehicle_id",
            Self::VehicleType => "vehicle_type",
            Self::Unit => "unit",
        }
    }

    fn value(self, row: &PanelRow) -> &str {
        match self {
            Self::VehicleId => &row.asset_id,
            Self::VehicleType => &row.vehicle_type,
            Self::Unit => &row.unit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Numeric {
    OperationalWeeks,
    WeeksSinceLastVisit,
    Utilization,
}

impl Numeric {
    fn name(self) -> &'static str {
        match self {
            Self::OperationalWeeks => "operational_weeks",
            Self::WeeksSinceLastVisit => "weeks_since_last_visit",
            Self::Utilization => "utilization",
        }
    }

    fn value(self, row: &PanelRow) -> f64 {
        match self {
            Self::OperationalWeeks => f64::from(row.operational_weeks),
            Self::WeeksSinceLastVisit => f64::from(row.weeks_since_last_visit),
            Self::Utilization => row.utilization,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    /// `level: None` is the unknown level.
    OneHot { level: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<Column>,
    stride: usize,
    indices: Vec<u32>,
    values: Vec<f64>,
    labels: Vec<u8>,
    scale: Vec<f64>,
    standardized: bool,
}

/// Stored entries of one row.
#[derive(Debug, Clone, Copy)]
pub struct RowView<'a> {
    pub indices: &'a [u32],
    pub values: &'a [f64],
}

impl RowView<'_> {
    pub fn get(&self, col: usize) -> f64 {
        self.indices
            .iter()
            .position(|&c| c as usize == col)
            .map_or(0.0, |i| self.values[i])
    }

    pub fn dot(&self, weights: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(self.values)
            .map(|(&c, &v)| weights[c as usize] * v)
            .sum()
    }
}

impl FeatureMatrix {
    /// Build from explicit dense rows. Mostly for tests and small problems;
    /// every entry is stored.
    pub fn from_dense(columns: Vec<Column>, rows: &[Vec<f64>], labels: Vec<u8>) -> Self {
        let width = columns.len();
        assert!(rows.iter().all(|r| r.len() == width), "ragged dense rows");
        assert_eq!(rows.len(), labels.len(), "label count");
        let mut indices = Vec::with_capacity(rows.len() * width);
        let mut values = Vec::with_capacity(rows.len() * width);
        for r in rows {
            for (c, &v) in r.iter().enumerate() {
                indices.push(c as u32);
                values.push(v);
            }
        }
        Self {
            columns,
            stride: width,
            indices,
            values,
            labels,
            scale: vec![1.0; width],
            standardized: false,
        }
    }

    /// Numeric columns named `x0, x1, ...`.
    pub fn numeric(rows: &[Vec<f64>], labels: Vec<u8>) -> Self {
        let width = rows.first().map_or(0, Vec::len);
        let columns = (0..width)
            .map(|i| Column {
                name: format!("x{i}"),
                kind: ColumnKind::Numeric,
            })
            .collect();
        Self::from_dense(columns, rows, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    pub fn row(&self, i: usize) -> RowView<'_> {
        let r = i * self.stride..(i + 1) * self.stride;
        RowView {
            indices: &self.indices[r.clone()],
            values: &self.values[r],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.row(row).get(col)
    }

    pub fn dense_row(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.width()];
        let r = self.row(i);
        for (&c, &v) in r.indices.iter().zip(r.values) {
            out[c as usize] = v;
        }
        out
    }

    pub fn column_values(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows()).map(|i| self.get(i, col)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Replace the labels (e.g. a shuffled control).
    pub fn with_labels(mut self, labels: Vec<u8>) -> Self {
        assert_eq!(labels.len(), self.n_rows());
        self.labels = labels;
        self
    }

    /// Population standard deviation of every column, implicit zeros included.
    pub fn column_std(&self) -> Vec<f64> {
        let n = self.n_rows() as f64;
        let w = self.width();
        if self.n_rows() == 0 {
            return vec![0.0; w];
        }
        let mut sum = vec![0.0; w];
        let mut stored = vec![0usize; w];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            sum[c as usize] += v;
            stored[c as usize] += 1;
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut ss = vec![0.0; w];
        for (&c, &v) in self.indices.iter().zip(&self.values) {
            let d = v - mean[c as usize];
            ss[c as usize] += d * d;
        }
        (0..w)
            .map(|c| {
                let implicit = (self.n_rows() - stored[c]) as f64;
                ((ss[c] + implicit * mean[c] * mean[c]) / n).sqrt()
            })
            .collect()
    }

    /// Divide each column by `divisors[c]`, folding it into the recorded scale.
    pub fn apply_scale(&mut self, divisors: &[f64]) -> Result<(), FeatureError> {
        if divisors.len() != self.width() {
            return Err(FeatureError::ScaleWidth {
                expected: self.width(),
                got: divisors.len(),
            });
        }
        for (&c, v) in self.indices.iter().zip(self.values.iter_mut()) {
            *v /= divisors[c as usize];
        }
        for (s, d) in self.scale.iter_mut().zip(divisors) {
            *s *= d;
        }
        Ok(())
    }
}

/// Vocabulary-bound encoder. Fitted on a training panel, it maps any other
/// panel onto the same columns; unseen levels land in the unknown column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub spec: FeatureSpec,
    /// Only the groups the spec selects are populated.
    pub vocab: Vocab,
}

impl FeatureEncoder {
    pub fn fit(panel: &Panel, spec: FeatureSpec) -> Result<Self, FeatureError> {
        if spec.is_empty() {
            return Err(FeatureError::EmptySpec);
        }
        if panel.is_empty() {
            return Err(FeatureError::EmptyPanel);
        }
        let v = panel.vocab();
        let pick = |on: bool, levels: &Vec<String>| if on { levels.clone() } else { Vec::new() };
        Ok(Self {
            spec,
            vocab: Vocab {
                asset_ids: pick(spec.use_vehicle_id, &v.asset_ids),
                vehicle_types: pick(spec.use_vehicle_type, &v.vehicle_types),
                units: pick(spec.use_unit, &v.units),
            },
        })
    }

    fn categoricals(&self) -> Vec<(Categorical, &[String])> {
        let mut out = Vec::new();
        if self.spec.use_vehicle_id {
            out.push((Categorical::VehicleId, self.vocab.asset_ids.as_slice()));
        }
        if self.spec.use_vehicle_type {
            out.push((Categorical::VehicleType, self.vocab.vehicle_types.as_slice()));
        }
        if self.spec.use_unit {
            out.push((Categorical::Unit, self.vocab.units.as_slice()));
        }
        out
    }

    fn numerics(&self) -> Vec<Numeric> {
        let mut out = Vec::new();
        if self.spec.use_operational_weeks {
            out.push(Numeric::OperationalWeeks);
        }
        if self.spec.use_weeks_since_last_visit {
            out.push(Numeric::WeeksSinceLastVisit);
        }
        if self.spec.use_utilization {
            out.push(Numeric::Utilization);
        }
        out
    }

    pub fn columns(&self) -> Vec<Column> {
        let mut cols = Vec::new();
        for (cat, levels) in self.categoricals() {
            for l in levels {
                cols.push(Column {
                    name: format!("{}={l}", cat.name()),
                    kind: ColumnKind::OneHot {
                        level: Some(l.clone()),
                    },
                });
            }
            cols.push(Column {
                name: format!("{}=<unknown>", cat.name()),
                kind: ColumnKind::OneHot { level: None },
            });
        }
        for num in self.numerics() {
            cols.push(Column {
                name: num.name().to_string(),
                kind: ColumnKind::Numeric,
            });
        }
        cols
    }

    pub fn transform(&self, panel: &Panel) -> FeatureMatrix {
        self.transform_rows(panel.rows())
    }

    pub fn transform_rows(&self, rows: &[PanelRow]) -> FeatureMatrix {
        let columns = self.columns();
        let cats = self.categoricals();
        let nums = self.numerics();
        let stride = cats.len() + nums.len();
        let mut indices = Vec::with_capacity(rows.len() * stride);
        let mut values = Vec::with_capacity(rows.len() * stride);
        for row in rows {
            let mut offset = 0usize;
            for (cat, levels) in &cats {
                let level = levels
                    .binary_search_by(|l| l.as_str().cmp(cat.value(row)))
                    .unwrap_or(levels.len());
                indices.push((offset + level) as u32);
                values.push(1.0);
                offset += levels.len() + 1;
            }
            for num in &nums {
                indices.push(offset as u32);
                values.push(num.value(row));
                offset += 1;
            }
        }
        let width = columns.len();
        FeatureMatrix {
            columns,
            stride,
            indices,
            values,
            labels: rows.iter().map(|r| r.repair_flag).collect(),
            scale: vec![1.0; width],
            standardized: false,
        }
    }
}

/// Encode `panel` against its own vocabulary.
pub fn encode(panel: &Panel, spec: FeatureSpec) -> Result<FeatureMatrix, FeatureError> {
    Ok(FeatureEncoder::fit(panel, spec)?.transform(panel))
}

/// Divide every column with population std above [`STD_EPSILON`] by that std.
pub fn standardize(matrix: &FeatureMatrix) -> FeatureMatrix {
    let divisors: Vec<f64> = matrix
        .column_std()
        .into_iter()
        .map(|s| if s > STD_EPSILON { s } else { 1.0 })
        .collect();
    let mut out = matrix.clone();
    out.apply_scale(&divisors).expect("divisors match width");
    out.standardized = true;
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Influence {
    pub column: String,
    pub index: usize,
    pub magnitude: f64,
}

/// Columns ranked by |coefficient|, largest first; ties keep column order.
pub fn coefficient_influence(model: &LogisticModel) -> Result<Vec<Influence>, FeatureError> {
    if !model.standardized {
        return Err(FeatureError::NotStandardized);
    }
    let mut out: Vec<Influence> = model
        .columns
        .iter()
        .zip(&model.weights)
        .enumerate()
        .map(|(index, (c, w))| Influence {
            column: c.name.clone(),
            index,
            magnitude: w.abs(),
        })
        .collect();
    out.sort_by(|a, b| b.magnitude.total_cmp(&a.magnitude).then(a.index.cmp(&b.index)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(asset: &str, ty: &str, unit: &str, age: u32, gap: u32, util: f64, flag: u8) -> PanelRow {
        PanelRow {
            asset_id: asset.into(),
            vehicle_type: ty.into(),
            unit: unit.into(),
            week: age,
            operational_weeks: age,
            weeks_since_last_visit: gap,
            utilization: util,
            repair_flag: flag,
        }
    }

    fn toy() -> Panel {
        Panel::from_rows(vec![
            row("V1", "T1", "U1", 0, 0, 0.0, 0),
            row("V1", "T1", "U1", 1, 1, 10.0, 1),
            row("V2", "T2", "U2", 0, 0, 0.0, 0),
            row("V2", "T2", "U2", 1, 1, 5.0, 0),
        ])
        .unwrap()
    }

    fn three_types() -> Panel {
        Panel::from_rows(
            ["A", "B", "C", "B"]
                .iter()
                .enumerate()
                .map(|(i, t)| row(&format!("V{i}"), t, "U", 3, 1, 1.0, (i % 2) as u8))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_numeric_passthrough() {
        let p = toy();
        let spec = FeatureSpec {
            use_operational_weeks: true,
            ..FeatureSpec::NONE
        };
        let m = encode(&p, spec).unwrap();
        assert_eq!(m.width(), 1);
        let ages: Vec<f64> = p.rows().iter().map(|r| r.operational_weeks as f64).collect();
        assert_eq!(m.column_values(0), ages);
        assert_eq!(m.labels(), &[0, 1, 0, 0]);
    }

    #[test]
    fn one_hot_with_unknown_level() {
        let spec = FeatureSpec {
            use_vehicle_type: true,
            ..FeatureSpec::NONE
        };
        let m = encode(&three_types(), spec).unwrap();
        assert_eq!(m.width(), 4);
        assert_eq!(m.columns()[3].kind, ColumnKind::OneHot { level: None });
        for i in 0..m.n_rows() {
            let d = m.dense_row(i);
            assert_eq!(d.iter().sum::<f64>(), 1.0);
            assert_eq!(d[3], 0.0);
        }
    }

    #[test]
    fn full_spec_width_matches_hand_count() {
        let m = encode(&toy(), FeatureSpec::all()).unwrap();
        // id: V1 V2 unk; type: T1 T2 unk; unit: U1 U2 unk; age gap util
        let names: Vec<&str> = m.columns().iter().map(|c| c.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "vehicle_id=V1",
                "vehicle_id=V2",
                "vehicle_id=<unknown>",
                "vehicle_type=T1",
                "vehicle_type=T2",
                "vehicle_type=<unknown>",
                "unit=U1",
                "unit=U2",
                "unit=<unknown>",
                "operational_weeks",
                "weeks_since_last_visit",
                "utilization",
            ]
        );
        assert_eq!(m.width(), 3 + 3 + 3 + 3);
        assert_eq!(
            m.dense_row(1),
            vec![1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 10.0]
        );
    }

    #[test]
    fn unseen_levels_map_to_unknown() {
        let enc = FeatureEncoder::fit(&toy(), FeatureSpec::from_names(&["type"]).unwrap()).unwrap();
        let m = enc.transform_rows(&[row("V9", "T9", "U9", 0, 0, 0.0, 0)]);
        assert_eq!(m.dense_row(0), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn empty_spec_rejected() {
        assert_eq!(encode(&toy(), FeatureSpec::NONE), Err(FeatureError::EmptySpec));
        assert_eq!(FeatureSpec::from_names::<&str>(&[]), Err(FeatureError::EmptySpec));
        assert!(matches!(
            FeatureSpec::from_names(&["mileage"]),
            Err(FeatureError::UnknownFeature(_))
        ));
    }

    #[test]
    fn constant_column_left_alone() {
        let m = FeatureMatrix::numeric(&[vec![5.0], vec![5.0], vec![5.0]], vec![0, 1, 0]);
        let s = standardize(&m);
        assert_eq!(s.column_values(0), vec![5.0; 3]);
        assert_eq!(s.scale(), &[1.0]);
    }

    #[test]
    fn standardized_column_has_unit_std() {
        let m = FeatureMatrix::numeric(&[vec![0.0], vec![0.0], vec![0.0], vec![2.0]], vec![0, 1, 0, 1]);
        let s = standardize(&m);
        // population std of {0,0,0,2}: mean 0.5, var (3*0.25 + 2.25)/4 = 0.75
        assert!((s.scale()[0] - 0.75f64.sqrt()).abs() < 1e-15);
        assert!((s.column_std()[0] - 1.0).abs() < 1e-12);
        let again = standardize(&s);
        for (a, b) in again.column_values(0).iter().zip(s.column_values(0)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn sparse_std_matches_dense() {
        let m = encode(&toy(), FeatureSpec::all()).unwrap();
        let std = m.column_std();
        for c in 0..m.width() {
            let col = m.column_values(c);
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!((std[c] - var.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn ablation_table_subsets() {
        let rows = ablation_subsets();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[0], FeatureSpec::all());
        assert_eq!(rows[4].label(), "vehicle_type+operational_weeks");
        assert_eq!(rows[5].label(), "operational_weeks");
    }
}
