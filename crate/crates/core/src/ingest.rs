//! Sub-work-order export parsing.
//!
//! A DPAS "sub-work order inquiry" carries several dozen columns; only the
//! eleven in [`REQUIRED_COLUMNS`] (plus the optional [`LABOR_HOURS_COLUMN`])
//! are read. Extra columns are ignored, a missing required column is fatal,
//! and any other problem is reported per row so one bad line never sinks a
//! whole export.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};
use thiserror::Error;

pub const WORK_ORDER_ID: &str = "Work Order ID";
pub const SUB_WORK_ORDER_ID: &str = "Sub Work Order Id";
pub const APPROVAL_DT: &str = "Approval Dt";
pub const ASSET_ID: &str = "Asset Id";
pub const CLOSED_DT: &str = "Closed Dt";
pub const ITEM_DESC: &str = "Item Desc";
pub const MGMT_CD: &str = "Asset LIN/TAMCN";
pub const EQUIPMENT_POOL: &str = "Equipment Pool";
pub const MAINT_TEAM: &str = "Maint Team Name";
pub const ESTBD_DATETIME: &str = "Estbd Dt/Time";
pub const WORK_PLAN_TYPE: &str = "Work Plan Type CD";
pub const LABOR_HOURS_COLUMN: &str = "Labor Hours";

pub const REQUIRED_COLUMNS: [&str; 11] = [
    WORK_ORDER_ID,
    SUB_WORK_ORDER_ID,
    APPROVAL_DT,
    ASSET_ID,
    CLOSED_DT,
    ITEM_DESC,
    MGMT_CD,
    EQUIPMENT_POOL,
    MAINT_TEAM,
    ESTBD_DATETIME,
    WORK_PLAN_TYPE,
];

/// One row of the export.
#[derive(Debug, Clone, PartialEq)]
pub struct SubWorkOrderRecord {
    pub work_order_id: String,
    pub sub_work_order_id: String,
    /// Shop check-in; the day the repair starts.
    pub approval_date: NaiveDate,
    pub closed_date: Option<NaiveDate>,
    pub asset_id: String,
    pub item_desc: String,
    pub mgmt_cd: String,
    pub equipment_pool: String,
    pub maint_team: String,
    pub estbd_datetime: NaiveDateTime,
    pub work_plan_type: String,
    pub labor_hours: Option<f64>,
}

impl SubWorkOrderRecord {
    pub fn work_plan_class(&self) -> WorkPlanClass {
        classify_work_plan(&self.work_plan_type)
    }

    pub fn acquisition_year(&self) -> Option<i32> {
        acquisition_year(&self.asset_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorkPlanClass {
    Scheduled,
    Unscheduled,
}

/// `PREV` (any case, surrounding whitespace ignored) is preventive
/// maintenance; every other work-plan code is unscheduled.
pub fn classify_work_plan(code: &str) -> WorkPlanClass {
    if code.trim().eq_ignore_ascii_case("PREV") {
        WorkPlanClass::Scheduled
    } else {
        WorkPlanClass::Unscheduled
    }
}

/// Acquisition year encoded in an Air Force asset id: `AF08...` is 2008.
pub fn acquisition_year(asset_id: &str) -> Option<i32> {
    let b = asset_id.as_bytes();
    if b.len() >= 4 && &b[..2] == b"AF" && b[2].is_ascii_digit() && b[3].is_ascii_digit() {
        Some(2000 + i32::from(b[2] - b'0') * 10 + i32::from(b[3] - b'0'))
    } else {
        None
    }
}

#[derive(Debug, Clone)]
pub struct SchemaConfig {
    pub delimiter: u8,
    /// canonical column name -> header actually present in the file
    pub aliases: HashMap<String, String>,
}

impl Default for SchemaConfig {
    fn default() -> Self {
        Self {
            delimiter: b',',
            aliases: HashMap::new(),
        }
    }
}

impl SchemaConfig {
    pub fn tab_separated() -> Self {
        Self {
            delimiter: b'\t',
            ..Self::default()
        }
    }

    /// Parse a remapping file: `Canonical Name=Header In File` per line,
    /// blank lines and `#` comments skipped.
    pub fn parse_aliases(&mut self, text: &str) -> Result<(), IngestError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(IngestError::BadAliasLine {
                    line: i + 1,
                    text: raw.to_string(),
                });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() || v.is_empty() {
                return Err(IngestError::BadAliasLine {
                    line: i + 1,
                    text: raw.to_string(),
                });
            }
            self.aliases.insert(k.to_string(), v.to_string());
        }
        Ok(())
    }

    fn header_for<'a>(&'a self, canonical: &'a str) -> &'a str {
        self.aliases.get(canonical).map(String::as_str).unwrap_or(canonical)
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("required column `{0}` not found in header")]
    MissingColumn(String),
    #[error("alias file line {line}: expected `name=header`, got `{text}`")]
    BadAliasLine { line: usize, text: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RowErrorReason {
    BadDate(String),
    BadNumber(String),
    DateOrdering,
    EmptyAssetId,
    NegativeLaborHours,
    DuplicateId,
    FieldCount,
}

impl fmt::Display for RowErrorReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BadDate(v) => write!(f, "unrecognised date `{v}`"),
            Self::BadNumber(v) => write!(f, "not a number `{v}`"),
            Self::DateOrdering => f.write_str("closed date precedes approval date"),
            Self::EmptyAssetId => f.write_str("empty asset id"),
            Self::NegativeLaborHours => f.write_str("negative labor hours"),
            Self::DuplicateId => f.write_str("duplicate work order / sub work order pair"),
            Self::FieldCount => f.write_str("row too short for header"),
        }
    }
}

/// A rejected data row. `line` is the 1-based line in the source (header is 1).
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub field: String,
    pub reason: RowErrorReason,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}: {}", self.line, self.field, self.reason)
    }
}

#[derive(Debug, Default)]
pub struct ParseOutcome {
    pub records: Vec<SubWorkOrderRecord>,
    pub errors: Vec<RowError>,
}

struct ColumnIndex {
    required: [usize; 11],
    labor_hours: Option<usize>,
}

/// Parse an export. Records come back in source order.
pub fn parse_subworkorders<R: Read>(
    source: R,
    schema: &SchemaConfig,
) -> Result<ParseOutcome, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(source);

    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let mut required = [0usize; 11];
    for (slot, canonical) in required.iter_mut().zip(REQUIRED_COLUMNS) {
        let actual = schema.header_for(canonical);
        *slot = find(actual).ok_or_else(|| IngestError::MissingColumn(actual.to_string()))?;
    }
    let cols = ColumnIndex {
        required,
        labor_hours: find(schema.header_for(LABOR_HOURS_COLUMN)),
    };

    let mut out = ParseOutcome::default();
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut row = csv::StringRecord::new();
    loop {
        let line = rdr.position().line();
        if !rdr.read_record(&mut row)? {
            break;
        }
        let line = row.position().map_or(line, |p| p.line());
        match parse_row(&row, &cols, line) {
            Ok(rec) => {
                let key = (rec.work_order_id.clone(), rec.sub_work_order_id.clone());
                if seen.insert(key) {
                    out.records.push(rec);
                } else {
                    out.errors.push(RowError {
                        line,
                        field: SUB_WORK_ORDER_ID.to_string(),
                        reason: RowErrorReason::DuplicateId,
                    });
                }
            }
            Err(e) => out.errors.push(e),
        }
    }
    Ok(out)
}

fn parse_row(
    row: &csv::StringRecord,
    cols: &ColumnIndex,
    line: u64,
) -> Result<SubWorkOrderRecord, RowError> {
    let err = |field: &str, reason| RowError {
        line,
        field: field.to_string(),
        reason,
    };
    let get = |i: usize| -> Result<&str, RowError> {
        let idx = cols.required[i];
        row.get(idx)
            .ok_or_else(|| err(REQUIRED_COLUMNS[i], RowErrorReason::FieldCount))
    };

    let asset_id = get(3)?;
    if asset_id.is_empty() {
        return Err(err(ASSET_ID, RowErrorReason::EmptyAssetId));
    }
    let approval_raw = get(2)?;
    let approval_date = parse_date(approval_raw)
        .ok_or_else(|| err(APPROVAL_DT, RowErrorReason::BadDate(approval_raw.into())))?;
    let closed_raw = get(4)?;
    let closed_date = if closed_raw.is_empty() {
        None
    } else {
        Some(
            parse_date(closed_raw)
                .ok_or_else(|| err(CLOSED_DT, RowErrorReason::BadDate(closed_raw.into())))?,
        )
    };
    if closed_date.is_some_and(|c| c < approval_date) {
        return Err(err(CLOSED_DT, RowErrorReason::DateOrdering));
    }
    let estbd_raw = get(9)?;
    let estbd_datetime = parse_timestamp(estbd_raw)
        .ok_or_else(|| err(ESTBD_DATETIME, RowErrorReason::BadDate(estbd_raw.into())))?;

    let labor_hours = match cols.labor_hours.and_then(|i| row.get(i)) {
        None | Some("") => None,
        Some(s) => {
            let v: f64 = s
                .parse()
                .map_err(|_| err(LABOR_HOURS_COLUMN, RowErrorReason::BadNumber(s.into())))?;
            if !v.is_finite() {
                return Err(err(LABOR_HOURS_COLUMN, RowErrorReason::BadNumber(s.into())));
            }
            if v < 0.0 {
                return Err(err(LABOR_HOURS_COLUMN, RowErrorReason::NegativeLaborHours));
            }
            Some(v)
        }
    };

    Ok(SubWorkOrderRecord {
        work_order_id: get(0)?.to_string(),
        sub_work_order_id: get(1)?.to_string(),
        approval_date,
        closed_date,
        asset_id: asset_id.to_string(),
        item_desc: get(5)?.to_string(),
        mgmt_cd: get(6)?.to_string(),
        equipment_pool: get(7)?.to_string(),
        maint_team: get(8)?.to_string(),
        estbd_datetime,
        work_plan_type: get(10)?.to_string(),
        labor_hours,
    })
}

/// `YYYY-MM-DD` or US `M/D/YYYY`. Anything else (two-digit years included)
/// is rejected rather than guessed at.
pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    let num = |p: &str, min: usize, max: usize| -> Option<u32> {
        if p.len() < min || p.len() > max || !p.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        p.parse().ok()
    };
    if s.contains('-') {
        let mut it = s.split('-');
        let (y, m, d) = (it.next()?, it.next()?, it.next()?);
        if it.next().is_some() {
            return None;
        }
        NaiveDate::from_ymd_opt(num(y, 4, 4)? as i32, num(m, 2, 2)?, num(d, 2, 2)?)
    } else if s.contains('/') {
        let mut it = s.split('/');
        let (m, d, y) = (it.next()?, it.next()?, it.next()?);
        if it.next().is_some() {
            return None;
        }
        NaiveDate::from_ymd_opt(num(y, 4, 4)? as i32, num(m, 1, 2)?, num(d, 1, 2)?)
    } else {
        None
    }
}

/// A date as in [`parse_date`], optionally followed by `T` or a space and
/// `HH:MM[:SS]` with an optional `AM`/`PM` suffix.
pub fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    let s = s.trim();
    let (date_part, time_part) = match s.find(['T', ' ']) {
        Some(i) => (&s[..i], Some(s[i + 1..].trim())),
        None => (s, None),
    };
    let date = parse_date(date_part)?;
    let Some(time_part) = time_part else {
        return Some(date.and_time(NaiveTime::MIN));
    };
    let upper = time_part.to_ascii_uppercase();
    let (clock, meridiem) = if let Some(t) = upper.strip_suffix("AM") {
        (t.trim(), Some(false))
    } else if let Some(t) = upper.strip_suffix("PM") {
        (t.trim(), Some(true))
    } else {
        (upper.as_str(), None)
    };
    let parts: Vec<&str> = clock.split(':').collect();
    if !(2..=3).contains(&parts.len())
        || parts.iter().any(|p| p.is_empty() || p.len() > 2 || !p.bytes().all(|b| b.is_ascii_digit()))
    {
        return None;
    }
    let mut h: u32 = parts[0].parse().ok()?;
    let m: u32 = parts[1].parse().ok()?;
    let sec: u32 = parts.get(2).map_or(Some(0), |p| p.parse().ok())?;
    match meridiem {
        Some(pm) => {
            if !(1..=12).contains(&h) {
                return None;
            }
            h = (h % 12) + if pm { 12 } else { 0 };
        }
        None if h > 23 => return None,
        None => {}
    }
    Some(date.and_time(NaiveTime::from_hms_opt(h, m, sec)?))
}

/// Write records as the required-column CSV (plus labor hours), the dialect
/// [`parse_subworkorders`] reads back losslessly.
pub fn write_subworkorders<W: Write>(
    records: &[SubWorkOrderRecord],
    sink: W,
    delimiter: u8,
) -> Result<(), IngestError> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(sink);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.push(LABOR_HOURS_COLUMN);
    w.write_record(&header)?;
    for r in records {
        let approval = r.approval_date.format("%Y-%m-%d").to_string();
        let closed = r
            .closed_date
            .map(|d| d.format("%Y-%m-%d").to_string())
            .unwrap_or_default();
        let estbd = r.estbd_datetime.format("%Y-%m-%d %H:%M:%S").to_string();
        let hours = r.labor_hours.map(|h| h.to_string()).unwrap_or_default();
        w.write_record([
            r.work_order_id.as_str(),
            &r.sub_work_order_id,
            &approval,
            &r.asset_id,
            &closed,
            &r.item_desc,
            &r.mgmt_cd,
            &r.equipment_pool,
            &r.maint_team,
            &estbd,
            &r.work_plan_type,
            &hours,
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header_with_extras(extras: usize) -> String {
        let mut cols: Vec<String> = REQUIRED_COLUMNS.iter().map(|s| s.to_string()).collect();
        for i in 0..extras {
            cols.insert((i * 7) % (cols.len() + 1), format!("Extra Field {i}"));
        }
        cols.join(",")
    }

    fn row_for(header: &str, vals: &[(&str, &str)]) -> String {
        header
            .split(',')
            .map(|h| {
                vals.iter()
                    .find(|(k, _)| *k == h)
                    .map_or("x".to_string(), |(_, v)| v.to_string())
            })
            .collect::<Vec<_>>()
            .join(",")
    }

    fn valid(wo: &str, asset: &str, appr: &str, closed: &str) -> Vec<(&'static str, String)> {
        vec![
            (WORK_ORDER_ID, wo.to_string()),
            (SUB_WORK_ORDER_ID, "01".to_string()),
            (APPROVAL_DT, appr.to_string()),
            (ASSET_ID, asset.to_string()),
            (CLOSED_DT, closed.to_string()),
            (ESTBD_DATETIME, format!("{appr} 07:30")),
            (WORK_PLAN_TYPE, "Troubleshoot".to_string()),
        ]
    }

    fn csv_of(header: &str, rows: &[Vec<(&'static str, String)>]) -> String {
        let mut s = format!("{header}\n");
        for r in rows {
            let pairs: Vec<(&str, &str)> = r.iter().map(|(k, v)| (*k, v.as_str())).collect();
            s.push_str(&row_for(header, &pairs));
            s.push('\n');
        }
        s
    }

    #[test]
    fn full_width_export_with_extras() {
        let header = header_with_extras(58);
        assert_eq!(header.split(',').count(), 69);
        let text = csv_of(
            &header,
            &[
                valid("W1", "AF08I00508", "2019-03-04", "2019-03-06"),
                valid("W2", "AF11L00001", "3/5/2019", ""),
                valid("W3", "AF08I00508", "2019-04-01", "4/2/2019"),
            ],
        );
        let out = parse_subworkorders(text.as_bytes(), &SchemaConfig::default()).unwrap();
        assert_eq!(out.records.len(), 3);
        assert!(out.errors.is_empty());
        assert_eq!(out.records[1].work_order_id, "W2");
        assert_eq!(out.records[1].closed_date, None);
        assert_eq!(
            out.records[1].approval_date,
            NaiveDate::from_ymd_opt(2019, 3, 5).unwrap()
        );
    }

    #[test]
    fn header_only() {
        let header = REQUIRED_COLUMNS.join(",");
        let out = parse_subworkorders(header.as_bytes(), &SchemaConfig::default()).unwrap();
        assert!(out.records.is_empty() && out.errors.is_empty());
    }

    #[test]
    fn closed_before_approval_is_row_error() {
        let header = REQUIRED_COLUMNS.join(",");
        let text = csv_of(&header, &[valid("W1", "AF08I00508", "2019-03-04", "2019-03-01")]);
        let out = parse_subworkorders(text.as_bytes(), &SchemaConfig::default()).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.errors.len(), 1);
        assert_eq!(out.errors[0].reason, RowErrorReason::DateOrdering);
        assert_eq!(out.errors[0].line, 2);
    }

    #[test]
    fn missing_column_is_fatal() {
        let header = REQUIRED_COLUMNS[..10].join(",");
        let err = parse_subworkorders(header.as_bytes(), &SchemaConfig::default()).unwrap_err();
        assert!(matches!(err, IngestError::MissingColumn(c) if c == WORK_PLAN_TYPE));
    }

    #[test]
    fn aliases_and_tabs() {
        let mut schema = SchemaConfig::tab_separated();
        schema
            .parse_aliases("# drift\nAsset Id = VEHICLE\n\nApproval Dt=APPR DATE\n")
            .unwrap();
        let header: Vec<&str> = REQUIRED_COLUMNS
            .iter()
            .map(|c| match *c {
                ASSET_ID => "VEHICLE",
                APPROVAL_DT => "APPR DATE",
                other => other,
            })
            .collect();
        let row: Vec<&str> = REQUIRED_COLUMNS
            .iter()
            .map(|c| match *c {
                ASSET_ID => "AF09A00001",
                APPROVAL_DT => "2020-01-06",
                CLOSED_DT => "",
                ESTBD_DATETIME => "1/6/2020 9:15 AM",
                _ => "v",
            })
            .collect();
        let text = format!("{}\n{}\n", header.join("\t"), row.join("\t"));
        let out = parse_subworkorders(text.as_bytes(), &schema).unwrap();
        assert_eq!(out.records.len(), 1, "{:?}", out.errors);
        assert_eq!(out.records[0].asset_id, "AF09A00001");
        assert!(schema.clone().parse_aliases("no equals sign").is_err());
    }

    #[test]
    fn row_level_problems() {
        let header = REQUIRED_COLUMNS.join(",");
        let mut bad_date = valid("W1", "AF08I00508", "03-04-19", "");
        bad_date[5].1 = "2019-03-04 07:30".into();
        let empty_asset = valid("W2", "", "2019-03-04", "");
        let ok = valid("W3", "AF08I00508", "2019-03-04", "");
        let dup = valid("W3", "AF08I00509", "2019-03-05", "");
        let text = csv_of(&header, &[bad_date, empty_asset, ok, dup]) + "short,row\n";
        let out = parse_subworkorders(text.as_bytes(), &SchemaConfig::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        let reasons: Vec<_> = out.errors.iter().map(|e| (e.line, e.reason.clone())).collect();
        assert_eq!(
            reasons,
            vec![
                (2, RowErrorReason::BadDate("03-04-19".into())),
                (3, RowErrorReason::EmptyAssetId),
                (5, RowErrorReason::DuplicateId),
                (6, RowErrorReason::FieldCount),
            ]
        );
    }

    #[test]
    fn labor_hours_column() {
        let header = format!("{},{}", REQUIRED_COLUMNS.join(","), LABOR_HOURS_COLUMN);
        let mk = |wo: &'static str, h: &str| {
            let mut v = valid(wo, "AF08I00508", "2019-03-04", "");
            v.push((LABOR_HOURS_COLUMN, h.to_string()));
            v
        };
        let text = csv_of(&header, &[mk("A", "2.5"), mk("B", ""), mk("C", "-1"), mk("D", "abc")]);
        let out = parse_subworkorders(text.as_bytes(), &SchemaConfig::default()).unwrap();
        assert_eq!(out.records.len(), 2);
        assert_eq!(out.records[0].labor_hours, Some(2.5));
        assert_eq!(out.records[1].labor_hours, None);
        assert_eq!(out.errors[0].reason, RowErrorReason::NegativeLaborHours);
        assert!(matches!(out.errors[1].reason, RowErrorReason::BadNumber(_)));
    }

    #[test]
    fn acquisition_years() {
        assert_eq!(acquisition_year("AF08I00508"), Some(2008));
        assert_eq!(acquisition_year("AF00X00001"), Some(2000));
        assert_eq!(acquisition_year("UNKNOWN-7"), None);
        assert_eq!(acquisition_year("AF8"), None);
        assert_eq!(acquisition_year("af08I00508"), None);
    }

    #[test]
    fn work_plan_classes() {
        assert_eq!(classify_work_plan("Prev"), WorkPlanClass::Scheduled);
        assert_eq!(classify_work_plan("prev"), WorkPlanClass::Scheduled);
        assert_eq!(classify_work_plan(" PREV "), WorkPlanClass::Scheduled);
        assert_eq!(classify_work_plan("Troubleshoot"), WorkPlanClass::Unscheduled);
        assert_eq!(classify_work_plan("Major Repair"), WorkPlanClass::Unscheduled);
        assert_eq!(classify_work_plan("PREVENTIVE"), WorkPlanClass::Unscheduled);
    }

    #[test]
    fn date_formats() {
        let d = NaiveDate::from_ymd_opt(2021, 7, 9).unwrap();
        assert_eq!(parse_date("2021-07-09"), Some(d));
        assert_eq!(parse_date("7/9/2021"), Some(d));
        assert_eq!(parse_date("07/09/2021"), Some(d));
        assert_eq!(parse_date("7/9/21"), None);
        assert_eq!(parse_date("2021-7-9"), None);
        assert_eq!(parse_date("2021-02-30"), None);
        assert_eq!(parse_date("July 9 2021"), None);
        let t = parse_timestamp("7/9/2021 1:05 PM").unwrap();
        assert_eq!(t, d.and_hms_opt(13, 5, 0).unwrap());
        assert_eq!(
            parse_timestamp("2021-07-09T00:00:07").unwrap(),
            d.and_hms_opt(0, 0, 7).unwrap()
        );
        assert_eq!(parse_timestamp("2021-07-09 25:00"), None);
        assert_eq!(parse_timestamp("2021-07-09").unwrap(), d.and_hms_opt(0, 0, 0).unwrap());
    }
}
