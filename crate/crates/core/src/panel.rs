//! Weekly per-vehicle panel.
//!
//! Each vehicle gets one row per week from its series start through the panel
//! end. The outcome is the repair flag (any qualifying sub-work order approved
//! that week); the covariates are vehicle age in weeks, weeks since the last
//! flagged week, and cumulative utilization.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{SubWorkOrderRecord, WorkPlanClass};
use crate::par;

pub const DEFAULT_GAP_CAP: u32 = 104;

/// Monday-aligned week numbering from a fixed start.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeekCalendar {
    start: NaiveDate,
}

impl WeekCalendar {
    /// Week 0 is the Monday-to-Sunday week containing `day`.
    pub fn containing(day: NaiveDate) -> Self {
        let back = i64::from(day.weekday().num_days_from_monday());
        Self {
            start: day - chrono::Duration::days(back),
        }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    /// Week index of `day`; negative before the start.
    pub fn week_of(&self, day: NaiveDate) -> i64 {
        (day - self.start).num_days().div_euclid(7)
    }

    pub fn monday_of(&self, week: u32) -> NaiveDate {
        self.start + chrono::Duration::weeks(i64::from(week))
    }

    /// Week containing January 1st of `year`.
    pub fn year_start_week(&self, year: i32) -> Option<i64> {
        NaiveDate::from_ymd_opt(year, 1, 1).map(|d| self.week_of(d))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelRow {
    pub asset_id: String,
    pub vehicle_type: String,
    pub unit: String,
    pub week: u32,
    pub operational_weeks: u32,
    pub weeks_since_last_visit: u32,
    pub utilization: f64,
    pub repair_flag: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    pub asset_ids: Vec<String>,
    pub vehicle_types: Vec<String>,
    pub units: Vec<String>,
}

impl Vocab {
    fn of(rows: &[PanelRow]) -> Self {
        let mut a = BTreeSet::new();
        let mut t = BTreeSet::new();
        let mut u = BTreeSet::new();
        for r in rows {
            a.insert(r.asset_id.as_str());
            t.insert(r.vehicle_type.as_str());
            u.insert(r.unit.as_str());
        }
        let own = |s: BTreeSet<&str>| s.into_iter().map(str::to_string).collect();
        Self {
            asset_ids: own(a),
            vehicle_types: own(t),
            units: own(u),
        }
    }
}

/// Rows sorted by `(asset_id, week)`, no duplicates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Panel {
    rows: Vec<PanelRow>,
    vocab: Vocab,
}

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("no records to build a panel from")]
    EmptyDataset,
    #[error("panel end week precedes all records")]
    NonPositiveSpan,
    #[error("duplicate panel row for {asset_id} week {week}")]
    DuplicateRow { asset_id: String, week: u32 },
    #[error("panel row {row}: repair_flag must be 0 or 1, got {value}")]
    BadRepairFlag { row: usize, value: u8 },
    #[error("utilization row {row}: {reason}")]
    BadUtilization { row: usize, reason: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Panel {
    /// Sort, check uniqueness and derive the vocabulary.
    pub fn from_rows(mut rows: Vec<PanelRow>) -> Result<Self, PanelError> {
        rows.sort_by(|a, b| a.asset_id.cmp(&b.asset_id).then(a.week.cmp(&b.week)));
        for (i, w) in rows.windows(2).enumerate() {
            if w[0].asset_id == w[1].asset_id && w[0].week == w[1].week {
                return Err(PanelError::DuplicateRow {
                    asset_id: rows[i].asset_id.clone(),
                    week: rows[i].week,
                });
            }
        }
        for (row, r) in rows.iter().enumerate() {
            if r.repair_flag > 1 {
                return Err(PanelError::BadRepairFlag {
                    row,
                    value: r.repair_flag,
                });
            }
        }
        let vocab = Vocab::of(&rows);
        Ok(Self { rows, vocab })
    }

    /// Rows already known to be sorted and unique (subsets of a valid panel).
    pub(crate) fn from_sorted_unchecked(rows: Vec<PanelRow>) -> Self {
        let vocab = Vocab::of(&rows);
        Self { rows, vocab }
    }

    pub fn rows(&self) -> &[PanelRow] {
        &self.rows
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.rows.iter().map(|r| r.repair_flag).collect()
    }

    /// Contiguous per-vehicle slices in asset-id order.
    pub fn vehicles(&self) -> impl Iterator<Item = &[PanelRow]> {
        self.rows.chunk_by(|a, b| a.asset_id == b.asset_id)
    }

    /// Distinct weeks present, ascending.
    pub fn weeks(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.rows.iter().map(|r| r.week).collect();
        set.into_iter().collect()
    }

    pub fn filter(&self, mut keep: impl FnMut(&PanelRow) -> bool) -> Panel {
        Panel::from_sorted_unchecked(self.rows.iter().filter(|r| keep(r)).cloned().collect())
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), PanelError> {
        let mut w = csv::Writer::from_writer(sink);
        for r in &self.rows {
            w.serialize(r)?;
        }
        if self.rows.is_empty() {
            w.write_record(PANEL_COLUMNS)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(source: R) -> Result<Self, PanelError> {
        let mut r = csv::Reader::from_reader(source);
        let headers = r.headers()?.clone();
        if headers.iter().ne(PANEL_COLUMNS) {
            return Err(PanelError::Csv(csv::Error::from(std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("panel header must be {}", PANEL_COLUMNS.join(",")),
            ))));
        }
        let rows = r.deserialize().collect::<Result<Vec<PanelRow>, _>>()?;
        Self::from_rows(rows)
    }
}

pub const PANEL_COLUMNS: [&str; 8] = [
    "asset_id",
    "vehicle_type",
    "unit",
    "week",
    "operational_weeks",
    "weeks_since_last_visit",
    "utilization",
    "repair_flag",
];

/// Cumulative utilization readings per vehicle, keyed by panel week.
#[derive(Debug, Clone, Default)]
pub struct UtilizationTable {
    readings: HashMap<String, Vec<(u32, f64)>>,
}

#[derive(Deserialize)]
struct UtilizationRow {
    asset_id: String,
    week: u32,
    cumulative_units: f64,
}

impl UtilizationTable {
    pub fn insert(&mut self, asset_id: &str, week: u32, cumulative_units: f64) {
        self.readings
            .entry(asset_id.to_string())
            .or_default()
            .push((week, cumulative_units));
    }

    /// Sidecar CSV with header `asset_id,week,cumulative_units`.
    pub fn read_csv<R: Read>(source: R) -> Result<Self, PanelError> {
        let mut table = Self::default();
        let mut r = csv::Reader::from_reader(source);
        for (i, row) in r.deserialize::<UtilizationRow>().enumerate() {
            let row = row?;
            if !row.cumulative_units.is_finite() || row.cumulative_units < 0.0 {
                return Err(PanelError::BadUtilization {
                    row: i + 1,
                    reason: format!("cumulative_units {} not a nonnegative number", row.cumulative_units),
                });
            }
            table.insert(&row.asset_id, row.week, row.cumulative_units);
        }
        Ok(table)
    }

    /// Running maximum of readings taken at or before each week in `weeks`
    /// (ascending); 0 before the first reading.
    fn series(&self, asset_id: &str, weeks: std::ops::RangeInclusive<u32>) -> Vec<f64> {
        let mut readings = self.readings.get(asset_id).cloned().unwrap_or_default();
        readings.sort_by_key(|r| r.0);
        let mut it = readings.into_iter().peekable();
        let mut level = 0.0f64;
        weeks
            .map(|w| {
                while let Some(&(rw, v)) = it.peek() {
                    if rw > w {
                        break;
                    }
                    level = level.max(v);
                    it.next();
                }
                level
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub enum UtilizationSource {
    /// `operational_weeks * rate`, rate looked up by vehicle type.
    ConstantRate {
        default_rate: f64,
        per_type: BTreeMap<String, f64>,
    },
    Sidecar(UtilizationTable),
}

impl Default for UtilizationSource {
    fn default() -> Self {
        Self::ConstantRate {
            default_rate: 1.0,
            per_type: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PanelOptions {
    /// Flag PREV services too. When false only unscheduled work counts.
    pub include_scheduled: bool,
    /// Overrides the earliest approval date as the week-0 anchor.
    pub start: Option<NaiveDate>,
    /// Overrides the last week containing a record.
    pub end_week: Option<u32>,
    pub gap_cap: u32,
    pub utilization: UtilizationSource,
}

impl Default for PanelOptions {
    fn default() -> Self {
        Self {
            include_scheduled: true,
            start: None,
            end_week: None,
            gap_cap: DEFAULT_GAP_CAP,
            utilization: UtilizationSource::default(),
        }
    }
}

fn qualifies(rec: &SubWorkOrderRecord, include_scheduled: bool) -> bool {
    include_scheduled || rec.work_plan_class() == WorkPlanClass::Unscheduled
}

/// Panel weeks in which `asset_id` had a qualifying sub-work order approved.
pub fn repair_weeks(
    records: &[SubWorkOrderRecord],
    asset_id: &str,
    include_scheduled: bool,
    calendar: &WeekCalendar,
) -> BTreeSet<u32> {
    records
        .iter()
        .filter(|r| r.asset_id == asset_id && qualifies(r, include_scheduled))
        .filter_map(|r| u32::try_from(calendar.week_of(r.approval_date)).ok())
        .collect()
}

/// Calendar implied by `records` and `options`.
pub fn calendar_for(
    records: &[SubWorkOrderRecord],
    options: &PanelOptions,
) -> Result<WeekCalendar, PanelError> {
    let first = match options.start {
        Some(d) => d,
        None => records
            .iter()
            .map(|r| r.approval_date)
            .min()
            .ok_or(PanelError::EmptyDataset)?,
    };
    Ok(WeekCalendar::containing(first))
}

struct VehicleRecords<'a> {
    asset_id: &'a str,
    latest: &'a SubWorkOrderRecord,
    first_week: u32,
    flagged: BTreeSet<u32>,
}

pub fn build_panel(
    records: &[SubWorkOrderRecord],
    options: &PanelOptions,
) -> Result<Panel, PanelError> {
    if records.is_empty() {
        return Err(PanelError::EmptyDataset);
    }
    let cal = calendar_for(records, options)?;
    let dated: Vec<(u32, &SubWorkOrderRecord)> = records
        .iter()
        .filter_map(|r| u32::try_from(cal.week_of(r.approval_date)).ok().map(|w| (w, r)))
        .collect();
    let end = match options.end_week {
        Some(e) => e,
        None => dated.iter().map(|(w, _)| *w).max().ok_or(PanelError::NonPositiveSpan)?,
    };

    let mut by_vehicle: BTreeMap<&str, VehicleRecords> = BTreeMap::new();
    for &(week, rec) in dated.iter().filter(|(w, _)| *w <= end) {
        let v = by_vehicle.entry(rec.asset_id.as_str()).or_insert(VehicleRecords {
            asset_id: &rec.asset_id,
            latest: rec,
            first_week: week,
            flagged: BTreeSet::new(),
        });
        v.first_week = v.first_week.min(week);
        // later approval wins; equal dates go to the later source row
        if rec.approval_date >= v.latest.approval_date {
            v.latest = rec;
        }
        if qualifies(rec, options.include_scheduled) {
            v.flagged.insert(week);
        }
    }
    if by_vehicle.is_empty() {
        return Err(PanelError::NonPositiveSpan);
    }

    let vehicles: Vec<VehicleRecords> = by_vehicle.into_values().collect();
    let per_vehicle = par::map_slice(&vehicles, |v| vehicle_rows(v, &cal, end, options));
    Ok(Panel::from_sorted_unchecked(per_vehicle.into_iter().flatten().collect()))
}

fn vehicle_rows(
    v: &VehicleRecords,
    cal: &WeekCalendar,
    end: u32,
    options: &PanelOptions,
) -> Vec<PanelRow> {
    let first = i64::from(v.first_week);
    // Age counts from January 1st of the acquisition year when the asset id
    // carries one consistent with the records; otherwise from first appearance.
    let (row_start, age_origin) = match crate::ingest::acquisition_year(v.asset_id)
        .and_then(|y| cal.year_start_week(y))
    {
        Some(anchor) if anchor <= first => (anchor.max(0) as u32, anchor),
        _ => (v.first_week, first),
    };

    let vehicle_type = &v.latest.mgmt_cd;
    let unit = &v.latest.equipment_pool;
    let ages: Vec<u32> = (row_start..=end)
        .map(|w| (i64::from(w) - age_origin) as u32)
        .collect();
    let utilization: Vec<f64> = match &options.utilization {
        UtilizationSource::ConstantRate {
            default_rate,
            per_type,
        } => {
            let rate = per_type.get(vehicle_type).copied().unwrap_or(*default_rate);
            ages.iter().map(|&a| f64::from(a) * rate).collect()
        }
        UtilizationSource::Sidecar(table) => table.series(v.asset_id, row_start..=end),
    };

    let mut last_flag: Option<u32> = None;
    (row_start..=end)
        .zip(ages)
        .zip(utilization)
        .map(|((week, operational_weeks), utilization)| {
            let gap = match last_flag {
                Some(l) => week - l - 1,
                None => week - row_start,
            };
            let flagged = v.flagged.contains(&week);
            if flagged {
                last_flag = Some(week);
            }
            PanelRow {
                asset_id: v.asset_id.to_string(),
                vehicle_type: vehicle_type.clone(),
                unit: unit.clone(),
                week,
                operational_weeks,
                weeks_since_last_visit: gap.min(options.gap_cap),
                utilization,
                repair_flag: u8::from(flagged),
            }
        })
        .collect()
}

/// Labor hours summed per (vehicle, week) over all records, the raw series
/// behind the repair-hours-versus-age plots.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LaborHoursPoint {
    pub asset_id: String,
    pub week: u32,
    pub acquisition_year: Option<i32>,
    pub labor_hours: f64,
}

pub fn labor_hours_series(
    records: &[SubWorkOrderRecord],
    calendar: &WeekCalendar,
) -> Vec<LaborHoursPoint> {
    let mut acc: BTreeMap<(&str, u32), f64> = BTreeMap::new();
    for r in records {
        let Ok(week) = u32::try_from(calendar.week_of(r.approval_date)) else {
            continue;
        };
        *acc.entry((r.asset_id.as_str(), week)).or_insert(0.0) += r.labor_hours.unwrap_or(0.0);
    }
    acc.into_iter()
        .map(|((asset_id, week), labor_hours)| LaborHoursPoint {
            asset_id: asset_id.to_string(),
            week,
            acquisition_year: crate::ingest::acquisition_year(asset_id),
            labor_hours,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDateTime;

    pub(crate) fn rec(wo: &str, swo: &str, asset: &str, day: NaiveDate, plan: &str) -> SubWorkOrderRecord {
        SubWorkOrderRecord {
            work_order_id: wo.into(),
            sub_work_order_id: swo.into(),
            approval_date: day,
            closed_date: None,
            asset_id: asset.into(),
            item_desc: "TRUCK".into(),
            mgmt_cd: "TYPE-A".into(),
            equipment_pool: "LRS".into(),
            maint_team: "SHOP".into(),
            estbd_datetime: NaiveDateTime::new(day, chrono::NaiveTime::MIN),
            work_plan_type: plan.into(),
            labor_hours: Some(1.5),
        }
    }

    fn monday() -> NaiveDate {
        NaiveDate::from_ymd_opt(2019, 1, 7).unwrap()
    }

    fn day(week: i64, offset: i64) -> NaiveDate {
        monday() + chrono::Duration::days(7 * week + offset)
    }

    #[test]
    fn calendar_is_monday_aligned() {
        let c = WeekCalendar::containing(NaiveDate::from_ymd_opt(2008, 1, 1).unwrap());
        assert_eq!(c.start(), NaiveDate::from_ymd_opt(2007, 12, 31).unwrap());
        assert_eq!(c.week_of(NaiveDate::from_ymd_opt(2008, 1, 6).unwrap()), 0);
        assert_eq!(c.week_of(NaiveDate::from_ymd_opt(2008, 1, 7).unwrap()), 1);
        assert_eq!(c.week_of(NaiveDate::from_ymd_opt(2007, 12, 30).unwrap()), -1);
    }

    #[test]
    fn flags_and_gaps_over_ten_weeks() {
        // no year in the id, so the series starts at first appearance (week 0)
        let records = vec![
            rec("W0", "01", "V1", day(0, 0), "Prev"),
            rec("W3", "01", "V1", day(3, 2), "Troubleshoot"),
            rec("W7", "01", "V1", day(7, 4), "Major Repair"),
            rec("W9", "01", "V1", day(9, 1), "Prev"),
        ];
        let opts = PanelOptions {
            include_scheduled: false,
            ..Default::default()
        };
        let p = build_panel(&records, &opts).unwrap();
        assert_eq!(p.len(), 10);
        let flags: Vec<u8> = p.rows().iter().map(|r| r.repair_flag).collect();
        assert_eq!(flags, vec![0, 0, 0, 1, 0, 0, 0, 1, 0, 0]);
        let gaps: Vec<u32> = p.rows().iter().map(|r| r.weeks_since_last_visit).collect();
        assert_eq!(gaps, vec![0, 1, 2, 3, 0, 1, 2, 3, 0, 1]);
        assert_eq!(p.rows()[7].weeks_since_last_visit, 3);
        let ages: Vec<u32> = p.rows().iter().map(|r| r.operational_weeks).collect();
        assert_eq!(ages, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn age_from_asset_id() {
        let start = NaiveDate::from_ymd_opt(2008, 1, 1).unwrap();
        let cal = WeekCalendar::containing(start);
        let w = 40u32;
        let seen = cal.monday_of(w) + chrono::Duration::days(2);
        let records = vec![
            rec("X", "01", "UNKNOWN-1", start, "Prev"),
            rec("Y", "01", "AF08I00508", seen, "Troubleshoot"),
        ];
        let p = build_panel(&records, &PanelOptions::default()).unwrap();
        let row = p
            .rows()
            .iter()
            .find(|r| r.asset_id == "AF08I00508" && r.week == w)
            .unwrap();
        assert_eq!(row.operational_weeks, w);
        // series runs from the acquisition anchor, not first appearance
        assert_eq!(p.rows().iter().filter(|r| r.asset_id == "AF08I00508").count(), 41);
    }

    #[test]
    fn id_year_after_first_record_falls_back() {
        let records = vec![
            rec("A", "01", "AF30Z00001", day(0, 0), "Troubleshoot"),
            rec("B", "01", "AF30Z00001", day(4, 0), "Troubleshoot"),
        ];
        let p = build_panel(&records, &PanelOptions::default()).unwrap();
        assert_eq!(p.rows()[0].operational_weeks, 0);
        assert_eq!(p.rows()[4].operational_weeks, 4);
    }

    #[test]
    fn sub_orders_in_one_week_flag_once() {
        let records = vec![
            rec("W1", "01", "V1", day(2, 0), "Troubleshoot"),
            rec("W1", "02", "V1", day(2, 0), "Troubleshoot"),
            rec("W2", "01", "V1", day(2, 3), "Alignment"),
            rec("W0", "01", "V1", day(0, 0), "Prev"),
        ];
        let p = build_panel(&records, &PanelOptions::default()).unwrap();
        assert_eq!(p.len(), 3);
        assert_eq!(p.rows().iter().map(|r| r.repair_flag as u32).sum::<u32>(), 2);
    }

    #[test]
    fn prev_only_records_give_no_unscheduled_weeks() {
        let records = vec![
            rec("A", "01", "V1", day(0, 0), "Prev"),
            rec("B", "01", "V1", day(5, 0), "PREV"),
        ];
        let cal = WeekCalendar::containing(monday());
        assert!(repair_weeks(&records, "V1", false, &cal).is_empty());
        assert_eq!(
            repair_weeks(&records, "V1", true, &cal).into_iter().collect::<Vec<_>>(),
            vec![0, 5]
        );
    }

    #[test]
    fn gap_cap_applies() {
        let records = vec![
            rec("A", "01", "V1", day(0, 0), "Prev"),
            rec("B", "01", "V1", day(20, 0), "Prev"),
        ];
        let opts = PanelOptions {
            include_scheduled: false,
            gap_cap: 5,
            ..Default::default()
        };
        let p = build_panel(&records, &opts).unwrap();
        assert!(p.rows().iter().all(|r| r.weeks_since_last_visit <= 5));
        assert_eq!(p.rows()[20].weeks_since_last_visit, 5);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            build_panel(&[], &PanelOptions::default()),
            Err(PanelError::EmptyDataset)
        ));
        let records = vec![rec("A", "01", "V1", day(0, 0), "Prev")];
        let opts = PanelOptions {
            start: Some(day(3, 0)),
            ..Default::default()
        };
        assert!(matches!(build_panel(&records, &opts), Err(PanelError::NonPositiveSpan)));
    }

    #[test]
    fn sidecar_utilization_is_running_max() {
        let mut t = UtilizationTable::default();
        t.insert("V1", 1, 10.0);
        t.insert("V1", 3, 8.0);
        t.insert("V1", 4, 25.0);
        assert_eq!(t.series("V1", 0..=5), vec![0.0, 10.0, 10.0, 10.0, 25.0, 25.0]);
        assert_eq!(t.series("V2", 0..=1), vec![0.0, 0.0]);
    }

    #[test]
    fn constant_rate_utilization() {
        let records = vec![
            rec("A", "01", "V1", day(0, 0), "Prev"),
            rec("B", "01", "V1", day(3, 0), "Prev"),
        ];
        let opts = PanelOptions {
            utilization: UtilizationSource::ConstantRate {
                default_rate: 2.0,
                per_type: BTreeMap::from([("TYPE-A".to_string(), 50.0)]),
            },
            ..Default::default()
        };
        let p = build_panel(&records, &opts).unwrap();
        let u: Vec<f64> = p.rows().iter().map(|r| r.utilization).collect();
        assert_eq!(u, vec![0.0, 50.0, 100.0, 150.0]);
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let records = vec![
            rec("A", "01", "V2", day(0, 0), "Prev"),
            rec("B", "01", "V1", day(3, 0), "Troubleshoot"),
        ];
        let p = build_panel(&records, &PanelOptions::default()).unwrap();
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(&PANEL_COLUMNS.join(",")));
        assert_eq!(Panel::read_csv(buf.as_slice()).unwrap(), p);

        let dup = format!("{}\nV,t,u,1,1,0,0,0\nV,t,u,1,1,0,0,1\n", PANEL_COLUMNS.join(","));
        assert!(matches!(
            Panel::read_csv(dup.as_bytes()),
            Err(PanelError::DuplicateRow { .. })
        ));
        let flag = format!("{}\nV,t,u,1,1,0,0,2\n", PANEL_COLUMNS.join(","));
        assert!(matches!(
            Panel::read_csv(flag.as_bytes()),
            Err(PanelError::BadRepairFlag { .. })
        ));
    }

    #[test]
    fn labor_hours_are_summed_per_week() {
        let records = vec![
            rec("A", "01", "AF10B00001", day(0, 0), "Prev"),
            rec("A", "02", "AF10B00001", day(0, 1), "Troubleshoot"),
            rec("B", "01", "AF10B00001", day(2, 0), "Troubleshoot"),
        ];
        let s = labor_hours_series(&records, &WeekCalendar::containing(monday()));
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].labor_hours, 3.0);
        assert_eq!(s[1].week, 2);
        assert_eq!(s[0].acquisition_year, Some(2010));
    }
}
