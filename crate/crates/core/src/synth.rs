//! Seeded synthetic fleets drawn from a known discrete-time logistic hazard.
//!
//! Each vehicle exists from week 0. In every week it breaks down with
//! probability `sigmoid(z)` with
//! `z = beta0 + ln(multiplier) + beta_age*age + beta_gap*gap + beta_util*util`.
//! Age, gap and utilization are defined exactly as
//! the panel builder derives them from the emitted records (unscheduled work
//! only), so the generating covariates can be recovered from the CSV.

use std::io::Write;

use chrono::{Datelike, Duration, NaiveDate, NaiveTime};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{write_subworkorders, IngestError, SubWorkOrderRecord};
use crate::models::sigmoid;
use crate::panel::{PanelOptions, UtilizationSource, UtilizationTable, WeekCalendar};
use crate::{par, seed};

pub const PREV_CODE: &str = "PREV";
const UNSCHEDULED_CODES: [&str; 6] = ["REPAIR", "TIRE", "BATT", "ACCIDENT", "ELEC", "RECALL"];
const ITEM_DESCS: [&str; 5] = [
    "ENGINE DIAGNOSTIC",
    "BRAKE SERVICE",
    "TIRE REPLACEMENT",
    "ELECTRICAL FAULT",
    "HYDRAULIC LEAK",
];

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid fleet configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTypeSpec {
    pub name: String,
    pub hazard_multiplier: f64,
    /// Utilization units accrued per week of age.
    pub weekly_utilization_rate: f64,
}

impl VehicleTypeSpec {
    pub fn new(name: &str, hazard_multiplier: f64, weekly_utilization_rate: f64) -> Self {
        Self {
            name: name.to_string(),
            hazard_multiplier,
            weekly_utilization_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetConfig {
    pub n_vehicles: usize,
    /// Assigned round-robin, so vehicle `i` gets type `i % len`.
    pub vehicle_types: Vec<VehicleTypeSpec>,
    pub units: Vec<String>,
    pub n_weeks: u32,
    pub beta0: f64,
    pub beta_age: f64,
    pub beta_gap: f64,
    pub beta_util: f64,
    pub seed: u64,
    /// Monday of week 0.
    pub start_date: NaiveDate,
    /// Inclusive range of acquisition years; must not be after the start year.
    pub acquisition_years: (i32, i32),
    pub gap_cap: u32,
    pub prev_interval: u32,
    /// Chance that a breakdown produces a second sub-work order.
    pub second_sub_order_prob: f64,
}

impl Default for FleetConfig {
    fn default() -> Self {
        Self {
            n_vehicles: 200,
            vehicle_types: vec![
                VehicleTypeSpec::new("TRUCK CARGO", 1.0, 150.0),
                VehicleTypeSpec::new("SEDAN", 0.6, 250.0),
                VehicleTypeSpec::new("FORKLIFT", 1.8, 20.0),
                VehicleTypeSpec::new("TOW TRACTOR", 1.3, 40.0),
            ],
            units: ["LRS-VM", "CES", "SFS", "AMXS"].map(String::from).to_vec(),
            n_weeks: 260,
            beta0: -5.0,
            beta_age: 0.003,
            beta_gap: 0.06,
            beta_util: 0.0,
            seed: 20_190_401,
            start_date: NaiveDate::from_ymd_opt(2016, 1, 4).expect("valid date"),
            acquisition_years: (2006, 2015),
            gap_cap: crate::panel::DEFAULT_GAP_CAP,
            prev_interval: 26,
            second_sub_order_prob: 0.15,
        }
    }
}

impl FleetConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_vehicles == 0 {
            return bad("n_vehicles must be at least 1".into());
        }
        if self.n_vehicles > 99_999 {
            return bad("n_vehicles must fit the five-digit asset serial".into());
        }
        if self.n_weeks < 2 {
            return bad("n_weeks must be at least 2".into());
        }
        if self.vehicle_types.is_empty() || self.vehicle_types.len() > 26 {
            return bad("between 1 and 26 vehicle types required".into());
        }
        for t in &self.vehicle_types {
            if !(t.hazard_multiplier > 0.0 && t.hazard_multiplier.is_finite()) {
                return bad(format!("type `{}` hazard multiplier must be positive", t.name));
            }
            if !(t.weekly_utilization_rate >= 0.0 && t.weekly_utilization_rate.is_finite()) {
                return bad(format!("type `{}` utilization rate must be nonnegative", t.name));
            }
            if t.name.trim().is_empty() {
                return bad("vehicle type names must be non-empty".into());
            }
        }
        if self.units.is_empty() {
            return bad("at least one unit required".into());
        }
        let betas = [self.beta0, self.beta_age, self.beta_gap, self.beta_util];
        if betas.iter().any(|b| !b.is_finite()) {
            return bad("betas must be finite".into());
        }
        let (lo, hi) = self.acquisition_years;
        if lo > hi || lo < 2000 || hi > self.start_date.year() {
            return bad(format!(
                "acquisition years {lo}..={hi} must lie in 2000..={}",
                self.start_date.year()
            ));
        }
        if self.start_date.weekday() != chrono::Weekday::Mon {
            return bad(format!("start date {} is not a Monday", self.start_date));
        }
        if self.prev_interval == 0 {
            return bad("prev_interval must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.second_sub_order_prob) {
            return bad("second_sub_order_prob must lie in [0, 1]".into());
        }
        Ok(())
    }

    /// Log-odds of a breakdown for one vehicle-week.
    pub fn log_odds(&self, type_idx: usize, age: u32, gap: u32, util: f64) -> f64 {
        self.beta0
            + self.vehicle_types[type_idx].hazard_multiplier.ln()
            + self.beta_age * f64::from(age)
            + self.beta_gap * f64::from(gap)
            + self.beta_util * util
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleTruth {
    pub asset_id: String,
    pub vehicle_type: String,
    pub unit: String,
    pub acquisition_year: i32,
    /// Age in weeks at week 0.
    pub initial_age: u32,
    pub utilization_rate: f64,
    pub breakdown_weeks: Vec<u32>,
    /// Breakdown probability used in each week 0..n_weeks.
    pub hazard: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: FleetConfig,
    pub vehicles: Vec<VehicleTruth>,
}

impl GroundTruth {
    /// Panel options that reproduce the generating covariates: unscheduled
    /// work only, calendar anchored at the start date, the full week range
    /// and the sidecar utilization.
    pub fn panel_options(&self, utilization: UtilizationTable) -> PanelOptions {
        PanelOptions {
            include_scheduled: false,
            start: Some(self.config.start_date),
            end_week: Some(self.config.n_weeks - 1),
            gap_cap: self.config.gap_cap,
            utilization: UtilizationSource::Sidecar(utilization),
        }
    }

    pub fn total_breakdowns(&self) -> usize {
        self.vehicles.iter().map(|v| v.breakdown_weeks.len()).sum()
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }
}

/// A generated dataset in memory.
#[derive(Debug, Clone)]
pub struct SynthFleet {
    pub records: Vec<SubWorkOrderRecord>,
    pub utilization: UtilizationTable,
    /// `(asset_id, week, cumulative_units)` in emission order.
    pub utilization_rows: Vec<(String, u32, f64)>,
    pub truth: GroundTruth,
}

impl SynthFleet {
    pub fn write_records<W: Write>(&self, sink: W) -> Result<(), SynthError> {
        Ok(write_subworkorders(&self.records, sink, b',')?)
    }

    pub fn write_utilization<W: Write>(&self, sink: W) -> Result<(), SynthError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["asset_id", "week", "cumulative_units"])?;
        for (id, week, units) in &self.utilization_rows {
            w.write_record([id.clone(), week.to_string(), units.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn records_csv(&self) -> Result<Vec<u8>, SynthError> {
        let mut buf = Vec::new();
        self.write_records(&mut buf)?;
        Ok(buf)
    }

    pub fn utilization_csv(&self) -> Result<Vec<u8>, SynthError> {
        let mut buf = Vec::new();
        self.write_utilization(&mut buf)?;
        Ok(buf)
    }
}

struct VehicleDraw {
    truth: VehicleTruth,
    records: Vec<SubWorkOrderRecord>,
    utilization: Vec<f64>,
}

pub fn generate_fleet(config: &FleetConfig) -> Result<SynthFleet, SynthError> {
    config.validate()?;
    let cal = WeekCalendar::containing(config.start_date);
    let stream = seed::derive(config.seed, seed::STREAM_SYNTH);
    let draws = par::map_range(config.n_vehicles, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_indexed(stream, i as u64));
        simulate_vehicle(config, &cal, i, &mut rng)
    });

    let mut records = Vec::new();
    let mut utilization = UtilizationTable::default();
    let mut utilization_rows = Vec::with_capacity(config.n_vehicles * config.n_weeks as usize);
    let mut vehicles = Vec::with_capacity(draws.len());
    for d in draws {
        for (week, &u) in d.utilization.iter().enumerate() {
            utilization.insert(&d.truth.asset_id, week as u32, u);
            utilization_rows.push((d.truth.asset_id.clone(), week as u32, u));
        }
        records.extend(d.records);
        vehicles.push(d.truth);
    }
    Ok(SynthFleet {
        records,
        utilization,
        utilization_rows,
        truth: GroundTruth {
            config: config.clone(),
            vehicles,
        },
    })
}

fn simulate_vehicle(config: &FleetConfig, cal: &WeekCalendar, idx: usize, rng: &mut ChaCha8Rng) -> VehicleDraw {
    let type_idx = idx % config.vehicle_types.len();
    let vtype = &config.vehicle_types[type_idx];
    let unit = config.units[rng.gen_range(0..config.units.len())].clone();
    let (lo, hi) = config.acquisition_years;
    let year = rng.gen_range(lo..=hi);
    let anchor = cal.year_start_week(year).expect("validated year");
    // validation keeps the anchor at or before week 0
    let initial_age = (-anchor) as u32;
    let letter = char::from(b'A' + type_idx as u8);
    let asset_id = format!("AF{:02}{letter}{idx:05}", year % 100);
    let team = format!("{} MAINT", unit);

    let mut hazard = Vec::with_capacity(config.n_weeks as usize);
    let mut utilization = Vec::with_capacity(config.n_weeks as usize);
    let mut breakdown_weeks = Vec::new();
    let mut records = Vec::new();
    let mut wo_seq = 0u32;
    let mut last_breakdown: Option<u32> = None;

    let mut emit = |rng: &mut ChaCha8Rng, week: u32, code: &str, subs: u32| {
        wo_seq += 1;
        let day = cal.monday_of(week) + Duration::days(rng.gen_range(0..5));
        let closed = day + Duration::days(rng.gen_range(0..10));
        let hour = rng.gen_range(6..18);
        let estbd = (day - Duration::days(rng.gen_range(0..3)))
            .and_time(NaiveTime::from_hms_opt(hour, rng.gen_range(0..60), 0).expect("valid time"));
        let desc = if code == PREV_CODE {
            "PREVENTIVE MAINTENANCE INSPECTION"
        } else {
            ITEM_DESCS[rng.gen_range(0..ITEM_DESCS.len())]
        };
        for sub in 1..=subs {
            records.push(SubWorkOrderRecord {
                work_order_id: format!("WO{idx:05}{wo_seq:04}"),
                sub_work_order_id: format!("{sub:02}"),
                approval_date: day,
                closed_date: Some(closed),
                asset_id: asset_id.clone(),
                item_desc: desc.to_string(),
                mgmt_cd: vtype.name.clone(),
                equipment_pool: unit.clone(),
                maint_team: team.clone(),
                estbd_datetime: estbd,
                work_plan_type: code.to_string(),
                labor_hours: Some(f64::from(rng.gen_range(1u32..=48)) * 0.25),
            });
        }
    };

    for week in 0..config.n_weeks {
        let age = initial_age + week;
        let gap = match last_breakdown {
            Some(l) => week - l - 1,
            None => week,
        }
        .min(config.gap_cap);
        let util = vtype.weekly_utilization_rate * f64::from(age);
        let p = sigmoid(config.log_odds(type_idx, age, gap, util));
        hazard.push(p);
        utilization.push(util);

        if week % config.prev_interval == 0 {
            emit(rng, week, PREV_CODE, 1);
        }
        if rng.gen::<f64>() < p {
            breakdown_weeks.push(week);
            last_breakdown = Some(week);
            let code = UNSCHEDULED_CODES[rng.gen_range(0..UNSCHEDULED_CODES.len())];
            let subs = if rng.gen::<f64>() < config.second_sub_order_prob { 2 } else { 1 };
            emit(rng, week, code, subs);
        }
    }

    VehicleDraw {
        truth: VehicleTruth {
            asset_id: asset_id.clone(),
            vehicle_type: vtype.name.clone(),
            unit: unit.clone(),
            acquisition_year: year,
            initial_age,
            utilization_rate: vtype.weekly_utilization_rate,
            breakdown_weeks,
            hazard,
        },
        records,
        utilization,
    }
}
