//! Proactive-repair rollout and mission-essential-level risk.
//!
//! Each test week one active vehicle is repaired ahead of time, either the
//! highest-scoring one or a uniformly random one. The repair resets that
//! vehicle's weeks-since-last-visit covariate for later weeks, which feeds
//! back into later scores. For every pick we record how long ago the vehicle
//! was last actually serviced and how long until it actually was again.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::panel::{Panel, PanelRow};
use crate::pipeline::{PipelineError, TrainedModel};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("test panel has no weeks to simulate")]
    EmptyTestRange,
    #[error("{got} probabilities for {assigned} assigned vehicles")]
    LengthMismatch { assigned: usize, got: usize },
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("MEL {mel} exceeds assigned count {assigned}")]
    InvalidMel { mel: usize, assigned: usize },
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum Policy {
    HighestRisk,
    RandomUniform { seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntry {
    pub week: u32,
    pub chosen_asset: String,
    pub score: f64,
    /// Highest score among the other active vehicles, if any.
    pub runner_up_score: Option<f64>,
    pub active_vehicles: usize,
    pub weeks_since_last_actual_service: u32,
    /// Weeks from this pick to the vehicle's next actual flagged week
    /// (0 when it is flagged this very week); `None` if censored at panel end.
    pub weeks_until_next_actual_service: Option<u32>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyTrace {
    pub entries: Vec<PolicyEntry>,
}

impl PolicyTrace {
    /// Mean weeks until the next actual service over uncensored picks.
    pub fn mean_weeks_until_next(&self) -> Option<f64> {
        let gaps: Vec<f64> = self
            .entries
            .iter()
            .filter_map(|e| e.weeks_until_next_actual_service.map(f64::from))
            .collect();
        (!gaps.is_empty()).then(|| gaps.iter().sum::<f64>() / gaps.len() as f64)
    }

    pub fn censored(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.weeks_until_next_actual_service.is_none())
            .count()
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), PolicyError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "week",
            "chosen_asset",
            "score",
            "runner_up_score",
            "active_vehicles",
            "weeks_since_last_actual_service",
            "weeks_until_next_actual_service",
        ])?;
        let opt = |v: Option<String>| v.unwrap_or_default();
        for e in &self.entries {
            w.write_record([
                e.week.to_string(),
                e.chosen_asset.clone(),
                e.score.to_string(),
                opt(e.runner_up_score.map(|s| s.to_string())),
                e.active_vehicles.to_string(),
                e.weeks_since_last_actual_service.to_string(),
                opt(e.weeks_until_next_actual_service.map(|s| s.to_string())),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Run the weekly rollout over `test_panel` in week order.
pub fn simulate_policy(
    model: &TrainedModel,
    test_panel: &Panel,
    policy: &Policy,
) -> Result<PolicyTrace, PolicyError> {
    let mut by_week: BTreeMap<u32, Vec<&PanelRow>> = BTreeMap::new();
    let mut flagged: HashMap<&str, Vec<u32>> = HashMap::new();
    for r in test_panel.rows() {
        by_week.entry(r.week).or_default().push(r);
        if r.repair_flag == 1 {
            // rows are sorted by (asset, week) so these stay ascending
            flagged.entry(&r.asset_id).or_default().push(r.week);
        }
    }
    if by_week.is_empty() {
        return Err(PolicyError::EmptyTestRange);
    }

    let mut rng = match policy {
        Policy::RandomUniform { seed } => Some(ChaCha8Rng::seed_from_u64(*seed)),
        Policy::HighestRisk => None,
    };
    let mut proactive: HashMap<&str, u32> = HashMap::new();
    let mut entries = Vec::with_capacity(by_week.len());

    for (&week, active) in &by_week {
        // features as they would look had earlier proactive repairs happened
        let rows: Vec<PanelRow> = active
            .iter()
            .map(|r| {
                let mut r = (*r).clone();
                if let Some(&p) = proactive.get(r.asset_id.as_str()) {
                    r.weeks_since_last_visit = r.weeks_since_last_visit.min(week - p - 1);
                }
                r
            })
            .collect();
        let scores = model.predict_rows(&rows)?;

        let pick = match rng.as_mut() {
            None => {
                // rows are in asset-id order, so strict > keeps the smallest id on ties
                let mut best = 0;
                for (i, s) in scores.iter().enumerate().skip(1) {
                    if *s > scores[best] {
                        best = i;
                    }
                }
                best
            }
            Some(rng) => rng.gen_range(0..rows.len()),
        };
        let chosen = active[pick];
        let runner_up_score = scores
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != pick)
            .map(|(_, s)| *s)
            .reduce(f64::max);
        let next = flagged.get(chosen.asset_id.as_str()).and_then(|weeks| {
            let i = weeks.partition_point(|&w| w < week);
            weeks.get(i).map(|&w| w - week)
        });
        entries.push(PolicyEntry {
            week,
            chosen_asset: chosen.asset_id.clone(),
            score: scores[pick],
            runner_up_score,
            active_vehicles: rows.len(),
            weeks_since_last_actual_service: chosen.weeks_since_last_visit,
            weeks_until_next_actual_service: next,
        });
        proactive.insert(&chosen.asset_id, week);
    }
    Ok(PolicyTrace { entries })
}

/// Integer-binned gap counts; index `k` counts entries with gap `k`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TraceHistograms {
    pub weeks_since_last: Vec<u64>,
    pub weeks_until_next: Vec<u64>,
    pub censored: u64,
}

pub fn trace_histograms(trace: &PolicyTrace) -> TraceHistograms {
    let mut h = TraceHistograms::default();
    let bump = |v: &mut Vec<u64>, k: u32| {
        let k = k as usize;
        if v.len() <= k {
            v.resize(k + 1, 0);
        }
        v[k] += 1;
    };
    for e in &trace.entries {
        bump(&mut h.weeks_since_last, e.weeks_since_last_actual_service);
        match e.weeks_until_next_actual_service {
            Some(g) => bump(&mut h.weeks_until_next, g),
            None => h.censored += 1,
        }
    }
    h
}

impl TraceHistograms {
    /// `weeks,since_last,until_next` rows plus a trailing `censored` row.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<(), PolicyError> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["weeks", "since_last", "until_next"])?;
        let n = self.weeks_since_last.len().max(self.weeks_until_next.len());
        for k in 0..n {
            let get = |v: &Vec<u64>| v.get(k).copied().unwrap_or(0).to_string();
            w.write_record([k.to_string(), get(&self.weeks_since_last), get(&self.weeks_until_next)])?;
        }
        w.write_record(["censored".to_string(), String::new(), self.censored.to_string()])?;
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Mission-essential level for one vehicle type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MelSpec {
    pub vehicle_type: String,
    pub mel: usize,
    pub assigned: usize,
}

/// Probability that fewer than `spec.mel` of the assigned vehicles stay
/// operational, each failing independently with its own probability: the
/// Poisson-binomial upper tail `P(failures > assigned - mel)`.
pub fn mel_risk(probs: &[f64], spec: &MelSpec) -> Result<f64, PolicyError> {
    if probs.len() != spec.assigned {
        return Err(PolicyError::LengthMismatch {
            assigned: spec.assigned,
            got: probs.len(),
        });
    }
    if spec.mel > spec.assigned {
        return Err(PolicyError::InvalidMel {
            mel: spec.mel,
            assigned: spec.assigned,
        });
    }
    if let Some(&bad) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(PolicyError::InvalidProbability(bad));
    }
    // dist[k] = P(exactly k failures among the vehicles seen so far)
    let mut dist = vec![0.0; probs.len() + 1];
    dist[0] = 1.0;
    for (seen, &p) in probs.iter().enumerate() {
        for k in (1..=seen + 1).rev() {
            dist[k] = dist[k] * (1.0 - p) + dist[k - 1] * p;
        }
        dist[0] *= 1.0 - p;
    }
    let spare = spec.assigned - spec.mel;
    Ok(dist[spare + 1..].iter().rev().sum())
}
