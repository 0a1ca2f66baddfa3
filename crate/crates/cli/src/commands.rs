use std::collections::BTreeMap;

use anyhow::{Context, Result};
use fleetrisk::eval::{self, write_ablation_csv};
use fleetrisk::features::ablation_subsets;
use fleetrisk::ingest::RowError;
use fleetrisk::panel::{self, labor_hours_series, UtilizationSource, UtilizationTable};
use fleetrisk::policy::{trace_histograms, PolicyTrace};
use fleetrisk::{
    build_panel, generate_fleet, mel_risk, parse_subworkorders, separation_ratio, simulate_policy, split,
    Panel, PanelRow, SubWorkOrderRecord, TrainedModel,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{mel_spec, RunConfig};
use crate::manifest::Artifacts;
use crate::{Command, UsageError};

pub fn run(command: Command, cfg: &RunConfig) -> Result<()> {
    let mut arts = Artifacts::new(&cfg.out_dir)?;
    match command {
        Command::Synth => synth(cfg, &mut arts)?,
        Command::Ingest => ingest(cfg, &mut arts)?,
        Command::Panel => {
            let panel = load_panel(cfg, &mut arts)?;
            write_panel(&panel, &mut arts)?;
        }
        Command::Train => {
            let panel = load_panel(cfg, &mut arts)?;
            train(cfg, &panel, &mut arts)?;
        }
        Command::Eval => {
            let model = load_model(cfg, &mut arts)?;
            let panel = load_panel(cfg, &mut arts)?;
            evaluate(cfg, &model, &panel, &mut arts)?;
        }
        Command::Ablate => {
            let panel = load_panel(cfg, &mut arts)?;
            ablate(cfg, &panel, &mut arts)?;
        }
        Command::Simulate => {
            let model = load_model(cfg, &mut arts)?;
            let panel = load_panel(cfg, &mut arts)?;
            simulate(cfg, &model, &panel, &mut arts)?;
        }
        Command::Mel => {
            let specs = cfg.mel_specs()?;
            if specs.is_empty() {
                return Err(UsageError::new("--mel", "no mission-essential levels given").into());
            }
            let model = load_model(cfg, &mut arts)?;
            let panel = load_panel(cfg, &mut arts)?;
            mel(cfg, &model, &panel, &mut arts)?;
        }
        Command::Tune => {
            let panel = load_panel(cfg, &mut arts)?;
            tune(cfg, &panel, &mut arts)?;
        }
        Command::Report => report(cfg, &mut arts)?,
    }
    arts.finish(command, cfg)
}

fn csv_bytes<E>(f: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> Result<Vec<u8>>
where
    E: std::error::Error + Send + Sync + 'static,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn synth(cfg: &RunConfig, arts: &mut Artifacts) -> Result<()> {
    let fleet = generate_fleet(&cfg.fleet_config()).map_err(|e| UsageError::new("synth", e.to_string()))?;
    arts.write("subworkorders.csv", &fleet.records_csv()?)?;
    arts.write("utilization.csv", &fleet.utilization_csv()?)?;
    let mut truth = fleet.truth.to_json()?;
    truth.push('\n');
    arts.write("ground_truth.json", truth.as_bytes())?;
    eprintln!(
        "{} vehicles, {} weeks, {} sub-work orders, {} breakdowns",
        fleet.truth.vehicles.len(),
        cfg.fleet_config().n_weeks,
        fleet.records.len(),
        fleet.truth.total_breakdowns()
    );
    Ok(())
}

struct Loaded {
    records: Vec<SubWorkOrderRecord>,
    errors: Vec<RowError>,
}

fn load_records(cfg: &RunConfig, arts: &mut Artifacts) -> Result<Loaded> {
    let input = cfg.input_path()?;
    let aliases = match cfg.aliases_path()? {
        Some(p) => Some(String::from_utf8(arts.read_input(&p)?).context("alias file is not UTF-8")?),
        None => None,
    };
    let schema = cfg.schema(aliases.as_deref())?;
    let bytes = arts.read_input(&input)?;
    let out = parse_subworkorders(bytes.as_slice(), &schema).with_context(|| format!("parsing {}", input.display()))?;
    for e in out.errors.iter().take(10) {
        eprintln!("warning: {}: {e}", input.display());
    }
    if out.errors.len() > 10 {
        eprintln!("warning: {} more rejected rows", out.errors.len() - 10);
    }
    if out.records.is_empty() {
        anyhow::bail!("{} holds no valid sub-work orders", input.display());
    }
    Ok(Loaded {
        records: out.records,
        errors: out.errors,
    })
}

fn ingest(cfg: &RunConfig, arts: &mut Artifacts) -> Result<()> {
    let loaded = load_records(cfg, arts)?;
    let recs = &loaded.records;
    let vehicles: std::collections::BTreeSet<&str> = recs.iter().map(|r| r.asset_id.as_str()).collect();
    let errors: Vec<_> = loaded
        .errors
        .iter()
        .map(|e| json!({ "line": e.line, "field": e.field, "reason": e.reason.to_string() }))
        .collect();
    let report = json!({
        "records": recs.len(),
        "rejected": loaded.errors.len(),
        "vehicles": vehicles.len(),
        "first_approval": recs.iter().map(|r| r.approval_date).min().map(|d| d.to_string()),
        "last_approval": recs.iter().map(|r| r.approval_date).max().map(|d| d.to_string()),
        "errors": errors,
    });
    arts.write_json("ingest_report.json", &report)
}

fn utilization_source(cfg: &RunConfig, arts: &mut Artifacts) -> Result<UtilizationSource> {
    Ok(match cfg.utilization_path()? {
        Some(p) => {
            let bytes = arts.read_input(&p)?;
            let table = UtilizationTable::read_csv(bytes.as_slice()).with_context(|| format!("reading {}", p.display()))?;
            UtilizationSource::Sidecar(table)
        }
        None => cfg.constant_rate(),
    })
}

fn panel_from_records(cfg: &RunConfig, records: &[SubWorkOrderRecord], arts: &mut Artifacts) -> Result<Panel> {
    let opts = cfg.panel_options(utilization_source(cfg, arts)?)?;
    let panel = build_panel(records, &opts).context("building the weekly panel")?;
    let positives = panel.labels().iter().filter(|&&y| y == 1).count();
    eprintln!(
        "panel: {} rows, {} vehicles, {} weeks, {} flagged",
        panel.len(),
        panel.vocab().asset_ids.len(),
        panel.weeks().len(),
        positives
    );
    Ok(panel)
}

fn load_panel(cfg: &RunConfig, arts: &mut Artifacts) -> Result<Panel> {
    if let Some(p) = cfg.panel_path()? {
        let bytes = arts.read_input(&p)?;
        return Panel::read_csv(bytes.as_slice()).with_context(|| format!("reading {}", p.display()));
    }
    let loaded = load_records(cfg, arts)?;
    panel_from_records(cfg, &loaded.records, arts)
}

fn write_panel(panel: &Panel, arts: &mut Artifacts) -> Result<()> {
    let bytes = csv_bytes(|b| panel.write_csv(b))?;
    arts.write("panel.csv", &bytes)
}

fn load_model(cfg: &RunConfig, arts: &mut Artifacts) -> Result<TrainedModel> {
    let path = cfg.model_path();
    if !path.exists() {
        return Err(UsageError::new(
            "--model-file",
            format!("no trained model at {}; run `fleetrisk train` first", path.display()),
        )
        .into());
    }
    let bytes = arts.read_input(&path)?;
    let text = String::from_utf8(bytes).context("model file is not UTF-8")?;
    TrainedModel::from_json(&text).with_context(|| format!("loading {}", path.display()))
}

fn train(cfg: &RunConfig, panel: &Panel, arts: &mut Artifacts) -> Result<TrainedModel> {
    let spec = cfg.feature_spec()?;
    let config = cfg.model_config()?;
    let (train, _) = split(panel, &cfg.split_spec()?).context("splitting the panel")?;
    let model = TrainedModel::fit(&train, spec, &config).context("fitting the model")?;
    let mut text = model.to_json()?;
    text.push('\n');
    arts.write_at(&cfg.model_path(), text.as_bytes())?;
    eprintln!("trained {} on {} rows ({})", config.kind().as_str(), train.len(), spec.label());
    Ok(model)
}

fn evaluate(cfg: &RunConfig, model: &TrainedModel, panel: &Panel, arts: &mut Artifacts) -> Result<()> {
    let split_spec = cfg.split_spec()?;
    let (_, test) = split(panel, &split_spec).context("splitting the panel")?;
    let preds = model.predict_panel(&test).context("scoring the test split")?;
    let report = separation_ratio(&preds, &test.labels()).context("computing the separation ratio")?;
    eprintln!(
        "separation ratio {:.4} (mean {:.4} on repairs, {:.4} otherwise)",
        report.ratio, report.mean_pred_true, report.mean_pred_false
    );
    arts.write_json(
        "eval_report.json",
        &json!({
            "model": model.config().kind().as_str(),
            "features": model.spec().label(),
            "split": split_spec,
            "report": report,
        }),
    )?;
    for (outcome, name) in [(true, "histogram_true.csv"), (false, "histogram_false.csv")] {
        let bytes = csv_bytes(|b| report.write_histogram_csv(outcome, b))?;
        arts.write(name, &bytes)?;
    }
    Ok(())
}

fn ablate(cfg: &RunConfig, panel: &Panel, arts: &mut Artifacts) -> Result<()> {
    let rows = eval::ablation(panel, &ablation_subsets(), &cfg.model_config()?, &cfg.split_spec()?)
        .context("running the feature ablation")?;
    for r in &rows {
        eprintln!("{:>40}  {:.4}", r.label, r.ratio);
    }
    let bytes = csv_bytes(|b| write_ablation_csv(&rows, b))?;
    arts.write("ablation.csv", &bytes)
}

#[derive(Serialize)]
struct PolicySummary {
    policy: &'static str,
    picks: usize,
    mean_weeks_until_next: Option<f64>,
    censored: usize,
}

fn simulate(cfg: &RunConfig, model: &TrainedModel, panel: &Panel, arts: &mut Artifacts) -> Result<()> {
    let (_, test) = split(panel, &cfg.split_spec()?).context("splitting the panel")?;
    let mut summaries = Vec::new();
    for (i, (name, policy)) in cfg.policies()?.into_iter().enumerate() {
        let trace: PolicyTrace = simulate_policy(model, &test, &policy).with_context(|| format!("{name} rollout"))?;
        if i == 0 {
            arts.write("policy_trace.csv", &csv_bytes(|b| trace.write_csv(b))?)?;
        }
        let hist = trace_histograms(&trace);
        arts.write(&format!("policy_hist_{name}.csv"), &csv_bytes(|b| hist.write_csv(b))?)?;
        let summary = PolicySummary {
            policy: name,
            picks: trace.entries.len(),
            mean_weeks_until_next: trace.mean_weeks_until_next(),
            censored: trace.censored(),
        };
        eprintln!(
            "{name}: mean weeks until next service {} ({} censored)",
            summary.mean_weeks_until_next.map_or("n/a".into(), |m| format!("{m:.3}")),
            summary.censored
        );
        summaries.push(summary);
    }
    arts.write_json("policy_summary.json", &summaries)
}

/// Each vehicle's last panel row advanced one week: one week older, gap
/// reset if that week was flagged, utilization carried forward.
fn next_week_row(last: &PanelRow, gap_cap: u32) -> PanelRow {
    let mut row = last.clone();
    row.week += 1;
    row.operational_weeks += 1;
    row.weeks_since_last_visit = if last.repair_flag == 1 {
        0
    } else {
        (last.weeks_since_last_visit + 1).min(gap_cap)
    };
    row.repair_flag = 0;
    row
}

fn mel(cfg: &RunConfig, model: &TrainedModel, panel: &Panel, arts: &mut Artifacts) -> Result<()> {
    let mut by_type: BTreeMap<&str, Vec<PanelRow>> = BTreeMap::new();
    for rows in panel.vehicles() {
        let last = rows.last().expect("vehicle slices are non-empty");
        by_type
            .entry(last.vehicle_type.as_str())
            .or_default()
            .push(next_week_row(last, cfg.gap_cap));
    }
    let mut out = Vec::new();
    for (ty, level, assigned) in cfg.mel_specs()? {
        let rows = by_type.get(ty.as_str()).map_or(&[][..], Vec::as_slice);
        if rows.is_empty() {
            return Err(UsageError::new("--mel", format!("no vehicles of type `{ty}` in the panel")).into());
        }
        let probs = model.predict_rows(rows).context("scoring next-week rows")?;
        let spec = mel_spec(&ty, level, assigned.unwrap_or(rows.len()));
        let risk = mel_risk(&probs, &spec).with_context(|| format!("MEL risk for `{ty}`"))?;
        eprintln!("{ty}: P(fewer than {level} of {} available) = {risk:.6}", spec.assigned);
        let vehicles: Vec<_> = rows
            .iter()
            .zip(&probs)
            .map(|(r, p)| json!({ "asset_id": r.asset_id, "probability": p }))
            .collect();
        out.push(json!({
            "vehicle_type": ty,
            "mel": level,
            "assigned": spec.assigned,
            "week": rows[0].week,
            "risk": risk,
            "vehicles": vehicles,
        }));
    }
    arts.write_json("mel_risk.json", &out)
}

fn tune(cfg: &RunConfig, panel: &Panel, arts: &mut Artifacts) -> Result<()> {
    let grid = cfg.tune_grid();
    let (results, best) = eval::tune(panel, cfg.feature_spec()?, &cfg.model_config()?, &grid, &cfg.split_spec()?)
        .context("grid search")?;
    for r in &results {
        eprintln!("{:.4}  {}", r.ratio, serde_json::to_string(&r.config)?);
    }
    arts.write_json("tune.json", &json!({ "grid": grid, "results": results, "best": best }))
}

fn report(cfg: &RunConfig, arts: &mut Artifacts) -> Result<()> {
    let specs = cfg.mel_specs()?;
    let panel = if cfg.panel_path()?.is_some() {
        eprintln!("note: labor-hours series needs the raw export; skipped for a prebuilt panel");
        load_panel(cfg, arts)?
    } else {
        let loaded = load_records(cfg, arts)?;
        let panel = panel_from_records(cfg, &loaded.records, arts)?;
        let opts = cfg.panel_options(cfg.constant_rate())?;
        let calendar = panel::calendar_for(&loaded.records, &opts)?;
        let series = labor_hours_series(&loaded.records, &calendar);
        let bytes = csv_bytes(|b| -> Result<(), csv::Error> {
            let mut w = csv::Writer::from_writer(b);
            for p in &series {
                w.serialize(p)?;
            }
            w.flush()?;
            Ok(())
        })?;
        arts.write("labor_hours.csv", &bytes)?;
        panel
    };
    write_panel(&panel, arts)?;
    let model = train(cfg, &panel, arts)?;
    evaluate(cfg, &model, &panel, arts)?;
    ablate(cfg, &panel, arts)?;
    simulate(cfg, &model, &panel, arts)?;
    if specs.is_empty() {
        arts.write_json("mel_risk.json", &Vec::<()>::new())
    } else {
        mel(cfg, &model, &panel, arts)
    }
}
