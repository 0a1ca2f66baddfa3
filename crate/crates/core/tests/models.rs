use fleetrisk::features::{coefficient_influence, encode, standardize, FeatureSpec};
use fleetrisk::models::logistic::{fit_logistic, objective, objective_and_gradient, LogisticHyper};
use fleetrisk::models::{fit_gbt, fit_random_forest, gbt::fit_gbt_traced, ForestHyper, GbtHyper, RiskModel};
use fleetrisk::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn synthetic_panel(cfg: &FleetConfig) -> Panel {
    let fleet = generate_fleet(cfg).unwrap();
    build_panel(&fleet.records, &fleet.truth.panel_options(fleet.utilization.clone())).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> FeatureMatrix {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect()).collect();
    let labels = (0..n).map(|i| u8::from(i % 3 == 0 || rng.gen_bool(0.3))).collect();
    FeatureMatrix::numeric(&rows, labels)
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let x = random_matrix(&mut rng, 20, 5);
    let lambda = 0.05;
    let h = 1e-5;
    for _ in 0..10 {
        let w: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.5..1.5)).collect();
        let b = rng.gen_range(-1.0..1.0);
        let (_, gw, gb) = objective_and_gradient(&x, &w, b, lambda);
        let mut analytic = gw.clone();
        analytic.push(gb);
        let numeric: Vec<f64> = (0..6)
            .map(|j| {
                let shift = |delta: f64| {
                    let mut wp = w.clone();
                    let mut bp = b;
                    if j < 5 {
                        wp[j] += delta;
                    } else {
                        bp += delta;
                    }
                    objective(&x, &wp, bp, lambda)
                };
                (shift(h) - shift(-h)) / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic.iter().zip(&numeric).map(|(a, n)| (a - n).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-5, "relative error {}", diff / norm);
    }
}

#[test]
fn planted_coefficients_recovered() {
    let cfg = FleetConfig::default();
    let panel = synthetic_panel(&cfg);
    assert!(panel.len() >= 50_000);
    let spec = FeatureSpec::from_names(&["vehicle_type", "operational_weeks", "weeks_since_last_visit"]).unwrap();
    let model = TrainedModel::fit(&panel, spec, &ModelConfig::Logistic(LogisticHyper::default())).unwrap();
    let RiskModel::Logistic(lr) = model.model() else { unreachable!() };
    let raw = |name: &str| {
        let i = model.columns().iter().position(|c| c.name == name).unwrap();
        lr.weights[i] / model.scale()[i]
    };
    for (name, truth) in [("operational_weeks", cfg.beta_age), ("weeks_since_last_visit", cfg.beta_gap)] {
        let got = raw(name);
        assert!(got.signum() == truth.signum() && ((got - truth) / truth).abs() <= 0.15, "{name}: {got} vs {truth}");
    }
}

#[test]
fn dominant_planted_feature_ranks_first() {
    let cfg = FleetConfig {
        n_vehicles: 80,
        n_weeks: 150,
        beta_age: 0.0,
        beta_gap: 0.09,
        ..FleetConfig::default()
    };
    let panel = synthetic_panel(&cfg);
    let spec = FeatureSpec::from_names(&["operational_weeks", "weeks_since_last_visit", "utilization"]).unwrap();
    let model = TrainedModel::fit(&panel, spec, &ModelConfig::default_for(models::ModelKind::Logistic)).unwrap();
    let RiskModel::Logistic(lr) = model.model() else { unreachable!() };
    let ranked = coefficient_influence(lr).unwrap();
    assert_eq!(ranked[0].column, "weeks_since_last_visit");
}

#[test]
fn scaling_preserves_training_order() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rows: Vec<Vec<f64>> = (0..400)
        .map(|_| vec![rng.gen_range(0.0..500.0), rng.gen_range(0.0..30.0), rng.gen_range(0.0..1e5)])
        .collect();
    let labels: Vec<u8> = rows
        .iter()
        .map(|r| {
            let z = -3.0 + 0.004 * r[0] + 0.05 * r[1] + 1e-5 * r[2];
            u8::from(rng.gen_bool(1.0 / (1.0 + (-z).exp())))
        })
        .collect();
    let raw = FeatureMatrix::numeric(&rows, labels);
    let scaled = standardize(&raw);
    let hyper = LogisticHyper {
        l2_lambda: 0.0,
        tol: 1e-10,
        ..LogisticHyper::default()
    };
    let a = fit_logistic(&raw, &hyper).unwrap();
    let b = fit_logistic(&scaled, &hyper).unwrap();
    let pa: Vec<f64> = (0..400).map(|i| a.predict_row(raw.row(i))).collect();
    let pb: Vec<f64> = (0..400).map(|i| b.predict_row(scaled.row(i))).collect();
    for i in 0..400 {
        assert!((pa[i] - pb[i]).abs() < 1e-9);
        for j in 0..400 {
            if (pa[i] - pa[j]).abs() > 1e-9 {
                assert_eq!(pa[i] < pa[j], pb[i] < pb[j]);
            }
        }
    }
    // unscaled weights are the scaled ones divided by the column scale
    for (j, s) in scaled.scale().iter().enumerate() {
        assert!((a.weights[j] - b.weights[j] / s).abs() < 1e-6 * a.weights[j].abs().max(1e-6));
    }
}

#[test]
fn forest_separates_synthetic_test_split() {
    let cfg = FleetConfig {
        n_vehicles: 80,
        n_weeks: 200,
        ..FleetConfig::default()
    };
    let panel = synthetic_panel(&cfg);
    let config = ModelConfig::Forest(ForestHyper {
        n_estimators: 30,
        seed: 3,
        ..ForestHyper::default()
    });
    let (train, test) = split(&panel, &SplitSpec::Chronological { test_fraction: 0.3 }).unwrap();
    let (_, report) = eval::evaluate(&train, &test, FeatureSpec::all(), &config).unwrap();
    assert!(report.ratio > 1.1, "ratio {}", report.ratio);
}

#[test]
fn forest_is_mean_of_trees_and_single_tree_degenerates() {
    let panel = synthetic_panel(&FleetConfig {
        n_vehicles: 20,
        n_weeks: 80,
        ..FleetConfig::default()
    });
    let x = standardize(&encode(&panel, FeatureSpec::all()).unwrap());
    let forest = fit_random_forest(&x, &ForestHyper { n_estimators: 7, seed: 1, ..ForestHyper::default() }).unwrap();
    assert_eq!(forest.trees.len(), 7);
    for i in (0..x.n_rows()).step_by(37) {
        let mean = forest.trees.iter().map(|t| t.predict(x.row(i))).sum::<f64>() / 7.0;
        assert_eq!(forest.predict_row(x.row(i)), mean);
        assert!((0.0..=1.0).contains(&mean));
    }
    let single = fit_random_forest(
        &x,
        &ForestHyper {
            n_estimators: 1,
            max_features: Some(x.width()),
            max_depth: None,
            ..ForestHyper::default()
        },
    )
    .unwrap();
    for i in 0..x.n_rows() {
        assert_eq!(single.predict_row(x.row(i)), single.trees[0].predict(x.row(i)));
    }
}

#[test]
fn boosting_loss_non_increasing_on_synthetic_data() {
    let panel = synthetic_panel(&FleetConfig {
        n_vehicles: 40,
        n_weeks: 120,
        ..FleetConfig::default()
    });
    let x = standardize(&encode(&panel, FeatureSpec::all()).unwrap());
    let (model, losses) = fit_gbt_traced(&x, &GbtHyper { n_estimators: 60, ..GbtHyper::default() }).unwrap();
    for w in losses.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
    }
    assert!(losses.last() < losses.first());
    for i in 0..x.n_rows() {
        let s = model.score_row(x.row(i));
        assert!(s.is_finite());
        assert!((0.0..=1.0).contains(&model.predict_row(x.row(i))));
    }
}

#[test]
fn model_documents_round_trip() {
    let panel = synthetic_panel(&FleetConfig {
        n_vehicles: 20,
        n_weeks: 80,
        ..FleetConfig::default()
    });
    let (train, test) = split(&panel, &SplitSpec::Chronological { test_fraction: 0.3 }).unwrap();
    for config in [
        ModelConfig::default_for(models::ModelKind::Logistic),
        ModelConfig::Forest(ForestHyper { n_estimators: 5, ..ForestHyper::default() }),
        ModelConfig::Gbt(GbtHyper { n_estimators: 10, ..GbtHyper::default() }),
    ] {
        let m = TrainedModel::fit(&train, FeatureSpec::all(), &config).unwrap();
        let back = TrainedModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m.predict_panel(&test).unwrap(), back.predict_panel(&test).unwrap());
        assert_eq!(back, m);
    }
}

#[test]
fn identical_seeds_give_identical_models() {
    let panel = synthetic_panel(&FleetConfig {
        n_vehicles: 20,
        n_weeks: 80,
        ..FleetConfig::default()
    });
    let x = standardize(&encode(&panel, FeatureSpec::all()).unwrap());
    let h = GbtHyper { n_estimators: 15, max_features: Some(10), seed: 4, ..GbtHyper::default() };
    assert_eq!(fit_gbt(&x, &h).unwrap(), fit_gbt(&x, &h).unwrap());
    let f = ForestHyper { n_estimators: 6, seed: 4, ..ForestHyper::default() };
    assert_eq!(fit_random_forest(&x, &f).unwrap(), fit_random_forest(&x, &f).unwrap());
}

#[cfg(feature = "parallel")]
#[test]
fn thread_count_does_not_change_results() {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let cfg = FleetConfig {
        n_vehicles: 30,
        n_weeks: 90,
        ..FleetConfig::default()
    };
    let run = || {
        let fleet = generate_fleet(&cfg).unwrap();
        let panel = build_panel(&fleet.records, &fleet.truth.panel_options(fleet.utilization.clone())).unwrap();
        let x = standardize(&encode(&panel, FeatureSpec::all()).unwrap());
        let forest = fit_random_forest(&x, &ForestHyper { n_estimators: 8, seed: 2, ..ForestHyper::default() }).unwrap();
        let rows = eval::ablation(
            &panel,
            &features::ablation_subsets(),
            &ModelConfig::default_for(models::ModelKind::Logistic),
            &SplitSpec::Chronological { test_fraction: 0.3 },
        )
        .unwrap();
        (fleet.truth, panel, forest, rows)
    };
    let parallel = run();
    let sequential = pool.install(run);
    assert_eq!(parallel.0, sequential.0);
    assert_eq!(parallel.1, sequential.1);
    assert_eq!(parallel.2, sequential.2);
    assert_eq!(parallel.3, sequential.3);
}
