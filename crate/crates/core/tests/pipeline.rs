use std::collections::BTreeMap;

use demcorrect_core::dataset::{extract_samples, split};
use demcorrect_core::eval::LANDSCAPES;
use demcorrect_core::synth::{fractal_dem, inject_error, synth_landcover, ErrorSpec, NonlinearTerm, TermKind};
use demcorrect_core::*;

struct Fixture {
    reference: GridF64,
    dem: GridF64,
    strata: GridF64,
    stack: FeatureStackF64,
}

fn fixture() -> Fixture {
    let cfg = FeatureConfig {
        texture: terrain::TextureSpec { threshold: 1.0, window: WindowSpec::new(3, 1.0).unwrap() },
        ..FeatureConfig::default()
    };
    let reference = fractal_dem::<f64>(6, 300.0, 120.0, 0.5, 21).unwrap();
    let lc = synth_landcover(&reference, 22).unwrap();
    let clean = build_feature_stack(&reference, &lc.bare, &lc.urban, &lc.forest, &cfg).unwrap();
    let spec = ErrorSpec {
        linear_terms: BTreeMap::from([("slope".into(), 1.0), ("pct_forest".into(), 0.8)]),
        nonlinear_terms: vec![NonlinearTerm { feature: "elevation".into(), kind: TermKind::Sine, amplitude: 1.5, scale: 2.0, partner: None }],
        noise_std: 0.2,
        relative_noise: false,
        seed: 5,
    };
    let dem = inject_error(&reference, &clean, &spec).unwrap().degraded;
    let stack = build_feature_stack(&dem, &lc.bare, &lc.urban, &lc.forest, &cfg).unwrap();
    Fixture { reference, dem, strata: lc.strata, stack }
}

#[test]
fn grid_and_table_predictions_agree() {
    let f = fixture();
    let target = difference(&f.dem, &f.reference).unwrap();
    let table = extract_samples(&f.stack, &target, Some(&f.strata), 1.0, 1).unwrap();
    let s = split(&table, 0.8, 3, true).unwrap();
    let ols = fit_ols(&s.train, s.train.feature_names()).unwrap();
    let gbdt = fit_gbdt(&s.train, &GbdtParams { n_trees: 20, ..Default::default() }).unwrap();

    for model in [TrainedModel::Linear(ols), TrainedModel::Gbdt(gbdt)] {
        let grid = predict_error_grid(model.as_regressor(), &f.stack).unwrap();
        let mut before = vec![];
        let mut after = vec![];
        for row in table.rows() {
            let p = model.as_regressor().predict_row(&row.features).unwrap();
            assert_eq!(grid.get(row.row, row.col), Some(p));
            before.push(row.target);
            after.push(row.target - p);
        }
        let corrected = apply_correction(&f.dem, &grid).unwrap();
        let rep = build_report(
            &f.reference,
            &f.dem,
            &BTreeMap::from([("m".to_string(), corrected)]),
            &f.strata,
            &BTreeMap::new(),
        )
        .unwrap();
        let tabular = pct_rmse_reduction(
            compute_metrics(&before).unwrap().rmse,
            compute_metrics(&after).unwrap().rmse,
        )
        .unwrap();
        let gridded = rep.overall.pct_rmse_reduction["m"].unwrap();
        assert!((tabular - gridded).abs() < 1e-9, "{tabular} vs {gridded}");
    }
}

#[test]
fn exact_error_model_restores_reference() {
    let f = fixture();
    let dh = difference(&f.dem, &f.reference).unwrap();
    let corrected = apply_correction(&f.dem, &dh).unwrap();
    for i in 0..f.dem.geometry().len() {
        if let (Some(c), Some(r)) = (corrected.get_index(i), dh.get_index(i).and(f.reference.get_index(i))) {
            assert_eq!(c, r);
        }
    }
    let rep = build_report(
        &f.reference,
        &f.dem,
        &BTreeMap::from([("oracle".to_string(), corrected)]),
        &f.strata,
        &BTreeMap::new(),
    )
    .unwrap();
    assert_eq!(rep.strata.len(), LANDSCAPES.len());
    for s in rep.strata.iter().chain([&rep.overall]) {
        assert_eq!(s.pct_rmse_reduction["oracle"], Some(100.0));
    }
}

#[test]
fn report_ignores_grid_orientation() {
    // transposing every grid visits the same cells in another order
    let f = fixture();
    let transpose = |g: &GridF64| {
        GridF64::from_fn(*g.geometry(), g.nodata(), |r, c| g.get(c, r)).unwrap()
    };
    let corrected = f.reference.map_valid(|v| v + 0.25);
    let a = build_report(
        &f.reference,
        &f.dem,
        &BTreeMap::from([("m".to_string(), corrected.clone())]),
        &f.strata,
        &BTreeMap::new(),
    )
    .unwrap();
    let b = build_report(
        &transpose(&f.reference),
        &transpose(&f.dem),
        &BTreeMap::from([("m".to_string(), transpose(&corrected))]),
        &transpose(&f.strata),
        &BTreeMap::new(),
    )
    .unwrap();
    for (x, y) in a.strata.iter().zip(&b.strata) {
        assert_eq!(x.before.n, y.before.n);
        assert!((x.before.rmse - y.before.rmse).abs() < 1e-12);
        assert!((x.pct_rmse_reduction["m"].unwrap() - y.pct_rmse_reduction["m"].unwrap()).abs() < 1e-9);
    }
}

#[test]
fn models_survive_a_json_roundtrip_on_real_data() {
    let f = fixture();
    let target = difference(&f.dem, &f.reference).unwrap();
    let table = extract_samples(&f.stack, &target, None, 0.5, 9).unwrap();
    let p = GbdtParams { n_trees: 15, growth: Growth::leafwise_default(), ..Default::default() };
    let m = TrainedModel::Gbdt(fit_gbdt(&table, &p).unwrap());
    let back = TrainedModel::<f64>::from_json(&m.to_json().unwrap()).unwrap();
    assert_eq!(back, m);
    let a = predict_error_grid(m.as_regressor(), &f.stack).unwrap();
    let b = predict_error_grid(back.as_regressor(), &f.stack).unwrap();
    assert_eq!(a, b);
}

#[test]
fn single_precision_pipeline_runs() {
    let dem = fractal_dem::<f32>(5, 100.0, 40.0, 0.5, 3).unwrap();
    let lc = synth_landcover(&dem, 4).unwrap();
    let cfg = FeatureConfig {
        texture: terrain::TextureSpec { threshold: 0.5, window: WindowSpec::new(2, 1.0).unwrap() },
        ..FeatureConfig::default()
    };
    let stack = build_feature_stack(&dem, &lc.bare, &lc.urban, &lc.forest, &cfg).unwrap();
    let spec = ErrorSpec { linear_terms: BTreeMap::from([("slope".into(), 2.0)]), ..Default::default() };
    let out = inject_error(&dem, &stack, &spec).unwrap();
    let table = extract_samples(&stack, &out.true_dh, Some(&lc.strata), 1.0, 0).unwrap();
    let m = fit_gbdt(&table, &GbdtParams { n_trees: 30, ..Default::default() }).unwrap();
    let corrected = apply_correction(&out.degraded, &predict_error_grid(&m, &stack).unwrap()).unwrap();
    let rep = build_report(&dem, &out.degraded, &BTreeMap::from([("g".to_string(), corrected)]), &lc.strata, &BTreeMap::new()).unwrap();
    assert!(rep.overall.pct_rmse_reduction["g"].unwrap() > 50.0);
}
