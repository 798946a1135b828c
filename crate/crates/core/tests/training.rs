mod common;

use chrono::{TimeZone, Utc};
use common::{store_of, synthetic_docs};
use patent_analytics::features::{FeatureSchema, assemble_features};
use patent_analytics::model::{
    Split, TrainConfig, TrainedModelBundle, TreeParams, build_dataset, evaluate_split, predict_grant_lag,
    train_and_select,
};
use patent_analytics::{DocKind, Error};

fn small_config() -> TrainConfig {
    TrainConfig {
        rounds_grid: vec![20, 40],
        tree_params: TreeParams { rounds: 40, ..Default::default() },
        trained_at: Some(Utc.with_ymd_and_hms(2024, 1, 2, 3, 4, 5).unwrap()),
        ..Default::default()
    }
}

fn schema() -> FeatureSchema {
    FeatureSchema::new(256, &[1, 2]).unwrap()
}

#[test]
fn training_is_reproducible_and_round_trips() {
    let store = store_of(&synthetic_docs(400, 31));
    let a = train_and_select(&store, &schema(), &small_config()).unwrap();
    let b = train_and_select(&store, &schema(), &small_config()).unwrap();
    assert_eq!(a.bundle.model_id, b.bundle.model_id);
    assert_eq!(a.bundle.to_json().unwrap(), b.bundle.to_json().unwrap());
    assert_eq!(a.candidates.len(), 5);
    assert_eq!(a.dataset_sizes.iter().sum::<usize>(), 400);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    a.bundle.save(&path).unwrap();
    let loaded = TrainedModelBundle::load(&path).unwrap();
    assert_eq!(loaded, a.bundle);
    for d in store.documents().take(100) {
        let fv = assemble_features(d, &a.bundle.schema);
        let p = predict_grant_lag(&a.bundle, &fv).unwrap();
        let q = predict_grant_lag(&loaded, &fv).unwrap();
        assert!((p.point_days - q.point_days).abs() <= 1e-12);
        assert!((p.interval_low_days - q.interval_low_days).abs() <= 1e-12);
        assert!((p.interval_high_days - q.interval_high_days).abs() <= 1e-12);
        assert_eq!(p.band, q.band);
    }

    let ds = build_dataset(&store, &a.bundle.schema, Default::default(), 42, Default::default()).unwrap();
    let m = evaluate_split(&a.bundle, &ds, Split::Test).unwrap();
    assert!((m.mae_days - a.bundle.metrics.mae_days).abs() <= 1e-9);
}

#[test]
fn tampered_bundles_are_rejected() {
    let store = store_of(&synthetic_docs(200, 32));
    let bundle = train_and_select(&store, &schema(), &small_config()).unwrap().bundle;
    let text = bundle.to_json().unwrap();
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["calibration"]["q_hat"] = (v["calibration"]["q_hat"].as_f64().unwrap() * 2.0).into();
    let err = TrainedModelBundle::from_json(&v.to_string()).unwrap_err();
    assert!(matches!(err, Error::InvalidBundle(_)), "{err}");

    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    v["magic"] = "NOTAMODEL".into();
    assert!(TrainedModelBundle::from_json(&v.to_string()).is_err());
    assert!(TrainedModelBundle::from_json(&text[..text.len() / 2]).is_err());
}

#[test]
fn prediction_rejects_foreign_schema() {
    let store = store_of(&synthetic_docs(200, 33));
    let bundle = train_and_select(&store, &schema(), &small_config()).unwrap().bundle;
    let other = FeatureSchema::new(512, &[1]).unwrap();
    let d = store.documents().next().unwrap();
    let err = predict_grant_lag(&bundle, &assemble_features(d, &other)).unwrap_err();
    assert!(matches!(err, Error::SchemaMismatch { .. }));
}

#[test]
fn too_few_grants_is_insufficient_data() {
    let docs: Vec<_> = synthetic_docs(49, 34);
    let store = store_of(&docs);
    assert_eq!(store.documents().filter(|d| d.doc_kind == DocKind::Grant).count(), 49);
    let err = train_and_select(&store, &schema(), &small_config()).unwrap_err();
    assert!(matches!(err, Error::InsufficientData(_)), "{err}");
}
