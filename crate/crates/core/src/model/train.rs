//! Grid training, calibration and selection of the deployable model.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::bundle::{Metrics, TrainedModelBundle};
use super::conformal::fit_conformal;
use super::dataset::{ClockOrigin, Dataset, Split, SplitFractions, build_dataset};
use super::ridge::RidgeProblem;
use super::trees::{TreeParams, train_boosted_trees};
use super::{PointModel, Regressor};
use crate::error::{Error, Result};
use crate::features::FeatureSchema;
use crate::store::PatentStore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda_grid: Vec<f64>,
    pub rounds_grid: Vec<usize>,
    pub tree_params: TreeParams,
    pub alpha: f64,
    pub split_seed: u64,
    pub clock_origin: ClockOrigin,
    pub fractions: SplitFractions,
    /// Fixed timestamp for reproducible bundles; `None` means now.
    pub trained_at: Option<DateTime<Utc>>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lambda_grid: vec![0.1, 1.0, 10.0],
            rounds_grid: vec![100, 200],
            tree_params: TreeParams::default(),
            alpha: 0.1,
            split_seed: 42,
            clock_origin: ClockOrigin::FilingDate,
            fractions: SplitFractions::default(),
            trained_at: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    pub learner: String,
    pub lambda: Option<f64>,
    pub rounds: Option<usize>,
    pub metrics: Option<Metrics>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub bundle: TrainedModelBundle,
    pub candidates: Vec<CandidateReport>,
    pub dataset_sizes: [usize; 3],
}

/// Metrics of `bundle` over `(features, target)` rows.
pub fn evaluate_model(bundle: &TrainedModelBundle, schema_id: &str, rows: &[(&[f64], f64)]) -> Result<Metrics> {
    if schema_id != bundle.schema_id {
        return Err(Error::SchemaMismatch { expected: bundle.schema_id.clone(), actual: schema_id.to_string() });
    }
    metrics_of(&bundle.point_model, &bundle.calibration, rows)
}

/// Metrics on one split of a dataset.
pub fn evaluate_split(bundle: &TrainedModelBundle, dataset: &Dataset, which: Split) -> Result<Metrics> {
    let rows = labelled(dataset, which);
    evaluate_model(bundle, &dataset.schema_id, &rows)
}

fn metrics_of(
    model: &PointModel,
    calibration: &super::ConformalCalibration,
    rows: &[(&[f64], f64)],
) -> Result<Metrics> {
    if rows.is_empty() {
        return Err(Error::NoTestData);
    }
    let dim = model.n_features();
    if rows.iter().any(|(x, _)| x.len() != dim) {
        return Err(Error::SchemaMismatch {
            expected: format!("{dim} values"),
            actual: "rows of a different width".into(),
        });
    }
    let (mut abs, mut sq, mut covered, mut width) = (0.0, 0.0, 0usize, 0.0);
    for (x, y) in rows {
        let p = super::PredictionResult::from_parts(model.predict(x), calibration.half_width(x), calibration.tau);
        let e = p.point_days - y;
        abs += e.abs();
        sq += e * e;
        if p.interval_low_days <= *y && *y <= p.interval_high_days {
            covered += 1;
        }
        width += p.interval_high_days - p.interval_low_days;
    }
    let n = rows.len() as f64;
    Ok(Metrics {
        mae_days: abs / n,
        rmse_days: (sq / n).sqrt(),
        coverage: covered as f64 / n,
        mean_interval_width_days: width / n,
    })
}

fn labelled(dataset: &Dataset, which: Split) -> Vec<(&[f64], f64)> {
    dataset.split(which).into_iter().map(|r| (r.values.as_slice(), r.target_days)).collect()
}

struct Candidate {
    report: CandidateReport,
    fitted: Option<(PointModel, super::ConformalCalibration, Metrics)>,
}

/// Builds the dataset, trains every grid candidate on the train split,
/// calibrates on the calibration split, and keeps the lowest test MAE.
/// Ties go to the earlier candidate (ridge grid first, then trees).
pub fn train_and_select(store: &PatentStore, schema: &FeatureSchema, config: &TrainConfig) -> Result<TrainOutcome> {
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {}", config.alpha)));
    }
    let dataset = build_dataset(store, schema, config.clock_origin, config.split_seed, config.fractions)?;
    let train = labelled(&dataset, Split::Train);
    let calib = labelled(&dataset, Split::Calibrate);
    let test = labelled(&dataset, Split::Test);
    let sizes = [train.len(), calib.len(), test.len()];
    if test.is_empty() {
        return Err(Error::NoTestData);
    }
    let (x_train, y_train): (Vec<&[f64]>, Vec<f64>) = train.iter().copied().unzip();
    let (x_calib, y_calib): (Vec<&[f64]>, Vec<f64>) = calib.iter().copied().unzip();

    let finish = |model: PointModel, mut report: CandidateReport| -> Result<Candidate> {
        let cal = fit_conformal(&model, &x_calib, &y_calib, config.alpha)?;
        let metrics = metrics_of(&model, &cal, &test)?;
        report.metrics = Some(metrics);
        Ok(Candidate { report, fitted: Some((model, cal, metrics)) })
    };
    let failed = |mut report: CandidateReport, e: Error| -> Result<Candidate> {
        // Insufficient calibration data sinks every candidate alike.
        if matches!(e, Error::InsufficientCalibration { .. }) {
            return Err(e);
        }
        report.error = Some(e.to_string());
        Ok(Candidate { report, fitted: None })
    };

    let mut candidates = Vec::new();
    let problem = RidgeProblem::new(&x_train, &y_train)?;
    for &lambda in &config.lambda_grid {
        let report =
            CandidateReport { learner: "ridge".into(), lambda: Some(lambda), rounds: None, metrics: None, error: None };
        let c = match problem.solve(lambda) {
            Ok(m) => finish(PointModel::Ridge(m), report),
            Err(e) => failed(report, e),
        }?;
        candidates.push(c);
    }
    let max_rounds = config.rounds_grid.iter().copied().max().unwrap_or(0);
    if max_rounds > 0 {
        let params = TreeParams { rounds: max_rounds, ..config.tree_params };
        let full = train_boosted_trees(&x_train, &y_train, params);
        for &rounds in &config.rounds_grid {
            let report = CandidateReport {
                learner: "boosted_trees".into(),
                lambda: None,
                rounds: Some(rounds),
                metrics: None,
                error: None,
            };
            let c = match &full {
                Ok(m) => finish(PointModel::BoostedTrees(m.truncated(rounds)), report),
                Err(e) => failed(report, Error::InsufficientData(e.to_string())),
            }?;
            candidates.push(c);
        }
    }

    let mut best: Option<usize> = None;
    for (i, c) in candidates.iter().enumerate() {
        if let Some((_, _, m)) = &c.fitted {
            let better = match best.and_then(|b| candidates[b].fitted.as_ref()) {
                Some((_, _, bm)) => m.mae_days < bm.mae_days,
                None => true,
            };
            if better {
                best = Some(i);
            }
        }
    }
    let Some(best) = best else {
        return Err(Error::InsufficientData("no candidate model could be trained".into()));
    };
    let reports: Vec<CandidateReport> = candidates.iter().map(|c| c.report.clone()).collect();
    let (model, cal, metrics) = candidates.swap_remove(best).fitted.expect("selected candidate is fitted");
    let trained_at = config.trained_at.unwrap_or_else(Utc::now);
    let bundle = TrainedModelBundle::new(schema.clone(), model, cal, metrics, trained_at)?;
    Ok(TrainOutcome { bundle, candidates: reports, dataset_sizes: sizes })
}
