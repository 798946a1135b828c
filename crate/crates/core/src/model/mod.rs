//! Grant-lag regression: dataset construction, learners, conformal
//! intervals, and the deployable model bundle.

mod bundle;
mod conformal;
mod dataset;
mod linalg;
mod ridge;
mod train;
mod trees;

use serde::{Deserialize, Serialize};

pub use bundle::{BUNDLE_MAGIC, BUNDLE_VERSION, Metrics, TrainedModelBundle};
pub use conformal::{ConformalCalibration, conformal_rank, difficulty_params, fit_conformal, fit_conformal_with};
pub use dataset::{ClockOrigin, Dataset, DatasetRow, MIN_ELIGIBLE_GRANTS, Split, SplitFractions, build_dataset};
pub use ridge::{RidgeModel, RidgeProblem, train_ridge};
pub use train::{CandidateReport, TrainConfig, TrainOutcome, evaluate_model, evaluate_split, train_and_select};
pub use trees::{BoostedTreesModel, RmseTrace, TreeNode, TreeParams, train_boosted_trees, train_boosted_trees_traced};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub trait Regressor {
    fn predict(&self, x: &[f64]) -> f64;
    fn n_features(&self) -> usize;
}

/// Either learner, tagged by `kind` when serialized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PointModel {
    Ridge(RidgeModel),
    BoostedTrees(BoostedTreesModel),
}

impl PointModel {
    pub fn learner_name(&self) -> &'static str {
        match self {
            PointModel::Ridge(_) => "ridge",
            PointModel::BoostedTrees(_) => "boosted_trees",
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_features() != n_features {
            return Err(Error::InvalidBundle(format!(
                "model has {} inputs, schema has {n_features}",
                self.n_features()
            )));
        }
        match self {
            PointModel::Ridge(m) => {
                if m.intercept.is_finite() && m.weights.iter().all(|w| w.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::InvalidBundle("non-finite ridge parameter".into()))
                }
            }
            PointModel::BoostedTrees(m) => m.validate(),
        }
    }
}

impl Regressor for PointModel {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            PointModel::Ridge(m) => m.predict(x),
            PointModel::BoostedTrees(m) => m.predict(x),
        }
    }

    fn n_features(&self) -> usize {
        match self {
            PointModel::Ridge(m) => m.n_features(),
            PointModel::BoostedTrees(m) => m.n_features(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Band {
    Green,
    Amber,
    Red,
}

pub const GREEN_THRESHOLD: f64 = 0.6;
pub const AMBER_THRESHOLD: f64 = 0.4;

impl Band {
    pub fn from_confidence(confidence: f64) -> Band {
        if confidence >= GREEN_THRESHOLD {
            Band::Green
        } else if confidence >= AMBER_THRESHOLD {
            Band::Amber
        } else {
            Band::Red
        }
    }
}

/// `tau / (tau + half_width)`: 1 at zero width, 0.5 at the median width.
pub fn confidence(tau: f64, half_width: f64) -> f64 {
    tau / (tau + half_width)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionResult {
    pub point_days: f64,
    pub interval_low_days: f64,
    pub interval_high_days: f64,
    pub confidence: f64,
    pub band: Band,
}

impl PredictionResult {
    pub fn from_parts(raw_point: f64, half_width: f64, tau: f64) -> Self {
        let point = raw_point.max(0.0);
        let c = confidence(tau, half_width);
        PredictionResult {
            point_days: point,
            interval_low_days: (point - half_width).max(0.0),
            interval_high_days: point + half_width,
            confidence: c,
            band: Band::from_confidence(c),
        }
    }
}

pub fn predict_grant_lag(bundle: &TrainedModelBundle, features: &FeatureVector) -> Result<PredictionResult> {
    if features.schema_id != bundle.schema_id {
        return Err(Error::SchemaMismatch { expected: bundle.schema_id.clone(), actual: features.schema_id.clone() });
    }
    if features.values.len() != bundle.point_model.n_features() {
        return Err(Error::SchemaMismatch {
            expected: format!("{} values", bundle.point_model.n_features()),
            actual: format!("{} values", features.values.len()),
        });
    }
    Ok(bundle.predict_values(&features.values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confidence_limits() {
        assert_eq!(confidence(3.0, 0.0), 1.0);
        assert_eq!(confidence(3.0, 3.0), 0.5);
        assert_eq!(Band::from_confidence(0.5), Band::Amber);
        assert_eq!(Band::from_confidence(0.6), Band::Green);
        assert_eq!(Band::from_confidence(0.4), Band::Amber);
        assert_eq!(Band::from_confidence(0.399_999), Band::Red);
    }

    #[test]
    fn interval_is_clamped_at_zero() {
        let r = PredictionResult::from_parts(-5.0, 10.0, 10.0);
        assert_eq!(r.point_days, 0.0);
        assert_eq!(r.interval_low_days, 0.0);
        assert_eq!(r.interval_high_days, 10.0);
        assert_eq!(r.band, Band::Amber);
    }
}
