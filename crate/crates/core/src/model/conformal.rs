//! Normalized split-conformal calibration.

use serde::{Deserialize, Serialize};

use super::trees::{TreeParams, train_boosted_trees};
use super::{PointModel, Regressor};
use crate::error::{Error, Result};
use crate::store::percentile_linear;

pub const MIN_CALIBRATION_ROWS: usize = 20;
/// Lower bound on the predicted difficulty, in days.
pub const DIFFICULTY_FLOOR: f64 = 1.0;
/// Lower bound on `tau` so confidence stays defined when every residual is 0.
pub const TAU_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformalCalibration {
    pub alpha: f64,
    pub q_hat: f64,
    pub tau: f64,
    pub difficulty_model: PointModel,
}

impl ConformalCalibration {
    pub fn difficulty(&self, x: &[f64]) -> f64 {
        self.difficulty_model.predict(x).max(DIFFICULTY_FLOOR)
    }

    pub fn half_width(&self, x: &[f64]) -> f64 {
        self.q_hat * self.difficulty(x)
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidBundle(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if !(self.q_hat >= 0.0 && self.q_hat.is_finite()) || !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidBundle("q_hat must be ≥ 0 and tau > 0".into()));
        }
        self.difficulty_model.validate(n_features)
    }
}

/// Rank `k = ⌈(n+1)(1−α)⌉` of the conformal quantile. The tiny slack keeps
/// products such as `10 × 0.9` from rounding up past an integer.
pub fn conformal_rank(n: usize, alpha: f64) -> usize {
    ((n as f64 + 1.0) * (1.0 - alpha) - 1e-9).ceil().max(1.0) as usize
}

pub fn difficulty_params(n: usize) -> TreeParams {
    TreeParams { max_depth: 2, rounds: 50, min_leaf: MIN_CALIBRATION_ROWS.min(n / 2), learning_rate: 0.1 }
}

/// Folds used to score calibration rows out of sample.
pub const DIFFICULTY_FOLDS: usize = 5;

pub fn fit_conformal(point_model: &PointModel, x: &[&[f64]], y: &[f64], alpha: f64) -> Result<ConformalCalibration> {
    fit_conformal_with(point_model, x, y, alpha, difficulty_params)
}

/// Normalized split-conformal fit. Each calibration score uses a
/// difficulty model trained on the other folds, so that scores are not
/// shrunk by in-sample fit; the deployed difficulty model is then trained
/// on every calibration row.
pub fn fit_conformal_with(
    point_model: &PointModel,
    x: &[&[f64]],
    y: &[f64],
    alpha: f64,
    params: fn(usize) -> TreeParams,
) -> Result<ConformalCalibration> {
    let n = x.len();
    if y.len() != n {
        return Err(Error::InvalidArgument("row/target count mismatch".into()));
    }
    if n < MIN_CALIBRATION_ROWS {
        return Err(Error::InsufficientCalibration { needed: MIN_CALIBRATION_ROWS, got: n });
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let residuals: Vec<f64> = x.iter().zip(y).map(|(row, t)| (t - point_model.predict(row)).abs()).collect();

    let mut out_of_fold = vec![0.0; n];
    for fold in 0..DIFFICULTY_FOLDS {
        let (mut fx, mut fr) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in (0..n).filter(|i| i % DIFFICULTY_FOLDS != fold) {
            fx.push(x[i]);
            fr.push(residuals[i]);
        }
        let m = train_boosted_trees(&fx, &fr, params(fx.len()))?;
        for i in (0..n).filter(|i| i % DIFFICULTY_FOLDS == fold) {
            out_of_fold[i] = m.predict(x[i]).max(DIFFICULTY_FLOOR);
        }
    }
    let mut scores: Vec<f64> = residuals.iter().zip(&out_of_fold).map(|(r, d)| r / d).collect();
    scores.sort_by(f64::total_cmp);
    let k = conformal_rank(n, alpha);
    let q_hat = if k > n { scores[n - 1] * 10.0 } else { scores[k - 1] };

    let difficulty_model = PointModel::BoostedTrees(train_boosted_trees(x, &residuals, params(n))?);
    let mut widths: Vec<f64> =
        x.iter().map(|row| q_hat * difficulty_model.predict(row).max(DIFFICULTY_FLOOR)).collect();
    widths.sort_by(f64::total_cmp);
    let tau = percentile_linear(&widths, 0.5).max(TAU_FLOOR);
    Ok(ConformalCalibration { alpha, q_hat, tau, difficulty_model })
}
