use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::conformal::ConformalCalibration;
use super::{PointModel, PredictionResult, Regressor};
use crate::error::{Error, Result};
use crate::features::FeatureSchema;

pub const BUNDLE_MAGIC: &str = "PATMODEL";
pub const BUNDLE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub mae_days: f64,
    pub rmse_days: f64,
    pub coverage: f64,
    pub mean_interval_width_days: f64,
}

/// A trained point model with its calibration, ready to serve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModelBundle {
    pub magic: String,
    pub version: u32,
    pub model_id: String,
    pub schema_id: String,
    pub schema: FeatureSchema,
    pub learner: String,
    pub point_model: PointModel,
    pub calibration: ConformalCalibration,
    pub metrics: Metrics,
    pub trained_at: DateTime<Utc>,
}

#[derive(Serialize)]
struct IdentityContent<'a> {
    schema_id: &'a str,
    point_model: &'a PointModel,
    calibration: &'a ConformalCalibration,
    metrics: &'a Metrics,
}

impl TrainedModelBundle {
    pub fn new(
        schema: FeatureSchema,
        point_model: PointModel,
        calibration: ConformalCalibration,
        metrics: Metrics,
        trained_at: DateTime<Utc>,
    ) -> Result<Self> {
        let mut bundle = TrainedModelBundle {
            magic: BUNDLE_MAGIC.to_string(),
            version: BUNDLE_VERSION,
            model_id: String::new(),
            schema_id: schema.schema_id.clone(),
            learner: point_model.learner_name().to_string(),
            schema,
            point_model,
            calibration,
            metrics,
            trained_at,
        };
        bundle.model_id = bundle.content_id()?;
        Ok(bundle)
    }

    /// Content hash of everything that affects predictions or metrics.
    fn content_id(&self) -> Result<String> {
        let content = IdentityContent {
            schema_id: &self.schema_id,
            point_model: &self.point_model,
            calibration: &self.calibration,
            metrics: &self.metrics,
        };
        let digest = Sha256::digest(serde_json::to_vec(&content)?);
        Ok(format!("m-{}", &hex::encode(digest)[..16]))
    }

    pub fn predict_values(&self, x: &[f64]) -> PredictionResult {
        PredictionResult::from_parts(self.point_model.predict(x), self.calibration.half_width(x), self.calibration.tau)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: TrainedModelBundle = serde_json::from_str(text).map_err(|e| Error::InvalidBundle(e.to_string()))?;
        bundle.check()?;
        Ok(bundle)
    }

    fn check(&self) -> Result<()> {
        if self.magic != BUNDLE_MAGIC {
            return Err(Error::InvalidBundle(format!("bad magic {:?}", self.magic)));
        }
        if self.version != BUNDLE_VERSION {
            return Err(Error::InvalidBundle(format!("unsupported version {}", self.version)));
        }
        if self.schema_id != self.schema.schema_id {
            return Err(Error::InvalidBundle("schema_id disagrees with schema".into()));
        }
        if self.learner != self.point_model.learner_name() {
            return Err(Error::InvalidBundle("learner disagrees with point_model".into()));
        }
        let dim = self.schema.total_dim();
        self.point_model.validate(dim)?;
        self.calibration.validate(dim)?;
        let expected = self.content_id()?;
        if self.model_id != expected {
            return Err(Error::InvalidBundle(format!(
                "model_id {} does not match content hash {expected}",
                self.model_id
            )));
        }
        Ok(())
    }

    /// Writes atomically via a sibling temp file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_json()?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
