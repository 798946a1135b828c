use std::collections::{BTreeMap, HashMap};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::document::DocKind;
use crate::error::{Error, Result};
use crate::features::{FeatureSchema, Fnv1a64, assemble_features};
use crate::store::PatentStore;

pub const MIN_ELIGIBLE_GRANTS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClockOrigin {
    #[default]
    FilingDate,
    PublicationDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Split {
    Train,
    Calibrate,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub calibrate: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.7, calibrate: 0.15, test: 0.15 }
    }
}

impl SplitFractions {
    fn validate(&self) -> Result<()> {
        let parts = [self.train, self.calibrate, self.test];
        if parts.iter().any(|f| !(0.0..=1.0).contains(f)) || (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "split fractions must be in [0, 1] and sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub doc_number: String,
    pub values: Vec<f64>,
    pub target_days: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema_id: String,
    pub rows: Vec<DatasetRow>,
    pub split_labels: BTreeMap<String, Split>,
}

impl Dataset {
    pub fn split(&self, which: Split) -> Vec<&DatasetRow> {
        self.rows.iter().filter(|r| self.split_labels.get(&r.doc_number) == Some(&which)).collect()
    }

    pub fn split_len(&self, which: Split) -> usize {
        self.split_labels.values().filter(|s| **s == which).count()
    }
}

fn split_key(seed: u64, doc_number: &str) -> u64 {
    let mut h = Fnv1a64::default();
    h.write(&seed.to_le_bytes());
    h.write(doc_number.as_bytes());
    h.finish()
}

/// Grants with both dates, their targets, a seeded hash ordering of
/// doc_numbers, and bucket sizes rounded from the fractions.
pub fn build_dataset(
    store: &PatentStore,
    schema: &FeatureSchema,
    origin: ClockOrigin,
    split_seed: u64,
    fractions: SplitFractions,
) -> Result<Dataset> {
    fractions.validate()?;
    let app_publication: HashMap<&str, NaiveDate> = store
        .documents()
        .filter(|d| d.doc_kind == DocKind::Application)
        .map(|d| (d.doc_number.as_str(), d.publication_date))
        .collect();
    let mut eligible: Vec<(u64, &crate::PatentDocument, f64)> = Vec::new();
    for doc in store.documents().filter(|d| d.doc_kind == DocKind::Grant) {
        let Some(grant) = doc.grant_date else { continue };
        let start = match origin {
            ClockOrigin::FilingDate => Some(doc.filing_date),
            ClockOrigin::PublicationDate => app_publication.get(doc.doc_number.as_str()).copied(),
        };
        let Some(start) = start else { continue };
        let days = grant.signed_duration_since(start).num_days();
        if days < 0 {
            continue;
        }
        eligible.push((split_key(split_seed, &doc.doc_number), doc, days as f64));
    }
    if eligible.len() < MIN_ELIGIBLE_GRANTS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_ELIGIBLE_GRANTS} eligible grants, found {}",
            eligible.len()
        )));
    }
    eligible.sort_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.doc_number.cmp(&b.1.doc_number)));
    let n = eligible.len();
    let n_train = (fractions.train * n as f64).round() as usize;
    let n_calib = ((fractions.calibrate * n as f64).round() as usize).min(n - n_train);
    let mut rows = Vec::with_capacity(n);
    let mut split_labels = BTreeMap::new();
    for (i, (_, doc, target)) in eligible.into_iter().enumerate() {
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_calib {
            Split::Calibrate
        } else {
            Split::Test
        };
        split_labels.insert(doc.doc_number.clone(), split);
        rows.push(DatasetRow {
            doc_number: doc.doc_number.clone(),
            values: assemble_features(doc, schema).values,
            target_days: target,
        });
    }
    Ok(Dataset { schema_id: schema.schema_id.clone(), rows, split_labels })
}
