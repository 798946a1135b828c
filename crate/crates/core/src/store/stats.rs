use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::Datelike;
use serde::{Deserialize, Serialize};

use super::{EntityKey, EntityKind, PatentStore};
use crate::document::DocKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub entity: EntityKey,
    pub display_name: String,
    pub total_grants: usize,
    pub total_pending_applications: usize,
    pub per_year_filings: BTreeMap<i32, usize>,
    pub per_year_grants: BTreeMap<i32, usize>,
    pub cpc_section_histogram: BTreeMap<char, usize>,
    pub top_collaborators: Vec<Collaborator>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub median_grant_lag_days: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Collaborator {
    pub entity: EntityKey,
    pub shared_patents: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrantLagStats {
    pub group_key: String,
    pub n: usize,
    pub mean_days: f64,
    pub median_days: f64,
    pub p10_days: f64,
    pub p90_days: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    FilingYear,
    CpcSection,
}

const TOP_COLLABORATORS: usize = 10;

/// Inclusive linear-interpolation percentile of sorted data, `p` in [0, 1].
pub fn percentile_linear(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl PatentStore {
    pub fn entity_summary(&self, key: &EntityKey) -> Result<SummaryStats> {
        let docs = self.entity_documents(key)?;
        let mut stats = SummaryStats {
            entity: key.clone(),
            display_name: self.display_name(key).unwrap_or_else(|| key.canonical_id.clone()),
            total_grants: 0,
            total_pending_applications: 0,
            per_year_filings: BTreeMap::new(),
            per_year_grants: BTreeMap::new(),
            cpc_section_histogram: BTreeMap::new(),
            top_collaborators: Vec::new(),
            median_grant_lag_days: None,
        };
        let mut lags = Vec::new();
        // Filings, sections and collaborations count each doc_number once,
        // so a grant and its published application are one invention.
        let mut collaborators: HashMap<&EntityKey, HashSet<&str>> = HashMap::new();
        let mut seen: HashSet<&str> = HashSet::new();
        for doc in &docs {
            if seen.insert(&doc.doc_number) {
                *stats.per_year_filings.entry(doc.filing_date.year()).or_default() += 1;
                if let Some(section) = doc.primary_cpc_section() {
                    *stats.cpc_section_histogram.entry(section).or_default() += 1;
                }
            }
            match doc.doc_kind {
                DocKind::Grant => {
                    stats.total_grants += 1;
                    if let Some(g) = doc.grant_date {
                        *stats.per_year_grants.entry(g.year()).or_default() += 1;
                    }
                    if let Some(lag) = doc.grant_lag_days() {
                        debug_assert!(lag >= 0, "stored grant with negative lag");
                        lags.push(lag as f64);
                    }
                }
                DocKind::Application => {
                    let granted = self.get_by_number(&doc.doc_number).iter().any(|d| d.doc_kind == DocKind::Grant);
                    if !granted {
                        stats.total_pending_applications += 1;
                    }
                }
            }
            let id = super::RecordId { doc_number: doc.doc_number.clone(), doc_kind: doc.doc_kind };
            let (inventors, _) = self.linked(&id);
            for r in inventors {
                if &r.key != key {
                    collaborators.entry(&r.key).or_default().insert(&doc.doc_number);
                }
            }
        }
        let mut ranked: Vec<(EntityKey, usize)> =
            collaborators.into_iter().map(|(k, numbers)| (k.clone(), numbers.len())).collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.canonical_id.cmp(&b.0.canonical_id)));
        ranked.truncate(TOP_COLLABORATORS);
        stats.top_collaborators =
            ranked.into_iter().map(|(entity, shared_patents)| Collaborator { entity, shared_patents }).collect();
        if !lags.is_empty() {
            lags.sort_by(f64::total_cmp);
            stats.median_grant_lag_days = Some(percentile_linear(&lags, 0.5));
        }
        Ok(stats)
    }

    pub fn grant_lag_aggregates(&self, group_by: GroupBy) -> Vec<GrantLagStats> {
        let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for doc in self.documents() {
            let Some(lag) = doc.grant_lag_days() else {
                continue;
            };
            let key = match group_by {
                GroupBy::FilingYear => doc.filing_date.year().to_string(),
                GroupBy::CpcSection => match doc.primary_cpc_section() {
                    Some(s) => s.to_string(),
                    None => continue,
                },
            };
            groups.entry(key).or_default().push(lag as f64);
        }
        groups
            .into_iter()
            .map(|(group_key, mut lags)| {
                lags.sort_by(f64::total_cmp);
                let n = lags.len();
                GrantLagStats {
                    group_key,
                    n,
                    mean_days: lags.iter().sum::<f64>() / n as f64,
                    median_days: percentile_linear(&lags, 0.5),
                    p10_days: percentile_linear(&lags, 0.1),
                    p90_days: percentile_linear(&lags, 0.9),
                }
            })
            .collect()
    }

    /// Batch form of `entity_summary` preserving request order.
    pub fn organisation_summaries(&self, ids: &[String]) -> Vec<Result<SummaryStats>> {
        ids.iter().map(|id| self.entity_summary(&EntityKey::organisation(id.clone()))).collect()
    }
}

impl GroupBy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "filing_year" => Ok(GroupBy::FilingYear),
            "cpc_section" => Ok(GroupBy::CpcSection),
            other => Err(Error::InvalidArgument(format!("group_by must be filing_year or cpc_section, got {other:?}"))),
        }
    }
}

impl EntityKind {
    pub fn parse_segment(s: &str) -> Option<Self> {
        match s {
            "inventors" | "inventor" => Some(EntityKind::Inventor),
            "orgs" | "org" | "organisations" => Some(EntityKind::Organisation),
            _ => None,
        }
    }
}
