//! Helpers and independent oracles shared by the integration tests and the
//! acceptance runner.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use chrono::Datelike;
use patent_analytics::store::{AliasTable, EntityKey, PatentStore, resolve_inventor, resolve_organisation};
use patent_analytics::synthetic::{CorpusConfig, generate_corpus};
use patent_analytics::{DocKind, PatentDocument};
use serde::Deserialize;

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[derive(Debug, Deserialize)]
pub struct ExpectedQuarantine {
    pub file: String,
    pub byte_offset: u64,
    pub reason: String,
}

#[derive(Debug, Deserialize)]
pub struct Expected {
    pub documents: Vec<PatentDocument>,
    pub quarantine: Vec<ExpectedQuarantine>,
}

pub fn expected(corpus: &str) -> Expected {
    let path = fixtures().join(corpus).join("expected.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Concatenation of chunk texts and rejected byte ranges, in order.
pub fn reconstruct(path: &Path) -> Vec<u8> {
    use patent_analytics::ingest::{ChunkSplitter, SplitItem};
    let bytes = std::fs::read(path).unwrap();
    let mut out = Vec::with_capacity(bytes.len());
    for item in ChunkSplitter::new(bytes.as_slice(), path.display().to_string()) {
        match item.unwrap() {
            SplitItem::Chunk(c) => out.extend_from_slice(c.xml_text.as_bytes()),
            SplitItem::Rejected { byte_offset, byte_len, .. } => {
                out.extend_from_slice(&bytes[byte_offset as usize..(byte_offset + byte_len) as usize])
            }
        }
    }
    out
}

pub fn synthetic_docs(grants: usize, seed: u64) -> Vec<PatentDocument> {
    generate_corpus(&CorpusConfig { seed, grants, ..Default::default() })
}

pub fn store_of(docs: &[PatentDocument]) -> PatentStore {
    let mut store = PatentStore::in_memory(AliasTable::shipped());
    for d in docs {
        store.upsert_patent(d.clone()).unwrap();
    }
    store
}

// ---- ridge oracles -------------------------------------------------------

fn standardize(x: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let n = x.len() as f64;
    let p = x[0].len();
    let mean: Vec<f64> = (0..p).map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sd: Vec<f64> = (0..p).map(|j| (x.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n).sqrt()).collect();
    let z =
        x.iter().map(|r| (0..p).map(|j| if sd[j] > 0.0 { (r[j] - mean[j]) / sd[j] } else { 0.0 }).collect()).collect();
    (z, mean, sd)
}

/// Plain gradient descent on `‖y − Zv − b‖² + λ‖v‖²` over standardized
/// columns, run until the gradient vanishes, then mapped back to raw units.
pub fn ridge_by_gradient_descent(x: &[Vec<f64>], y: &[f64], lambda: f64) -> (Vec<f64>, f64) {
    let (z, mean, sd) = standardize(x);
    let n = z.len();
    let p = z[0].len();
    // Lipschitz bound of the gradient: 2·(‖[Z 1]‖_F² + λ).
    let frob: f64 = z.iter().flatten().map(|v| v * v).sum::<f64>() + n as f64;
    let step = 1.0 / (2.0 * (frob + lambda));
    let mut v = vec![0.0; p];
    let mut b = 0.0;
    for _ in 0..2_000_000 {
        let r: Vec<f64> = (0..n).map(|i| y[i] - b - (0..p).map(|j| z[i][j] * v[j]).sum::<f64>()).collect();
        let gb = -2.0 * r.iter().sum::<f64>();
        let gv: Vec<f64> =
            (0..p).map(|j| -2.0 * (0..n).map(|i| z[i][j] * r[i]).sum::<f64>() + 2.0 * lambda * v[j]).collect();
        let norm = (gb * gb + gv.iter().map(|g| g * g).sum::<f64>()).sqrt();
        if norm < 1e-11 {
            break;
        }
        b -= step * gb;
        for j in 0..p {
            v[j] -= step * gv[j];
        }
    }
    let w: Vec<f64> = (0..p).map(|j| if sd[j] > 0.0 { v[j] / sd[j] } else { 0.0 }).collect();
    let intercept = b - (0..p).map(|j| w[j] * mean[j]).sum::<f64>();
    (w, intercept)
}

/// Ordinary least squares with intercept via Householder QR of `[1 X]`.
pub fn least_squares_qr(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let n = x.len();
    let m = x[0].len() + 1;
    let mut a: Vec<Vec<f64>> = x.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
    let mut rhs = y.to_vec();
    for k in 0..m {
        let norm = (k..n).map(|i| a[i][k] * a[i][k]).sum::<f64>().sqrt();
        let alpha = if a[k][k] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = (k..n).map(|i| a[i][k]).collect();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|t| t * t).sum();
        for j in k..m {
            let s: f64 = (k..n).map(|i| v[i - k] * a[i][j]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..n {
                a[i][j] -= s * v[i - k];
            }
        }
        let s: f64 = (k..n).map(|i| v[i - k] * rhs[i]).sum::<f64>() * 2.0 / vnorm2;
        for i in k..n {
            rhs[i] -= s * v[i - k];
        }
    }
    let mut beta = vec![0.0; m];
    for k in (0..m).rev() {
        let s: f64 = (k + 1..m).map(|j| a[k][j] * beta[j]).sum();
        beta[k] = (rhs[k] - s) / a[k][k];
    }
    (beta[1..].to_vec(), beta[0])
}

// ---- aggregation oracles ---------------------------------------------------

/// Inclusive linear-interpolation percentile, written out longhand.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = p * (v.len() - 1) as f64;
    let below = pos.floor();
    let frac = pos - below;
    let i = below as usize;
    if i + 1 < v.len() { v[i] * (1.0 - frac) + v[i + 1] * frac } else { v[i] }
}

#[derive(Debug, PartialEq)]
pub struct GroupOracle {
    pub key: String,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub p10: f64,
    pub p90: f64,
}

pub fn lag_groups(docs: &[PatentDocument], by_year: bool) -> Vec<GroupOracle> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for d in docs {
        let Some(g) = d.grant_date else { continue };
        let key = if by_year {
            d.filing_date.year().to_string()
        } else {
            match d.cpc_codes.first().and_then(|c| c.chars().next()) {
                Some(c) => c.to_ascii_uppercase().to_string(),
                None => continue,
            }
        };
        groups.entry(key).or_default().push((g - d.filing_date).num_days() as f64);
    }
    groups
        .into_iter()
        .map(|(key, lags)| GroupOracle {
            n: lags.len(),
            mean: lags.iter().sum::<f64>() / lags.len() as f64,
            median: percentile(&lags, 0.5),
            p10: percentile(&lags, 0.1),
            p90: percentile(&lags, 0.9),
            key,
        })
        .collect()
}

/// Entity keys a raw document links to.
pub fn links(d: &PatentDocument, aliases: &AliasTable) -> Vec<EntityKey> {
    let mut keys: Vec<EntityKey> = d.inventors.iter().filter_map(|p| resolve_inventor(p).ok()).map(|r| r.key).collect();
    keys.extend(d.assignees.iter().filter_map(|a| resolve_organisation(a, aliases).ok()).map(|r| r.key));
    keys
}

#[derive(Debug, Default, PartialEq)]
pub struct EntityOracle {
    pub grants: usize,
    pub pending: usize,
    pub per_year_filings: BTreeMap<i32, usize>,
    pub per_year_grants: BTreeMap<i32, usize>,
    pub sections: BTreeMap<char, usize>,
    pub median_lag: Option<f64>,
}

/// Linear scan over the raw records, deduplicated by (doc_number, kind)
/// with the last record winning, as an upsert would.
pub fn entity_oracle(docs: &[PatentDocument], key: &EntityKey, aliases: &AliasTable) -> EntityOracle {
    let mut latest: BTreeMap<(String, DocKind), &PatentDocument> = BTreeMap::new();
    for d in docs {
        latest.insert((d.doc_number.clone(), d.doc_kind), d);
    }
    let granted: HashSet<&str> =
        latest.values().filter(|d| d.doc_kind == DocKind::Grant).map(|d| d.doc_number.as_str()).collect();
    let mut o = EntityOracle::default();
    let mut numbers = HashSet::new();
    let mut lags = Vec::new();
    for d in latest.values() {
        if !links(d, aliases).contains(key) {
            continue;
        }
        if numbers.insert(d.doc_number.clone()) {
            *o.per_year_filings.entry(d.filing_date.year()).or_default() += 1;
            if let Some(c) = d.cpc_codes.first().and_then(|c| c.chars().next()) {
                *o.sections.entry(c.to_ascii_uppercase()).or_default() += 1;
            }
        }
        match d.grant_date {
            Some(g) if d.doc_kind == DocKind::Grant => {
                o.grants += 1;
                *o.per_year_grants.entry(g.year()).or_default() += 1;
                lags.push((g - d.filing_date).num_days() as f64);
            }
            _ => {
                if !granted.contains(d.doc_number.as_str()) {
                    o.pending += 1;
                }
            }
        }
    }
    o.median_lag = (!lags.is_empty()).then(|| percentile(&lags, 0.5));
    o
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

// ---- statistics ------------------------------------------------------------

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|a, b| v[*a].partial_cmp(&v[*b]).unwrap());
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

pub const INLINE_DOCUMENT: &str = r#"{
  "title": "Method for ranking search results with a neural network",
  "abstract_text": "A software method ranks search results using a neural network trained on click logs.",
  "claims": [
    "A computer implemented method comprising: receiving a query; and ranking documents.",
    "The method of claim 1, wherein the ranking uses attention."
  ],
  "description_text": "Search engines return many documents. The ranking model scores each document.",
  "filing_date": "2016-05-17",
  "cpc_codes": ["G06F17"],
  "inventors": [{"first_name": "Mei", "last_name": "Tanaka"}, "Lars Jensen"],
  "assignees": ["IBM Corp."]
}"#;
