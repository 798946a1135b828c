//! Fixed-layout numeric features: engineered counts, derived ratios and a
//! signed hashed n-gram block.

mod hashing;
mod tokenize;

use chrono::Datelike;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use hashing::{Fnv1a64, fnv1a64, hashed_text_features};
pub use tokenize::{NUM_TOKEN, Tokens, tokenize};

use crate::document::PatentDocument;
use crate::error::{Error, Result};

pub const DEFAULT_HASH_DIM: usize = 16384;
pub const DESCRIPTION_TOKEN_CAP: usize = 50_000;
const TOKENIZER_VERSION: &str = "alnum-lower-min2-num-v1";
const CPC_SECTIONS: [char; 9] = ['A', 'B', 'C', 'D', 'E', 'F', 'G', 'H', 'Y'];

pub const ENGINEERED_NAMES: [&str; 19] = [
    "n_claims",
    "n_independent_claims",
    "n_inventors",
    "n_assignees",
    "backward_citation_count",
    "abstract_token_count",
    "description_token_count",
    "title_token_count",
    "filing_year_offset",
    "cpc_section_a",
    "cpc_section_b",
    "cpc_section_c",
    "cpc_section_d",
    "cpc_section_e",
    "cpc_section_f",
    "cpc_section_g",
    "cpc_section_h",
    "cpc_section_y",
    "has_assignee",
];

pub const DERIVED_NAMES: [&str; 5] = [
    "mean_claim_token_length",
    "dependent_claim_ratio",
    "abstract_type_token_ratio",
    "mean_sentence_token_length",
    "claims_to_description_length_ratio",
];

/// Versioned layout of a feature vector. `schema_id` is a content hash of
/// every other field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureSchema {
    pub schema_id: String,
    pub engineered_names: Vec<String>,
    pub derived_names: Vec<String>,
    pub hash_dim: usize,
    pub ngram_orders: Vec<usize>,
}

#[derive(Serialize)]
struct Layout<'a> {
    tokenizer: &'a str,
    engineered_names: &'a [String],
    derived_names: &'a [String],
    hash_dim: usize,
    ngram_orders: &'a [usize],
}

#[derive(Deserialize)]
struct SchemaRepr {
    schema_id: String,
    engineered_names: Vec<String>,
    derived_names: Vec<String>,
    hash_dim: usize,
    ngram_orders: Vec<usize>,
}

impl<'de> Deserialize<'de> for FeatureSchema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = SchemaRepr::deserialize(d)?;
        if repr.engineered_names != ENGINEERED_NAMES || repr.derived_names != DERIVED_NAMES {
            return Err(serde::de::Error::custom("unknown feature layout"));
        }
        let schema = FeatureSchema::new(repr.hash_dim, &repr.ngram_orders).map_err(serde::de::Error::custom)?;
        if schema.schema_id != repr.schema_id {
            return Err(serde::de::Error::custom(format!(
                "schema_id {} does not match layout hash {}",
                repr.schema_id, schema.schema_id
            )));
        }
        Ok(schema)
    }
}

impl Default for FeatureSchema {
    fn default() -> Self {
        FeatureSchema::new(DEFAULT_HASH_DIM, &[1, 2]).expect("default schema is valid")
    }
}

impl FeatureSchema {
    pub fn new(hash_dim: usize, ngram_orders: &[usize]) -> Result<Self> {
        if hash_dim == 0 || !hash_dim.is_power_of_two() {
            return Err(Error::InvalidArgument(format!("hash_dim must be a power of two, got {hash_dim}")));
        }
        let mut orders = ngram_orders.to_vec();
        orders.sort_unstable();
        orders.dedup();
        if orders.is_empty() || orders.iter().any(|n| !(1..=2).contains(n)) {
            return Err(Error::InvalidArgument(format!(
                "ngram_orders must be a non-empty subset of {{1, 2}}, got {ngram_orders:?}"
            )));
        }
        let engineered_names: Vec<String> = ENGINEERED_NAMES.iter().map(|s| s.to_string()).collect();
        let derived_names: Vec<String> = DERIVED_NAMES.iter().map(|s| s.to_string()).collect();
        let layout = Layout {
            tokenizer: TOKENIZER_VERSION,
            engineered_names: &engineered_names,
            derived_names: &derived_names,
            hash_dim,
            ngram_orders: &orders,
        };
        let digest = Sha256::digest(serde_json::to_vec(&layout)?);
        Ok(FeatureSchema {
            schema_id: format!("fs-{}", &hex::encode(digest)[..16]),
            engineered_names,
            derived_names,
            hash_dim,
            ngram_orders: orders,
        })
    }

    pub fn total_dim(&self) -> usize {
        self.engineered_names.len() + self.derived_names.len() + self.hash_dim
    }

    /// Index of the first hashed slot.
    pub fn hashed_offset(&self) -> usize {
        self.engineered_names.len() + self.derived_names.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub schema_id: String,
    pub values: Vec<f64>,
}

impl FeatureVector {
    /// Little-endian bytes of the values, for hashing and determinism checks.
    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }
}

fn count_tokens(text: &str) -> usize {
    Tokens::new(text).count()
}

pub fn engineered_features(doc: &PatentDocument) -> Vec<(&'static str, f64)> {
    let n_claims = doc.claims.len();
    let n_independent = doc.claims.iter().filter(|c| c.is_independent).count();
    let year_offset = (doc.filing_date.year() - 2005).clamp(0, 30);
    let section = doc.primary_cpc_section();
    let description_tokens = Tokens::new(&doc.description_text).take(DESCRIPTION_TOKEN_CAP).count();
    let mut out = vec![
        ("n_claims", n_claims as f64),
        ("n_independent_claims", n_independent as f64),
        ("n_inventors", doc.inventors.len() as f64),
        ("n_assignees", doc.assignees.len() as f64),
        ("backward_citation_count", f64::from(doc.backward_citation_count)),
        ("abstract_token_count", count_tokens(&doc.abstract_text) as f64),
        ("description_token_count", description_tokens as f64),
        ("title_token_count", count_tokens(&doc.title) as f64),
        ("filing_year_offset", f64::from(year_offset)),
    ];
    for (name, s) in ENGINEERED_NAMES[9..18].iter().zip(CPC_SECTIONS) {
        out.push((name, if section == Some(s) { 1.0 } else { 0.0 }));
    }
    out.push(("has_assignee", if doc.assignees.is_empty() { 0.0 } else { 1.0 }));
    out
}

pub fn derived_features(doc: &PatentDocument) -> Vec<(&'static str, f64)> {
    let claim_tokens: Vec<usize> = doc.claims.iter().map(|c| count_tokens(&c.text)).collect();
    let total_claim_tokens: usize = claim_tokens.iter().sum();
    let mean_claim_len =
        if claim_tokens.is_empty() { 0.0 } else { total_claim_tokens as f64 / claim_tokens.len() as f64 };
    let dependent_ratio = if doc.claims.is_empty() {
        0.0
    } else {
        doc.claims.iter().filter(|c| !c.is_independent).count() as f64 / doc.claims.len() as f64
    };

    let abstract_tokens: Vec<_> = Tokens::new(&doc.abstract_text).collect();
    let type_token_ratio = if abstract_tokens.is_empty() {
        0.0
    } else {
        let distinct: std::collections::HashSet<_> = abstract_tokens.iter().collect();
        distinct.len() as f64 / abstract_tokens.len() as f64
    };

    let sentence_lengths: Vec<usize> =
        doc.abstract_text.split(['.', '!', '?']).map(count_tokens).filter(|n| *n > 0).collect();
    let mean_sentence_len = if sentence_lengths.is_empty() {
        0.0
    } else {
        sentence_lengths.iter().sum::<usize>() as f64 / sentence_lengths.len() as f64
    };

    let description_tokens = Tokens::new(&doc.description_text).take(DESCRIPTION_TOKEN_CAP).count();
    let claims_to_description =
        if description_tokens == 0 { 0.0 } else { total_claim_tokens as f64 / description_tokens as f64 };

    vec![
        ("mean_claim_token_length", mean_claim_len),
        ("dependent_claim_ratio", dependent_ratio),
        ("abstract_type_token_ratio", type_token_ratio),
        ("mean_sentence_token_length", mean_sentence_len),
        ("claims_to_description_length_ratio", claims_to_description),
    ]
}

/// Tokens feeding the hashed block: title, abstract, then each claim.
pub fn text_tokens(doc: &PatentDocument) -> Vec<std::borrow::Cow<'_, str>> {
    let mut tokens: Vec<_> = Tokens::new(&doc.title).collect();
    tokens.extend(Tokens::new(&doc.abstract_text));
    for claim in &doc.claims {
        tokens.extend(Tokens::new(&claim.text));
    }
    tokens
}

pub fn assemble_features(doc: &PatentDocument, schema: &FeatureSchema) -> FeatureVector {
    let mut values = Vec::with_capacity(schema.total_dim());
    values.extend(engineered_features(doc).into_iter().map(|(_, v)| v));
    values.extend(derived_features(doc).into_iter().map(|(_, v)| v));
    let offset = values.len();
    values.resize(schema.total_dim(), 0.0);
    hashing::accumulate(&text_tokens(doc), schema.hash_dim, &schema.ngram_orders, &mut values[offset..]);
    FeatureVector { schema_id: schema.schema_id.clone(), values }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{Claim, DocKind, PersonName};
    use chrono::NaiveDate;

    fn doc() -> PatentDocument {
        PatentDocument {
            doc_number: "7654321".into(),
            doc_kind: DocKind::Grant,
            kind_code: "B2".into(),
            title: "Widget assembly".into(),
            abstract_text: "alpha beta alpha. Gamma delta!".into(),
            claims: vec![
                Claim::new(1, "A widget comprising a frame and a lever."),
                Claim::new(2, "The widget of claim 1 wherein the lever is steel."),
                Claim::new(3, "A method of making a widget."),
            ],
            description_text: "The widget is described here in detail.".into(),
            filing_date: NaiveDate::from_ymd_opt(2015, 3, 1).unwrap(),
            publication_date: NaiveDate::from_ymd_opt(2018, 6, 15).unwrap(),
            grant_date: NaiveDate::from_ymd_opt(2018, 6, 15),
            inventors: vec![PersonName::new("Jane", "Smith"), PersonName::new("Raj", "Patel")],
            assignees: vec!["ACME Inc".into()],
            cpc_codes: vec!["G06F17".into(), "H04L29".into()],
            backward_citation_count: 4,
        }
    }

    #[test]
    fn engineered_fixture_values() {
        let f: std::collections::HashMap<_, _> = engineered_features(&doc()).into_iter().collect();
        assert_eq!(f["n_claims"], 3.0);
        assert_eq!(f["n_independent_claims"], 2.0);
        assert_eq!(f["n_inventors"], 2.0);
        assert_eq!(f["filing_year_offset"], 10.0);
        assert_eq!(f["cpc_section_g"], 1.0);
        assert_eq!(f["cpc_section_h"], 0.0);
        assert_eq!(f["has_assignee"], 1.0);
        assert_eq!(engineered_features(&doc()).len(), ENGINEERED_NAMES.len());
    }

    #[test]
    fn empty_application_features() {
        let mut d = doc();
        d.doc_kind = DocKind::Application;
        d.claims.clear();
        d.cpc_codes.clear();
        let e = engineered_features(&d);
        assert_eq!(e[0].1, 0.0);
        assert_eq!(e[1].1, 0.0);
        assert!(e[9..18].iter().all(|(_, v)| *v == 0.0));
        let der = derived_features(&d);
        assert_eq!(der[0].1, 0.0);
        assert_eq!(der[1].1, 0.0);
    }

    #[test]
    fn derived_values() {
        let mut d = doc();
        d.claims = vec![Claim::new(1, "word ".repeat(10)), Claim::new(2, "word ".repeat(20))];
        d.abstract_text = "alpha beta alpha".into();
        let der: std::collections::HashMap<_, _> = derived_features(&d).into_iter().collect();
        assert_eq!(der["mean_claim_token_length"], 15.0);
        assert!((der["abstract_type_token_ratio"] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(der["mean_sentence_token_length"], 3.0);
    }

    #[test]
    fn year_offset_is_clamped() {
        let mut d = doc();
        d.filing_date = NaiveDate::from_ymd_opt(1999, 1, 1).unwrap();
        assert_eq!(engineered_features(&d)[8].1, 0.0);
        d.filing_date = NaiveDate::from_ymd_opt(2099, 1, 1).unwrap();
        assert_eq!(engineered_features(&d)[8].1, 30.0);
    }

    #[test]
    fn layout_and_norm() {
        let schema = FeatureSchema::new(1024, &[1, 2]).unwrap();
        let v = assemble_features(&doc(), &schema);
        assert_eq!(v.values.len(), 19 + 5 + 1024);
        assert_eq!(v.schema_id, schema.schema_id);
        let norm: f64 = v.values[schema.hashed_offset()..].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-12);
        assert_eq!(v, assemble_features(&doc(), &schema));
    }

    #[test]
    fn empty_text_leaves_hashed_block_zero() {
        let mut d = doc();
        d.title.clear();
        d.abstract_text.clear();
        d.description_text.clear();
        d.claims = vec![Claim::new(1, "")];
        let schema = FeatureSchema::new(64, &[1, 2]).unwrap();
        let v = assemble_features(&d, &schema);
        assert!(v.values[schema.hashed_offset()..].iter().all(|x| *x == 0.0));
        assert_eq!(v.values[0], 1.0);
    }

    #[test]
    fn schema_id_tracks_layout() {
        let a = FeatureSchema::new(1024, &[1, 2]).unwrap();
        let b = FeatureSchema::new(2048, &[1, 2]).unwrap();
        let c = FeatureSchema::new(1024, &[1]).unwrap();
        let a2 = FeatureSchema::new(1024, &[2, 1, 1]).unwrap();
        assert_ne!(a.schema_id, b.schema_id);
        assert_ne!(a.schema_id, c.schema_id);
        assert_eq!(a.schema_id, a2.schema_id);
        assert!(FeatureSchema::new(1000, &[1]).is_err());
        assert!(FeatureSchema::new(1024, &[3]).is_err());
        let json = serde_json::to_string(&a).unwrap();
        let back: FeatureSchema = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        let tampered = json.replace(&a.schema_id, "fs-0000000000000000");
        assert!(serde_json::from_str::<FeatureSchema>(&tampered).is_err());
    }
}
