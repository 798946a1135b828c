use std::collections::HashSet;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DocKind {
    Grant,
    Application,
}

impl fmt::Display for DocKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DocKind::Grant => f.write_str("Grant"),
            DocKind::Application => f.write_str("Application"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub number: u32,
    pub text: String,
    pub is_independent: bool,
}

impl Claim {
    pub fn new(number: u32, text: impl Into<String>) -> Self {
        let text = text.into();
        let is_independent = !references_other_claim(&text);
        Claim { number, text, is_independent }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct PersonName {
    #[serde(default)]
    pub first_name: String,
    #[serde(default)]
    pub last_name: String,
}

impl PersonName {
    pub fn new(first_name: impl Into<String>, last_name: impl Into<String>) -> Self {
        PersonName { first_name: first_name.into(), last_name: last_name.into() }
    }

    pub fn full_name(&self) -> String {
        match (self.first_name.is_empty(), self.last_name.is_empty()) {
            (false, false) => format!("{} {}", self.first_name, self.last_name),
            (true, _) => self.last_name.clone(),
            (_, true) => self.first_name.clone(),
        }
    }
}

/// A normalized patent grant or published application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatentDocument {
    pub doc_number: String,
    pub doc_kind: DocKind,
    pub kind_code: String,
    pub title: String,
    pub abstract_text: String,
    pub claims: Vec<Claim>,
    pub description_text: String,
    pub filing_date: NaiveDate,
    pub publication_date: NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grant_date: Option<NaiveDate>,
    pub inventors: Vec<PersonName>,
    pub assignees: Vec<String>,
    pub cpc_codes: Vec<String>,
    pub backward_citation_count: u32,
}

/// Why a document breaks the `PatentDocument` invariants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InvariantViolation {
    MissingField(&'static str),
    InvalidDateOrdering { filing: NaiveDate, grant: NaiveDate },
    DuplicateClaim(u32),
}

impl fmt::Display for InvariantViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvariantViolation::MissingField(name) => write!(f, "missing required field: {name}"),
            InvariantViolation::InvalidDateOrdering { filing, grant } => {
                write!(f, "invalid date ordering: grant {grant} precedes filing {filing}")
            }
            InvariantViolation::DuplicateClaim(n) => write!(f, "duplicate claim number {n}"),
        }
    }
}

impl PatentDocument {
    pub fn validate(&self) -> Result<(), InvariantViolation> {
        if self.doc_number.is_empty() {
            return Err(InvariantViolation::MissingField("doc_number"));
        }
        if self.doc_kind == DocKind::Grant {
            let Some(grant) = self.grant_date else {
                return Err(InvariantViolation::MissingField("grant_date"));
            };
            if self.claims.is_empty() {
                return Err(InvariantViolation::MissingField("claims"));
            }
            if grant < self.filing_date {
                return Err(InvariantViolation::InvalidDateOrdering { filing: self.filing_date, grant });
            }
        }
        let mut seen = HashSet::with_capacity(self.claims.len());
        for claim in &self.claims {
            if !seen.insert(claim.number) {
                return Err(InvariantViolation::DuplicateClaim(claim.number));
            }
        }
        Ok(())
    }

    /// Calendar days from filing to grant, when granted.
    pub fn grant_lag_days(&self) -> Option<i64> {
        self.grant_date.map(|g| g.signed_duration_since(self.filing_date).num_days())
    }

    /// First letter of the first CPC code.
    pub fn primary_cpc_section(&self) -> Option<char> {
        self.cpc_codes.first().and_then(|c| c.chars().next()).map(|c| c.to_ascii_uppercase())
    }
}

/// Strip leading zeros and internal whitespace, uppercase.
pub fn normalize_doc_number(raw: &str) -> String {
    let compact: String = raw.chars().filter(|c| !c.is_whitespace()).flat_map(char::to_uppercase).collect();
    let trimmed = compact.trim_start_matches('0');
    if trimmed.is_empty() && !compact.is_empty() { "0".to_string() } else { trimmed.to_string() }
}

/// Collapse every run of whitespace into a single space and trim the ends.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Dependent-claim heuristic: "claim" (case-insensitive, optional plural)
/// followed by a digit within the first 200 characters.
pub fn references_other_claim(text: &str) -> bool {
    let head: String = text.chars().take(200).collect::<String>().to_lowercase();
    let bytes = head.as_bytes();
    let mut from = 0;
    while let Some(pos) = head[from..].find("claim") {
        let mut i = from + pos + "claim".len();
        if bytes.get(i) == Some(&b's') {
            i += 1;
        }
        while bytes.get(i).is_some_and(|b| b.is_ascii_whitespace()) {
            i += 1;
        }
        if bytes.get(i).is_some_and(u8::is_ascii_digit) {
            return true;
        }
        from += pos + 1;
    }
    false
}

/// Parse an 8-digit `YYYYMMDD` date.
pub fn parse_compact_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    if raw.len() != 8 || !raw.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let year = raw[0..4].parse().ok()?;
    let month = raw[4..6].parse().ok()?;
    let day = raw[6..8].parse().ok()?;
    NaiveDate::from_ymd_opt(year, month, day)
}
