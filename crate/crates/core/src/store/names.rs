//! Name canonicalization for inventors and organisations.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::document::PersonName;
use crate::error::{Error, Result};

/// Trailing legal-form tokens removed from organisation names.
const LEGAL_SUFFIXES: &[&str] = &[
    "INC",
    "INCORPORATED",
    "CORP",
    "CORPORATION",
    "LLC",
    "LTD",
    "LIMITED",
    "CO",
    "COMPANY",
    "GMBH",
    "KK",
    "AG",
    "SA",
    "PLC",
];

const SHIPPED_ALIASES: &str = include_str!("../../data/aliases.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityKind {
    Inventor,
    Organisation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityKey {
    pub kind: EntityKind,
    pub canonical_id: String,
}

impl EntityKey {
    pub fn inventor(id: impl Into<String>) -> Self {
        EntityKey { kind: EntityKind::Inventor, canonical_id: id.into() }
    }

    pub fn organisation(id: impl Into<String>) -> Self {
        EntityKey { kind: EntityKind::Organisation, canonical_id: id.into() }
    }
}

impl fmt::Display for EntityKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            EntityKind::Inventor => "inventor",
            EntityKind::Organisation => "org",
        };
        write!(f, "{kind}/{}", self.canonical_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Manual,
    RuleDerived,
}

/// Result of resolving a raw name: the key plus a human-readable form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedName {
    pub key: EntityKey,
    pub display: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct AliasEntry {
    canonical_id: String,
    provenance: Provenance,
}

#[derive(Deserialize)]
struct AliasFile {
    aliases: Vec<AliasFileEntry>,
}

#[derive(Deserialize)]
struct AliasFileEntry {
    #[serde(rename = "match")]
    pattern: String,
    canonical_id: String,
    display: String,
}

/// Normalized organisation name → canonical id, plus display names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AliasTable {
    entries: BTreeMap<String, AliasEntry>,
    displays: BTreeMap<String, String>,
}

impl AliasTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The manually curated table bundled with the crate.
    pub fn shipped() -> Self {
        Self::from_json(SHIPPED_ALIASES).expect("bundled alias table is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: AliasFile = serde_json::from_str(text)?;
        let mut table = AliasTable::empty();
        for entry in file.aliases {
            table.insert_manual(&entry.pattern, &entry.canonical_id, &entry.display)?;
        }
        Ok(table)
    }

    /// Register a manual alias. Both the raw match string and the display
    /// name resolve to `canonical_id`.
    pub fn insert_manual(&mut self, pattern: &str, canonical_id: &str, display: &str) -> Result<()> {
        if !is_valid_slug(canonical_id) {
            return Err(Error::InvalidArgument(format!(
                "alias canonical_id {canonical_id:?} must be non-empty [a-z0-9-]"
            )));
        }
        for raw in [pattern, display] {
            let key = normalize_org_name(raw)?;
            self.entries
                .insert(key, AliasEntry { canonical_id: canonical_id.to_string(), provenance: Provenance::Manual });
        }
        self.displays.entry(canonical_id.to_string()).or_insert_with(|| display.to_string());
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Canonical ids that have a manual entry.
    pub fn canonical_ids(&self) -> impl Iterator<Item = (&str, &str)> {
        self.displays.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn display_of(&self, canonical_id: &str) -> Option<&str> {
        self.displays.get(canonical_id).map(String::as_str)
    }
}

/// Uppercase, strip punctuation, collapse whitespace.
fn basic_normalize(raw: &str) -> String {
    let upper: String =
        raw.chars().flat_map(char::to_uppercase).filter(|c| c.is_alphanumeric() || c.is_whitespace()).collect();
    upper.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Organisation normalization: the basic pipeline plus repeated removal of
/// trailing legal suffixes. A name made only of suffix tokens keeps its
/// first token.
pub fn normalize_org_name(raw: &str) -> Result<String> {
    let basic = basic_normalize(raw);
    let mut tokens: Vec<&str> = basic.split(' ').filter(|t| !t.is_empty()).collect();
    if tokens.is_empty() {
        return Err(Error::UnnameableEntity(raw.to_string()));
    }
    while tokens.len() > 1 && LEGAL_SUFFIXES.contains(tokens.last().expect("non-empty")) {
        tokens.pop();
    }
    Ok(tokens.join(" "))
}

/// Resolve an organisation name to its canonical entity.
pub fn resolve_organisation(raw: &str, aliases: &AliasTable) -> Result<ResolvedName> {
    let normalized = normalize_org_name(raw)?;
    if let Some(entry) = aliases.entries.get(&normalized) {
        let display = aliases.display_of(&entry.canonical_id).unwrap_or(&normalized).to_string();
        return Ok(ResolvedName {
            key: EntityKey::organisation(entry.canonical_id.clone()),
            display,
            provenance: entry.provenance,
        });
    }
    let slug = slugify(&normalized);
    if slug.is_empty() {
        return Err(Error::UnnameableEntity(raw.to_string()));
    }
    Ok(ResolvedName { key: EntityKey::organisation(slug), display: normalized, provenance: Provenance::RuleDerived })
}

pub fn canonicalize_name(raw: &str, aliases: &AliasTable) -> Result<EntityKey> {
    resolve_organisation(raw, aliases).map(|r| r.key)
}

/// Inventors are matched on normalized full name only.
pub fn resolve_inventor(name: &PersonName) -> Result<ResolvedName> {
    let full = name.full_name();
    let normalized = basic_normalize(&full);
    let slug = slugify(&normalized);
    if slug.is_empty() {
        return Err(Error::UnnameableEntity(full));
    }
    Ok(ResolvedName {
        key: EntityKey::inventor(slug),
        display: normalize_whitespace_only(&full),
        provenance: Provenance::RuleDerived,
    })
}

fn normalize_whitespace_only(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn is_valid_slug(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

/// Lowercase ASCII slug; Latin diacritics folded, other non-ASCII dropped.
pub fn slugify(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if c.is_whitespace() || c == '-' {
            if !out.is_empty() && !out.ends_with('-') {
                out.push('-');
            }
        } else if let Some(folded) = fold_latin(c) {
            out.push_str(folded);
        }
    }
    while out.ends_with('-') {
        out.pop();
    }
    out
}

fn fold_latin(c: char) -> Option<&'static str> {
    Some(match c {
        'à' | 'á' | 'â' | 'ã' | 'ä' | 'å' | 'ā' => "a",
        'æ' => "ae",
        'ç' | 'č' | 'ć' => "c",
        'è' | 'é' | 'ê' | 'ë' | 'ē' | 'ę' => "e",
        'ì' | 'í' | 'î' | 'ï' | 'ī' => "i",
        'ł' => "l",
        'ñ' | 'ń' => "n",
        'ò' | 'ó' | 'ô' | 'õ' | 'ö' | 'ø' | 'ō' => "o",
        'œ' => "oe",
        'ß' => "ss",
        'š' | 'ś' => "s",
        'ù' | 'ú' | 'û' | 'ü' | 'ū' => "u",
        'ý' | 'ÿ' => "y",
        'ž' | 'ź' | 'ż' => "z",
        _ => return None,
    })
}
