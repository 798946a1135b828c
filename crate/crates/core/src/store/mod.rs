//! Single-file patent store with in-memory secondary indexes.
//!
//! File layout: `PATSTORE` magic, one version byte, then a log of records,
//! each `[op: u8][len: u32 LE][json payload]`. The index is rebuilt by
//! replaying the log at open; `compact` rewrites the log with one record
//! per live key.

mod names;
mod stats;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use chrono::Datelike;
use serde::{Deserialize, Serialize};

pub use names::{
    AliasTable, EntityKey, EntityKind, Provenance, ResolvedName, canonicalize_name, is_valid_slug, normalize_org_name,
    resolve_inventor, resolve_organisation, slugify,
};
pub use stats::{Collaborator, GrantLagStats, GroupBy, SummaryStats, percentile_linear};

use crate::document::{DocKind, PatentDocument};
use crate::error::{Error, Result};

pub const STORE_MAGIC: &[u8; 8] = b"PATSTORE";
pub const STORE_VERSION: u8 = 1;
const OP_UPSERT: u8 = 1;
pub const MAX_PAGE_LIMIT: usize = 500;

/// Primary key of a stored record.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordId {
    pub doc_number: String,
    pub doc_kind: DocKind,
}

#[derive(Debug, Clone)]
struct StoredRecord {
    doc: PatentDocument,
    inventors: Vec<ResolvedName>,
    organisations: Vec<ResolvedName>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatentFilter {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_kind: Option<DocKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity: Option<EntityKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cpc_section: Option<char>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year_range: Option<(i32, i32)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PageRequest {
    pub offset: usize,
    pub limit: usize,
}

impl Default for PageRequest {
    fn default() -> Self {
        PageRequest { offset: 0, limit: 50 }
    }
}

/// Compact listing row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatentSummary {
    pub doc_number: String,
    pub doc_kind: DocKind,
    pub kind_code: String,
    pub title: String,
    pub filing_date: chrono::NaiveDate,
    pub publication_date: chrono::NaiveDate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grant_date: Option<chrono::NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grant_lag_days: Option<i64>,
    pub cpc_codes: Vec<String>,
    pub inventors: Vec<String>,
    pub assignees: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatentPage {
    pub total: usize,
    pub offset: usize,
    pub limit: usize,
    pub items: Vec<PatentSummary>,
}

pub struct PatentStore {
    path: Option<PathBuf>,
    writer: Option<BufWriter<File>>,
    aliases: AliasTable,
    records: BTreeMap<RecordId, StoredRecord>,
    links: HashMap<EntityKey, BTreeSet<RecordId>>,
    log_records: usize,
}

impl PatentStore {
    pub fn in_memory(aliases: AliasTable) -> Self {
        PatentStore {
            path: None,
            writer: None,
            aliases,
            records: BTreeMap::new(),
            links: HashMap::new(),
            log_records: 0,
        }
    }

    /// Open (or create) the store file and rebuild the index from its log.
    pub fn open(path: &Path, aliases: AliasTable) -> Result<Self> {
        let mut store = Self::in_memory(aliases);
        store.path = Some(path.to_path_buf());
        let exists = path.exists();
        if exists {
            let mut bytes = Vec::new();
            File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(|e| Error::io(path, e))?;
            let valid_len = store.replay(&bytes)?;
            if valid_len < bytes.len() {
                // A torn trailing record from an interrupted write.
                let f = OpenOptions::new().write(true).open(path).map_err(|e| Error::io(path, e))?;
                f.set_len(valid_len as u64).map_err(|e| Error::io(path, e))?;
            }
        }
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
        if !exists || file.metadata().map_err(|e| Error::io(path, e))?.len() == 0 {
            file.write_all(STORE_MAGIC)
                .and_then(|_| file.write_all(&[STORE_VERSION]))
                .map_err(|e| Error::io(path, e))?;
        }
        store.writer = Some(BufWriter::new(file));
        Ok(store)
    }

    fn replay(&mut self, bytes: &[u8]) -> Result<usize> {
        if bytes.is_empty() {
            return Ok(0);
        }
        if bytes.len() < 9 || &bytes[..8] != STORE_MAGIC {
            return Err(Error::CorruptStore("missing PATSTORE header".into()));
        }
        if bytes[8] != STORE_VERSION {
            return Err(Error::CorruptStore(format!("unsupported store version {}", bytes[8])));
        }
        let mut pos = 9;
        while pos < bytes.len() {
            if pos + 5 > bytes.len() {
                break;
            }
            let op = bytes[pos];
            let len = u32::from_le_bytes(bytes[pos + 1..pos + 5].try_into().expect("4 bytes")) as usize;
            if pos + 5 + len > bytes.len() {
                break;
            }
            if op != OP_UPSERT {
                return Err(Error::CorruptStore(format!("unknown op {op} at byte {pos}")));
            }
            let doc: PatentDocument = serde_json::from_slice(&bytes[pos + 5..pos + 5 + len])
                .map_err(|e| Error::CorruptStore(format!("record at byte {pos}: {e}")))?;
            self.index(doc).map_err(|e| Error::CorruptStore(format!("record at byte {pos}: {e}")))?;
            self.log_records += 1;
            pos += 5 + len;
        }
        Ok(pos)
    }

    pub fn aliases(&self) -> &AliasTable {
        &self.aliases
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Insert or replace the record keyed by (doc_number, doc_kind).
    pub fn upsert_patent(&mut self, doc: PatentDocument) -> Result<RecordId> {
        if let Err(v) = doc.validate() {
            return Err(match v {
                crate::document::InvariantViolation::MissingField(f) => Error::MissingField(f),
                other => Error::InvalidArgument(other.to_string()),
            });
        }
        let id = RecordId { doc_number: doc.doc_number.clone(), doc_kind: doc.doc_kind };
        if self.records.get(&id).is_some_and(|r| r.doc == doc) {
            return Ok(id);
        }
        let payload = serde_json::to_vec(&doc)?;
        self.index(doc)?;
        if let Some(w) = self.writer.as_mut() {
            let path = self.path.as_deref().unwrap_or(Path::new(""));
            let len =
                u32::try_from(payload.len()).map_err(|_| Error::InvalidArgument("document exceeds 4 GiB".into()))?;
            w.write_all(&[OP_UPSERT])
                .and_then(|_| w.write_all(&len.to_le_bytes()))
                .and_then(|_| w.write_all(&payload))
                .map_err(|e| Error::io(path, e))?;
            self.log_records += 1;
        }
        Ok(id)
    }

    fn index(&mut self, doc: PatentDocument) -> Result<()> {
        let id = RecordId { doc_number: doc.doc_number.clone(), doc_kind: doc.doc_kind };
        let mut inventors = Vec::new();
        for person in &doc.inventors {
            if let Ok(r) = resolve_inventor(person)
                && !inventors.iter().any(|x: &ResolvedName| x.key == r.key)
            {
                inventors.push(r);
            }
        }
        let mut organisations = Vec::new();
        for raw in &doc.assignees {
            if let Ok(r) = resolve_organisation(raw, &self.aliases)
                && !organisations.iter().any(|x: &ResolvedName| x.key == r.key)
            {
                organisations.push(r);
            }
        }
        self.unlink(&id);
        for r in inventors.iter().chain(&organisations) {
            self.links.entry(r.key.clone()).or_default().insert(id.clone());
        }
        self.records.insert(id, StoredRecord { doc, inventors, organisations });
        Ok(())
    }

    fn unlink(&mut self, id: &RecordId) {
        let Some(old) = self.records.get(id) else {
            return;
        };
        for r in old.inventors.iter().chain(&old.organisations) {
            if let Some(set) = self.links.get_mut(&r.key) {
                set.remove(id);
                if set.is_empty() {
                    self.links.remove(&r.key);
                }
            }
        }
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some(w) = self.writer.as_mut() {
            let path = self.path.as_deref().unwrap_or(Path::new(""));
            w.flush().map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    /// Rewrite the log so each live record appears exactly once.
    pub fn compact(&mut self) -> Result<()> {
        let Some(path) = self.path.clone() else {
            return Ok(());
        };
        self.flush()?;
        let tmp = path.with_extension("compact.tmp");
        {
            let f = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
            let mut w = BufWriter::new(f);
            w.write_all(STORE_MAGIC).and_then(|_| w.write_all(&[STORE_VERSION])).map_err(|e| Error::io(&tmp, e))?;
            for rec in self.records.values() {
                let payload = serde_json::to_vec(&rec.doc)?;
                w.write_all(&[OP_UPSERT])
                    .and_then(|_| w.write_all(&(payload.len() as u32).to_le_bytes()))
                    .and_then(|_| w.write_all(&payload))
                    .map_err(|e| Error::io(&tmp, e))?;
            }
            w.flush().map_err(|e| Error::io(&tmp, e))?;
        }
        self.writer = None;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        let f = OpenOptions::new().append(true).open(&path).map_err(|e| Error::io(&path, e))?;
        self.writer = Some(BufWriter::new(f));
        self.log_records = self.records.len();
        Ok(())
    }

    /// Number of records in the on-disk log, including superseded ones.
    pub fn log_len(&self) -> usize {
        self.log_records
    }

    pub fn get(&self, id: &RecordId) -> Option<&PatentDocument> {
        self.records.get(id).map(|r| &r.doc)
    }

    /// All records sharing a document number (grant and/or application).
    pub fn get_by_number(&self, doc_number: &str) -> Vec<&PatentDocument> {
        [DocKind::Grant, DocKind::Application]
            .into_iter()
            .filter_map(|kind| self.get(&RecordId { doc_number: doc_number.to_string(), doc_kind: kind }))
            .collect()
    }

    pub fn documents(&self) -> impl Iterator<Item = &PatentDocument> {
        self.records.values().map(|r| &r.doc)
    }

    pub fn entity_exists(&self, key: &EntityKey) -> bool {
        self.links.contains_key(key)
            || (key.kind == EntityKind::Organisation && self.aliases.display_of(&key.canonical_id).is_some())
    }

    /// Best display name for an entity.
    pub fn display_name(&self, key: &EntityKey) -> Option<String> {
        if key.kind == EntityKind::Organisation
            && let Some(d) = self.aliases.display_of(&key.canonical_id)
        {
            return Some(d.to_string());
        }
        let id = self.links.get(key)?.iter().next()?;
        let rec = self.records.get(id)?;
        rec.inventors.iter().chain(&rec.organisations).find(|r| &r.key == key).map(|r| r.display.clone())
    }

    /// Every known entity of a kind, sorted by id.
    pub fn entities(&self, kind: EntityKind) -> Vec<EntityKey> {
        let mut keys: BTreeSet<EntityKey> = self.links.keys().filter(|k| k.kind == kind).cloned().collect();
        if kind == EntityKind::Organisation {
            keys.extend(self.aliases.canonical_ids().map(|(id, _)| EntityKey::organisation(id)));
        }
        keys.into_iter().collect()
    }

    /// Documents linked to an entity, newest filing first.
    pub fn entity_documents(&self, key: &EntityKey) -> Result<Vec<&PatentDocument>> {
        if !self.entity_exists(key) {
            return Err(Error::EntityNotFound(key.to_string()));
        }
        let mut docs: Vec<&PatentDocument> =
            self.links.get(key).into_iter().flatten().filter_map(|id| self.get(id)).collect();
        docs.sort_by(|a, b| listing_order(a, b));
        Ok(docs)
    }

    fn linked(&self, id: &RecordId) -> (&[ResolvedName], &[ResolvedName]) {
        self.records.get(id).map(|r| (r.inventors.as_slice(), r.organisations.as_slice())).unwrap_or((&[], &[]))
    }

    pub fn query_patents(&self, filter: &PatentFilter, page: PageRequest) -> Result<PatentPage> {
        if page.limit == 0 || page.limit > MAX_PAGE_LIMIT {
            return Err(Error::InvalidArgument(format!("limit must be in 1..={MAX_PAGE_LIMIT}")));
        }
        if let Some((start, end)) = filter.year_range
            && start > end
        {
            return Err(Error::InvalidRange(format!("{start} > {end}")));
        }
        let candidates: Box<dyn Iterator<Item = &RecordId>> = match &filter.entity {
            Some(key) => {
                if !self.entity_exists(key) {
                    return Err(Error::EntityNotFound(key.to_string()));
                }
                Box::new(self.links.get(key).into_iter().flatten())
            }
            None => Box::new(self.records.keys()),
        };
        let mut hits: Vec<&PatentDocument> = candidates
            .filter_map(|id| self.get(id))
            .filter(|d| filter.doc_kind.is_none_or(|k| d.doc_kind == k))
            .filter(|d| filter.cpc_section.is_none_or(|s| d.primary_cpc_section() == Some(s.to_ascii_uppercase())))
            .filter(|d| {
                filter.year_range.is_none_or(|(a, b)| {
                    let y = d.filing_date.year();
                    a <= y && y <= b
                })
            })
            .collect();
        hits.sort_by(|a, b| listing_order(a, b));
        let total = hits.len();
        let items = hits.into_iter().skip(page.offset).take(page.limit).map(|d| self.summarize(d)).collect();
        Ok(PatentPage { total, offset: page.offset, limit: page.limit, items })
    }

    pub fn summarize(&self, d: &PatentDocument) -> PatentSummary {
        PatentSummary {
            doc_number: d.doc_number.clone(),
            doc_kind: d.doc_kind,
            kind_code: d.kind_code.clone(),
            title: d.title.clone(),
            filing_date: d.filing_date,
            publication_date: d.publication_date,
            grant_date: d.grant_date,
            grant_lag_days: d.grant_lag_days(),
            cpc_codes: d.cpc_codes.clone(),
            inventors: d.inventors.iter().map(|p| p.full_name()).collect(),
            assignees: d.assignees.clone(),
        }
    }
}

impl Drop for PatentStore {
    fn drop(&mut self) {
        let _ = self.flush();
    }
}

/// Filing date descending, then doc number ascending, then kind.
pub(crate) fn listing_order(a: &PatentDocument, b: &PatentDocument) -> std::cmp::Ordering {
    b.filing_date
        .cmp(&a.filing_date)
        .then_with(|| a.doc_number.cmp(&b.doc_number))
        .then_with(|| a.doc_kind.cmp(&b.doc_kind))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::{Claim, PersonName};
    use chrono::NaiveDate;

    pub(crate) fn grant(number: &str, filed: (i32, u32, u32), granted: (i32, u32, u32)) -> PatentDocument {
        let filing = NaiveDate::from_ymd_opt(filed.0, filed.1, filed.2).unwrap();
        let grant = NaiveDate::from_ymd_opt(granted.0, granted.1, granted.2).unwrap();
        PatentDocument {
            doc_number: number.into(),
            doc_kind: DocKind::Grant,
            kind_code: "B2".into(),
            title: "Widget".into(),
            abstract_text: "A widget.".into(),
            claims: vec![Claim::new(1, "A widget.")],
            description_text: String::new(),
            filing_date: filing,
            publication_date: grant,
            grant_date: Some(grant),
            inventors: vec![PersonName::new("Jane", "Smith")],
            assignees: vec!["International Business Machines Corporation".into()],
            cpc_codes: vec!["G06F17".into()],
            backward_citation_count: 3,
        }
    }

    fn application(number: &str) -> PatentDocument {
        let mut d = grant(number, (2016, 1, 1), (2017, 1, 1));
        d.doc_kind = DocKind::Application;
        d.grant_date = None;
        d.kind_code = "A1".into();
        d
    }

    #[test]
    fn upsert_is_idempotent() {
        let mut s = PatentStore::in_memory(AliasTable::shipped());
        s.upsert_patent(grant("1", (2015, 3, 1), (2018, 6, 15))).unwrap();
        s.upsert_patent(grant("1", (2015, 3, 1), (2018, 6, 15))).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn application_and_grant_coexist() {
        let mut s = PatentStore::in_memory(AliasTable::empty());
        s.upsert_patent(application("9")).unwrap();
        s.upsert_patent(grant("9", (2015, 3, 1), (2018, 6, 15))).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.get_by_number("9").len(), 2);
    }

    #[test]
    fn empty_doc_number_rejected() {
        let mut s = PatentStore::in_memory(AliasTable::empty());
        let err = s.upsert_patent(grant("", (2015, 3, 1), (2018, 6, 15))).unwrap_err();
        assert!(err.to_string().contains("missing required field"));
    }

    #[test]
    fn replacing_a_record_relinks_entities() {
        let mut s = PatentStore::in_memory(AliasTable::empty());
        s.upsert_patent(grant("1", (2015, 3, 1), (2018, 6, 15))).unwrap();
        let mut d = grant("1", (2015, 3, 1), (2018, 6, 15));
        d.inventors = vec![PersonName::new("Ann", "Lee")];
        s.upsert_patent(d).unwrap();
        assert!(!s.entity_exists(&EntityKey::inventor("jane-smith")));
        assert!(s.entity_exists(&EntityKey::inventor("ann-lee")));
    }

    #[test]
    fn persistence_round_trip_and_compaction() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.db");
        {
            let mut s = PatentStore::open(&path, AliasTable::shipped()).unwrap();
            s.upsert_patent(grant("1", (2015, 3, 1), (2018, 6, 15))).unwrap();
            let mut changed = grant("1", (2015, 3, 1), (2018, 6, 15));
            changed.title = "Changed".into();
            s.upsert_patent(changed).unwrap();
            s.upsert_patent(application("2")).unwrap();
        }
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], STORE_MAGIC);
        assert_eq!(bytes[8], STORE_VERSION);
        let mut s = PatentStore::open(&path, AliasTable::shipped()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.log_len(), 3);
        assert_eq!(s.get_by_number("1")[0].title, "Changed");
        s.compact().unwrap();
        drop(s);
        let s = PatentStore::open(&path, AliasTable::shipped()).unwrap();
        assert_eq!(s.log_len(), 2);
        assert_eq!(s.get_by_number("1")[0].title, "Changed");
    }

    #[test]
    fn torn_tail_is_discarded() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.db");
        {
            let mut s = PatentStore::open(&path, AliasTable::empty()).unwrap();
            s.upsert_patent(grant("1", (2015, 3, 1), (2018, 6, 15))).unwrap();
        }
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.extend_from_slice(&[OP_UPSERT, 200, 0, 0, 0, b'{']);
        std::fs::write(&path, &bytes).unwrap();
        let s = PatentStore::open(&path, AliasTable::empty()).unwrap();
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn bad_header_is_corrupt() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.db");
        std::fs::write(&path, b"NOTASTORE").unwrap();
        assert!(matches!(PatentStore::open(&path, AliasTable::empty()), Err(Error::CorruptStore(_))));
    }

    #[test]
    fn query_contracts() {
        let mut s = PatentStore::in_memory(AliasTable::shipped());
        let empty = s.query_patents(&PatentFilter::default(), PageRequest::default()).unwrap();
        assert_eq!(empty.total, 0);
        assert!(empty.items.is_empty());
        s.upsert_patent(grant("2", (2015, 3, 1), (2018, 6, 15))).unwrap();
        s.upsert_patent(grant("1", (2015, 3, 1), (2018, 6, 15))).unwrap();
        s.upsert_patent(grant("3", (2016, 3, 1), (2018, 6, 15))).unwrap();
        let all = s.query_patents(&PatentFilter::default(), PageRequest::default()).unwrap();
        let order: Vec<_> = all.items.iter().map(|p| p.doc_number.as_str()).collect();
        assert_eq!(order, ["3", "1", "2"]);
        let beyond = s.query_patents(&PatentFilter::default(), PageRequest { offset: 10, limit: 5 }).unwrap();
        assert_eq!(beyond.total, 3);
        assert!(beyond.items.is_empty());
        let bad = PatentFilter { year_range: Some((2013, 2012)), ..Default::default() };
        assert!(matches!(s.query_patents(&bad, PageRequest::default()), Err(Error::InvalidRange(_))));
        let unknown = PatentFilter { entity: Some(EntityKey::inventor("nobody")), ..Default::default() };
        assert!(matches!(s.query_patents(&unknown, PageRequest::default()), Err(Error::EntityNotFound(_))));
        let ibm = PatentFilter { entity: Some(EntityKey::organisation("ibm")), ..Default::default() };
        assert_eq!(s.query_patents(&ibm, PageRequest::default()).unwrap().total, 3);
    }
}
