//! Schema-tolerant parser for USPTO full-text grant and application XML.
//!
//! Works on the event stream with a stack of element names; nothing is
//! materialized beyond the output record.

use quick_xml::Reader;
use quick_xml::events::{BytesStart, Event};

use crate::document::{
    Claim, DocKind, InvariantViolation, PatentDocument, PersonName, normalize_doc_number, normalize_whitespace,
    parse_compact_date,
};
use crate::error::{DocumentError, DocumentErrorKind};
use crate::ingest::RawDocumentChunk;

const GRANT_ROOT: &str = "us-patent-grant";
const APPLICATION_ROOT: &str = "us-patent-application";

/// Tags that format text inline; every other tag boundary acts as a word break.
const INLINE_TAGS: &[&str] = &["b", "i", "u", "o", "sup", "sub", "sup2", "sub2", "smallcaps", "claim-ref", "figref"];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Region {
    None,
    Title,
    Abstract,
    Description,
    Claim,
}

#[derive(Default)]
struct PartyBuilder {
    first: String,
    last: String,
    org: String,
}

impl PartyBuilder {
    fn person(&self) -> Option<PersonName> {
        let p = PersonName::new(self.first.trim(), self.last.trim());
        (!p.first_name.is_empty() || !p.last_name.is_empty()).then_some(p)
    }
}

#[derive(Default)]
struct CpcBuilder {
    section: String,
    class: String,
    subclass: String,
    main_group: String,
}

#[derive(Default)]
struct Builder {
    pub_doc_number: Option<String>,
    pub_kind: String,
    pub_date: Option<String>,
    filing_date: Option<String>,
    title: String,
    abstract_text: String,
    description: String,
    claims: Vec<Claim>,
    claim_num: Option<u32>,
    claim_text: String,
    inventors: Vec<PersonName>,
    applicant_inventors: Vec<PersonName>,
    assignees: Vec<String>,
    cpc_codes: Vec<String>,
    citations: u32,
    party: Option<(PartyRole, PartyBuilder)>,
    cpc: Option<CpcBuilder>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PartyRole {
    Inventor,
    ApplicantInventor,
    Assignee,
}

/// Parse one chunk into a `PatentDocument`, validating its invariants.
pub fn parse_patent_document(chunk: &RawDocumentChunk) -> Result<PatentDocument, DocumentError> {
    let fail = |kind| DocumentError { source_file: chunk.source_file.clone(), byte_offset: chunk.byte_offset, kind };
    let (kind, b) = collect(&chunk.xml_text).map_err(fail)?;
    build(kind, b).map_err(fail)
}

fn collect(xml: &str) -> Result<(DocKind, Builder), DocumentErrorKind> {
    // A chunk may carry whitespace that preceded the first declaration.
    let mut reader = Reader::from_str(xml.trim_start());
    reader.config_mut().expand_empty_elements = true;

    let mut stack: Vec<String> = Vec::with_capacity(16);
    let mut doc_kind = None;
    let mut b = Builder::default();

    loop {
        let event = reader.read_event().map_err(|e| DocumentErrorKind::Malformed(e.to_string()))?;
        match event {
            Event::Start(e) => {
                let name = local_name(&e);
                if stack.is_empty() {
                    doc_kind = Some(match name.as_str() {
                        GRANT_ROOT => DocKind::Grant,
                        APPLICATION_ROOT => DocKind::Application,
                        _ => return Err(DocumentErrorKind::UnsupportedType(name)),
                    });
                }
                word_break(&mut b, &stack, &name);
                stack.push(name);
                open_element(&mut b, &stack, &e);
            }
            Event::End(_) => {
                close_element(&mut b, &stack);
                let name = stack.pop().unwrap_or_default();
                word_break(&mut b, &stack, &name);
            }
            Event::Text(t) => text(&mut b, &stack, &t.xml10_content()),
            Event::CData(t) => {
                let raw = t.into_inner();
                text(&mut b, &stack, &raw);
            }
            Event::GeneralRef(r) => {
                let resolved = match r.resolve_char_ref() {
                    Ok(Some(c)) => Some(c),
                    Ok(None) => match r.xml10_content().as_ref() {
                        "amp" => Some('&'),
                        "lt" => Some('<'),
                        "gt" => Some('>'),
                        "quot" => Some('"'),
                        "apos" => Some('\''),
                        _ => None,
                    },
                    Err(_) => None,
                };
                if let Some(c) = resolved {
                    text(&mut b, &stack, c.encode_utf8(&mut [0; 4]));
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    match doc_kind {
        Some(kind) if stack.is_empty() => Ok((kind, b)),
        Some(_) => Err(DocumentErrorKind::Truncated),
        None => Err(DocumentErrorKind::UnsupportedType("<none>".into())),
    }
}

fn local_name(e: &BytesStart<'_>) -> String {
    e.local_name().as_ref().to_string()
}

fn attr(e: &BytesStart<'_>, key: &str) -> Option<String> {
    e.try_get_attribute(key)
        .ok()
        .flatten()
        .and_then(|a| a.normalized_value(quick_xml::XmlVersion::Implicit1_0).ok().map(|v| v.into_owned()))
}

fn is_biblio(stack: &[String]) -> bool {
    stack.get(1).is_some_and(|s| s.starts_with("us-bibliographic-data"))
}

fn region(stack: &[String]) -> Region {
    match stack.get(1).map(String::as_str) {
        Some("abstract") => Region::Abstract,
        Some("description") => Region::Description,
        Some("claims") if stack.get(2).is_some_and(|s| s == "claim") => Region::Claim,
        _ if is_biblio(stack) && stack.get(2).is_some_and(|s| s == "invention-title") => Region::Title,
        _ => Region::None,
    }
}

fn region_buf(b: &mut Builder, region: Region) -> Option<&mut String> {
    match region {
        Region::None => None,
        Region::Title => Some(&mut b.title),
        Region::Abstract => Some(&mut b.abstract_text),
        Region::Description => Some(&mut b.description),
        Region::Claim => Some(&mut b.claim_text),
    }
}

fn word_break(b: &mut Builder, stack: &[String], tag: &str) {
    if INLINE_TAGS.contains(&tag) {
        return;
    }
    if let Some(buf) = region_buf(b, region(stack))
        && !buf.ends_with(' ')
        && !buf.is_empty()
    {
        buf.push(' ');
    }
}

fn path_is(stack: &[String], tail: &[&str]) -> bool {
    is_biblio(stack) && stack.len() == tail.len() + 2 && stack[2..].iter().zip(tail).all(|(a, b)| a == b)
}

fn open_element(b: &mut Builder, stack: &[String], e: &BytesStart<'_>) {
    let name = stack.last().map(String::as_str).unwrap_or_default();
    let parent = stack.len().checked_sub(2).map(|i| stack[i].as_str());
    if stack.len() == 3 && stack[1] == "claims" && name == "claim" {
        b.claim_num = attr(e, "num").and_then(|n| n.trim().trim_start_matches('0').parse().ok());
        b.claim_text.clear();
        return;
    }
    if !is_biblio(stack) {
        return;
    }
    match name {
        "inventor" if parent == Some("inventors") => {
            b.party = Some((PartyRole::Inventor, PartyBuilder::default()));
        }
        "applicant" | "us-applicant" if attr(e, "app-type").is_some_and(|t| t.contains("inventor")) => {
            b.party = Some((PartyRole::ApplicantInventor, PartyBuilder::default()));
        }
        "assignee" => b.party = Some((PartyRole::Assignee, PartyBuilder::default())),
        "classification-cpc" if stack.iter().any(|s| s == "classifications-cpc") => {
            b.cpc = Some(CpcBuilder::default());
        }
        "us-citation" | "citation" if stack.iter().any(|s| s == "us-references-cited" || s == "references-cited") => {
            b.citations += 1;
        }
        _ => {}
    }
}

fn close_element(b: &mut Builder, stack: &[String]) {
    let name = stack.last().map(String::as_str).unwrap_or_default();
    if stack.len() == 3 && stack[1] == "claims" && name == "claim" {
        let number = b.claim_num.take().unwrap_or(b.claims.len() as u32 + 1);
        let text = normalize_whitespace(&b.claim_text);
        b.claims.push(Claim::new(number, text));
        b.claim_text.clear();
        return;
    }
    match name {
        "inventor" | "applicant" | "us-applicant" | "assignee" => {
            let Some((role, party)) = b.party.take() else {
                return;
            };
            match role {
                PartyRole::Inventor => b.inventors.extend(party.person()),
                PartyRole::ApplicantInventor => b.applicant_inventors.extend(party.person()),
                PartyRole::Assignee => {
                    let org = normalize_whitespace(&party.org);
                    let name =
                        if org.is_empty() { party.person().map(|p| p.full_name()).unwrap_or_default() } else { org };
                    if !name.is_empty() {
                        b.assignees.push(name);
                    }
                }
            }
        }
        "classification-cpc" => {
            if let Some(c) = b.cpc.take() {
                let code =
                    format!("{}{}{}{}", c.section.trim(), c.class.trim(), c.subclass.trim(), c.main_group.trim())
                        .to_uppercase();
                push_cpc(&mut b.cpc_codes, code);
            }
        }
        _ => {}
    }
}

fn push_cpc(codes: &mut Vec<String>, code: String) {
    if code.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && !codes.contains(&code) {
        codes.push(code);
    }
}

fn text(b: &mut Builder, stack: &[String], content: &str) {
    if let Some(buf) = region_buf(b, region(stack)) {
        buf.push_str(content);
        return;
    }
    let name = stack.last().map(String::as_str).unwrap_or_default();
    if path_is(stack, &["publication-reference", "document-id", "doc-number"]) {
        b.pub_doc_number.get_or_insert_default().push_str(content);
    } else if path_is(stack, &["publication-reference", "document-id", "kind"]) {
        b.pub_kind.push_str(content);
    } else if path_is(stack, &["publication-reference", "document-id", "date"]) {
        b.pub_date.get_or_insert_default().push_str(content);
    } else if path_is(stack, &["application-reference", "document-id", "date"]) {
        b.filing_date.get_or_insert_default().push_str(content);
    } else if name == "classification-cpc-text" && is_biblio(stack) {
        let head = content.split('/').next().unwrap_or_default();
        let code: String = head.chars().filter(|c| !c.is_whitespace()).collect();
        push_cpc(&mut b.cpc_codes, code.to_uppercase());
    } else if let Some((_, party)) = b.party.as_mut() {
        match name {
            "first-name" => party.first.push_str(content),
            "last-name" => party.last.push_str(content),
            "orgname" => party.org.push_str(content),
            _ => {}
        }
    } else if let Some(cpc) = b.cpc.as_mut() {
        let parent = stack.len().checked_sub(2).map(|i| stack[i].as_str());
        if parent == Some("classification-cpc") {
            match name {
                "section" => cpc.section.push_str(content),
                "class" => cpc.class.push_str(content),
                "subclass" => cpc.subclass.push_str(content),
                "main-group" => cpc.main_group.push_str(content),
                _ => {}
            }
        }
    }
}

fn build(doc_kind: DocKind, b: Builder) -> Result<PatentDocument, DocumentErrorKind> {
    let doc_number = normalize_doc_number(b.pub_doc_number.as_deref().unwrap_or_default());
    if doc_number.is_empty() {
        return Err(DocumentErrorKind::MissingField("doc-number"));
    }
    let date = |raw: Option<String>, field: &'static str| {
        let raw = raw.ok_or(DocumentErrorKind::MissingField(field))?;
        let raw = raw.trim();
        if raw.is_empty() {
            return Err(DocumentErrorKind::MissingField(field));
        }
        parse_compact_date(raw).ok_or_else(|| DocumentErrorKind::InvalidDate(raw.to_string()))
    };
    let filing_date = date(b.filing_date, "filing date")?;
    let publication_date = date(b.pub_date, "publication date")?;
    let grant_date = (doc_kind == DocKind::Grant).then_some(publication_date);

    let inventors = if b.inventors.is_empty() { b.applicant_inventors } else { b.inventors };

    let doc = PatentDocument {
        doc_number,
        doc_kind,
        kind_code: b.pub_kind.trim().to_string(),
        title: normalize_whitespace(&b.title),
        abstract_text: normalize_whitespace(&b.abstract_text),
        claims: b.claims,
        description_text: normalize_whitespace(&b.description),
        filing_date,
        publication_date,
        grant_date,
        inventors,
        assignees: b.assignees,
        cpc_codes: b.cpc_codes,
        backward_citation_count: b.citations,
    };
    doc.validate().map_err(|v| match v {
        InvariantViolation::MissingField(f) => DocumentErrorKind::MissingField(f),
        InvariantViolation::InvalidDateOrdering { filing, grant } => {
            DocumentErrorKind::InvalidDateOrdering { filing: filing.to_string(), grant: grant.to_string() }
        }
        InvariantViolation::DuplicateClaim(n) => DocumentErrorKind::DuplicateClaim(n),
    })?;
    Ok(doc)
}
