//! Seeded generators for synthetic corpora and regression problems.
//!
//! The corpus generator renders USPTO-style XML whose text, claim count and
//! CPC section carry signal about the grant lag, so the learners have
//! something to find.

use chrono::{Duration, NaiveDate};
use quick_xml::escape::escape;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::document::{Claim, DocKind, PatentDocument, PersonName};

const FIRST_NAMES: &[&str] = &[
    "Alice", "Bilal", "Chen", "Dana", "Emeka", "Farah", "Goran", "Hiro", "Ines", "Jonas", "Kavya", "Lars", "Mei",
    "Nadia", "Omar", "Priya", "Rafael", "Sofia", "Tomas", "Yuki",
];
const LAST_NAMES: &[&str] = &[
    "Anders", "Bauer", "Costa", "Dubois", "Eriksen", "Fischer", "Garcia", "Haddad", "Ito", "Jensen", "Kowalski",
    "Lopez", "Müller", "Nakamura", "Okafor", "Petrov", "Quinn", "Rossi", "Singh", "Tanaka",
];
const ORGS: &[&str] = &[
    "International Business Machines Corporation",
    "IBM Corp.",
    "Microsoft Technology Licensing, LLC",
    "Google LLC",
    "Intel Corporation",
    "Samsung Electronics Co., Ltd.",
    "Qualcomm Incorporated",
    "Acme Widgets, Inc.",
    "Northwind Robotics GmbH",
    "Blue Harbor Medical Devices Ltd.",
    "Orion Photonics AG",
    "Keystone Agritech Co.",
];
const SECTIONS: &[(char, &str, i64)] = &[
    ('A', "A61B5", 60),
    ('B', "B65D81", -40),
    ('C', "C07D213", 120),
    ('E', "E04B1", -80),
    ('F', "F16H57", -20),
    ('G', "G06F17", 320),
    ('H', "H04L29", 220),
    ('Y', "Y02E10", 0),
];
const SLOW_TOPICS: &[&str] = &[
    "software method for ranking search results using a neural network",
    "computer implemented business process for electronic payment authorization",
    "algorithm for compressing video streams over a wireless network",
];
const FAST_TOPICS: &[&str] = &[
    "mechanical fastener with a spring loaded latch",
    "container lid having a hinged pour spout",
    "hand tool with an ergonomic grip and ratchet",
];
const NEUTRAL_TOPICS: &[&str] = &[
    "sensor assembly for measuring fluid flow in a pipe",
    "composition comprising a stabilized polymer blend",
    "apparatus for cooling a battery module",
];
const FILLER: &[&str] = &[
    "the",
    "housing",
    "is",
    "coupled",
    "to",
    "a",
    "frame",
    "and",
    "the",
    "controller",
    "receives",
    "a",
    "signal",
    "from",
    "the",
    "sensor",
    "wherein",
    "each",
    "member",
    "includes",
    "an",
    "opening",
    "for",
    "receiving",
    "fluid",
    "data",
    "module",
    "layer",
    "surface",
    "axis",
];

#[derive(Debug, Clone, Copy)]
pub struct CorpusConfig {
    pub seed: u64,
    pub grants: usize,
    /// Applications that never receive a grant.
    pub pending_applications: usize,
    /// Fraction of grants that also appear as a published application.
    pub published_fraction: f64,
    /// Upper bound on description length, in words.
    pub max_description_words: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            seed: 7,
            grants: 1000,
            pending_applications: 100,
            published_fraction: 0.5,
            max_description_words: 400,
        }
    }
}

/// Deterministic corpus of grants and applications, in emission order.
pub fn generate_corpus(config: &CorpusConfig) -> Vec<PatentDocument> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::<f64>::new(0.0, 90.0).expect("valid normal");
    let mut docs = Vec::with_capacity(config.grants * 2 + config.pending_applications);
    let base_number = 8_000_000 + (config.seed % 1000) * 10_000;
    for i in 0..config.grants + config.pending_applications {
        let granted = i < config.grants;
        let filing =
            NaiveDate::from_ymd_opt(2005, 1, 1).expect("valid date") + Duration::days(rng.random_range(0..365 * 13));
        let (section, cpc, section_effect) = SECTIONS[rng.random_range(0..SECTIONS.len())];
        let (topic, topic_effect) = match rng.random_range(0..3) {
            0 => (SLOW_TOPICS[rng.random_range(0..SLOW_TOPICS.len())], 260),
            1 => (FAST_TOPICS[rng.random_range(0..FAST_TOPICS.len())], -180),
            _ => (NEUTRAL_TOPICS[rng.random_range(0..NEUTRAL_TOPICS.len())], 0),
        };
        let n_claims = rng.random_range(1..=24u32);
        let claims: Vec<Claim> = (1..=n_claims)
            .map(|n| {
                let body = words(&mut rng, 8, 30);
                if n == 1 || rng.random_bool(0.3) {
                    Claim::new(n, format!("A {topic}, comprising {body}."))
                } else {
                    Claim::new(n, format!("The {topic} of claim {}, wherein {body}.", rng.random_range(1..n)))
                }
            })
            .collect();
        let inventors: Vec<PersonName> = (0..rng.random_range(1..=4))
            .map(|_| {
                PersonName::new(
                    FIRST_NAMES[rng.random_range(0..FIRST_NAMES.len())],
                    LAST_NAMES[rng.random_range(0..LAST_NAMES.len())],
                )
            })
            .collect();
        let assignees =
            if rng.random_bool(0.9) { vec![ORGS[rng.random_range(0..ORGS.len())].to_string()] } else { Vec::new() };
        let lag =
            (760 + section_effect + topic_effect + 12 * i64::from(n_claims) + noise.sample(&mut rng).round() as i64)
                .max(150);
        let grant = filing + Duration::days(lag);
        let published = filing + Duration::days(548);
        let description = words(&mut rng, 20, config.max_description_words.max(21));
        let title = capitalize(topic);
        let abstract_text = format!("A {topic}. {}.", words(&mut rng, 15, 60));
        let citations = rng.random_range(0..40);
        let doc_number = format!("{}", base_number + i as u64);
        let mut doc = PatentDocument {
            doc_number,
            doc_kind: DocKind::Application,
            kind_code: "A1".into(),
            title,
            abstract_text,
            claims,
            description_text: description,
            filing_date: filing,
            publication_date: published,
            grant_date: None,
            inventors,
            assignees,
            cpc_codes: vec![cpc.to_string()],
            backward_citation_count: citations,
        };
        debug_assert_eq!(doc.cpc_codes[0].chars().next(), Some(section));
        if granted {
            let publish_too = published < grant && rng.random_bool(config.published_fraction);
            if publish_too {
                docs.push(doc.clone());
            }
            doc.doc_kind = DocKind::Grant;
            doc.kind_code = if publish_too { "B2" } else { "B1" }.into();
            doc.publication_date = grant;
            doc.grant_date = Some(grant);
        }
        docs.push(doc);
    }
    docs
}

fn words(rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    let n = rng.random_range(min..=max);
    let mut out = String::with_capacity(n * 7);
    for i in 0..n {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(FILLER[rng.random_range(0..FILLER.len())]);
    }
    out
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
}

fn compact(d: NaiveDate) -> String {
    d.format("%Y%m%d").to_string()
}

/// Render a document as a bulk-data style XML document, prolog included.
pub fn to_xml(doc: &PatentDocument) -> String {
    let (root, biblio) = match doc.doc_kind {
        DocKind::Grant => ("us-patent-grant", "us-bibliographic-data-grant"),
        DocKind::Application => ("us-patent-application", "us-bibliographic-data-application"),
    };
    let mut x = String::with_capacity(2048 + doc.description_text.len());
    x.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    x.push_str(&format!("<!DOCTYPE {root} SYSTEM \"{root}.dtd\" [ ]>\n"));
    x.push_str(&format!("<{root} lang=\"EN\" dtd-version=\"v4.5\">\n<{biblio}>\n"));
    x.push_str(&format!(
        "<publication-reference><document-id><country>US</country><doc-number>{}</doc-number><kind>{}</kind><date>{}</date></document-id></publication-reference>\n",
        escape(&doc.doc_number),
        escape(&doc.kind_code),
        compact(doc.publication_date)
    ));
    x.push_str(&format!(
        "<application-reference appl-type=\"utility\"><document-id><country>US</country><doc-number>1{}</doc-number><date>{}</date></document-id></application-reference>\n",
        escape(&doc.doc_number),
        compact(doc.filing_date)
    ));
    if !doc.cpc_codes.is_empty() {
        x.push_str("<classifications-cpc><main-cpc>");
        for code in &doc.cpc_codes {
            x.push_str(&format!(
                "<classification-cpc><classification-cpc-text>{} {}/00</classification-cpc-text></classification-cpc>",
                escape(&code[..code.len().min(4)]),
                escape(&code[code.len().min(4)..])
            ));
        }
        x.push_str("</main-cpc></classifications-cpc>\n");
    }
    x.push_str(&format!("<invention-title id=\"t1\">{}</invention-title>\n", escape(&doc.title)));
    if doc.backward_citation_count > 0 {
        x.push_str("<us-references-cited>");
        for i in 0..doc.backward_citation_count {
            x.push_str(&format!("<us-citation><patcit num=\"{:05}\"/></us-citation>", i + 1));
        }
        x.push_str("</us-references-cited>\n");
    }
    x.push_str("<us-parties><inventors>");
    for (i, p) in doc.inventors.iter().enumerate() {
        x.push_str(&format!(
            "<inventor sequence=\"{:03}\"><addressbook><last-name>{}</last-name><first-name>{}</first-name></addressbook></inventor>",
            i + 1,
            escape(&p.last_name),
            escape(&p.first_name)
        ));
    }
    x.push_str("</inventors></us-parties>\n");
    if !doc.assignees.is_empty() {
        x.push_str("<assignees>");
        for a in &doc.assignees {
            x.push_str(&format!("<assignee><addressbook><orgname>{}</orgname></addressbook></assignee>", escape(a)));
        }
        x.push_str("</assignees>\n");
    }
    x.push_str(&format!("</{biblio}>\n"));
    x.push_str(&format!("<abstract id=\"abstract\"><p id=\"p-0001\">{}</p></abstract>\n", escape(&doc.abstract_text)));
    x.push_str(&format!(
        "<description id=\"description\"><p id=\"p-0002\">{}</p></description>\n",
        escape(&doc.description_text)
    ));
    x.push_str("<claims id=\"claims\">");
    for c in &doc.claims {
        x.push_str(&format!(
            "<claim id=\"CLM-{0:05}\" num=\"{0:05}\"><claim-text>{1}</claim-text></claim>",
            c.number,
            escape(&c.text)
        ));
    }
    x.push_str(&format!("</claims>\n</{root}>\n"));
    x
}

/// Concatenated XML of the whole corpus, as in a weekly bulk file.
pub fn corpus_xml(docs: &[PatentDocument]) -> String {
    docs.iter().map(to_xml).collect()
}

/// Features and targets of a regression problem.
pub struct RegressionData {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    /// True noise standard deviation per row.
    pub sigma: Vec<f64>,
}

impl RegressionData {
    pub fn rows(&self) -> Vec<&[f64]> {
        self.x.iter().map(Vec::as_slice).collect()
    }
}

/// `y = 100 + 30·x₁ + N(0, 5²)` with `x ~ U(0, 1)^p`; only `x₁` matters.
pub fn linear_problem(n: usize, p: usize, seed: u64) -> RegressionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 5.0).expect("valid normal");
    let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
    let y = x.iter().map(|r| 100.0 + 30.0 * r[0] + noise.sample(&mut rng)).collect();
    RegressionData { x, y, sigma: vec![5.0; n] }
}

/// Noise scale proportional to `x₁ ∈ [1, 10]`: `y = 50 + 10·x₁ + N(0, (2·x₁)²)`.
pub fn heteroscedastic_problem(n: usize, p: usize, seed: u64) -> RegressionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std = Normal::new(0.0, 1.0).expect("valid normal");
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut sigma = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row: Vec<f64> = (0..p).map(|_| rng.random::<f64>()).collect();
        row[0] = rng.random_range(1.0..10.0);
        let s = 2.0 * row[0];
        y.push(50.0 + 10.0 * row[0] + s * std.sample(&mut rng));
        sigma.push(s);
        x.push(row);
    }
    RegressionData { x, y, sigma }
}
