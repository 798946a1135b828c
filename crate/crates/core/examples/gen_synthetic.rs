//! Writes a synthetic bulk XML file: `gen_synthetic <out.xml> [grants] [seed]`.

use patent_analytics::synthetic::{CorpusConfig, corpus_xml, generate_corpus};

fn main() {
    let mut args = std::env::args().skip(1);
    let Some(out) = args.next() else {
        eprintln!("usage: gen_synthetic <out.xml> [grants] [seed]");
        std::process::exit(1);
    };
    let grants = args.next().map_or(1000, |s| s.parse().expect("grants must be an integer"));
    let seed = args.next().map_or(7, |s| s.parse().expect("seed must be an integer"));
    let docs = generate_corpus(&CorpusConfig { seed, grants, ..Default::default() });
    std::fs::write(&out, corpus_xml(&docs)).expect("write output");
    eprintln!("wrote {} documents to {out}", docs.len());
}
