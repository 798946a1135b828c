//! Bulk-file ingestion: split, parse, quarantine.

mod parse;
mod split;

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{Receiver, SyncSender, sync_channel};

use serde::{Deserialize, Serialize};

pub use parse::parse_patent_document;
pub use split::{ChunkSplitter, RawDocumentChunk, SplitItem};

use crate::document::PatentDocument;
use crate::error::{Error, Result};

/// Documents buffered per file ahead of the consumer when parsing in parallel.
const LOOKAHEAD: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuarantineRecord {
    pub source_file: String,
    pub byte_offset: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub files_processed: usize,
    pub documents_parsed: usize,
    pub documents_quarantined: usize,
    pub quarantine_records: Vec<QuarantineRecord>,
}

impl IngestReport {
    fn quarantine(&mut self, record: QuarantineRecord) {
        self.documents_quarantined += 1;
        self.quarantine_records.push(record);
    }
}

/// Receives parsed documents. A rejection sends the document to quarantine.
pub trait DocumentSink {
    fn accept(&mut self, doc: PatentDocument) -> std::result::Result<(), String>;
}

impl<F> DocumentSink for F
where
    F: FnMut(PatentDocument) -> std::result::Result<(), String>,
{
    fn accept(&mut self, doc: PatentDocument) -> std::result::Result<(), String> {
        self(doc)
    }
}

/// A parsed document with the byte offset of its chunk.
pub type LocatedDocument = (PatentDocument, u64);

type StreamItem = std::io::Result<std::result::Result<LocatedDocument, QuarantineRecord>>;

/// Parsed documents and quarantine records of one stream, in input order.
pub struct DocumentStream<R> {
    splitter: ChunkSplitter<R>,
}

impl<R: BufRead> DocumentStream<R> {
    pub fn new(reader: R, source_file: impl Into<String>) -> Self {
        DocumentStream { splitter: ChunkSplitter::new(reader, source_file) }
    }
}

impl<R: BufRead> Iterator for DocumentStream<R> {
    type Item = StreamItem;

    fn next(&mut self) -> Option<Self::Item> {
        let item = match self.splitter.next()? {
            Ok(item) => item,
            Err(e) => return Some(Err(e)),
        };
        Some(Ok(match item {
            SplitItem::Chunk(chunk) => parse_patent_document(&chunk).map(|doc| (doc, chunk.byte_offset)).map_err(|e| {
                QuarantineRecord { source_file: e.source_file, byte_offset: e.byte_offset, reason: e.kind.to_string() }
            }),
            SplitItem::Rejected { source_file, byte_offset, reason, .. } => {
                Err(QuarantineRecord { source_file, byte_offset, reason })
            }
        }))
    }
}

/// `*.xml` files of a directory (non-recursive, lexicographic), or the file itself.
pub fn input_files(input: &Path) -> Result<Vec<PathBuf>> {
    let meta = std::fs::metadata(input).map_err(|e| Error::io(input, e))?;
    if meta.is_file() {
        File::open(input).map_err(|e| Error::io(input, e))?;
        return Ok(vec![input.to_path_buf()]);
    }
    let mut files = Vec::new();
    for entry in std::fs::read_dir(input).map_err(|e| Error::io(input, e))? {
        let path = entry.map_err(|e| Error::io(input, e))?.path();
        let is_xml = path.extension().is_some_and(|ext| ext.eq_ignore_ascii_case("xml"));
        if is_xml && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    for f in &files {
        File::open(f).map_err(|e| Error::io(f, e))?;
    }
    Ok(files)
}

/// Ingest a file or directory using every available core.
pub fn ingest_path(input: &Path, sink: &mut dyn DocumentSink) -> Result<IngestReport> {
    let jobs = std::thread::available_parallelism().map_or(1, |n| n.get());
    ingest_path_with_jobs(input, sink, jobs)
}

/// Ingest with up to `jobs` parser threads.
///
/// Files are parsed concurrently but the sink sees documents in the same
/// order as a sequential run: file order, then byte offset.
pub fn ingest_path_with_jobs(input: &Path, sink: &mut dyn DocumentSink, jobs: usize) -> Result<IngestReport> {
    let files = input_files(input)?;
    let mut report = IngestReport::default();
    if jobs <= 1 || files.len() <= 1 {
        for file in &files {
            let stream = open_stream(file)?;
            for item in stream {
                let item = item.map_err(|e| Error::io(file, e))?;
                deliver(&mut report, sink, file, item);
            }
            report.files_processed += 1;
        }
        return Ok(report);
    }

    type Item = StreamItem;
    let mut senders: Vec<Option<SyncSender<Item>>> = Vec::with_capacity(files.len());
    let mut receivers: Vec<Receiver<Item>> = Vec::with_capacity(files.len());
    for _ in &files {
        let (tx, rx) = sync_channel(LOOKAHEAD);
        senders.push(Some(tx));
        receivers.push(rx);
    }
    let senders = std::sync::Mutex::new(senders);
    let next_file = AtomicUsize::new(0);

    std::thread::scope(|scope| -> Result<IngestReport> {
        for _ in 0..jobs.min(files.len()) {
            scope.spawn(|| {
                loop {
                    // Files are claimed in order, so the lowest unfinished file
                    // always has a worker and the consumer never deadlocks.
                    let idx = next_file.fetch_add(1, Ordering::SeqCst);
                    if idx >= files.len() {
                        break;
                    }
                    let tx = senders.lock().expect("sender table poisoned")[idx].take().expect("file claimed twice");
                    let file = &files[idx];
                    match File::open(file) {
                        Ok(f) => {
                            let stream = DocumentStream::new(BufReader::new(f), file.display().to_string());
                            for item in stream {
                                let failed = item.is_err();
                                if tx.send(item).is_err() || failed {
                                    break;
                                }
                            }
                        }
                        Err(e) => {
                            let _ = tx.send(Err(e));
                        }
                    }
                }
            });
        }
        for (file, rx) in files.iter().zip(receivers) {
            for item in rx {
                let item = item.map_err(|e| Error::io(file, e))?;
                deliver(&mut report, sink, file, item);
            }
            report.files_processed += 1;
        }
        Ok(report)
    })
}

fn open_stream(file: &Path) -> Result<DocumentStream<BufReader<File>>> {
    let f = File::open(file).map_err(|e| Error::io(file, e))?;
    Ok(DocumentStream::new(BufReader::new(f), file.display().to_string()))
}

fn deliver(
    report: &mut IngestReport,
    sink: &mut dyn DocumentSink,
    file: &Path,
    item: std::result::Result<LocatedDocument, QuarantineRecord>,
) {
    match item {
        Ok((doc, byte_offset)) => match sink.accept(doc) {
            Ok(()) => report.documents_parsed += 1,
            Err(reason) => {
                report.quarantine(QuarantineRecord { source_file: file.display().to_string(), byte_offset, reason })
            }
        },
        Err(record) => report.quarantine(record),
    }
}
