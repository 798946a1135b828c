//! Streaming splitter for bulk files made of concatenated XML documents.

use std::io::{self, BufRead};

use serde::{Deserialize, Serialize};

const DECLARATION: &[u8] = b"<?xml";

/// One complete standalone XML document sliced out of a bulk file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawDocumentChunk {
    pub source_file: String,
    pub byte_offset: u64,
    pub xml_text: String,
}

/// Output of the splitter: either a well-formed chunk or a byte range that
/// must be quarantined.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SplitItem {
    Chunk(RawDocumentChunk),
    Rejected { source_file: String, byte_offset: u64, byte_len: u64, reason: String },
}

impl SplitItem {
    pub fn byte_offset(&self) -> u64 {
        match self {
            SplitItem::Chunk(c) => c.byte_offset,
            SplitItem::Rejected { byte_offset, .. } => *byte_offset,
        }
    }
}

/// Splits a byte stream on lines beginning with `<?xml`.
///
/// Holds at most one document plus one line in memory. Whitespace before
/// the first declaration is kept at the front of the first chunk so that
/// chunks and rejected ranges always cover the input exactly; any other
/// bytes before the first declaration are rejected.
pub struct ChunkSplitter<R> {
    reader: R,
    source_file: String,
    buf: Vec<u8>,
    buf_offset: u64,
    next_offset: u64,
    line: Vec<u8>,
    eof: bool,
}

impl<R: BufRead> ChunkSplitter<R> {
    pub fn new(reader: R, source_file: impl Into<String>) -> Self {
        ChunkSplitter {
            reader,
            source_file: source_file.into(),
            buf: Vec::new(),
            buf_offset: 0,
            next_offset: 0,
            line: Vec::new(),
            eof: false,
        }
    }

    fn take_buffered(&mut self) -> Option<SplitItem> {
        if self.buf.is_empty() {
            return None;
        }
        let bytes = std::mem::take(&mut self.buf);
        let offset = self.buf_offset;
        let lead = bytes.iter().position(|b| !b.is_ascii_whitespace()).unwrap_or(bytes.len());
        if !bytes[lead..].starts_with(DECLARATION) {
            return Some(self.rejected(offset, bytes.len(), "content outside xml document"));
        }
        if !is_complete_document(&bytes[lead..]) {
            return Some(self.rejected(offset, bytes.len(), "truncated document"));
        }
        let xml_text = match String::from_utf8(bytes) {
            Ok(s) => s,
            Err(e) => String::from_utf8_lossy(e.as_bytes()).into_owned(),
        };
        Some(SplitItem::Chunk(RawDocumentChunk {
            source_file: self.source_file.clone(),
            byte_offset: offset,
            xml_text,
        }))
    }

    fn rejected(&self, byte_offset: u64, len: usize, reason: &str) -> SplitItem {
        SplitItem::Rejected {
            source_file: self.source_file.clone(),
            byte_offset,
            byte_len: len as u64,
            reason: reason.to_string(),
        }
    }
}

impl<R: BufRead> Iterator for ChunkSplitter<R> {
    type Item = io::Result<SplitItem>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            if self.eof {
                return self.take_buffered().map(Ok);
            }
            self.line.clear();
            let n = match self.reader.read_until(b'\n', &mut self.line) {
                Ok(n) => n,
                Err(e) => return Some(Err(e)),
            };
            if n == 0 {
                self.eof = true;
                continue;
            }
            let line_offset = self.next_offset;
            self.next_offset += n as u64;
            let blank = self.buf.iter().all(u8::is_ascii_whitespace);
            if self.line.starts_with(DECLARATION) && !blank {
                let item = self.take_buffered();
                self.buf_offset = line_offset;
                self.buf.extend_from_slice(&self.line);
                if let Some(item) = item {
                    return Some(Ok(item));
                }
            } else {
                if self.buf.is_empty() {
                    self.buf_offset = line_offset;
                }
                self.buf.extend_from_slice(&self.line);
            }
        }
    }
}

/// Checks that the document's root element is closed.
pub(crate) fn is_complete_document(bytes: &[u8]) -> bool {
    let Some((name, self_closed)) = root_element(bytes) else {
        return false;
    };
    if self_closed {
        return true;
    }
    let end = trim_end(bytes);
    if !end.ends_with(b">") {
        return false;
    }
    let body = trim_end(&end[..end.len() - 1]);
    let Some(close) = body.len().checked_sub(name.len() + 2) else {
        return false;
    };
    &body[close..close + 2] == b"</" && &body[close + 2..] == name
}

fn trim_end(bytes: &[u8]) -> &[u8] {
    let n = bytes.iter().rposition(|b| !b.is_ascii_whitespace()).map_or(0, |p| p + 1);
    &bytes[..n]
}

/// Locate the root start tag, skipping the prolog (declarations, comments,
/// processing instructions, DOCTYPE with internal subset).
fn root_element(bytes: &[u8]) -> Option<(&[u8], bool)> {
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] != b'<' {
            i += 1;
            continue;
        }
        let rest = &bytes[i..];
        if rest.starts_with(b"<?") {
            i += find(rest, b"?>")? + 2;
        } else if rest.starts_with(b"<!--") {
            i += find(rest, b"-->")? + 3;
        } else if rest.starts_with(b"<!") {
            let mut depth = 0i32;
            let mut j = 2;
            loop {
                match rest.get(j)? {
                    b'[' => depth += 1,
                    b']' => depth -= 1,
                    b'>' if depth <= 0 => break,
                    _ => {}
                }
                j += 1;
            }
            i += j + 1;
        } else {
            let name_len = rest[1..].iter().position(|b| b.is_ascii_whitespace() || *b == b'>' || *b == b'/')?;
            let name = &rest[1..1 + name_len];
            if name.is_empty() {
                return None;
            }
            let tag_end = find(rest, b">")?;
            let self_closed = rest[..tag_end].ends_with(b"/");
            return Some((name, self_closed));
        }
    }
    None
}

fn find(haystack: &[u8], needle: &[u8]) -> Option<usize> {
    haystack.windows(needle.len()).position(|w| w == needle)
}
