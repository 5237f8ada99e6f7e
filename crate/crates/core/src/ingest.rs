//! Document ingestion: PDFs and plain text become page-indexed text with
//! stable, contiguous character offsets.
//!
//! All offsets count Unicode scalar values (Rust `char`s), not bytes. Raw
//! extracted text is kept exactly as produced so offsets stay authoritative.

mod pdf;
mod segment;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use segment::{segment_page, segment_sentences};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IngestError {
    #[error("malformed PDF: {0}")]
    MalformedPdf(String),
    #[error("PDF has no extractable text layer")]
    NoTextLayer,
    #[error("document contains no text")]
    EmptyDocument,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageText {
    pub page_index: usize,
    pub text: String,
    pub start_offset: usize,
    pub end_offset: usize,
}

impl PageText {
    pub fn char_len(&self) -> usize {
        self.end_offset - self.start_offset
    }

    /// Text between page-local character positions.
    pub fn slice_chars(&self, start: usize, end: usize) -> Option<&str> {
        if start > end || end > self.char_len() {
            return None;
        }
        let byte_at = |pos: usize| {
            if pos == self.char_len() {
                self.text.len()
            } else {
                self.text.char_indices().nth(pos).map(|(b, _)| b).unwrap_or(self.text.len())
            }
        };
        let (bs, be) = (byte_at(start), byte_at(end));
        Some(&self.text[bs..be])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDocument {
    pub doc_id: String,
    pub filename: String,
    pub pages: Vec<PageText>,
    pub total_chars: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub doc_id: String,
    pub page_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub text: String,
}

/// Hex SHA-256 of the raw bytes; doubles as the dedupe key.
pub fn content_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl SourceDocument {
    /// Builds a document from page texts, assigning contiguous offsets.
    pub fn from_pages(doc_id: String, filename: String, texts: Vec<String>) -> Self {
        let mut offset = 0;
        let pages: Vec<PageText> = texts
            .into_iter()
            .enumerate()
            .map(|(page_index, text)| {
                let len = text.chars().count();
                let page = PageText {
                    page_index,
                    text,
                    start_offset: offset,
                    end_offset: offset + len,
                };
                offset += len;
                page
            })
            .collect();
        SourceDocument {
            doc_id,
            filename,
            pages,
            total_chars: offset,
        }
    }

    /// Text at global character offsets `[start, end)`, possibly spanning
    /// pages.
    pub fn substring(&self, start: usize, end: usize) -> Option<String> {
        if start > end || end > self.total_chars {
            return None;
        }
        let mut out = String::new();
        for page in &self.pages {
            if page.end_offset <= start || page.start_offset >= end {
                continue;
            }
            let s = start.max(page.start_offset) - page.start_offset;
            let e = end.min(page.end_offset) - page.start_offset;
            out.push_str(page.slice_chars(s, e)?);
        }
        Some(out)
    }

    pub fn page(&self, page_index: usize) -> Option<&PageText> {
        self.pages.get(page_index)
    }

    pub fn full_text(&self) -> String {
        self.pages.iter().map(|p| p.text.as_str()).collect()
    }

    /// Checks the offset partition invariants.
    pub fn offsets_are_contiguous(&self) -> bool {
        let mut expected = 0;
        for (i, p) in self.pages.iter().enumerate() {
            if p.page_index != i
                || p.start_offset != expected
                || p.end_offset - p.start_offset != p.text.chars().count()
            {
                return false;
            }
            expected = p.end_offset;
        }
        !self.pages.is_empty() && expected == self.total_chars
    }
}

/// Single-page document from plain text. The page text is the input,
/// unchanged.
pub fn ingest_text(text: &str, filename: &str) -> Result<SourceDocument, IngestError> {
    if text.trim().is_empty() {
        return Err(IngestError::EmptyDocument);
    }
    Ok(SourceDocument::from_pages(
        content_hash(text.as_bytes()),
        filename.to_string(),
        vec![text.to_string()],
    ))
}

/// Extracts the text layer of a PDF, one [`PageText`] per page.
pub fn ingest_pdf(bytes: &[u8], filename: &str) -> Result<SourceDocument, IngestError> {
    let pages = pdf::extract_pages(bytes)?;
    if pages.iter().all(|p| p.trim().is_empty()) {
        return Err(IngestError::EmptyDocument);
    }
    Ok(SourceDocument::from_pages(
        content_hash(bytes),
        filename.to_string(),
        pages,
    ))
}

/// Ingests by sniffing: `%PDF-` magic goes through the PDF path, files named
/// `*.txt` are read as UTF-8 text, anything else is treated as a PDF.
pub fn ingest_bytes(bytes: &[u8], filename: &str) -> Result<SourceDocument, IngestError> {
    if bytes.starts_with(b"%PDF-") {
        return ingest_pdf(bytes, filename);
    }
    if filename.to_ascii_lowercase().ends_with(".txt") {
        let text = std::str::from_utf8(bytes).map_err(|_| IngestError::EmptyDocument)?;
        return ingest_text(text, filename);
    }
    ingest_pdf(bytes, filename)
}
