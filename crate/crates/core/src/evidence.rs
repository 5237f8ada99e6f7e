//! Evidence anchoring: locating stored evidence sentences in the source
//! document and producing highlight payloads for the document view.
//!
//! Matching is tried in three passes (exact, whitespace-normalized,
//! case-insensitive); the first pass with a hit wins and within a pass the
//! earliest offset wins. Matches never cross a page boundary.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::extraction::FieldStatus;
use crate::ingest::{PageText, SourceDocument};
use crate::store::ReportRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchKind {
    Exact,
    WhitespaceNormalized,
    CaseInsensitive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceSpan {
    pub doc_id: String,
    pub page_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub sentence_text: String,
    pub match_kind: MatchKind,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvidenceError {
    #[error("no anchored evidence for field `{0}`")]
    MissingEvidence(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
}

/// What the document view needs to highlight one evidence span.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HighlightPayload {
    pub doc_id: String,
    pub field_id: String,
    pub page_index: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub sentence_text: String,
    pub match_kind: MatchKind,
}

/// Text folded for matching, with each folded char mapped back to the
/// page-local index of the char it came from.
struct Folded {
    text: String,
    origin: Vec<usize>,
    /// Byte offset of each folded char in `text`.
    byte_at: Vec<usize>,
}

fn fold(text: &str, lowercase: bool) -> Folded {
    let mut out = Folded {
        text: String::with_capacity(text.len()),
        origin: Vec::with_capacity(text.len()),
        byte_at: Vec::with_capacity(text.len()),
    };
    let mut in_space = false;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if !in_space {
                out.byte_at.push(out.text.len());
                out.text.push(' ');
                out.origin.push(i);
            }
            in_space = true;
            continue;
        }
        in_space = false;
        if lowercase {
            for l in c.to_lowercase() {
                out.byte_at.push(out.text.len());
                out.text.push(l);
                out.origin.push(i);
            }
        } else {
            out.byte_at.push(out.text.len());
            out.text.push(c);
            out.origin.push(i);
        }
    }
    out
}

/// The normalization applied to both sides for a given match kind.
pub fn normalize_for(kind: MatchKind, text: &str) -> String {
    match kind {
        MatchKind::Exact => text.to_string(),
        MatchKind::WhitespaceNormalized => fold(text.trim(), false).text,
        MatchKind::CaseInsensitive => fold(text.trim(), true).text,
    }
}

fn char_index(text: &str, byte: usize) -> usize {
    text[..byte].chars().count()
}

fn exact_on_page(page: &PageText, needle: &str) -> Option<(usize, usize)> {
    let byte = page.text.find(needle)?;
    let start = char_index(&page.text, byte);
    Some((start, start + needle.chars().count()))
}

fn folded_on_page(page: &PageText, needle: &str, lowercase: bool) -> Option<(usize, usize)> {
    let hay = fold(&page.text, lowercase);
    let pat = fold(needle.trim(), lowercase).text;
    if pat.is_empty() {
        return None;
    }
    let pat_chars = pat.chars().count();
    let mut from = 0;
    while let Some(rel) = hay.text[from..].find(&pat) {
        let byte = from + rel;
        let first = hay.byte_at.partition_point(|&b| b < byte);
        let last = first + pat_chars - 1;
        let (o_start, o_last) = (hay.origin[first], hay.origin[last]);
        // A match must cover whole source chars at both ends.
        let starts_clean = first == 0 || hay.origin[first - 1] != o_start;
        let ends_clean = last + 1 == hay.origin.len() || hay.origin[last + 1] != o_last;
        if starts_clean && ends_clean {
            return Some((o_start, o_last + 1));
        }
        from = byte + hay.text[byte..].chars().next().map_or(1, char::len_utf8);
    }
    None
}

type PageMatcher<'a> = &'a dyn Fn(&PageText) -> Option<(usize, usize)>;

/// Anchors one evidence sentence; `None` means unanchored.
pub fn anchor_sentence(doc: &SourceDocument, sentence: &str) -> Option<EvidenceSpan> {
    if sentence.trim().is_empty() {
        return None;
    }
    let passes: [(MatchKind, PageMatcher); 3] = [
        (MatchKind::Exact, &|p| exact_on_page(p, sentence)),
        (MatchKind::WhitespaceNormalized, &|p| folded_on_page(p, sentence, false)),
        (MatchKind::CaseInsensitive, &|p| folded_on_page(p, sentence, true)),
    ];
    for (kind, find) in passes {
        for page in &doc.pages {
            if let Some((s, e)) = find(page) {
                return Some(EvidenceSpan {
                    doc_id: doc.doc_id.clone(),
                    page_index: page.page_index,
                    char_start: page.start_offset + s,
                    char_end: page.start_offset + e,
                    sentence_text: sentence.to_string(),
                    match_kind: kind,
                });
            }
        }
    }
    None
}

/// Checks the substring-fidelity invariant of a span against its document.
pub fn span_is_faithful(doc: &SourceDocument, span: &EvidenceSpan) -> bool {
    let Some(page) = doc.page(span.page_index) else {
        return false;
    };
    if span.char_start < page.start_offset || span.char_end > page.end_offset {
        return false;
    }
    let Some(found) = doc.substring(span.char_start, span.char_end) else {
        return false;
    };
    normalize_for(span.match_kind, &found) == normalize_for(span.match_kind, &span.sentence_text)
}

/// The earliest anchored span for a field, for rendering in the original
/// document view.
pub fn highlight_payload(record: &ReportRecord, field_id: &str) -> Result<HighlightPayload, EvidenceError> {
    let field = record
        .machine
        .fields
        .get(field_id)
        .ok_or_else(|| EvidenceError::UnknownField(field_id.to_string()))?;
    if matches!(field.status, FieldStatus::Missing | FieldStatus::ExtractionFailed) {
        return Err(EvidenceError::MissingEvidence(field_id.to_string()));
    }
    let span = field
        .evidence
        .iter()
        .min_by_key(|s| (s.char_start, s.char_end))
        .ok_or_else(|| EvidenceError::MissingEvidence(field_id.to_string()))?;
    Ok(HighlightPayload {
        doc_id: span.doc_id.clone(),
        field_id: field_id.to_string(),
        page_index: span.page_index,
        char_start: span.char_start,
        char_end: span.char_end,
        sentence_text: span.sentence_text.clone(),
        match_kind: span.match_kind,
    })
}
