//! Per-report extraction: prompt construction, backend dispatch, output
//! validation, normalization and evidence anchoring.
//!
//! A report always yields one [`ExtractedField`] per schema field. The only
//! whole-report failure is an unreachable backend.

mod hedge;
mod http;
mod prompt;
mod rules;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evidence::{anchor_sentence, EvidenceSpan};
use crate::ingest::SourceDocument;
use crate::normalize::{normalize_field, NormalizedValue};
use crate::schema::{CanonicalUnit, Schema};

pub use hedge::HedgeLexicon;
pub use http::{HttpChatBackend, HttpChatConfig};
pub use prompt::{build_extraction_prompt, build_prompt_for_text, parse_model_output, REPAIR_INSTRUCTION};
pub use rules::{rule_based_extract, RuleBasedBackend};

/// Reports up to this many characters go to the backend in one prompt.
pub const WHOLE_REPORT_CHARS: usize = 8_000;
/// Overlap between consecutive windows of a long report.
pub const WINDOW_OVERLAP_CHARS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    LlmHttp,
    RuleBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatusHint {
    Present,
    Missing,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawField {
    pub raw_value: Option<String>,
    pub evidence_sentences: Vec<String>,
    pub status_hint: StatusHint,
}

impl RawField {
    pub fn missing() -> Self {
        RawField {
            raw_value: None,
            evidence_sentences: Vec::new(),
            status_hint: StatusHint::Missing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RawExtraction {
    pub fields: BTreeMap<String, RawField>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// What a backend hands back: a model reply still to be parsed, or an
/// already structured extraction.
#[derive(Debug, Clone, PartialEq)]
pub enum BackendOutput {
    Reply(String),
    Raw(RawExtraction),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend unreachable: {0}")]
    Unreachable(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExtractionError {
    #[error("backend unreachable: {0}")]
    BackendUnreachable(String),
    #[error("model output unparseable: {0}")]
    ModelOutputUnparseable(String),
}

/// A pluggable extraction backend. Prompt-driven backends receive the
/// prompt; structured backends may ignore it and read the document.
pub trait ExtractorBackend: Send + Sync {
    fn name(&self) -> &str;
    fn kind(&self) -> BackendKind;
    fn run(
        &self,
        doc: &SourceDocument,
        schema: &Schema,
        prompt: Option<&str>,
    ) -> Result<BackendOutput, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldStatus {
    Present,
    Missing,
    Ambiguous,
    ExtractionFailed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedField {
    pub field_id: String,
    pub raw_value: Option<String>,
    pub normalized_value: Option<NormalizedValue>,
    pub unit: Option<CanonicalUnit>,
    pub status: FieldStatus,
    pub evidence: Vec<EvidenceSpan>,
    /// Evidence sentences that could not be located in the document.
    pub unanchored_evidence: Vec<String>,
    pub needs_review: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportExtraction {
    pub doc_id: String,
    pub schema_id: String,
    pub fields: BTreeMap<String, ExtractedField>,
    pub extracted_at: DateTime<Utc>,
    pub backend_name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl ReportExtraction {
    /// True when every schema field has exactly one entry.
    pub fn is_complete_for(&self, schema: &Schema) -> bool {
        self.schema_id == schema.schema_id
            && self.fields.len() == schema.fields.len()
            && schema.fields.iter().all(|f| self.fields.contains_key(&f.field_id))
    }
}

/// Merge state of one field across windows.
#[derive(Debug, Clone, PartialEq)]
enum Merged {
    Found(RawField),
    Failed,
}

fn rank(m: &Merged) -> u8 {
    match m {
        Merged::Found(f) if f.status_hint == StatusHint::Present => 3,
        Merged::Found(f) if f.status_hint == StatusHint::Ambiguous => 2,
        Merged::Failed => 1,
        Merged::Found(_) => 0,
    }
}

/// Character windows over the report text: the whole text when short,
/// otherwise overlapping windows.
fn windows(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() <= WHOLE_REPORT_CHARS {
        return vec![text.to_string()];
    }
    let step = WHOLE_REPORT_CHARS - WINDOW_OVERLAP_CHARS;
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let end = (start + WHOLE_REPORT_CHARS).min(chars.len());
        out.push(chars[start..end].iter().collect());
        if end == chars.len() {
            break;
        }
        start += step;
    }
    out
}

/// Runs the backend over a document, producing one merged merge state per
/// field that any window mentioned.
fn collect_raw(
    doc: &SourceDocument,
    schema: &Schema,
    backend: &dyn ExtractorBackend,
    warnings: &mut Vec<String>,
) -> Result<BTreeMap<String, Merged>, ExtractionError> {
    let absorb = |merged: &mut BTreeMap<String, Merged>, raw: RawExtraction, warnings: &mut Vec<String>| {
        warnings.extend(raw.warnings);
        for (id, field) in raw.fields {
            let candidate = Merged::Found(field);
            match merged.get(&id) {
                Some(current) if rank(current) >= rank(&candidate) => {}
                _ => {
                    merged.insert(id, candidate);
                }
            }
        }
    };
    let mut merged: BTreeMap<String, Merged> = BTreeMap::new();

    if backend.kind() == BackendKind::RuleBased {
        let output = backend.run(doc, schema, None).map_err(unreachable)?;
        let raw = match output {
            BackendOutput::Raw(raw) => raw,
            BackendOutput::Reply(text) => parse_model_output(&text, schema)?,
        };
        absorb(&mut merged, raw, warnings);
        return Ok(merged);
    }

    let mut repair_available = true;
    for window in windows(&doc.full_text()) {
        let prompt = build_prompt_for_text(schema, &window);
        let attempt = |prompt: &str| -> Result<Result<RawExtraction, ExtractionError>, ExtractionError> {
            Ok(match backend.run(doc, schema, Some(prompt)).map_err(unreachable)? {
                BackendOutput::Raw(raw) => Ok(raw),
                BackendOutput::Reply(text) => parse_model_output(&text, schema),
            })
        };
        let mut result = attempt(&prompt)?;
        if result.is_err() && repair_available {
            repair_available = false;
            warnings.push("model output unparseable; retrying with repair instruction".into());
            result = attempt(&format!("{prompt}\n\n{REPAIR_INSTRUCTION}"))?;
        }
        match result {
            Ok(raw) => absorb(&mut merged, raw, warnings),
            Err(e) => {
                warnings.push(e.to_string());
                for spec in &schema.fields {
                    let entry = merged.entry(spec.field_id.clone()).or_insert(Merged::Failed);
                    if rank(entry) < rank(&Merged::Failed) {
                        *entry = Merged::Failed;
                    }
                }
            }
        }
    }
    Ok(merged)
}

fn unreachable(e: BackendError) -> ExtractionError {
    match e {
        BackendError::Unreachable(m) => ExtractionError::BackendUnreachable(m),
    }
}

/// Extracts, normalizes and anchors every schema field of one report.
pub fn extract_report(
    doc: &SourceDocument,
    schema: &Schema,
    backend: &dyn ExtractorBackend,
    hedges: &HedgeLexicon,
) -> Result<ReportExtraction, ExtractionError> {
    let mut warnings = Vec::new();
    let mut merged = collect_raw(doc, schema, backend, &mut warnings)?;

    let mut fields = BTreeMap::new();
    for spec in &schema.fields {
        let table = schema.synonyms_for(&spec.field_id).expect("field of this schema");
        let mut out = ExtractedField {
            field_id: spec.field_id.clone(),
            raw_value: None,
            normalized_value: None,
            unit: None,
            status: FieldStatus::Missing,
            evidence: Vec::new(),
            unanchored_evidence: Vec::new(),
            needs_review: false,
        };
        match merged.remove(&spec.field_id) {
            None => {}
            Some(Merged::Failed) => out.status = FieldStatus::ExtractionFailed,
            Some(Merged::Found(raw)) => {
                let value = raw.raw_value.filter(|v| !v.trim().is_empty());
                if let Some(value) = value.filter(|_| raw.status_hint != StatusHint::Missing) {
                    out.status = if raw.status_hint == StatusHint::Ambiguous || hedges.matches(&value).is_some() {
                        FieldStatus::Ambiguous
                    } else {
                        match normalize_field(&value, spec, table) {
                            Ok(v) => {
                                out.unit = match v {
                                    NormalizedValue::Quantity(q) => Some(q.unit),
                                    _ => None,
                                };
                                out.normalized_value = Some(v);
                                FieldStatus::Present
                            }
                            Err(e) => {
                                warnings.push(format!("{}: {e}", spec.field_id));
                                FieldStatus::Ambiguous
                            }
                        }
                    };
                    out.raw_value = Some(value);
                    for sentence in raw.evidence_sentences {
                        match anchor_sentence(doc, &sentence) {
                            Some(span) => out.evidence.push(span),
                            None => out.unanchored_evidence.push(sentence),
                        }
                    }
                }
            }
        }
        out.needs_review = spec.requires_review
            || matches!(out.status, FieldStatus::Ambiguous | FieldStatus::ExtractionFailed)
            || (out.status == FieldStatus::Present
                && (out.evidence.is_empty() || !out.unanchored_evidence.is_empty()));
        fields.insert(spec.field_id.clone(), out);
    }
    for unknown in merged.keys() {
        warnings.push(format!("dropped unknown field `{unknown}`"));
    }

    Ok(ReportExtraction {
        doc_id: doc.doc_id.clone(),
        schema_id: schema.schema_id.clone(),
        fields,
        extracted_at: Utc::now(),
        backend_name: backend.name().to_string(),
        warnings,
    })
}
