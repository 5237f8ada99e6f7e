//! Core of the report structuring service: schema registry, ingestion,
//! normalization, extraction, evidence anchoring, review store, batch jobs
//! and dual-version export.

pub mod evidence;
pub mod export;
pub mod extraction;
pub mod ingest;
pub mod jobs;
pub mod normalize;
pub mod pipeline;
pub mod schema;
pub mod store;
pub mod synth;

pub use evidence::{anchor_sentence, highlight_payload, EvidenceSpan, HighlightPayload, MatchKind};
pub use export::{export_table, ExportVersion};
pub use extraction::{
    extract_report, ExtractedField, ExtractorBackend, FieldStatus, HedgeLexicon, ReportExtraction,
    RuleBasedBackend,
};
pub use ingest::{ingest_bytes, ingest_pdf, ingest_text, SourceDocument};
pub use jobs::{JobManager, JobProgress, JobState};
pub use normalize::{normalize_field, normalize_term, normalize_unit, NormalizedValue};
pub use pipeline::{process_bytes, PipelineError, Processed};
pub use schema::{default_schema, load_schema, review_surface, FieldSpec, Schema};
pub use store::{ReportRecord, ReviewStatus, ReviewStore};
