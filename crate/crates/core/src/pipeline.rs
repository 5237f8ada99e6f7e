//! One file through ingestion, extraction and storage. Shared by the batch
//! workers and the headless command line so both produce the same records.

use thiserror::Error;

use crate::extraction::{extract_report, ExtractionError, ExtractorBackend, HedgeLexicon};
use crate::ingest::{ingest_bytes, IngestError};
use crate::schema::Schema;
use crate::store::{ReviewStore, StoreError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Processed {
    pub report_id: String,
    pub doc_id: String,
    /// The document was already stored under this schema; nothing was run.
    pub reused: bool,
}

pub fn process_bytes(
    store: &ReviewStore,
    backend: &dyn ExtractorBackend,
    hedges: &HedgeLexicon,
    schema: &Schema,
    filename: &str,
    bytes: &[u8],
    cohort: &str,
) -> Result<Processed, PipelineError> {
    let doc = ingest_bytes(bytes, filename)?;
    if let Some(report_id) = store.report_for_doc(&doc.doc_id, &schema.schema_id) {
        return Ok(Processed {
            report_id,
            doc_id: doc.doc_id,
            reused: true,
        });
    }
    store.put_document(&doc)?;
    let extraction = extract_report(&doc, schema, backend, hedges)?;
    let (report_id, reused) = match store.create_record(extraction, filename, cohort) {
        Ok(id) => (id, false),
        Err(StoreError::DuplicateReport(id)) => (id, true),
        Err(e) => return Err(e.into()),
    };
    Ok(Processed {
        report_id,
        doc_id: doc.doc_id,
        reused,
    })
}
