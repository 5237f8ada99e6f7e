//! Review store: the immutable machine extraction per report, a human-edit
//! overlay, per-field review status and an append-only change log.
//!
//! On disk (when a data directory is configured):
//!
//! ```text
//! <data_dir>/records/<report_id>.jsonl   one event per line
//! <data_dir>/documents/<doc_id>.json     the ingested SourceDocument
//! <data_dir>/index.json                  report summaries, rewritten atomically
//! <data_dir>/exports/<cohort>_{machine,human}.csv
//! ```
//!
//! The first line of a record file is `{"event":"created","record":{...}}`
//! holding the machine extraction. Every accepted mutation appends one
//! `{"event":"commit","entries":[...]}` line; a batch save is a single line,
//! so a torn write loses the whole batch or nothing. A trailing line that
//! does not parse is ignored on load.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::evidence::{highlight_payload, EvidenceError, HighlightPayload};
use crate::export::{export_table, ExportError, ExportVersion};
use crate::extraction::{FieldStatus, ReportExtraction};
use crate::ingest::SourceDocument;
use crate::normalize::{normalize_field, NormalizeError, NormalizedValue};
use crate::schema::{review_surface, Schema, TrustClass};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StoreError {
    #[error("report already stored as `{0}`")]
    DuplicateReport(String),
    #[error("unknown report `{0}`")]
    UnknownReport(String),
    #[error("unknown field `{0}`")]
    UnknownField(String),
    #[error("unknown schema `{0}`")]
    UnknownSchema(String),
    #[error("unknown document `{0}`")]
    UnknownDocument(String),
    #[error("no records in cohort `{0}`")]
    UnknownCohort(String),
    #[error(transparent)]
    Export(#[from] ExportError),
    #[error("value `{token}` is not in the vocabulary of `{field_id}`")]
    ValueOutOfVocabulary { field_id: String, token: String },
    #[error("invalid value for `{field_id}`: {reason}")]
    InvalidValue { field_id: String, reason: String },
    #[error("extraction does not cover every schema field")]
    IncompleteExtraction,
    #[error("storage error: {0}")]
    Io(String),
}

impl From<io::Error> for StoreError {
    fn from(e: io::Error) -> Self {
        StoreError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReviewStatus {
    Unreviewed,
    Confirmed,
    Edited,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanEdit {
    pub field_id: String,
    /// `None` is an intentional blank.
    pub value: Option<NormalizedValue>,
    pub editor: String,
    pub edited_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeAction {
    Edit,
    Confirm,
    BatchSave,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeLogEntry {
    pub seq: u64,
    /// `None` only for the batch-save marker.
    pub field_id: Option<String>,
    pub old_value: Option<NormalizedValue>,
    pub new_value: Option<NormalizedValue>,
    pub action: ChangeAction,
    pub editor: String,
    pub at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub report_id: String,
    pub doc_id: String,
    pub schema_id: String,
    pub filename: String,
    pub cohort: String,
    pub created_at: DateTime<Utc>,
    pub machine: ReportExtraction,
    pub human_overlay: BTreeMap<String, HumanEdit>,
    pub review_status: BTreeMap<String, ReviewStatus>,
    pub changelog: Vec<ChangeLogEntry>,
}

impl ReportRecord {
    pub fn machine_value(&self, field_id: &str) -> Option<&NormalizedValue> {
        self.machine.fields.get(field_id).and_then(|f| f.normalized_value.as_ref())
    }

    /// Overlay value if one exists, else the machine value.
    pub fn effective_value(&self, field_id: &str) -> Option<&NormalizedValue> {
        match self.human_overlay.get(field_id) {
            Some(edit) => edit.value.as_ref(),
            None => self.machine_value(field_id),
        }
    }

    fn next_seq(&self) -> u64 {
        self.changelog.last().map_or(1, |e| e.seq + 1)
    }

    /// Applies one logged change. Used both live and when replaying a
    /// record file, so the two paths cannot drift apart.
    fn apply(&mut self, entry: ChangeLogEntry) {
        if let Some(field_id) = &entry.field_id {
            match entry.action {
                ChangeAction::Edit => {
                    self.human_overlay.insert(
                        field_id.clone(),
                        HumanEdit {
                            field_id: field_id.clone(),
                            value: entry.new_value.clone(),
                            editor: entry.editor.clone(),
                            edited_at: entry.at,
                        },
                    );
                    self.review_status.insert(field_id.clone(), ReviewStatus::Edited);
                }
                ChangeAction::Confirm => {
                    if !self.human_overlay.contains_key(field_id) {
                        self.review_status.insert(field_id.clone(), ReviewStatus::Confirmed);
                    }
                }
                ChangeAction::BatchSave => {}
            }
        }
        self.changelog.push(entry);
    }

    /// True when the latest action on an edited field is a confirmation.
    pub fn confirmed_after_edit(&self, field_id: &str) -> bool {
        self.review_status.get(field_id) == Some(&ReviewStatus::Edited)
            && self
                .changelog
                .iter()
                .rev()
                .find(|e| e.field_id.as_deref() == Some(field_id))
                .is_some_and(|e| e.action == ChangeAction::Confirm)
    }
}

/// Deterministic id for a (document, schema) pair.
pub fn report_id_for(doc_id: &str, schema_id: &str) -> String {
    let digest = Sha256::digest(format!("{doc_id}:{schema_id}").as_bytes());
    format!("r_{}", &hex::encode(digest)[..16])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidenceHandle {
    pub doc_id: String,
    pub field_id: String,
    pub href: String,
    pub anchored: bool,
}

/// One row of the review table. Deliberately carries no model confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewEntry {
    pub field_id: String,
    pub label: String,
    pub trust_class: TrustClass,
    pub value: Option<String>,
    pub machine_value: Option<String>,
    pub unit: Option<String>,
    pub status: FieldStatus,
    pub review_status: ReviewStatus,
    pub needs_review: bool,
    /// Proactive marker: the machine found nothing and no human filled it.
    pub missing: bool,
    pub intentional_blank: bool,
    pub modified: bool,
    pub confirmed_after_edit: bool,
    pub evidence: EvidenceHandle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewPayload {
    pub report_id: String,
    pub doc_id: String,
    pub schema_id: String,
    pub filename: String,
    pub fields: Vec<ReviewEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub report_id: String,
    pub doc_id: String,
    pub schema_id: String,
    pub filename: String,
    pub cohort: String,
    pub created_at: DateTime<Utc>,
    pub pending_review: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub report_id: String,
    pub field_id: String,
    pub value: Option<String>,
    pub review_status: ReviewStatus,
    pub seq: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitReceipt {
    pub report_id: String,
    pub applied: usize,
    /// Sequence number of the batch marker; `None` for an empty batch.
    pub marker_seq: Option<u64>,
    pub exports: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum RecordEvent {
    Created { record: Box<ReportRecord> },
    Commit { entries: Vec<ChangeLogEntry> },
}

type Shared<T> = Arc<Mutex<T>>;

pub struct ReviewStore {
    data_dir: Option<PathBuf>,
    schemas: RwLock<HashMap<String, Arc<Schema>>>,
    records: RwLock<BTreeMap<String, Shared<ReportRecord>>>,
    documents: RwLock<HashMap<String, Arc<SourceDocument>>>,
    export_lock: Mutex<()>,
    index_lock: Mutex<()>,
}

impl ReviewStore {
    pub fn in_memory() -> Self {
        ReviewStore {
            data_dir: None,
            schemas: RwLock::default(),
            records: RwLock::default(),
            documents: RwLock::default(),
            export_lock: Mutex::new(()),
            index_lock: Mutex::new(()),
        }
    }

    /// Opens (and replays) a store under `data_dir`, creating the layout.
    pub fn open(data_dir: &Path) -> Result<Self, StoreError> {
        for sub in ["records", "documents", "exports"] {
            fs::create_dir_all(data_dir.join(sub))?;
        }
        let store = ReviewStore {
            data_dir: Some(data_dir.to_path_buf()),
            ..ReviewStore::in_memory()
        };
        let mut records = BTreeMap::new();
        for entry in fs::read_dir(data_dir.join("records"))? {
            let path = entry?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("jsonl") {
                continue;
            }
            if let Some(record) = replay(&path)? {
                records.insert(record.report_id.clone(), Arc::new(Mutex::new(record)));
            }
        }
        *store.records.write().expect("lock") = records;
        store.write_index()?;
        Ok(store)
    }

    pub fn data_dir(&self) -> Option<&Path> {
        self.data_dir.as_deref()
    }

    pub fn register_schema(&self, schema: Schema) -> Arc<Schema> {
        let schema = Arc::new(schema);
        self.schemas
            .write()
            .expect("lock")
            .insert(schema.schema_id.clone(), schema.clone());
        schema
    }

    pub fn schema(&self, schema_id: &str) -> Result<Arc<Schema>, StoreError> {
        self.schemas
            .read()
            .expect("lock")
            .get(schema_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownSchema(schema_id.to_string()))
    }

    pub fn put_document(&self, doc: &SourceDocument) -> Result<(), StoreError> {
        if let Some(dir) = &self.data_dir {
            let path = dir.join("documents").join(format!("{}.json", doc.doc_id));
            if !path.exists() {
                write_atomic(&path, &serde_json::to_vec(doc).expect("serialisable"))?;
            }
        }
        self.documents
            .write()
            .expect("lock")
            .insert(doc.doc_id.clone(), Arc::new(doc.clone()));
        Ok(())
    }

    pub fn document(&self, doc_id: &str) -> Result<Arc<SourceDocument>, StoreError> {
        if let Some(doc) = self.documents.read().expect("lock").get(doc_id) {
            return Ok(doc.clone());
        }
        let unknown = || StoreError::UnknownDocument(doc_id.to_string());
        let dir = self.data_dir.as_ref().ok_or_else(unknown)?;
        if !doc_id.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(unknown());
        }
        let bytes = fs::read(dir.join("documents").join(format!("{doc_id}.json"))).map_err(|_| unknown())?;
        let doc: SourceDocument = serde_json::from_slice(&bytes).map_err(|e| StoreError::Io(e.to_string()))?;
        let doc = Arc::new(doc);
        self.documents.write().expect("lock").insert(doc_id.to_string(), doc.clone());
        Ok(doc)
    }

    /// Stores a fresh machine extraction. A second extraction of the same
    /// document under the same schema is rejected with the existing id.
    pub fn create_record(
        &self,
        extraction: ReportExtraction,
        filename: &str,
        cohort: &str,
    ) -> Result<String, StoreError> {
        let schema = self.schema(&extraction.schema_id)?;
        if !extraction.is_complete_for(&schema) {
            return Err(StoreError::IncompleteExtraction);
        }
        let report_id = report_id_for(&extraction.doc_id, &extraction.schema_id);
        let record = ReportRecord {
            report_id: report_id.clone(),
            doc_id: extraction.doc_id.clone(),
            schema_id: extraction.schema_id.clone(),
            filename: filename.to_string(),
            cohort: cohort.to_string(),
            created_at: Utc::now(),
            review_status: schema
                .fields
                .iter()
                .map(|f| (f.field_id.clone(), ReviewStatus::Unreviewed))
                .collect(),
            machine: extraction,
            human_overlay: BTreeMap::new(),
            changelog: Vec::new(),
        };
        {
            let mut records = self.records.write().expect("lock");
            if records.contains_key(&report_id) {
                return Err(StoreError::DuplicateReport(report_id));
            }
            if let Some(path) = self.record_path(&report_id) {
                let line = RecordEvent::Created { record: Box::new(record.clone()) };
                let mut file = OpenOptions::new().create_new(true).append(true).open(path)?;
                append_line(&mut file, &line)?;
            }
            records.insert(report_id.clone(), Arc::new(Mutex::new(record)));
        }
        self.write_index()?;
        Ok(report_id)
    }

    fn record_path(&self, report_id: &str) -> Option<PathBuf> {
        self.data_dir
            .as_ref()
            .map(|d| d.join("records").join(format!("{report_id}.jsonl")))
    }

    fn handle(&self, report_id: &str) -> Result<Shared<ReportRecord>, StoreError> {
        self.records
            .read()
            .expect("lock")
            .get(report_id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownReport(report_id.to_string()))
    }

    /// A consistent copy of one record.
    pub fn record(&self, report_id: &str) -> Result<ReportRecord, StoreError> {
        Ok(self.handle(report_id)?.lock().expect("lock").clone())
    }

    pub fn report_ids(&self) -> Vec<String> {
        self.records.read().expect("lock").keys().cloned().collect()
    }

    pub fn report_for_doc(&self, doc_id: &str, schema_id: &str) -> Option<String> {
        let id = report_id_for(doc_id, schema_id);
        self.records.read().expect("lock").contains_key(&id).then_some(id)
    }

    pub fn list_reports(&self, offset: usize, limit: usize) -> (usize, Vec<ReportSummary>) {
        let handles: Vec<_> = self.records.read().expect("lock").values().cloned().collect();
        let total = handles.len();
        let page = handles
            .iter()
            .skip(offset)
            .take(limit)
            .map(|h| summary(&h.lock().expect("lock")))
            .collect();
        (total, page)
    }

    fn validate(
        &self,
        record: &ReportRecord,
        field_id: &str,
        raw: Option<&str>,
    ) -> Result<Option<NormalizedValue>, StoreError> {
        let schema = self.schema(&record.schema_id)?;
        let spec = schema
            .field(field_id)
            .ok_or_else(|| StoreError::UnknownField(field_id.to_string()))?;
        let Some(raw) = raw.filter(|r| !r.trim().is_empty()) else {
            return Ok(None);
        };
        let table = schema.synonyms_for(field_id).expect("field of this schema");
        normalize_field(raw, spec, table).map(Some).map_err(|e| match e {
            NormalizeError::ValueOutOfVocabulary { field_id, token } => {
                StoreError::ValueOutOfVocabulary { field_id, token }
            }
            other => StoreError::InvalidValue {
                field_id: field_id.to_string(),
                reason: other.to_string(),
            },
        })
    }

    /// Appends entries to the record file then applies them in memory.
    /// Caller holds the record lock.
    fn commit(&self, record: &mut ReportRecord, entries: Vec<ChangeLogEntry>) -> Result<(), StoreError> {
        if let Some(path) = self.record_path(&record.report_id) {
            let mut file = OpenOptions::new().append(true).open(path)?;
            append_line(&mut file, &RecordEvent::Commit { entries: entries.clone() })?;
        }
        for e in entries {
            record.apply(e);
        }
        Ok(())
    }

    fn field_state(record: &ReportRecord, field_id: &str) -> FieldState {
        FieldState {
            report_id: record.report_id.clone(),
            field_id: field_id.to_string(),
            value: record.effective_value(field_id).map(NormalizedValue::render),
            review_status: record.review_status[field_id],
            seq: record.changelog.last().map_or(0, |e| e.seq),
        }
    }

    /// Records a human value (`None` or blank text is an intentional blank).
    pub fn apply_edit(
        &self,
        report_id: &str,
        field_id: &str,
        value: Option<&str>,
        editor: &str,
    ) -> Result<FieldState, StoreError> {
        let handle = self.handle(report_id)?;
        let mut record = handle.lock().expect("lock");
        let new_value = self.validate(&record, field_id, value)?;
        let entry = ChangeLogEntry {
            seq: record.next_seq(),
            field_id: Some(field_id.to_string()),
            old_value: record.effective_value(field_id).cloned(),
            new_value,
            action: ChangeAction::Edit,
            editor: editor.to_string(),
            at: Utc::now(),
        };
        self.commit(&mut record, vec![entry])?;
        Ok(Self::field_state(&record, field_id))
    }

    pub fn confirm_field(&self, report_id: &str, field_id: &str, editor: &str) -> Result<FieldState, StoreError> {
        let handle = self.handle(report_id)?;
        let mut record = handle.lock().expect("lock");
        if !self.schema(&record.schema_id)?.contains(field_id) {
            return Err(StoreError::UnknownField(field_id.to_string()));
        }
        let current = record.effective_value(field_id).cloned();
        let entry = ChangeLogEntry {
            seq: record.next_seq(),
            field_id: Some(field_id.to_string()),
            old_value: current.clone(),
            new_value: current,
            action: ChangeAction::Confirm,
            editor: editor.to_string(),
            at: Utc::now(),
        };
        self.commit(&mut record, vec![entry])?;
        Ok(Self::field_state(&record, field_id))
    }

    /// All-or-nothing commit of several edits, followed by regeneration of
    /// the record's cohort exports.
    pub fn batch_save(
        &self,
        report_id: &str,
        edits: &[(String, Option<String>)],
        editor: &str,
    ) -> Result<CommitReceipt, StoreError> {
        let handle = self.handle(report_id)?;
        let cohort = {
            let mut record = handle.lock().expect("lock");
            if edits.is_empty() {
                return Ok(CommitReceipt {
                    report_id: report_id.to_string(),
                    applied: 0,
                    marker_seq: None,
                    exports: Vec::new(),
                });
            }
            let mut values = Vec::with_capacity(edits.len());
            for (field_id, raw) in edits {
                values.push(self.validate(&record, field_id, raw.as_deref())?);
            }
            // Replay on a scratch copy so later edits in the batch see the
            // old values of earlier ones.
            let mut scratch = record.clone();
            let at = Utc::now();
            let mut entries = Vec::with_capacity(edits.len() + 1);
            for ((field_id, _), new_value) in edits.iter().zip(values) {
                let entry = ChangeLogEntry {
                    seq: scratch.next_seq(),
                    field_id: Some(field_id.clone()),
                    old_value: scratch.effective_value(field_id).cloned(),
                    new_value,
                    action: ChangeAction::Edit,
                    editor: editor.to_string(),
                    at,
                };
                scratch.apply(entry.clone());
                entries.push(entry);
            }
            entries.push(ChangeLogEntry {
                seq: scratch.next_seq(),
                field_id: None,
                old_value: None,
                new_value: None,
                action: ChangeAction::BatchSave,
                editor: editor.to_string(),
                at,
            });
            self.commit(&mut record, entries)?;
            record.cohort.clone()
        };
        let exports = self.regenerate_exports(&cohort)?;
        let record = handle.lock().expect("lock");
        Ok(CommitReceipt {
            report_id: report_id.to_string(),
            applied: edits.len(),
            marker_seq: record.changelog.last().map(|e| e.seq),
            exports,
        })
    }

    pub fn review_payload(&self, report_id: &str) -> Result<ReviewPayload, StoreError> {
        self.payload(report_id, true)
    }

    /// Every schema field, for the optional quantitative editing surface.
    pub fn full_payload(&self, report_id: &str) -> Result<ReviewPayload, StoreError> {
        self.payload(report_id, false)
    }

    fn payload(&self, report_id: &str, surface_only: bool) -> Result<ReviewPayload, StoreError> {
        let record = self.record(report_id)?;
        let schema = self.schema(&record.schema_id)?;
        let specs = if surface_only {
            review_surface(&schema)
        } else {
            schema.fields.iter().collect()
        };
        let fields = specs
            .into_iter()
            .map(|spec| {
                let id = spec.field_id.as_str();
                let machine = &record.machine.fields[id];
                let overlay = record.human_overlay.get(id);
                ReviewEntry {
                    field_id: id.to_string(),
                    label: spec.label.clone(),
                    trust_class: spec.trust_class,
                    value: record.effective_value(id).map(NormalizedValue::render),
                    machine_value: record.machine_value(id).map(NormalizedValue::render),
                    unit: spec.canonical_unit.map(|u| u.token().to_string()),
                    status: machine.status,
                    review_status: record.review_status[id],
                    needs_review: machine.needs_review,
                    missing: machine.status == FieldStatus::Missing && overlay.is_none(),
                    intentional_blank: overlay.is_some_and(|o| o.value.is_none()),
                    modified: overlay.is_some(),
                    confirmed_after_edit: record.confirmed_after_edit(id),
                    evidence: EvidenceHandle {
                        doc_id: record.doc_id.clone(),
                        field_id: id.to_string(),
                        href: format!("/v1/documents/{}/highlight?field={id}", record.doc_id),
                        anchored: !machine.evidence.is_empty(),
                    },
                }
            })
            .collect();
        Ok(ReviewPayload {
            report_id: record.report_id.clone(),
            doc_id: record.doc_id.clone(),
            schema_id: record.schema_id.clone(),
            filename: record.filename.clone(),
            fields,
        })
    }

    /// Highlight for a field of the (single) report of `doc_id`.
    pub fn highlight(&self, doc_id: &str, field_id: &str) -> Result<HighlightPayload, HighlightLookupError> {
        let record = self
            .records
            .read()
            .expect("lock")
            .values()
            .find_map(|h| {
                let r = h.lock().expect("lock");
                (r.doc_id == doc_id).then(|| r.clone())
            })
            .ok_or_else(|| HighlightLookupError::Store(StoreError::UnknownDocument(doc_id.to_string())))?;
        highlight_payload(&record, field_id).map_err(HighlightLookupError::Evidence)
    }

    fn snapshot(&self, cohort: Option<&str>) -> Vec<ReportRecord> {
        let handles: Vec<_> = self.records.read().expect("lock").values().cloned().collect();
        handles
            .iter()
            .map(|h| h.lock().expect("lock").clone())
            .filter(|r| cohort.is_none_or(|c| r.cohort == c))
            .collect()
    }

    pub fn cohorts(&self) -> Vec<String> {
        let mut c: Vec<String> = self.snapshot(None).into_iter().map(|r| r.cohort).collect();
        c.sort();
        c.dedup();
        c
    }

    /// CSV bytes for a cohort from a fresh snapshot.
    pub fn export(&self, cohort: &str, version: ExportVersion) -> Result<Vec<u8>, StoreError> {
        let records = self.snapshot(Some(cohort));
        let Some(first) = records.first() else {
            return Err(StoreError::UnknownCohort(cohort.to_string()));
        };
        let schema = self.schema(&first.schema_id)?;
        Ok(export_table(&records, &schema, version)?)
    }

    /// Rewrites both CSVs for a cohort. Returns the file names written (none
    /// for an in-memory store).
    pub fn regenerate_exports(&self, cohort: &str) -> Result<Vec<String>, StoreError> {
        let _guard = self.export_lock.lock().expect("lock");
        let Some(dir) = &self.data_dir else {
            return Ok(Vec::new());
        };
        let mut written = Vec::new();
        for version in [ExportVersion::Machine, ExportVersion::Human] {
            let bytes = self.export(cohort, version)?;
            let name = export_file_name(cohort, version);
            write_atomic(&dir.join("exports").join(&name), &bytes)?;
            written.push(name);
        }
        Ok(written)
    }

    fn write_index(&self) -> Result<(), StoreError> {
        let Some(dir) = &self.data_dir else {
            return Ok(());
        };
        let _guard = self.index_lock.lock().expect("lock");
        let summaries: Vec<ReportSummary> = self.snapshot(None).iter().map(summary).collect();
        let body = serde_json::to_vec_pretty(&summaries).expect("serialisable");
        write_atomic(&dir.join("index.json"), &body)?;
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HighlightLookupError {
    #[error(transparent)]
    Store(StoreError),
    #[error(transparent)]
    Evidence(EvidenceError),
}

/// `{cohort}_machine.csv` / `{cohort}_human.csv`.
pub fn export_file_name(cohort: &str, version: ExportVersion) -> String {
    format!("{cohort}_{}.csv", version.as_str())
}

fn summary(r: &ReportRecord) -> ReportSummary {
    ReportSummary {
        report_id: r.report_id.clone(),
        doc_id: r.doc_id.clone(),
        schema_id: r.schema_id.clone(),
        filename: r.filename.clone(),
        cohort: r.cohort.clone(),
        created_at: r.created_at,
        pending_review: r
            .machine
            .fields
            .values()
            .filter(|f| f.needs_review && r.review_status.get(&f.field_id) == Some(&ReviewStatus::Unreviewed))
            .count(),
    }
}

fn append_line<T: Serialize>(file: &mut File, value: &T) -> io::Result<()> {
    let mut line = serde_json::to_vec(value).map_err(io::Error::other)?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    static NEXT: AtomicU64 = AtomicU64::new(0);
    let n = NEXT.fetch_add(1, Ordering::Relaxed);
    let tmp = path.with_extension(format!("{}.{n}.tmp", std::process::id()));
    {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_data()?;
    }
    fs::rename(tmp, path)
}

/// Rebuilds a record from its event file, ignoring a torn final line.
fn replay(path: &Path) -> Result<Option<ReportRecord>, StoreError> {
    let reader = BufReader::new(File::open(path)?);
    let lines: Vec<String> = reader.lines().collect::<Result<_, _>>()?;
    let mut record: Option<ReportRecord> = None;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: RecordEvent = match serde_json::from_str(line) {
            Ok(e) => e,
            Err(e) if i + 1 == lines.len() => {
                log::warn!("ignoring torn last line of {}: {e}", path.display());
                break;
            }
            Err(e) => return Err(StoreError::Io(format!("{}: line {}: {e}", path.display(), i + 1))),
        };
        match (event, record.as_mut()) {
            (RecordEvent::Created { record: r }, None) => record = Some(*r),
            (RecordEvent::Commit { entries }, Some(r)) => {
                for e in entries {
                    r.apply(e);
                }
            }
            _ => return Err(StoreError::Io(format!("{}: events out of order", path.display()))),
        }
    }
    Ok(record)
}
