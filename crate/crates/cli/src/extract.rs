//! Headless batch: ingest, extract, store and export in one synchronous run.
//! One JSON line per input file goes to the writer; diagnostics go to the log.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use sonotab_core::store::StoreError;
use sonotab_core::{default_schema, load_schema, process_bytes, ExtractorBackend, HedgeLexicon, ReviewStore, Schema};
use thiserror::Error;

pub const DEFAULT_COHORT: &str = "cli";

pub struct ExtractOptions {
    pub inputs: Vec<PathBuf>,
    pub schema: Option<PathBuf>,
    pub backend: Arc<dyn ExtractorBackend>,
    pub hedges: HedgeLexicon,
    pub output: PathBuf,
    pub cohort: String,
}

#[derive(Debug, Error)]
pub enum ExtractCommandError {
    #[error("schema {path}: {reason}")]
    Schema { path: PathBuf, reason: String },
    #[error("input {path}: {reason}")]
    Input { path: PathBuf, reason: String },
    #[error("output {path}: {reason}")]
    Output { path: PathBuf, reason: String },
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot write results: {0}")]
    Write(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    Failed,
}

/// One line of standard output.
#[derive(Debug, Clone, Serialize)]
pub struct FileResult {
    pub path: String,
    pub filename: String,
    pub status: Outcome,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub report_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub doc_id: Option<String>,
    pub reused: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pending_review: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtractSummary {
    pub processed: usize,
    pub failed: usize,
    pub exports: Vec<PathBuf>,
}

pub fn read_schema(path: Option<&Path>) -> Result<Schema, ExtractCommandError> {
    let Some(path) = path else {
        return Ok(default_schema());
    };
    let bytes = std::fs::read(path).map_err(|e| ExtractCommandError::Schema {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    load_schema(&bytes).map_err(|e| ExtractCommandError::Schema {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Files named directly plus every file below named directories, sorted per
/// directory. A path that cannot be inspected is an error.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, ExtractCommandError> {
    let mut files = Vec::new();
    for input in inputs {
        collect(input, &mut files)?;
    }
    Ok(files)
}

fn collect(path: &Path, files: &mut Vec<PathBuf>) -> Result<(), ExtractCommandError> {
    let input_error = |e: std::io::Error| ExtractCommandError::Input {
        path: path.to_path_buf(),
        reason: e.to_string(),
    };
    let meta = std::fs::metadata(path).map_err(input_error)?;
    if !meta.is_dir() {
        files.push(path.to_path_buf());
        return Ok(());
    }
    let mut entries = std::fs::read_dir(path)
        .map_err(input_error)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input_error)?;
    entries.sort();
    for entry in entries {
        collect(&entry, files)?;
    }
    Ok(())
}

pub fn run_extract(opts: &ExtractOptions, out: &mut dyn Write) -> Result<ExtractSummary, ExtractCommandError> {
    let schema = read_schema(opts.schema.as_deref())?;
    let files = expand_inputs(&opts.inputs)?;
    std::fs::create_dir_all(&opts.output).map_err(|e| ExtractCommandError::Output {
        path: opts.output.clone(),
        reason: e.to_string(),
    })?;
    let store = ReviewStore::open(&opts.output)?;
    let schema = store.register_schema(schema);

    let mut summary = ExtractSummary {
        processed: 0,
        failed: 0,
        exports: Vec::new(),
    };
    for path in &files {
        let filename = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        let mut result = FileResult {
            path: path.display().to_string(),
            filename: filename.clone(),
            status: Outcome::Failed,
            report_id: None,
            doc_id: None,
            reused: false,
            pending_review: None,
            error: None,
        };
        let processed = std::fs::read(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))
            .and_then(|bytes| {
                process_bytes(&store, opts.backend.as_ref(), &opts.hedges, &schema, &filename, &bytes, &opts.cohort)
                    .map_err(|e| format!("{}: {e}", path.display()))
            });
        match processed {
            Ok(p) => {
                let record = store.record(&p.report_id)?;
                result.status = Outcome::Ok;
                result.pending_review = Some(record.machine.fields.values().filter(|f| f.needs_review).count());
                result.report_id = Some(p.report_id);
                result.doc_id = Some(p.doc_id);
                result.reused = p.reused;
                summary.processed += 1;
            }
            Err(e) => {
                log::error!("{e}");
                result.error = Some(e);
                summary.failed += 1;
            }
        }
        serde_json::to_writer(&mut *out, &result).map_err(std::io::Error::other)?;
        writeln!(out)?;
        out.flush()?;
    }
    if store.cohorts().iter().any(|c| c == &opts.cohort) {
        summary.exports = store
            .regenerate_exports(&opts.cohort)?
            .into_iter()
            .map(|name| opts.output.join("exports").join(name))
            .collect();
    }
    Ok(summary)
}
