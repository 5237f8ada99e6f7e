//! Dual-version CSV export: machine values only, or human-effective values
//! (overlay over machine). Both versions share one column layout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::normalize::NormalizedValue;
use crate::schema::{review_surface, Schema};
use crate::store::{ReportRecord, ReviewStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportVersion {
    Machine,
    Human,
}

impl ExportVersion {
    pub fn as_str(self) -> &'static str {
        match self {
            ExportVersion::Machine => "machine",
            ExportVersion::Human => "human",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "machine" => Some(ExportVersion::Machine),
            "human" => Some(ExportVersion::Human),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ExportError {
    #[error("record `{report_id}` uses schema `{found}`, expected `{expected}`")]
    SchemaMismatch {
        report_id: String,
        expected: String,
        found: String,
    },
    #[error("csv: {0}")]
    Csv(String),
}

pub fn export_header(schema: &Schema) -> Vec<String> {
    let mut h = vec!["report_id".to_string(), "filename".to_string()];
    h.extend(schema.fields.iter().map(|f| f.export_header()));
    h.extend(review_surface(schema).iter().map(|f| format!("review_status_{}", f.field_id)));
    h
}

fn status_token(s: ReviewStatus) -> &'static str {
    match s {
        ReviewStatus::Unreviewed => "unreviewed",
        ReviewStatus::Confirmed => "confirmed",
        ReviewStatus::Edited => "edited",
    }
}

/// One CSV row per record, ordered by report id.
pub fn export_table(
    records: &[ReportRecord],
    schema: &Schema,
    version: ExportVersion,
) -> Result<Vec<u8>, ExportError> {
    if let Some(r) = records.iter().find(|r| r.schema_id != schema.schema_id) {
        return Err(ExportError::SchemaMismatch {
            report_id: r.report_id.clone(),
            expected: schema.schema_id.clone(),
            found: r.schema_id.clone(),
        });
    }
    let mut sorted: Vec<&ReportRecord> = records.iter().collect();
    sorted.sort_by(|a, b| a.report_id.cmp(&b.report_id));

    let surface = review_surface(schema);
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    let csv_err = |e: csv::Error| ExportError::Csv(e.to_string());
    w.write_record(export_header(schema)).map_err(csv_err)?;
    for r in sorted {
        let mut row = Vec::with_capacity(schema.fields.len() + surface.len() + 2);
        row.push(r.report_id.clone());
        row.push(r.filename.clone());
        for f in &schema.fields {
            let value = match version {
                ExportVersion::Machine => r.machine_value(&f.field_id),
                ExportVersion::Human => r.effective_value(&f.field_id),
            };
            row.push(value.map(NormalizedValue::render).unwrap_or_default());
        }
        for f in &surface {
            let s = r.review_status.get(&f.field_id).copied().unwrap_or(ReviewStatus::Unreviewed);
            row.push(status_token(s).to_string());
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| ExportError::Csv(e.to_string()))
}
