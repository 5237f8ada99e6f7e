use std::fmt::Write as _;

use serde_json::{Map, Value};

use super::{ExtractionError, RawExtraction, RawField, StatusHint};
use crate::ingest::SourceDocument;
use crate::schema::{Schema, ValueType};

pub const REPAIR_INSTRUCTION: &str = "Your previous reply could not be parsed. Reply again with only \
the JSON object described above: no prose, no code fences.";

pub fn build_extraction_prompt(schema: &Schema, doc: &SourceDocument) -> String {
    build_prompt_for_text(schema, &doc.full_text())
}

/// The prompt for one piece of report text. Deterministic in its inputs.
pub fn build_prompt_for_text(schema: &Schema, text: &str) -> String {
    let mut p = String::new();
    p.push_str(
        "You extract structured findings from a transvaginal ultrasound report.\n\
         Return exactly one JSON object keyed by field_id. Each value is an object\n\
         {\"raw_value\": <text as written in the report, or null>, \"evidence_sentences\": [<sentences copied verbatim from the report>]}.\n\
         Use null for raw_value and an empty list for evidence_sentences when the report does not state the finding.\n\
         Do not guess. Do not add fields that are not listed.\n\n",
    );
    let _ = writeln!(p, "Schema {} version {}. Fields:", schema.schema_id, schema.version);
    for f in &schema.fields {
        let ty = match f.value_type {
            ValueType::Categorical => "categorical",
            ValueType::Numeric => "numeric",
            ValueType::Boolean => "boolean",
            ValueType::Text => "text",
        };
        let _ = write!(p, "- {} ({ty}", f.field_id);
        if let Some(values) = &f.allowed_values {
            let _ = write!(p, "; allowed: {}", values.join("|"));
        }
        if let Some(unit) = f.canonical_unit {
            let _ = write!(p, "; unit: {}", unit.token());
        }
        let _ = writeln!(p, "): {}", f.label);
    }
    p.push_str("\nReport text begins after this line and ends at END OF REPORT.\n");
    p.push_str(text);
    p.push_str("\nEND OF REPORT\n");
    p
}

/// Strips a leading/trailing Markdown code fence if present.
fn strip_fences(text: &str) -> &str {
    let t = text.trim();
    let Some(rest) = t.strip_prefix("```") else {
        return t;
    };
    let rest = rest.split_once('\n').map_or("", |(_, body)| body);
    rest.trim_end().strip_suffix("```").unwrap_or(rest).trim()
}

/// The first JSON object that parses, scanning from each `{` in turn.
fn first_object(text: &str) -> Option<Map<String, Value>> {
    for (i, _) in text.match_indices('{') {
        let mut stream = serde_json::Deserializer::from_str(&text[i..]).into_iter::<Value>();
        if let Some(Ok(Value::Object(map))) = stream.next() {
            return Some(map);
        }
    }
    None
}

fn as_text(v: &Value) -> Option<String> {
    match v {
        Value::Null => None,
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(true) => Some("yes".into()),
        Value::Bool(false) => Some("no".into()),
        other => Some(other.to_string()),
    }
}

fn parse_entry(v: &Value) -> RawField {
    let (raw_value, evidence, hint) = match v {
        Value::Object(o) => {
            let raw = o.get("raw_value").or_else(|| o.get("value")).and_then(as_text);
            let evidence: Vec<String> = match o.get("evidence_sentences").or_else(|| o.get("evidence")) {
                Some(Value::Array(items)) => items.iter().filter_map(|i| i.as_str().map(str::to_string)).collect(),
                Some(Value::String(s)) => vec![s.clone()],
                _ => Vec::new(),
            };
            let hint = match o.get("status").and_then(Value::as_str) {
                Some("ambiguous") => Some(StatusHint::Ambiguous),
                Some("missing") => Some(StatusHint::Missing),
                _ => None,
            };
            (raw, evidence, hint)
        }
        other => (as_text(other), Vec::new(), None),
    };
    let raw_value = raw_value.filter(|s| !s.trim().is_empty());
    let hint = match (hint, &raw_value) {
        (_, None) | (Some(StatusHint::Missing), _) => StatusHint::Missing,
        (Some(StatusHint::Ambiguous), _) => StatusHint::Ambiguous,
        _ => StatusHint::Present,
    };
    if hint == StatusHint::Missing {
        return RawField::missing();
    }
    RawField {
        raw_value,
        evidence_sentences: evidence,
        status_hint: hint,
    }
}

/// Validates a model reply against the schema. Unknown keys are dropped
/// with a warning; fields absent from the reply are materialised as missing.
pub fn parse_model_output(text: &str, schema: &Schema) -> Result<RawExtraction, ExtractionError> {
    let body = strip_fences(text);
    let mut map = first_object(body)
        .ok_or_else(|| ExtractionError::ModelOutputUnparseable("no JSON object in reply".into()))?;
    if !schema.contains("fields") {
        if let Some(Value::Object(inner)) = map.get("fields") {
            map = inner.clone();
        }
    }
    let mut out = RawExtraction::default();
    for (key, value) in &map {
        if schema.contains(key) {
            out.fields.insert(key.clone(), parse_entry(value));
        } else {
            log::warn!("dropping unknown field `{key}` from model output");
            out.warnings.push(format!("dropped unknown field `{key}`"));
        }
    }
    for spec in &schema.fields {
        out.fields.entry(spec.field_id.clone()).or_insert_with(RawField::missing);
    }
    Ok(out)
}
