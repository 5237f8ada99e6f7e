use super::{BackendKind, BackendOutput, BackendError, ExtractorBackend, RawExtraction, RawField, StatusHint};
use crate::ingest::{segment_sentences, SourceDocument};
use crate::schema::Schema;

/// Deterministic backend driven by the schema's extraction rules.
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedBackend;

impl ExtractorBackend for RuleBasedBackend {
    fn name(&self) -> &str {
        "rule_based"
    }

    fn kind(&self) -> BackendKind {
        BackendKind::RuleBased
    }

    fn run(&self, doc: &SourceDocument, schema: &Schema, _: Option<&str>) -> Result<BackendOutput, BackendError> {
        Ok(BackendOutput::Raw(rule_based_extract(doc, schema)))
    }
}

/// Applies each field's rules in priority order to every sentence. The first
/// rule that matches anywhere wins; its value comes from the first matching
/// sentence and its evidence is every sentence it matched.
///
/// Rules see sentence text with whitespace runs collapsed to one space, so
/// line wrapping in the source does not break patterns.
pub fn rule_based_extract(doc: &SourceDocument, schema: &Schema) -> RawExtraction {
    let sentences = segment_sentences(doc);
    let collapsed: Vec<String> = sentences
        .iter()
        .map(|s| s.text.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect();

    let mut out = RawExtraction::default();
    for (pos, spec) in schema.fields.iter().enumerate() {
        let mut field = RawField::missing();
        for (regex, rule) in schema.rules_for(pos).iter().zip(&spec.extraction_rules) {
            let mut value = None;
            let mut evidence = Vec::new();
            for (sentence, text) in sentences.iter().zip(&collapsed) {
                if let Some(caps) = regex.captures(text) {
                    if value.is_none() {
                        let mut v = String::new();
                        caps.expand(&rule.value, &mut v);
                        value = Some(v.trim().to_string());
                    }
                    evidence.push(sentence.text.clone());
                }
            }
            if let Some(v) = value.filter(|v| !v.is_empty()) {
                field = RawField {
                    raw_value: Some(v),
                    evidence_sentences: evidence,
                    status_hint: StatusHint::Present,
                };
                break;
            }
        }
        out.fields.insert(spec.field_id.clone(), field);
    }
    out
}
