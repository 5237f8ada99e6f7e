//! The rule backend against the generator's ground truth, plus evidence
//! fidelity over the same corpus rendered as text and as PDF.

use sonotab_core::evidence::{normalize_for, MatchKind};
use sonotab_core::extraction::{extract_report, FieldStatus, HedgeLexicon, RuleBasedBackend};
use sonotab_core::ingest::{ingest_pdf, ingest_text, SourceDocument};
use sonotab_core::normalize::NormalizedValue;
use sonotab_core::schema::default_schema;
use sonotab_core::synth::{covered_fields, generate_corpus, TruthEntry, TruthStatus, TruthValue};
use sonotab_core::ReportExtraction;

fn agrees(truth: &TruthEntry, status: FieldStatus, value: Option<&NormalizedValue>) -> bool {
    let expected_status = match truth.status {
        TruthStatus::Present => FieldStatus::Present,
        TruthStatus::Missing => FieldStatus::Missing,
        TruthStatus::Ambiguous => FieldStatus::Ambiguous,
    };
    let value_ok = match (&truth.value, value) {
        (None, None) => true,
        (Some(TruthValue::Number(n)), Some(NormalizedValue::Quantity(q))) => q.magnitude == *n,
        (Some(TruthValue::Flag(b)), Some(NormalizedValue::Boolean(v))) => b == v,
        (Some(TruthValue::Token(t)), Some(NormalizedValue::Category(v))) => t == v,
        _ => false,
    };
    status == expected_status && value_ok
}

/// Every anchored span reproduces its sentence under the declared match
/// kind, computed here from page text directly.
fn fidelity_violations(doc: &SourceDocument, ex: &ReportExtraction) -> Vec<String> {
    let collapse = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut bad = Vec::new();
    for f in ex.fields.values() {
        for span in &f.evidence {
            let page = &doc.pages[span.page_index];
            let local: String = page
                .text
                .chars()
                .skip(span.char_start - page.start_offset)
                .take(span.char_end - span.char_start)
                .collect();
            let ok = match span.match_kind {
                MatchKind::Exact => local == span.sentence_text,
                MatchKind::WhitespaceNormalized => collapse(&local) == collapse(&span.sentence_text),
                MatchKind::CaseInsensitive => {
                    collapse(&local.to_lowercase()) == collapse(&span.sentence_text.to_lowercase())
                }
            };
            let declared = normalize_for(span.match_kind, &local) == normalize_for(span.match_kind, &span.sentence_text);
            if !ok || !declared || span.char_end > page.end_offset {
                bad.push(format!("{}: {:?}", f.field_id, span));
            }
        }
        if !f.unanchored_evidence.is_empty() && !f.needs_review {
            bad.push(format!("{}: unanchored evidence without review flag", f.field_id));
        }
    }
    bad
}

#[test]
fn rule_backend_reproduces_ground_truth() {
    let schema = default_schema();
    let hedges = HedgeLexicon::default();
    let corpus = generate_corpus(7, 100);
    let covered = covered_fields();
    let mut mismatches = Vec::new();
    for report in &corpus {
        let doc = ingest_text(&report.text, &report.filename).unwrap();
        let ex = extract_report(&doc, &schema, &RuleBasedBackend, &hedges).unwrap();
        for id in &covered {
            let f = &ex.fields[id];
            if !agrees(&report.truth[id], f.status, f.normalized_value.as_ref()) {
                mismatches.push(format!(
                    "{} {id}: truth {:?}, got {:?} {:?} (raw {:?})",
                    report.filename, report.truth[id], f.status, f.normalized_value, f.raw_value
                ));
            }
        }
        for (id, f) in &ex.fields {
            if !covered.contains(id) {
                assert_eq!(f.status, FieldStatus::Missing, "{id} has no rules");
            }
        }
    }
    assert!(mismatches.is_empty(), "{} mismatches:\n{}", mismatches.len(), mismatches.join("\n"));
}

#[test]
fn corpus_exercises_every_status() {
    let corpus = generate_corpus(7, 100);
    for status in [TruthStatus::Present, TruthStatus::Missing, TruthStatus::Ambiguous] {
        assert!(corpus.iter().any(|r| r.truth.values().any(|t| t.status == status)));
    }
    for id in covered_fields() {
        assert!(
            corpus.iter().any(|r| r.truth[&id].status == TruthStatus::Present),
            "{id} never present"
        );
    }
}

#[test]
fn evidence_fidelity_text_and_pdf() {
    let schema = default_schema();
    let hedges = HedgeLexicon::default();
    let mut spans = 0;
    for report in generate_corpus(11, 40) {
        let docs = [
            ingest_text(&report.text, &report.filename).unwrap(),
            ingest_pdf(&report.to_pdf(9), &report.filename).unwrap(),
        ];
        for doc in &docs {
            let ex = extract_report(doc, &schema, &RuleBasedBackend, &hedges).unwrap();
            let bad = fidelity_violations(doc, &ex);
            assert!(bad.is_empty(), "{}: {bad:?}", report.filename);
            spans += ex.fields.values().map(|f| f.evidence.len()).sum::<usize>();
            for f in ex.fields.values().filter(|f| f.status == FieldStatus::Present) {
                assert!(!f.evidence.is_empty() || f.needs_review);
            }
        }
    }
    assert!(spans > 500);
}
