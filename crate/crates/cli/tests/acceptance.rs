//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed. Uses the rule-based backend only.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, OnceLock};
use std::time::{Duration, Instant};

use axum::http::{Method, StatusCode};
use common::*;
use proptest::prelude::*;
use proptest::test_runner::{Config as RunnerConfig, TestRunner};
use sonotab::router;
use sonotab_core::export::{export_header, ExportVersion};
use sonotab_core::extraction::{
    BackendError, BackendKind, BackendOutput, ExtractorBackend, FieldStatus, HedgeLexicon, RawExtraction, RawField,
    RuleBasedBackend, StatusHint,
};
use sonotab_core::ingest::{ingest_pdf, ingest_text, SourceDocument};
use sonotab_core::jobs::{FileRef, JobConfig, JobError, JobManager};
use sonotab_core::normalize::{express_in, normalize_term, normalize_unit};
use sonotab_core::schema::{default_schema, Schema, ValueType, INTERPRETIVE_FIELD_IDS};
use sonotab_core::store::ReviewStore;
use sonotab_core::synth::{covered_fields, generate_corpus, SyntheticReport, TruthStatus, TruthValue};
use sonotab_core::{extract_report, process_bytes, ReportExtraction};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took < limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

fn schema() -> &'static Schema {
    static S: OnceLock<Schema> = OnceLock::new();
    S.get_or_init(default_schema)
}

fn runtime() -> &'static tokio::runtime::Runtime {
    static R: OnceLock<tokio::runtime::Runtime> = OnceLock::new();
    R.get_or_init(|| tokio::runtime::Runtime::new().unwrap())
}

fn corpus_files(reports: &[SyntheticReport]) -> Vec<(String, Vec<u8>)> {
    reports.iter().map(|r| (r.filename.clone(), r.text.clone().into_bytes())).collect()
}

fn store_with(reports: &[SyntheticReport], cohort: &str) -> (ReviewStore, Vec<String>) {
    let store = ReviewStore::in_memory();
    let schema = store.register_schema(schema().clone());
    let hedges = HedgeLexicon::default();
    let ids = reports
        .iter()
        .map(|r| {
            process_bytes(&store, &RuleBasedBackend, &hedges, &schema, &r.filename, r.text.as_bytes(), cohort)
                .unwrap()
                .report_id
        })
        .collect();
    (store, ids)
}

// 1. Selective review surface.
fn selective_surface() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let app = router(app_state(tmp.path(), 1));
    let (s, accepted) = runtime().block_on(upload(&app, &corpus_files(&generate_corpus(1, 1))));
    ensure(s == StatusCode::ACCEPTED, || format!("upload: {s} {accepted}"))?;
    let job = accepted["job_id"].as_str().unwrap().to_string();
    runtime().block_on(wait_job(&app, &job, Duration::from_secs(10)));

    let start = Instant::now();
    let (review, full) = runtime().block_on(async {
        let (_, list) = get_json(&app, "/v1/reports").await;
        let rid = list["reports"][0]["report_id"].as_str().unwrap().to_string();
        let (_, review) = get_json(&app, &format!("/v1/reports/{rid}/review")).await;
        let (_, full) = get_json(&app, &format!("/v1/reports/{rid}/full")).await;
        (review, full)
    });
    let took = within(Duration::from_secs(1), start)?;

    let rows = review["fields"].as_array().unwrap();
    let ids: Vec<&str> = rows.iter().map(|f| f["field_id"].as_str().unwrap()).collect();
    let labels: Vec<&str> = rows.iter().map(|f| f["label"].as_str().unwrap()).collect();
    ensure(ids == INTERPRETIVE_FIELD_IDS, || format!("review fields {ids:?}"))?;
    let expected_labels = [
        "Endometriosis Type",
        "Right Uterosacral Ligament Nodules",
        "Left Uterosacral Ligament Nodules",
        "Pouch of Douglas Obliteration",
        "Bowel Deep Infiltrating Endometriosis",
    ];
    ensure(labels == expected_labels, || format!("labels {labels:?}"))?;
    let n_full = full["fields"].as_array().unwrap().len();
    ensure(n_full >= 160, || format!("full surface has {n_full} fields"))?;
    Ok(format!("review=5 fields, full={n_full} fields, {took:.2?}"))
}

fn truth_cell(value: &Option<TruthValue>) -> String {
    match value {
        None => String::new(),
        Some(TruthValue::Number(n)) => n.to_string(),
        Some(TruthValue::Flag(b)) => if *b { "yes" } else { "no" }.to_string(),
        Some(TruthValue::Token(t)) => t.clone(),
    }
}

// 2. Rule backend reproduces generator truth; absent findings are missing
// with empty export cells.
fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let corpus = generate_corpus(2024, 100);
    let (store, ids) = store_with(&corpus, "oracle");
    let rows = parse_csv(&store.export("oracle", ExportVersion::Machine).unwrap());
    let header = &rows[0];
    let covered = covered_fields();
    let (mut checked, mut missing) = (0usize, 0usize);
    let mut mismatches = Vec::new();
    for (report, rid) in corpus.iter().zip(&ids) {
        let record = store.record(rid).unwrap();
        let row = rows.iter().find(|r| &r[0] == rid).unwrap();
        for id in &covered {
            let truth = &report.truth[id];
            let field = &record.machine.fields[id];
            let col = header.iter().position(|h| *h == schema().field(id).unwrap().export_header()).unwrap();
            let want_status = match truth.status {
                TruthStatus::Present => FieldStatus::Present,
                TruthStatus::Missing => FieldStatus::Missing,
                TruthStatus::Ambiguous => FieldStatus::Ambiguous,
            };
            checked += 1;
            if truth.status == TruthStatus::Missing {
                missing += 1;
            }
            if field.status != want_status || row[col] != truth_cell(&truth.value) {
                mismatches.push(format!(
                    "{} {id}: truth {:?}/{:?}, got {:?}/{:?}",
                    report.filename, truth.status, truth.value, field.status, row[col]
                ));
            }
        }
    }
    let took = within(Duration::from_secs(30), start)?;
    ensure(mismatches.is_empty(), || format!("{} mismatches, first: {}", mismatches.len(), mismatches[0]))?;
    ensure(missing > 0, || "corpus has no absent findings".into())?;
    Ok(format!("{checked} field checks over 100 reports, {missing} missing, 100% agreement, {took:.2?}"))
}

/// Character slice of a page, computed independently of the anchoring code.
fn page_slice(doc: &SourceDocument, page: usize, start: usize, end: usize) -> Option<String> {
    let p = doc.pages.get(page)?;
    let local_start = start.checked_sub(p.start_offset)?;
    let chars: Vec<char> = p.text.chars().collect();
    (end >= start && local_start + (end - start) <= chars.len())
        .then(|| chars[local_start..local_start + (end - start)].iter().collect())
}

fn fidelity_violations(doc: &SourceDocument, ex: &ReportExtraction) -> (usize, Vec<String>) {
    let collapse = |s: &str| s.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut spans = 0;
    let mut bad = Vec::new();
    for f in ex.fields.values() {
        for span in &f.evidence {
            spans += 1;
            let ok = page_slice(doc, span.page_index, span.char_start, span.char_end).is_some_and(|local| {
                match span.match_kind {
                    sonotab_core::MatchKind::Exact => local == span.sentence_text,
                    sonotab_core::MatchKind::WhitespaceNormalized => collapse(&local) == collapse(&span.sentence_text),
                    sonotab_core::MatchKind::CaseInsensitive => {
                        collapse(&local.to_lowercase()) == collapse(&span.sentence_text.to_lowercase())
                    }
                }
            });
            if !ok {
                bad.push(format!("{} {}: {:?}", doc.filename, f.field_id, span));
            }
        }
        if !f.unanchored_evidence.is_empty() && !f.needs_review {
            bad.push(format!("{} {}: unanchored without review flag", doc.filename, f.field_id));
        }
    }
    (spans, bad)
}

/// Reports evidence that does not occur in the document.
struct Fabricating;

impl ExtractorBackend for Fabricating {
    fn name(&self) -> &str {
        "fabricating"
    }
    fn kind(&self) -> BackendKind {
        BackendKind::RuleBased
    }
    fn run(&self, _: &SourceDocument, schema: &Schema, _: Option<&str>) -> Result<BackendOutput, BackendError> {
        let mut raw = RawExtraction::default();
        for f in &schema.fields {
            raw.fields.insert(f.field_id.clone(), RawField::missing());
        }
        raw.fields.insert(
            "uterus_length_mm".into(),
            RawField {
                raw_value: Some("80 mm".into()),
                evidence_sentences: vec!["The uterus measures 80 mm in length.".into()],
                status_hint: StatusHint::Present,
            },
        );
        Ok(BackendOutput::Raw(raw))
    }
}

// 3. Evidence fidelity across the corpus as text and as PDF.
fn evidence_fidelity() -> Outcome {
    let hedges = HedgeLexicon::default();
    let (mut spans, mut violations) = (0usize, Vec::new());
    for report in generate_corpus(99, 100) {
        let docs = [
            ingest_text(&report.text, &report.filename).unwrap(),
            ingest_pdf(&report.to_pdf(9), &report.filename).unwrap(),
        ];
        for doc in docs {
            let ex = extract_report(&doc, schema(), &RuleBasedBackend, &hedges).unwrap();
            let (n, bad) = fidelity_violations(&doc, &ex);
            spans += n;
            violations.extend(bad);
        }
    }
    let doc = ingest_text("Uterus anteverted. Length 8 cm.", "x.txt").unwrap();
    let ex = extract_report(&doc, schema(), &Fabricating, &hedges).unwrap();
    let f = &ex.fields["uterus_length_mm"];
    ensure(
        f.evidence.is_empty() && f.unanchored_evidence.len() == 1 && f.needs_review,
        || format!("fabricated evidence not flagged: {f:?}"),
    )?;
    ensure(spans > 0, || "no anchored spans".into())?;
    ensure(violations.is_empty(), || format!("{} violations, first: {}", violations.len(), violations[0]))?;
    Ok(format!("{spans} anchored spans over 200 documents, 0 violations; unanchored sentence flagged"))
}

/// A raw value valid for the field; blank when `pick` says so.
fn valid_raw(field: usize, pick: usize) -> Option<String> {
    let f = &schema().fields[field];
    if pick.is_multiple_of(7) {
        return None;
    }
    Some(match f.value_type {
        ValueType::Categorical => {
            let values = f.allowed_values.as_ref().unwrap();
            values[pick % values.len()].clone()
        }
        ValueType::Numeric => {
            let unit = f.canonical_unit.unwrap();
            if pick.is_multiple_of(2) {
                let alt = if unit.suffix() == "mm" { "cm" } else { "cc" };
                format!("{}.{} {alt}", pick % 9, pick % 10)
            } else {
                format!("{} {}", pick % 50, unit.suffix())
            }
        }
        ValueType::Boolean => ["yes", "no"][pick % 2].to_string(),
        ValueType::Text => format!("note {pick}"),
    })
}

fn base_extractions() -> &'static Vec<(String, ReportExtraction)> {
    static E: OnceLock<Vec<(String, ReportExtraction)>> = OnceLock::new();
    E.get_or_init(|| {
        generate_corpus(5, 10)
            .into_iter()
            .map(|r| {
                let doc = ingest_text(&r.text, &r.filename).unwrap();
                let ex = extract_report(&doc, schema(), &RuleBasedBackend, &HedgeLexicon::default()).unwrap();
                (r.filename, ex)
            })
            .collect()
    })
}

fn fresh_store() -> (ReviewStore, Vec<String>) {
    let store = ReviewStore::in_memory();
    store.register_schema(schema().clone());
    let ids = base_extractions()
        .iter()
        .map(|(name, ex)| store.create_record(ex.clone(), name, "c").unwrap())
        .collect();
    (store, ids)
}

fn cell_diff(machine: &[Vec<String>], human: &[Vec<String>]) -> BTreeSet<(String, String)> {
    let mut diff = BTreeSet::new();
    for (m, h) in machine.iter().zip(human).skip(1) {
        for (j, (a, b)) in m.iter().zip(h).enumerate() {
            if a != b {
                diff.insert((m[0].clone(), machine[0][j].clone()));
            }
        }
    }
    diff
}

// 4. Dual-version delta law: k edits that each change a value show up as
// exactly k differing cells.
fn delta_law() -> Outcome {
    let n_fields = schema().fields.len();
    let strategy = prop::collection::btree_set((0..10usize, 0..n_fields), 1..=8)
        .prop_flat_map(|cells| {
            let k = cells.len();
            (Just(cells), prop::collection::vec(any::<usize>(), k))
        });
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 1000,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    let result = runner.run(&strategy, |(cells, picks)| {
        let (store, ids) = fresh_store();
        let mut expected = BTreeSet::new();
        for (&(r, f), &pick) in cells.iter().zip(&picks) {
            let field_id = &schema().fields[f].field_id;
            let machine = store.record(&ids[r]).unwrap().machine_value(field_id).map(|v| v.render());
            // Walk candidate values until one differs from the machine value.
            let mut p = pick;
            loop {
                let raw = valid_raw(f, p);
                store.apply_edit(&ids[r], field_id, raw.as_deref(), "acceptance").unwrap();
                let now = store.record(&ids[r]).unwrap().effective_value(field_id).map(|v| v.render());
                if now != machine {
                    break;
                }
                p = p.wrapping_add(1);
            }
            expected.insert((ids[r].clone(), schema().fields[f].export_header()));
        }
        let m = parse_csv(&store.export("c", ExportVersion::Machine).unwrap());
        let h = parse_csv(&store.export("c", ExportVersion::Human).unwrap());
        prop_assert_eq!(&m[0], &h[0]);
        let diff = cell_diff(&m, &h);
        prop_assert_eq!(diff.len(), cells.len());
        prop_assert_eq!(diff, expected);
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok("1000 randomized trials, 0 violations".into())
}

// 5. Batch contract.
fn batch_contract() -> Outcome {
    let start = Instant::now();
    // Direct submission over the cap.
    let store = Arc::new(ReviewStore::in_memory());
    store.register_schema(schema().clone());
    let manager =
        JobManager::new(store, Arc::new(RuleBasedBackend), Arc::new(HedgeLexicon::default()), JobConfig::default())
            .unwrap();
    let over: Vec<FileRef> = (0..5001).map(|i| FileRef::inline(format!("f{i}.txt"), vec![b'x'; 4])).collect();
    let rejected = manager.submit(over, &schema().schema_id);
    ensure(
        matches!(rejected, Err(JobError::BatchLimitExceeded { count: 5001, limit: 5000 })),
        || format!("5001-file submit gave {rejected:?}"),
    )?;
    ensure(manager.list().is_empty(), || "rejected batch left a job behind".into())?;
    drop(manager);

    let corpus = generate_corpus(77, 100);
    let files = corpus_files(&corpus);
    let rt = runtime();

    // Over the cap through the upload endpoint.
    let tmp = tempfile::tempdir().unwrap();
    let app = router(app_state(tmp.path(), 1));
    let many: Vec<(String, Vec<u8>)> = (0..5001).map(|i| (format!("f{i}.txt"), vec![b'x'; 4])).collect();
    let (s, v) = rt.block_on(upload(&app, &many));
    ensure(s == StatusCode::PAYLOAD_TOO_LARGE, || format!("upload of 5001 files gave {s} {v}"))?;

    let mut finals = Vec::new();
    let mut polls = 0usize;
    for workers in [1usize, 4] {
        let tmp = tempfile::tempdir().unwrap();
        let app = router(app_state(tmp.path(), workers));
        let (s, accepted) = rt.block_on(upload(&app, &files));
        ensure(s == StatusCode::ACCEPTED, || format!("upload: {s} {accepted}"))?;
        let job = accepted["job_id"].as_str().unwrap().to_string();
        ensure(accepted["total"] == 100, || format!("total {}", accepted["total"]))?;

        let sequences: Vec<Vec<(u64, u64, String)>> = rt.block_on(async {
            let pollers: Vec<_> = (0..4)
                .map(|_| {
                    let app = app.clone();
                    let job = job.clone();
                    tokio::spawn(async move {
                        let mut seen = Vec::new();
                        let deadline = Instant::now() + Duration::from_secs(50);
                        loop {
                            let (_, p) = get_json(&app, &format!("/v1/jobs/{job}")).await;
                            let state = p["state"].as_str().unwrap().to_string();
                            seen.push((p["done"].as_u64().unwrap(), p["failed"].as_u64().unwrap(), state.clone()));
                            if state == "completed" || Instant::now() > deadline {
                                return seen;
                            }
                            tokio::time::sleep(Duration::from_millis(5)).await;
                        }
                    })
                })
                .collect();
            let mut out = Vec::new();
            for p in pollers {
                out.push(p.await.unwrap());
            }
            out
        });
        for seq in &sequences {
            polls += seq.len();
            let monotone = seq.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1);
            ensure(monotone, || format!("progress went backwards with {workers} workers: {seq:?}"))?;
            let last = seq.last().unwrap();
            ensure(last.2 == "completed" && last.0 == 100 && last.1 == 0, || format!("final progress {last:?}"))?;
        }

        let (_, list) = rt.block_on(get_json(&app, "/v1/reports?limit=1000"));
        let mut ids: Vec<String> =
            list["reports"].as_array().unwrap().iter().map(|r| r["report_id"].as_str().unwrap().to_string()).collect();
        ids.sort();
        let (_, csv) = rt.block_on(send(&app, Method::GET, &format!("/v1/exports/{job}/machine"), None));
        let mut fields = BTreeMap::new();
        for id in &ids {
            let (_, full) = rt.block_on(get_json(&app, &format!("/v1/reports/{id}/full")));
            fields.insert(id.clone(), full["fields"].clone());
        }
        finals.push((ids, csv, fields));
    }
    let took = within(Duration::from_secs(60), start)?;
    ensure(finals[0].0.len() == 100, || format!("{} records", finals[0].0.len()))?;
    ensure(finals[0].0 == finals[1].0, || "record ids differ between 1 and 4 workers".into())?;
    ensure(finals[0].1 == finals[1].1, || "machine exports differ between 1 and 4 workers".into())?;
    ensure(finals[0].2 == finals[1].2, || "record contents differ between 1 and 4 workers".into())?;
    Ok(format!("5001 rejected (413); 100 files, {polls} concurrent polls monotone; workers 1 = 4; {took:.2?}"))
}

#[derive(Debug, Clone)]
enum Action {
    Edit { report: usize, field: usize, pick: usize },
    Confirm { report: usize, field: usize },
    Save { report: usize, edits: Vec<(usize, usize)> },
    FailingSave { report: usize, edits: Vec<(usize, usize)>, poison_at: usize },
}

fn action() -> impl Strategy<Value = Action> {
    let n = schema().fields.len();
    prop_oneof![
        (0..10usize, 0..n, any::<usize>()).prop_map(|(report, field, pick)| Action::Edit { report, field, pick }),
        (0..10usize, 0..n).prop_map(|(report, field)| Action::Confirm { report, field }),
        (0..10usize, prop::collection::vec((0..n, any::<usize>()), 0..5))
            .prop_map(|(report, edits)| Action::Save { report, edits }),
        (0..10usize, prop::collection::vec((0..n, any::<usize>()), 0..5), any::<usize>())
            .prop_map(|(report, edits, poison_at)| Action::FailingSave { report, edits, poison_at }),
    ]
}

// 6. Failing saves change nothing; machine extractions never change.
fn atomicity_and_immutability() -> Outcome {
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 500,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    let failing = std::sync::atomic::AtomicUsize::new(0);
    let result = runner.run(&prop::collection::vec(action(), 1..16), |actions| {
        let (store, ids) = fresh_store();
        let machine_before: Vec<String> =
            ids.iter().map(|id| serde_json::to_string(&store.record(id).unwrap().machine).unwrap()).collect();
        for a in actions {
            match a {
                Action::Edit { report, field, pick } => {
                    store
                        .apply_edit(&ids[report], &schema().fields[field].field_id, valid_raw(field, pick).as_deref(), "a")
                        .unwrap();
                }
                Action::Confirm { report, field } => {
                    store.confirm_field(&ids[report], &schema().fields[field].field_id, "a").unwrap();
                }
                Action::Save { report, edits } => {
                    let batch: Vec<_> =
                        edits.iter().map(|&(f, p)| (schema().fields[f].field_id.clone(), valid_raw(f, p))).collect();
                    store.batch_save(&ids[report], &batch, "a").unwrap();
                }
                Action::FailingSave { report, edits, poison_at } => {
                    let mut batch: Vec<_> =
                        edits.iter().map(|&(f, p)| (schema().fields[f].field_id.clone(), valid_raw(f, p))).collect();
                    let bad = match poison_at % 3 {
                        0 => ("no_such_field".to_string(), Some("1".to_string())),
                        1 => ("pod_obliteration".to_string(), Some("frobnicated".to_string())),
                        _ => ("uterus_length_mm".to_string(), Some("long".to_string())),
                    };
                    batch.insert(poison_at % (batch.len() + 1), bad);
                    let before = serde_json::to_string(&store.review_payload(&ids[report]).unwrap()).unwrap();
                    let full_before = serde_json::to_string(&store.full_payload(&ids[report]).unwrap()).unwrap();
                    prop_assert!(store.batch_save(&ids[report], &batch, "a").is_err());
                    prop_assert_eq!(serde_json::to_string(&store.review_payload(&ids[report]).unwrap()).unwrap(), before);
                    prop_assert_eq!(serde_json::to_string(&store.full_payload(&ids[report]).unwrap()).unwrap(), full_before);
                    failing.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                }
            }
        }
        for (id, before) in ids.iter().zip(&machine_before) {
            prop_assert_eq!(&serde_json::to_string(&store.record(id).unwrap().machine).unwrap(), before);
        }
        Ok(())
    });
    result.map_err(|e| e.to_string())?;
    Ok(format!(
        "500 action sequences, {} failing saves left payloads unchanged, machine extractions byte-identical",
        failing.into_inner()
    ))
}

// 7. Normalizer laws.
fn normalizer_laws() -> Outcome {
    let table = &schema().synonyms;
    for (surface, token) in [("POD obliteration", "pouch_of_douglas_obliteration"), ("mass", "lesion")] {
        let got = normalize_term(surface, table);
        ensure(got.token == token && got.mapped, || format!("{surface:?} -> {got:?}"))?;
    }
    let mut runner = TestRunner::new(RunnerConfig {
        cases: 2000,
        failure_persistence: None,
        ..RunnerConfig::default()
    });
    let phrases: Vec<String> = schema().synonyms.entries.keys().cloned().collect();
    let raw = prop_oneof![
        "[A-Za-z ]{1,30}".prop_map(|s| s),
        prop::sample::select(phrases).prop_map(|s| s.to_uppercase()),
    ];
    runner
        .run(&raw, |raw| {
            let once = normalize_term(&raw, table).token;
            prop_assert_eq!(normalize_term(&once, table).token, once);
            Ok(())
        })
        .map_err(|e| format!("idempotence: {e}"))?;
    runner
        .run(&(1e-6f64..1e6), |mm| {
            let cm = express_in(normalize_unit(mm, "mm").unwrap(), "cm").unwrap();
            let back = normalize_unit(cm, "cm").unwrap().magnitude;
            prop_assert!(((back - mm) / mm).abs() <= 1e-9, "{} -> {} -> {}", mm, cm, back);
            Ok(())
        })
        .map_err(|e| format!("mm/cm round trip: {e}"))?;
    Ok("synonym pairs map; 2000 idempotence cases; 2000 mm<->cm round trips within 1e-9".into())
}

// 8. No confidence anywhere in the review contract or exports.
fn no_confidence() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let app = router(app_state(tmp.path(), 1));
    let rt = runtime();
    let (_, accepted) = rt.block_on(upload(&app, &corpus_files(&generate_corpus(8, 3))));
    let job = accepted["job_id"].as_str().unwrap().to_string();
    rt.block_on(wait_job(&app, &job, Duration::from_secs(10)));
    let (_, list) = rt.block_on(get_json(&app, "/v1/reports"));
    let mut all_keys = Vec::new();
    keys(&list, &mut all_keys);
    for r in list["reports"].as_array().unwrap() {
        let rid = r["report_id"].as_str().unwrap();
        for view in ["review", "full"] {
            let (_, v) = rt.block_on(get_json(&app, &format!("/v1/reports/{rid}/{view}")));
            keys(&v, &mut all_keys);
        }
    }
    let mut headers = export_header(schema());
    for version in ["machine", "human"] {
        let (_, csv) = rt.block_on(send(&app, Method::GET, &format!("/v1/exports/{job}/{version}"), None));
        headers.extend(parse_csv(&csv)[0].clone());
    }
    let offending: Vec<&String> = all_keys
        .iter()
        .chain(&headers)
        .filter(|k| k.to_lowercase().contains("confidence"))
        .collect();
    ensure(offending.is_empty(), || format!("confidence keys: {offending:?}"))?;
    let distinct: BTreeSet<&String> = all_keys.iter().collect();
    Ok(format!("{} payload keys and {} export headers checked", distinct.len(), headers.len()))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("selective review surface", selective_surface),
        ("oracle equivalence", oracle_equivalence),
        ("evidence fidelity", evidence_fidelity),
        ("dual-version delta law", delta_law),
        ("batch contract", batch_contract),
        ("atomicity and immutability", atomicity_and_immutability),
        ("normalizer laws", normalizer_laws),
        ("no confidence fields", no_confidence),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let took = start.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {}: PASS {name} ({took:.2?}): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name} ({took:.2?}): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} of {} criteria failed", criteria.len());
        std::process::exit(1);
    }
    println!("acceptance: all {} criteria passed", criteria.len());
}
