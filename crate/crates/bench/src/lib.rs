//! Fixtures shared by the benchmarks.

use sonotab_core::extraction::{extract_report, HedgeLexicon, RuleBasedBackend};
use sonotab_core::synth::generate_corpus;
use sonotab_core::{default_schema, ingest_text, ReviewStore, SourceDocument};

pub const COHORT: &str = "bench";

pub fn documents(count: usize) -> Vec<SourceDocument> {
    generate_corpus(42, count)
        .into_iter()
        .map(|r| ingest_text(&r.text, &r.filename).expect("synthetic text ingests"))
        .collect()
}

/// An in-memory store holding `count` extracted reports in [`COHORT`].
pub fn populated_store(count: usize) -> ReviewStore {
    let store = ReviewStore::in_memory();
    let schema = store.register_schema(default_schema());
    let hedges = HedgeLexicon::default();
    for doc in documents(count) {
        let ex = extract_report(&doc, &schema, &RuleBasedBackend, &hedges).expect("rule backend never fails");
        store.create_record(ex, &doc.filename, COHORT).expect("fresh store");
    }
    store
}
