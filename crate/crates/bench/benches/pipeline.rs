use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use sonotab_bench::{documents, populated_store, COHORT};
use sonotab_core::extraction::{extract_report, HedgeLexicon, RuleBasedBackend};
use sonotab_core::ingest::segment_sentences;
use sonotab_core::{anchor_sentence, default_schema, ExportVersion};

fn segmentation(c: &mut Criterion) {
    let docs = documents(20);
    let chars: usize = docs.iter().map(|d| d.total_chars).sum();
    let mut g = c.benchmark_group("segmentation");
    g.throughput(Throughput::Bytes(chars as u64));
    g.bench_function("20_reports", |b| {
        b.iter(|| docs.iter().map(|d| segment_sentences(black_box(d)).len()).sum::<usize>())
    });
    g.finish();
}

fn anchoring(c: &mut Criterion) {
    let docs = documents(20);
    let sentences: Vec<(usize, String)> = docs
        .iter()
        .enumerate()
        .flat_map(|(i, d)| segment_sentences(d).into_iter().map(move |s| (i, s.text)))
        .collect();
    let shouted: Vec<(usize, String)> = sentences.iter().map(|(i, s)| (*i, s.to_uppercase())).collect();
    let mut g = c.benchmark_group("anchoring");
    g.throughput(Throughput::Elements(sentences.len() as u64));
    for (name, set) in [("exact", &sentences), ("case_insensitive", &shouted)] {
        g.bench_with_input(BenchmarkId::from_parameter(name), set, |b, set| {
            b.iter(|| set.iter().filter(|(i, s)| anchor_sentence(&docs[*i], black_box(s)).is_some()).count())
        });
    }
    g.finish();
}

fn rule_extraction(c: &mut Criterion) {
    let schema = default_schema();
    let hedges = HedgeLexicon::default();
    let docs = documents(10);
    let mut g = c.benchmark_group("rule_extraction");
    g.throughput(Throughput::Elements(docs.len() as u64));
    g.bench_function("10_reports", |b| {
        b.iter(|| {
            for d in &docs {
                black_box(extract_report(d, &schema, &RuleBasedBackend, &hedges).unwrap());
            }
        })
    });
    g.finish();
}

fn export(c: &mut Criterion) {
    let mut g = c.benchmark_group("export");
    for n in [10usize, 100] {
        let store = populated_store(n);
        g.throughput(Throughput::Elements(n as u64));
        g.bench_with_input(BenchmarkId::new("human", n), &store, |b, store| {
            b.iter(|| store.export(COHORT, ExportVersion::Human).unwrap().len())
        });
    }
    g.finish();
}

criterion_group!(benches, segmentation, anchoring, rule_extraction, export);
criterion_main!(benches);
