use std::path::PathBuf;
use std::sync::Arc;

use dermacen_core::evaluation::*;
use dermacen_core::orchestrator::{MockProvider, ProviderSet, RetryPolicy};

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/eval-corpus")
}

fn providers() -> ProviderSet {
    let mock = MockProvider::from_dir(&corpus().join("mock")).unwrap();
    ProviderSet::from_mock(Arc::new(mock), RetryPolicy::default())
}

fn outcome() -> EvalOutcome {
    run_evaluation(
        &corpus(),
        &corpus().join("reviews.csv"),
        &providers(),
        &Weights::default(),
        &ScoringConfig::default(),
        &|_, _| {},
    )
    .unwrap()
}

#[test]
fn corpus_reproduces_capability_table() {
    let out = outcome();
    let r = &out.report;
    assert_eq!(r.case_count, 73);
    assert_eq!(r.expert.review_count, 72);
    assert!(out.review_errors.is_empty());
    assert!((r.textual_similarity.context - 0.70).abs() < 1e-9);
    assert!((r.textual_similarity.entities - 0.69).abs() < 1e-9);
    assert_eq!((r.nli_entailment.context_count, r.nli_entailment.entity_count), (63, 30));
    assert_eq!((r.nli_neutral.context_count, r.nli_neutral.entity_count), (7, 22));
    assert_eq!((r.nli_contradiction.context_count, r.nli_contradiction.entity_count), (3, 21));
    assert!((r.textual_similarity.weighted.value - 0.87).abs() <= 0.005);
    assert!((r.nli_entailment.weighted.value - 0.85).abs() <= 0.01);
    assert!((r.nli_neutral.weighted.value - 0.22).abs() <= 0.015);
    assert!((r.nli_contradiction.weighted.value - 0.17).abs() <= 0.015);
    assert_eq!(format!("{:.2} {:.2}", r.expert.context_likert, r.expert.entities_likert), "4.38 4.31");
    assert!((r.expert.mean - 0.87).abs() <= 0.005);
    assert!((r.capability.value - 0.86).abs() <= 0.01);
    assert_eq!(
        format!("{:.2} {:.2} {:.2}", r.bert.precision, r.bert.recall, r.bert.f1),
        "0.63 0.67 0.65"
    );
}

#[test]
fn worked_examples_score_as_printed() {
    let r = &outcome().report.records;
    let one = r.iter().find(|x| x.case_id == "case-001").unwrap();
    assert!((one.ts_context - 1.0).abs() < 1e-9 && (one.ts_entity - 1.0).abs() < 1e-9);
    assert_eq!(one.nli_context, NliOutcome { label: NliLabel::Entailment, probability: 0.675 });
    assert_eq!(one.nli_entity, NliOutcome { label: NliLabel::Entailment, probability: 0.49 });
    let two = r.iter().find(|x| x.case_id == "case-002").unwrap();
    assert!((two.ts_context - 0.89).abs() < 1e-9);
    assert_eq!(two.nli_entity.probability, 0.83);
}

#[test]
fn corpus_entities_match_fixture_examples() {
    let cases = load_corpus(&corpus()).unwrap();
    assert_eq!(cases[0].premise_entity, "Darier Disease");
    assert_eq!(cases[0].hypothesis_entity, "Darier Disease (Keratosis Follicularis)");
    assert_eq!((cases[1].premise_entity.as_str(), cases[1].hypothesis_entity.as_str()), ("Erysipelas", "Cellulitis"));
    assert!(cases.iter().all(|c| !c.entity_extraction_failed));
}

#[test]
fn table_and_plot_data() {
    let out = outcome();
    assert!(out.table.contains("Textual Similarity"));
    assert!(out.table.contains("(63) 0.863"));
    assert!(out.table.contains("(4.38) 0.875"));
    assert!(out.table.contains("Capability"));
    assert_eq!(out.plots.f1.counts.iter().sum::<usize>(), 73);
    let json = serde_json::to_string(&out).unwrap();
    let back: EvalOutcome = serde_json::from_str(&json).unwrap();
    assert_eq!(back.report.capability, out.report.capability);
}

