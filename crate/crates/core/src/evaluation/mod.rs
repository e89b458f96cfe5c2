//! Capability evaluation: each corpus case is scored on a context track
//! (full texts) and an entity track (diagnosis names), then folded with
//! clinician reviews into one report.

mod aggregate;
mod corpus;
mod reviews;
mod scoring;
mod table;

pub use aggregate::{aggregate, CapabilityReport, Clamped, ExpertRow, NliRow, ScoreRecord, SimilarityRow};
pub use corpus::{load_corpus, load_corpus_with, CorpusIssue, EvalCase};
pub use reviews::{ingest_expert_reviews, ExpertReview, ReviewIngest, RowError};
pub use scoring::{
    bert_score, bert_score_texts, cosine_similarity, harmonic_f1, nli_assess, textual_similarity, weighted_row,
    BertScore, NliLabel, NliOutcome, Weights,
};
pub use table::{plot_data, render_table, Histogram, PlotData};

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orchestrator::{ProviderSet, RetryFailure};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("vector dimensions differ or are empty ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("zero-length vector")]
    ZeroVector,
    #[error("no token embeddings")]
    EmptyTokens,
    #[error("empty text")]
    EmptyText,
    #[error("embedding response: {0}")]
    MissingVectors(String),
    #[error("NLI probabilities invalid: {0}")]
    InvalidProbabilities(String),
    #[error("weights must be positive and finite")]
    InvalidWeights,
    #[error("no {0} to aggregate")]
    EmptyInput(&'static str),
    #[error("provider failed: {0}")]
    Provider(#[from] RetryFailure),
    #[error("{0}")]
    Io(String),
    #[error("corpus has {} problem(s)", .0.len())]
    Corpus(Vec<CorpusIssue>),
    #[error("case {case}: {source}")]
    Case { case: String, source: Box<EvalError> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScoringConfig {
    /// Wraps each entity before NLI, e.g. `"The diagnosis is {entity}."`.
    /// Bare entity strings are used when unset.
    pub entity_template: Option<String>,
    pub workers: usize,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        Self { entity_template: None, workers: 4 }
    }
}

impl ScoringConfig {
    fn entity_text(&self, entity: &str) -> String {
        match &self.entity_template {
            Some(t) => t.replace("{entity}", entity),
            None => entity.to_string(),
        }
    }
}

/// Textual similarity, BERTScore and NLI on the full texts; textual
/// similarity and NLI on the entity strings. A case whose entity
/// extraction failed scores the entity track as 0 similarity and neutral.
pub fn score_case(case: &EvalCase, providers: &ProviderSet, config: &ScoringConfig) -> Result<ScoreRecord, EvalError> {
    let ts_context = textual_similarity(&case.premise, &case.hypothesis, providers)?;
    let bert = bert_score_texts(&case.premise, &case.hypothesis, providers)?;
    let nli_context = nli_assess(&case.premise, &case.hypothesis, providers)?;
    let (ts_entity, nli_entity) = if case.entity_extraction_failed {
        (0.0, NliOutcome { label: NliLabel::Neutral, probability: 1.0 })
    } else {
        (
            textual_similarity(&case.premise_entity, &case.hypothesis_entity, providers)?,
            nli_assess(&config.entity_text(&case.premise_entity), &config.entity_text(&case.hypothesis_entity), providers)?,
        )
    };
    Ok(ScoreRecord {
        case_id: case.id.clone(),
        ts_context,
        ts_entity,
        bert,
        nli_context,
        nli_entity,
        entity_extraction_failed: case.entity_extraction_failed,
    })
}

/// Scores cases on a pool of worker threads. Results keep corpus order;
/// the first failure (in corpus order) is returned.
pub fn score_corpus(
    cases: &[EvalCase],
    providers: &ProviderSet,
    config: &ScoringConfig,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<Vec<ScoreRecord>, EvalError> {
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let mut slots: Vec<Option<Result<ScoreRecord, EvalError>>> = vec![None; cases.len()];
    let workers = config.workers.clamp(1, cases.len().max(1));
    let results = parking_lot::Mutex::new(&mut slots);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cases.len() {
                    break;
                }
                let r = score_case(&cases[i], providers, config)
                    .map_err(|e| EvalError::Case { case: cases[i].id.clone(), source: Box::new(e) });
                results.lock()[i] = Some(r);
                progress(done.fetch_add(1, Ordering::Relaxed) + 1, cases.len());
            });
        }
    });
    slots.into_iter().map(|r| r.expect("every case scored")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub report: CapabilityReport,
    pub table: String,
    pub plots: PlotData,
    pub review_errors: Vec<RowError>,
}

/// Scores loaded cases and aggregates them with the ingested reviews.
pub fn evaluate_cases(
    cases: &[EvalCase],
    reviews: ReviewIngest,
    providers: &ProviderSet,
    weights: &Weights,
    config: &ScoringConfig,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<EvalOutcome, EvalError> {
    weights.validate()?;
    let records = score_corpus(cases, providers, config, progress)?;
    let report = aggregate(&records, &reviews.reviews, weights)?;
    Ok(EvalOutcome { table: render_table(&report), plots: plot_data(&report), report, review_errors: reviews.errors })
}

pub fn read_reviews(path: &Path) -> Result<ReviewIngest, EvalError> {
    let file = std::fs::File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    Ok(ingest_expert_reviews(file))
}

/// Loads the corpus and reviews, scores every case and aggregates.
pub fn run_evaluation(
    corpus_dir: &Path,
    reviews_path: &Path,
    providers: &ProviderSet,
    weights: &Weights,
    config: &ScoringConfig,
    progress: &(dyn Fn(usize, usize) + Sync),
) -> Result<EvalOutcome, EvalError> {
    weights.validate()?;
    let cases = load_corpus(corpus_dir)?;
    let reviews = read_reviews(reviews_path)?;
    evaluate_cases(&cases, reviews, providers, weights, config, progress)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::{
        EmbeddingRequest, EmbeddingResponse, Granularity, MockProvider, NliRequest, NliResponse, RetryPolicy,
        TokenVector,
    };
    use std::sync::Arc;

    fn seed_case(mock: &MockProvider, case: &EvalCase, ts: f64, nli: NliResponse) {
        let unit = vec![1.0, 0.0];
        let angled = vec![ts, (1.0 - ts * ts).sqrt()];
        for (p, h) in [(&case.premise, &case.hypothesis), (&case.premise_entity, &case.hypothesis_entity)] {
            mock.insert_embedding(
                &EmbeddingRequest { texts: vec![p.clone(), h.clone()], granularity: Granularity::Sentence },
                &EmbeddingResponse { vectors: Some(vec![unit.clone(), angled.clone()]), token_vectors: None },
            );
            mock.insert_nli(&NliRequest { premise: p.clone(), hypothesis: h.clone() }, &nli);
        }
        let tok = |v: &Vec<f64>| vec![TokenVector { token: "x".into(), vector: v.clone() }];
        mock.insert_embedding(
            &EmbeddingRequest { texts: vec![case.premise.clone(), case.hypothesis.clone()], granularity: Granularity::Token },
            &EmbeddingResponse { vectors: None, token_vectors: Some(vec![tok(&unit), tok(&angled)]) },
        );
    }

    fn case(id: &str) -> EvalCase {
        EvalCase {
            id: id.into(),
            question: String::new(),
            premise: format!("premise {id}"),
            premise_entity: format!("A{id}"),
            image: None,
            hypothesis: format!("hypothesis {id}"),
            hypothesis_entity: format!("B{id}"),
            entity_extraction_failed: false,
        }
    }

    #[test]
    fn parallel_scoring_keeps_order_and_matches_serial() {
        let mock = MockProvider::new();
        let cases: Vec<_> = (0..12).map(|i| case(&format!("c{i:02}"))).collect();
        for (i, c) in cases.iter().enumerate() {
            let nli = NliResponse { contradiction: 0.1, neutral: 0.2, entailment: 0.7 };
            seed_case(&mock, c, 0.5 + i as f64 / 40.0, nli);
        }
        let set = ProviderSet::from_mock(Arc::new(mock), RetryPolicy::default());
        let calls = AtomicUsize::new(0);
        let parallel =
            score_corpus(&cases, &set, &ScoringConfig { workers: 4, ..Default::default() }, &|_, _| {
                calls.fetch_add(1, Ordering::Relaxed);
            })
            .unwrap();
        let serial = score_corpus(&cases, &set, &ScoringConfig { workers: 1, ..Default::default() }, &|_, _| {}).unwrap();
        assert_eq!(parallel, serial);
        assert_eq!(calls.load(Ordering::Relaxed), 12);
        assert_eq!(parallel[3].case_id, "c03");
        assert!((parallel[3].ts_context - 0.575).abs() < 1e-12);
        assert!((parallel[3].bert.precision - 0.575).abs() < 1e-12);
    }

    #[test]
    fn missing_fixture_names_the_case() {
        let set = ProviderSet::from_mock(Arc::new(MockProvider::new()), RetryPolicy::default());
        match score_corpus(&[case("z")], &set, &ScoringConfig::default(), &|_, _| {}) {
            Err(EvalError::Case { case, .. }) => assert_eq!(case, "z"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn entity_template_is_applied() {
        let cfg = ScoringConfig { entity_template: Some("The diagnosis is {entity}.".into()), workers: 1 };
        assert_eq!(cfg.entity_text("Cellulitis"), "The diagnosis is Cellulitis.");
        assert_eq!(ScoringConfig::default().entity_text("Cellulitis"), "Cellulitis");
    }
}
