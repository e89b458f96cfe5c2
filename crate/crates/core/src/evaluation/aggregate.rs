use serde::{Deserialize, Serialize};

use super::scoring::{weighted_row, BertScore, NliLabel, NliOutcome, Weights};
use super::{EvalError, ExpertReview};

/// Per-case scores for both tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub case_id: String,
    pub ts_context: f64,
    pub ts_entity: f64,
    pub bert: BertScore,
    pub nli_context: NliOutcome,
    pub nli_entity: NliOutcome,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub entity_extraction_failed: bool,
}

/// A weighted average reported clamped to `[0, 1]`, with the raw value kept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clamped {
    pub value: f64,
    pub raw: f64,
}

impl Clamped {
    pub fn new(raw: f64) -> Self {
        Self { value: raw.clamp(0.0, 1.0), raw }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub context: f64,
    pub entities: f64,
    pub weighted: Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliRow {
    pub context_count: usize,
    pub entity_count: usize,
    pub context: f64,
    pub entities: f64,
    pub weighted: Clamped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertRow {
    pub review_count: usize,
    /// Mean Likert score for symptom and image description.
    pub context_likert: f64,
    /// Mean Likert score for diagnostic reasoning.
    pub entities_likert: f64,
    pub context: f64,
    pub entities: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapabilityReport {
    pub case_count: usize,
    pub weights: Weights,
    pub textual_similarity: SimilarityRow,
    pub nli_neutral: NliRow,
    pub nli_contradiction: NliRow,
    pub nli_entailment: NliRow,
    pub expert: ExpertRow,
    /// Mean per-case precision, recall and F1.
    pub bert: BertScore,
    pub capability: Clamped,
    pub records: Vec<ScoreRecord>,
}

/// Order-independent mean: values are summed in sorted order.
fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut v: Vec<f64> = values.into_iter().collect();
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

fn nli_row(records: &[ScoreRecord], label: NliLabel, weights: &Weights) -> NliRow {
    let n = records.len() as f64;
    let context_count = records.iter().filter(|r| r.nli_context.label == label).count();
    let entity_count = records.iter().filter(|r| r.nli_entity.label == label).count();
    let context = context_count as f64 / n;
    let entities = entity_count as f64 / n;
    NliRow { context_count, entity_count, context, entities, weighted: Clamped::new(weighted_row(context, entities, weights)) }
}

/// Folds per-case scores and expert reviews into the capability report.
/// Records are sorted by case id, so the result does not depend on input
/// order.
pub fn aggregate(
    records: &[ScoreRecord],
    reviews: &[ExpertReview],
    weights: &Weights,
) -> Result<CapabilityReport, EvalError> {
    weights.validate()?;
    if records.is_empty() {
        return Err(EvalError::EmptyInput("score records"));
    }
    if reviews.is_empty() {
        return Err(EvalError::EmptyInput("expert reviews"));
    }
    let mut records = records.to_vec();
    records.sort_by(|a, b| a.case_id.cmp(&b.case_id));

    let ts_context = mean(records.iter().map(|r| r.ts_context));
    let ts_entity = mean(records.iter().map(|r| r.ts_entity));
    let textual_similarity = SimilarityRow {
        context: ts_context,
        entities: ts_entity,
        weighted: Clamped::new(weighted_row(ts_context, ts_entity, weights)),
    };

    let sum_a: u64 = reviews.iter().map(|r| r.symptom_image_score as u64).sum();
    let sum_b: u64 = reviews.iter().map(|r| r.diagnostic_reasoning_score as u64).sum();
    let n = reviews.len() as f64;
    let (context_likert, entities_likert) = (sum_a as f64 / n, sum_b as f64 / n);
    let expert = ExpertRow {
        review_count: reviews.len(),
        context_likert,
        entities_likert,
        context: context_likert / 5.0,
        entities: entities_likert / 5.0,
        mean: (context_likert / 5.0 + entities_likert / 5.0) / 2.0,
    };

    let precision = mean(records.iter().map(|r| r.bert.precision));
    let recall = mean(records.iter().map(|r| r.bert.recall));
    let f1 = mean(records.iter().map(|r| r.bert.f1));

    let nli_entailment = nli_row(&records, NliLabel::Entailment, weights);
    let capability = Clamped {
        value: (textual_similarity.weighted.value + nli_entailment.weighted.value + expert.mean) / 3.0,
        raw: (textual_similarity.weighted.raw + nli_entailment.weighted.raw + expert.mean) / 3.0,
    };

    Ok(CapabilityReport {
        case_count: records.len(),
        weights: *weights,
        textual_similarity,
        nli_neutral: nli_row(&records, NliLabel::Neutral, weights),
        nli_contradiction: nli_row(&records, NliLabel::Contradiction, weights),
        nli_entailment,
        expert,
        bert: BertScore { precision, recall, f1 },
        capability,
        records,
    })
}
