use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::orchestrator::{EmbeddingRequest, Granularity, NliRequest, ProviderSet, TokenVector};

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64, EvalError> {
    if a.len() != b.len() || a.is_empty() {
        return Err(EvalError::DimensionMismatch(a.len(), b.len()));
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(EvalError::ZeroVector);
    }
    Ok(dot / (na * nb))
}

fn require_text(s: &str) -> Result<(), EvalError> {
    if s.trim().is_empty() {
        return Err(EvalError::EmptyText);
    }
    Ok(())
}

/// Sentence embeddings of both texts from one provider call, compared by
/// cosine.
pub fn textual_similarity(premise: &str, hypothesis: &str, providers: &ProviderSet) -> Result<f64, EvalError> {
    require_text(premise)?;
    require_text(hypothesis)?;
    let request =
        EmbeddingRequest { texts: vec![premise.to_string(), hypothesis.to_string()], granularity: Granularity::Sentence };
    let reply = providers.embed(&request)?.value;
    match reply.vectors.as_deref() {
        Some([a, b]) => cosine_similarity(a, b),
        _ => Err(EvalError::MissingVectors("expected two sentence vectors".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BertScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn harmonic_f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn greedy_mean(from: &[TokenVector], to: &[TokenVector]) -> Result<f64, EvalError> {
    let mut total = 0.0;
    for f in from {
        let mut best = f64::NEG_INFINITY;
        for t in to {
            best = best.max(cosine_similarity(&f.vector, &t.vector)?);
        }
        total += best;
    }
    Ok(total / from.len() as f64)
}

/// Greedy-matching BERTScore without IDF weighting or baseline rescaling.
/// Precision matches each hypothesis token to its closest premise token;
/// recall does the reverse.
pub fn bert_score(premise: &[TokenVector], hypothesis: &[TokenVector]) -> Result<BertScore, EvalError> {
    if premise.is_empty() || hypothesis.is_empty() {
        return Err(EvalError::EmptyTokens);
    }
    let precision = greedy_mean(hypothesis, premise)?;
    let recall = greedy_mean(premise, hypothesis)?;
    Ok(BertScore { precision, recall, f1: harmonic_f1(precision, recall) })
}

/// Token embeddings of both texts from one provider call, then `bert_score`.
pub fn bert_score_texts(premise: &str, hypothesis: &str, providers: &ProviderSet) -> Result<BertScore, EvalError> {
    require_text(premise)?;
    require_text(hypothesis)?;
    let request =
        EmbeddingRequest { texts: vec![premise.to_string(), hypothesis.to_string()], granularity: Granularity::Token };
    let reply = providers.embed(&request)?.value;
    match reply.token_vectors.as_deref() {
        Some([p, h]) => bert_score(p, h),
        _ => Err(EvalError::MissingVectors("expected token vectors for two texts".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NliLabel {
    Contradiction,
    Neutral,
    Entailment,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliOutcome {
    pub label: NliLabel,
    pub probability: f64,
}

/// Argmax over the provider's three probabilities. Ties go to entailment,
/// then neutral.
pub fn nli_assess(premise: &str, hypothesis: &str, providers: &ProviderSet) -> Result<NliOutcome, EvalError> {
    require_text(premise)?;
    require_text(hypothesis)?;
    let r = providers
        .infer(&NliRequest { premise: premise.to_string(), hypothesis: hypothesis.to_string() })?
        .value;
    let probs = [(NliLabel::Entailment, r.entailment), (NliLabel::Neutral, r.neutral), (NliLabel::Contradiction, r.contradiction)];
    if probs.iter().any(|(_, p)| !p.is_finite() || *p < -1e-9 || *p > 1.0 + 1e-9) {
        return Err(EvalError::InvalidProbabilities(format!("{r:?}")));
    }
    let sum: f64 = probs.iter().map(|(_, p)| p).sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(EvalError::InvalidProbabilities(format!("sum {sum}")));
    }
    let (label, probability) = probs.iter().fold(probs[0], |best, &p| if p.1 > best.1 { p } else { best });
    Ok(NliOutcome { label, probability })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub w_context: f64,
    pub w_entities: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self { w_context: 1.5, w_entities: 1.0 }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.w_context > 0.0 && self.w_entities > 0.0 && self.w_context.is_finite() && self.w_entities.is_finite() {
            Ok(())
        } else {
            Err(EvalError::InvalidWeights)
        }
    }
}

/// `(w1 * context + w2 * entity) / 2`. The divisor is 2, not `w1 + w2`, so
/// values above 1 are possible.
pub fn weighted_row(context: f64, entity: f64, weights: &Weights) -> f64 {
    (weights.w_context * context + weights.w_entities * entity) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orchestrator::{MockProvider, NliResponse, RetryPolicy};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn tv(v: &[f64]) -> TokenVector {
        TokenVector { token: "t".into(), vector: v.to_vec() }
    }

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 2.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!((cosine_similarity(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 1.0]), Err(EvalError::ZeroVector));
        assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn bert_identical_and_single_token() {
        let toks = vec![tv(&[1.0, 0.0]), tv(&[0.6, 0.8]), tv(&[0.0, 1.0])];
        let s = bert_score(&toks, &toks).unwrap();
        assert!((s.precision - 1.0).abs() < 1e-12 && (s.recall - 1.0).abs() < 1e-12 && (s.f1 - 1.0).abs() < 1e-12);
        let hyp = vec![toks[1].clone()];
        let s = bert_score(&toks, &hyp).unwrap();
        assert!((s.precision - 1.0).abs() < 1e-12);
        // Oracle: mean similarity of (0.6, 0.8) to each premise token.
        assert!((s.recall - (0.6 + 1.0 + 0.8) / 3.0).abs() < 1e-12);
        assert_eq!(bert_score(&[], &hyp), Err(EvalError::EmptyTokens));
    }

    #[test]
    fn weighted_row_examples() {
        let w = Weights::default();
        assert!((weighted_row(0.70, 0.69, &w) - 0.87).abs() < 0.005);
        assert!((weighted_row(0.86, 0.41, &w) - 0.85).abs() < 0.005);
        assert_eq!(weighted_row(0.0, 0.0, &w), 0.0);
        assert!(Weights { w_context: 0.0, w_entities: 1.0 }.validate().is_err());
    }

    fn mock_set(mock: MockProvider) -> ProviderSet {
        ProviderSet::from_mock(Arc::new(mock), RetryPolicy::default())
    }

    #[test]
    fn nli_via_mock() {
        let mock = MockProvider::new();
        let req = NliRequest { premise: "p".into(), hypothesis: "h".into() };
        mock.insert_nli(&req, &NliResponse { contradiction: 0.1, neutral: 0.225, entailment: 0.675 });
        let bad = NliRequest { premise: "p".into(), hypothesis: "bad".into() };
        mock.insert_nli(&bad, &NliResponse { contradiction: 0.5, neutral: 0.5, entailment: 0.5 });
        let set = mock_set(mock);
        assert_eq!(nli_assess("p", "h", &set).unwrap(), NliOutcome { label: NliLabel::Entailment, probability: 0.675 });
        assert_eq!(nli_assess("same", "same", &set).unwrap(), NliOutcome { label: NliLabel::Entailment, probability: 0.99 });
        assert!(matches!(nli_assess("p", "bad", &set), Err(EvalError::InvalidProbabilities(_))));
        assert_eq!(nli_assess("", "h", &set), Err(EvalError::EmptyText));
    }

    #[test]
    fn textual_similarity_identical_texts() {
        let mock = MockProvider::new();
        let req = EmbeddingRequest { texts: vec!["x".into(), "x".into()], granularity: Granularity::Sentence };
        mock.insert_embedding(
            &req,
            &crate::orchestrator::EmbeddingResponse { vectors: Some(vec![vec![0.3, 0.4], vec![0.3, 0.4]]), token_vectors: None },
        );
        let ts = textual_similarity("x", "x", &mock_set(mock)).unwrap();
        assert!((ts - 1.0).abs() < 1e-6);
    }

    fn brute_bert(p: &[Vec<f64>], h: &[Vec<f64>]) -> (f64, f64) {
        let sim = |a: &Vec<f64>, b: &Vec<f64>| {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
        };
        let mut matrix = vec![vec![0.0; h.len()]; p.len()];
        for i in 0..p.len() {
            for j in 0..h.len() {
                matrix[i][j] = sim(&p[i], &h[j]);
            }
        }
        let precision = (0..h.len())
            .map(|j| (0..p.len()).map(|i| matrix[i][j]).fold(f64::MIN, f64::max))
            .sum::<f64>()
            / h.len() as f64;
        let recall = (0..p.len()).map(|i| matrix[i].iter().cloned().fold(f64::MIN, f64::max)).sum::<f64>() / p.len() as f64;
        (precision, recall)
    }

    proptest! {
        #[test]
        fn f1_is_harmonic_mean(p in 0.0f64..1.0, r in 0.0f64..1.0) {
            let f = harmonic_f1(p, r);
            if p + r > 0.0 {
                prop_assert!((f - 2.0 * p * r / (p + r)).abs() <= 1e-15);
                prop_assert!(f <= p.max(r) + 1e-15 && f >= p.min(r) - 1e-15);
            } else {
                prop_assert_eq!(f, 0.0);
            }
        }

        #[test]
        fn bert_matches_brute_force(
            p in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 4), 5),
            h in proptest::collection::vec(proptest::collection::vec(0.01f64..1.0, 4), 7),
        ) {
            let pt: Vec<_> = p.iter().map(|v| tv(v)).collect();
            let ht: Vec<_> = h.iter().map(|v| tv(v)).collect();
            let s = bert_score(&pt, &ht).unwrap();
            let (bp, br) = brute_bert(&p, &h);
            prop_assert!((s.precision - bp).abs() < 1e-9);
            prop_assert!((s.recall - br).abs() < 1e-9);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&s.precision) && (0.0..=1.0 + 1e-12).contains(&s.recall));
            prop_assert_eq!(s.f1, harmonic_f1(s.precision, s.recall));
        }

        #[test]
        fn weighted_row_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, d in 0.0f64..0.5, w1 in 0.1f64..3.0, w2 in 0.1f64..3.0) {
            let w = Weights { w_context: w1, w_entities: w2 };
            prop_assert!(weighted_row(a + d, b, &w) >= weighted_row(a, b, &w));
            prop_assert!(weighted_row(a, b + d, &w) >= weighted_row(a, b, &w));
            let unit = Weights { w_context: 1.0, w_entities: 1.0 };
            prop_assert!((weighted_row(a, a, &unit) - a).abs() <= 1e-15);
        }
    }
}
