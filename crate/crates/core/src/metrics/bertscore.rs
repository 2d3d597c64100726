//! Embedding-similarity score: greedy maximum-cosine matching between
//! candidate and reference token embeddings.

use serde::{Deserialize, Serialize};

use super::embed::{check_shape, EmbedError, EmbeddingProvider};
use crate::analysis::MetricToken;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BertScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision = mean over candidate tokens of the best cosine similarity
/// against any reference token; recall is the mirror image; f1 combines
/// them as (1+β²)PR / (β²P+R).
///
/// Similarities are clamped to [0, 1]: embedding spaces can produce
/// slightly negative cosines between unrelated tokens, and scores here are
/// match ratios, not signed correlations. Empty candidate or reference →
/// all zeros.
pub fn codebert_score(
    cand: &[MetricToken],
    reference: &[MetricToken],
    embedder: &dyn EmbeddingProvider,
    beta: f64,
) -> Result<BertScores, EmbedError> {
    if cand.is_empty() || reference.is_empty() {
        return Ok(BertScores::default());
    }
    let cand_texts: Vec<String> = cand.iter().map(|t| t.text.clone()).collect();
    let ref_texts: Vec<String> = reference.iter().map(|t| t.text.clone()).collect();
    let cand_vecs = embedder.embed(&cand_texts)?;
    check_shape(&cand_texts, &cand_vecs)?;
    let ref_vecs = embedder.embed(&ref_texts)?;
    check_shape(&ref_texts, &ref_vecs)?;
    if let (Some(c), Some(r)) = (cand_vecs.first(), ref_vecs.first()) {
        if c.len() != r.len() {
            return Err(EmbedError::DimensionMismatch(c.len(), r.len()));
        }
    }

    let precision = mean_best_similarity(&cand_vecs, &ref_vecs);
    let recall = mean_best_similarity(&ref_vecs, &cand_vecs);
    let beta_sq = beta * beta;
    let denom = beta_sq * precision + recall;
    let f1 = if denom == 0.0 {
        0.0
    } else {
        (1.0 + beta_sq) * precision * recall / denom
    };
    Ok(BertScores {
        precision,
        recall,
        f1,
    })
}

fn mean_best_similarity(from: &[Vec<f64>], to: &[Vec<f64>]) -> f64 {
    let total: f64 = from
        .iter()
        .map(|v| {
            to.iter()
                .map(|w| cosine(v, w))
                .fold(0.0f64, f64::max) // clamps negatives to 0 as a side effect
                .min(1.0)
        })
        .sum();
    total / from.len() as f64
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let norm_a: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let norm_b: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm_a == 0.0 || norm_b == 0.0 {
        0.0
    } else {
        dot / (norm_a * norm_b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::embed::{BasisEmbedder, HashEmbedder};

    fn stream(texts: &[&str]) -> Vec<MetricToken> {
        texts.iter().map(|t| MetricToken::new(*t, false)).collect()
    }

    #[test]
    fn identical_streams_score_one_under_any_embedder() {
        let s = stream(&["await", "vehicle", ".", "Speed"]);
        let hash = codebert_score(&s, &s, &HashEmbedder::default(), 1.0).unwrap();
        assert!((hash.f1 - 1.0).abs() < 1e-9);
        let basis = BasisEmbedder::with_vocabulary(["await", "vehicle", ".", "Speed"]);
        let exact = codebert_score(&s, &s, &basis, 1.0).unwrap();
        assert!((exact.f1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn half_overlap_under_orthogonal_embedder() {
        // greedy matching by hand: a→a = 1, b→{a,c} = 0 → P = 0.5;
        // mirror for recall; F = 0.5
        let cand = stream(&["a", "b"]);
        let reference = stream(&["a", "c"]);
        let basis = BasisEmbedder::with_vocabulary(["a", "b", "c"]);
        let got = codebert_score(&cand, &reference, &basis, 1.0).unwrap();
        assert!((got.precision - 0.5).abs() < 1e-12);
        assert!((got.recall - 0.5).abs() < 1e-12);
        assert!((got.f1 - 0.5).abs() < 1e-12);
    }

    #[test]
    fn empty_candidate_scores_zero() {
        let reference = stream(&["a"]);
        let got = codebert_score(&[], &reference, &HashEmbedder::default(), 1.0).unwrap();
        assert_eq!(got, BertScores::default());
    }

    #[test]
    fn asymmetric_lengths_swap_precision_and_recall() {
        let a = stream(&["a", "b", "c"]);
        let b = stream(&["a"]);
        let basis = BasisEmbedder::with_vocabulary(["a", "b", "c"]);
        let ab = codebert_score(&a, &b, &basis, 1.0).unwrap();
        let ba = codebert_score(&b, &a, &basis, 1.0).unwrap();
        assert!((ab.precision - ba.recall).abs() < 1e-12);
        assert!((ab.recall - ba.precision).abs() < 1e-12);
        assert!((ab.f1 - ba.f1).abs() < 1e-12);
    }

    #[test]
    fn scores_stay_in_unit_range_under_hash_embedder() {
        let cand = stream(&["x", "=", "1", "while", "True"]);
        let reference = stream(&["totally", "different", "words"]);
        let got = codebert_score(&cand, &reference, &HashEmbedder::default(), 1.0).unwrap();
        for value in [got.precision, got.recall, got.f1] {
            assert!((0.0..=1.0).contains(&value), "out of range: {value}");
        }
    }
}
