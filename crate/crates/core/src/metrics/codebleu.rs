//! CodeBLEU: weighted combination of n-gram, keyword-weighted n-gram,
//! syntax-match, and dataflow-match scores.

use serde::{Deserialize, Serialize};

use super::bleu::{ngram_bleu, weighted_ngram_bleu};
use super::{MetricConfig, MetricError};
use crate::analysis::{
    extract_dataflow, extract_subtrees, metric_tokens, parse, subtree_total, DataflowGraph,
    SubtreeMultiset, SyntaxTree,
};

/// Component weights (α, β, γ, δ) for the composite; must be non-negative
/// and sum to 1 within 1e-9.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl Default for CodeBleuWeights {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            beta: 0.25,
            gamma: 0.25,
            delta: 0.25,
        }
    }
}

impl CodeBleuWeights {
    pub fn new(alpha: f64, beta: f64, gamma: f64, delta: f64) -> Result<Self, MetricError> {
        let weights = Self {
            alpha,
            beta,
            gamma,
            delta,
        };
        weights.validate()?;
        Ok(weights)
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        let parts = [self.alpha, self.beta, self.gamma, self.delta];
        if parts.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(MetricError::Config(
                "codebleu weights must be finite and non-negative".into(),
            ));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(MetricError::Config(format!(
                "codebleu weights must sum to 1, got {sum}"
            )));
        }
        Ok(())
    }
}

/// The four submetrics and their weighted combination.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CodeBleuScores {
    pub composite: f64,
    pub ngram: f64,
    pub weighted_ngram: f64,
    pub syntax: f64,
    pub dataflow: f64,
}

/// Scores plus the candidate-parse outcome the caller must surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodeBleuOutcome {
    pub scores: CodeBleuScores,
    pub candidate_parse_failed: bool,
}

/// Multiset intersection over serialized subtrees, relative to the
/// reference: |cand ∩ ref| / |ref|. An unparseable candidate scores 0 (the
/// caller sets the flag). A reference with no subtrees scores 1 only
/// against a candidate that also has none.
pub fn syntax_match(cand: Option<&SyntaxTree>, reference: &SyntaxTree) -> f64 {
    let Some(cand) = cand else { return 0.0 };
    syntax_match_multisets(&extract_subtrees(cand), &extract_subtrees(reference))
}

pub(crate) fn syntax_match_multisets(cand: &SubtreeMultiset, reference: &SubtreeMultiset) -> f64 {
    let ref_total = subtree_total(reference);
    if ref_total == 0 {
        return if subtree_total(cand) == 0 { 1.0 } else { 0.0 };
    }
    let shared: usize = reference
        .iter()
        .map(|(key, &count)| count.min(cand.get(key).copied().unwrap_or(0)))
        .sum();
    shared as f64 / ref_total as f64
}

/// Fraction of reference def-use edges also present in the candidate, on
/// normalized edges. A reference without edges scores 1 only against a
/// candidate that is also edge-free.
pub fn dataflow_match(cand: &DataflowGraph, reference: &DataflowGraph) -> f64 {
    if reference.edges.is_empty() {
        return if cand.edges.is_empty() { 1.0 } else { 0.0 };
    }
    let shared = reference.edges.intersection(&cand.edges).count();
    shared as f64 / reference.edges.len() as f64
}

/// Full CodeBLEU on raw sources. The reference must parse (anything else
/// is an item-level data error); a candidate that does not parse scores 0
/// on the structural submetrics and sets the flag.
pub fn codebleu(
    cand_source: &str,
    ref_source: &str,
    config: &MetricConfig,
) -> Result<CodeBleuOutcome, MetricError> {
    config.weights.validate()?;
    let ref_tree = parse(ref_source).map_err(MetricError::ReferenceParse)?;
    let cand_tree = parse(cand_source).ok();

    let cand_tokens = metric_tokens(cand_source);
    let ref_tokens = metric_tokens(ref_source);
    let ngram = ngram_bleu(&cand_tokens, &ref_tokens, config.max_n);
    let weighted_ngram = weighted_ngram_bleu(
        &cand_tokens,
        &ref_tokens,
        config.max_n,
        config.keyword_weight,
        &config.extra_keywords,
    );
    let (syntax, dataflow) = match &cand_tree {
        Some(tree) => (
            syntax_match(Some(tree), &ref_tree),
            dataflow_match(&extract_dataflow(tree), &extract_dataflow(&ref_tree)),
        ),
        None => (0.0, 0.0),
    };
    let scores = combine(ngram, weighted_ngram, syntax, dataflow, &config.weights);
    Ok(CodeBleuOutcome {
        scores,
        candidate_parse_failed: cand_tree.is_none(),
    })
}

/// composite = α·ngram + β·weighted + γ·syntax + δ·dataflow.
pub fn combine(
    ngram: f64,
    weighted_ngram: f64,
    syntax: f64,
    dataflow: f64,
    weights: &CodeBleuWeights,
) -> CodeBleuScores {
    CodeBleuScores {
        composite: weights.alpha * ngram
            + weights.beta * weighted_ngram
            + weights.gamma * syntax
            + weights.delta * dataflow,
        ngram,
        weighted_ngram,
        syntax,
        dataflow,
    }
}
