//! The four report metrics (CodeBLEU, embedding similarity, ROUGE-L, ChrF)
//! and their shared plumbing.
//!
//! Everything here is pure given its inputs; the only external dependency
//! is the [`EmbeddingProvider`] used by the embedding-similarity metric,
//! which ships with a deterministic offline implementation.

mod bertscore;
mod bleu;
mod chrf;
mod codebleu;
pub mod embed;
mod rouge;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bertscore::{codebert_score, BertScores};
pub use bleu::{ngram_bleu, weighted_ngram_bleu};
pub use chrf::{chrf, clipped_char_matches, normalize_whitespace, ChrfScores};
pub use codebleu::{
    codebleu, combine, dataflow_match, syntax_match, CodeBleuOutcome, CodeBleuScores,
    CodeBleuWeights,
};
pub use embed::{BasisEmbedder, EmbedError, EmbeddingProvider, HashEmbedder, HttpEmbedder};
pub use rouge::{rouge_l, RougeScores};

use crate::analysis::{metric_tokens, ParseError};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("reference does not parse: {0}")]
    ReferenceParse(ParseError),
    #[error(transparent)]
    Embedding(#[from] EmbedError),
    #[error("invalid metric configuration: {0}")]
    Config(String),
}

/// Knobs shared by the metric suite. The defaults match the values used
/// throughout the evaluation: four n-gram orders, keyword weight 5,
/// six ChrF orders, β = 1 everywhere.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricConfig {
    pub weights: CodeBleuWeights,
    pub max_n: usize,
    pub keyword_weight: f64,
    /// API-call names treated as keywords by the weighted n-gram component
    /// (e.g. `get`, `set`, `subscribe`).
    pub extra_keywords: BTreeSet<String>,
    pub rouge_beta: f64,
    pub chrf_n_max: usize,
    pub chrf_beta: f64,
    pub bert_beta: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            weights: CodeBleuWeights::default(),
            max_n: 4,
            keyword_weight: 5.0,
            extra_keywords: BTreeSet::new(),
            rouge_beta: 1.0,
            chrf_n_max: 6,
            chrf_beta: 1.0,
            bert_beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricFlags {
    pub candidate_parse_failed: bool,
}

/// All scores for one (candidate, reference) pair.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub codebleu: CodeBleuScores,
    pub codebert: BertScores,
    pub rouge_l: RougeScores,
    pub chrf: ChrfScores,
    pub flags: MetricFlags,
}

impl MetricReport {
    /// Every score the report carries, for range checks.
    pub fn all_scores(&self) -> [f64; 14] {
        [
            self.codebleu.composite,
            self.codebleu.ngram,
            self.codebleu.weighted_ngram,
            self.codebleu.syntax,
            self.codebleu.dataflow,
            self.codebert.precision,
            self.codebert.recall,
            self.codebert.f1,
            self.rouge_l.precision,
            self.rouge_l.recall,
            self.rouge_l.f,
            self.chrf.precision,
            self.chrf.recall,
            self.chrf.score,
        ]
    }
}

/// Compute the full metric suite for a candidate against a reference.
///
/// The reference must parse; an unparseable candidate still gets n-gram,
/// ROUGE-L, ChrF, and embedding scores (over the lenient token stream) with
/// zeroed syntax/dataflow submetrics and the parse flag set.
pub fn compute_report(
    cand_source: &str,
    ref_source: &str,
    embedder: &dyn EmbeddingProvider,
    config: &MetricConfig,
) -> Result<MetricReport, MetricError> {
    let outcome = codebleu(cand_source, ref_source, config)?;
    let cand_tokens = metric_tokens(cand_source);
    let ref_tokens = metric_tokens(ref_source);
    let codebert = codebert_score(&cand_tokens, &ref_tokens, embedder, config.bert_beta)?;
    Ok(MetricReport {
        codebleu: outcome.scores,
        codebert,
        rouge_l: rouge_l(&cand_tokens, &ref_tokens, config.rouge_beta),
        chrf: chrf(cand_source, ref_source, config.chrf_n_max, config.chrf_beta),
        flags: MetricFlags {
            candidate_parse_failed: outcome.candidate_parse_failed,
        },
    })
}
