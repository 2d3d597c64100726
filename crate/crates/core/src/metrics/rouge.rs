//! ROUGE-L: longest-common-subsequence overlap on token streams.

use serde::{Deserialize, Serialize};

use crate::analysis::MetricToken;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScores {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
}

/// LCS-based precision/recall/F over tokens: P = LCS/|cand|, R = LCS/|ref|,
/// F = (1+β²)PR / (R+β²P). Empty candidate or reference → all zeros.
pub fn rouge_l(cand: &[MetricToken], reference: &[MetricToken], beta: f64) -> RougeScores {
    if cand.is_empty() || reference.is_empty() {
        return RougeScores::default();
    }
    let lcs = lcs_length(cand, reference) as f64;
    let precision = lcs / cand.len() as f64;
    let recall = lcs / reference.len() as f64;
    let beta_sq = beta * beta;
    let denom = recall + beta_sq * precision;
    let f = if denom == 0.0 {
        0.0
    } else {
        (1.0 + beta_sq) * precision * recall / denom
    };
    RougeScores {
        precision,
        recall,
        f,
    }
}

/// Classic quadratic DP, rolling single row.
fn lcs_length(a: &[MetricToken], b: &[MetricToken]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for token_a in a {
        let mut diagonal = 0; // row[j-1] from the previous iteration
        for (j, token_b) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if token_a.text == token_b.text {
                diagonal + 1
            } else {
                row[j + 1].max(row[j])
            };
            diagonal = up;
        }
    }
    row[b.len()]
}
