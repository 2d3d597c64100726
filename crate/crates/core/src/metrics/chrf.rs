//! ChrF: character n-gram F-score on whitespace-normalized text.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ChrfScores {
    pub precision: f64,
    pub recall: f64,
    pub score: f64,
}

/// Character n-gram precision and recall for n = 1..=n_max, macro-averaged
/// over the orders for which the reference has at least one n-gram, then
/// combined as score = (1+β²)PR / (β²P+R).
///
/// Whitespace runs are collapsed to single spaces (and trimmed at the ends)
/// before counting, so formatting noise does not register as character
/// difference. An empty candidate or reference scores 0.
pub fn chrf(cand: &str, reference: &str, n_max: usize, beta: f64) -> ChrfScores {
    assert!(n_max >= 1, "n_max must be at least 1");
    let cand: Vec<char> = normalize_whitespace(cand).chars().collect();
    let reference: Vec<char> = normalize_whitespace(reference).chars().collect();
    if cand.is_empty() || reference.is_empty() {
        return ChrfScores::default();
    }
    let mut precision_sum = 0.0;
    let mut recall_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=n_max {
        if reference.len() < n {
            break; // no reference n-grams of this or any higher order
        }
        let matched = clipped_char_matches(&cand, &reference, n) as f64;
        let cand_total = cand.len().saturating_sub(n - 1) as f64;
        let ref_total = (reference.len() - n + 1) as f64;
        precision_sum += if cand_total == 0.0 { 0.0 } else { matched / cand_total };
        recall_sum += matched / ref_total;
        orders += 1;
    }
    let precision = precision_sum / orders as f64;
    let recall = recall_sum / orders as f64;
    let beta_sq = beta * beta;
    let denom = beta_sq * precision + recall;
    let score = if denom == 0.0 {
        0.0
    } else {
        (1.0 + beta_sq) * precision * recall / denom
    };
    ChrfScores {
        precision,
        recall,
        score,
    }
}

/// The preprocessing `chrf` applies before counting: whitespace runs
/// collapse to single spaces and the ends are trimmed.
pub fn normalize_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut in_run = true; // leading whitespace is dropped
    for c in text.chars() {
        if c.is_whitespace() {
            if !in_run {
                out.push(' ');
                in_run = true;
            }
        } else {
            out.push(c);
            in_run = false;
        }
    }
    if out.ends_with(' ') {
        out.pop();
    }
    out
}

/// Candidate n-grams found in the reference, clipped by multiplicity.
/// This is the per-order count `chrf` averages over; it is public so the
/// counting can be cross-checked independently of the averaging.
pub fn clipped_char_matches(cand: &[char], reference: &[char], n: usize) -> usize {
    if cand.len() < n {
        return 0;
    }
    let mut ref_counts: HashMap<&[char], usize> = HashMap::new();
    for gram in reference.windows(n) {
        *ref_counts.entry(gram).or_insert(0) += 1;
    }
    let mut matched = 0;
    for gram in cand.windows(n) {
        if let Some(remaining) = ref_counts.get_mut(gram) {
            if *remaining > 0 {
                *remaining -= 1;
                matched += 1;
            }
        }
    }
    matched
}
