//! Modified n-gram precision (BLEU) over metric token streams, plus the
//! keyword-weighted variant used inside CodeBLEU.

use std::collections::{BTreeSet, HashMap};

use crate::analysis::MetricToken;

/// Geometric mean of modified n-gram precisions for n = 1..=max_n with
/// brevity penalty.
///
/// Orders where the candidate has no n-grams are skipped, so short but
/// correct snippets are not punished for their length twice. Zero counts at
/// n ≥ 2 get add-one smoothing; a zero unigram count means the streams
/// share nothing and the score is 0. An empty candidate scores 0.
pub fn ngram_bleu(cand: &[MetricToken], reference: &[MetricToken], max_n: usize) -> f64 {
    weighted_ngram_bleu(cand, reference, max_n, 1.0, &BTreeSet::new())
}

/// As [`ngram_bleu`], but each matched unigram position contributes
/// `keyword_weight` instead of 1 when the token is a language keyword or a
/// member of `extra_keywords` (configured API-call names). The weights are
/// normalized by the total candidate unigram weight; higher orders are
/// unweighted, so `keyword_weight = 1` degenerates to plain [`ngram_bleu`].
pub fn weighted_ngram_bleu(
    cand: &[MetricToken],
    reference: &[MetricToken],
    max_n: usize,
    keyword_weight: f64,
    extra_keywords: &BTreeSet<String>,
) -> f64 {
    assert!(max_n >= 1, "max_n must be at least 1");
    assert!(keyword_weight >= 0.0, "keyword weight must be non-negative");
    if cand.is_empty() {
        return 0.0;
    }
    let weight_of = |token: &MetricToken| -> f64 {
        if token.is_keyword || extra_keywords.contains(&token.text) {
            keyword_weight
        } else {
            1.0
        }
    };

    let mut log_sum = 0.0;
    let mut orders = 0usize;
    for n in 1..=max_n {
        if cand.len() < n {
            break; // no candidate n-grams of this or any higher order
        }
        let precision = if n == 1 {
            weighted_unigram_precision(cand, reference, &weight_of)
        } else {
            let matched = clipped_matches(cand, reference, n) as f64;
            let total = (cand.len() - n + 1) as f64;
            if matched == 0.0 {
                1.0 / (total + 1.0) // add-one smoothing on zero counts
            } else {
                matched / total
            }
        };
        if precision == 0.0 {
            return 0.0; // only possible at n = 1: nothing shared at all
        }
        log_sum += precision.ln();
        orders += 1;
    }
    let mean = (log_sum / orders as f64).exp();
    brevity_penalty(cand.len(), reference.len()) * mean
}

/// Clipped weighted unigram precision: every candidate occurrence matched
/// under reference clipping contributes its token weight.
fn weighted_unigram_precision(
    cand: &[MetricToken],
    reference: &[MetricToken],
    weight_of: &impl Fn(&MetricToken) -> f64,
) -> f64 {
    let mut ref_counts: HashMap<&str, usize> = HashMap::new();
    for token in reference {
        *ref_counts.entry(token.text.as_str()).or_insert(0) += 1;
    }
    let mut matched = 0.0;
    let mut total = 0.0;
    for token in cand {
        let w = weight_of(token);
        total += w;
        if let Some(remaining) = ref_counts.get_mut(token.text.as_str()) {
            if *remaining > 0 {
                *remaining -= 1;
                matched += w;
            }
        }
    }
    if total == 0.0 {
        0.0
    } else {
        matched / total
    }
}

/// Number of candidate n-grams also present in the reference, clipped by
/// reference multiplicity.
fn clipped_matches(cand: &[MetricToken], reference: &[MetricToken], n: usize) -> usize {
    if reference.len() < n {
        return 0;
    }
    let mut ref_counts: HashMap<&[MetricToken], usize> = HashMap::new();
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

fn brevity_penalty(cand_len: usize, ref_len: usize) -> f64 {
    if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stream(texts: &[&str]) -> Vec<MetricToken> {
        texts
            .iter()
            .map(|t| MetricToken::new(*t, crate::analysis::is_keyword(t)))
            .collect()
    }

    #[test]
    fn identical_streams_score_one() {
        let s = stream(&["if", "x", ":", "return", "1"]);
        assert!((ngram_bleu(&s, &s, 4) - 1.0).abs() < 1e-12);
        assert!((weighted_ngram_bleu(&s, &s, 4, 5.0, &BTreeSet::new()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_token_differs_at_unigram_order() {
        // hand count: cand {a,b,c} vs ref {a,b,d}: matches a,b → 2/3; both
        // length 3 → BP = 1
        let cand = stream(&["a", "b", "c"]);
        let reference = stream(&["a", "b", "d"]);
        let got = ngram_bleu(&cand, &reference, 1);
        assert!((got - 2.0 / 3.0).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn empty_candidate_scores_zero() {
        let reference = stream(&["a"]);
        assert_eq!(ngram_bleu(&[], &reference, 4), 0.0);
        assert_eq!(weighted_ngram_bleu(&[], &reference, 4, 5.0, &BTreeSet::new()), 0.0);
    }

    #[test]
    fn disjoint_streams_score_zero() {
        let cand = stream(&["a", "b"]);
        let reference = stream(&["c", "d"]);
        assert_eq!(ngram_bleu(&cand, &reference, 4), 0.0);
    }

    #[test]
    fn brevity_penalty_punishes_short_candidates() {
        // cand is a strict prefix of ref: all precisions 1, BP = e^(1-2) = e^-1
        let cand = stream(&["a"]);
        let reference = stream(&["a", "b"]);
        let got = ngram_bleu(&cand, &reference, 4);
        assert!((got - (-1.0f64).exp()).abs() < 1e-12, "got {got}");
    }

    #[test]
    fn higher_order_zero_counts_are_smoothed_not_fatal() {
        // unigrams all match but in scrambled order: no shared bigram.
        // hand count, max_n=2: p1 = 3/3, p2 = (0+1)/(2+1) = 1/3, BP = 1
        // → sqrt(1/3)
        let cand = stream(&["c", "a", "b"]);
        let reference = stream(&["b", "c", "a"]);
        // scrambles share some bigrams; force a true zero with max_n=3:
        // trigram "c a b" vs "b c a" → 0 → smoothed (0+1)/(1+1) = 1/2
        let got = ngram_bleu(&cand, &reference, 3);
        assert!(got > 0.0 && got < 1.0, "got {got}");
        // exact value: p1=1, p2: cand bigrams {ca,ab} vs ref {bc,ca} → 1/2,
        // p3: 0 → 1/2 smoothed; geometric mean (1 * 1/2 * 1/2)^(1/3)
        let expected = (0.25f64).powf(1.0 / 3.0);
        assert!((got - expected).abs() < 1e-12, "got {got} want {expected}");
    }

    #[test]
    fn orders_beyond_candidate_length_are_skipped() {
        // two-token identical streams with max_n=4: only n=1,2 contribute
        let s = stream(&["a", "b"]);
        assert!((ngram_bleu(&s, &s, 4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn keyword_weight_one_degenerates_to_plain_bleu() {
        let cand = stream(&["if", "x", ":", "return", "y"]);
        let reference = stream(&["if", "z", ":", "return", "y"]);
        let plain = ngram_bleu(&cand, &reference, 4);
        let weighted = weighted_ngram_bleu(&cand, &reference, 4, 1.0, &BTreeSet::new());
        assert!((plain - weighted).abs() < 1e-12);
    }

    #[test]
    fn keyword_mismatch_costs_more_than_identifier_mismatch() {
        // symmetric single-token swap at position 0 against ref [if, x]:
        // weighted p1 for [while, x] = 1/(5+1); for [if, y] = 5/(5+1);
        // both have zero matching bigrams → smoothed 1/2; BP = 1.
        let reference = stream(&["if", "x"]);
        let kw_diff = stream(&["while", "x"]);
        let id_diff = stream(&["if", "y"]);
        let w_kw = weighted_ngram_bleu(&kw_diff, &reference, 4, 5.0, &BTreeSet::new());
        let w_id = weighted_ngram_bleu(&id_diff, &reference, 4, 5.0, &BTreeSet::new());
        assert!(w_kw <= w_id, "keyword diff {w_kw} vs identifier diff {w_id}");
        let expected_kw = ((1.0 / 6.0) * 0.5f64).sqrt();
        let expected_id = ((5.0 / 6.0) * 0.5f64).sqrt();
        assert!((w_kw - expected_kw).abs() < 1e-12);
        assert!((w_id - expected_id).abs() < 1e-12);
    }

    #[test]
    fn extra_keywords_are_weighted_like_language_keywords() {
        let extra: BTreeSet<String> = ["set".to_string()].into();
        let reference = stream(&["set", "x"]);
        let miss_api = stream(&["put", "x"]);
        let miss_id = stream(&["set", "y"]);
        let w_api = weighted_ngram_bleu(&miss_api, &reference, 1, 5.0, &extra);
        let w_id = weighted_ngram_bleu(&miss_id, &reference, 1, 5.0, &extra);
        assert!(w_api < w_id);
    }

    #[test]
    fn clipping_limits_repeated_tokens() {
        // cand repeats "a" three times, ref has it once → 1/3 at n=1
        let cand = stream(&["a", "a", "a"]);
        let reference = stream(&["a", "b", "c"]);
        let got = ngram_bleu(&cand, &reference, 1);
        assert!((got - 1.0 / 3.0).abs() < 1e-12);
    }
}
