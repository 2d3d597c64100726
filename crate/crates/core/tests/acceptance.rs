//! Acceptance gate for the evaluation harness.
//!
//! Each criterion is one test that prints a single
//! `ACCEPTANCE <n> (<what>): PASS` line on success. Tolerances are pinned
//! in the assertions. Criterion 10 is a live-network directional check and
//! is `#[ignore]`d: model drift makes it non-deterministic, so it gates
//! nothing and runs only on demand with provider credentials.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use sdvbench_core::analysis::{extract_dataflow, parse, MetricToken};
use sdvbench_core::benchmark::{load_benchmark, Benchmark};
use sdvbench_core::catalog::{parse_catalog, SignalTree};
use sdvbench_core::gateway::{Gateway, ResponseCache};
use sdvbench_core::metrics::{
    chrf, clipped_char_matches, codebleu, combine, compute_report, dataflow_match,
    normalize_whitespace, rouge_l, syntax_match, CodeBleuWeights, HashEmbedder, MetricConfig,
};
use sdvbench_core::prompt::{assemble, load_bundle, PromptBundle, PromptConfig, PromptMode};
use sdvbench_core::runner::{
    ablate, aggregate, build_registry, load_run_config, metric_config_for, paired_t, render_report,
    run, wilcoxon_signed_rank, ReportFormat, RunContext, RunMatrix,
};

/// Print a criterion verdict through the raw stdout handle. Direct handle
/// writes bypass the test harness's print-macro capture, so the gate's
/// one-line-per-criterion report is visible even without `--nocapture`.
macro_rules! announce {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, $($arg)*);
    }};
}

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn load_fixture_catalog() -> SignalTree {
    let raw = fs::read(fixtures().join("catalog.json")).expect("read fixture catalog");
    parse_catalog(&raw).expect("parse fixture catalog")
}

fn load_fixture_benchmark() -> Benchmark {
    load_benchmark(&fixtures().join("benchmark")).expect("load fixture benchmark")
}

fn load_fixture_bundle() -> PromptBundle {
    load_bundle(&fixtures().join("bundle")).expect("load fixture bundle")
}

// ---------------------------------------------------------------- 1

#[test]
fn criterion_01_metric_identity_on_shipped_solutions() {
    let started = Instant::now();
    let catalog = load_fixture_catalog();
    let benchmark = load_fixture_benchmark();
    let bundle = load_fixture_bundle();
    let config = metric_config_for(&catalog, CodeBleuWeights::default());
    let embedder = HashEmbedder::default();

    let mut sources: Vec<&str> = benchmark
        .items()
        .iter()
        .map(|item| item.reference_solution.as_str())
        .collect();
    sources.extend(bundle.exemplars().iter().map(|e| e.solution_code.as_str()));

    for source in &sources {
        let report = compute_report(source, source, &embedder, &config).expect("identity report");
        assert!(!report.flags.candidate_parse_failed, "reference must parse: {source}");
        for (i, score) in report.all_scores().iter().enumerate() {
            assert!(
                (score - 1.0).abs() <= 1e-9,
                "score #{i} on (solution, solution) was {score}, want 1.0 +/- 1e-9:\n{source}"
            );
        }
    }

    let elapsed = started.elapsed();
    assert!(sources.len() >= 18, "fixture subset too small: {}", sources.len());
    assert!(elapsed.as_secs_f64() < 10.0, "identity suite took {elapsed:?}, budget 10 s");
    announce!(
        "ACCEPTANCE 1 (metric identity: {} solutions, all 14 scores = 1.0 +/- 1e-9, {:.2?}): PASS",
        sources.len(),
        elapsed
    );
}

// ---------------------------------------------------------------- 2

/// Longest common subsequence by exhaustive enumeration: try every
/// subsequence of `a` (bitmask) and keep the longest that also embeds in
/// `b`. Exponential and obviously correct — the point of an oracle.
fn oracle_lcs(a: &[u8], b: &[u8]) -> usize {
    assert!(a.len() <= 16, "oracle is exponential in |a|");
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let picked: Vec<u8> = (0..a.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| a[i])
            .collect();
        if picked.len() > best && is_subsequence(&picked, b) {
            best = picked.len();
        }
    }
    best
}

fn is_subsequence(needle: &[u8], haystack: &[u8]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

#[test]
fn criterion_02_rouge_l_matches_exhaustive_lcs_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x2002);
    let alphabet = *b"abc";
    let mut checked = 0;
    for _ in 0..200 {
        let len_a = rng.gen_range(0..=12);
        let len_b = rng.gen_range(0..=12);
        let a: Vec<u8> = (0..len_a).map(|_| *alphabet.choose(&mut rng).unwrap()).collect();
        let b: Vec<u8> = (0..len_b).map(|_| *alphabet.choose(&mut rng).unwrap()).collect();
        let cand: Vec<MetricToken> = a
            .iter()
            .map(|c| MetricToken::new((*c as char).to_string(), false))
            .collect();
        let reference: Vec<MetricToken> = b
            .iter()
            .map(|c| MetricToken::new((*c as char).to_string(), false))
            .collect();

        let lcs = oracle_lcs(&a, &b);
        for beta in [1.0, 2.0] {
            let got = rouge_l(&cand, &reference, beta);
            if a.is_empty() || b.is_empty() {
                assert_eq!(got.precision, 0.0);
                assert_eq!(got.recall, 0.0);
                assert_eq!(got.f, 0.0);
                continue;
            }
            // LCS length recovered from the reported precision
            let recovered = got.precision * a.len() as f64;
            assert!(
                (recovered - lcs as f64).abs() < 1e-9,
                "LCS mismatch: impl {recovered}, oracle {lcs} on {a:?} vs {b:?}"
            );
            // F from the hand formula over the oracle's P and R
            let p = lcs as f64 / a.len() as f64;
            let r = lcs as f64 / b.len() as f64;
            let denom = r + beta * beta * p;
            let f = if denom == 0.0 { 0.0 } else { (1.0 + beta * beta) * p * r / denom };
            assert!((got.f - f).abs() <= 1e-12, "F mismatch: impl {}, hand {f}", got.f);
            assert!((got.precision - p).abs() <= 1e-12);
            assert!((got.recall - r).abs() <= 1e-12);
        }
        checked += 1;
    }
    announce!("ACCEPTANCE 2 (ROUGE-L vs exhaustive-subsequence oracle, {checked} pairs, F to 1e-12): PASS");
}

// ---------------------------------------------------------------- 3

/// Clipped n-gram match count, brute force: count every reference n-gram
/// by scanning, then walk candidate windows decrementing budgets.
fn oracle_char_matches(cand: &[char], reference: &[char], n: usize) -> usize {
    if cand.len() < n || reference.len() < n {
        return 0;
    }
    let mut budget: HashMap<String, usize> = HashMap::new();
    for i in 0..=(reference.len() - n) {
        *budget.entry(reference[i..i + n].iter().collect()).or_insert(0) += 1;
    }
    let mut matched = 0;
    for i in 0..=(cand.len() - n) {
        let gram: String = cand[i..i + n].iter().collect();
        if let Some(left) = budget.get_mut(&gram) {
            if *left > 0 {
                *left -= 1;
                matched += 1;
            }
        }
    }
    matched
}

/// The oracle's own whitespace collapsing, written independently of the
/// implementation (split on whitespace, rejoin with single spaces).
fn oracle_normalize(text: &str) -> Vec<char> {
    text.split_whitespace().collect::<Vec<_>>().join(" ").chars().collect()
}

#[test]
fn criterion_03_chrf_counts_match_brute_force_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3003);
    let pool: Vec<char> = "abcx( )=\t\n.".chars().collect();
    let mut checked = 0;
    for _ in 0..100 {
        let make = |rng: &mut ChaCha8Rng| -> String {
            let len = rng.gen_range(0..=15);
            (0..len).map(|_| *pool.choose(rng).unwrap()).collect()
        };
        let cand_text = make(&mut rng);
        let ref_text = make(&mut rng);
        let cand = oracle_normalize(&cand_text);
        let reference = oracle_normalize(&ref_text);
        assert_eq!(
            normalize_whitespace(&cand_text).chars().collect::<Vec<_>>(),
            cand,
            "normalization disagrees on {cand_text:?}"
        );

        // per-order counts, exactly
        let mut precision_sum = 0.0;
        let mut recall_sum = 0.0;
        let mut orders = 0;
        for n in 1..=6 {
            let impl_count = clipped_char_matches(&cand, &reference, n);
            let oracle_count = oracle_char_matches(&cand, &reference, n);
            assert_eq!(
                impl_count, oracle_count,
                "order-{n} count mismatch on {cand_text:?} vs {ref_text:?}"
            );
            if reference.len() >= n {
                let cand_total = cand.len().saturating_sub(n - 1);
                precision_sum += if cand_total == 0 {
                    0.0
                } else {
                    oracle_count as f64 / cand_total as f64
                };
                recall_sum += oracle_count as f64 / (reference.len() - n + 1) as f64;
                orders += 1;
            }
        }

        // full score against the oracle-composed value
        let got = chrf(&cand_text, &ref_text, 6, 1.0);
        if cand.is_empty() || reference.is_empty() {
            assert_eq!(got.score, 0.0);
        } else {
            let p = precision_sum / orders as f64;
            let r = recall_sum / orders as f64;
            let expected = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            assert!((got.score - expected).abs() <= 1e-12, "score mismatch on {cand_text:?} vs {ref_text:?}");
        }
        checked += 1;
    }

    // the worked two-character example holds exactly
    let example = chrf("ab", "ac", 1, 1.0);
    assert_eq!(example.precision, 0.5);
    assert_eq!(example.recall, 0.5);
    assert_eq!(example.score, 0.5);
    announce!("ACCEPTANCE 3 (ChrF counts vs brute-force oracle, {checked} string pairs + exact (\"ab\",\"ac\") = 0.5): PASS");
}

// ---------------------------------------------------------------- 4

/// Naive Wilcoxon: average ranks computed with floats on the sorted
/// magnitudes, then the full 2^n sign-permutation null distribution.
/// Returns (W+, two-sided p). All rank sums are multiples of 0.5, so the
/// arithmetic is exact in f64.
fn oracle_wilcoxon(diffs: &[f64]) -> (f64, f64) {
    let mut entries: Vec<(f64, bool)> = diffs
        .iter()
        .filter(|d| **d != 0.0)
        .map(|d| (d.abs(), *d > 0.0))
        .collect();
    if entries.is_empty() {
        return (0.0, 1.0);
    }
    entries.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n = entries.len();
    let mut ranks = vec![0.0f64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && entries[j + 1].0 == entries[i].0 {
            j += 1;
        }
        // 1-based positions i+1 ..= j+1 share the average rank
        let avg = (i + 1 + j + 1) as f64 / 2.0;
        for rank in ranks.iter_mut().take(j + 1).skip(i) {
            *rank = avg;
        }
        i = j + 1;
    }
    let w_plus: f64 = ranks
        .iter()
        .zip(&entries)
        .filter(|(_, (_, positive))| *positive)
        .map(|(rank, _)| rank)
        .sum();

    let total = 1u64 << n;
    let mut at_most = 0u64;
    let mut at_least = 0u64;
    for mask in 0..total {
        let w: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| ranks[i]).sum();
        if w <= w_plus {
            at_most += 1;
        }
        if w >= w_plus {
            at_least += 1;
        }
    }
    let tail = at_most.min(at_least) as f64 / total as f64;
    (w_plus, (2.0 * tail).min(1.0))
}

#[test]
fn criterion_04_wilcoxon_matches_sign_permutation_enumeration() {
    // Every vector of length <= 10 over {-2,-1,1,2}: the implementation is
    // invoked on each one; the oracle's 2^n enumeration is memoized by the
    // vector's sufficient statistic (counts of +-1/+-2), which determines
    // the rank multiset and W+ and therefore the p-value.
    let values = [-2.0, -1.0, 1.0, 2.0];
    let mut oracle_memo: HashMap<(u8, u8, u8, u8), (f64, f64)> = HashMap::new();
    let mut checked: u64 = 0;
    for n in 1..=10usize {
        let mut indices = vec![0usize; n];
        loop {
            let diffs: Vec<f64> = indices.iter().map(|&i| values[i]).collect();
            let ones = diffs.iter().filter(|d| d.abs() == 1.0).count() as u8;
            let twos = diffs.iter().filter(|d| d.abs() == 2.0).count() as u8;
            let pos_ones = diffs.iter().filter(|d| **d == 1.0).count() as u8;
            let pos_twos = diffs.iter().filter(|d| **d == 2.0).count() as u8;
            let (oracle_w, oracle_p) = *oracle_memo
                .entry((ones, twos, pos_ones, pos_twos))
                .or_insert_with(|| oracle_wilcoxon(&diffs));

            let (w, p) = wilcoxon_signed_rank(&diffs).expect("wilcoxon on nonzero diffs");
            assert_eq!(w, oracle_w, "W+ mismatch on {diffs:?}");
            assert!(
                (p - oracle_p).abs() <= 1e-12,
                "p mismatch on {diffs:?}: impl {p}, oracle {oracle_p}"
            );
            checked += 1;

            // odometer over the 4^n index space
            let mut k = 0;
            loop {
                if k == n {
                    break;
                }
                indices[k] += 1;
                if indices[k] < values.len() {
                    break;
                }
                indices[k] = 0;
                k += 1;
            }
            if k == n {
                break;
            }
        }
    }
    assert_eq!(checked, (4u64.pow(11) - 4) / 3, "must cover the full vector space");

    let (_, p) = paired_t(&[1.0, -1.0]).unwrap();
    assert!((p - 1.0).abs() <= 1e-9, "paired t on [1,-1] gave p = {p}");
    announce!("ACCEPTANCE 4 (Wilcoxon exact vs 2^n enumeration on all {checked} vectors of length <= 10 over {{-2,-1,1,2}}, 1e-12; paired t [1,-1] -> p = 1.0): PASS");
}

// ---------------------------------------------------------------- 5

#[test]
fn criterion_05_codebleu_composite_is_the_weighted_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5005);
    let config = MetricConfig::default();
    for case in 0..100 {
        let cand = generate_program(&mut rng);
        let reference = generate_program(&mut rng);
        let raw: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.05..1.0));
        let sum: f64 = raw.iter().sum();
        let weights = CodeBleuWeights::new(raw[0] / sum, raw[1] / sum, raw[2] / sum, raw[3] / sum)
            .expect("normalized weights are valid");
        let config = MetricConfig {
            weights,
            ..config.clone()
        };
        let outcome = codebleu(&cand, &reference, &config).expect("reference parses");
        let s = outcome.scores;
        let expected = weights.alpha * s.ngram
            + weights.beta * s.weighted_ngram
            + weights.gamma * s.syntax
            + weights.delta * s.dataflow;
        assert!(
            (s.composite - expected).abs() <= 1e-12,
            "composition broke on case {case}: {} vs {expected}",
            s.composite
        );
    }

    // Pinned point: submetrics (0.8, 0.6, 0.79, 0.53) under default weights
    // combine to 0.68. The exact decimal 0.68 is not representable in f64,
    // so "exactly" is pinned as <= 1 ulp of the 0.68 literal.
    let pinned = combine(0.8, 0.6, 0.79, 0.53, &CodeBleuWeights::default()).composite;
    let ulps = (pinned.to_bits() as i64 - 0.68f64.to_bits() as i64).unsigned_abs();
    assert!(
        ulps <= 1,
        "pinned composite {pinned:.17} is {ulps} ulps from 0.68"
    );
    assert!((pinned - 0.68).abs() <= f64::EPSILON);
    announce!("ACCEPTANCE 5 (composite = weighted sum to 1e-12 on 100 random pairs; (0.8, 0.6, 0.79, 0.53) -> 0.68 within 1 ulp): PASS");
}

// ---------------------------------------------------------------- 6

/// Small deterministic program generator. Identifiers come from a fixed-
/// width inventory (`av00`..) so a textual rename map stays injective.
fn generate_program(rng: &mut ChaCha8Rng) -> String {
    let paths = [
        "Vehicle.Speed",
        "Vehicle.Cabin.HVAC.AmbientAirTemperature",
        "Vehicle.Body.RainSensor.Intensity",
        "Vehicle.ADAS.CruiseControl.SpeedSet",
    ];
    let mut vars: Vec<String> = Vec::new();
    let fresh = |vars: &mut Vec<String>| -> String {
        let name = format!("av{:02}", vars.len());
        vars.push(name.clone());
        name
    };
    let pick = |rng: &mut ChaCha8Rng, vars: &[String]| -> String {
        vars.choose(rng).cloned().unwrap_or_else(|| "av99".to_string())
    };

    let mut out = String::new();
    let seed_var = fresh(&mut vars);
    out.push_str(&format!(
        "{seed_var} = vehicle.get(\"{}\")\n",
        paths.choose(rng).unwrap()
    ));
    let statements = rng.gen_range(3..=8);
    for _ in 0..statements {
        match rng.gen_range(0..6) {
            0 => {
                let target = fresh(&mut vars);
                let source = pick(rng, &vars);
                let constant = rng.gen_range(1..100);
                out.push_str(&format!("{target} = {source} + {constant}\n"));
            }
            1 => {
                let scrutinee = pick(rng, &vars);
                let target = fresh(&mut vars);
                let threshold = rng.gen_range(1..100);
                out.push_str(&format!(
                    "if {scrutinee} > {threshold}:\n    {target} = {scrutinee} - {threshold}\nelse:\n    {target} = 0\n"
                ));
            }
            2 => {
                let counter = fresh(&mut vars);
                let acc = fresh(&mut vars);
                let bound = rng.gen_range(2..10);
                out.push_str(&format!(
                    "{acc} = 0\nfor {counter} in range({bound}):\n    {acc} = {acc} + {counter}\n"
                ));
            }
            3 => {
                let guard = pick(rng, &vars);
                out.push_str(&format!(
                    "while {guard} > 0:\n    {guard} = {guard} - {}\n",
                    rng.gen_range(1..9)
                ));
            }
            4 => {
                let helper = format!("fh{:02}", vars.len());
                let parameter = format!("ap{:02}", vars.len());
                let target = fresh(&mut vars);
                let argument = pick(rng, &vars);
                vars.push(helper.clone());
                vars.push(parameter.clone());
                out.push_str(&format!(
                    "def {helper}({parameter}):\n    return {parameter} * {}\n{target} = {helper}({argument})\n",
                    rng.gen_range(2..5)
                ));
            }
            _ => {
                let value = pick(rng, &vars);
                out.push_str(&format!(
                    "vehicle.set(\"{}\", {value})\n",
                    paths.choose(rng).unwrap()
                ));
            }
        }
    }
    assert!(parse(&out).is_ok(), "generator must emit parseable code:\n{out}");
    out
}

/// Injective textual rename: every generated identifier is four characters
/// (`av07`, `fh03`, `ap05`), so swapping the two-letter prefix renames
/// without collisions or accidental substring hits.
fn rename_identifiers(source: &str) -> String {
    let mut renamed = source.to_string();
    for prefix in ["av", "fh", "ap"] {
        for index in 0..100 {
            let old = format!("{prefix}{index:02}");
            let new = format!("q{prefix}{index:02}x");
            renamed = renamed.replace(&old, &new);
        }
    }
    renamed
}

#[test]
fn criterion_06_structural_metrics_survive_alpha_renaming() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6006);
    let programs: Vec<String> = (0..50).map(|_| generate_program(&mut rng)).collect();
    for (i, cand_src) in programs.iter().enumerate() {
        let ref_src = &programs[(i + 1) % programs.len()];
        let cand_renamed = rename_identifiers(cand_src);
        let ref_renamed = rename_identifiers(ref_src);
        assert_ne!(cand_src, &cand_renamed, "rename must change the text");

        let tree = |s: &str| parse(s).expect("fixture programs parse");
        let (cand_tree, ref_tree) = (tree(cand_src), tree(ref_src));
        let (cand_tree_r, ref_tree_r) = (tree(&cand_renamed), tree(&ref_renamed));

        let base_syntax = syntax_match(Some(&cand_tree), &ref_tree);
        assert_eq!(base_syntax, syntax_match(Some(&cand_tree_r), &ref_tree), "cand rename, prog {i}");
        assert_eq!(base_syntax, syntax_match(Some(&cand_tree), &ref_tree_r), "ref rename, prog {i}");
        assert_eq!(base_syntax, syntax_match(Some(&cand_tree_r), &ref_tree_r), "both renamed, prog {i}");

        let flow = |t: &sdvbench_core::analysis::SyntaxTree| extract_dataflow(t);
        let base_flow = dataflow_match(&flow(&cand_tree), &flow(&ref_tree));
        assert_eq!(base_flow, dataflow_match(&flow(&cand_tree_r), &flow(&ref_tree)), "cand rename, prog {i}");
        assert_eq!(base_flow, dataflow_match(&flow(&cand_tree), &flow(&ref_tree_r)), "ref rename, prog {i}");
        assert_eq!(base_flow, dataflow_match(&flow(&cand_tree_r), &flow(&ref_tree_r)), "both renamed, prog {i}");

        // and identity stays identity
        assert_eq!(syntax_match(Some(&cand_tree_r), &cand_tree), 1.0, "prog {i} self-match");
        assert_eq!(dataflow_match(&flow(&cand_tree_r), &flow(&cand_tree)), 1.0, "prog {i} self-match");
    }
    announce!("ACCEPTANCE 6 (alpha-renaming invariance of syntax/dataflow match on 50 generated programs, exact equality): PASS");
}

// ---------------------------------------------------------------- 7

#[test]
fn criterion_07_fuzzed_inputs_never_crash_or_leave_range() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7007);
    let reference = "speed = vehicle.get(\"Vehicle.Speed\")\nif speed > 120:\n    vehicle.set(\"Vehicle.ADAS.CruiseControl.SpeedSet\", 120)\n";
    let config = MetricConfig::default();
    let embedder = HashEmbedder::default();
    let mut parse_failures = 0u32;

    for case in 0..10_000u32 {
        let input = match case % 4 {
            0 => {
                // raw bytes, lossily decoded
                let len = rng.gen_range(0..200);
                let bytes: Vec<u8> = (0..len).map(|_| rng.gen()).collect();
                String::from_utf8_lossy(&bytes).into_owned()
            }
            1 => {
                // structure-adjacent character soup
                let pool: Vec<char> =
                    "abcxyz_ ().:=+-*/<>!\"'#\n\t\r0123456789ифэ𝕍🚗\\,[]{}".chars().collect();
                let len = rng.gen_range(0..160);
                (0..len).map(|_| *pool.choose(&mut rng).unwrap()).collect()
            }
            2 => {
                // valid program with random bytes stomped over it
                let mut bytes = generate_program(&mut rng).into_bytes();
                for _ in 0..rng.gen_range(1..10) {
                    if bytes.is_empty() {
                        break;
                    }
                    let at = rng.gen_range(0..bytes.len());
                    bytes[at] = rng.gen();
                }
                String::from_utf8_lossy(&bytes).into_owned()
            }
            _ => {
                // token soup with plausible spellings
                let words = ["if", "else:", "def", "return", "(", ")", ":", "=", "vehicle",
                    ".get", "speed", "42", "\"x\"", "for", "in", "range", "\n", "    ", "~"];
                let len = rng.gen_range(0..60);
                (0..len).map(|_| *words.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ")
            }
        };

        let parsed = parse(&input); // must return, never panic
        let report = compute_report(&input, reference, &embedder, &config)
            .expect("fuzzed candidate must still produce a report");
        for (i, score) in report.all_scores().iter().enumerate() {
            assert!(
                score.is_finite() && (0.0..=1.0).contains(score),
                "score #{i} out of range on fuzz case {case}: {score}\ninput: {input:?}"
            );
        }
        if parsed.is_err() {
            parse_failures += 1;
            assert!(report.flags.candidate_parse_failed, "flag must be set on case {case}");
            assert_eq!(report.codebleu.syntax, 0.0, "case {case}");
            assert_eq!(report.codebleu.dataflow, 0.0, "case {case}");
        } else {
            assert!(!report.flags.candidate_parse_failed, "spurious flag on case {case}");
        }
    }
    assert!(parse_failures > 100, "fuzzer should hit plenty of parse failures");
    announce!(
        "ACCEPTANCE 7 (10000 fuzzed inputs, no crash, all scores in [0,1], {} parse failures flagged, {:.2?}): PASS",
        parse_failures,
        started.elapsed()
    );
}

// ---------------------------------------------------------------- 8

/// Everything criterion 8 needs to run the shipped config offline.
struct World {
    catalog: SignalTree,
    bundle: PromptBundle,
    benchmark: Benchmark,
    gateway: Gateway,
    config: sdvbench_core::runner::RunConfig,
}

fn load_world() -> World {
    let config = load_run_config(&fixtures().join("run_config.toml")).expect("load run config");
    let raw = fs::read(&config.catalog).expect("read catalog");
    let catalog = parse_catalog(&raw).expect("parse catalog");
    let bundle = load_bundle(&config.bundle).expect("load bundle");
    let benchmark = load_benchmark(&config.benchmark).expect("load benchmark");
    let registry = build_registry(&config.providers).expect("build providers");
    let gateway = Gateway::new(registry, ResponseCache::new(&config.cache)).offline(config.offline);
    World {
        catalog,
        bundle,
        benchmark,
        gateway,
        config,
    }
}

#[test]
fn criterion_08_shipped_cache_replays_offline_and_byte_identically() {
    let started = Instant::now();
    let world = load_world();
    assert!(world.config.offline, "shipped config must declare offline replay");
    assert!(world.gateway.is_offline());

    let matrix = RunMatrix {
        models: world.config.models.clone(),
        techniques: world.config.techniques.iter().map(|t| t.to_technique()).collect(),
        items: world.benchmark.clone(),
        weights: world.config.weights,
    };
    assert!(matrix.models.len() >= 2, "need >= 2 mock models");
    assert_eq!(matrix.techniques.len(), 3, "need the 3 prompting techniques");
    assert!(world.benchmark.len() >= 6, "need >= 6 items");

    let embedder = HashEmbedder::default();
    let ctx = RunContext {
        gateway: &world.gateway,
        catalog: &world.catalog,
        bundle: &world.bundle,
        embedder: &embedder,
        max_attempts: world.config.max_attempts,
        workers: world.config.workers,
    };

    let first = run(&matrix, &ctx).expect("offline run");
    let second = run(&matrix, &ctx).expect("offline re-run");
    assert_eq!(first.len(), matrix.cell_count());
    for result in first.results() {
        assert!(
            result.error.is_none(),
            "offline replay must be fully served by the shipped cache: {} {} {} -> {:?}",
            result.model,
            result.technique,
            result.item,
            result.error
        );
    }
    assert_eq!(first.to_jsonl(), second.to_jsonl(), "results must replay byte-identically");

    // Headline and submetric tables
    let rows = aggregate(first.results()).expect("aggregate");
    assert_eq!(rows.len(), matrix.models.len() * matrix.techniques.len());
    let labels: Vec<(String, String)> = rows
        .iter()
        .map(|r| (r.model.clone(), r.technique.clone()))
        .collect();
    for model in ["mock/mock-alpha", "mock/mock-beta"] {
        for technique in ["few-shot", "zero-shot", "original"] {
            assert!(
                labels.contains(&(model.to_string(), technique.to_string())),
                "missing row {model}/{technique}"
            );
        }
    }
    for row in &rows {
        assert_eq!(row.items, world.benchmark.len());
    }

    let markdown_a = render_report(&rows, ReportFormat::Markdown).expect("render");
    let markdown_b =
        render_report(&aggregate(second.results()).unwrap(), ReportFormat::Markdown).unwrap();
    assert_eq!(markdown_a, markdown_b, "report output must be byte-identical");
    for column in ["CodeBLEU", "CodeBERTScore", "ROUGE-L", "ChrF"] {
        assert!(markdown_a.contains(column), "missing headline column {column}");
    }
    for column in ["N-gram", "Weighted n-gram", "Syntax match", "Dataflow match"] {
        assert!(markdown_a.contains(column), "missing submetric column {column}");
    }
    let csv_a = render_report(&rows, ReportFormat::Csv).unwrap();
    let csv_b = render_report(&aggregate(second.results()).unwrap(), ReportFormat::Csv).unwrap();
    assert_eq!(csv_a, csv_b);

    // The ablation table replays from the same cache
    let ablation = world.config.ablation.clone().expect("shipped config carries ablation");
    let model = &matrix.models[0];
    let table3_a = ablate(model, &ablation.subsets, &world.benchmark, world.config.weights, &ctx)
        .expect("ablation replay");
    let table3_b = ablate(model, &ablation.subsets, &world.benchmark, world.config.weights, &ctx)
        .expect("ablation replay");
    assert_eq!(
        render_report(&table3_a, ReportFormat::Markdown).unwrap(),
        render_report(&table3_b, ReportFormat::Markdown).unwrap()
    );
    assert_eq!(table3_a.len(), ablation.subsets.len() + 2);

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "replay took {elapsed:?}, budget 30 s");
    announce!(
        "ACCEPTANCE 8 (offline replay: {} cells x2 + ablation x2 byte-identical, headline/submetric/ablation tables shaped, {:.2?}): PASS",
        matrix.cell_count(),
        elapsed
    );
}

// ---------------------------------------------------------------- 9

#[test]
fn criterion_09_prompt_modes_nest_and_ablation_rows_line_up() {
    let world = load_world();
    let section_set = |mode: PromptMode| -> BTreeSet<String> {
        let prompt = assemble(&PromptConfig::new(mode), &world.catalog, &world.bundle);
        match prompt {
            Ok(p) => p.section_ids().into_iter().map(str::to_string).collect(),
            Err(e) => {
                // Original assembles to the empty prompt; anything else must build.
                assert_eq!(mode, PromptMode::Original, "assembly failed for {mode}: {e}");
                BTreeSet::new()
            }
        }
    };
    let original = section_set(PromptMode::Original);
    let zero_shot = section_set(PromptMode::ZeroShot);
    let few_shot = section_set(PromptMode::FewShot);
    assert!(original.is_subset(&zero_shot) && original != zero_shot, "Original must be a strict subset of ZeroShot");
    assert!(zero_shot.is_subset(&few_shot), "ZeroShot must be a subset of FewShot");

    // Every requested ablation subset assembles to exactly that section set
    let ablation = world.config.ablation.clone().expect("ablation config");
    let embedder = HashEmbedder::default();
    let ctx = RunContext {
        gateway: &world.gateway,
        catalog: &world.catalog,
        bundle: &world.bundle,
        embedder: &embedder,
        max_attempts: world.config.max_attempts,
        workers: world.config.workers,
    };
    for subset in &ablation.subsets {
        let config = PromptConfig {
            included_section_ids: Some(subset.clone()),
            ..PromptConfig::new(PromptMode::FewShot)
        };
        let prompt = assemble(&config, &world.catalog, &world.bundle).expect("subset assembles");
        let got: BTreeSet<&str> = prompt.section_ids().into_iter().collect();
        let want: BTreeSet<&str> = subset.iter().map(String::as_str).collect();
        assert_eq!(got, want, "ablation subset must render exactly its sections");
    }

    let rows = ablate(
        &world.config.models[0],
        &ablation.subsets,
        &world.benchmark,
        world.config.weights,
        &ctx,
    )
    .expect("ablation");
    assert_eq!(rows.len(), ablation.subsets.len() + 2, "one row per subset plus two baselines");
    assert_eq!(rows[0].technique, "full");
    assert_eq!(rows[1].technique, "none");
    for (row, subset) in rows[2..].iter().zip(&ablation.subsets) {
        assert_eq!(row.technique, subset.join("+"));
    }
    announce!(
        "ACCEPTANCE 9 (Original < ZeroShot <= FewShot section nesting; ablation = {} subset rows + 2 baselines): PASS",
        ablation.subsets.len()
    );
}

// ---------------------------------------------------------------- 10

/// Live directional sanity: with real credentials, mean CodeBLEU should
/// order few-shot > zero-shot > original. Non-gating by design — model
/// drift makes it non-deterministic — so it only runs on demand:
///
/// ```text
/// SDVBENCH_LIVE_ENDPOINT=https://... SDVBENCH_LIVE_MODEL=... \
/// SDVBENCH_LIVE_KEY_ENV=MY_API_KEY cargo test --test acceptance -- --ignored --nocapture
/// ```
#[test]
#[ignore = "live-network directional check; set SDVBENCH_LIVE_ENDPOINT/_MODEL/_KEY_ENV and run with --ignored"]
fn criterion_10_live_directional_sanity() {
    let (Ok(endpoint), Ok(model_name), Ok(key_env)) = (
        std::env::var("SDVBENCH_LIVE_ENDPOINT"),
        std::env::var("SDVBENCH_LIVE_MODEL"),
        std::env::var("SDVBENCH_LIVE_KEY_ENV"),
    ) else {
        announce!("ACCEPTANCE 10 (live directional sanity): SKIP - no credentials configured");
        return;
    };

    use sdvbench_core::gateway::{ChatHttpProvider, ModelSpec, Provider, ProviderRegistry};
    use sdvbench_core::runner::Technique;
    use std::sync::Arc;

    let catalog = load_fixture_catalog();
    let bundle = load_fixture_bundle();
    let benchmark = load_fixture_benchmark();
    assert!(benchmark.len() >= 10, "need >= 10 items for the directional check");

    let provider: Arc<dyn Provider> =
        Arc::new(ChatHttpProvider::new("live", &endpoint, &key_env).expect("provider"));
    let mut registry = ProviderRegistry::new();
    registry.register(provider);
    let cache_dir = tempfile::tempdir().expect("cache dir");
    let gateway = Gateway::new(registry, ResponseCache::new(cache_dir.path()));

    let matrix = RunMatrix {
        models: vec![ModelSpec::new("live", &model_name)],
        techniques: vec![
            Technique::new("few-shot", PromptConfig::new(PromptMode::FewShot)),
            Technique::new("zero-shot", PromptConfig::new(PromptMode::ZeroShot)),
            Technique::new("original", PromptConfig::new(PromptMode::Original)),
        ],
        items: benchmark,
        weights: CodeBleuWeights::default(),
    };
    let embedder = HashEmbedder::default();
    let ctx = RunContext {
        gateway: &gateway,
        catalog: &catalog,
        bundle: &bundle,
        embedder: &embedder,
        max_attempts: 3,
        workers: 1,
    };
    let results = run(&matrix, &ctx).expect("live run");
    let rows = aggregate(results.results()).expect("aggregate");
    let mean = |technique: &str| -> f64 {
        rows.iter().find(|r| r.technique == technique).expect("row").codebleu
    };
    let (few, zero, original) = (mean("few-shot"), mean("zero-shot"), mean("original"));
    announce!(
        "ACCEPTANCE 10 (live mean CodeBLEU: few-shot {few:.4}, zero-shot {zero:.4}, original {original:.4}): {}",
        if few > zero && zero > original { "PASS" } else { "FAIL (non-gating)" }
    );
    assert!(
        few > zero && zero > original,
        "directional ordering not observed (non-gating; model drift expected)"
    );
}
