//! Scoring math: classification F1, token-level span F1, disparity
//! statistics across dialects, override-impact statistics, BLEU, and
//! ROUGE-L. Everything here is pure.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::datasets::{GoldAnswer, Label};
use crate::error::{Error, Result};
use crate::orchestrator::{RefinementTrace, VerdictValue};

/// Average metric value for one dialect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialectScore {
    pub dialect_id: String,
    pub score: f64,
    pub n_examples: usize,
}

/// Per-dialect scores plus the disparity summary columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisparityReport {
    pub per_dialect: Vec<DialectScore>,
    pub avg: f64,
    pub avg_diff: f64,
    pub max_diff: f64,
}

/// Frequency and impact of final-vs-initial verdict changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverrideStats {
    pub n_traces: usize,
    pub n_overrides: usize,
    pub override_rate: f64,
    pub beneficial_rate: f64,
    pub detrimental_rate: f64,
    pub neutral_rate: f64,
}

/// F1 of the positive class `Relevant`. Returns 0 when there are no true
/// positives.
pub fn classification_f1(predictions: &[Label], golds: &[Label]) -> Result<f64> {
    if predictions.len() != golds.len() {
        return Err(Error::Scoring(format!(
            "length mismatch: {} predictions vs {} golds",
            predictions.len(),
            golds.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Scoring("empty label vectors".into()));
    }
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (pred, gold) in predictions.iter().zip(golds) {
        match (pred, gold) {
            (Label::Relevant, Label::Relevant) => tp += 1,
            (Label::Relevant, Label::Irrelevant) => fp += 1,
            (Label::Irrelevant, Label::Relevant) => fn_ += 1,
            (Label::Irrelevant, Label::Irrelevant) => {}
        }
    }
    if tp == 0 {
        return Ok(0.0);
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Standard extractive-QA answer normalization: lowercase, drop ASCII
/// punctuation, drop the articles a/an/the, split on whitespace.
pub fn normalize_answer(text: &str) -> Vec<String> {
    let lowered = text.to_lowercase();
    let stripped: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation())
        .collect();
    stripped
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(str::to_string)
        .collect()
}

fn token_counts(tokens: &[String]) -> HashMap<&str, usize> {
    let mut counts = HashMap::new();
    for token in tokens {
        *counts.entry(token.as_str()).or_insert(0) += 1;
    }
    counts
}

fn single_ref_token_f1(pred: &[String], reference: &[String]) -> f64 {
    match (pred.is_empty(), reference.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let pred_counts = token_counts(pred);
    let ref_counts = token_counts(reference);
    let overlap: usize = pred_counts
        .iter()
        .map(|(token, count)| count.min(ref_counts.get(token).unwrap_or(&0)))
        .sum();
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / reference.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Token-level F1 between a predicted span and the best-matching reference.
pub fn token_f1(prediction: &str, references: &[String]) -> Result<f64> {
    if references.is_empty() {
        return Err(Error::Scoring("token_f1 requires at least one reference".into()));
    }
    let pred = normalize_answer(prediction);
    let best = references
        .iter()
        .map(|r| single_ref_token_f1(&pred, &normalize_answer(r)))
        .fold(0.0f64, f64::max);
    Ok(best)
}

/// Disparity summary over per-dialect scores: `avg` is the mean including
/// SAE, `avg_diff` the mean absolute deviation from that mean, and
/// `max_diff` the largest pairwise gap (the range).
pub fn disparity(per_dialect: &[DialectScore]) -> Result<DisparityReport> {
    if per_dialect.len() < 2 {
        return Err(Error::Scoring(format!(
            "disparity requires at least 2 dialects, got {}",
            per_dialect.len()
        )));
    }
    let n = per_dialect.len() as f64;
    let avg = per_dialect.iter().map(|d| d.score).sum::<f64>() / n;
    let avg_diff = per_dialect
        .iter()
        .map(|d| (d.score - avg).abs())
        .sum::<f64>()
        / n;
    let max = per_dialect
        .iter()
        .map(|d| d.score)
        .fold(f64::NEG_INFINITY, f64::max);
    let min = per_dialect
        .iter()
        .map(|d| d.score)
        .fold(f64::INFINITY, f64::min);
    Ok(DisparityReport {
        per_dialect: per_dialect.to_vec(),
        avg,
        avg_diff,
        max_diff: max - min,
    })
}

/// Rounds half-up to 3 decimals, the display convention for report tables.
/// The small epsilon keeps values that are exactly on a half point (but sit
/// a hair below it in binary) from rounding down.
pub fn round_half_up_3(x: f64) -> f64 {
    (x * 1000.0 + 0.5 + 1e-9).floor() / 1000.0
}

fn verdict_correct(value: &VerdictValue, gold: &GoldAnswer) -> Result<bool> {
    match (value, gold) {
        (VerdictValue::Label(label), GoldAnswer::Classification(gold_label)) => {
            Ok(label == gold_label)
        }
        (VerdictValue::Span(_), GoldAnswer::Spans(_)) => Err(Error::Scoring(
            "span verdicts are scored by token_f1 delta, not exact correctness".into(),
        )),
        _ => Err(Error::Scoring(
            "verdict kind does not match gold answer kind".into(),
        )),
    }
}

/// Override accounting: an override is any trace whose final verdict value
/// differs from its initial one. Among overrides, classification verdicts
/// are beneficial when they fix a wrong label and detrimental when they
/// break a right one; extraction verdicts are judged by whether token F1
/// against the gold spans strictly rose, strictly fell, or stayed put.
pub fn override_stats(
    traces: &[RefinementTrace],
    golds: &HashMap<String, GoldAnswer>,
) -> Result<OverrideStats> {
    let mut n_overrides = 0usize;
    let mut beneficial = 0usize;
    let mut detrimental = 0usize;
    let mut neutral = 0usize;
    for trace in traces {
        let gold = golds.get(&trace.example_id).ok_or_else(|| {
            Error::Scoring(format!(
                "trace '{}' has no matching gold answer",
                trace.example_id
            ))
        })?;
        if trace.initial_verdict.value == trace.final_verdict.value {
            continue;
        }
        n_overrides += 1;
        match gold {
            GoldAnswer::Classification(_) => {
                let initial_ok = verdict_correct(&trace.initial_verdict.value, gold)?;
                let final_ok = verdict_correct(&trace.final_verdict.value, gold)?;
                match (initial_ok, final_ok) {
                    (false, true) => beneficial += 1,
                    (true, false) => detrimental += 1,
                    _ => neutral += 1,
                }
            }
            GoldAnswer::Spans(spans) => {
                let initial_f1 = token_f1(span_text(&trace.initial_verdict.value)?, spans)?;
                let final_f1 = token_f1(span_text(&trace.final_verdict.value)?, spans)?;
                if final_f1 > initial_f1 {
                    beneficial += 1;
                } else if final_f1 < initial_f1 {
                    detrimental += 1;
                } else {
                    neutral += 1;
                }
            }
        }
    }
    let rate = |count: usize| {
        if n_overrides == 0 {
            0.0
        } else {
            count as f64 / n_overrides as f64
        }
    };
    Ok(OverrideStats {
        n_traces: traces.len(),
        n_overrides,
        override_rate: if traces.is_empty() {
            0.0
        } else {
            n_overrides as f64 / traces.len() as f64
        },
        beneficial_rate: rate(beneficial),
        detrimental_rate: rate(detrimental),
        neutral_rate: rate(neutral),
    })
}

fn span_text(value: &VerdictValue) -> Result<&str> {
    match value {
        VerdictValue::Span(text) => Ok(text),
        VerdictValue::Label(_) => Err(Error::Scoring(
            "label verdict where a span was expected".into(),
        )),
    }
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> HashMap<&'a [&'a str], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for window in tokens.windows(n) {
            *counts.entry(window).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence BLEU on a 0-100 scale: n-grams up to 4 with uniform weights,
/// brevity penalty against the closest reference length (ties prefer the
/// shorter), and add-one smoothing on orders 2-4. No unigram overlap at all
/// scores 0. Tokens are whitespace-split and case-sensitive.
pub fn bleu(candidate: &str, references: &[String]) -> Result<f64> {
    let cand: Vec<&str> = candidate.split_whitespace().collect();
    if cand.is_empty() {
        return Err(Error::Scoring("bleu candidate is empty".into()));
    }
    if references.is_empty() {
        return Err(Error::Scoring("bleu requires at least one reference".into()));
    }
    let refs: Vec<Vec<&str>> = references
        .iter()
        .map(|r| r.split_whitespace().collect())
        .collect();
    if refs.iter().any(Vec::is_empty) {
        return Err(Error::Scoring("bleu reference is empty".into()));
    }

    let mut log_sum = 0.0f64;
    for n in 1..=4usize {
        let cand_ngrams = ngram_counts(&cand, n);
        let mut max_ref: HashMap<&[&str], usize> = HashMap::new();
        for reference in &refs {
            for (gram, count) in ngram_counts(reference, n) {
                let entry = max_ref.entry(gram).or_insert(0);
                if count > *entry {
                    *entry = count;
                }
            }
        }
        let matches: usize = cand_ngrams
            .iter()
            .map(|(gram, count)| count.min(max_ref.get(gram).unwrap_or(&0)))
            .sum();
        let total = cand.len().saturating_sub(n - 1);
        let precision = if n == 1 {
            if matches == 0 {
                return Ok(0.0);
            }
            matches as f64 / total as f64
        } else {
            (matches + 1) as f64 / (total + 1) as f64
        };
        log_sum += 0.25 * precision.ln();
    }

    let c = cand.len();
    let r = refs
        .iter()
        .map(|reference| reference.len())
        .min_by_key(|len| (len.abs_diff(c), *len))
        .expect("non-empty references");
    let bp = if c > r {
        1.0
    } else {
        (1.0 - r as f64 / c as f64).exp()
    };
    Ok(100.0 * bp * log_sum.exp())
}

/// ROUGE-L on a 0-100 scale: LCS-based F-measure over whitespace tokens.
pub fn rouge_l(candidate: &str, reference: &str) -> Result<f64> {
    let cand: Vec<&str> = candidate.split_whitespace().collect();
    let reference: Vec<&str> = reference.split_whitespace().collect();
    if cand.is_empty() || reference.is_empty() {
        return Err(Error::Scoring("rouge_l inputs must be non-empty".into()));
    }
    let mut dp = vec![vec![0usize; reference.len() + 1]; cand.len() + 1];
    for i in 1..=cand.len() {
        for j in 1..=reference.len() {
            dp[i][j] = if cand[i - 1] == reference[j - 1] {
                dp[i - 1][j - 1] + 1
            } else {
                dp[i - 1][j].max(dp[i][j - 1])
            };
        }
    }
    let lcs = dp[cand.len()][reference.len()] as f64;
    let precision = lcs / cand.len() as f64;
    let recall = lcs / reference.len() as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(100.0 * 2.0 * precision * recall / (precision + recall))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scores(values: &[f64]) -> Vec<DialectScore> {
        values
            .iter()
            .enumerate()
            .map(|(i, &score)| DialectScore {
                dialect_id: format!("d{i}"),
                score,
                n_examples: 10,
            })
            .collect()
    }

    #[test]
    fn classification_f1_identity_is_one() {
        let labels = vec![Label::Relevant; 5];
        assert_eq!(classification_f1(&labels, &labels).unwrap(), 1.0);
    }

    #[test]
    fn classification_f1_zero_tp_is_zero() {
        let preds = vec![Label::Irrelevant; 4];
        let golds = vec![
            Label::Relevant,
            Label::Irrelevant,
            Label::Irrelevant,
            Label::Irrelevant,
        ];
        assert_eq!(classification_f1(&preds, &golds).unwrap(), 0.0);
    }

    #[test]
    fn classification_f1_hand_case() {
        // TP=3 FP=1 FN=2: P=.75, R=.6, F1=0.666...
        let preds = vec![
            Label::Relevant,
            Label::Relevant,
            Label::Relevant,
            Label::Relevant,
            Label::Irrelevant,
            Label::Irrelevant,
        ];
        let golds = vec![
            Label::Relevant,
            Label::Relevant,
            Label::Relevant,
            Label::Irrelevant,
            Label::Relevant,
            Label::Relevant,
        ];
        let f1 = classification_f1(&preds, &golds).unwrap();
        assert!((f1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn classification_f1_length_mismatch_errors() {
        assert!(classification_f1(&[Label::Relevant], &[]).is_err());
    }

    #[test]
    fn normalize_strips_punctuation_and_articles() {
        assert_eq!(normalize_answer("The App's data!"), vec!["apps", "data"]);
        assert_eq!(normalize_answer(""), Vec::<String>::new());
        assert_eq!(
            normalize_answer("We do not sell your personal information."),
            vec!["we", "do", "not", "sell", "your", "personal", "information"]
        );
    }

    #[test]
    fn token_f1_hand_cases() {
        let refs = vec!["we do not sell your data".to_string()];
        let f1 = token_f1("we do not sell", &refs).unwrap();
        assert!((f1 - 0.8).abs() < 1e-12);
        assert_eq!(token_f1("identical words", &["identical words".into()]).unwrap(), 1.0);
        assert_eq!(token_f1("", &["nonempty".into()]).unwrap(), 0.0);
        assert!(token_f1("x", &[]).is_err());
    }

    #[test]
    fn token_f1_takes_max_over_references() {
        let refs = vec!["totally different".to_string(), "exact match".to_string()];
        assert_eq!(token_f1("exact match", &refs).unwrap(), 1.0);
    }

    #[test]
    fn disparity_reproduces_published_rows() {
        let report = disparity(&scores(&[0.394, 0.344, 0.332, 0.329, 0.312, 0.301])).unwrap();
        assert_eq!(round_half_up_3(report.avg), 0.335);
        assert_eq!(round_half_up_3(report.avg_diff), 0.022);
        assert_eq!(round_half_up_3(report.max_diff), 0.093);

        let report = disparity(&scores(&[0.352, 0.343, 0.332, 0.338, 0.331, 0.323])).unwrap();
        assert_eq!(round_half_up_3(report.avg), 0.337);
        assert_eq!(round_half_up_3(report.avg_diff), 0.008);
        assert_eq!(round_half_up_3(report.max_diff), 0.029);
    }

    #[test]
    fn disparity_degenerate_and_errors() {
        let report = disparity(&scores(&[0.5, 0.5, 0.5])).unwrap();
        assert_eq!(report.avg_diff, 0.0);
        assert_eq!(report.max_diff, 0.0);
        assert!(disparity(&scores(&[0.5])).is_err());
    }

    #[test]
    fn bleu_identity_and_disjoint() {
        assert_eq!(bleu("a b c d e", &["a b c d e".into()]).unwrap(), 100.0);
        assert_eq!(bleu("p q r", &["x y z".into()]).unwrap(), 0.0);
        assert!(bleu("", &["x".into()]).is_err());
        assert!(bleu("x", &[]).is_err());
    }

    #[test]
    fn bleu_short_candidate_hand_case() {
        // p1=1, smoothed p2..p4=1, BP=exp(1-4/3).
        let score = bleu("the cat sat", &["the cat sat down".into()]).unwrap();
        assert!((score - 100.0 * (-1.0f64 / 3.0).exp()).abs() < 1e-9);
    }

    #[test]
    fn rouge_l_hand_case() {
        let score = rouge_l("a b c d", "a x c").unwrap();
        assert!((score - 400.0 / 7.0).abs() < 1e-9);
        assert_eq!(rouge_l("same thing", "same thing").unwrap(), 100.0);
        assert_eq!(rouge_l("p q", "x y").unwrap(), 0.0);
        assert!(rouge_l("", "x").is_err());
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up_3(0.3365), 0.337);
        assert_eq!(round_half_up_3(0.0225), 0.023);
        assert_eq!(round_half_up_3(0.0224), 0.022);
    }
}
