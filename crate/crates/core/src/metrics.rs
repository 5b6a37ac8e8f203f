//! Rewriting-quality metrics: sentence/corpus GLEU, SARI, and the
//! acceptance rate under a preference scorer, at two segmentation
//! granularities.
//!
//! Word segmentation emits one token per character inside Japanese-script
//! runs and whitespace-delimited tokens for Latin runs; phrase segmentation
//! splits on clause punctuation (、 。 ；) and before invention-element
//! connectives (であって, において, を備え, を有し). The connective と、 is
//! realized by the 、 delimiter, which keeps と on the preceding span.
//!
//! GLEU here is the corrected sentence-level, single-reference variant:
//! per n-gram order, clipped hypothesis/reference matches minus the
//! hypothesis overlap with source-only n-grams (floored at zero), a
//! geometric mean over orders the hypothesis populates, and a brevity
//! penalty against the reference. SARI averages add-F1, keep-F1, and
//! delete-precision over n-gram orders where each operation is defined.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preference::{label_desirability, Desirability, PreferenceScorer};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("length mismatch: {left} items on the left, {right} on the right")]
    LengthMismatch { left: usize, right: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("scorer unusable: {0}")]
    UntrainedScorer(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SegMode {
    Word,
    Phrase,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segmentation {
    pub mode: SegMode,
    pub tokens: Vec<String>,
}

/// Phrase-segmentation configuration: `delimiters` end a span and are
/// dropped; a `marker` ends the span before it and starts the next one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhraseConfig {
    pub delimiters: Vec<char>,
    pub markers: Vec<String>,
}

impl Default for PhraseConfig {
    fn default() -> PhraseConfig {
        PhraseConfig {
            delimiters: vec!['、', '。', '；'],
            markers: ["であって", "において", "を備え", "を有し"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        }
    }
}

/// Japanese-script and full-width ranges segmented per character.
fn is_cjk(ch: char) -> bool {
    matches!(
        u32::from(ch),
        0x3000..=0x30FF      // CJK punctuation, hiragana, katakana
            | 0x31F0..=0x31FF // katakana phonetic extensions
            | 0x3400..=0x4DBF // CJK extension A
            | 0x4E00..=0x9FFF // CJK unified ideographs
            | 0xF900..=0xFAFF // CJK compatibility ideographs
            | 0xFF00..=0xFFEF // full-width forms
    )
}

pub fn segment(text: &str, mode: SegMode) -> Segmentation {
    segment_with(text, mode, &PhraseConfig::default())
}

pub fn segment_with(text: &str, mode: SegMode, config: &PhraseConfig) -> Segmentation {
    let tokens = match mode {
        SegMode::Word => {
            let mut tokens = Vec::new();
            let mut run = String::new();
            let flush = |run: &mut String, tokens: &mut Vec<String>| {
                if !run.is_empty() {
                    tokens.push(std::mem::take(run));
                }
            };
            for ch in text.chars() {
                if ch.is_whitespace() {
                    flush(&mut run, &mut tokens);
                } else if is_cjk(ch) {
                    flush(&mut run, &mut tokens);
                    tokens.push(ch.to_string());
                } else {
                    run.push(ch);
                }
            }
            flush(&mut run, &mut tokens);
            tokens
        }
        SegMode::Phrase => {
            let mut spans: Vec<&str> = Vec::new();
            let mut span_start = 0;
            for (i, ch) in text.char_indices() {
                if config.delimiters.contains(&ch) {
                    spans.push(&text[span_start..i]);
                    span_start = i + ch.len_utf8();
                } else if i > span_start
                    && config
                        .markers
                        .iter()
                        .any(|m| text[i..].starts_with(m.as_str()))
                {
                    spans.push(&text[span_start..i]);
                    span_start = i;
                }
            }
            spans.push(&text[span_start..]);
            spans
                .into_iter()
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        }
    };
    Segmentation { mode, tokens }
}

fn ngram_counts<T: Ord>(tokens: &[T], n: usize) -> BTreeMap<&[T], usize> {
    let mut counts = BTreeMap::new();
    if n > 0 && tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence-level GLEU in [0,1]. Per order n the numerator is the clipped
/// hypothesis/reference match count minus the hypothesis overlap with
/// n-grams that occur in the source but not the reference, floored at 0;
/// orders the hypothesis does not populate are skipped; any populated order
/// with a zero numerator zeroes the score. The brevity penalty is
/// exp(1 − |ref|/|hyp|) when the hypothesis is shorter than the reference.
pub fn gleu<T: Ord>(
    source: &[T],
    reference: &[T],
    hypothesis: &[T],
    max_n: usize,
) -> Result<f64, MetricsError> {
    assert!(max_n >= 1, "max_n must be at least 1");
    if hypothesis.is_empty() {
        return Err(MetricsError::DegenerateInput(
            "hypothesis has no tokens".to_string(),
        ));
    }
    let mut log_sum = 0.0;
    let mut levels = 0usize;
    for n in 1..=max_n {
        let hyp = ngram_counts(hypothesis, n);
        let total: usize = hyp.values().sum();
        if total == 0 {
            continue;
        }
        let reference = ngram_counts(reference, n);
        let source = ngram_counts(source, n);
        let mut matched = 0usize;
        let mut penalty = 0usize;
        for (gram, &count) in &hyp {
            match reference.get(gram) {
                Some(&ref_count) => matched += count.min(ref_count),
                None => penalty += count.min(source.get(gram).copied().unwrap_or(0)),
            }
        }
        let numerator = matched.saturating_sub(penalty);
        if numerator == 0 {
            return Ok(0.0);
        }
        log_sum += (numerator as f64 / total as f64).ln();
        levels += 1;
    }
    let precision = (log_sum / levels as f64).exp();
    let hyp_len = hypothesis.len() as f64;
    let ref_len = reference.len() as f64;
    let brevity = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len / hyp_len).exp()
    };
    Ok(precision * brevity)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SariScore {
    pub score: f64,
    pub add_f: f64,
    pub keep_f: f64,
    pub del_p: f64,
}

/// SARI in [0,1]: the mean of add-F1, keep-F1, and delete-precision, each
/// averaged over the n-gram orders where the operation is defined (some
/// n-gram is involved on either side). Within a defined order, 0/0 ratios
/// count as 0. An operation with no defined order defaults to 0, except
/// delete-precision, which defaults to 1 (nothing to delete and nothing
/// deleted is a correct no-op). Keep and delete compare multisets; add
/// compares distinct n-grams.
pub fn sari<T: Ord>(
    source: &[T],
    reference: &[T],
    hypothesis: &[T],
    max_n: usize,
) -> SariScore {
    assert!(max_n >= 1, "max_n must be at least 1");
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let f1 = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };

    let mut keep_levels = Vec::new();
    let mut add_levels = Vec::new();
    let mut del_levels = Vec::new();
    for n in 1..=max_n {
        let s = ngram_counts(source, n);
        let r = ngram_counts(reference, n);
        let h = ngram_counts(hypothesis, n);
        let count = |m: &BTreeMap<&[T], usize>, g: &&[T]| m.get(g).copied().unwrap_or(0);

        // Keep: hypothesis n-grams retained from the source vs. reference
        // n-grams retained from the source (multiset minimums).
        let mut keep_correct = 0usize;
        let mut kept = 0usize;
        let mut keepable = 0usize;
        // Delete: source n-grams the hypothesis dropped vs. those the
        // reference dropped.
        let mut del_correct = 0usize;
        let mut dropped = 0usize;
        let mut droppable = 0usize;
        for (gram, &sc) in &s {
            let sh = sc.min(count(&h, gram));
            let sr = sc.min(count(&r, gram));
            keep_correct += sh.min(sr);
            kept += sh;
            keepable += sr;
            let dh = sc - sh;
            let dr = sc - sr;
            del_correct += dh.min(dr);
            dropped += dh;
            droppable += dr;
        }
        if kept > 0 || keepable > 0 {
            keep_levels.push(f1(ratio(keep_correct, kept), ratio(keep_correct, keepable)));
        }
        if dropped > 0 || droppable > 0 {
            del_levels.push(ratio(del_correct, dropped));
        }

        // Add: distinct n-grams new relative to the source.
        let mut add_correct = 0usize;
        let mut added = 0usize;
        for gram in h.keys() {
            if count(&s, gram) == 0 {
                added += 1;
                if count(&r, gram) > 0 {
                    add_correct += 1;
                }
            }
        }
        let addable = r.keys().filter(|g| count(&s, g) == 0).count();
        if added > 0 || addable > 0 {
            add_levels.push(f1(ratio(add_correct, added), ratio(add_correct, addable)));
        }
    }

    let mean_or = |levels: &[f64], empty: f64| {
        if levels.is_empty() {
            empty
        } else {
            levels.iter().sum::<f64>() / levels.len() as f64
        }
    };
    let add_f = mean_or(&add_levels, 0.0);
    let keep_f = mean_or(&keep_levels, 0.0);
    let del_p = mean_or(&del_levels, 1.0);
    SariScore {
        score: (add_f + keep_f + del_p) / 3.0,
        add_f,
        keep_f,
        del_p,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SariComponents {
    pub add_f: f64,
    pub keep_f: f64,
    pub del_p: f64,
}

/// Scores of one (source, reference, hypothesis) instance under both
/// segmentations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceScores {
    pub index: usize,
    pub gleu_word: f64,
    pub gleu_phrase: f64,
    pub sari_word: f64,
    pub sari_phrase: f64,
}

/// Corpus-level metric aggregate: arithmetic means of the per-instance
/// scores. The per-instance list is carried for streaming but is not part
/// of the report's JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub gleu_word: f64,
    pub gleu_phrase: f64,
    pub sari_word: f64,
    pub sari_phrase: f64,
    pub sari_components_word: SariComponents,
    pub sari_components_phrase: SariComponents,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance_rate: Option<f64>,
    #[serde(skip)]
    pub per_instance: Vec<InstanceScores>,
}

const CORPUS_MAX_N: usize = 4;

/// Evaluates hypotheses against (source, reference) text pairs under both
/// segmentation modes. An empty hypothesis scores GLEU 0 rather than
/// erroring. The acceptance rate is left unset; compute it separately with
/// a scorer via [`acceptance_rate`].
pub fn evaluate_corpus(
    pairs: &[(String, String)],
    hypotheses: &[String],
) -> Result<MetricReport, MetricsError> {
    if pairs.len() != hypotheses.len() {
        return Err(MetricsError::LengthMismatch {
            left: pairs.len(),
            right: hypotheses.len(),
        });
    }
    if pairs.is_empty() {
        return Err(MetricsError::DegenerateInput(
            "no instances to evaluate".to_string(),
        ));
    }

    let gleu_or_zero = |s: &[String], r: &[String], h: &[String]| match gleu(s, r, h, CORPUS_MAX_N)
    {
        Ok(score) => score,
        Err(MetricsError::DegenerateInput(_)) => 0.0,
        Err(_) => unreachable!("gleu only raises degenerate input"),
    };

    let mut per_instance = Vec::with_capacity(pairs.len());
    let mut word_components = Vec::with_capacity(pairs.len());
    let mut phrase_components = Vec::with_capacity(pairs.len());
    for (index, ((source, reference), hypothesis)) in pairs.iter().zip(hypotheses).enumerate() {
        let seg = |text: &str, mode| segment(text, mode).tokens;
        let (sw, rw, hw) = (
            seg(source, SegMode::Word),
            seg(reference, SegMode::Word),
            seg(hypothesis, SegMode::Word),
        );
        let (sp, rp, hp) = (
            seg(source, SegMode::Phrase),
            seg(reference, SegMode::Phrase),
            seg(hypothesis, SegMode::Phrase),
        );
        let sari_word = sari(&sw, &rw, &hw, CORPUS_MAX_N);
        let sari_phrase = sari(&sp, &rp, &hp, CORPUS_MAX_N);
        per_instance.push(InstanceScores {
            index,
            gleu_word: gleu_or_zero(&sw, &rw, &hw),
            gleu_phrase: gleu_or_zero(&sp, &rp, &hp),
            sari_word: sari_word.score,
            sari_phrase: sari_phrase.score,
        });
        word_components.push(sari_word);
        phrase_components.push(sari_phrase);
    }

    let n = per_instance.len() as f64;
    let mean = |f: &dyn Fn(&InstanceScores) -> f64| per_instance.iter().map(f).sum::<f64>() / n;
    let mean_components = |scores: &[SariScore]| SariComponents {
        add_f: scores.iter().map(|s| s.add_f).sum::<f64>() / n,
        keep_f: scores.iter().map(|s| s.keep_f).sum::<f64>() / n,
        del_p: scores.iter().map(|s| s.del_p).sum::<f64>() / n,
    };
    Ok(MetricReport {
        gleu_word: mean(&|s| s.gleu_word),
        gleu_phrase: mean(&|s| s.gleu_phrase),
        sari_word: mean(&|s| s.sari_word),
        sari_phrase: mean(&|s| s.sari_phrase),
        sari_components_word: mean_components(&word_components),
        sari_components_phrase: mean_components(&phrase_components),
        acceptance_rate: None,
        per_instance,
    })
}

/// Fraction of hypotheses the scorer labels desirable (probability ≥ 0.5),
/// each judged in its (refusal reasons, prior-art text) context.
pub fn acceptance_rate<S: PreferenceScorer + ?Sized>(
    hypotheses: &[String],
    contexts: &[(Vec<String>, String)],
    scorer: &S,
) -> Result<f64, MetricsError> {
    if hypotheses.len() != contexts.len() {
        return Err(MetricsError::LengthMismatch {
            left: hypotheses.len(),
            right: contexts.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricsError::DegenerateInput(
            "no hypotheses to judge".to_string(),
        ));
    }
    let mut accepted = 0usize;
    for (hypothesis, (reasons, prior_art)) in hypotheses.iter().zip(contexts) {
        let prob = scorer
            .score_rewrite(hypothesis, reasons, prior_art)
            .map_err(|e| MetricsError::UntrainedScorer(e.to_string()))?;
        if label_desirability(prob) == Desirability::Desirable {
            accepted += 1;
        }
    }
    Ok(accepted as f64 / hypotheses.len() as f64)
}
