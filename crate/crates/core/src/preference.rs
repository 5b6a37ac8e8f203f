//! Examiner-preference model: a logistic classifier over (claims under
//! evaluation, refusal reasons, prior-art claims).
//!
//! The classifier scores σ(w·h + b) where h is a deterministic feature
//! vector: character-n-gram containment of the claims in the prior art
//! (n = 3, 5), claim-structure summaries (claim count, mean claim length,
//! multiply-dependent-on-multiple count), a length-delta feature, and
//! one indicator per refusal-reason code seen at training time plus an
//! "other" bucket. Probabilities at or above 0.5 label the claims
//! *desirable* (predicted to survive examination).

use std::collections::BTreeSet;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::{
    classify_claim, count_claim_headers, parse_claims_with, ClaimCategory, HeaderStyle,
};
use crate::corpus::parse_reason_label;

#[derive(Debug, Error)]
pub enum PreferenceError {
    #[error("feature dimension mismatch: model expects {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("training data must contain both desirable and undesirable examples")]
    DegenerateData,
    #[error("no prior-art citations to sample from")]
    NoCitations,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Desirability {
    Desirable,
    Undesirable,
}

impl fmt::Display for Desirability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Desirability::Desirable => f.write_str("desirable"),
            Desirability::Undesirable => f.write_str("undesirable"),
        }
    }
}

/// One labeled training/evaluation instance: the claims text under
/// evaluation, the refusal-reason labels raised against the application,
/// and one prior-art claims text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceExample {
    #[serde(rename = "claims")]
    pub claims_text: String,
    #[serde(rename = "reasons", default)]
    pub refusal_reasons: Vec<String>,
    #[serde(rename = "prior_art", default)]
    pub prior_art_claims: String,
    pub label: Desirability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

/// Identifier of the feature extractor version baked into this module.
pub const FEATURE_SPEC: &str = "overlap-structure-reasons-v1";

/// Number of features before the per-reason-code indicators.
const BASE_FEATURES: usize = 6;

/// Trained classifier parameters. `reason_vocab` lists the refusal-reason
/// codes given their own indicator feature (all in sorted order); any other
/// code lights the final "other" indicator. The weight vector therefore has
/// `BASE_FEATURES + reason_vocab.len() + 1` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceModelParams {
    pub feature_spec: String,
    #[serde(default)]
    pub reason_vocab: Vec<String>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl PreferenceModelParams {
    /// Zero-initialized parameters for a given reason-code vocabulary.
    pub fn zeroed(reason_vocab: Vec<String>) -> PreferenceModelParams {
        let dim = BASE_FEATURES + reason_vocab.len() + 1;
        PreferenceModelParams {
            feature_spec: FEATURE_SPEC.to_string(),
            reason_vocab,
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    /// Extracts features using this model's reason-code vocabulary.
    pub fn features_for(
        &self,
        claims: &str,
        reasons: &[String],
        prior_art: &str,
    ) -> FeatureVector {
        extract_features(claims, reasons, prior_art, &self.reason_vocab)
    }

    /// Scores one (claims, reasons, prior art) triple.
    pub fn score_example(
        &self,
        claims: &str,
        reasons: &[String],
        prior_art: &str,
    ) -> Result<f64, PreferenceError> {
        score(self, &self.features_for(claims, reasons, prior_art))
    }
}

/// Anything that can judge a rewritten claims text in the context of the
/// refusal reasons and a prior-art text, returning a desirability
/// probability. Lets a different encoder replace the built-in linear model.
pub trait PreferenceScorer {
    fn score_rewrite(
        &self,
        claims: &str,
        reasons: &[String],
        prior_art: &str,
    ) -> Result<f64, PreferenceError>;
}

impl PreferenceScorer for PreferenceModelParams {
    fn score_rewrite(
        &self,
        claims: &str,
        reasons: &[String],
        prior_art: &str,
    ) -> Result<f64, PreferenceError> {
        self.score_example(claims, reasons, prior_art)
    }
}

/// Scorer that ignores its inputs and returns a fixed probability; a
/// baseline and test double.
#[derive(Debug, Clone, Copy)]
pub struct ConstantScorer(pub f64);

impl PreferenceScorer for ConstantScorer {
    fn score_rewrite(&self, _: &str, _: &[String], _: &str) -> Result<f64, PreferenceError> {
        Ok(self.0)
    }
}

fn char_ngrams(text: &str, n: usize) -> BTreeSet<String> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() < n {
        return BTreeSet::new();
    }
    chars.windows(n).map(|w| w.iter().collect()).collect()
}

/// Fraction of the claims' distinct character n-grams that also appear in
/// the prior art. Both-empty counts as full containment.
fn containment(claims: &str, prior_art: &str, n: usize) -> f64 {
    let claim_grams = char_ngrams(claims, n);
    let prior_grams = char_ngrams(prior_art, n);
    if claim_grams.is_empty() {
        return if prior_grams.is_empty() { 1.0 } else { 0.0 };
    }
    claim_grams.intersection(&prior_grams).count() as f64 / claim_grams.len() as f64
}

/// Deterministic feature extraction. `reason_vocab` must be the vocabulary
/// of the model that will consume the vector (sorted reason codes); the
/// output dimension is `BASE_FEATURES + reason_vocab.len() + 1`.
pub fn extract_features(
    claims: &str,
    reasons: &[String],
    prior_art: &str,
    reason_vocab: &[String],
) -> FeatureVector {
    let mut values = Vec::with_capacity(BASE_FEATURES + reason_vocab.len() + 1);
    values.push(containment(claims, prior_art, 3));
    values.push(containment(claims, prior_art, 5));

    let claim_count = count_claim_headers(claims);
    let claim_chars = claims.chars().count();
    values.push(claim_count as f64 / 8.0);
    values.push(claim_chars as f64 / claim_count.max(1) as f64 / 512.0);

    let multi_multi = parse_claims_with(claims, HeaderStyle::detect(claims))
        .ok()
        .map_or(0, |set| {
            set.claims()
                .iter()
                .filter(|c| {
                    matches!(
                        classify_claim(&set, c.number),
                        Ok(ClaimCategory::MultiMulti)
                    )
                })
                .count()
        });
    values.push(multi_multi as f64 / 4.0);

    let prior_chars = prior_art.chars().count();
    values.push((claim_chars as f64 - prior_chars as f64) / (claim_chars + prior_chars + 1) as f64);

    let codes: BTreeSet<String> = reasons
        .iter()
        .map(|r| parse_reason_label(r).code)
        .collect();
    let mut other = 0.0;
    for code in &codes {
        if !reason_vocab.iter().any(|v| v == code) {
            other = 1.0;
        }
    }
    for entry in reason_vocab {
        values.push(if codes.contains(entry) { 1.0 } else { 0.0 });
    }
    values.push(other);

    FeatureVector { values }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// σ(w·h + b).
pub fn score(
    params: &PreferenceModelParams,
    features: &FeatureVector,
) -> Result<f64, PreferenceError> {
    if params.weights.len() != features.values.len() {
        return Err(PreferenceError::DimensionMismatch {
            expected: params.weights.len(),
            actual: features.values.len(),
        });
    }
    let z: f64 = params
        .weights
        .iter()
        .zip(&features.values)
        .map(|(w, h)| w * h)
        .sum::<f64>()
        + params.bias;
    Ok(sigmoid(z))
}

/// Probabilities at or above 0.5 are desirable (inclusive threshold).
pub fn label_desirability(prob: f64) -> Desirability {
    if prob >= 0.5 {
        Desirability::Desirable
    } else {
        Desirability::Undesirable
    }
}

/// Uniformly picks one citation text; deterministic given the seed.
pub fn sample_prior_art(citations: &[String], seed: u64) -> Result<String, PreferenceError> {
    if citations.is_empty() {
        return Err(PreferenceError::NoCitations);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let index = rng.random_range(0..citations.len());
    Ok(citations[index].clone())
}

fn reason_vocab_of(examples: &[PreferenceExample]) -> Vec<String> {
    let codes: BTreeSet<String> = examples
        .iter()
        .flat_map(|e| e.refusal_reasons.iter())
        .map(|r| parse_reason_label(r).code)
        .collect();
    codes.into_iter().collect()
}

/// Minimizes mean binary cross-entropy by seeded mini-batch gradient
/// descent. The reason-code vocabulary is fixed from the training examples
/// before the first step.
pub fn train_preference(
    examples: &[PreferenceExample],
    learning_rate: f64,
    epochs: usize,
    batch_size: usize,
    seed: u64,
) -> Result<PreferenceModelParams, PreferenceError> {
    let desirable = examples
        .iter()
        .filter(|e| e.label == Desirability::Desirable)
        .count();
    if desirable == 0 || desirable == examples.len() {
        return Err(PreferenceError::DegenerateData);
    }

    let mut params = PreferenceModelParams::zeroed(reason_vocab_of(examples));
    let features: Vec<FeatureVector> = examples
        .iter()
        .map(|e| params.features_for(&e.claims_text, &e.refusal_reasons, &e.prior_art_claims))
        .collect();
    let targets: Vec<f64> = examples
        .iter()
        .map(|e| match e.label {
            Desirability::Desirable => 1.0,
            Desirability::Undesirable => 0.0,
        })
        .collect();

    let batch_size = batch_size.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for _ in 0..epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(batch_size) {
            let mut grad_w = vec![0.0; params.weights.len()];
            let mut grad_b = 0.0;
            for &i in batch {
                let p = score(&params, &features[i]).expect("dimensions fixed at init");
                let err = p - targets[i];
                for (g, h) in grad_w.iter_mut().zip(&features[i].values) {
                    *g += err * h;
                }
                grad_b += err;
            }
            let scale = learning_rate / batch.len() as f64;
            for (w, g) in params.weights.iter_mut().zip(&grad_w) {
                *w -= scale * g;
            }
            params.bias -= scale * grad_b;
        }
    }
    Ok(params)
}

/// Mean binary cross-entropy of the model on labeled examples, with
/// probabilities clamped away from 0 and 1 for finiteness.
pub fn mean_bce(
    params: &PreferenceModelParams,
    examples: &[PreferenceExample],
) -> Result<f64, PreferenceError> {
    if examples.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for example in examples {
        let p = params
            .score_example(
                &example.claims_text,
                &example.refusal_reasons,
                &example.prior_art_claims,
            )?
            .clamp(1e-12, 1.0 - 1e-12);
        total -= match example.label {
            Desirability::Desirable => p.ln(),
            Desirability::Undesirable => (1.0 - p).ln(),
        };
    }
    Ok(total / examples.len() as f64)
}

/// Precision/recall/F1 for one class, with its raw counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Number of examples truly in this class.
    pub support: usize,
    /// Number of examples predicted into this class.
    pub predicted: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub desirable: ClassMetrics,
    pub undesirable: ClassMetrics,
    pub accuracy: f64,
    pub total: usize,
}

fn class_metrics(tp: usize, fp: usize, fn_: usize) -> ClassMetrics {
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        support: tp + fn_,
        predicted: tp + fp,
    }
}

/// Per-class precision, recall, and F1 of thresholded model predictions.
pub fn evaluate_preference(
    params: &PreferenceModelParams,
    examples: &[PreferenceExample],
) -> Result<EvaluationReport, PreferenceError> {
    let mut tp = 0usize; // desirable predicted desirable
    let mut fp = 0usize; // undesirable predicted desirable
    let mut fn_ = 0usize; // desirable predicted undesirable
    let mut tn = 0usize; // undesirable predicted undesirable
    for example in examples {
        let p = params.score_example(
            &example.claims_text,
            &example.refusal_reasons,
            &example.prior_art_claims,
        )?;
        match (example.label, label_desirability(p)) {
            (Desirability::Desirable, Desirability::Desirable) => tp += 1,
            (Desirability::Undesirable, Desirability::Desirable) => fp += 1,
            (Desirability::Desirable, Desirability::Undesirable) => fn_ += 1,
            (Desirability::Undesirable, Desirability::Undesirable) => tn += 1,
        }
    }
    let total = examples.len();
    Ok(EvaluationReport {
        desirable: class_metrics(tp, fp, fn_),
        undesirable: class_metrics(tn, fn_, fp),
        accuracy: if total == 0 {
            0.0
        } else {
            (tp + tn) as f64 / total as f64
        },
        total,
    })
}
