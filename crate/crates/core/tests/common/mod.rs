//! Shared machinery for the integration suites: brute-force n-gram metric
//! oracles, a finite-difference gradient probe, a direct dependency-rule
//! checker, and random generators for metric instances and claim graphs.
//!
//! The oracles deliberately re-derive every quantity from first principles
//! over plainly materialized maps so they share no arithmetic shortcuts
//! with the library code they check.
#![allow(dead_code)]

use std::collections::HashMap;

use claimkit::align::{ToyPolicy, BEGIN_MARKER, END_MARKER};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Brute-force n-gram metrics

/// n-gram multiset of `tokens`, materialized as owned key vectors.
pub fn gram_counts(tokens: &[String], n: usize) -> HashMap<Vec<String>, i64> {
    let mut counts: HashMap<Vec<String>, i64> = HashMap::new();
    if n >= 1 && tokens.len() >= n {
        for start in 0..=(tokens.len() - n) {
            *counts.entry(tokens[start..start + n].to_vec()).or_insert(0) += 1;
        }
    }
    counts
}

/// Sentence GLEU recomputed by direct enumeration. Signed per-gram credit
/// (+clip against the reference, −clip against source-only grams), a
/// product-then-root geometric mean instead of log-space accumulation, and
/// the standard brevity penalty.
pub fn gleu_oracle(
    source: &[String],
    reference: &[String],
    hypothesis: &[String],
    max_n: usize,
) -> f64 {
    assert!(!hypothesis.is_empty(), "oracle needs a non-empty hypothesis");
    let mut precisions = Vec::new();
    for n in 1..=max_n {
        let h = gram_counts(hypothesis, n);
        let total: i64 = h.values().sum();
        if total == 0 {
            continue;
        }
        let r = gram_counts(reference, n);
        let s = gram_counts(source, n);
        let mut credit: i64 = 0;
        for (gram, &hc) in &h {
            let rc = r.get(gram).copied().unwrap_or(0);
            if rc > 0 {
                credit += hc.min(rc);
            } else {
                credit -= hc.min(s.get(gram).copied().unwrap_or(0));
            }
        }
        if credit <= 0 {
            return 0.0;
        }
        precisions.push(credit as f64 / total as f64);
    }
    let product: f64 = precisions.iter().product();
    let geometric_mean = product.powf(1.0 / precisions.len() as f64);
    let hyp_len = hypothesis.len() as f64;
    let ref_len = reference.len() as f64;
    let brevity = if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len / hyp_len).exp()
    };
    geometric_mean * brevity
}

pub struct SariOracle {
    pub score: f64,
    pub add_f: f64,
    pub keep_f: f64,
    pub del_p: f64,
}

/// SARI recomputed by direct enumeration over the union of all n-gram keys.
/// Keep and delete compare multisets, add compares distinct grams; an
/// operation level counts only when either of its sides is populated, 0/0
/// ratios inside a counted level are 0, and an operation with no counted
/// level defaults to 0 (1 for delete-precision: deleting nothing when
/// nothing should be deleted is correct).
pub fn sari_oracle(
    source: &[String],
    reference: &[String],
    hypothesis: &[String],
    max_n: usize,
) -> SariOracle {
    let ratio = |num: i64, den: i64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let f1 = |p: f64, r: f64| if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    let mut keep_levels = Vec::new();
    let mut add_levels = Vec::new();
    let mut del_levels = Vec::new();
    for n in 1..=max_n {
        let s = gram_counts(source, n);
        let r = gram_counts(reference, n);
        let h = gram_counts(hypothesis, n);
        let mut keys: Vec<&Vec<String>> = s.keys().chain(r.keys()).chain(h.keys()).collect();
        keys.sort();
        keys.dedup();

        let (mut kept, mut keepable, mut keep_ok) = (0i64, 0i64, 0i64);
        let (mut dropped, mut droppable, mut del_ok) = (0i64, 0i64, 0i64);
        let (mut added, mut addable, mut add_ok) = (0i64, 0i64, 0i64);
        for gram in keys {
            let sc = s.get(gram).copied().unwrap_or(0);
            let rc = r.get(gram).copied().unwrap_or(0);
            let hc = h.get(gram).copied().unwrap_or(0);
            kept += sc.min(hc);
            keepable += sc.min(rc);
            keep_ok += sc.min(rc).min(hc);
            dropped += sc - sc.min(hc);
            droppable += sc - sc.min(rc);
            del_ok += (sc - sc.min(hc)).min(sc - sc.min(rc));
            if sc == 0 && hc > 0 {
                added += 1;
                if rc > 0 {
                    add_ok += 1;
                }
            }
            if sc == 0 && rc > 0 {
                addable += 1;
            }
        }
        if kept > 0 || keepable > 0 {
            keep_levels.push(f1(ratio(keep_ok, kept), ratio(keep_ok, keepable)));
        }
        if dropped > 0 || droppable > 0 {
            del_levels.push(ratio(del_ok, dropped));
        }
        if added > 0 || addable > 0 {
            add_levels.push(f1(ratio(add_ok, added), ratio(add_ok, addable)));
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
    SariOracle {
        score: (add_f + keep_f + del_p) / 3.0,
        add_f,
        keep_f,
        del_p,
    }
}

/// Random metric instance: alphabet of at most 5 symbols, token lengths at
/// most 8, hypothesis non-empty (the metrics treat an empty hypothesis as a
/// contract violation, not a score).
pub fn random_metric_instance(
    rng: &mut ChaCha8Rng,
) -> (Vec<String>, Vec<String>, Vec<String>) {
    const ALPHABET: [&str; 5] = ["a", "b", "c", "d", "e"];
    let symbols = rng.random_range(1..=ALPHABET.len());
    let draw = |rng: &mut ChaCha8Rng, min_len: usize| -> Vec<String> {
        let len = rng.random_range(min_len..=8);
        (0..len)
            .map(|_| ALPHABET[rng.random_range(0..symbols)].to_string())
            .collect()
    };
    let source = draw(rng, 0);
    let reference = draw(rng, 0);
    let hypothesis = draw(rng, 1);
    (source, reference, hypothesis)
}

// ---------------------------------------------------------------------------
// Finite differences

/// Central finite-difference gradient of `loss` over every policy logit.
// The index pair addresses both the perturbed logit and the gradient entry.
#[allow(clippy::needless_range_loop)]
pub fn finite_difference_grad(
    policy: &ToyPolicy,
    step: f64,
    mut loss: impl FnMut(&ToyPolicy) -> f64,
) -> Vec<Vec<f64>> {
    let size = policy.vocab().len();
    let mut work = policy.clone();
    let mut grad = vec![vec![0.0; size]; size];
    for context in 0..size {
        for next in 0..size {
            let original = *work.logit_mut(context, next);
            *work.logit_mut(context, next) = original + step;
            let up = loss(&work);
            *work.logit_mut(context, next) = original - step;
            let down = loss(&work);
            *work.logit_mut(context, next) = original;
            grad[context][next] = (up - down) / (2.0 * step);
        }
    }
    grad
}

/// Relative disagreement with a floor that keeps near-zero entries from
/// amplifying finite-difference noise.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-3)
}

// ---------------------------------------------------------------------------
// Random claim graphs with known structure

/// One generated claim: the citation structure it was rendered from
/// (distinct targets with selectivity flags) plus the body text carrying
/// the equivalent citation phrases.
pub struct GeneratedClaim {
    pub refs: Vec<(u32, bool)>,
    pub body: String,
}

/// Random claim graph of at most 10 claims whose citation structure is
/// known by construction. Bodies use the full citation-phrase inventory:
/// bare, selective/conjunctive/mixed chains, both range forms, and
/// multi-phrase bodies.
pub fn random_claim_graph(rng: &mut ChaCha8Rng) -> Vec<GeneratedClaim> {
    let count = rng.random_range(1..=10);
    (1..=count as u32).map(|n| generate_claim(rng, n)).collect()
}

fn generate_claim(rng: &mut ChaCha8Rng, number: u32) -> GeneratedClaim {
    let earlier = number - 1;
    if earlier == 0 || rng.random_bool(0.2) {
        return GeneratedClaim {
            refs: Vec::new(),
            body: format!("部材{number}を備える装置。"),
        };
    }
    let mut refs: Vec<(u32, bool)> = Vec::new();
    let mut phrases: Vec<String> = Vec::new();
    // Targets still available to this claim; every phrase consumes its
    // targets, so one claim never cites the same target twice.
    let mut pool: Vec<u32> = (1..=earlier).collect();

    // Optional range phrase over a contiguous span, reserved up front.
    // Both forms expand to each number in the span, selective.
    if earlier >= 2 && rng.random_bool(0.3) {
        let hi = rng.random_range(2..=earlier);
        let lo = rng.random_range(1..hi);
        phrases.push(if rng.random_bool(0.5) {
            format!("請求項{lo}から{hi}までのいずれか一項")
        } else {
            format!("請求項{lo}乃至{hi}")
        });
        refs.extend((lo..=hi).map(|t| (t, true)));
        pool.retain(|t| !(lo..=hi).contains(t));
    }
    pool.shuffle(rng);
    let chain_phrases = if phrases.is_empty() {
        if rng.random_bool(0.3) {
            2
        } else {
            1
        }
    } else {
        usize::from(rng.random_bool(0.3))
    };
    for _ in 0..chain_phrases {
        if pool.is_empty() {
            break;
        }
        let (phrase, used) = generate_chain(rng, &mut pool);
        phrases.push(phrase);
        refs.extend(used);
    }
    let citations = phrases
        .iter()
        .map(|p| format!("{p}に記載の装置"))
        .collect::<Vec<_>>()
        .join("と、");
    GeneratedClaim {
        refs,
        body: format!("{citations}を備える装置{number}。"),
    }
}

/// Renders one chained citation phrase from `pool`, returning the phrase
/// text and the (target, selective) pairs it denotes.
fn generate_chain(rng: &mut ChaCha8Rng, pool: &mut Vec<u32>) -> (String, Vec<(u32, bool)>) {
    fn take(pool: &mut Vec<u32>, k: usize) -> Vec<u32> {
        pool.split_off(pool.len() - k)
    }
    let kind = rng.random_range(0..4);
    match kind {
        // Selective chain joined by 又は / 若しくは.
        0 if pool.len() >= 2 => {
            let k = rng.random_range(2..=pool.len().min(3));
            let targets = take(pool, k);
            let joiner = if rng.random_bool(0.5) { "又は" } else { "若しくは" };
            let text = format!(
                "請求項{}",
                targets
                    .iter()
                    .map(u32::to_string)
                    .collect::<Vec<_>>()
                    .join(joiner)
            );
            (text, targets.into_iter().map(|t| (t, true)).collect())
        }
        // Conjunctive chain joined by 及び; the connective makes every
        // member non-selective.
        1 if pool.len() >= 2 => {
            let targets = take(pool, 2);
            let text = format!("請求項{}及び{}", targets[0], targets[1]);
            (text, targets.into_iter().map(|t| (t, false)).collect())
        }
        // Mixed chain: selective head pair, conjunctive tail.
        2 if pool.len() >= 3 => {
            let targets = take(pool, 3);
            let text = format!("請求項{}又は{}及び{}", targets[0], targets[1], targets[2]);
            (
                text,
                vec![(targets[0], true), (targets[1], true), (targets[2], false)],
            )
        }
        // Bare citation of a single claim, selective by convention.
        _ => {
            let target = pool.pop().expect("pool is non-empty");
            (format!("請求項{target}"), vec![(target, true)])
        }
    }
}

/// Renders a generated graph as full-width-header claim text.
pub fn render_claims_text(claims: &[GeneratedClaim]) -> String {
    claims
        .iter()
        .enumerate()
        .map(|(i, c)| format!("【請求項{}】\n{}", i + 1, c.body))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Applies the category rule directly to the generated structure: a claim
/// is a multi claim when it selectively cites two or more claims, and a
/// multi-multi claim when it is a multi claim with a selectively cited
/// target that is itself a multi claim.
pub fn multi_multi_by_definition(claims: &[GeneratedClaim]) -> Vec<bool> {
    let multi: Vec<bool> = claims
        .iter()
        .map(|c| c.refs.iter().filter(|(_, sel)| *sel).count() >= 2)
        .collect();
    claims
        .iter()
        .enumerate()
        .map(|(i, c)| {
            multi[i]
                && c.refs
                    .iter()
                    .any(|&(target, sel)| sel && multi[(target - 1) as usize])
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Greedy decoding oracle

/// Deterministic argmax decode over raw logits; the yardstick for the
/// sampler as temperature approaches zero.
pub fn greedy_decode(policy: &ToyPolicy, prompt: &[String], max_len: usize) -> Vec<String> {
    let vocab = policy.vocab();
    let position = |token: &str| {
        vocab
            .iter()
            .position(|t| t == token)
            .expect("token is in the vocabulary")
    };
    let end = position(END_MARKER);
    let mut context = match prompt.last() {
        Some(token) => position(token),
        None => position(BEGIN_MARKER),
    };
    let mut output = Vec::new();
    while output.len() < max_len {
        let row = &policy.logits()[context];
        let mut best = 0;
        for (j, &logit) in row.iter().enumerate() {
            if logit > row[best] {
                best = j;
            }
        }
        if best == end {
            break;
        }
        output.push(vocab[best].clone());
        context = best;
    }
    output
}
