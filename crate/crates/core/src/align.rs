//! Preference-alignment math on an analytically verifiable toy policy.
//!
//! The policy is a learnable bigram table: a logit per (previous token,
//! next token) pair, softmax-normalized per row, with the prompt's final
//! token seeding the first context. Small enough that every gradient can
//! be checked against finite differences, it carries the full objective
//! stack: next-token log-probabilities, the supervised fine-tuning loss,
//! the desirable/undesirable value-function loss with its reference point
//! z0 and analytic gradient, nucleus (top-p) sampling, chat-prompt
//! construction, and automatic construction of labeled training sets from
//! rewrite pairs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::RewritePair;
use crate::preference::{label_desirability, sample_prior_art, Desirability, PreferenceScorer};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("scorer unusable: {0}")]
    UntrainedScorer(String),
}

/// Token that seeds the context before any response token.
pub const BEGIN_MARKER: &str = "<s>";
/// Token that terminates sampling; never emitted into a response.
pub const END_MARKER: &str = "</s>";

/// Sorted distinct characters of the given texts, one token per character.
pub fn char_vocab<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Vec<String> {
    let chars: std::collections::BTreeSet<char> =
        texts.into_iter().flat_map(str::chars).collect();
    chars.into_iter().map(String::from).collect()
}

/// One token per character.
pub fn char_tokens(text: &str) -> Vec<String> {
    text.chars().map(String::from).collect()
}

/// A bigram language policy: `logits[context][next]` scores emitting
/// `next` after `context`. Rows normalize by softmax. The vocabulary
/// always contains the begin/end markers (appended if absent).
#[derive(Debug, Clone, PartialEq)]
pub struct ToyPolicy {
    vocab: Vec<String>,
    index: BTreeMap<String, usize>,
    logits: Vec<Vec<f64>>,
}

impl ToyPolicy {
    fn with_logits<S: AsRef<str>>(
        base_vocab: &[S],
        init: impl FnMut() -> f64,
    ) -> ToyPolicy {
        let mut vocab: Vec<String> = Vec::new();
        let mut index = BTreeMap::new();
        for token in base_vocab
            .iter()
            .map(AsRef::as_ref)
            .chain([BEGIN_MARKER, END_MARKER])
        {
            if !index.contains_key(token) {
                index.insert(token.to_string(), vocab.len());
                vocab.push(token.to_string());
            }
        }
        let size = vocab.len();
        let mut init = init;
        let logits = (0..size)
            .map(|_| (0..size).map(|_| init()).collect())
            .collect();
        ToyPolicy { vocab, index, logits }
    }

    /// Policy assigning equal probability to every next token.
    pub fn uniform<S: AsRef<str>>(base_vocab: &[S]) -> ToyPolicy {
        ToyPolicy::with_logits(base_vocab, || 0.0)
    }

    /// Policy with seed-deterministic logits drawn uniformly from [−1, 1).
    pub fn random<S: AsRef<str>>(base_vocab: &[S], seed: u64) -> ToyPolicy {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ToyPolicy::with_logits(base_vocab, move || rng.random::<f64>() * 2.0 - 1.0)
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn logits(&self) -> &[Vec<f64>] {
        &self.logits
    }

    /// Test-and-tooling hook for perturbing a single logit.
    pub fn logit_mut(&mut self, context: usize, next: usize) -> &mut f64 {
        &mut self.logits[context][next]
    }

    fn token_id(&self, token: &str) -> Result<usize, AlignError> {
        self.index
            .get(token)
            .copied()
            .ok_or_else(|| AlignError::UnknownToken(token.to_string()))
    }

    /// Context id for a prompt: its last token, or the begin marker.
    fn context_id(&self, prompt: &[String]) -> Result<usize, AlignError> {
        match prompt.last() {
            Some(token) => self.token_id(token),
            None => self.token_id(BEGIN_MARKER),
        }
    }

    fn row_probs(&self, context: usize) -> Vec<f64> {
        softmax(&self.logits[context])
    }

    fn row_log_probs(&self, context: usize) -> Vec<f64> {
        let row = &self.logits[context];
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        row.iter().map(|x| x - lse).collect()
    }
}

fn softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log π(response | prompt): the sum of per-step next-token
/// log-probabilities, with the prompt's last token as the first context.
pub fn policy_logprob(
    policy: &ToyPolicy,
    prompt: &[String],
    response: &[String],
) -> Result<f64, AlignError> {
    let mut context = policy.context_id(prompt)?;
    let mut total = 0.0;
    for token in response {
        let target = policy.token_id(token)?;
        total += policy.row_log_probs(context)[target];
        context = target;
    }
    Ok(total)
}

/// Mean negative log-likelihood of (prompt, response) pairs.
pub fn sft_loss(
    policy: &ToyPolicy,
    batch: &[(Vec<String>, Vec<String>)],
) -> Result<f64, AlignError> {
    if batch.is_empty() {
        return Err(AlignError::EmptyBatch);
    }
    let mut total = 0.0;
    for (prompt, response) in batch {
        total -= policy_logprob(policy, prompt, response)?;
    }
    Ok(total / batch.len() as f64)
}

/// Exact analytic gradient of `sft_loss` with respect to every policy
/// logit: for each response step with context c and target t,
/// d(−log p)/dlogits[c][j] = p(j|c) − δ_{jt}, averaged over the batch.
pub fn sft_grad(
    policy: &ToyPolicy,
    batch: &[(Vec<String>, Vec<String>)],
) -> Result<Vec<Vec<f64>>, AlignError> {
    if batch.is_empty() {
        return Err(AlignError::EmptyBatch);
    }
    let size = policy.vocab.len();
    let mut grad = vec![vec![0.0; size]; size];
    let scale = 1.0 / batch.len() as f64;
    for (prompt, response) in batch {
        let mut context = policy.context_id(prompt)?;
        for token in response {
            let target = policy.token_id(token)?;
            let probs = policy.row_probs(context);
            for (j, row_grad) in grad[context].iter_mut().enumerate() {
                let delta = if j == target { 1.0 } else { 0.0 };
                *row_grad += scale * (probs[j] - delta);
            }
            context = target;
        }
    }
    Ok(grad)
}

/// r_θ(x, y) = log π_θ(y|x) − log π_ref(y|x).
pub fn log_ratio(policy_logprob: f64, ref_logprob: f64) -> f64 {
    policy_logprob - ref_logprob
}

/// Loss hyperparameters: sigmoid sharpness β and the desirable/undesirable
/// weights λ_D, λ_U.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KtoConfig {
    pub beta: f64,
    pub lambda_d: f64,
    pub lambda_u: f64,
}

impl Default for KtoConfig {
    fn default() -> KtoConfig {
        KtoConfig {
            beta: 0.2,
            lambda_d: 3.0,
            lambda_u: 1.0,
        }
    }
}

/// One labeled (prompt, response) pair with log-probability snapshots
/// recorded at dataset-construction time. Training recomputes live values
/// from the current policy; the snapshots serve persistence and analysis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KtoExample {
    pub prompt: Vec<String>,
    pub response: Vec<String>,
    pub label: Desirability,
    pub policy_logprob: f64,
    pub ref_logprob: f64,
}

impl KtoExample {
    /// Builds an example, computing both log-probability snapshots.
    pub fn from_policies(
        policy: &ToyPolicy,
        reference: &ToyPolicy,
        prompt: Vec<String>,
        response: Vec<String>,
        label: Desirability,
    ) -> Result<KtoExample, AlignError> {
        let policy_lp = policy_logprob(policy, &prompt, &response)?;
        let ref_lp = policy_logprob(reference, &prompt, &response)?;
        Ok(KtoExample {
            prompt,
            response,
            label,
            policy_logprob: policy_lp,
            ref_logprob: ref_lp,
        })
    }
}

/// A batch frozen for loss evaluation: examples plus the reference point
/// z0 (non-negative).
#[derive(Debug, Clone, PartialEq)]
pub struct KtoBatch {
    pub examples: Vec<KtoExample>,
    pub z0: f64,
}

impl KtoBatch {
    pub fn new(examples: Vec<KtoExample>, z0: f64) -> KtoBatch {
        KtoBatch {
            examples,
            z0: z0.max(0.0),
        }
    }
}

/// Reference point z0: the batch KL estimate between policy and reference,
/// computed as the mean log-ratio over MISMATCHED prompt/response pairings
/// (each response scored under the next example's prompt, cyclically), and
/// clamped at zero. No gradient flows through this estimate.
pub fn estimate_z0(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    examples: &[KtoExample],
) -> Result<f64, AlignError> {
    if examples.is_empty() {
        return Err(AlignError::EmptyBatch);
    }
    let len = examples.len();
    let mut total = 0.0;
    for (i, example) in examples.iter().enumerate() {
        let prompt = &examples[(i + 1) % len].prompt;
        let policy_lp = policy_logprob(policy, prompt, &example.response)?;
        let ref_lp = policy_logprob(reference, prompt, &example.response)?;
        total += log_ratio(policy_lp, ref_lp);
    }
    Ok((total / len as f64).max(0.0))
}

/// Value of one example: λ_D·σ(β(r−z0)) when desirable,
/// λ_U·σ(β(z0−r)) when undesirable.
pub fn kto_value(r_theta: f64, z0: f64, label: Desirability, config: &KtoConfig) -> f64 {
    match label {
        Desirability::Desirable => config.lambda_d * sigmoid(config.beta * (r_theta - z0)),
        Desirability::Undesirable => config.lambda_u * sigmoid(config.beta * (z0 - r_theta)),
    }
}

fn lambda_for(label: Desirability, config: &KtoConfig) -> f64 {
    match label {
        Desirability::Desirable => config.lambda_d,
        Desirability::Undesirable => config.lambda_u,
    }
}

/// Mean over the batch of λ_y − v(x, y), using the log-probability
/// snapshots stored in the examples.
pub fn kto_loss(batch: &KtoBatch, config: &KtoConfig) -> Result<f64, AlignError> {
    if batch.examples.is_empty() {
        return Err(AlignError::EmptyBatch);
    }
    let total: f64 = batch
        .examples
        .iter()
        .map(|e| {
            let r = log_ratio(e.policy_logprob, e.ref_logprob);
            lambda_for(e.label, config) - kto_value(r, batch.z0, e.label, config)
        })
        .sum();
    Ok(total / batch.examples.len() as f64)
}

/// Same loss with log-ratios recomputed live from the given policies at a
/// fixed z0 — the differentiable path that `kto_grad` differentiates.
pub fn kto_loss_with_policies(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    examples: &[KtoExample],
    z0: f64,
    config: &KtoConfig,
) -> Result<f64, AlignError> {
    if examples.is_empty() {
        return Err(AlignError::EmptyBatch);
    }
    let mut total = 0.0;
    for example in examples {
        let policy_lp = policy_logprob(policy, &example.prompt, &example.response)?;
        let ref_lp = policy_logprob(reference, &example.prompt, &example.response)?;
        let r = log_ratio(policy_lp, ref_lp);
        total += lambda_for(example.label, config) - kto_value(r, z0, example.label, config);
    }
    Ok(total / examples.len() as f64)
}

/// Exact analytic gradient of `kto_loss_with_policies` with respect to
/// every policy logit, holding z0 constant.
///
/// Derivation: per example, d(λ_y − v)/dr is −λ_D β σ(a)(1−σ(a)) with
/// a = β(r−z0) for desirable examples and +λ_U β σ(b)(1−σ(b)) with
/// b = β(z0−r) for undesirable ones; and for each response step with
/// context c and target t, dr/dlogits[c][j] = δ_{jt} − p(j|c).
pub fn kto_grad(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    examples: &[KtoExample],
    z0: f64,
    config: &KtoConfig,
) -> Result<Vec<Vec<f64>>, AlignError> {
    if examples.is_empty() {
        return Err(AlignError::EmptyBatch);
    }
    let size = policy.vocab.len();
    let mut grad = vec![vec![0.0; size]; size];
    let batch = examples.len() as f64;
    for example in examples {
        let policy_lp = policy_logprob(policy, &example.prompt, &example.response)?;
        let ref_lp = policy_logprob(reference, &example.prompt, &example.response)?;
        let r = log_ratio(policy_lp, ref_lp);
        let coeff = match example.label {
            Desirability::Desirable => {
                let s = sigmoid(config.beta * (r - z0));
                -config.lambda_d * config.beta * s * (1.0 - s)
            }
            Desirability::Undesirable => {
                let s = sigmoid(config.beta * (z0 - r));
                config.lambda_u * config.beta * s * (1.0 - s)
            }
        } / batch;
        let mut context = policy.context_id(&example.prompt)?;
        for token in &example.response {
            let target = policy.token_id(token)?;
            let probs = policy.row_probs(context);
            for (j, row_grad) in grad[context].iter_mut().enumerate() {
                let delta = if j == target { 1.0 } else { 0.0 };
                *row_grad += coeff * (delta - probs[j]);
            }
            context = target;
        }
    }
    Ok(grad)
}

/// One gradient-descent step on the batch loss: estimates z0 from the
/// current policy (mismatched pairings, no gradient), applies the analytic
/// gradient at the given learning rate, and returns the pre-step loss.
pub fn kto_train_step(
    policy: &mut ToyPolicy,
    reference: &ToyPolicy,
    examples: &[KtoExample],
    config: &KtoConfig,
    learning_rate: f64,
) -> Result<f64, AlignError> {
    assert!(learning_rate >= 0.0, "learning rate must be non-negative");
    let z0 = estimate_z0(policy, reference, examples)?;
    let loss = kto_loss_with_policies(policy, reference, examples, z0, config)?;
    let grad = kto_grad(policy, reference, examples, z0, config)?;
    for (row, grad_row) in policy.logits.iter_mut().zip(&grad) {
        for (logit, g) in row.iter_mut().zip(grad_row) {
            *logit -= learning_rate * g;
        }
    }
    Ok(loss)
}

/// Default nucleus mass for candidate sampling.
pub const SAMPLING_TOP_P: f64 = 0.95;
/// Default sampling temperature for candidate sampling.
pub const SAMPLING_TEMPERATURE: f64 = 0.7;

/// Nucleus sampling: per step, logits are divided by the temperature and
/// softmaxed; the smallest probability-sorted prefix reaching `top_p` is
/// renormalized and sampled. Emission stops at the end marker (which is
/// not included in the output) or after `max_len` tokens.
pub fn sample_top_p(
    policy: &ToyPolicy,
    prompt: &[String],
    top_p: f64,
    temperature: f64,
    max_len: usize,
    seed: u64,
) -> Result<Vec<String>, AlignError> {
    assert!(top_p > 0.0 && top_p <= 1.0, "top_p must be in (0, 1]");
    assert!(temperature > 0.0, "temperature must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let end = policy.token_id(END_MARKER)?;
    let mut context = policy.context_id(prompt)?;
    let mut output = Vec::new();
    while output.len() < max_len {
        let scaled: Vec<f64> = policy.logits[context]
            .iter()
            .map(|x| x / temperature)
            .collect();
        let probs = softmax(&scaled);
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| {
            probs[b]
                .partial_cmp(&probs[a])
                .expect("softmax probabilities are finite")
                .then(a.cmp(&b))
        });
        let mut nucleus = Vec::new();
        let mut mass = 0.0;
        for &index in &order {
            nucleus.push(index);
            mass += probs[index];
            if mass >= top_p {
                break;
            }
        }
        let draw = rng.random::<f64>() * mass;
        let mut cumulative = 0.0;
        let mut chosen = *nucleus.last().expect("nucleus is never empty");
        for &index in &nucleus {
            cumulative += probs[index];
            if draw < cumulative {
                chosen = index;
                break;
            }
        }
        if chosen == end {
            break;
        }
        output.push(policy.vocab[chosen].clone());
        context = chosen;
    }
    Ok(output)
}

const PROMPT_INSTRUCTION: &str = "Please rewrite the following patent claims, which may be refused, in a way that it can be published as a patent.";

/// Builds the chat prompt, byte-exact: system block, user block carrying
/// the instruction, the claims, the "Expected refusal reasons:" line with
/// the comma-joined reasons, and the assistant header the generation
/// continues from.
pub fn build_prompt(claims: &str, reasons: &[String]) -> String {
    format!(
        "<|im_start|>system\nYou are a helpful assistant.<|im_end|>\n<|im_start|>user\n{PROMPT_INSTRUCTION}\n{claims}\nExpected refusal reasons:\n{}\n<|im_end|>\n<|im_start|>assistant\n",
        reasons.join(", ")
    )
}

/// Builds a labeled training set from rewrite pairs: per pair, `k`
/// sampled candidates labeled by the scorer, then the input text forced
/// undesirable and the granted text forced desirable (k+2 examples).
/// Pairs without a granted text are skipped. Prompts and responses use
/// character tokens; candidate sampling uses the default nucleus
/// parameters. Deterministic given the seed.
pub fn build_kto_dataset<S: PreferenceScorer + ?Sized>(
    policy: &ToyPolicy,
    reference: &ToyPolicy,
    scorer: &S,
    pairs: &[RewritePair],
    k: usize,
    max_len: usize,
    seed: u64,
) -> Result<Vec<KtoExample>, AlignError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut examples = Vec::new();
    for pair in pairs {
        let Some(after) = &pair.after else {
            log::warn!(
                "application {} has no granted text; skipped for training",
                pair.app_no
            );
            continue;
        };
        let prior_art = if pair.prior_art.is_empty() {
            String::new()
        } else {
            sample_prior_art(&pair.prior_art, rng.random())
                .expect("non-empty citation list samples")
        };
        let prompt = char_tokens(&build_prompt(&pair.before, &pair.reasons));
        for _ in 0..k {
            let response = sample_top_p(
                policy,
                &prompt,
                SAMPLING_TOP_P,
                SAMPLING_TEMPERATURE,
                max_len,
                rng.random(),
            )?;
            let text: String = response.concat();
            let prob = scorer
                .score_rewrite(&text, &pair.reasons, &prior_art)
                .map_err(|e| AlignError::UntrainedScorer(e.to_string()))?;
            examples.push(KtoExample::from_policies(
                policy,
                reference,
                prompt.clone(),
                response,
                label_desirability(prob),
            )?);
        }
        examples.push(KtoExample::from_policies(
            policy,
            reference,
            prompt.clone(),
            char_tokens(&pair.before),
            Desirability::Undesirable,
        )?);
        examples.push(KtoExample::from_policies(
            policy,
            reference,
            prompt,
            char_tokens(after),
            Desirability::Desirable,
        )?);
    }
    Ok(examples)
}
