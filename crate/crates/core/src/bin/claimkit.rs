//! Command-line front end: corpus pairing and statistics, baseline
//! rewriting, metric evaluation, preference-model training/evaluation,
//! alignment-dataset construction, and a demonstration alignment run.
//!
//! Reports go to stdout as JSON (or TSV for the demo loss curve); datasets
//! go to files as JSONL. All randomized steps draw from one generator
//! seeded by --seed, so reruns with the same flags are byte-identical.
//! Any failure exits with code 2 and a diagnostic on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use claimkit::align::{
    build_kto_dataset, build_prompt, char_vocab, estimate_z0, kto_loss_with_policies,
    kto_train_step, KtoConfig, KtoExample, ToyPolicy,
};
use claimkit::baselines::{rewrite_copy, rewrite_dmmc, rewrite_rdc};
use claimkit::claims::{parse_claims_with, serialize_claims, HeaderStyle};
use claimkit::corpus::{
    compute_stats, join_pairs, read_jsonl, read_pairs, read_records, write_jsonl, write_pairs,
    RewritePair,
};
use claimkit::metrics::{acceptance_rate, evaluate_corpus};
use claimkit::preference::{
    evaluate_preference, sample_prior_art, train_preference, Desirability, PreferenceExample,
    PreferenceModelParams,
};

#[derive(Parser)]
#[command(
    name = "claimkit",
    version,
    about = "Patent-claim corpus pairing, heuristic rewriting baselines, rewrite metrics, and preference-alignment tooling"
)]
struct Cli {
    /// Seed for every randomized step of the run.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Suppress progress logging on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Join pre-examination (A) and granted (B9) records into rewrite pairs.
    Pair {
        /// JSONL of A records {app_no, kind, claims, pub_date, reasons?, prior_art?}.
        #[arg(long)]
        a: PathBuf,
        /// JSONL of B9 records.
        #[arg(long)]
        b9: PathBuf,
        /// Output JSONL of pairs {app_no, before, after, reasons, prior_art}.
        #[arg(long)]
        out: PathBuf,
        /// Also write the statistics JSON here (default: stdout).
        #[arg(long)]
        stats: Option<PathBuf>,
    },
    /// Classify existing pairs into Types 1-5 and emit per-type statistics.
    Stats {
        #[arg(long)]
        pairs: PathBuf,
        /// Write the statistics JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rewrite each pair's pre-examination text with a heuristic baseline.
    Rewrite {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, value_enum)]
        baseline: BaselineName,
        /// Output JSONL of hypotheses {app_no, hypothesis}.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score hypotheses against granted texts with GLEU and SARI.
    Eval {
        #[arg(long)]
        pairs: PathBuf,
        /// Hypotheses JSONL {app_no, hypothesis}, aligned with the pairs.
        #[arg(long)]
        hyps: PathBuf,
        /// Preference-model JSON; when given, the report includes the
        /// acceptance rate.
        #[arg(long)]
        scorer: Option<PathBuf>,
        /// Stream per-instance scores to this JSONL path.
        #[arg(long)]
        per_instance: Option<PathBuf>,
        /// Write the report JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train the examiner-preference classifier on labeled examples.
    PrefTrain {
        /// Labeled examples JSONL {claims, reasons, prior_art, label}.
        #[arg(long)]
        data: PathBuf,
        /// Output path for the model JSON.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        lr: f64,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        /// Fraction of examples held out for the accuracy report.
        #[arg(long, default_value_t = 0.2)]
        holdout: f64,
    },
    /// Evaluate a trained preference model on labeled examples.
    PrefEval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a labeled alignment dataset by sampling rewrite candidates.
    KtoBuild {
        #[arg(long)]
        pairs: PathBuf,
        /// Preference-model JSON used to label sampled candidates.
        #[arg(long)]
        scorer: PathBuf,
        /// Output JSONL {prompt, response, label, policy_logprob, ref_logprob}.
        #[arg(long)]
        out: PathBuf,
        /// Sampled candidates per pair (the forced input-undesirable and
        /// granted-desirable examples are always appended).
        #[arg(long, default_value_t = 12)]
        k: usize,
        /// Maximum sampled response length in tokens.
        #[arg(long, default_value_t = 64)]
        max_len: usize,
    },
    /// Run a demonstration alignment training loop on the toy policy and
    /// print its loss curve as TSV.
    KtoDemo {
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 0.1)]
        lr: f64,
        #[arg(long, default_value_t = 0.2)]
        beta: f64,
        #[arg(long, default_value_t = 3.0)]
        lambda_d: f64,
        #[arg(long, default_value_t = 1.0)]
        lambda_u: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BaselineName {
    /// Emit the input text unchanged.
    Copy,
    /// Delete one random claim (never claim 1) and its dependents.
    Rdc,
    /// Delete every claim multiply dependent on a multiple dependent claim.
    Dmmc,
}

#[derive(Debug, Serialize, Deserialize)]
struct HypothesisRecord {
    app_no: String,
    hypothesis: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let filter = if cli.quiet { "off" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(filter))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(error) => {
            eprintln!("error: {error:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pair { a, b9, out, stats } => cmd_pair(&a, &b9, &out, stats.as_deref()),
        Command::Stats { pairs, out } => cmd_stats(&pairs, out.as_deref()),
        Command::Rewrite {
            pairs,
            baseline,
            out,
        } => cmd_rewrite(&pairs, baseline, cli.seed, &out),
        Command::Eval {
            pairs,
            hyps,
            scorer,
            per_instance,
            out,
        } => cmd_eval(
            &pairs,
            &hyps,
            scorer.as_deref(),
            per_instance.as_deref(),
            out.as_deref(),
            cli.seed,
        ),
        Command::PrefTrain {
            data,
            out,
            lr,
            epochs,
            batch_size,
            holdout,
        } => cmd_pref_train(&data, &out, lr, epochs, batch_size, holdout, cli.seed),
        Command::PrefEval { model, data, out } => cmd_pref_eval(&model, &data, out.as_deref()),
        Command::KtoBuild {
            pairs,
            scorer,
            out,
            k,
            max_len,
        } => cmd_kto_build(&pairs, &scorer, &out, k, max_len, cli.seed),
        Command::KtoDemo {
            steps,
            lr,
            beta,
            lambda_d,
            lambda_u,
        } => cmd_kto_demo(
            steps,
            lr,
            KtoConfig {
                beta,
                lambda_d,
                lambda_u,
            },
            cli.seed,
        ),
    }
}

fn emit_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<()> {
    let json = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn load_model(path: &Path) -> Result<PreferenceModelParams> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading model from {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))
}

fn cmd_pair(a: &Path, b9: &Path, out: &Path, stats: Option<&Path>) -> Result<()> {
    let a_records =
        read_records(a).with_context(|| format!("reading A records from {}", a.display()))?;
    let b9_records =
        read_records(b9).with_context(|| format!("reading B9 records from {}", b9.display()))?;
    let outcome = join_pairs(&a_records, &b9_records)?;
    if !outcome.orphan_b9.is_empty() {
        log::info!(
            "{} granted record(s) without a matching application: {}",
            outcome.orphan_b9.len(),
            outcome.orphan_b9.join(", ")
        );
    }
    if !outcome.superseded_b9.is_empty() {
        log::info!(
            "kept only the latest grant for: {}",
            outcome.superseded_b9.join(", ")
        );
    }
    write_pairs(out, &outcome.pairs)
        .with_context(|| format!("writing pairs to {}", out.display()))?;
    log::info!("wrote {} pair(s) to {}", outcome.pairs.len(), out.display());
    emit_json(&compute_stats(&outcome.pairs), stats)
}

fn cmd_stats(pairs: &Path, out: Option<&Path>) -> Result<()> {
    let pairs =
        read_pairs(pairs).with_context(|| format!("reading pairs from {}", pairs.display()))?;
    emit_json(&compute_stats(&pairs), out)
}

fn cmd_rewrite(pairs: &Path, baseline: BaselineName, seed: u64, out: &Path) -> Result<()> {
    let pairs =
        read_pairs(pairs).with_context(|| format!("reading pairs from {}", pairs.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hypotheses = Vec::with_capacity(pairs.len());
    for pair in &pairs {
        let hypothesis = match baseline {
            // Copy reproduces the input text verbatim, untouched by
            // parsing/serialization.
            BaselineName::Copy => pair.before.clone(),
            BaselineName::Rdc | BaselineName::Dmmc => {
                let set = parse_claims_with(&pair.before, HeaderStyle::detect(&pair.before))
                    .with_context(|| {
                        format!("parsing claims of application {}", pair.app_no)
                    })?;
                let result = match baseline {
                    BaselineName::Rdc => rewrite_rdc(&set, rng.random())?,
                    BaselineName::Dmmc => rewrite_dmmc(&set)?,
                    BaselineName::Copy => rewrite_copy(&set),
                };
                serialize_claims(&result.output)
            }
        };
        hypotheses.push(HypothesisRecord {
            app_no: pair.app_no.clone(),
            hypothesis,
        });
    }
    write_jsonl(out, &hypotheses)
        .with_context(|| format!("writing hypotheses to {}", out.display()))?;
    log::info!("wrote {} hypothesis(es) to {}", hypotheses.len(), out.display());
    Ok(())
}

fn cmd_eval(
    pairs: &Path,
    hyps: &Path,
    scorer: Option<&Path>,
    per_instance: Option<&Path>,
    out: Option<&Path>,
    seed: u64,
) -> Result<()> {
    let pairs: Vec<RewritePair> =
        read_pairs(pairs).with_context(|| format!("reading pairs from {}", pairs.display()))?;
    let hypotheses: Vec<HypothesisRecord> =
        read_jsonl(hyps).with_context(|| format!("reading hypotheses from {}", hyps.display()))?;
    if pairs.len() != hypotheses.len() {
        bail!(
            "length mismatch: {} pair(s) but {} hypothesis(es)",
            pairs.len(),
            hypotheses.len()
        );
    }
    let mut texts = Vec::with_capacity(pairs.len());
    for (pair, hyp) in pairs.iter().zip(&hypotheses) {
        if pair.app_no != hyp.app_no {
            bail!(
                "hypothesis order mismatch: expected application {}, found {}",
                pair.app_no,
                hyp.app_no
            );
        }
        let Some(after) = &pair.after else {
            bail!(
                "application {} has no granted text to evaluate against",
                pair.app_no
            );
        };
        texts.push((pair.before.clone(), after.clone()));
    }
    let hyp_texts: Vec<String> = hypotheses.into_iter().map(|h| h.hypothesis).collect();
    let mut report = evaluate_corpus(&texts, &hyp_texts)?;
    if let Some(model_path) = scorer {
        let model = load_model(model_path)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let contexts: Vec<(Vec<String>, String)> = pairs
            .iter()
            .map(|pair| {
                let prior_art = if pair.prior_art.is_empty() {
                    String::new()
                } else {
                    sample_prior_art(&pair.prior_art, rng.random())
                        .expect("non-empty citation list samples")
                };
                (pair.reasons.clone(), prior_art)
            })
            .collect();
        report.acceptance_rate = Some(acceptance_rate(&hyp_texts, &contexts, &model)?);
    }
    if let Some(path) = per_instance {
        write_jsonl(path, &report.per_instance)
            .with_context(|| format!("writing per-instance scores to {}", path.display()))?;
    }
    emit_json(&report, out)
}

fn cmd_pref_train(
    data: &Path,
    out: &Path,
    lr: f64,
    epochs: usize,
    batch_size: usize,
    holdout: f64,
    seed: u64,
) -> Result<()> {
    if !(0.0..1.0).contains(&holdout) {
        bail!("--holdout must be in [0, 1), got {holdout}");
    }
    let mut examples: Vec<PreferenceExample> =
        read_jsonl(data).with_context(|| format!("reading examples from {}", data.display()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rand::seq::SliceRandom::shuffle(examples.as_mut_slice(), &mut rng);
    let holdout_size = (examples.len() as f64 * holdout).round() as usize;
    let train_size = examples.len().saturating_sub(holdout_size);
    if train_size == 0 {
        bail!("no training examples left after holding out {holdout_size}");
    }
    let (train, held_out) = examples.split_at(train_size);
    let params = train_preference(train, lr, epochs, batch_size, seed)?;
    let eval_set = if held_out.is_empty() { train } else { held_out };
    let report = evaluate_preference(&params, eval_set)?;
    std::fs::write(out, serde_json::to_string_pretty(&params)? + "\n")
        .with_context(|| format!("writing model to {}", out.display()))?;
    log::info!("wrote model to {}", out.display());
    emit_json(
        &serde_json::json!({
            "train_size": train.len(),
            "holdout_size": held_out.len(),
            "evaluated_on": if held_out.is_empty() { "train" } else { "holdout" },
            "report": report,
        }),
        None,
    )
}

fn cmd_pref_eval(model: &Path, data: &Path, out: Option<&Path>) -> Result<()> {
    let params = load_model(model)?;
    let examples: Vec<PreferenceExample> =
        read_jsonl(data).with_context(|| format!("reading examples from {}", data.display()))?;
    emit_json(&evaluate_preference(&params, &examples)?, out)
}

fn cmd_kto_build(
    pairs: &Path,
    scorer: &Path,
    out: &Path,
    k: usize,
    max_len: usize,
    seed: u64,
) -> Result<()> {
    let pairs: Vec<RewritePair> =
        read_pairs(pairs).with_context(|| format!("reading pairs from {}", pairs.display()))?;
    let model = load_model(scorer)?;
    let texts: Vec<String> = pairs
        .iter()
        .flat_map(|pair| {
            [
                build_prompt(&pair.before, &pair.reasons),
                pair.after.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let vocab = char_vocab(texts.iter().map(String::as_str));
    let policy = ToyPolicy::random(&vocab, seed);
    let reference = ToyPolicy::uniform(&vocab);
    let dataset = build_kto_dataset(&policy, &reference, &model, &pairs, k, max_len, seed)?;
    write_jsonl(out, &dataset)
        .with_context(|| format!("writing dataset to {}", out.display()))?;
    let desirable = dataset
        .iter()
        .filter(|e| e.label == Desirability::Desirable)
        .count();
    emit_json(
        &serde_json::json!({
            "examples": dataset.len(),
            "desirable": desirable,
            "undesirable": dataset.len() - desirable,
        }),
        None,
    )
}

fn cmd_kto_demo(steps: usize, lr: f64, config: KtoConfig, seed: u64) -> Result<()> {
    let vocab = ["甲", "乙", "丙"];
    let mut policy = ToyPolicy::random(&vocab, seed);
    let reference = policy.clone();
    let fixture = [
        (["甲"], ["乙", "丙"], Desirability::Desirable),
        (["乙"], ["丙", "丙"], Desirability::Desirable),
        (["甲"], ["甲", "甲"], Desirability::Undesirable),
        (["丙"], ["乙", "甲"], Desirability::Undesirable),
    ];
    let examples: Vec<KtoExample> = fixture
        .iter()
        .map(|(prompt, response, label)| {
            KtoExample::from_policies(
                &policy,
                &reference,
                prompt.iter().map(|s| s.to_string()).collect(),
                response.iter().map(|s| s.to_string()).collect(),
                *label,
            )
        })
        .collect::<Result<_, _>>()?;
    println!("step\tloss");
    for step in 0..steps {
        let loss = kto_train_step(&mut policy, &reference, &examples, &config, lr)?;
        println!("{step}\t{loss:.6}");
    }
    let z0 = estimate_z0(&policy, &reference, &examples)?;
    let final_loss = kto_loss_with_policies(&policy, &reference, &examples, z0, &config)?;
    println!("{steps}\t{final_loss:.6}");
    Ok(())
}
