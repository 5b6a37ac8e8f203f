//! Acceptance suite: twelve numbered end-to-end guarantees, one test each.
//! Every test prints a single `[PASS]`/`[FAIL]` line (run with
//! `cargo test --test acceptance -- --nocapture` to see them); a `[FAIL]`
//! line is always followed by the underlying panic so the suite stays an
//! honest report, not a scoreboard.

mod common;

use std::collections::HashMap;
use std::panic::{catch_unwind, resume_unwind, UnwindSafe};
use std::time::Instant;

use claimkit::align::{
    build_kto_dataset, build_prompt, char_tokens, char_vocab, estimate_z0, kto_grad, kto_loss,
    kto_loss_with_policies, kto_train_step, log_ratio, policy_logprob, sample_top_p, sft_grad,
    sft_loss, KtoBatch, KtoConfig, KtoExample, ToyPolicy, END_MARKER,
};
use claimkit::baselines::{rewrite_dmmc, rewrite_rdc};
use claimkit::claims::{
    classify_claim, parse_claims, serialize_claims, ClaimCategory, ClaimSet,
};
use claimkit::corpus::{
    classify_type, compute_stats, read_pairs, split_dataset, write_pairs, PairType, RewritePair,
};
use claimkit::metrics::{acceptance_rate, gleu, sari};
use claimkit::preference::{
    evaluate_preference, label_desirability, train_preference, Desirability, PreferenceError,
    PreferenceExample, PreferenceScorer,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Runs one numbered check, printing its verdict line either way.
fn criterion(number: u32, label: &str, body: impl FnOnce() + UnwindSafe) {
    match catch_unwind(body) {
        Ok(()) => println!("[PASS] criterion {number:02} — {label}"),
        Err(payload) => {
            println!("[FAIL] criterion {number:02} — {label}");
            resume_unwind(payload);
        }
    }
}

#[test]
fn criterion_01_metrics_match_brute_force_oracle() {
    criterion(1, "GLEU and SARI equal the brute-force oracle on 200 random instances", || {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..200 {
            let (src, refr, hyp) = common::random_metric_instance(&mut rng);
            let fast = gleu(&src, &refr, &hyp, 4).expect("hypothesis is non-empty");
            let slow = common::gleu_oracle(&src, &refr, &hyp, 4);
            assert!(
                (fast - slow).abs() < 1e-9,
                "gleu {fast} vs oracle {slow} on src={src:?} ref={refr:?} hyp={hyp:?}"
            );
            let fast = sari(&src, &refr, &hyp, 4);
            let slow = common::sari_oracle(&src, &refr, &hyp, 4);
            for (a, b, part) in [
                (fast.score, slow.score, "score"),
                (fast.add_f, slow.add_f, "add_f"),
                (fast.keep_f, slow.keep_f, "keep_f"),
                (fast.del_p, slow.del_p, "del_p"),
            ] {
                assert!(
                    (a - b).abs() < 1e-9,
                    "sari {part} {a} vs oracle {b} on src={src:?} ref={refr:?} hyp={hyp:?}"
                );
            }
        }
        assert!(started.elapsed().as_secs() < 10, "oracle comparison took too long");
    });
}

#[test]
fn criterion_02_metric_identities() {
    criterion(2, "GLEU of the reference is exactly 1; SARI honors its 0/0 conventions", || {
        let mut rng = ChaCha8Rng::seed_from_u64(202);
        for _ in 0..100 {
            let (src, _, text) = common::random_metric_instance(&mut rng);
            assert_eq!(gleu(&src, &text, &text, 4).unwrap(), 1.0);
        }
        let toks = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        // Identity edit: perfect keep, nothing addable, nothing to delete.
        let t = toks(&["a", "b", "c"]);
        let s = sari(&t, &t, &t, 4);
        assert_eq!((s.keep_f, s.add_f, s.del_p), (1.0, 0.0, 1.0));
        assert!((s.score - 2.0 / 3.0).abs() < 1e-12);
        // Copying the source when the reference changed everything: the
        // delete level is populated on the reference side, so its 0/0
        // precision counts as 0 rather than the no-op default of 1.
        let s = sari(&toks(&["a"]), &toks(&["b"]), &toks(&["a"]), 4);
        assert_eq!((s.keep_f, s.add_f, s.del_p, s.score), (0.0, 0.0, 0.0, 0.0));
        // Matching a reference that deletes: full marks on keep and delete.
        let s = sari(&toks(&["a", "b"]), &toks(&["a"]), &toks(&["a"]), 4);
        assert_eq!((s.keep_f, s.add_f, s.del_p), (1.0, 0.0, 1.0));
        // Matching a reference that substitutes: a perfect score.
        let s = sari(&toks(&["a", "b"]), &toks(&["a", "c"]), &toks(&["a", "c"]), 4);
        assert_eq!(s.score, 1.0);
    });
}

#[test]
fn criterion_03_kto_closed_forms() {
    criterion(3, "KTO losses match the hand-computed closed forms", || {
        let config = KtoConfig::default();
        assert_eq!((config.beta, config.lambda_d, config.lambda_u), (0.2, 3.0, 1.0));
        let example = |label, r: f64| KtoExample {
            prompt: Vec::new(),
            response: Vec::new(),
            label,
            policy_logprob: r,
            ref_logprob: 0.0,
        };
        // At r = z0 the sigmoid sits at 1/2: λ_D − λ_D/2 and λ_U − λ_U/2.
        let batch = KtoBatch::new(vec![example(Desirability::Desirable, 0.4)], 0.4);
        assert_eq!(kto_loss(&batch, &config).unwrap(), 1.5);
        let batch = KtoBatch::new(vec![example(Desirability::Undesirable, 0.4)], 0.4);
        assert_eq!(kto_loss(&batch, &config).unwrap(), 0.5);
        // Mixed batch, log-ratios ±5 at z0 = 0:
        // mean(3 − 3σ(1), 1 − σ(1)) = 0.537883 (six decimals by hand).
        let batch = KtoBatch::new(
            vec![
                example(Desirability::Desirable, 5.0),
                example(Desirability::Undesirable, -5.0),
            ],
            0.0,
        );
        assert!((kto_loss(&batch, &config).unwrap() - 0.537883).abs() < 1e-6);
    });
}

#[test]
fn criterion_04_gradients_match_finite_differences() {
    criterion(4, "analytic KTO and SFT gradients match central finite differences", || {
        let started = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(404);
        let tokens = ["甲", "乙", "丙"];
        for case in 0..100u64 {
            let base = &tokens[..rng.random_range(2..=3)];
            let policy = ToyPolicy::random(base, 1000 + case);
            let reference = ToyPolicy::random(base, 2000 + case);
            let examples: Vec<KtoExample> = (0..rng.random_range(2..=4))
                .map(|_| {
                    let prompt = vec![base[rng.random_range(0..base.len())].to_string()];
                    let response: Vec<String> = (0..rng.random_range(1..=3))
                        .map(|_| base[rng.random_range(0..base.len())].to_string())
                        .collect();
                    let label = if rng.random_bool(0.5) {
                        Desirability::Desirable
                    } else {
                        Desirability::Undesirable
                    };
                    KtoExample::from_policies(&policy, &reference, prompt, response, label)
                        .expect("tokens are in the vocabulary")
                })
                .collect();
            let config = KtoConfig {
                beta: [0.2, 0.5, 1.0][case as usize % 3],
                ..KtoConfig::default()
            };
            // z0 is a stop-gradient constant: freeze it across perturbations.
            let z0 = estimate_z0(&policy, &reference, &examples).unwrap();
            let analytic = kto_grad(&policy, &reference, &examples, z0, &config).unwrap();
            let numeric = common::finite_difference_grad(&policy, 1e-5, |p| {
                kto_loss_with_policies(p, &reference, &examples, z0, &config).unwrap()
            });
            for (row_a, row_n) in analytic.iter().zip(&numeric) {
                for (&a, &n) in row_a.iter().zip(row_n) {
                    assert!(
                        common::relative_error(a, n) < 1e-5,
                        "kto grad {a} vs fd {n} in case {case}"
                    );
                }
            }
            let batch: Vec<(Vec<String>, Vec<String>)> = examples
                .iter()
                .map(|e| (e.prompt.clone(), e.response.clone()))
                .collect();
            let analytic = sft_grad(&policy, &batch).unwrap();
            let numeric = common::finite_difference_grad(&policy, 1e-5, |p| {
                sft_loss(p, &batch).unwrap()
            });
            for (row_a, row_n) in analytic.iter().zip(&numeric) {
                for (&a, &n) in row_a.iter().zip(row_n) {
                    assert!(
                        common::relative_error(a, n) < 1e-5,
                        "sft grad {a} vs fd {n} in case {case}"
                    );
                }
            }
        }
        assert!(started.elapsed().as_secs() < 60, "gradient checks took too long");
    });
}

#[test]
fn criterion_05_kto_training_moves_the_policy() {
    criterion(5, "toy training decreases the loss and separates the label log-ratios", || {
        let base = ["甲", "乙", "丙"];
        let mut policy = ToyPolicy::random(&base, 81);
        let reference = policy.clone();
        let fixture = [
            (vec!["甲"], vec!["乙", "丙"], Desirability::Desirable),
            (vec!["乙"], vec!["丙", "丙"], Desirability::Desirable),
            (vec!["甲"], vec!["甲", "甲"], Desirability::Undesirable),
            (vec!["丙"], vec!["乙", "甲"], Desirability::Undesirable),
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
                .unwrap()
            })
            .collect();
        let mean_ratio = |policy: &ToyPolicy, label: Desirability| {
            let picked: Vec<f64> = examples
                .iter()
                .filter(|e| e.label == label)
                .map(|e| {
                    log_ratio(
                        policy_logprob(policy, &e.prompt, &e.response).unwrap(),
                        policy_logprob(&reference, &e.prompt, &e.response).unwrap(),
                    )
                })
                .collect();
            picked.iter().sum::<f64>() / picked.len() as f64
        };
        let desirable_before = mean_ratio(&policy, Desirability::Desirable);
        let undesirable_before = mean_ratio(&policy, Desirability::Undesirable);

        let config = KtoConfig::default();
        let mut losses = Vec::new();
        for _ in 0..50 {
            losses.push(kto_train_step(&mut policy, &reference, &examples, &config, 0.1).unwrap());
        }
        for pair in losses[..=10].windows(2) {
            assert!(pair[1] < pair[0], "loss failed to decrease: {pair:?}");
        }
        assert!(mean_ratio(&policy, Desirability::Desirable) > desirable_before);
        assert!(mean_ratio(&policy, Desirability::Undesirable) < undesirable_before);
    });
}

#[test]
fn criterion_06_sampler_matches_greedy_and_softmax() {
    criterion(6, "near-zero temperature equals greedy; full-nucleus draws match softmax", || {
        let tokens = ["甲", "乙", "丙", "丁"];
        let mut rng = ChaCha8Rng::seed_from_u64(606);
        for case in 0..100u64 {
            let base = &tokens[..rng.random_range(2..=4)];
            let policy = ToyPolicy::random(base, 3000 + case);
            let prompt: Vec<String> = if rng.random_bool(0.2) {
                Vec::new()
            } else {
                vec![base[rng.random_range(0..base.len())].to_string()]
            };
            let sampled = sample_top_p(&policy, &prompt, 0.95, 1e-6, 8, rng.random()).unwrap();
            let greedy = common::greedy_decode(&policy, &prompt, 8);
            assert_eq!(sampled, greedy, "case {case}, prompt {prompt:?}");
        }

        let policy = ToyPolicy::random(&["甲", "乙", "丙"], 77);
        let prompt = vec!["甲".to_string()];
        const DRAWS: usize = 10_000;
        let mut observed: HashMap<String, usize> = HashMap::new();
        for seed in 0..DRAWS as u64 {
            let output = sample_top_p(&policy, &prompt, 1.0, 1.0, 1, seed).unwrap();
            let token = output
                .into_iter()
                .next()
                .unwrap_or_else(|| END_MARKER.to_string());
            *observed.entry(token).or_insert(0) += 1;
        }
        let vocab = policy.vocab();
        let context = vocab.iter().position(|t| t == "甲").unwrap();
        let weights: Vec<f64> = policy.logits()[context].iter().map(|l| l.exp()).collect();
        let mass: f64 = weights.iter().sum();
        for (token, weight) in vocab.iter().zip(&weights) {
            let p = weight / mass;
            let expected = DRAWS as f64 * p;
            let sigma = (DRAWS as f64 * p * (1.0 - p)).sqrt();
            let count = observed.get(token).copied().unwrap_or(0) as f64;
            assert!(
                (count - expected).abs() <= 3.0 * sigma,
                "token {token}: {count} draws vs expected {expected:.1} (sigma {sigma:.1})"
            );
        }
    });
}

#[test]
fn criterion_07_category_detection_matches_the_rule() {
    criterion(7, "multi-multi detection matches the definition on 1,000 random graphs", || {
        let mut rng = ChaCha8Rng::seed_from_u64(707);
        for _ in 0..1000 {
            let graph = common::random_claim_graph(&mut rng);
            let text = common::render_claims_text(&graph);
            let set = parse_claims(&text).expect("generated text parses");
            assert_eq!(set.len(), graph.len());
            let expected = common::multi_multi_by_definition(&graph);
            for (generated, claim) in graph.iter().zip(set.claims()) {
                let mut parsed: Vec<(u32, bool)> =
                    claim.refs.iter().map(|r| (r.target, r.selective)).collect();
                parsed.sort_unstable();
                let mut stated = generated.refs.clone();
                stated.sort_unstable();
                assert_eq!(parsed, stated, "claim {} of:\n{text}", claim.number);
            }
            for (index, claim) in set.claims().iter().enumerate() {
                let detected = matches!(
                    classify_claim(&set, claim.number).unwrap(),
                    ClaimCategory::MultiMulti
                );
                assert_eq!(detected, expected[index], "claim {} of:\n{text}", claim.number);
            }
        }

        // The three-claim chain fixture: 2 cites 1, 3 cites 2, nothing
        // multiple; categories are Independent / DependentSingle twice.
        let text = "【請求項１】所定の装飾シートが貼付されてなる装飾板。\n【請求項２】請求項１に記載の装飾板からなる遊技盤。\n【請求項３】請求項２に記載の遊技盤を備えてなる遊技機。";
        let set = parse_claims(text).unwrap();
        let refs_of = |n: u32| -> Vec<(u32, bool)> {
            set.claims()[(n - 1) as usize]
                .refs
                .iter()
                .map(|r| (r.target, r.selective))
                .collect()
        };
        assert_eq!(refs_of(1), Vec::new());
        assert_eq!(refs_of(2), vec![(1, true)]);
        assert_eq!(refs_of(3), vec![(2, true)]);
        assert_eq!(classify_claim(&set, 1).unwrap(), ClaimCategory::Independent);
        assert_eq!(classify_claim(&set, 2).unwrap(), ClaimCategory::DependentSingle);
        assert_eq!(classify_claim(&set, 3).unwrap(), ClaimCategory::DependentSingle);
    });
}

#[test]
fn criterion_08_baseline_rewrites_keep_their_invariants() {
    criterion(8, "random-deletion and exclusion baselines preserve set invariants", || {
        let check_invariants = |output: &ClaimSet, text: &str| {
            assert!(output.get(1).is_some(), "claim 1 missing from rewrite of:\n{text}");
            for (index, claim) in output.claims().iter().enumerate() {
                assert_eq!(claim.number, (index + 1) as u32, "numbering gap in:\n{text}");
                for r in &claim.refs {
                    assert!(
                        output.get(r.target).is_some(),
                        "claim {} cites missing claim {} in rewrite of:\n{text}",
                        claim.number,
                        r.target
                    );
                }
            }
            let reparsed = parse_claims(&serialize_claims(output)).expect("rewrite re-parses");
            assert!(reparsed.structurally_equal(output));
        };

        let mut rng = ChaCha8Rng::seed_from_u64(808);
        for case in 0..1000u64 {
            let graph = common::random_claim_graph(&mut rng);
            let text = common::render_claims_text(&graph);
            let set = parse_claims(&text).unwrap();

            let rdc = rewrite_rdc(&set, case).unwrap();
            check_invariants(&rdc.output, &text);

            let dmmc = rewrite_dmmc(&set).unwrap();
            check_invariants(&dmmc.output, &text);
            for claim in dmmc.output.claims() {
                assert!(
                    !matches!(
                        classify_claim(&dmmc.output, claim.number).unwrap(),
                        ClaimCategory::MultiMulti
                    ),
                    "multi-multi claim {} survived exclusion in:\n{text}",
                    claim.number
                );
            }
            let again = rewrite_dmmc(&dmmc.output).unwrap();
            assert!(again.deleted.is_empty(), "exclusion is not idempotent on:\n{text}");
            assert!(again.output.structurally_equal(&dmmc.output));
        }
    });
}

/// Scorer keyed on a marker character, for exact acceptance arithmetic.
struct MarkerScorer;

impl PreferenceScorer for MarkerScorer {
    fn score_rewrite(
        &self,
        claims_text: &str,
        _refusal_reasons: &[String],
        _prior_art: &str,
    ) -> Result<f64, PreferenceError> {
        Ok(if claims_text.contains('良') { 0.9 } else { 0.1 })
    }
}

fn chained_claims(count: usize, salt: usize) -> String {
    (1..=count)
        .map(|i| format!("【請求項{i}】要素{salt}を備える装置{i}。"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn criterion_09_preference_pipeline() {
    criterion(9, "separable training reaches 0.95; threshold and acceptance are exact", || {
        // 500 examples, desirable texts with many claims, undesirable with
        // few — linearly separable on the claim-count feature.
        let corpus: Vec<PreferenceExample> = (0..500)
            .map(|i| PreferenceExample {
                claims_text: if i % 2 == 0 {
                    chained_claims(5 + i % 3, i)
                } else {
                    chained_claims(1 + i % 2, i)
                },
                refusal_reasons: vec!["22:第29条第2項".to_string()],
                prior_art_claims: "先行技術の装置。".to_string(),
                label: if i % 2 == 0 {
                    Desirability::Desirable
                } else {
                    Desirability::Undesirable
                },
            })
            .collect();
        let (train, held_out) = corpus.split_at(400);
        let params = train_preference(train, 0.5, 200, 32, 42).unwrap();
        let report = evaluate_preference(&params, held_out).unwrap();
        assert!(
            report.accuracy >= 0.95,
            "held-out accuracy {} below 0.95",
            report.accuracy
        );

        // The label threshold is inclusive at exactly one half.
        assert_eq!(label_desirability(0.5), Desirability::Desirable);
        assert_eq!(label_desirability(0.4999), Desirability::Undesirable);

        // Desirable, undesirable, desirable → exactly two thirds.
        let hypotheses = vec![
            "良い装置。".to_string(),
            "悪い装置。".to_string(),
            "良い方法。".to_string(),
        ];
        let contexts = vec![(Vec::new(), String::new()); 3];
        let rate = acceptance_rate(&hypotheses, &contexts, &MarkerScorer).unwrap();
        assert_eq!(rate, 2.0 / 3.0);
    });
}

/// The ten-pair fixture behind the corpus-pipeline check, two per type.
/// Claim texts are built from 8-character single claims (6-character
/// header plus a one-character body and the full stop) so every average
/// below is hand-checkable.
fn corpus_fixture() -> Vec<RewritePair> {
    let one = |body: &str| format!("【請求項1】{body}。");
    let two = |a: &str, b: &str| format!("【請求項1】{a}。\n【請求項2】{b}。");
    let reasons = vec!["22:第29条第2項".to_string()];
    let pair = |n: usize, before: &str, after: Option<&str>, with_reasons: bool| RewritePair {
        app_no: format!("2020-{n:03}"),
        before: before.to_string(),
        after: after.map(str::to_string),
        reasons: if with_reasons { reasons.clone() } else { Vec::new() },
        prior_art: Vec::new(),
    };
    vec![
        // No grant (8 and 17 chars; 1 and 2 claims).
        pair(1, &one("甲"), None, false),
        pair(2, &two("甲", "乙"), None, true),
        // Identical grant without reasons; the second differs only in
        // line endings, which normalization removes.
        pair(3, &one("乙"), Some(&one("乙")), false),
        pair(4, "【請求項1】丙。\r\n", Some(&one("丙")), false),
        // Identical grant with reasons (8 and 17 chars).
        pair(5, &one("丁"), Some(&one("丁")), true),
        pair(6, &two("丁", "戊"), Some(&two("丁", "戊")), true),
        // Differing grant without reasons: 17→8 chars drops a claim;
        // 8→9 chars keeps the claim count.
        pair(7, &two("甲", "乙"), Some(&one("甲")), false),
        pair(8, &one("戊"), Some("【請求項1】戊戊。"), false),
        // Differing grant with reasons: 17→8 and 8→10 chars.
        pair(9, &two("己", "庚"), Some(&one("己")), true),
        pair(10, &one("辛"), Some("【請求項1】辛辛辛。"), true),
    ]
}

#[test]
fn criterion_10_corpus_pipeline() {
    criterion(10, "type labels, statistics, round-trips, and splits behave exactly", || {
        let pairs = corpus_fixture();
        let expected_types = [
            PairType::Type1,
            PairType::Type1,
            PairType::Type2,
            PairType::Type2,
            PairType::Type3,
            PairType::Type3,
            PairType::Type4,
            PairType::Type4,
            PairType::Type5,
            PairType::Type5,
        ];
        for (pair, expected) in pairs.iter().zip(expected_types) {
            assert_eq!(classify_type(pair), expected, "pair {}", pair.app_no);
        }

        let stats = compute_stats(&pairs);
        assert_eq!(stats.total, 10);
        let of = |t: PairType| &stats.types[&t];
        // Hand tally. Subject text is the grant (the input for Type 1);
        // chars are counted after normalization; percent changes average
        // (after − before) / before per application.
        let t1 = of(PairType::Type1);
        assert_eq!((t1.freq, t1.avg_chars, t1.avg_claims), (2, 12.5, 1.5));
        assert_eq!((t1.pct_chars, t1.pct_claims), (None, None));
        let t2 = of(PairType::Type2);
        assert_eq!((t2.freq, t2.avg_chars, t2.avg_claims), (2, 8.0, 1.0));
        assert_eq!((t2.pct_chars, t2.pct_claims), (Some(0.0), Some(0.0)));
        let t3 = of(PairType::Type3);
        assert_eq!((t3.freq, t3.avg_chars, t3.avg_claims), (2, 12.5, 1.5));
        assert_eq!((t3.pct_chars, t3.pct_claims), (Some(0.0), Some(0.0)));
        let t4 = of(PairType::Type4);
        assert_eq!((t4.freq, t4.avg_chars, t4.avg_claims), (2, 8.5, 1.0));
        assert_eq!(t4.pct_chars, Some((-9.0 / 17.0 + 1.0 / 8.0) / 2.0));
        assert_eq!(t4.pct_claims, Some(-0.25));
        let t5 = of(PairType::Type5);
        assert_eq!((t5.freq, t5.avg_chars, t5.avg_claims), (2, 9.0, 1.0));
        assert_eq!(t5.pct_chars, Some((-9.0 / 17.0 + 2.0 / 8.0) / 2.0));
        assert_eq!(t5.pct_claims, Some(-0.25));

        // JSONL round trip is the identity.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.jsonl");
        write_pairs(&path, &pairs).unwrap();
        assert_eq!(read_pairs(&path).unwrap(), pairs);

        // Splits are reproducible from the seed.
        let first = split_dataset(&pairs, (6, 2, 2), 99).unwrap();
        let second = split_dataset(&pairs, (6, 2, 2), 99).unwrap();
        assert_eq!(first, second);
        let (train, valid, test) = first;
        assert_eq!((train.len(), valid.len(), test.len()), (6, 2, 2));
    });
}

#[test]
fn criterion_11_dataset_arithmetic() {
    criterion(11, "dataset construction yields k + 2 labeled examples per usable pair", || {
        let pairs = vec![
            RewritePair {
                app_no: "2020-001".to_string(),
                before: "甲乙".to_string(),
                after: Some("乙丙".to_string()),
                reasons: vec!["22:第29条第2項".to_string()],
                prior_art: vec!["丙丁の装置".to_string()],
            },
            // No grant: contributes nothing.
            RewritePair {
                app_no: "2020-002".to_string(),
                before: "丁戊".to_string(),
                after: None,
                reasons: Vec::new(),
                prior_art: Vec::new(),
            },
            RewritePair {
                app_no: "2020-003".to_string(),
                before: "戊己".to_string(),
                after: Some("己甲".to_string()),
                reasons: Vec::new(),
                prior_art: Vec::new(),
            },
        ];
        let texts: Vec<String> = pairs
            .iter()
            .flat_map(|p| {
                [
                    build_prompt(&p.before, &p.reasons),
                    p.after.clone().unwrap_or_default(),
                ]
            })
            .collect();
        let vocab = char_vocab(texts.iter().map(String::as_str));
        let policy = ToyPolicy::random(&vocab, 11);
        let reference = ToyPolicy::uniform(&vocab);
        let dataset =
            build_kto_dataset(&policy, &reference, &MarkerScorer, &pairs, 12, 16, 11).unwrap();
        assert_eq!(dataset.len(), 2 * 14, "two usable pairs, fourteen examples each");
        for (block, pair) in [(0usize, &pairs[0]), (14, &pairs[2])] {
            let prompt = char_tokens(&build_prompt(&pair.before, &pair.reasons));
            for example in &dataset[block..block + 14] {
                assert_eq!(example.prompt, prompt);
            }
            let copy = &dataset[block + 12];
            assert_eq!(copy.response, char_tokens(&pair.before));
            assert_eq!(copy.label, Desirability::Undesirable);
            let gold = &dataset[block + 13];
            assert_eq!(gold.response, char_tokens(pair.after.as_deref().unwrap()));
            assert_eq!(gold.label, Desirability::Desirable);
        }
    });
}

#[test]
fn criterion_12_prompt_fidelity() {
    criterion(12, "the chat prompt is byte-identical to its template", || {
        let claims = "【請求項1】装置。\n【請求項2】請求項1に記載の装置。";
        let reasons = vec![
            "22:第29条第2項".to_string(),
            "50:第36条第6項第1号".to_string(),
        ];
        let mut expected = String::new();
        expected.push_str("<|im_start|>system\n");
        expected.push_str("You are a helpful assistant.<|im_end|>\n");
        expected.push_str("<|im_start|>user\n");
        expected.push_str(
            "Please rewrite the following patent claims, which may be refused, in a way that it can be published as a patent.\n",
        );
        expected.push_str(claims);
        expected.push('\n');
        expected.push_str("Expected refusal reasons:\n");
        expected.push_str("22:第29条第2項, 50:第36条第6項第1号");
        expected.push('\n');
        expected.push_str("<|im_end|>\n");
        expected.push_str("<|im_start|>assistant\n");
        assert_eq!(build_prompt(claims, &reasons), expected);

        // No reasons: the line above the closing tag is empty, not absent.
        let bare = build_prompt("【請求項1】装置。", &[]);
        assert!(bare.contains("Expected refusal reasons:\n\n<|im_end|>"));
    });
}
