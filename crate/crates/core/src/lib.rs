//! Tools for analyzing and refining patent claim sections.
//!
//! The crate is organized around a small pipeline:
//!
//! * [`claims`] — parse a claims section into numbered claims with a
//!   citation graph, classify claims (independent / dependent /
//!   multi / multi-multi), and compute deletion closures.
//! * [`baselines`] — heuristic rewriters over parsed claim sets
//!   (copy, random claim deletion, multi-multi deletion).
//! * [`metrics`] — GLEU / SARI rewrite-quality metrics at word and
//!   phrase segmentation, plus corpus aggregation and acceptance rate.
//! * [`preference`] — a logistic desirability classifier over
//!   (claims, refusal reasons, prior art) with a deterministic
//!   feature extractor.
//! * [`align`] — preference-optimization math (value, loss, analytic
//!   gradients, reference-point estimation) on an analytically
//!   verifiable bigram policy, with top-p sampling and prompt
//!   construction.
//! * [`corpus`] — pairing of pre-/post-examination claim records,
//!   type classification, statistics, filtering, and splits.

pub mod align;
pub mod baselines;
pub mod claims;
pub mod corpus;
pub mod metrics;
pub mod preference;
