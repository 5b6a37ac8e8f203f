//! Rewrite-pair corpus construction.
//!
//! Input records are claims sections from two publication kinds: `A`
//! (pre-examination publication) and `B9` (granted publication). Records
//! sharing an application number are joined into a [`RewritePair`] carrying
//! the before/after texts plus refusal-reason labels and prior-art citation
//! texts, which ride on the `A` record. Pairs are classified into five
//! types by whether a grant exists, whether the texts differ, and whether
//! refusal reasons are present; per-type statistics, length filtering, and
//! seeded splits complete the pipeline.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::claims::count_claim_headers;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("duplicate {kind} record for application {app_no}")]
    DuplicateRecord { app_no: String, kind: RecordKind },
    #[error("insufficient data: requested {requested} pairs, have {available}")]
    InsufficientData { requested: usize, available: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RecordKind {
    A,
    B9,
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecordKind::A => f.write_str("A"),
            RecordKind::B9 => f.write_str("B9"),
        }
    }
}

/// One published claims section.
///
/// `pub_date` is an ISO `YYYY-MM-DD` date (compared lexically). The
/// optional `reasons` / `prior_art` fields carry examination-history
/// linkage on `A` records; they are omitted from JSON when empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentRecord {
    pub app_no: String,
    pub kind: RecordKind,
    pub claims: String,
    pub pub_date: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reasons: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub prior_art: Vec<String>,
}

/// One application's before/after claim texts with refusal-reason labels
/// and candidate prior-art citation texts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewritePair {
    pub app_no: String,
    pub before: String,
    pub after: Option<String>,
    #[serde(default)]
    pub reasons: Vec<String>,
    #[serde(default)]
    pub prior_art: Vec<String>,
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub enum PairType {
    #[serde(rename = "type1")]
    Type1,
    #[serde(rename = "type2")]
    Type2,
    #[serde(rename = "type3")]
    Type3,
    #[serde(rename = "type4")]
    Type4,
    #[serde(rename = "type5")]
    Type5,
}

impl PairType {
    pub const ALL: [PairType; 5] = [
        PairType::Type1,
        PairType::Type2,
        PairType::Type3,
        PairType::Type4,
        PairType::Type5,
    ];
}

impl fmt::Display for PairType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PairType::Type1 => "Type 1",
            PairType::Type2 => "Type 2",
            PairType::Type3 => "Type 3",
            PairType::Type4 => "Type 4",
            PairType::Type5 => "Type 5",
        };
        f.write_str(name)
    }
}

/// Result of joining `A` and `B9` record streams.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JoinOutcome {
    /// One pair per `A` record, in `A` input order.
    pub pairs: Vec<RewritePair>,
    /// Application numbers of `B9` records without a matching `A`.
    pub orphan_b9: Vec<String>,
    /// Application numbers of `B9` records displaced by a later grant
    /// publication for the same application.
    pub superseded_b9: Vec<String>,
}

/// Joins records by application number. Every `A` record yields a pair;
/// `B9` records without an `A` are reported as orphans. A repeated `A`
/// record is an error; repeated `B9` records keep the latest `pub_date`
/// (later input wins ties) and report the displaced ones.
pub fn join_pairs(
    a_records: &[DocumentRecord],
    b9_records: &[DocumentRecord],
) -> Result<JoinOutcome, CorpusError> {
    let mut grants: BTreeMap<&str, &DocumentRecord> = BTreeMap::new();
    let mut superseded_b9 = Vec::new();
    for record in b9_records {
        if record.kind != RecordKind::B9 {
            return Err(CorpusError::Parse {
                line: 0,
                message: format!(
                    "record for application {} in the B9 stream has kind {}",
                    record.app_no, record.kind
                ),
            });
        }
        match grants.entry(record.app_no.as_str()) {
            Entry::Vacant(slot) => {
                slot.insert(record);
            }
            Entry::Occupied(mut slot) => {
                if record.pub_date >= slot.get().pub_date {
                    superseded_b9.push(slot.get().app_no.clone());
                    slot.insert(record);
                } else {
                    superseded_b9.push(record.app_no.clone());
                }
            }
        }
    }

    let mut seen_a: BTreeMap<&str, ()> = BTreeMap::new();
    let mut pairs = Vec::with_capacity(a_records.len());
    for record in a_records {
        if record.kind != RecordKind::A {
            return Err(CorpusError::Parse {
                line: 0,
                message: format!(
                    "record for application {} in the A stream has kind {}",
                    record.app_no, record.kind
                ),
            });
        }
        if seen_a.insert(record.app_no.as_str(), ()).is_some() {
            return Err(CorpusError::DuplicateRecord {
                app_no: record.app_no.clone(),
                kind: RecordKind::A,
            });
        }
        let grant = grants.remove(record.app_no.as_str());
        pairs.push(RewritePair {
            app_no: record.app_no.clone(),
            before: record.claims.clone(),
            after: grant.map(|g| g.claims.clone()),
            reasons: record.reasons.clone(),
            prior_art: record.prior_art.clone(),
        });
    }
    let orphan_b9: Vec<String> = grants.into_values().map(|g| g.app_no.clone()).collect();
    if !orphan_b9.is_empty() {
        log::info!("{} grant record(s) had no matching application", orphan_b9.len());
    }
    Ok(JoinOutcome {
        pairs,
        orphan_b9,
        superseded_b9,
    })
}

/// Canonical text form used for identity comparison and statistics:
/// line endings normalized to `\n`, trailing whitespace stripped from each
/// line and from the end of the text.
pub fn normalize_claims_text(text: &str) -> String {
    let unified = text.replace("\r\n", "\n").replace('\r', "\n");
    let mut out: String = unified
        .split('\n')
        .map(str::trim_end)
        .collect::<Vec<_>>()
        .join("\n");
    while out.ends_with('\n') {
        out.pop();
    }
    out
}

/// Classifies a pair: no grant → Type 1; identical normalized texts →
/// Type 2 (no reasons) or Type 3 (with reasons); differing texts →
/// Type 4 (no reasons) or Type 5 (with reasons).
pub fn classify_type(pair: &RewritePair) -> PairType {
    let Some(after) = &pair.after else {
        return PairType::Type1;
    };
    let identical = normalize_claims_text(&pair.before) == normalize_claims_text(after);
    match (identical, pair.reasons.is_empty()) {
        (true, true) => PairType::Type2,
        (true, false) => PairType::Type3,
        (false, true) => PairType::Type4,
        (false, false) => PairType::Type5,
    }
}

/// Per-type corpus statistics. Averages cover the granted text (the
/// pre-examination text for Type 1). Percent changes are fractions
/// (−0.125 = −12.5%), averaged per application; applications whose
/// before-text has zero characters (or zero claims) are excluded from the
/// corresponding mean and counted in the `*_excluded` fields. Type 1 has
/// no grant to compare, so its percent changes are null.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeStats {
    pub freq: usize,
    pub avg_chars: f64,
    pub avg_claims: f64,
    pub pct_chars: Option<f64>,
    pub pct_claims: Option<f64>,
    pub pct_chars_excluded: usize,
    pub pct_claims_excluded: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub total: usize,
    pub types: BTreeMap<PairType, TypeStats>,
}

pub fn compute_stats(pairs: &[RewritePair]) -> CorpusStats {
    #[derive(Default)]
    struct Accumulator {
        freq: usize,
        chars: f64,
        claims: f64,
        pct_chars: Vec<f64>,
        pct_claims: Vec<f64>,
        pct_chars_excluded: usize,
        pct_claims_excluded: usize,
    }

    let mut acc: BTreeMap<PairType, Accumulator> = PairType::ALL
        .iter()
        .map(|&t| (t, Accumulator::default()))
        .collect();

    for pair in pairs {
        let pair_type = classify_type(pair);
        let slot = acc.get_mut(&pair_type).expect("all types preset");
        slot.freq += 1;

        let before = normalize_claims_text(&pair.before);
        let subject = match &pair.after {
            Some(after) => normalize_claims_text(after),
            None => before.clone(),
        };
        let subject_chars = subject.chars().count();
        let subject_claims = count_claim_headers(&subject);
        slot.chars += subject_chars as f64;
        slot.claims += subject_claims as f64;

        if pair.after.is_some() {
            let before_chars = before.chars().count();
            let before_claims = count_claim_headers(&before);
            if before_chars == 0 {
                slot.pct_chars_excluded += 1;
            } else {
                slot.pct_chars
                    .push((subject_chars as f64 - before_chars as f64) / before_chars as f64);
            }
            if before_claims == 0 {
                slot.pct_claims_excluded += 1;
            } else {
                slot.pct_claims
                    .push((subject_claims as f64 - before_claims as f64) / before_claims as f64);
            }
        }
    }

    let types = acc
        .into_iter()
        .map(|(pair_type, a)| {
            let mean = |values: &[f64]| {
                if values.is_empty() {
                    None
                } else {
                    Some(values.iter().sum::<f64>() / values.len() as f64)
                }
            };
            let stats = TypeStats {
                freq: a.freq,
                avg_chars: if a.freq > 0 { a.chars / a.freq as f64 } else { 0.0 },
                avg_claims: if a.freq > 0 { a.claims / a.freq as f64 } else { 0.0 },
                pct_chars: mean(&a.pct_chars),
                pct_claims: mean(&a.pct_claims),
                pct_chars_excluded: a.pct_chars_excluded,
                pct_claims_excluded: a.pct_claims_excluded,
            };
            (pair_type, stats)
        })
        .collect();

    CorpusStats {
        total: pairs.len(),
        types,
    }
}

/// Keeps pairs whose combined before/after length, in characters, is at
/// most `max_units` (inclusive).
pub fn filter_by_length(pairs: &[RewritePair], max_units: usize) -> Vec<RewritePair> {
    pairs
        .iter()
        .filter(|p| {
            let units = p.before.chars().count()
                + p.after.as_deref().map_or(0, |a| a.chars().count());
            units <= max_units
        })
        .cloned()
        .collect()
}

/// The (train, valid, test) portions of a split corpus.
pub type DatasetSplits = (Vec<RewritePair>, Vec<RewritePair>, Vec<RewritePair>);

/// Seed-deterministic shuffled split into (train, valid, test). Inputs
/// must have unique application numbers, which makes the splits disjoint
/// by application; pairs beyond the requested sizes are dropped.
pub fn split_dataset(
    pairs: &[RewritePair],
    sizes: (usize, usize, usize),
    seed: u64,
) -> Result<DatasetSplits, CorpusError> {
    let (train, valid, test) = sizes;
    let requested = train + valid + test;
    if requested > pairs.len() {
        return Err(CorpusError::InsufficientData {
            requested,
            available: pairs.len(),
        });
    }
    let mut shuffled: Vec<RewritePair> = pairs.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);
    let test_split = shuffled.split_off(train + valid);
    let valid_split = shuffled.split_off(train);
    let mut test_split = test_split;
    test_split.truncate(test);
    Ok((shuffled, valid_split, test_split))
}

// ---------------------------------------------------------------------------
// Refusal-reason labels

/// A parsed refusal-reason label like
/// `22:第29条第1項|第29条第2項|第29条第1項+第29条第2項`: a numeric code,
/// then provision alternatives separated by `|`, each alternative a `+`
/// conjunction of provisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReasonLabel {
    pub code: String,
    pub alternatives: Vec<Vec<String>>,
}

/// Splits a refusal-reason label into its code and provision alternatives.
/// A label without `:` is all code with no alternatives.
pub fn parse_reason_label(label: &str) -> ReasonLabel {
    match label.split_once(':') {
        None => ReasonLabel {
            code: label.trim().to_string(),
            alternatives: Vec::new(),
        },
        Some((code, rest)) => {
            let alternatives = rest
                .split('|')
                .filter(|alt| !alt.trim().is_empty())
                .map(|alt| {
                    alt.split('+')
                        .map(|p| p.trim().to_string())
                        .filter(|p| !p.is_empty())
                        .collect()
                })
                .collect();
            ReasonLabel {
                code: code.trim().to_string(),
                alternatives,
            }
        }
    }
}

// ---------------------------------------------------------------------------
// JSONL I/O

/// Reads one JSON value per non-blank line. Parse failures report the
/// 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CorpusError> {
    let reader = BufReader::new(File::open(path)?);
    let mut items = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| CorpusError::Parse {
            line: index + 1,
            message: e.to_string(),
        })?;
        items.push(item);
    }
    Ok(items)
}

/// Writes one JSON value per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CorpusError> {
    let mut writer = BufWriter::new(File::create(path)?);
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| CorpusError::Parse {
            line: 0,
            message: e.to_string(),
        })?;
        writer.write_all(line.as_bytes())?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_records(path: &Path) -> Result<Vec<DocumentRecord>, CorpusError> {
    read_jsonl(path)
}

pub fn write_records(path: &Path, records: &[DocumentRecord]) -> Result<(), CorpusError> {
    write_jsonl(path, records)
}

pub fn read_pairs(path: &Path) -> Result<Vec<RewritePair>, CorpusError> {
    read_jsonl(path)
}

pub fn write_pairs(path: &Path, pairs: &[RewritePair]) -> Result<(), CorpusError> {
    write_jsonl(path, pairs)
}
