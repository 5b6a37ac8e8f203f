//! Claim-section parsing and dependency structure.
//!
//! A claims section is a sequence of numbered claims, each introduced by a
//! header — `【請求項N】` in the standard full-width form, or `[Claim N]`
//! in ASCII fallback mode. Claim bodies are opaque text except for citation
//! phrases (`請求項1又は2に記載の…`, `any one of claims 1 to 3`, …), which
//! are parsed into a reference list per claim. References distinguish
//! *selective* citations (`又は`/`若しくは`/ranges/`or`, and bare single
//! citations) from *conjunctive* ones (`及び`).
//!
//! A claim selectively citing two or more claims is a *multi* claim; a multi
//! claim that selectively cites another multi claim is a *multi-multi*
//! claim.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClaimsError {
    #[error("malformed claims: {0}")]
    MalformedClaims(String),
    #[error("unknown claim number {0}")]
    UnknownClaim(u32),
}

/// Header syntax accepted by the parser and emitted by the serializer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeaderStyle {
    /// `【請求項N】` with full-width brackets.
    #[default]
    FullWidth,
    /// `[Claim N]` fallback.
    Ascii,
}

impl HeaderStyle {
    /// Picks the style whose headers appear in `text` (full-width wins when
    /// both or neither appear).
    pub fn detect(text: &str) -> HeaderStyle {
        if text.contains("【請求項") {
            HeaderStyle::FullWidth
        } else if text.contains("[Claim ") {
            HeaderStyle::Ascii
        } else {
            HeaderStyle::FullWidth
        }
    }
}

/// One citation target with its selectivity flag (true = disjunctive).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClaimRef {
    pub target: u32,
    pub selective: bool,
}

/// Syntactic shape of a citation phrase, kept so deletion rewrites can
/// regenerate the phrase in its original form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum RefForm {
    /// `請求項N`, `請求項N又はM…`, `請求項N及びM…`
    JpChain,
    /// `請求項NからMまでのいずれか(一項)`
    JpRangeKara,
    /// `請求項N乃至M`
    JpRangeNaishi,
    /// `Claim N`, `Claim N or M…`
    AsciiChain,
    /// `any one of claims N to M`
    AsciiRange,
}

/// A citation phrase found in a claim body: its byte span within the body,
/// its syntactic form, and the cited targets in phrase order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct RefPhrase {
    pub(crate) start: usize,
    pub(crate) end: usize,
    pub(crate) form: RefForm,
    pub(crate) targets: Vec<ClaimRef>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub number: u32,
    pub body: String,
    /// Distinct citation targets in first-occurrence order. A target cited
    /// by several phrases is selective if any citing phrase is.
    pub refs: Vec<ClaimRef>,
    pub(crate) phrases: Vec<RefPhrase>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClaimCategory {
    Independent,
    DependentSingle,
    DependentMulti,
    MultiMulti,
}

impl fmt::Display for ClaimCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ClaimCategory::Independent => "independent",
            ClaimCategory::DependentSingle => "dependent-single",
            ClaimCategory::DependentMulti => "dependent-multi",
            ClaimCategory::MultiMulti => "multi-multi",
        };
        f.write_str(name)
    }
}

/// An ordered, contiguously numbered collection of claims.
///
/// Construction always goes through body scanning, so every `ClaimSet`
/// satisfies: numbers are exactly `1..=len`, citation targets precede the
/// citing claim, and `parse(serialize(set))` reproduces the same claims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClaimSet {
    claims: Vec<Claim>,
    raw_text: String,
    style: HeaderStyle,
}

impl ClaimSet {
    /// Builds a set from claim bodies; body `i` becomes claim `i + 1`.
    /// References are derived by scanning each body.
    pub fn from_numbered_bodies<S: Into<String>>(
        bodies: Vec<S>,
        style: HeaderStyle,
    ) -> Result<ClaimSet, ClaimsError> {
        if bodies.is_empty() {
            return Err(ClaimsError::MalformedClaims(
                "a claim set needs at least one claim".into(),
            ));
        }
        let mut claims = Vec::with_capacity(bodies.len());
        for (i, body) in bodies.into_iter().enumerate() {
            let number = (i + 1) as u32;
            claims.push(build_claim(number, body.into())?);
        }
        let mut set = ClaimSet {
            claims,
            raw_text: String::new(),
            style,
        };
        set.raw_text = serialize_claims(&set);
        Ok(set)
    }

    pub fn claims(&self) -> &[Claim] {
        &self.claims
    }

    pub fn get(&self, number: u32) -> Option<&Claim> {
        if number == 0 {
            return None;
        }
        self.claims.get(number as usize - 1)
    }

    pub fn len(&self) -> usize {
        self.claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }

    pub fn style(&self) -> HeaderStyle {
        self.style
    }

    /// The text this set was parsed from (canonical serialization for
    /// constructed sets).
    pub fn raw_text(&self) -> &str {
        &self.raw_text
    }

    /// Equality on the parsed structure only, ignoring the original text.
    pub fn structurally_equal(&self, other: &ClaimSet) -> bool {
        self.claims == other.claims
    }
}

fn build_claim(number: u32, body: String) -> Result<Claim, ClaimsError> {
    let phrases = scan_ref_phrases(&body)?;
    let mut refs: Vec<ClaimRef> = Vec::new();
    for phrase in &phrases {
        for r in &phrase.targets {
            if r.target == 0 || r.target >= number {
                return Err(ClaimsError::MalformedClaims(format!(
                    "claim {number} cites claim {}, but claims may cite only earlier claims",
                    r.target
                )));
            }
            match refs.iter_mut().find(|e| e.target == r.target) {
                Some(existing) => existing.selective |= r.selective,
                None => refs.push(*r),
            }
        }
    }
    Ok(Claim {
        number,
        body,
        refs,
        phrases,
    })
}

// ---------------------------------------------------------------------------
// Parsing

/// Parses a claims section with full-width `【請求項N】` headers.
pub fn parse_claims(text: &str) -> Result<ClaimSet, ClaimsError> {
    parse_claims_with(text, HeaderStyle::FullWidth)
}

/// Parses a claims section using the given header style.
///
/// Headers must number the claims exactly `1..=K` in order. Text before the
/// first header (a section title, for instance) is ignored. Each body is the
/// text between its header and the next, with trailing whitespace trimmed.
pub fn parse_claims_with(text: &str, style: HeaderStyle) -> Result<ClaimSet, ClaimsError> {
    let headers = find_headers(text, style);
    if headers.is_empty() {
        return Err(ClaimsError::MalformedClaims(
            "no claim headers found".into(),
        ));
    }
    let mut claims = Vec::with_capacity(headers.len());
    for (i, &(_, body_start, number)) in headers.iter().enumerate() {
        let expected = (i + 1) as u32;
        if number != expected {
            return Err(ClaimsError::MalformedClaims(format!(
                "expected claim header {expected}, found claim header {number}"
            )));
        }
        let body_end = headers
            .get(i + 1)
            .map(|&(next_start, _, _)| next_start)
            .unwrap_or(text.len());
        let body = text[body_start..body_end].trim_end().to_string();
        claims.push(build_claim(number, body)?);
    }
    Ok(ClaimSet {
        claims,
        raw_text: text.to_string(),
        style,
    })
}

/// Returns `(header_start, body_start, number)` for each well-formed header.
fn find_headers(text: &str, style: HeaderStyle) -> Vec<(usize, usize, u32)> {
    let (open, close) = match style {
        HeaderStyle::FullWidth => ("【請求項", "】"),
        HeaderStyle::Ascii => ("[Claim ", "]"),
    };
    let mut headers = Vec::new();
    let mut pos = 0;
    while let Some(found) = text[pos..].find(open) {
        let start = pos + found;
        let digits_from = start + open.len();
        if let Some((number, after_digits)) = parse_claim_number(text, digits_from) {
            if text[after_digits..].starts_with(close) {
                headers.push((start, after_digits + close.len(), number));
                pos = after_digits + close.len();
                continue;
            }
        }
        pos = start + open.len();
    }
    headers
}

/// Parses a claim number at byte offset `from`: one or more ASCII or
/// full-width digits. Returns the value and the offset just past them.
fn parse_claim_number(text: &str, from: usize) -> Option<(u32, usize)> {
    let mut value: u64 = 0;
    let mut end = from;
    let mut any = false;
    for ch in text[from..].chars() {
        let digit = match ch {
            '0'..='9' => ch as u32 - '0' as u32,
            '０'..='９' => ch as u32 - '０' as u32,
            _ => break,
        };
        value = value * 10 + digit as u64;
        if value > u32::MAX as u64 {
            return None;
        }
        end += ch.len_utf8();
        any = true;
    }
    if any {
        Some((value as u32, end))
    } else {
        None
    }
}

/// Counts well-formed claim headers of either style without requiring the
/// section to parse. Used for corpus statistics over raw text.
pub fn count_claim_headers(text: &str) -> usize {
    find_headers(text, HeaderStyle::FullWidth).len() + find_headers(text, HeaderStyle::Ascii).len()
}

// ---------------------------------------------------------------------------
// Citation-phrase scanning

const JP_KEYWORD: &str = "請求項";
const ASCII_SINGLE: &str = "Claim ";
const ASCII_RANGE: &str = "any one of claims ";

fn scan_ref_phrases(body: &str) -> Result<Vec<RefPhrase>, ClaimsError> {
    let mut phrases = Vec::new();
    let mut i = 0;
    while i < body.len() {
        if !body.is_char_boundary(i) {
            i += 1;
            continue;
        }
        let rest = &body[i..];
        if rest.starts_with(JP_KEYWORD) {
            if let Some(phrase) = scan_jp_phrase(body, i)? {
                i = phrase.end;
                phrases.push(phrase);
                continue;
            }
            i += JP_KEYWORD.len();
            continue;
        }
        if rest.starts_with(ASCII_RANGE) {
            if let Some(phrase) = scan_ascii_range(body, i)? {
                i = phrase.end;
                phrases.push(phrase);
                continue;
            }
            i += ASCII_RANGE.len();
            continue;
        }
        if rest.starts_with(ASCII_SINGLE) {
            if let Some(phrase) = scan_ascii_chain(body, i) {
                i = phrase.end;
                phrases.push(phrase);
                continue;
            }
            i += ASCII_SINGLE.len();
            continue;
        }
        i += body[i..].chars().next().map(char::len_utf8).unwrap_or(1);
    }
    Ok(phrases)
}

fn scan_jp_phrase(body: &str, start: usize) -> Result<Option<RefPhrase>, ClaimsError> {
    let Some((first, mut cursor)) = parse_claim_number(body, start + JP_KEYWORD.len()) else {
        return Ok(None);
    };

    // Range form: 請求項NからMまでのいずれか(一項) / 請求項N乃至M
    for (marker, form) in [("から", RefForm::JpRangeKara), ("乃至", RefForm::JpRangeNaishi)] {
        if body[cursor..].starts_with(marker) {
            if let Some((last, mut after))
                = parse_claim_number(body, cursor + marker.len())
            {
                if form == RefForm::JpRangeKara {
                    if body[after..].starts_with("までのいずれか一項") {
                        after += "までのいずれか一項".len();
                    } else if body[after..].starts_with("までのいずれか") {
                        after += "までのいずれか".len();
                    } else {
                        // `から` followed by an unrelated number; not a range.
                        break;
                    }
                }
                let targets = expand_range(first, last, start)?;
                return Ok(Some(RefPhrase {
                    start,
                    end: after,
                    form,
                    targets,
                }));
            }
        }
    }

    // Chain form: numbers joined by 又は / 若しくは / 及び.
    let mut targets = vec![ClaimRef {
        target: first,
        selective: true,
    }];
    loop {
        let rest = &body[cursor..];
        let (connective, selective) = if rest.starts_with("又は") {
            ("又は", true)
        } else if rest.starts_with("若しくは") {
            ("若しくは", true)
        } else if rest.starts_with("及び") {
            ("及び", false)
        } else {
            break;
        };
        let Some((n, after)) = parse_claim_number(body, cursor + connective.len()) else {
            break;
        };
        if targets.len() == 1 {
            // A bare citation is selective; in a chain the first target
            // takes the first connective's selectivity.
            targets[0].selective = selective;
        }
        targets.push(ClaimRef {
            target: n,
            selective,
        });
        cursor = after;
    }
    Ok(Some(RefPhrase {
        start,
        end: cursor,
        form: RefForm::JpChain,
        targets,
    }))
}

fn scan_ascii_chain(body: &str, start: usize) -> Option<RefPhrase> {
    let (first, mut cursor) = parse_claim_number(body, start + ASCII_SINGLE.len())?;
    let mut targets = vec![ClaimRef {
        target: first,
        selective: true,
    }];
    while body[cursor..].starts_with(" or ") {
        let Some((n, after)) = parse_claim_number(body, cursor + " or ".len()) else {
            break;
        };
        targets.push(ClaimRef {
            target: n,
            selective: true,
        });
        cursor = after;
    }
    Some(RefPhrase {
        start,
        end: cursor,
        form: RefForm::AsciiChain,
        targets,
    })
}

fn scan_ascii_range(body: &str, start: usize) -> Result<Option<RefPhrase>, ClaimsError> {
    let Some((first, cursor)) = parse_claim_number(body, start + ASCII_RANGE.len()) else {
        return Ok(None);
    };
    if !body[cursor..].starts_with(" to ") {
        return Ok(None);
    }
    let Some((last, end)) = parse_claim_number(body, cursor + " to ".len()) else {
        return Ok(None);
    };
    let targets = expand_range(first, last, start)?;
    Ok(Some(RefPhrase {
        start,
        end,
        form: RefForm::AsciiRange,
        targets,
    }))
}

fn expand_range(first: u32, last: u32, at: usize) -> Result<Vec<ClaimRef>, ClaimsError> {
    if first > last {
        return Err(ClaimsError::MalformedClaims(format!(
            "descending claim range {first}..{last} at byte {at}"
        )));
    }
    Ok((first..=last)
        .map(|target| ClaimRef {
            target,
            selective: true,
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Classification and closure

/// Categorizes claim `n`: no references → `Independent`; two or more
/// selective references → `DependentMulti`, upgraded to `MultiMulti` when a
/// selectively cited target is itself a multi claim; anything else
/// (single reference, or purely conjunctive multiple references) →
/// `DependentSingle`.
pub fn classify_claim(set: &ClaimSet, n: u32) -> Result<ClaimCategory, ClaimsError> {
    let claim = set.get(n).ok_or(ClaimsError::UnknownClaim(n))?;
    if claim.refs.is_empty() {
        return Ok(ClaimCategory::Independent);
    }
    if !is_multi(set, claim) {
        return Ok(ClaimCategory::DependentSingle);
    }
    let cites_multi = claim
        .refs
        .iter()
        .filter(|r| r.selective)
        .any(|r| set.get(r.target).is_some_and(|t| is_multi(set, t)));
    if cites_multi {
        Ok(ClaimCategory::MultiMulti)
    } else {
        Ok(ClaimCategory::DependentMulti)
    }
}

fn is_multi(_set: &ClaimSet, claim: &Claim) -> bool {
    claim.refs.iter().filter(|r| r.selective).count() >= 2
}

/// Returns the minimal superset of `targets` closed under reverse
/// dependency: any claim referencing a member (directly or transitively,
/// through any reference regardless of selectivity) is included.
pub fn dependents_closure(
    set: &ClaimSet,
    targets: &BTreeSet<u32>,
) -> Result<BTreeSet<u32>, ClaimsError> {
    for &t in targets {
        if set.get(t).is_none() {
            return Err(ClaimsError::UnknownClaim(t));
        }
    }
    let mut closed: BTreeSet<u32> = targets.clone();
    // Claims cite only earlier claims, so one ascending pass reaches the
    // fixpoint: by the time a claim is visited, every claim it cites has
    // already settled.
    for claim in set.claims() {
        if claim.refs.iter().any(|r| closed.contains(&r.target)) {
            closed.insert(claim.number);
        }
    }
    Ok(closed)
}

// ---------------------------------------------------------------------------
// Serialization and deletion rewriting

/// Emits the claims in order, one `【請求項N】body` (or `[Claim N]body`)
/// per claim, joined by newlines.
pub fn serialize_claims(set: &ClaimSet) -> String {
    let mut out = String::new();
    for claim in set.claims() {
        if !out.is_empty() {
            out.push('\n');
        }
        match set.style() {
            HeaderStyle::FullWidth => {
                out.push_str(&format!("【請求項{}】{}", claim.number, claim.body));
            }
            HeaderStyle::Ascii => {
                out.push_str(&format!("[Claim {}]{}", claim.number, claim.body));
            }
        }
    }
    out
}

/// Deletes `deleted` from the set, renumbers the survivors contiguously,
/// and rewrites every citation phrase through the renumbering.
///
/// `deleted` must leave every surviving phrase with at least one surviving
/// target — guaranteed whenever `deleted` is a [`dependents_closure`] — and
/// must not cover the whole set. Phrases that lose some (but not all)
/// targets are regenerated without the lost ones.
pub(crate) fn delete_and_renumber(
    set: &ClaimSet,
    deleted: &BTreeSet<u32>,
) -> Result<(ClaimSet, BTreeMap<u32, u32>), ClaimsError> {
    let survivors: Vec<&Claim> = set
        .claims()
        .iter()
        .filter(|c| !deleted.contains(&c.number))
        .collect();
    assert!(
        !survivors.is_empty(),
        "deletion must leave at least one claim"
    );
    let renumber: BTreeMap<u32, u32> = survivors
        .iter()
        .enumerate()
        .map(|(i, c)| (c.number, (i + 1) as u32))
        .collect();

    let mut bodies = Vec::with_capacity(survivors.len());
    for claim in &survivors {
        let mut body = claim.body.clone();
        for phrase in claim.phrases.iter().rev() {
            let surviving: Vec<ClaimRef> = phrase
                .targets
                .iter()
                .filter(|r| !deleted.contains(&r.target))
                .map(|r| ClaimRef {
                    target: renumber[&r.target],
                    selective: r.selective,
                })
                .collect();
            assert!(
                !surviving.is_empty(),
                "claim {} cites only deleted claims and must itself be deleted",
                claim.number
            );
            let rendered = render_phrase(phrase.form, &surviving);
            body.replace_range(phrase.start..phrase.end, &rendered);
        }
        bodies.push(body);
    }
    let rebuilt = ClaimSet::from_numbered_bodies(bodies, set.style())?;
    Ok((rebuilt, renumber))
}

fn render_phrase(form: RefForm, targets: &[ClaimRef]) -> String {
    let contiguous = targets
        .windows(2)
        .all(|w| w[1].target == w[0].target + 1);
    match form {
        RefForm::JpRangeKara if targets.len() >= 2 && contiguous => format!(
            "請求項{}から{}までのいずれか一項",
            targets[0].target,
            targets[targets.len() - 1].target
        ),
        RefForm::JpRangeNaishi if targets.len() >= 2 && contiguous => format!(
            "請求項{}乃至{}",
            targets[0].target,
            targets[targets.len() - 1].target
        ),
        RefForm::AsciiRange if targets.len() >= 2 && contiguous => format!(
            "any one of claims {} to {}",
            targets[0].target,
            targets[targets.len() - 1].target
        ),
        RefForm::AsciiChain | RefForm::AsciiRange => {
            let mut out = format!("Claim {}", targets[0].target);
            for r in &targets[1..] {
                out.push_str(&format!(" or {}", r.target));
            }
            out
        }
        RefForm::JpChain | RefForm::JpRangeKara | RefForm::JpRangeNaishi => {
            let mut out = format!("請求項{}", targets[0].target);
            for r in &targets[1..] {
                let connective = if r.selective { "又は" } else { "及び" };
                out.push_str(&format!("{connective}{}", r.target));
            }
            out
        }
    }
}
