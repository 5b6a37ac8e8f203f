//! C ABI over the claim toolkit: parse claim text into an opaque handle,
//! classify and rewrite claims, score rewrites with GLEU/SARI, and build
//! rewriting prompts. The matching header is generated into
//! `include/claimkit.h` at build time.
//!
//! Conventions: functions that produce a value return it (null / a negative
//! code on failure) and record a message retrievable with [`ck_last_error`];
//! functions that fill an out-parameter return [`CK_OK`] or a negative code.
//! Every `char*` returned to the caller is owned by the caller and must be
//! released with [`ck_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::fmt::Display;

use claimkit::align::build_prompt;
use claimkit::baselines::{rewrite_copy, rewrite_dmmc, rewrite_rdc};
use claimkit::claims::{
    classify_claim, parse_claims_with, serialize_claims, ClaimCategory, ClaimSet, HeaderStyle,
};
use claimkit::metrics::{gleu, sari, segment, SegMode};

/// Success.
pub const CK_OK: c_int = 0;
/// A required pointer argument was null.
pub const CK_ERR_NULL_ARGUMENT: c_int = -1;
/// A string argument was not valid UTF-8.
pub const CK_ERR_INVALID_UTF8: c_int = -2;
/// A flag argument was outside its documented range.
pub const CK_ERR_INVALID_FLAG: c_int = -3;
/// The claim number does not exist in the set.
pub const CK_ERR_UNKNOWN_CLAIM: c_int = -4;
/// The metric is undefined for the given input.
pub const CK_ERR_METRIC: c_int = -5;

/// `ck_classify_claim`: no references to other claims.
pub const CK_CATEGORY_INDEPENDENT: c_int = 0;
/// `ck_classify_claim`: refers to exactly one claim.
pub const CK_CATEGORY_DEPENDENT_SINGLE: c_int = 1;
/// `ck_classify_claim`: refers to several claims in the alternative.
pub const CK_CATEGORY_DEPENDENT_MULTI: c_int = 2;
/// `ck_classify_claim`: multiple dependent claim that depends on another
/// multiple dependent claim.
pub const CK_CATEGORY_MULTI_MULTI: c_int = 3;

/// `ck_parse_claims` style flag: pick the header syntax found in the text.
pub const CK_STYLE_AUTO: c_int = 0;
/// `ck_parse_claims` style flag: `【請求項N】` headers.
pub const CK_STYLE_FULL_WIDTH: c_int = 1;
/// `ck_parse_claims` style flag: `[Claim N]` headers.
pub const CK_STYLE_ASCII: c_int = 2;

/// `ck_rewrite` baseline flag: reproduce the claims unchanged.
pub const CK_BASELINE_COPY: c_int = 0;
/// `ck_rewrite` baseline flag: delete one random claim (never claim 1)
/// together with everything depending on it.
pub const CK_BASELINE_RDC: c_int = 1;
/// `ck_rewrite` baseline flag: delete every claim multiply dependent on a
/// multiple dependent claim, together with everything depending on it.
pub const CK_BASELINE_DMMC: c_int = 2;

/// `ck_gleu`/`ck_sari` segmentation flag: character/word tokens.
pub const CK_SEG_WORD: c_int = 0;
/// `ck_gleu`/`ck_sari` segmentation flag: clause-level phrase tokens.
pub const CK_SEG_PHRASE: c_int = 1;

/// Parsed claim set behind the C interface. Never instantiated from C;
/// obtained from `ck_parse_claims` and released with `ck_claimset_free`.
#[allow(non_camel_case_types)]
pub struct ck_claimset {
    inner: ClaimSet,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Display) {
    let owned = CString::new(message.to_string())
        .unwrap_or_else(|_| CString::new("error message contained a NUL byte").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(owned));
}

fn clear_last_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Message for the most recent failure on this thread, or null if the last
/// call succeeded. The pointer stays valid until the next failing call on
/// the same thread; do not free it.
#[no_mangle]
pub extern "C" fn ck_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(std::ptr::null(), |message| message.as_ptr())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must have been returned by a `ck_` function that documents caller
/// ownership, and must not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn ck_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// # Safety
/// `ptr` must be null or a readable NUL-terminated string.
unsafe fn utf8_arg<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, c_int> {
    if ptr.is_null() {
        set_last_error(format!("{name} must not be null"));
        return Err(CK_ERR_NULL_ARGUMENT);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_last_error(format!("{name} is not valid UTF-8"));
        CK_ERR_INVALID_UTF8
    })
}

fn owned_c_string(text: String) -> *mut c_char {
    match CString::new(text) {
        Ok(owned) => owned.into_raw(),
        Err(_) => {
            set_last_error("output contained a NUL byte");
            std::ptr::null_mut()
        }
    }
}

fn seg_mode(mode: c_int) -> Result<SegMode, c_int> {
    match mode {
        CK_SEG_WORD => Ok(SegMode::Word),
        CK_SEG_PHRASE => Ok(SegMode::Phrase),
        other => {
            set_last_error(format!("unknown segmentation flag {other}"));
            Err(CK_ERR_INVALID_FLAG)
        }
    }
}

/// Parses claim text into a set handle. `style` is one of the `CK_STYLE_*`
/// flags. Returns null on failure; the handle must be released with
/// `ck_claimset_free`.
///
/// # Safety
/// `text` must be null or a readable NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ck_parse_claims(text: *const c_char, style: c_int) -> *mut ck_claimset {
    clear_last_error();
    let text = match unsafe { utf8_arg(text, "text") } {
        Ok(text) => text,
        Err(_) => return std::ptr::null_mut(),
    };
    let style = match style {
        CK_STYLE_AUTO => HeaderStyle::detect(text),
        CK_STYLE_FULL_WIDTH => HeaderStyle::FullWidth,
        CK_STYLE_ASCII => HeaderStyle::Ascii,
        other => {
            set_last_error(format!("unknown style flag {other}"));
            return std::ptr::null_mut();
        }
    };
    match parse_claims_with(text, style) {
        Ok(inner) => Box::into_raw(Box::new(ck_claimset { inner })),
        Err(error) => {
            set_last_error(error);
            std::ptr::null_mut()
        }
    }
}

/// Releases a claim-set handle. Null is ignored.
///
/// # Safety
/// `set` must have come from `ck_parse_claims` and not have been freed
/// already.
#[no_mangle]
pub unsafe extern "C" fn ck_claimset_free(set: *mut ck_claimset) {
    if !set.is_null() {
        drop(unsafe { Box::from_raw(set) });
    }
}

/// Number of claims in the set; 0 if `set` is null (a parsed set always
/// holds at least one claim).
///
/// # Safety
/// `set` must be null or a live handle from `ck_parse_claims`.
#[no_mangle]
pub unsafe extern "C" fn ck_claimset_len(set: *const ck_claimset) -> usize {
    match unsafe { set.as_ref() } {
        Some(set) => set.inner.len(),
        None => {
            set_last_error("set must not be null");
            0
        }
    }
}

/// Dependency category of claim `number`: one of the `CK_CATEGORY_*` values,
/// or a negative error code.
///
/// # Safety
/// `set` must be null or a live handle from `ck_parse_claims`.
#[no_mangle]
pub unsafe extern "C" fn ck_classify_claim(set: *const ck_claimset, number: u32) -> c_int {
    clear_last_error();
    let Some(set) = (unsafe { set.as_ref() }) else {
        set_last_error("set must not be null");
        return CK_ERR_NULL_ARGUMENT;
    };
    match classify_claim(&set.inner, number) {
        Ok(ClaimCategory::Independent) => CK_CATEGORY_INDEPENDENT,
        Ok(ClaimCategory::DependentSingle) => CK_CATEGORY_DEPENDENT_SINGLE,
        Ok(ClaimCategory::DependentMulti) => CK_CATEGORY_DEPENDENT_MULTI,
        Ok(ClaimCategory::MultiMulti) => CK_CATEGORY_MULTI_MULTI,
        Err(error) => {
            set_last_error(error);
            CK_ERR_UNKNOWN_CLAIM
        }
    }
}

/// Renders the set back to claim text in its header style. Returns a string
/// owned by the caller (release with `ck_string_free`), or null on failure.
///
/// # Safety
/// `set` must be null or a live handle from `ck_parse_claims`.
#[no_mangle]
pub unsafe extern "C" fn ck_serialize_claims(set: *const ck_claimset) -> *mut c_char {
    clear_last_error();
    let Some(set) = (unsafe { set.as_ref() }) else {
        set_last_error("set must not be null");
        return std::ptr::null_mut();
    };
    owned_c_string(serialize_claims(&set.inner))
}

/// Applies a rewriting baseline (a `CK_BASELINE_*` flag; `seed` feeds the
/// random choice in `CK_BASELINE_RDC` and is ignored otherwise) and returns
/// the rewritten claim text. The string is owned by the caller (release
/// with `ck_string_free`); null on failure.
///
/// # Safety
/// `set` must be null or a live handle from `ck_parse_claims`.
#[no_mangle]
pub unsafe extern "C" fn ck_rewrite(
    set: *const ck_claimset,
    baseline: c_int,
    seed: u64,
) -> *mut c_char {
    clear_last_error();
    let Some(set) = (unsafe { set.as_ref() }) else {
        set_last_error("set must not be null");
        return std::ptr::null_mut();
    };
    let result = match baseline {
        CK_BASELINE_COPY => Ok(rewrite_copy(&set.inner)),
        CK_BASELINE_RDC => rewrite_rdc(&set.inner, seed),
        CK_BASELINE_DMMC => rewrite_dmmc(&set.inner),
        other => {
            set_last_error(format!("unknown baseline flag {other}"));
            return std::ptr::null_mut();
        }
    };
    match result {
        Ok(rewritten) => owned_c_string(serialize_claims(&rewritten.output)),
        Err(error) => {
            set_last_error(error);
            std::ptr::null_mut()
        }
    }
}

/// Token sequences for (source, reference, hypothesis).
type MetricTokens = (Vec<String>, Vec<String>, Vec<String>);

/// # Safety
/// All three pointers must be null or readable NUL-terminated strings.
unsafe fn metric_args(
    source: *const c_char,
    reference: *const c_char,
    hypothesis: *const c_char,
    mode: c_int,
    out_score: *mut f64,
) -> Result<MetricTokens, c_int> {
    if out_score.is_null() {
        set_last_error("out_score must not be null");
        return Err(CK_ERR_NULL_ARGUMENT);
    }
    let source = unsafe { utf8_arg(source, "source") }?;
    let reference = unsafe { utf8_arg(reference, "reference") }?;
    let hypothesis = unsafe { utf8_arg(hypothesis, "hypothesis") }?;
    let mode = seg_mode(mode)?;
    Ok((
        segment(source, mode).tokens,
        segment(reference, mode).tokens,
        segment(hypothesis, mode).tokens,
    ))
}

/// Sentence-level GLEU (n-grams up to 4) of `hypothesis` against
/// `reference` given `source`, under the `CK_SEG_*` segmentation `mode`.
/// Writes the score to `out_score` and returns `CK_OK`, or returns a
/// negative error code.
///
/// # Safety
/// The text pointers must be null or readable NUL-terminated strings, and
/// `out_score` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ck_gleu(
    source: *const c_char,
    reference: *const c_char,
    hypothesis: *const c_char,
    mode: c_int,
    out_score: *mut f64,
) -> c_int {
    clear_last_error();
    let (source, reference, hypothesis) =
        match unsafe { metric_args(source, reference, hypothesis, mode, out_score) } {
            Ok(tokens) => tokens,
            Err(code) => return code,
        };
    match gleu(&source, &reference, &hypothesis, 4) {
        Ok(score) => {
            unsafe { *out_score = score };
            CK_OK
        }
        Err(error) => {
            set_last_error(error);
            CK_ERR_METRIC
        }
    }
}

/// SARI (n-grams up to 4) of `hypothesis` against `reference` given
/// `source`, under the `CK_SEG_*` segmentation `mode`. Writes the score to
/// `out_score` and returns `CK_OK`, or returns a negative error code.
///
/// # Safety
/// The text pointers must be null or readable NUL-terminated strings, and
/// `out_score` null or writable.
#[no_mangle]
pub unsafe extern "C" fn ck_sari(
    source: *const c_char,
    reference: *const c_char,
    hypothesis: *const c_char,
    mode: c_int,
    out_score: *mut f64,
) -> c_int {
    clear_last_error();
    let (source, reference, hypothesis) =
        match unsafe { metric_args(source, reference, hypothesis, mode, out_score) } {
            Ok(tokens) => tokens,
            Err(code) => return code,
        };
    unsafe { *out_score = sari(&source, &reference, &hypothesis, 4).score };
    CK_OK
}

/// Chat-formatted rewriting prompt for the given claim text and refusal
/// reasons (`reasons` is an array of `reasons_len` strings; pass null with
/// length 0 for none). The string is owned by the caller (release with
/// `ck_string_free`); null on failure.
///
/// # Safety
/// `claims` must be null or a readable NUL-terminated string; `reasons`
/// must be null or point to `reasons_len` readable NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ck_build_prompt(
    claims: *const c_char,
    reasons: *const *const c_char,
    reasons_len: usize,
) -> *mut c_char {
    clear_last_error();
    let claims = match unsafe { utf8_arg(claims, "claims") } {
        Ok(claims) => claims,
        Err(_) => return std::ptr::null_mut(),
    };
    if reasons.is_null() && reasons_len > 0 {
        set_last_error("reasons must not be null when reasons_len > 0");
        return std::ptr::null_mut();
    }
    let mut owned_reasons = Vec::with_capacity(reasons_len);
    for offset in 0..reasons_len {
        let entry = unsafe { *reasons.add(offset) };
        match unsafe { utf8_arg(entry, "reasons entry") } {
            Ok(reason) => owned_reasons.push(reason.to_string()),
            Err(_) => return std::ptr::null_mut(),
        }
    }
    owned_c_string(build_prompt(claims, &owned_reasons))
}
