//! C ABI over the kompet core.
//!
//! Every fallible function returns a [`KompetStatus`] and writes its result
//! through an out-pointer. On failure the message is available from
//! [`kompet_last_error_message`] on the same thread. Coarse labels cross the
//! boundary as indices into the fixed label order; see [`kompet_label_tag`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;

use kompet::agreement::cohen_kappa_labels;
use kompet::corpus::SpanKind;
use kompet::evaluate::weighted_macro_f1;
use kompet::matcher::{fetch_skill, levenshtein, retrieve_candidates};
use kompet::significance::{aso, AsoOptions, ScoreSample};
use kompet::taxonomy::{load_taxonomy_file, CoarseLabel, TaxonomyIndex};
use kompet::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KompetStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A file could not be read.
    Io = 3,
    /// Malformed input data, an unknown label or an out-of-range argument.
    InvalidInput = 4,
    /// The computation is undefined for the given data (e.g. kappa with no chance disagreement).
    Undefined = 5,
    /// Internal failure; the call had no effect.
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KompetSpanKind {
    Skill = 0,
    Knowledge = 1,
}

/// Loaded taxonomy snapshot. Create with [`kompet_taxonomy_load`], release with [`kompet_taxonomy_free`].
pub struct KompetTaxonomy {
    index: TaxonomyIndex,
}

/// Outcome of labeling one span.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KompetSpanLabel {
    /// Index of the coarse label (see `kompet_label_tag`).
    pub label: u32,
    /// True when no candidate matched and the label is the K99 fallback.
    pub missing: bool,
    /// Edit distance of the best match; meaningless when `missing`.
    pub distance: usize,
    /// Candidates retrieved before the rerank.
    pub candidates: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct KompetAsoResult {
    pub epsilon_hat: f64,
    pub sigma_boot: f64,
    pub epsilon_min: f64,
    pub dominant: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(KompetStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => KompetStatus::Io,
            Error::UndefinedKappa { .. } => KompetStatus::Undefined,
            _ => KompetStatus::InvalidInput,
        };
        Failure(status, e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> KompetStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            KompetStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            KompetStatus::Panic
        }
    }
}

fn null(name: &str) -> Failure {
    Failure(KompetStatus::NullPointer, format!("{name} is null"))
}

unsafe fn text<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(KompetStatus::InvalidUtf8, format!("{name} is not valid UTF-8")))
}

unsafe fn slice<'a, T>(ptr: *const T, len: usize, name: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn write<T>(out: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

fn label_index(label: CoarseLabel) -> u32 {
    CoarseLabel::ALL.iter().position(|l| *l == label).unwrap() as u32
}

fn label_at(index: u32) -> Result<CoarseLabel, Failure> {
    CoarseLabel::ALL
        .get(index as usize)
        .copied()
        .ok_or_else(|| Failure(KompetStatus::InvalidInput, format!("label index {index} out of range")))
}

fn tags() -> &'static [CString] {
    static TAGS: OnceLock<Vec<CString>> = OnceLock::new();
    TAGS.get_or_init(|| CoarseLabel::ALL.iter().map(|l| CString::new(l.tag()).unwrap()).collect())
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next kompet call on the same thread.
#[no_mangle]
pub extern "C" fn kompet_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn kompet_version() -> *const c_char {
    static VERSION: OnceLock<CString> = OnceLock::new();
    VERSION.get_or_init(|| CString::new(env!("CARGO_PKG_VERSION")).unwrap()).as_ptr()
}

/// Number of coarse labels; valid indices are `0..kompet_label_count()`.
#[no_mangle]
pub extern "C" fn kompet_label_count() -> u32 {
    CoarseLabel::ALL.len() as u32
}

/// Static tag (e.g. "K06") of a label index, or null when out of range.
#[no_mangle]
pub extern "C" fn kompet_label_tag(index: u32) -> *const c_char {
    tags().get(index as usize).map_or(std::ptr::null(), |c| c.as_ptr())
}

/// Index of a label tag.
///
/// # Safety
/// `tag` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kompet_label_index(tag: *const c_char, out: *mut u32) -> KompetStatus {
    guard(|| {
        let label: CoarseLabel = text(tag, "tag")?.parse()?;
        write(out, label_index(label), "out")
    })
}

/// Character-level edit distance.
///
/// # Safety
/// `a` and `b` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kompet_levenshtein(a: *const c_char, b: *const c_char, out: *mut usize) -> KompetStatus {
    guard(|| {
        let d = levenshtein(text(a, "a")?, text(b, "b")?);
        write(out, d, "out")
    })
}

/// Load a JSON-lines taxonomy snapshot indexed for `language`.
///
/// # Safety
/// `path` and `language` must be NUL-terminated strings; `out` must be writable.
/// The handle written to `out` must be released with `kompet_taxonomy_free`.
#[no_mangle]
pub unsafe extern "C" fn kompet_taxonomy_load(
    path: *const c_char,
    language: *const c_char,
    out: *mut *mut KompetTaxonomy,
) -> KompetStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let index = load_taxonomy_file(text(path, "path")?, text(language, "language")?)?;
        out.write(Box::into_raw(Box::new(KompetTaxonomy { index })));
        Ok(())
    })
}

/// Release a taxonomy handle. Null is ignored.
///
/// # Safety
/// `taxonomy` must come from `kompet_taxonomy_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn kompet_taxonomy_free(taxonomy: *mut KompetTaxonomy) {
    if !taxonomy.is_null() {
        drop(Box::from_raw(taxonomy));
    }
}

/// Number of concepts in a loaded taxonomy (0 for null).
///
/// # Safety
/// `taxonomy` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn kompet_taxonomy_len(taxonomy: *const KompetTaxonomy) -> usize {
    taxonomy.as_ref().map_or(0, |t| t.index.len())
}

/// Distantly label one span surface: retrieve `k` candidates, rerank by edit
/// distance, map the winner to its coarse label; K99 with `missing` when nothing matches.
///
/// # Safety
/// `taxonomy` must be a live handle, `surface` a NUL-terminated string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn kompet_label_span(
    taxonomy: *const KompetTaxonomy,
    surface: *const c_char,
    kind: KompetSpanKind,
    k: usize,
    out: *mut KompetSpanLabel,
) -> KompetStatus {
    guard(|| {
        let taxonomy = taxonomy.as_ref().ok_or_else(|| null("taxonomy"))?;
        let surface = text(surface, "surface")?;
        let kind = match kind {
            KompetSpanKind::Skill => SpanKind::Skill,
            KompetSpanKind::Knowledge => SpanKind::Knowledge,
        };
        let index = &taxonomy.index;
        let candidates = retrieve_candidates(surface, kind, index, k);
        let found = fetch_skill(surface, kind, candidates.iter().map(|c| c.concept), index.language());
        let mut result = KompetSpanLabel {
            label: label_index(CoarseLabel::K99),
            missing: true,
            distance: 0,
            candidates: candidates.len(),
        };
        if let Some(m) = found {
            result.distance = m.distance;
            if let Some(label) = index.coarse_label(&m.concept.code) {
                result.label = label_index(label);
                result.missing = false;
            }
        }
        write(out, result, "out")
    })
}

/// Support-weighted macro F1 over label indices.
///
/// # Safety
/// `gold` and `pred` must point to `n` readable elements each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kompet_weighted_macro_f1(
    gold: *const u32,
    pred: *const u32,
    n: usize,
    out: *mut f64,
) -> KompetStatus {
    guard(|| {
        let gold = slice(gold, n, "gold")?.iter().map(|&i| label_at(i)).collect::<Result<Vec<_>, _>>()?;
        let pred = slice(pred, n, "pred")?.iter().map(|&i| label_at(i)).collect::<Result<Vec<_>, _>>()?;
        let report = weighted_macro_f1(&gold, &pred)?;
        write(out, report.weighted_macro_f1, "out")
    })
}

/// Cohen's kappa between two raters over arbitrary integer categories.
///
/// # Safety
/// `a` and `b` must point to `n` readable elements each; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kompet_cohen_kappa(a: *const u32, b: *const u32, n: usize, out: *mut f64) -> KompetStatus {
    guard(|| {
        let k = cohen_kappa_labels(slice(a, n, "a")?, slice(b, n, "b")?)?;
        write(out, k.kappa, "out")
    })
}

/// Almost stochastic order test of `a` over `b`.
///
/// # Safety
/// `a` and `b` must point to `na` and `nb` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn kompet_aso(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    alpha: f64,
    grid_size: usize,
    bootstrap_iters: usize,
    seed: u64,
    out: *mut KompetAsoResult,
) -> KompetStatus {
    guard(|| {
        let a = ScoreSample::new("a", slice(a, na, "a")?.to_vec())?;
        let b = ScoreSample::new("b", slice(b, nb, "b")?.to_vec())?;
        let options = AsoOptions {
            grid_size,
            bootstrap_iters,
            seed,
            ..AsoOptions::default()
        };
        let r = aso(&a, &b, alpha, &options)?;
        let result = KompetAsoResult {
            epsilon_hat: r.epsilon_hat,
            sigma_boot: r.sigma_boot,
            epsilon_min: r.epsilon_min,
            dominant: r.dominant,
        };
        write(out, result, "out")
    })
}
