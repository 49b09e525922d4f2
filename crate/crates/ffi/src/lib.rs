//! C ABI over the eigenkit core.
//!
//! Conventions:
//! - Every fallible call returns an [`EkStatus`]; results come back through
//!   out-pointers. On failure [`ek_last_error`] describes the problem.
//! - Strings are NUL-terminated UTF-8. Strings returned by the library are
//!   owned by the caller and must be released with [`ek_string_free`].
//! - Graphs are opaque [`EkGraph`] handles released with [`ek_graph_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use libc::c_char;

use eigenkit::derivation::{derive_samples, DerivationConfig, Passage, Split};
use eigenkit::graph::{compose, Hop, InfluenceGraph, NodeId, RelationKind, Sign};
use eigenkit::metrics::{self, Polarity, PolarityLexicon};
use eigenkit::templating::render_query_text;

/// Include the passage in rendered queries.
pub const EK_DERIVE_PARAGRAPH: u32 = 1;
/// Emit inverse samples.
pub const EK_DERIVE_REVERSE: u32 = 2;
/// Record hop counts.
pub const EK_DERIVE_HOP: u32 = 4;
pub const EK_DERIVE_ALL: u32 = EK_DERIVE_PARAGRAPH | EK_DERIVE_REVERSE | EK_DERIVE_HOP;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    InvalidArgument = 4,
    UnknownNode = 5,
    InvalidGraph = 6,
    MetricError = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EkRelation {
    Helps = 0,
    Hurts = 1,
    HelpedBy = 2,
    HurtBy = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EkSplit {
    Train = 0,
    Dev = 1,
    Test = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EkPolarity {
    Increasing = 0,
    Decreasing = 1,
    Neutral = 2,
}

/// Opaque influence graph handle.
pub struct EkGraph {
    inner: InfluenceGraph,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

#[derive(Debug)]
struct Fail(EkStatus, String);

type FfiResult<T> = Result<T, Fail>;

fn fail<T>(status: EkStatus, msg: impl Into<String>) -> FfiResult<T> {
    Err(Fail(status, msg.into()))
}

/// Runs `f` with a fresh error slot. A successful call may still leave a
/// message behind (the validation report does).
fn guard(f: impl FnOnce() -> FfiResult<()>) -> EkStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EkStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EkStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(EkStatus::NullPointer, format!("`{name}` is NULL"));
    }
    // SAFETY: caller guarantees a valid NUL-terminated string.
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(EkStatus::InvalidUtf8, format!("`{name}` is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    // SAFETY: caller guarantees `p` is either NULL or valid for writes.
    p.as_mut()
        .ok_or_else(|| Fail(EkStatus::NullPointer, format!("`{name}` is NULL")))
}

unsafe fn graph_arg<'a>(g: *const EkGraph) -> FfiResult<&'a InfluenceGraph> {
    // SAFETY: caller guarantees `g` came from `ek_graph_from_json` and is live.
    g.as_ref()
        .map(|g| &g.inner)
        .ok_or_else(|| Fail(EkStatus::NullPointer, "`graph` is NULL".into()))
}

fn to_c_string(s: String) -> FfiResult<*mut c_char> {
    CString::new(s)
        .map(CString::into_raw)
        .or_else(|_| fail(EkStatus::InvalidArgument, "result contains an interior NUL"))
}

fn relation_of(raw: u32) -> FfiResult<RelationKind> {
    match raw {
        0 => Ok(RelationKind::HELPS),
        1 => Ok(RelationKind::HURTS),
        2 => Ok(RelationKind::HELPED_BY),
        3 => Ok(RelationKind::HURT_BY),
        other => fail(
            EkStatus::InvalidArgument,
            format!("unknown relation code {other}"),
        ),
    }
}

fn relation_code(rel: RelationKind) -> EkRelation {
    match rel {
        RelationKind::HELPS => EkRelation::Helps,
        RelationKind::HURTS => EkRelation::Hurts,
        RelationKind::HELPED_BY => EkRelation::HelpedBy,
        _ => EkRelation::HurtBy,
    }
}

/// Message left by the last call on this thread, or NULL. Set by failures and
/// by [`ek_graph_validate`] when it finds errors. Valid until the next library
/// call on the same thread; do not free.
#[no_mangle]
pub extern "C" fn ek_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library that was not freed yet.
#[no_mangle]
pub unsafe extern "C" fn ek_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: the string came from `CString::into_raw` in this crate.
        drop(CString::from_raw(s));
    }
}

/// Parses one graph line (`{"passage_id", "nodes", "edges"}`).
///
/// # Safety
/// `json` must be a valid C string; `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ek_graph_from_json(
    json: *const c_char,
    out: *mut *mut EkGraph,
) -> EkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = str_arg(json, "json")?;
        let inner: InfluenceGraph =
            serde_json::from_str(text).or_else(|e| fail(EkStatus::ParseError, e.to_string()))?;
        *out = Box::into_raw(Box::new(EkGraph { inner }));
        Ok(())
    })
}

/// # Safety
/// `graph` must be NULL or a live handle from [`ek_graph_from_json`].
#[no_mangle]
pub unsafe extern "C" fn ek_graph_free(graph: *mut EkGraph) {
    if !graph.is_null() {
        // SAFETY: the handle came from `Box::into_raw` in this crate.
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle; out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ek_graph_size(
    graph: *const EkGraph,
    nodes: *mut usize,
    edges: *mut usize,
) -> EkStatus {
    guard(|| {
        let g = graph_arg(graph)?;
        *out_arg(nodes, "nodes")? = g.nodes.len();
        *out_arg(edges, "edges")? = g.edges.len();
        Ok(())
    })
}

/// Counts invariant violations (`errors`) and tolerated findings (`warnings`).
///
/// # Safety
/// `graph` must be a live handle; out-pointers must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ek_graph_validate(
    graph: *const EkGraph,
    errors: *mut usize,
    warnings: *mut usize,
) -> EkStatus {
    guard(|| {
        let g = graph_arg(graph)?;
        let report = g.validate();
        let n_err = report.errors().count();
        *out_arg(errors, "errors")? = n_err;
        *out_arg(warnings, "warnings")? = report.findings.len() - n_err;
        if n_err > 0 {
            set_error(report.to_string());
        }
        Ok(())
    })
}

/// Number of simple paths leaving `source_id` with 1..=`max_hop` edges.
///
/// # Safety
/// `graph` must be a live handle, `source_id` a valid C string, `count` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ek_graph_count_paths(
    graph: *const EkGraph,
    source_id: *const c_char,
    max_hop: u32,
    count: *mut usize,
) -> EkStatus {
    guard(|| {
        let g = graph_arg(graph)?;
        let source = NodeId::new(str_arg(source_id, "source_id")?);
        let hop = Hop::new(max_hop).or_else(|e| fail(EkStatus::InvalidArgument, e.to_string()))?;
        let paths = g
            .enumerate_paths(&source, hop)
            .or_else(|e| fail(EkStatus::UnknownNode, e.to_string()))?;
        *out_arg(count, "count")? = paths.len();
        Ok(())
    })
}

/// Composes `len` signs given as +1 / -1; writes +1 or -1 to `out`.
///
/// # Safety
/// `signs` must point to `len` readable values (may be NULL when `len` is 0).
#[no_mangle]
pub unsafe extern "C" fn ek_compose_signs(signs: *const i8, len: usize, out: *mut i8) -> EkStatus {
    guard(|| {
        let raw: &[i8] = if len == 0 {
            &[]
        } else if signs.is_null() {
            return fail(EkStatus::NullPointer, "`signs` is NULL");
        } else {
            // SAFETY: caller guarantees `len` readable elements.
            std::slice::from_raw_parts(signs, len)
        };
        let parsed = raw
            .iter()
            .map(|&s| match s {
                1 => Ok(Sign::Positive),
                -1 => Ok(Sign::Negative),
                other => fail(
                    EkStatus::InvalidArgument,
                    format!("sign must be +1 or -1, got {other}"),
                ),
            })
            .collect::<FfiResult<Vec<_>>>()?;
        *out_arg(out, "out")? = match compose(parsed) {
            Sign::Positive => 1,
            Sign::Negative => -1,
        };
        Ok(())
    })
}

/// Inverse relation code, or -1 for an unknown code.
#[no_mangle]
pub extern "C" fn ek_relation_invert(relation: u32) -> i32 {
    relation_of(relation).map_or(-1, |r| relation_code(r.invert()) as i32)
}

/// Static surface form ("helps", "is hurt by", ...) or NULL. Do not free.
#[no_mangle]
pub extern "C" fn ek_relation_surface(relation: u32) -> *const c_char {
    let s: &'static [u8] = match relation {
        0 => b"helps\0",
        1 => b"hurts\0",
        2 => b"is helped by\0",
        3 => b"is hurt by\0",
        _ => return ptr::null(),
    };
    s.as_ptr().cast()
}

/// Renders a model query. `passage` may be NULL (paragraph omitted) and
/// `hop` may be 0 (hop clause omitted).
///
/// # Safety
/// String arguments must be valid C strings (or NULL where allowed); `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ek_render_query(
    passage: *const c_char,
    source: *const c_char,
    relation: u32,
    hop: u32,
    out: *mut *mut c_char,
) -> EkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let passage = if passage.is_null() {
            None
        } else {
            Some(str_arg(passage, "passage")?)
        };
        let source = str_arg(source, "source")?;
        let rel = relation_of(relation)?;
        let hop = if hop == 0 {
            None
        } else {
            Some(Hop::new(hop).expect("nonzero"))
        };
        let q = render_query_text(passage, source, rel, hop)
            .or_else(|e| fail(EkStatus::InvalidArgument, e.to_string()))?;
        *out = to_c_string(q.into_string())?;
        Ok(())
    })
}

/// Derives samples for one graph; writes them as JSON lines to `out`.
/// `passage_json` is `{"passage_id", "sentences"}`; `flags` is a bitmask of
/// `EK_DERIVE_*`.
///
/// # Safety
/// `graph` must be a live handle, `passage_json` a valid C string, `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ek_derive_samples(
    graph: *const EkGraph,
    passage_json: *const c_char,
    max_hop: u32,
    flags: u32,
    split: u32,
    out: *mut *mut c_char,
) -> EkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let g = graph_arg(graph)?;
        let passage: Passage = serde_json::from_str(str_arg(passage_json, "passage_json")?)
            .or_else(|e| fail(EkStatus::ParseError, e.to_string()))?;
        let split = match split {
            0 => Split::Train,
            1 => Split::Dev,
            2 => Split::Test,
            other => {
                return fail(
                    EkStatus::InvalidArgument,
                    format!("unknown split code {other}"),
                )
            }
        };
        let cfg = DerivationConfig {
            max_hop: Hop::new(max_hop)
                .or_else(|e| fail(EkStatus::InvalidArgument, e.to_string()))?,
            include_paragraph: flags & EK_DERIVE_PARAGRAPH != 0,
            include_reverse: flags & EK_DERIVE_REVERSE != 0,
            include_hop: flags & EK_DERIVE_HOP != 0,
        };
        let samples = derive_samples(g, &passage, &cfg, split)
            .or_else(|e| fail(EkStatus::InvalidGraph, e.to_string()))?;
        let mut body = String::new();
        for s in &samples {
            body.push_str(&serde_json::to_string(s).expect("sample serializes"));
            body.push('\n');
        }
        *out = to_c_string(body)?;
        Ok(())
    })
}

/// Sentence BLEU-`max_n` (1..4) of `candidate` against `n_refs` references, in [0, 100].
///
/// # Safety
/// `candidate` must be a valid C string, `refs` must point to `n_refs` valid C strings.
#[no_mangle]
pub unsafe extern "C" fn ek_bleu(
    candidate: *const c_char,
    refs: *const *const c_char,
    n_refs: usize,
    max_n: u32,
    out: *mut f64,
) -> EkStatus {
    guard(|| {
        let cand = str_arg(candidate, "candidate")?;
        let ptrs: &[*const c_char] = if n_refs == 0 {
            &[]
        } else if refs.is_null() {
            return fail(EkStatus::NullPointer, "`refs` is NULL");
        } else {
            // SAFETY: caller guarantees `n_refs` readable pointers.
            std::slice::from_raw_parts(refs, n_refs)
        };
        let references = ptrs
            .iter()
            .map(|&p| str_arg(p, "refs[i]"))
            .collect::<FfiResult<Vec<&str>>>()?;
        *out_arg(out, "out")? = metrics::bleu(cand, &references, max_n as usize)
            .or_else(|e| fail(EkStatus::MetricError, e.to_string()))?;
        Ok(())
    })
}

type PairMetric = fn(&str, &str) -> Result<f64, metrics::MetricError>;

unsafe fn pair_metric(
    f: PairMetric,
    candidate: *const c_char,
    reference: *const c_char,
    out: *mut f64,
) -> EkStatus {
    guard(|| {
        let c = str_arg(candidate, "candidate")?;
        let r = str_arg(reference, "reference")?;
        *out_arg(out, "out")? = f(c, r).or_else(|e| fail(EkStatus::MetricError, e.to_string()))?;
        Ok(())
    })
}

/// ROUGE-L F-measure in [0, 100].
///
/// # Safety
/// Both strings must be valid C strings; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ek_rouge_l(
    candidate: *const c_char,
    reference: *const c_char,
    out: *mut f64,
) -> EkStatus {
    pair_metric(metrics::rouge_l, candidate, reference, out)
}

/// Exact-match METEOR in [0, 100].
///
/// # Safety
/// Both strings must be valid C strings; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ek_meteor_simple(
    candidate: *const c_char,
    reference: *const c_char,
    out: *mut f64,
) -> EkStatus {
    pair_metric(metrics::meteor_simple, candidate, reference, out)
}

/// Polarity class of `text` under the default 22-word lexicon.
///
/// # Safety
/// `text` must be a valid C string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ek_polarity_of(text: *const c_char, out: *mut EkPolarity) -> EkStatus {
    guard(|| {
        let t = str_arg(text, "text")?;
        *out_arg(out, "out")? = match metrics::polarity_of(t, &PolarityLexicon::default()) {
            Polarity::Increasing => EkPolarity::Increasing,
            Polarity::Decreasing => EkPolarity::Decreasing,
            Polarity::Neutral => EkPolarity::Neutral,
        };
        Ok(())
    })
}
