//! C ABI for bpmn-eval.
//!
//! Every fallible function returns a [`BpmnEvalStatus`]. On failure a
//! message is available from [`bpmn_eval_last_error`] on the same thread.
//! Strings returned through `char **` outputs are owned by the caller and
//! must be released with [`bpmn_eval_string_free`]; graph handles with
//! [`bpmn_eval_graph_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Duration;

use bpmn_eval::bpmn::to_bpmn_xml;
use bpmn_eval::ged::{ged, r_ged, SearchBudget};
use bpmn_eval::graph::{graph_stats, parse_dot, render_canonical, sanitize_dot, ProcessGraph};
use bpmn_eval::guidelines::{verify_model, GuidelineConfig};
use bpmn_eval::harness::extract::{extract_dot, extract_dot_last};
use bpmn_eval::stats::{bootstrap_ci, chi_square_sf, friedman_test, wilson_interval, Interval};
use bpmn_eval::text_metrics::{text_scores, tokenize};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BpmnEvalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ConversionError = 4,
    InvalidArgument = 5,
    EmptyInput = 6,
    Panic = 7,
}

/// Opaque parsed process graph.
pub struct BpmnGraph {
    inner: ProcessGraph,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BpmnGraphStats {
    pub node_count: usize,
    pub edge_count: usize,
    pub gateway_count: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BpmnGedResult {
    pub cost: f64,
    /// R-GED in [0, 1].
    pub r_ged: f64,
    /// False when `cost` is an upper bound because the search budget ran out.
    pub exact: bool,
    pub expanded_states: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BpmnTextScores {
    pub bleu: f64,
    pub rouge_l: f64,
    pub meteor: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BpmnInterval {
    pub point: f64,
    pub low: f64,
    pub high: f64,
    pub confidence: f64,
    pub point_outside: bool,
}

impl From<Interval> for BpmnInterval {
    fn from(i: Interval) -> Self {
        BpmnInterval { point: i.point, low: i.low, high: i.high, confidence: i.confidence, point_outside: i.point_outside }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct BpmnFriedman {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
    pub w: f64,
    pub n_blocks: usize,
    pub k_treatments: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(BpmnEvalStatus, String);

type FfiResult = Result<(), Failure>;

fn fail(status: BpmnEvalStatus, msg: impl ToString) -> Failure {
    Failure(status, msg.to_string())
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', "\\0")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> FfiResult) -> BpmnEvalStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            BpmnEvalStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {msg}"));
            BpmnEvalStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(BpmnEvalStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| fail(BpmnEvalStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(BpmnEvalStatus::NullPointer, format!("{what} is null")))
}

unsafe fn graph_ref<'a>(p: *const BpmnGraph, what: &str) -> Result<&'a ProcessGraph, Failure> {
    p.as_ref()
        .map(|g| &g.inner)
        .ok_or_else(|| fail(BpmnEvalStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> FfiResult {
    let slot = out_ref(out, "output")?;
    let c = CString::new(s).map_err(|e| fail(BpmnEvalStatus::InvalidArgument, format!("output contains NUL: {e}")))?;
    *slot = c.into_raw();
    Ok(())
}

fn budget(max_expanded: usize, max_millis: u64) -> SearchBudget {
    SearchBudget { max_expanded, max_time: Duration::from_millis(max_millis) }
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library.
#[no_mangle]
pub extern "C" fn bpmn_eval_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `raw` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_sanitize(raw: *const c_char, out: *mut *mut c_char) -> BpmnEvalStatus {
    guard(|| write_string(out, sanitize_dot(read_str(raw, "raw")?)))
}

/// Extracts the first (or, with `last`, the final) diagram in a completion.
///
/// # Safety
/// `raw` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_extract(raw: *const c_char, last: bool, out: *mut *mut c_char) -> BpmnEvalStatus {
    guard(|| {
        let raw = read_str(raw, "raw")?;
        let found = if last { extract_dot_last(raw) } else { extract_dot(raw) };
        write_string(out, found.map_err(|e| fail(BpmnEvalStatus::ParseError, e))?)
    })
}

/// Sanitizes and parses DOT into a new graph handle.
///
/// # Safety
/// `dot` must be a NUL-terminated string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_graph_parse(dot: *const c_char, out: *mut *mut BpmnGraph) -> BpmnEvalStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let g = parse_dot(&sanitize_dot(read_str(dot, "dot")?)).map_err(|e| fail(BpmnEvalStatus::ParseError, e))?;
        *slot = Box::into_raw(Box::new(BpmnGraph { inner: g }));
        Ok(())
    })
}

/// # Safety
/// `graph` must be null or a handle from [`bpmn_eval_graph_parse`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_graph_free(graph: *mut BpmnGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// # Safety
/// `graph` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_graph_stats(graph: *const BpmnGraph, out: *mut BpmnGraphStats) -> BpmnEvalStatus {
    guard(|| {
        let s = graph_stats(graph_ref(graph, "graph")?);
        *out_ref(out, "out")? = BpmnGraphStats {
            node_count: s.node_count,
            edge_count: s.edge_count,
            gateway_count: s.gateway_count,
        };
        Ok(())
    })
}

/// # Safety
/// `graph` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_graph_render(graph: *const BpmnGraph, out: *mut *mut c_char) -> BpmnEvalStatus {
    guard(|| write_string(out, render_canonical(graph_ref(graph, "graph")?)))
}

/// # Safety
/// `graph` must be a live handle; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_graph_to_bpmn_xml(graph: *const BpmnGraph, out: *mut *mut c_char) -> BpmnEvalStatus {
    guard(|| {
        let doc = to_bpmn_xml(graph_ref(graph, "graph")?).map_err(|e| fail(BpmnEvalStatus::ConversionError, e))?;
        write_string(out, doc.xml)
    })
}

/// Graph edit distance and R-GED of `generated` against `reference`.
///
/// # Safety
/// Both graphs must be live handles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_ged(
    reference: *const BpmnGraph,
    generated: *const BpmnGraph,
    max_expanded: usize,
    max_millis: u64,
    out: *mut BpmnGedResult,
) -> BpmnEvalStatus {
    guard(|| {
        let a = graph_ref(reference, "reference")?;
        let b = graph_ref(generated, "generated")?;
        let slot = out_ref(out, "out")?;
        let budget = budget(max_expanded, max_millis);
        let d = ged(a, b, &budget);
        let r = r_ged(a, b, &budget);
        *slot = BpmnGedResult { cost: d.cost, r_ged: r.value, exact: d.exact && r.exact, expanded_states: d.expanded_states };
        Ok(())
    })
}

/// BLEU, ROUGE-L and METEOR (0-100) of a candidate text against a reference.
///
/// # Safety
/// Both strings must be NUL-terminated; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_text_scores(
    candidate: *const c_char,
    reference: *const c_char,
    out: *mut BpmnTextScores,
) -> BpmnEvalStatus {
    guard(|| {
        let c = tokenize(read_str(candidate, "candidate")?);
        let r = tokenize(read_str(reference, "reference")?);
        let slot = out_ref(out, "out")?;
        let s = text_scores(&c, &r).map_err(|e| fail(BpmnEvalStatus::EmptyInput, e))?;
        *slot = BpmnTextScores { bleu: s.bleu, rouge_l: s.rouge_l, meteor: s.meteor };
        Ok(())
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_wilson(
    successes: u64,
    trials: u64,
    confidence: f64,
    out: *mut BpmnInterval,
) -> BpmnEvalStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let i = wilson_interval(successes, trials, confidence).map_err(|e| fail(BpmnEvalStatus::InvalidArgument, e))?;
        *slot = i.into();
        Ok(())
    })
}

/// Percentile bootstrap interval of the mean of `len` values.
///
/// # Safety
/// `values` must point to `len` doubles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_bootstrap(
    values: *const f64,
    len: usize,
    resamples: usize,
    confidence: f64,
    seed: u64,
    out: *mut BpmnInterval,
) -> BpmnEvalStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        if len == 0 {
            return Err(fail(BpmnEvalStatus::EmptyInput, "no values"));
        }
        if values.is_null() {
            return Err(fail(BpmnEvalStatus::NullPointer, "values is null"));
        }
        let values = std::slice::from_raw_parts(values, len);
        let i = bootstrap_ci(values, resamples, confidence, seed).map_err(|e| fail(BpmnEvalStatus::InvalidArgument, e))?;
        *slot = i.into();
        Ok(())
    })
}

/// Upper tail of the chi-square distribution; 1.0 for `x <= 0` or `df == 0`.
#[no_mangle]
pub extern "C" fn bpmn_eval_chi_square_sf(x: f64, df: usize) -> f64 {
    chi_square_sf(x, df)
}

/// Friedman test on a row-major `n_blocks x k_treatments` score matrix.
///
/// # Safety
/// `scores` must point to `n_blocks * k_treatments` doubles; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_friedman(
    scores: *const f64,
    n_blocks: usize,
    k_treatments: usize,
    out: *mut BpmnFriedman,
) -> BpmnEvalStatus {
    guard(|| {
        let slot = out_ref(out, "out")?;
        let len = n_blocks
            .checked_mul(k_treatments)
            .ok_or_else(|| fail(BpmnEvalStatus::InvalidArgument, "matrix too large"))?;
        if len == 0 {
            return Err(fail(BpmnEvalStatus::EmptyInput, "empty matrix"));
        }
        if scores.is_null() {
            return Err(fail(BpmnEvalStatus::NullPointer, "scores is null"));
        }
        let flat = std::slice::from_raw_parts(scores, len);
        let rows: Vec<Vec<f64>> = flat.chunks(k_treatments).map(<[f64]>::to_vec).collect();
        let f = friedman_test(&rows).map_err(|e| fail(BpmnEvalStatus::InvalidArgument, e))?;
        *slot = BpmnFriedman {
            chi2: f.chi2,
            df: f.df,
            p_value: f.p_value,
            w: f.w,
            n_blocks: f.n_blocks,
            k_treatments: f.k_treatments,
        };
        Ok(())
    })
}

/// Guideline verdicts for one diagram as a JSON object. A null `graph`
/// stands for a diagram that failed to parse and yields all-Missing.
///
/// # Safety
/// `graph` must be null or a live handle; `diagram_id` a NUL-terminated
/// string; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn bpmn_eval_guidelines_json(
    graph: *const BpmnGraph,
    diagram_id: *const c_char,
    size_threshold: usize,
    out: *mut *mut c_char,
) -> BpmnEvalStatus {
    guard(|| {
        let id = read_str(diagram_id, "diagram_id")?;
        let g = graph.as_ref().map(|g| &g.inner);
        let report = verify_model(id, g, &GuidelineConfig { size_threshold });
        let json = serde_json::to_string(&report).map_err(|e| fail(BpmnEvalStatus::InvalidArgument, e))?;
        write_string(out, json)
    })
}
