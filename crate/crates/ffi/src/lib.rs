//! C interface to the polyrank analysis and ranker.
//!
//! Objects are opaque handles created by `pr_*_new`/`pr_*_parse` style calls
//! and released with the matching `pr_*_free`. Every fallible call returns a
//! `PrStatus`; on failure `pr_last_error` describes the problem. Strings
//! returned through `char **` out-parameters are owned by the caller and must
//! be released with `pr_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polyrank::cachefit::{format_rational, MachineDescriptor};
use polyrank::cli::{self, CliError, ConvPreset, Format, Ranking, VariantAnalysis};
use polyrank::loopnest::{parse_nest, LoopNest};
use polyrank::variants::{Recipe, VariantConfig, VariantError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    AnalysisError = 4,
    ConfigRejected = 5,
    OutOfRange = 6,
    Panic = 7,
}

pub struct PrNest(LoopNest);

pub struct PrMachine(MachineDescriptor);

pub struct PrAnalysis {
    analysis: VariantAnalysis,
    machine: MachineDescriptor,
}

pub struct PrRanking(Ranking);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Fail(PrStatus, String);

impl From<CliError> for Fail {
    fn from(e: CliError) -> Self {
        let status = match &e {
            CliError::Variant(VariantError::ConfigRejected(_)) => PrStatus::ConfigRejected,
            CliError::Nest { .. } | CliError::Machine { .. } | CliError::Usage(_) => PrStatus::ParseError,
            _ => PrStatus::AnalysisError,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> PrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PrStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PrStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(PrStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail(PrStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(PrStatus::NullPointer, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(PrStatus::NullPointer, format!("{what} is null")));
    }
    out.write(v);
    Ok(())
}

fn owned(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

fn out_of_range(i: usize, n: usize) -> Fail {
    Fail(PrStatus::OutOfRange, format!("index {i} out of range for {n} entries"))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call on the same thread.
#[no_mangle]
pub extern "C" fn pr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn pr_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a nest description.
///
/// # Safety
/// `src` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pr_nest_parse(src: *const c_char, out: *mut *mut PrNest) -> PrStatus {
    guard(|| {
        let nest = parse_nest(text(src, "src")?).map_err(|e| Fail(PrStatus::ParseError, e.to_string()))?;
        put(out, Box::into_raw(Box::new(PrNest(nest))), "out")
    })
}

/// Builds the convolution nest from `conv` or `conv:nImg,...,GEMM_BLOCK`.
///
/// # Safety
/// `spec` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pr_nest_preset(spec: *const c_char, out: *mut *mut PrNest) -> PrStatus {
    guard(|| {
        let preset: ConvPreset = text(spec, "spec")?.parse().map_err(|e| Fail(PrStatus::ParseError, e))?;
        put(out, Box::into_raw(Box::new(PrNest(preset.nest()))), "out")
    })
}

/// # Safety
/// `nest` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pr_nest_free(nest: *mut PrNest) {
    if !nest.is_null() {
        drop(Box::from_raw(nest));
    }
}

/// Source text of the nest after `recipe` (`identity`, `perm=...;tile=...`).
///
/// # Safety
/// Pointers must be valid; `*out` receives a string for `pr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn pr_nest_emit(nest: *const PrNest, recipe: *const c_char, out: *mut *mut c_char) -> PrStatus {
    guard(|| {
        let nest = handle(nest, "nest")?;
        let recipe: Recipe = text(recipe, "recipe")?.parse().map_err(CliError::from)?;
        let src = cli::emit_variant(&nest.0, &recipe)?;
        put(out, owned(src), "out")
    })
}

/// The built-in machine description.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pr_machine_default(out: *mut *mut PrMachine) -> PrStatus {
    guard(|| put(out, Box::into_raw(Box::new(PrMachine(MachineDescriptor::default_machine()))), "out"))
}

/// # Safety
/// `src` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pr_machine_parse(src: *const c_char, out: *mut *mut PrMachine) -> PrStatus {
    guard(|| {
        let m: MachineDescriptor =
            text(src, "src")?.parse().map_err(|e: polyrank::cachefit::MachineError| Fail(PrStatus::ParseError, e.to_string()))?;
        put(out, Box::into_raw(Box::new(PrMachine(m))), "out")
    })
}

/// # Safety
/// `m` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pr_machine_free(m: *mut PrMachine) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Dependences, working sets, placement and cost of a nest.
///
/// # Safety
/// Handles must be live; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pr_analyze(nest: *const PrNest, machine: *const PrMachine, out: *mut *mut PrAnalysis) -> PrStatus {
    guard(|| {
        let nest = handle(nest, "nest")?;
        let m = handle(machine, "machine")?;
        let analysis = cli::analyze_variant("identity", &nest.0, &m.0)?;
        put(out, Box::into_raw(Box::new(PrAnalysis { analysis, machine: m.0.clone() })), "out")
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pr_analysis_dependence_count(a: *const PrAnalysis, out: *mut usize) -> PrStatus {
    guard(|| put(out, handle(a, "analysis")?.analysis.records.len(), "out"))
}

/// Minimum and maximum working set of dependence `index`.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pr_analysis_working_set(
    a: *const PrAnalysis,
    index: usize,
    ws_min: *mut u64,
    ws_max: *mut u64,
) -> PrStatus {
    guard(|| {
        let recs = &handle(a, "analysis")?.analysis.records;
        let r = recs.get(index).ok_or_else(|| out_of_range(index, recs.len()))?;
        put(ws_min, r.ws_min, "ws_min")?;
        put(ws_max, r.ws_max, "ws_max")
    })
}

/// Label of dependence `index`, such as `RAR A[i][k] -> A[i][k]`.
///
/// # Safety
/// Pointers must be valid; `*out` receives a string for `pr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn pr_analysis_dependence_label(a: *const PrAnalysis, index: usize, out: *mut *mut c_char) -> PrStatus {
    guard(|| {
        let a = &handle(a, "analysis")?.analysis;
        if index >= a.records.len() {
            return Err(out_of_range(index, a.records.len()));
        }
        put(out, owned(a.label(a.records[index].dep)), "out")
    })
}

/// Exact cost as a decimal or `p/q` string.
///
/// # Safety
/// Pointers must be valid; `*out` receives a string for `pr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn pr_analysis_cost(a: *const PrAnalysis, out: *mut *mut c_char) -> PrStatus {
    guard(|| put(out, owned(format_rational(&handle(a, "analysis")?.analysis.score.cost)), "out"))
}

/// The same text the `analyze` command prints.
///
/// # Safety
/// Pointers must be valid; `*out` receives a string for `pr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn pr_analysis_report(a: *const PrAnalysis, out: *mut *mut c_char) -> PrStatus {
    guard(|| {
        let a = handle(a, "analysis")?;
        put(out, owned(cli::analysis_report(&a.analysis, &a.machine, Format::Text)), "out")
    })
}

/// # Safety
/// `a` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pr_analysis_free(a: *mut PrAnalysis) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Generates the variants described by `variants` (a variant configuration
/// document; null means the identity only) and ranks them by cost.
///
/// # Safety
/// Handles must be live, `variants` null or a valid C string, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn pr_rank(
    nest: *const PrNest,
    machine: *const PrMachine,
    variants: *const c_char,
    out: *mut *mut PrRanking,
) -> PrStatus {
    guard(|| {
        let nest = handle(nest, "nest")?;
        let m = handle(machine, "machine")?;
        let cfg = if variants.is_null() {
            VariantConfig::default()
        } else {
            text(variants, "variants")?.parse().map_err(CliError::from)?
        };
        let r = cli::rank_variants(&nest.0, &cfg, &m.0, None)?;
        put(out, Box::into_raw(Box::new(PrRanking(r))), "out")
    })
}

/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn pr_ranking_count(r: *const PrRanking, out: *mut usize) -> PrStatus {
    guard(|| put(out, handle(r, "ranking")?.0.order.len(), "out"))
}

/// Variant id at rank `position` (0 is best).
///
/// # Safety
/// Pointers must be valid; `*out` receives a string for `pr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn pr_ranking_id(r: *const PrRanking, position: usize, out: *mut *mut c_char) -> PrStatus {
    guard(|| {
        let r = &handle(r, "ranking")?.0;
        let i = *r.order.get(position).ok_or_else(|| out_of_range(position, r.order.len()))?;
        put(out, owned(r.analyses[i].id.clone()), "out")
    })
}

/// Cost of the variant at rank `position`.
///
/// # Safety
/// Pointers must be valid; `*out` receives a string for `pr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn pr_ranking_cost(r: *const PrRanking, position: usize, out: *mut *mut c_char) -> PrStatus {
    guard(|| {
        let r = &handle(r, "ranking")?.0;
        let i = *r.order.get(position).ok_or_else(|| out_of_range(position, r.order.len()))?;
        put(out, owned(format_rational(&r.analyses[i].score.cost)), "out")
    })
}

/// Source of the variant at rank `position`, with the microkernel restored.
///
/// # Safety
/// Pointers must be valid; `*out` receives a string for `pr_string_free`.
#[no_mangle]
pub unsafe extern "C" fn pr_ranking_source(r: *const PrRanking, position: usize, out: *mut *mut c_char) -> PrStatus {
    guard(|| {
        let r = &handle(r, "ranking")?.0;
        let sources = cli::top_sources(r, position + 1);
        let (_, _, src) = sources.into_iter().nth(position).ok_or_else(|| out_of_range(position, r.order.len()))?;
        put(out, owned(src), "out")
    })
}

/// # Safety
/// `r` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pr_ranking_free(r: *mut PrRanking) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
