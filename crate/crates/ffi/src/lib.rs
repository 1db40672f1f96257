//! C ABI over `dataeff`.
//!
//! Objects cross the boundary as opaque handles that the caller releases
//! with the matching `*_free` function. Every function returns a
//! [`DeStatus`]; on failure, [`de_last_error`] describes the error on the
//! calling thread. Panics are caught and reported as [`DeStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use dataeff::curve::{CurveError, CurveModel, EfficiencyPoint};
use dataeff::dataset::{load_corpus_files, CorpusTable};
use dataeff::frame::{exact_match, parse_frame};
use dataeff::sampling::{make_schedule, sample, Algorithm, Subset, SubsetSpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A bracketed frame failed to parse.
    Parse = 3,
    /// A corpus could not be read or is malformed.
    Data = 4,
    /// Curve fitting failed.
    Fit = 5,
    /// The exact-match target is at or beyond the curve's asymptote.
    Unreachable = 6,
    /// The output buffer is too small; the required length was written.
    BufferTooSmall = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeAlgorithm {
    Uniform = 0,
    Spis = 1,
}

/// Fitted or hand-specified curve `h(x) = a / x^b + c`.
pub struct DeCurveModel(CurveModel);

/// Loaded corpus.
pub struct DeCorpus(CorpusTable);

/// Sampled subset of a corpus domain's train rows.
pub struct DeSubset(Subset);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(DeStatus, String);

impl Failure {
    fn null(name: &str) -> Self {
        Failure(DeStatus::NullPointer, format!("{name} is null"))
    }

    fn invalid(message: impl Into<String>) -> Self {
        Failure(DeStatus::InvalidArgument, message.into())
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Runs `body`, recording any failure or panic as the thread's last error.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> DeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => DeStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("panic: {message}"));
            DeStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or points to a NUL-terminated string valid for the call.
unsafe fn read_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{name} is not UTF-8")))
}

/// # Safety
/// `p` is null or points to a live value of `T`.
unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(name))
}

/// # Safety
/// `p` is null or points to writable storage for a `T`.
unsafe fn store<T>(p: *mut T, value: T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(Failure::null(name));
    }
    p.write(value);
    Ok(())
}

fn curve_failure(e: CurveError) -> Failure {
    let status = match e {
        CurveError::AboveAsymptote { .. }
        | CurveError::BelowAsymptote { .. }
        | CurveError::FlatCurve { .. } => DeStatus::Unreachable,
        CurveError::NonPositiveX(_) | CurveError::NonPositiveExponent(_) => {
            DeStatus::InvalidArgument
        }
        CurveError::TooFewPoints(_) | CurveError::PointOutOfRange { .. } => DeStatus::Fit,
    };
    Failure(status, e.to_string())
}

/// Message for the last failed call on this thread, or NULL after a
/// successful call. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn de_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Writes the `n`-point subset-size schedule into `out[0..n]`.
///
/// # Safety
/// `out` points to `capacity` writable `u32`s; `written` is writable.
#[no_mangle]
pub unsafe extern "C" fn de_schedule_sizes(
    n: usize,
    out: *mut u32,
    capacity: usize,
    written: *mut usize,
) -> DeStatus {
    guard(|| {
        let schedule = make_schedule(n).map_err(|e| Failure::invalid(e.to_string()))?;
        store(written, schedule.sizes.len(), "written")?;
        if capacity < schedule.sizes.len() {
            return Err(Failure(
                DeStatus::BufferTooSmall,
                format!("need {} slots, got {capacity}", schedule.sizes.len()),
            ));
        }
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        ptr::copy_nonoverlapping(schedule.sizes.as_ptr(), out, schedule.sizes.len());
        Ok(())
    })
}

/// Fits a curve to `len` (subset %, exact match %) pairs.
///
/// # Safety
/// `xs` and `ys` point to `len` readable doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn de_curve_fit(
    xs: *const f64,
    ys: *const f64,
    len: usize,
    out: *mut *mut DeCurveModel,
) -> DeStatus {
    guard(|| {
        if xs.is_null() || ys.is_null() {
            return Err(Failure::null("xs/ys"));
        }
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let xs = std::slice::from_raw_parts(xs, len);
        let ys = std::slice::from_raw_parts(ys, len);
        let points: Vec<EfficiencyPoint> = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| EfficiencyPoint::new(x, y))
            .collect();
        let model = dataeff::fit_curve(&points).map_err(curve_failure)?;
        out.write(Box::into_raw(Box::new(DeCurveModel(model))));
        Ok(())
    })
}

/// A curve with the given parameters.
///
/// # Safety
/// `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn de_curve_from_params(
    a: f64,
    b: f64,
    c: f64,
    out: *mut *mut DeCurveModel,
) -> DeStatus {
    guard(|| {
        if ![a, b, c].iter().all(|v| v.is_finite()) {
            return Err(Failure::invalid("parameters must be finite"));
        }
        let model = Box::into_raw(Box::new(DeCurveModel(CurveModel::from_params(a, b, c))));
        store(out, model, "out")
    })
}

/// # Safety
/// `model` is a live handle; `a`, `b`, `c` are writable.
#[no_mangle]
pub unsafe extern "C" fn de_curve_params(
    model: *const DeCurveModel,
    a: *mut f64,
    b: *mut f64,
    c: *mut f64,
) -> DeStatus {
    guard(|| {
        let m = &deref(model, "model")?.0;
        store(a, m.a, "a")?;
        store(b, m.b, "b")?;
        store(c, m.c, "c")
    })
}

/// `h(x)` for `x > 0`, unclamped.
///
/// # Safety
/// `model` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn de_curve_evaluate(
    model: *const DeCurveModel,
    x: f64,
    out: *mut f64,
) -> DeStatus {
    guard(|| {
        let e = deref(model, "model")?.0.evaluate(x).map_err(curve_failure)?;
        store(out, e.raw, "out")
    })
}

/// Subset % needed for exact match `y`. `exceeds_full_data` is set when the
/// answer is above 100.
///
/// # Safety
/// `model` is a live handle; `out` and `exceeds_full_data` are writable.
#[no_mangle]
pub unsafe extern "C" fn de_curve_invert(
    model: *const DeCurveModel,
    y: f64,
    out: *mut f64,
    exceeds_full_data: *mut bool,
) -> DeStatus {
    guard(|| {
        let inv = deref(model, "model")?.0.invert(y).map_err(curve_failure)?;
        store(out, inv.subset_percent, "out")?;
        store(exceeds_full_data, inv.exceeds_full_data, "exceeds_full_data")
    })
}

/// # Safety
/// `model` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn de_curve_free(model: *mut DeCurveModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Percentage of `len` system frames identical to their reference frames.
///
/// # Safety
/// `system` and `reference` point to `len` NUL-terminated strings; `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn de_exact_match(
    system: *const *const c_char,
    reference: *const *const c_char,
    len: usize,
    out: *mut f64,
) -> DeStatus {
    guard(|| {
        if system.is_null() || reference.is_null() {
            return Err(Failure::null("system/reference"));
        }
        let parse_all = |items: *const *const c_char, name: &str| {
            std::slice::from_raw_parts(items, len)
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    let text = read_str(p, name)?;
                    parse_frame(text)
                        .map_err(|e| Failure(DeStatus::Parse, format!("{name}[{i}]: {e}")))
                })
                .collect::<Result<Vec<_>, _>>()
        };
        let sys = parse_all(system, "system")?;
        let refs = parse_all(reference, "reference")?;
        let em = exact_match(&sys, &refs).map_err(|e| Failure::invalid(e.to_string()))?;
        store(out, em, "out")
    })
}

/// Loads a TSV or JSONL corpus file; the format follows the extension.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn de_corpus_load(path: *const c_char, out: *mut *mut DeCorpus) -> DeStatus {
    guard(|| {
        let path = read_str(path, "path")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let table = load_corpus_files(&[Path::new(path).to_owned()])
            .map_err(|e| Failure(DeStatus::Data, e.to_string()))?;
        out.write(Box::into_raw(Box::new(DeCorpus(table))));
        Ok(())
    })
}

/// # Safety
/// `corpus` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn de_corpus_len(corpus: *const DeCorpus, out: *mut usize) -> DeStatus {
    guard(|| store(out, deref(corpus, "corpus")?.0.len(), "out"))
}

/// # Safety
/// `corpus` is NULL or a handle not yet freed, and no subset drawn from it
/// is used afterwards.
#[no_mangle]
pub unsafe extern "C" fn de_corpus_free(corpus: *mut DeCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Draws a subset of `domain`'s train rows. `size` is a percent for
/// uniform sampling and samples per label for SPIS.
///
/// # Safety
/// `corpus` is a live handle; `domain` is a NUL-terminated string; `out` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn de_sample(
    corpus: *const DeCorpus,
    domain: *const c_char,
    algorithm: DeAlgorithm,
    size: f64,
    seed: u64,
    out: *mut *mut DeSubset,
) -> DeStatus {
    guard(|| {
        let table = &deref(corpus, "corpus")?.0;
        let domain = read_str(domain, "domain")?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let spec = SubsetSpec {
            target_domain: domain.to_owned(),
            algorithm: match algorithm {
                DeAlgorithm::Uniform => Algorithm::Uniform,
                DeAlgorithm::Spis => Algorithm::Spis,
            },
            size_param: size,
            seed,
        };
        let subset = sample(table, &spec).map_err(|e| Failure::invalid(e.to_string()))?;
        out.write(Box::into_raw(Box::new(DeSubset(subset))));
        Ok(())
    })
}

/// Copies the subset's corpus row ids into `out`; `written` receives the
/// subset size even when the buffer is too small.
///
/// # Safety
/// `subset` is a live handle; `out` points to `capacity` writable `size_t`s;
/// `written` is writable.
#[no_mangle]
pub unsafe extern "C" fn de_subset_row_ids(
    subset: *const DeSubset,
    out: *mut usize,
    capacity: usize,
    written: *mut usize,
) -> DeStatus {
    guard(|| {
        let ids = &deref(subset, "subset")?.0.row_ids;
        store(written, ids.len(), "written")?;
        if capacity < ids.len() {
            return Err(Failure(
                DeStatus::BufferTooSmall,
                format!("need {} slots, got {capacity}", ids.len()),
            ));
        }
        if !ids.is_empty() {
            if out.is_null() {
                return Err(Failure::null("out"));
            }
            ptr::copy_nonoverlapping(ids.as_ptr(), out, ids.len());
        }
        Ok(())
    })
}

/// Subset as JSON. Release the string with [`de_string_free`].
///
/// # Safety
/// `subset` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn de_subset_to_json(subset: *const DeSubset, out: *mut *mut c_char) -> DeStatus {
    guard(|| {
        let json = serde_json::to_string(&deref(subset, "subset")?.0)
            .map_err(|e| Failure::invalid(e.to_string()))?;
        let c = CString::new(json).map_err(|e| Failure::invalid(e.to_string()))?;
        store(out, c.into_raw(), "out")
    })
}

/// # Safety
/// `subset` is NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn de_subset_free(subset: *mut DeSubset) {
    if !subset.is_null() {
        drop(Box::from_raw(subset));
    }
}

/// # Safety
/// `s` is NULL or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn de_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
