//! C ABI for the robeval engine.
//!
//! Every fallible call returns a [`RobevalStatus`]; on failure a message is
//! kept per thread and can be read with [`robeval_last_error`]. Handles are
//! opaque and must be released with their matching `_free` function.
//! Strings returned through out-pointers are owned by the caller and released
//! with [`robeval_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use robeval::metrics::calibrate_threshold;
use robeval::{BenchmarkReport, DataType, Error, EvalConfig, Manifest, Pooling, ReportFormat, ScoreMethod, Scorer};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobevalStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    InvalidData = 5,
    EmptyCalibration = 6,
    NotFound = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobevalScore {
    Msp = 0,
    Mls = 1,
    Energy = 2,
    Gen = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobevalPooling {
    Pooled = 0,
    Macro = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobevalDataType {
    Clean = 0,
    Corrupt = 1,
    Adversarial = 2,
    Novel = 3,
    Unrecognisable = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RobevalFormat {
    Csv = 0,
    Markdown = 1,
    Json = 2,
}

/// Evaluation settings. `gen_top_m == 0` selects `min(C, 100)`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RobevalConfig {
    pub score: RobevalScore,
    pub accept_rate: f64,
    pub pooling: RobevalPooling,
    pub gen_gamma: f64,
    pub gen_top_m: usize,
    pub allow_partial: bool,
    pub legacy: bool,
    pub legacy_tpr: f64,
}

/// Opaque loaded manifest.
pub struct RobevalManifest(Manifest);

/// Opaque evaluation result.
pub struct RobevalReport(BenchmarkReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> RobevalStatus {
    match e {
        Error::Io { .. } => RobevalStatus::Io,
        Error::ManifestParse { .. } | Error::ReportParse(_) => RobevalStatus::Parse,
        Error::InvalidArgument(_) => RobevalStatus::InvalidArgument,
        Error::EmptyCalibration => RobevalStatus::EmptyCalibration,
        _ => RobevalStatus::InvalidData,
    }
}

fn fail(status: RobevalStatus, message: impl Into<String>) -> RobevalStatus {
    set_error(message.into());
    status
}

/// Runs `f`, translating errors and panics into status codes.
fn guard<F>(f: F) -> RobevalStatus
where
    F: FnOnce() -> Result<(), RobevalStatus>,
{
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RobevalStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(RobevalStatus::Panic, msg)
        }
    }
}

fn lift<T>(r: robeval::Result<T>) -> Result<T, RobevalStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn non_null<'a, T>(p: *const T, name: &str) -> Result<&'a T, RobevalStatus> {
    p.as_ref()
        .ok_or_else(|| fail(RobevalStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, RobevalStatus> {
    p.as_mut()
        .ok_or_else(|| fail(RobevalStatus::NullPointer, format!("{name} is null")))
}

unsafe fn c_str<'a>(p: *const c_char, name: &str) -> Result<&'a str, RobevalStatus> {
    if p.is_null() {
        return Err(fail(RobevalStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(RobevalStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn slice<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], RobevalStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(RobevalStatus::NullPointer, format!("{name} is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

impl From<RobevalScore> for ScoreMethod {
    fn from(s: RobevalScore) -> Self {
        match s {
            RobevalScore::Msp => ScoreMethod::Msp,
            RobevalScore::Mls => ScoreMethod::Mls,
            RobevalScore::Energy => ScoreMethod::Energy,
            RobevalScore::Gen => ScoreMethod::Gen,
        }
    }
}

impl From<RobevalDataType> for DataType {
    fn from(t: RobevalDataType) -> Self {
        match t {
            RobevalDataType::Clean => DataType::Clean,
            RobevalDataType::Corrupt => DataType::Corrupt,
            RobevalDataType::Adversarial => DataType::Adversarial,
            RobevalDataType::Novel => DataType::Novel,
            RobevalDataType::Unrecognisable => DataType::Unrecognisable,
        }
    }
}

impl From<RobevalFormat> for ReportFormat {
    fn from(f: RobevalFormat) -> Self {
        match f {
            RobevalFormat::Csv => ReportFormat::Csv,
            RobevalFormat::Markdown => ReportFormat::Markdown,
            RobevalFormat::Json => ReportFormat::Json,
        }
    }
}

impl From<&RobevalConfig> for EvalConfig {
    fn from(c: &RobevalConfig) -> Self {
        EvalConfig {
            score_method: c.score.into(),
            accept_rate: c.accept_rate,
            pooling: match c.pooling {
                RobevalPooling::Pooled => Pooling::Pooled,
                RobevalPooling::Macro => Pooling::MacroPerDataset,
            },
            gen_gamma: c.gen_gamma,
            gen_top_m: (c.gen_top_m != 0).then_some(c.gen_top_m),
            allow_partial: c.allow_partial,
            legacy: c.legacy,
            legacy_tpr: c.legacy_tpr,
        }
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn robeval_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. Valid until the
/// next call into the library on the same thread.
#[no_mangle]
pub extern "C" fn robeval_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn robeval_config_default() -> RobevalConfig {
    let d = EvalConfig::default();
    RobevalConfig {
        score: RobevalScore::Msp,
        accept_rate: d.accept_rate,
        pooling: RobevalPooling::Pooled,
        gen_gamma: d.gen_gamma,
        gen_top_m: 0,
        allow_partial: d.allow_partial,
        legacy: d.legacy,
        legacy_tpr: d.legacy_tpr,
    }
}

/// Loads and validates a manifest and every logit file it names.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn robeval_manifest_load(path: *const c_char, out: *mut *mut RobevalManifest) -> RobevalStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let path = c_str(path, "path")?;
        let m = lift(robeval::load_manifest(path))?;
        *out = Box::into_raw(Box::new(RobevalManifest(m)));
        Ok(())
    })
}

/// # Safety
/// `m` must come from [`robeval_manifest_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn robeval_manifest_free(m: *mut RobevalManifest) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// # Safety
/// `m` must be a live manifest handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn robeval_manifest_num_classes(m: *const RobevalManifest, out: *mut usize) -> RobevalStatus {
    guard(|| {
        let m = non_null(m, "manifest")?;
        *out_ptr(out, "out")? = m.0.num_classes;
        Ok(())
    })
}

/// Calibrates the threshold and scores every dataset.
///
/// # Safety
/// `m` must be a live manifest handle, `config` readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn robeval_evaluate(
    m: *const RobevalManifest,
    config: *const RobevalConfig,
    out: *mut *mut RobevalReport,
) -> RobevalStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let m = non_null(m, "manifest")?;
        let config = EvalConfig::from(non_null(config, "config")?);
        let report = lift(robeval::evaluate(&m.0, &config))?;
        *out = Box::into_raw(Box::new(RobevalReport(report)));
        Ok(())
    })
}

/// # Safety
/// `r` must come from [`robeval_evaluate`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn robeval_report_free(r: *mut RobevalReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// # Safety
/// `r` must be a live report handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn robeval_report_mean_dar(r: *const RobevalReport, out: *mut f64) -> RobevalStatus {
    guard(|| {
        let r = non_null(r, "report")?;
        *out_ptr(out, "out")? = r.0.mean_dar;
        Ok(())
    })
}

/// DAR of one data type; `NotFound` when the type was not evaluated.
///
/// # Safety
/// `r` must be a live report handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn robeval_report_type_dar(
    r: *const RobevalReport,
    data_type: RobevalDataType,
    out: *mut f64,
) -> RobevalStatus {
    guard(|| {
        let r = non_null(r, "report")?;
        let out = out_ptr(out, "out")?;
        let t = DataType::from(data_type);
        let tr =
            r.0.type_result(t)
                .ok_or_else(|| fail(RobevalStatus::NotFound, format!("no {t} data in report")))?;
        *out = tr.dar;
        Ok(())
    })
}

/// # Safety
/// `r` must be a live report handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn robeval_report_threshold(r: *const RobevalReport, out: *mut f64) -> RobevalStatus {
    guard(|| {
        let r = non_null(r, "report")?;
        *out_ptr(out, "out")? = r.0.threshold.value;
        Ok(())
    })
}

/// Renders the report; free the result with [`robeval_string_free`].
///
/// # Safety
/// `r` must be a live report handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn robeval_report_render(
    r: *const RobevalReport,
    format: RobevalFormat,
    out: *mut *mut c_char,
) -> RobevalStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = ptr::null_mut();
        let r = non_null(r, "report")?;
        let text = robeval::render_report(&r.0, format.into());
        let c = CString::new(text).map_err(|_| fail(RobevalStatus::InvalidData, "report contains NUL"))?;
        *out = c.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn robeval_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Confidence of one logit vector. `top_m == 0` selects `min(len, 100)`.
///
/// # Safety
/// `logits` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn robeval_score(
    method: RobevalScore,
    logits: *const f64,
    len: usize,
    gen_gamma: f64,
    top_m: usize,
    out: *mut f64,
) -> RobevalStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let z = slice(logits, len, "logits")?;
        if z.iter().any(|v| !v.is_finite()) {
            return Err(fail(RobevalStatus::InvalidArgument, "logits must be finite"));
        }
        let m = if top_m == 0 { len.min(100) } else { top_m };
        let scorer = lift(Scorer::new(method.into(), len, gen_gamma, m))?;
        *out = scorer.confidence(z);
        Ok(())
    })
}

/// Threshold accepting at least `accept_rate` of `confidences`.
///
/// # Safety
/// `confidences` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn robeval_calibrate(
    confidences: *const f64,
    len: usize,
    accept_rate: f64,
    out: *mut f64,
) -> RobevalStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let c = slice(confidences, len, "confidences")?;
        *out = lift(calibrate_threshold(c, accept_rate))?.value;
        Ok(())
    })
}
