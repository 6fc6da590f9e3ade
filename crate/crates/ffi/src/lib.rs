//! C ABI over the molsync simulator.
//!
//! Every function returns an `i32` status (`MOLSYNC_OK` on success) and
//! writes results through out-pointers. On failure the message is available
//! from [`molsync_last_error`] on the same thread until the next call that
//! fails. Configurations and trials are opaque handles owned by the caller
//! and released with their `_free` function. Strings handed out by the
//! library are released with [`molsync_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use molsync::experiment::{run_point, ExperimentConfig, Trial};
use molsync::{ChannelGeometry, Error};

pub const MOLSYNC_OK: i32 = 0;
/// A required pointer argument was null.
pub const MOLSYNC_ERR_NULL: i32 = 1;
/// A string argument was not valid UTF-8.
pub const MOLSYNC_ERR_UTF8: i32 = 2;
pub const MOLSYNC_ERR_INVALID_ARGUMENT: i32 = 3;
pub const MOLSYNC_ERR_CONFIG: i32 = 4;
pub const MOLSYNC_ERR_SERIES_TOO_SHORT: i32 = 5;
pub const MOLSYNC_ERR_UNDEFINED_EYE: i32 = 6;
pub const MOLSYNC_ERR_IO: i32 = 7;
/// The library panicked; the message holds the panic payload.
pub const MOLSYNC_ERR_PANIC: i32 = 8;

/// Opaque experiment configuration.
pub struct MolsyncConfig {
    inner: ExperimentConfig,
}

/// Opaque prepared run: one channel realisation with its sync estimate.
pub struct MolsyncTrial {
    inner: Trial,
    t_s: f64,
}

/// Metrics of one run for both receivers.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MolsyncRunMetrics {
    pub ser_proposed: f64,
    pub ser_baseline: f64,
    /// Normalized sync error of the proposed receiver.
    pub e_bar: f64,
    pub erasure_rate: f64,
    pub n_symbols: usize,
    /// Non-zero when injected errors had to be re-sorted.
    pub sync_reordered: i32,
}

/// Averages over every run of a configuration.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MolsyncPointResult {
    pub ser_proposed: f64,
    pub ser_baseline: f64,
    pub e_bar: f64,
    pub erasure_rate: f64,
    pub runs: usize,
    pub total_symbols: usize,
    /// Decision threshold in molecules.
    pub threshold: f64,
}

/// Eye opening under both alignments, in normalized counts and seconds.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MolsyncEyeMetrics {
    pub height_proposed: f64,
    pub width_proposed: f64,
    pub height_fixed: f64,
    pub width_fixed: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => MOLSYNC_ERR_INVALID_ARGUMENT,
            Error::SeriesTooShort(_) => MOLSYNC_ERR_SERIES_TOO_SHORT,
            Error::UndefinedEye(_) => MOLSYNC_ERR_UNDEFINED_EYE,
            Error::Config(_) => MOLSYNC_ERR_CONFIG,
            Error::Io { .. } => MOLSYNC_ERR_IO,
        };
        Fail(code, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MOLSYNC_OK,
        Ok(Err(Fail(code, msg))) => {
            set_last_error(&msg);
            code
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            MOLSYNC_ERR_PANIC
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(MOLSYNC_ERR_NULL, format!("{what} is null"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(MOLSYNC_ERR_UTF8, format!("{what}: {e}")))
}

fn owned_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Fail(MOLSYNC_ERR_INVALID_ARGUMENT, e.to_string()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn molsync_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or an empty string.
///
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn molsync_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn molsync_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Hitting rate f(t) in 1/s for receiver radius `r`, distance `d` (µm) and
/// diffusion coefficient `diffusion` (µm²/s).
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn molsync_hitting_rate(r: f64, d: f64, diffusion: f64, t: f64, out: *mut f64) -> i32 {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = molsync::hitting_rate(&ChannelGeometry::new(r, d)?, diffusion, t)?;
        Ok(())
    })
}

/// Fraction F(t) of released molecules absorbed by time `t`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn molsync_hitting_fraction(r: f64, d: f64, diffusion: f64, t: f64, out: *mut f64) -> i32 {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = molsync::hitting_fraction(&ChannelGeometry::new(r, d)?, diffusion, t)?;
        Ok(())
    })
}

/// Time of the maximum hitting rate, d²/(6D).
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn molsync_peak_time(r: f64, d: f64, diffusion: f64, out: *mut f64) -> i32 {
    guard(|| {
        let out = out_ref(out, "out")?;
        molsync::channel::check_diffusion(diffusion)?;
        *out = molsync::peak_time(&ChannelGeometry::new(r, d)?, diffusion);
        Ok(())
    })
}

fn new_config(inner: ExperimentConfig, out: &mut *mut MolsyncConfig) {
    *out = Box::into_raw(Box::new(MolsyncConfig { inner }));
}

/// Default configuration (the reference channel, 20 runs of 10⁴ symbols).
///
/// # Safety
/// `out` must be null or point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn molsync_config_default(out: *mut *mut MolsyncConfig) -> i32 {
    guard(|| {
        new_config(ExperimentConfig::default(), out_ref(out, "out")?);
        Ok(())
    })
}

/// Parses a TOML configuration; unknown keys are rejected.
///
/// # Safety
/// `toml` must be null or a NUL-terminated string; `out` must be null or
/// point to writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn molsync_config_from_toml(toml: *const c_char, out: *mut *mut MolsyncConfig) -> i32 {
    guard(|| {
        let out = out_ref(out, "out")?;
        new_config(ExperimentConfig::from_toml_str(str_arg(toml, "toml")?)?, out);
        Ok(())
    })
}

/// Reads a TOML configuration file.
///
/// # Safety
/// As [`molsync_config_from_toml`], with `path` in place of `toml`.
#[no_mangle]
pub unsafe extern "C" fn molsync_config_load(path: *const c_char, out: *mut *mut MolsyncConfig) -> i32 {
    guard(|| {
        let out = out_ref(out, "out")?;
        new_config(ExperimentConfig::load(Path::new(str_arg(path, "path")?))?, out);
        Ok(())
    })
}

/// Sets one key from a TOML value literal, e.g. `("snr_db", "8.0")` or
/// `("threshold", "\"calibrated\"")`. The configuration is unchanged if the
/// result does not validate.
///
/// # Safety
/// `cfg` must be null or a live handle; `key` and `value` must be null or
/// NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn molsync_config_set(cfg: *mut MolsyncConfig, key: *const c_char, value: *const c_char) -> i32 {
    guard(|| {
        let cfg = out_ref(cfg, "cfg")?;
        let key = str_arg(key, "key")?;
        let value = str_arg(value, "value")?;
        let parsed: toml::Table = format!("v = {value}")
            .parse()
            .map_err(|e| Fail(MOLSYNC_ERR_CONFIG, format!("value for `{key}`: {e}")))?;
        let mut table: toml::Table = cfg
            .inner
            .to_toml_string()
            .parse()
            .map_err(|e| Fail(MOLSYNC_ERR_CONFIG, format!("{e}")))?;
        table.insert(key.to_owned(), parsed["v"].clone());
        cfg.inner = ExperimentConfig::from_toml_str(&table.to_string())?;
        Ok(())
    })
}

/// Serializes the configuration to TOML; free the result with
/// [`molsync_string_free`].
///
/// # Safety
/// `cfg` must be null or a live handle; `out` must be null or point to
/// writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn molsync_config_to_toml(cfg: *const MolsyncConfig, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        *out_ref(out, "out")? = owned_string(cfg.inner.to_toml_string())?;
        Ok(())
    })
}

/// Hex fingerprint of the configuration, as written to result files; free
/// with [`molsync_string_free`].
///
/// # Safety
/// As [`molsync_config_to_toml`].
#[no_mangle]
pub unsafe extern "C" fn molsync_config_fingerprint(cfg: *const MolsyncConfig, out: *mut *mut c_char) -> i32 {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        *out_ref(out, "out")? = owned_string(cfg.inner.fingerprint())?;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle from this library that is not yet freed.
#[no_mangle]
pub unsafe extern "C" fn molsync_config_free(cfg: *mut MolsyncConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs every configured run and averages the metrics.
///
/// # Safety
/// `cfg` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn molsync_run_point(cfg: *const MolsyncConfig, out: *mut MolsyncPointResult) -> i32 {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let out = out_ref(out, "out")?;
        let outcome = run_point(&cfg.inner)?;
        let row = outcome
            .rows
            .first()
            .ok_or_else(|| Fail(MOLSYNC_ERR_CONFIG, "no result row".into()))?;
        *out = MolsyncPointResult {
            ser_proposed: row.ser_proposed,
            ser_baseline: row.ser_baseline,
            e_bar: row.e_bar,
            erasure_rate: row.erasure_rate,
            runs: row.runs,
            total_symbols: row.total_symbols,
            threshold: cfg.inner.threshold_count()?,
        };
        Ok(())
    })
}

/// Transmits, propagates and estimates sync peaks for run `run_index`.
///
/// # Safety
/// `cfg` must be null or a live handle; `out` must be null or point to
/// writable memory for one pointer.
#[no_mangle]
pub unsafe extern "C" fn molsync_trial_prepare(
    cfg: *const MolsyncConfig,
    run_index: usize,
    out: *mut *mut MolsyncTrial,
) -> i32 {
    guard(|| {
        let cfg = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        let out = out_ref(out, "out")?;
        let inner = Trial::prepare(&cfg.inner, run_index)?;
        *out = Box::into_raw(Box::new(MolsyncTrial {
            inner,
            t_s: cfg.inner.t_s,
        }));
        Ok(())
    })
}

/// Scores both receivers, injecting `e_bar_target` into the proposed
/// receiver's peaks.
///
/// # Safety
/// `trial` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn molsync_trial_evaluate(
    trial: *const MolsyncTrial,
    e_bar_target: f64,
    out: *mut MolsyncRunMetrics,
) -> i32 {
    guard(|| {
        let trial = trial.as_ref().ok_or_else(|| null("trial"))?;
        let out = out_ref(out, "out")?;
        let r = trial.inner.evaluate(e_bar_target)?;
        *out = MolsyncRunMetrics {
            ser_proposed: r.proposed.ser,
            ser_baseline: r.baseline.ser,
            e_bar: r.proposed.e_bar,
            erasure_rate: r.proposed.erasure_rate,
            n_symbols: r.proposed.n_symbols,
            sync_reordered: r.sync_reordered as i32,
        };
        Ok(())
    })
}

/// Eye height and width over `span_fraction·T_s`, sampled at
/// `sample_fraction` of the span.
///
/// # Safety
/// `trial` must be null or a live handle; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn molsync_trial_eye(
    trial: *const MolsyncTrial,
    span_fraction: f64,
    sample_fraction: f64,
    out: *mut MolsyncEyeMetrics,
) -> i32 {
    guard(|| {
        let trial = trial.as_ref().ok_or_else(|| null("trial"))?;
        let out = out_ref(out, "out")?;
        let (p, f) = trial.inner.eyes(span_fraction * trial.t_s, sample_fraction)?;
        *out = MolsyncEyeMetrics {
            height_proposed: p.eye_height,
            width_proposed: p.eye_width,
            height_fixed: f.eye_height,
            width_fixed: f.eye_width,
        };
        Ok(())
    })
}

/// # Safety
/// `trial` must be null or a handle from this library that is not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn molsync_trial_free(trial: *mut MolsyncTrial) {
    if !trial.is_null() {
        drop(Box::from_raw(trial));
    }
}
