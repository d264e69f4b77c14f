//! C ABI over the overuse simulator.
//!
//! Objects cross the boundary as opaque handles created by `osim_*_new`/
//! `osim_*_from_*` functions and released by the matching `osim_*_free`.
//! Every fallible call returns an [`OsimStatus`]; on failure a human-readable
//! message is available from [`osim_last_error_message`] on the same thread.
//! Strings returned to the caller are owned by the caller and must be freed
//! with [`osim_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use overuse_sim::config::{parse_config, ExperimentConfig};
use overuse_sim::environments::{apply_misrepresentation, build, ArmTable, EnvironmentLevel};
use overuse_sim::harness::{run_batch_with_threads, BatchResult};
use overuse_sim::output::write_batch;
use overuse_sim::seed::derive_seed;
use overuse_sim::SimError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OsimStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidConfig = 3,
    InvalidEnvironment = 4,
    Io = 5,
    OutOfRange = 6,
    Internal = 7,
    Panic = 8,
}

/// A validated experiment configuration.
pub struct OsimConfig {
    inner: ExperimentConfig,
}

/// The aggregated outcome of one batch of replications.
pub struct OsimBatch {
    inner: BatchResult,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(OsimStatus, String);

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        let status = match &e {
            SimError::Config { .. } | SimError::Json(_) => OsimStatus::InvalidConfig,
            SimError::InvalidSpec(_) => OsimStatus::InvalidEnvironment,
            SimError::Io { .. } => OsimStatus::Io,
            SimError::Contract(_) | SimError::Chart(_) => OsimStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(OsimStatus::NullPointer, format!("`{what}` is NULL"))
}

/// Runs `body` with panics caught and errors recorded for the caller.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> OsimStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => OsimStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            OsimStatus::Panic
        }
    }
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(OsimStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(OsimStatus::Internal, "string contains a NUL byte".into()))
}

fn parse_level(name: &str) -> Result<EnvironmentLevel, Failure> {
    match name {
        "simplified" => Ok(EnvironmentLevel::Simplified),
        "advanced" => Ok(EnvironmentLevel::Advanced),
        "refined" | "refined_recommender" => Ok(EnvironmentLevel::RefinedRecommender),
        other => Err(Failure(
            OsimStatus::InvalidConfig,
            format!("unknown level `{other}` (expected simplified, advanced or refined)"),
        )),
    }
}

unsafe fn config_ref<'a>(cfg: *const OsimConfig) -> Result<&'a OsimConfig, Failure> {
    cfg.as_ref().ok_or_else(|| null("config"))
}

unsafe fn batch_ref<'a>(batch: *const OsimBatch) -> Result<&'a OsimBatch, Failure> {
    batch.as_ref().ok_or_else(|| null("batch"))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next `osim_*` call on the same thread.
#[no_mangle]
pub extern "C" fn osim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be NULL or a string previously returned by this library.
#[no_mangle]
pub unsafe extern "C" fn osim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses and validates a JSON config, filling in defaults.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osim_config_from_json(
    json: *const c_char,
    out: *mut *mut OsimConfig,
) -> OsimStatus {
    guard(|| {
        let text = read_str(json, "json")?;
        let inner = parse_config(text)?;
        write_out(out, Box::into_raw(Box::new(OsimConfig { inner })), "out")
    })
}

/// Default config for a built-in level (`simplified`, `advanced`, `refined`).
///
/// # Safety
/// `level` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osim_config_new(level: *const c_char, out: *mut *mut OsimConfig) -> OsimStatus {
    guard(|| {
        let level = parse_level(read_str(level, "level")?)?;
        let inner = ExperimentConfig::new(level);
        write_out(out, Box::into_raw(Box::new(OsimConfig { inner })), "out")
    })
}

/// Fully resolved config as pretty-printed JSON; free with `osim_string_free`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osim_config_to_json(cfg: *const OsimConfig, out: *mut *mut c_char) -> OsimStatus {
    guard(|| {
        let cfg = config_ref(cfg)?;
        let s = to_c_string(cfg.inner.to_json_pretty())?;
        write_out(out, s, "out")
    })
}

/// # Safety
/// `cfg` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn osim_config_free(cfg: *mut OsimConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs every replication of `cfg` on up to `threads` workers (0 = automatic).
/// The result does not depend on `threads`.
///
/// # Safety
/// `cfg` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osim_run_batch(
    cfg: *const OsimConfig,
    threads: usize,
    out: *mut *mut OsimBatch,
) -> OsimStatus {
    guard(|| {
        let cfg = config_ref(cfg)?;
        let inner = run_batch_with_threads(&cfg.inner, threads)?;
        write_out(out, Box::into_raw(Box::new(OsimBatch { inner })), "out")
    })
}

/// # Safety
/// `batch` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn osim_batch_free(batch: *mut OsimBatch) {
    if !batch.is_null() {
        drop(Box::from_raw(batch));
    }
}

/// # Safety
/// `batch` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osim_batch_horizon(batch: *const OsimBatch, out: *mut usize) -> OsimStatus {
    guard(|| write_out(out, batch_ref(batch)?.inner.horizon(), "out"))
}

/// # Safety
/// `batch` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osim_batch_n_replications(batch: *const OsimBatch, out: *mut usize) -> OsimStatus {
    guard(|| write_out(out, batch_ref(batch)?.inner.n_replications, "out"))
}

/// Number of recommender arms; 0 for environments without a recommender.
///
/// # Safety
/// `batch` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osim_batch_n_arms(batch: *const OsimBatch, out: *mut usize) -> OsimStatus {
    guard(|| write_out(out, batch_ref(batch)?.inner.n_arms(), "out"))
}

/// Replications not addicted after step `t`.
///
/// # Safety
/// `batch` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osim_batch_non_addicted(
    batch: *const OsimBatch,
    t: usize,
    out: *mut usize,
) -> OsimStatus {
    guard(|| {
        let b = &batch_ref(batch)?.inner;
        let v = *b.non_addicted.get(t).ok_or_else(|| {
            Failure(OsimStatus::OutOfRange, format!("step {t} beyond horizon {}", b.horizon()))
        })?;
        write_out(out, v, "out")
    })
}

/// Mean bandit estimate of `arm` across replications after step `t`.
///
/// # Safety
/// `batch` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osim_batch_mean_q(
    batch: *const OsimBatch,
    t: usize,
    arm: usize,
    out: *mut f64,
) -> OsimStatus {
    guard(|| {
        let b = &batch_ref(batch)?.inner;
        let v = *b
            .mean_q_arms
            .get(t)
            .and_then(|row| row.get(arm))
            .ok_or_else(|| {
                Failure(
                    OsimStatus::OutOfRange,
                    format!("(step {t}, arm {arm}) outside {} x {}", b.horizon(), b.n_arms()),
                )
            })?;
        write_out(out, v, "out")
    })
}

/// Writes the batch CSVs and `resolved_config.json` into `dir`.
///
/// # Safety
/// `batch` must be a live handle; `dir` must be a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn osim_batch_write_csv(batch: *const OsimBatch, dir: *const c_char) -> OsimStatus {
    guard(|| {
        let b = batch_ref(batch)?;
        let dir = read_str(dir, "dir")?;
        write_batch(&b.inner, dir)?;
        Ok(())
    })
}

/// A built-in environment as JSON; free with `osim_string_free`.
///
/// # Safety
/// `level` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn osim_env_dump_json(
    level: *const c_char,
    misrepresent: bool,
    out: *mut *mut c_char,
) -> OsimStatus {
    guard(|| {
        let level = parse_level(read_str(level, "level")?)?;
        let mut spec = build(level, ArmTable::default())?;
        if misrepresent {
            spec = apply_misrepresentation(&spec)?;
        }
        write_out(out, to_c_string(spec.to_json_pretty())?, "out")
    })
}

/// Seed of replication `index` in a batch with base seed `base`.
#[no_mangle]
pub extern "C" fn osim_derive_seed(base: u64, index: u64) -> u64 {
    derive_seed(base, index)
}
