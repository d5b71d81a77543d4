//! C ABI over the glucolab simulator environment, the risk reward, glycemic
//! metrics and trained policies.
//!
//! Every fallible function returns a [`GlucolabStatus`]; on failure a
//! message is kept per thread and can be read with
//! [`glucolab_last_error_message`]. Handles are opaque and must be released
//! with the matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use glucolab::env::{magni_risk, EnvConfig, GlucoseEnv, FEATURE_DIM};
use glucolab::eval::{rollout_metrics, RolloutTrace};
use glucolab::rl::Policy;
use glucolab::sim::{builtin_cohort, AgeGroup};
use glucolab::Error;

/// Length of the feature vector written by the environment functions.
pub const GLUCOLAB_FEATURE_DIM: usize = 12;
const _: () = assert!(GLUCOLAB_FEATURE_DIM == FEATURE_DIM);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlucolabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// unreadable, missing or corrupt file
    Io = 3,
    EpisodeDone = 4,
    /// the simulation or a computation produced non-finite values
    Numerical = 5,
    Internal = 6,
}

/// Opaque environment handle.
pub struct GlucolabEnv {
    inner: GlucoseEnv,
}

/// Opaque policy handle.
pub struct GlucolabPolicy {
    inner: Policy,
}

/// Per-trace glycemic metrics, all in percent.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GlucolabMetrics {
    pub tir_pct: f64,
    pub tbr_pct: f64,
    pub tar_pct: f64,
    pub cv_pct: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GlucolabStatus {
    match e {
        Error::StepAfterDone => GlucolabStatus::EpisodeDone,
        Error::SimulationDiverged { .. } | Error::NonFiniteLoss { .. } => GlucolabStatus::Numerical,
        Error::MissingArtifact { .. }
        | Error::HashMismatch { .. }
        | Error::Checksum { .. }
        | Error::VersionMismatch { .. }
        | Error::MalformedLog(_)
        | Error::Format(_)
        | Error::ArchitectureMismatch { .. }
        | Error::Io { .. } => GlucolabStatus::Io,
        _ => GlucolabStatus::InvalidArgument,
    }
}

struct Fail(GlucolabStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(GlucolabStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording the error message and converting panics.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GlucolabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GlucolabStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GlucolabStatus::Internal
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(GlucolabStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length in
/// bytes, or 0 when there is no message.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn glucolab_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Magni risk of a glucose value in mg/dl.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn glucolab_magni_risk(glucose_mg_dl: f64, out: *mut f64) -> GlucolabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = magni_risk(glucose_mg_dl)?;
        Ok(())
    })
}

/// TIR, TBR, TAR and CV of a CGM trace.
///
/// # Safety
/// `cgm` must be valid for `n` reads and `out` for one write.
#[no_mangle]
pub unsafe extern "C" fn glucolab_metrics(cgm: *const f64, n: usize, out: *mut GlucolabMetrics) -> GlucolabStatus {
    guard(|| {
        if cgm.is_null() {
            return Err(null("cgm"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let trace = RolloutTrace {
            patient_id: String::new(),
            age_group: AgeGroup::Adult,
            cgm: std::slice::from_raw_parts(cgm, n).to_vec(),
            reward_sum: 0.0,
            failed: false,
        };
        let m = rollout_metrics(&trace)?;
        *out = GlucolabMetrics { tir_pct: m.tir_pct, tbr_pct: m.tbr_pct, tar_pct: m.tar_pct, cv_pct: m.cv_pct };
        Ok(())
    })
}

/// Creates an environment for a built-in patient with default settings and
/// an episode of `length_days`.
///
/// # Safety
/// `patient_id` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn glucolab_env_new(
    patient_id: *const c_char,
    seed: u64,
    episode: u64,
    length_days: f64,
    out: *mut *mut GlucolabEnv,
) -> GlucolabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let id = text(patient_id, "patient_id")?;
        let patient = builtin_cohort().get(id)?.clone();
        let mut config = EnvConfig::default();
        config.episode.length_days = length_days;
        let inner = GlucoseEnv::new(patient, config, seed, episode)?;
        *out = Box::into_raw(Box::new(GlucolabEnv { inner }));
        Ok(())
    })
}

/// # Safety
/// `env` must be null or a handle from [`glucolab_env_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn glucolab_env_free(env: *mut GlucolabEnv) {
    if !env.is_null() {
        drop(Box::from_raw(env));
    }
}

/// Writes the current feature vector (`GLUCOLAB_FEATURE_DIM` values) and
/// the latest CGM reading.
///
/// # Safety
/// `env` must be a live handle, `features` valid for `GLUCOLAB_FEATURE_DIM`
/// writes and `cgm` null or valid for one write.
#[no_mangle]
pub unsafe extern "C" fn glucolab_env_observation(env: *const GlucolabEnv, features: *mut f64, cgm: *mut f64) -> GlucolabStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        if features.is_null() {
            return Err(null("features"));
        }
        let obs = env.inner.observation();
        std::ptr::copy_nonoverlapping(obs.features.as_slice().as_ptr(), features, FEATURE_DIM);
        if !cgm.is_null() {
            *cgm = obs.cgm;
        }
        Ok(())
    })
}

/// Advances one control period with a normalized action in [-1, 1]. Writes
/// the next features, the reward and whether the episode ended.
///
/// # Safety
/// `env` must be a live handle; `features` valid for
/// `GLUCOLAB_FEATURE_DIM` writes; `reward` and `done` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn glucolab_env_step(
    env: *mut GlucolabEnv,
    action: f64,
    features: *mut f64,
    reward: *mut f64,
    done: *mut bool,
) -> GlucolabStatus {
    guard(|| {
        let env = env.as_mut().ok_or_else(|| null("env"))?;
        if features.is_null() || reward.is_null() || done.is_null() {
            return Err(null("output pointer"));
        }
        let (f, r, d) = env.inner.step(action)?;
        std::ptr::copy_nonoverlapping(f.as_slice().as_ptr(), features, FEATURE_DIM);
        *reward = r;
        *done = d;
        Ok(())
    })
}

/// Plasma glucose of the simulated patient, mg/dl.
///
/// # Safety
/// `env` must be a live handle and `out` valid for one write.
#[no_mangle]
pub unsafe extern "C" fn glucolab_env_true_glucose(env: *const GlucolabEnv, out: *mut f64) -> GlucolabStatus {
    guard(|| {
        let env = env.as_ref().ok_or_else(|| null("env"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = env.inner.state().plasma_glucose;
        Ok(())
    })
}

/// Loads a policy file written by the `train` command.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn glucolab_policy_load(path: *const c_char, out: *mut *mut GlucolabPolicy) -> GlucolabStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = text(path, "path")?;
        let inner = Policy::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(GlucolabPolicy { inner }));
        Ok(())
    })
}

/// # Safety
/// `policy` must be null or a handle from [`glucolab_policy_load`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn glucolab_policy_free(policy: *mut GlucolabPolicy) {
    if !policy.is_null() {
        drop(Box::from_raw(policy));
    }
}

/// Normalized action for raw (unstandardized) features.
///
/// # Safety
/// `policy` must be a live handle, `features` valid for `n` reads and
/// `action` for one write.
#[no_mangle]
pub unsafe extern "C" fn glucolab_policy_act(
    policy: *const GlucolabPolicy,
    features: *const f64,
    n: usize,
    action: *mut f64,
) -> GlucolabStatus {
    guard(|| {
        let policy = policy.as_ref().ok_or_else(|| null("policy"))?;
        if features.is_null() || action.is_null() {
            return Err(null("features or action"));
        }
        *action = policy.inner.act(std::slice::from_raw_parts(features, n))?;
        Ok(())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn glucolab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
