//! C ABI over `replidyn`.
//!
//! Handles are opaque and owned by the caller, who releases them with the
//! matching `*_free` function. Every fallible call returns a
//! [`ReplidynStatus`]; on failure the message is available from
//! [`replidyn_last_error`] on the same thread. Strings returned by the
//! library are freed with [`replidyn_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use replidyn::equilibrium::{certify_folk_theorem, FolkConfig};
use replidyn::experiment::{self, ExperimentConfig};
use replidyn::fitness::verify::verify_sop;
use replidyn::fitness::FitnessMap;
use replidyn::real::{BigFloat, Precision};
use replidyn::replicator::{iterate, DynamicsKind, Orbit, ReplicatorSystem};
use replidyn::simplex::SimplexPoint;
use replidyn::Error;

/// Status codes. Values 0..=4 coincide with the CLI exit codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplidynStatus {
    Ok = 0,
    ConfigError = 1,
    InvariantViolation = 2,
    CertificateFailed = 3,
    InsufficientData = 4,
    NullPointer = 5,
    InvalidArgument = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReplidynKind {
    Stable = 0,
    ZeroSumV1 = 1,
    ZeroSumV2 = 2,
}

impl From<ReplidynKind> for DynamicsKind {
    fn from(k: ReplidynKind) -> Self {
        match k {
            ReplidynKind::Stable => DynamicsKind::Stable,
            ReplidynKind::ZeroSumV1 => DynamicsKind::ZeroSumV1,
            ReplidynKind::ZeroSumV2 => DynamicsKind::ZeroSumV2,
        }
    }
}

/// A replicator system (fitness map plus dynamics kind).
pub struct ReplidynSystem {
    inner: ReplicatorSystem,
}

enum OrbitData {
    Native(Orbit<f64>),
    Big(Orbit<BigFloat>),
}

/// A stored orbit.
pub struct ReplidynOrbit {
    inner: OrbitData,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> ReplidynStatus {
    match experiment::exit_code(e) {
        2 => ReplidynStatus::InvariantViolation,
        4 => ReplidynStatus::InsufficientData,
        _ => ReplidynStatus::ConfigError,
    }
}

fn fail(e: Error) -> ReplidynStatus {
    set_error(&e.to_string());
    status_of(&e)
}

fn guard<F: FnOnce() -> ReplidynStatus>(f: F) -> ReplidynStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == ReplidynStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => {
            set_error("internal panic");
            ReplidynStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, ReplidynStatus> {
    if p.is_null() {
        set_error(&format!("{name} is null"));
        return Err(ReplidynStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error(&format!("{name} is not valid UTF-8"));
        ReplidynStatus::InvalidArgument
    })
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("nul bytes removed").into_raw()
}

macro_rules! try_ffi {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            set_error(concat!(stringify!($p), " is null"));
            return ReplidynStatus::NullPointer;
        })+
    };
}

/// Message of the last failed call on this thread (empty after a success).
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn replidyn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn replidyn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn replidyn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a system from a fitness document `{"m": .., "expr": {..}}`.
///
/// # Safety
/// `fitness_json` must be a valid C string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn replidyn_system_new(
    fitness_json: *const c_char,
    kind: ReplidynKind,
    out: *mut *mut ReplidynSystem,
) -> ReplidynStatus {
    guard(|| {
        non_null!(out);
        let text = try_ffi!(str_arg(fitness_json, "fitness_json"));
        let map = match FitnessMap::from_json(text) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        match ReplicatorSystem::new(map, kind.into()) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(ReplidynSystem { inner }));
                ReplidynStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `sys` must come from [`replidyn_system_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn replidyn_system_free(sys: *mut ReplidynSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Number of strategies `m` (0 for a null handle).
///
/// # Safety
/// `sys` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn replidyn_system_dim(sys: *const ReplidynSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.inner.m())
}

unsafe fn point_arg(x: *const f64, m: usize) -> Result<Vec<f64>, ReplidynStatus> {
    if x.is_null() {
        set_error("x is null");
        return Err(ReplidynStatus::NullPointer);
    }
    Ok(std::slice::from_raw_parts(x, m).to_vec())
}

/// One step of the map in double precision; writes `m` values to `out`.
///
/// # Safety
/// `x` and `out` must point to `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn replidyn_system_step(
    sys: *const ReplidynSystem,
    x: *const f64,
    m: usize,
    out: *mut f64,
) -> ReplidynStatus {
    guard(|| {
        non_null!(sys, out);
        let sys = &(*sys).inner;
        let coords = try_ffi!(point_arg(x, m));
        let p = match SimplexPoint::<f64>::new(coords) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        match sys.step(&p) {
            Ok(s) => {
                std::slice::from_raw_parts_mut(out, m).copy_from_slice(s.next.coords());
                ReplidynStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Iterates `steps` steps from `x0` at `precision_bits` (53 or 64..=4096),
/// keeping every `thinning`-th state.
///
/// # Safety
/// `x0` must point to `m` doubles and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn replidyn_iterate(
    sys: *const ReplidynSystem,
    x0: *const f64,
    m: usize,
    steps: usize,
    precision_bits: u32,
    thinning: usize,
    out: *mut *mut ReplidynOrbit,
) -> ReplidynStatus {
    guard(|| {
        non_null!(sys, out);
        let sys = &(*sys).inner;
        let coords = try_ffi!(point_arg(x0, m));
        let prec = match Precision::new(precision_bits) {
            Ok(p) => p,
            Err(e) => return fail(e),
        };
        let data = if prec.is_native() {
            SimplexPoint::<f64>::from_f64(&coords, 53)
                .and_then(|p| iterate(sys, &p, steps, thinning))
                .map(OrbitData::Native)
        } else {
            SimplexPoint::<BigFloat>::from_f64(&coords, prec.bits())
                .and_then(|p| iterate(sys, &p, steps, thinning))
                .map(OrbitData::Big)
        };
        match data {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(ReplidynOrbit { inner }));
                ReplidynStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `orbit` must come from [`replidyn_iterate`] or be null.
#[no_mangle]
pub unsafe extern "C" fn replidyn_orbit_free(orbit: *mut ReplidynOrbit) {
    if !orbit.is_null() {
        drop(Box::from_raw(orbit));
    }
}

/// Number of stored states, including the initial one.
///
/// # Safety
/// `orbit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn replidyn_orbit_len(orbit: *const ReplidynOrbit) -> usize {
    match orbit.as_ref().map(|o| &o.inner) {
        Some(OrbitData::Native(o)) => o.states.len(),
        Some(OrbitData::Big(o)) => o.states.len(),
        None => 0,
    }
}

/// Copies stored state `index` (rounded to double) into `out[0..m]` and its
/// step number into `step` (if non-null).
///
/// # Safety
/// `out` must point to `m` doubles.
#[no_mangle]
pub unsafe extern "C" fn replidyn_orbit_state(
    orbit: *const ReplidynOrbit,
    index: usize,
    out: *mut f64,
    m: usize,
    step: *mut usize,
) -> ReplidynStatus {
    guard(|| {
        non_null!(orbit, out);
        let (v, n) = match &(*orbit).inner {
            OrbitData::Native(o) => (o.states.get(index).map(|s| s.to_f64_vec()), o.stored_steps.get(index)),
            OrbitData::Big(o) => (o.states.get(index).map(|s| s.to_f64_vec()), o.stored_steps.get(index)),
        };
        let (Some(v), Some(&n)) = (v, n) else {
            set_error(&format!("state index {index} out of range"));
            return ReplidynStatus::InvalidArgument;
        };
        if v.len() != m {
            set_error(&format!("orbit has dimension {}, caller passed {m}", v.len()));
            return ReplidynStatus::InvalidArgument;
        }
        std::slice::from_raw_parts_mut(out, m).copy_from_slice(&v);
        if !step.is_null() {
            *step = n;
        }
        ReplidynStatus::Ok
    })
}

/// Largest pre-renormalization coordinate-sum drift over all steps.
///
/// # Safety
/// `orbit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn replidyn_orbit_max_drift(orbit: *const ReplidynOrbit) -> f64 {
    match orbit.as_ref().map(|o| &o.inner) {
        Some(OrbitData::Native(o)) => o.trace.max_drift(),
        Some(OrbitData::Big(o)) => o.trace.max_drift(),
        None => f64::NAN,
    }
}

/// Orbit CSV (`n,x1,...,xm,drift`). Free with [`replidyn_string_free`].
///
/// # Safety
/// `orbit` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn replidyn_orbit_csv(orbit: *const ReplidynOrbit) -> *mut c_char {
    match orbit.as_ref().map(|o| &o.inner) {
        Some(OrbitData::Native(o)) => into_c_string(o.to_csv()),
        Some(OrbitData::Big(o)) => into_c_string(o.to_csv()),
        None => ptr::null_mut(),
    }
}

/// Runs the folk-theorem certificate. Writes the report JSON to
/// `report_json` (free with [`replidyn_string_free`]) and returns
/// `CERTIFICATE_FAILED` when some clause fails.
///
/// # Safety
/// `report_json` must be a valid pointer or null.
#[no_mangle]
pub unsafe extern "C" fn replidyn_certify_folk(
    sys: *const ReplidynSystem,
    trials: usize,
    seed: u64,
    horizon: usize,
    tol: f64,
    report_json: *mut *mut c_char,
) -> ReplidynStatus {
    guard(|| {
        non_null!(sys);
        let mut cfg = FolkConfig {
            trials,
            seed,
            horizon,
            tol,
            ..Default::default()
        };
        cfg.probe.seed = seed;
        match certify_folk_theorem(&(*sys).inner, &cfg) {
            Ok(cert) => {
                if !report_json.is_null() {
                    *report_json = into_c_string(serde_json::to_string_pretty(&cert).expect("certificates serialize"));
                }
                if cert.passed {
                    ReplidynStatus::Ok
                } else {
                    set_error("folk certificate failed");
                    ReplidynStatus::CertificateFailed
                }
            }
            Err(e) => fail(e),
        }
    })
}

/// Counts similar-order violations of a fitness map over `samples` simplex
/// and `samples` ball points.
///
/// # Safety
/// `fitness_json` must be a valid C string and `violations` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn replidyn_verify_sop(
    fitness_json: *const c_char,
    samples: usize,
    seed: u64,
    violations: *mut usize,
) -> ReplidynStatus {
    guard(|| {
        non_null!(violations);
        let text = try_ffi!(str_arg(fitness_json, "fitness_json"));
        let map = match FitnessMap::from_json(text) {
            Ok(m) => m,
            Err(e) => return fail(e),
        };
        let r = verify_sop(&map, samples, seed);
        *violations = r.violation_count;
        if r.passed {
            ReplidynStatus::Ok
        } else {
            set_error(&format!("{} similar-order violations", r.violation_count));
            ReplidynStatus::CertificateFailed
        }
    })
}

/// Digamma function in double precision.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn replidyn_digamma(t: f64, out: *mut f64) -> ReplidynStatus {
    guard(|| {
        non_null!(out);
        match replidyn::fitness::special::digamma(t) {
            Ok(v) => {
                *out = v;
                ReplidynStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Runs a CLI subcommand (`simulate`, `verify-folk`, `verify-historic`)
/// on a config document, writing artifacts to `out_dir` (or the config's
/// directory when null). The status equals the CLI exit code.
///
/// # Safety
/// `command` and `config_json` must be valid C strings; `out_dir` may be
/// null.
#[no_mangle]
pub unsafe extern "C" fn replidyn_run(
    command: *const c_char,
    config_json: *const c_char,
    out_dir: *const c_char,
) -> ReplidynStatus {
    guard(|| {
        let command = try_ffi!(str_arg(command, "command"));
        let text = try_ffi!(str_arg(config_json, "config_json"));
        let dir = if out_dir.is_null() {
            None
        } else {
            Some(Path::new(try_ffi!(str_arg(out_dir, "out_dir"))))
        };
        let cfg = match ExperimentConfig::from_json(text) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        let outcome = match command {
            "simulate" => experiment::run_simulate(&cfg, dir),
            "verify-folk" => experiment::run_verify_folk(&cfg, dir).map(|r| r.0),
            "verify-historic" => experiment::run_verify_historic(&cfg, dir).map(|r| r.0),
            other => {
                set_error(&format!("unknown command {other:?}"));
                return ReplidynStatus::InvalidArgument;
            }
        };
        match outcome {
            Ok(o) => {
                let s = match o.code {
                    0 => ReplidynStatus::Ok,
                    2 => ReplidynStatus::InvariantViolation,
                    3 => ReplidynStatus::CertificateFailed,
                    4 => ReplidynStatus::InsufficientData,
                    _ => ReplidynStatus::ConfigError,
                };
                if s != ReplidynStatus::Ok {
                    set_error(&o.message);
                }
                s
            }
            Err(e) => fail(e),
        }
    })
}
