//! C ABI for the typecount library.
//!
//! Every entry point returns a [`TcStatus`]. Results come back through out
//! pointers, which are left untouched on failure. After a non-OK status the
//! message is available from [`tc_last_error`] on the same thread.
//!
//! Handles are opaque and owned by the caller; release them with the
//! matching `*_free` function. Passing NULL to a `*_free` function is a no-op.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use typecount::exact::{self, TypeDistribution};
use typecount::{asymptotic, io, Error, ErrorKind, Extended, Measure, RateTable};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Validation = 4,
    /// The measure violates a condition required by the computation.
    Condition = 5,
    Numerical = 6,
    OutOfRange = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

pub struct TcMeasure(Measure);

pub struct TcRateTable(RateTable);

pub struct TcTypeDistribution(TypeDistribution);

/// Integrability summary of a measure. Infinite integrals are reported as
/// `INFINITY`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcConditions {
    pub proper_frequencies: bool,
    pub simple: bool,
    pub h1: f64,
    pub m0: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: TcStatus, msg: impl Into<String>) -> TcStatus {
    set_error(msg.into());
    status
}

fn from_error(err: Error) -> TcStatus {
    let status = match (&err, err.kind()) {
        (Error::Parse(_), _) => TcStatus::Parse,
        (_, ErrorKind::Validation) => TcStatus::Validation,
        (_, ErrorKind::Condition) => TcStatus::Condition,
        (_, ErrorKind::Numerical) | (_, ErrorKind::Io) => TcStatus::Numerical,
    };
    fail(status, err.to_string())
}

fn guard(f: impl FnOnce() -> TcStatus) -> TcStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(TcStatus::Panic, format!("panic: {msg}"))
        }
    }
}

macro_rules! deref {
    ($p:expr, $name:literal) => {
        match unsafe { $p.as_ref() } {
            Some(v) => v,
            None => return fail(TcStatus::NullPointer, concat!($name, " is NULL")),
        }
    };
}

macro_rules! out {
    ($p:expr, $name:literal) => {
        match unsafe { $p.as_mut() } {
            Some(v) => v,
            None => return fail(TcStatus::NullPointer, concat!($name, " is NULL")),
        }
    };
}

fn store<T>(out: &mut *mut T, value: T) -> TcStatus {
    *out = Box::into_raw(Box::new(value));
    TcStatus::Ok
}

unsafe fn release<T>(p: *mut T) {
    if !p.is_null() {
        drop(unsafe { Box::from_raw(p) });
    }
}

fn extended(v: Extended) -> f64 {
    v.finite().unwrap_or(f64::INFINITY)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tc_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn tc_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses and validates a measure given as JSON text.
///
/// # Safety
/// `json` must be NULL or a NUL-terminated string; `out` must be NULL or
/// writable.
#[no_mangle]
pub unsafe extern "C" fn tc_measure_from_json(json: *const c_char, out: *mut *mut TcMeasure) -> TcStatus {
    guard(|| {
        if json.is_null() {
            return fail(TcStatus::NullPointer, "json is NULL");
        }
        let out = out!(out, "out");
        let text = match unsafe { CStr::from_ptr(json) }.to_str() {
            Ok(t) => t,
            Err(e) => return fail(TcStatus::InvalidUtf8, e.to_string()),
        };
        match io::parse_measure(text) {
            Ok(m) => store(out, TcMeasure(m)),
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `measure` must be NULL or a handle from [`tc_measure_from_json`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn tc_measure_free(measure: *mut TcMeasure) {
    unsafe { release(measure) }
}

/// # Safety
/// `measure` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_measure_conditions(measure: *const TcMeasure, out: *mut TcConditions) -> TcStatus {
    guard(|| {
        let m = deref!(measure, "measure");
        let out = out!(out, "out");
        let c = m.0.condition_report();
        *out = TcConditions {
            proper_frequencies: c.proper_freq_condition,
            simple: c.simple_condition,
            h1: extended(c.h1),
            m0: extended(c.m0),
        };
        TcStatus::Ok
    })
}

/// Laplace exponent `Φ(η)` of the subordinator `-log S_t`.
///
/// # Safety
/// `measure` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_laplace_exponent(measure: *const TcMeasure, eta: f64, out: *mut f64) -> TcStatus {
    guard(|| {
        let m = deref!(measure, "measure");
        let out = out!(out, "out");
        match m.0.laplace_exponent(eta) {
            Ok(v) => {
                *out = v;
                TcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `measure` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_rate_table_build(measure: *const TcMeasure, n_max: usize, out: *mut *mut TcRateTable) -> TcStatus {
    guard(|| {
        let m = deref!(measure, "measure");
        let out = out!(out, "out");
        match RateTable::build(&m.0, n_max) {
            Ok(t) => store(out, TcRateTable(t)),
            Err(e) => from_error(e),
        }
    })
}

/// Rate `g(m, k)` at which `m` blocks merge into `k`, for `1 <= k < m <= n_max`.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_rate_table_rate(table: *const TcRateTable, m: usize, k: usize, out: *mut f64) -> TcStatus {
    guard(|| {
        let t = deref!(table, "table");
        let out = out!(out, "out");
        if m < 2 || m > t.0.n_max() || k == 0 || k >= m {
            return fail(TcStatus::OutOfRange, format!("need 1 <= k < m <= {}, got m = {m}, k = {k}", t.0.n_max()));
        }
        *out = t.0.g(m, k);
        TcStatus::Ok
    })
}

/// Total rate `g(m)` out of `m` blocks, for `2 <= m <= n_max`.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_rate_table_total(table: *const TcRateTable, m: usize, out: *mut f64) -> TcStatus {
    guard(|| {
        let t = deref!(table, "table");
        let out = out!(out, "out");
        if m < 2 || m > t.0.n_max() {
            return fail(TcStatus::OutOfRange, format!("need 2 <= m <= {}, got {m}", t.0.n_max()));
        }
        *out = t.0.total(m);
        TcStatus::Ok
    })
}

/// # Safety
/// `table` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_rate_table_free(table: *mut TcRateTable) {
    unsafe { release(table) }
}

/// Distribution of the number of types for every sample size up to `n`.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_type_distribution(
    table: *const TcRateTable,
    r: f64,
    n: usize,
    out: *mut *mut TcTypeDistribution,
) -> TcStatus {
    guard(|| {
        let t = deref!(table, "table");
        let out = out!(out, "out");
        match exact::type_distribution(&t.0, r, n) {
            Ok(d) => store(out, TcTypeDistribution(d)),
            Err(e) => from_error(e),
        }
    })
}

/// `P(K_m = k)` for `1 <= k <= m <= n`.
///
/// # Safety
/// `dist` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_type_distribution_prob(dist: *const TcTypeDistribution, m: usize, k: usize, out: *mut f64) -> TcStatus {
    guard(|| {
        let d = deref!(dist, "dist");
        let out = out!(out, "out");
        if m == 0 || m > d.0.n || k == 0 || k > m {
            return fail(TcStatus::OutOfRange, format!("need 1 <= k <= m <= {}, got m = {m}, k = {k}", d.0.n));
        }
        *out = d.0.prob(m, k);
        TcStatus::Ok
    })
}

/// `E(K_m)` for `1 <= m <= n`.
///
/// # Safety
/// `dist` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_type_distribution_mean(dist: *const TcTypeDistribution, m: usize, out: *mut f64) -> TcStatus {
    guard(|| {
        let d = deref!(dist, "dist");
        let out = out!(out, "out");
        if m == 0 || m > d.0.n {
            return fail(TcStatus::OutOfRange, format!("need 1 <= m <= {}, got {m}", d.0.n));
        }
        *out = d.0.mean(m);
        TcStatus::Ok
    })
}

/// # Safety
/// `dist` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn tc_type_distribution_free(dist: *mut TcTypeDistribution) {
    unsafe { release(dist) }
}

/// `P(K_n = n)`, computed without building the full distribution.
///
/// # Safety
/// `table` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tc_all_singletons_probability(table: *const TcRateTable, r: f64, n: usize, out: *mut f64) -> TcStatus {
    guard(|| {
        let t = deref!(table, "table");
        let out = out!(out, "out");
        match exact::all_singletons_probability(&t.0, r, n) {
            Ok(v) => {
                *out = v;
                TcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Writes `E(K^j)`, `j = 0..len-1`, of the almost sure limit `K` of
/// `K_n / n` into `buf`. Fails with `TC_STATUS_CONDITION` when the measure
/// has no such limit.
///
/// # Safety
/// `measure` must be a live handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tc_limit_moments(measure: *const TcMeasure, r: f64, buf: *mut f64, len: usize) -> TcStatus {
    guard(|| {
        let m = deref!(measure, "measure");
        if buf.is_null() {
            return fail(TcStatus::NullPointer, "buf is NULL");
        }
        if len < 2 {
            return fail(TcStatus::BufferTooSmall, format!("need room for at least 2 moments, got {len}"));
        }
        match asymptotic::limit_law(&m.0, r, len - 1) {
            Ok(law) => {
                let out = unsafe { std::slice::from_raw_parts_mut(buf, len) };
                out.copy_from_slice(&law.moments);
                TcStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}
