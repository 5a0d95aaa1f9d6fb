//! C ABI over the lattice measurement library: opaque handles, integer
//! status codes, and a thread-local last-error message.
//!
//! Ownership rules: every `*_new` output is owned by the caller and must
//! be released with the matching `*_free`; strings returned through
//! output parameters are released with `fp_string_free`. All functions
//! tolerate null pointers by returning `FP_STATUS_NULL_POINTER`. Handles
//! are not thread-safe for concurrent mutation of the same object;
//! distinct objects may be used from distinct threads freely.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;

use fieldprobe::config::ScenarioConfig;
use fieldprobe::scheme::ScatteringContext;
use fieldprobe::{experiments, report, GridFunction, Lattice};
use num_complex::Complex64 as C64;

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    PreconditionViolated = 3,
    ToleranceFailed = 4,
    Io = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &fieldprobe::Error) -> FpStatus {
    use fieldprobe::Error as E;
    set_error(&err.to_string());
    match err {
        E::Io(_) => FpStatus::Io,
        E::Config(_) | E::InvalidLattice(_) | E::CellOutOfRange { .. } | E::NonpositiveMass(_) => {
            FpStatus::InvalidArgument
        }
        _ => FpStatus::PreconditionViolated,
    }
}

/// Opaque lattice handle.
pub struct FpLattice {
    inner: Lattice,
}

/// Opaque complex grid function handle.
pub struct FpGrid {
    inner: GridFunction,
}

/// Library version string; static storage, do not free.
#[no_mangle]
pub extern "C" fn fp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message of the most recent error on this thread; static storage owned
/// by the library, valid until the next failing call.
#[no_mangle]
pub extern "C" fn fp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Creates a lattice. `n_t`, `n_x` are the grid extents, `dt`, `dx` the
/// spacings; dt/dx must not exceed one.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn fp_lattice_new(
    n_t: usize,
    n_x: usize,
    dt: f64,
    dx: f64,
    out: *mut *mut FpLattice,
) -> FpStatus {
    if out.is_null() {
        set_error("out pointer is null");
        return FpStatus::NullPointer;
    }
    match Lattice::new(n_t, n_x, dt, dx) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(FpLattice { inner }));
            FpStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Releases a lattice handle.
///
/// # Safety
/// `lattice` must be a pointer returned by `fp_lattice_new`, or null.
#[no_mangle]
pub unsafe extern "C" fn fp_lattice_free(lattice: *mut FpLattice) {
    if !lattice.is_null() {
        drop(Box::from_raw(lattice));
    }
}

/// Creates a zero grid function on the lattice.
///
/// # Safety
/// `lattice` must be valid; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn fp_grid_new(lattice: *const FpLattice, out: *mut *mut FpGrid) -> FpStatus {
    if lattice.is_null() || out.is_null() {
        set_error("null pointer argument");
        return FpStatus::NullPointer;
    }
    let inner = GridFunction::zeros((*lattice).inner);
    *out = Box::into_raw(Box::new(FpGrid { inner }));
    FpStatus::Ok
}

/// Releases a grid handle.
///
/// # Safety
/// `grid` must be a pointer returned by this library, or null.
#[no_mangle]
pub unsafe extern "C" fn fp_grid_free(grid: *mut FpGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Sets one cell value.
///
/// # Safety
/// `grid` must be valid and not shared across threads during the call.
#[no_mangle]
pub unsafe extern "C" fn fp_grid_set(
    grid: *mut FpGrid,
    t: usize,
    x: usize,
    re: f64,
    im: f64,
) -> FpStatus {
    if grid.is_null() {
        set_error("grid pointer is null");
        return FpStatus::NullPointer;
    }
    let g = &mut (*grid).inner;
    if t >= g.lattice().n_t {
        set_error("time index out of range");
        return FpStatus::InvalidArgument;
    }
    g.set(t, x % g.lattice().n_x, C64::new(re, im));
    FpStatus::Ok
}

/// Reads one cell value into `re`, `im`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn fp_grid_get(
    grid: *const FpGrid,
    t: usize,
    x: usize,
    re: *mut f64,
    im: *mut f64,
) -> FpStatus {
    if grid.is_null() || re.is_null() || im.is_null() {
        set_error("null pointer argument");
        return FpStatus::NullPointer;
    }
    let g = &(*grid).inner;
    if t >= g.lattice().n_t {
        set_error("time index out of range");
        return FpStatus::InvalidArgument;
    }
    let v = g.value(t, x % g.lattice().n_x);
    *re = v.re;
    *im = v.im;
    FpStatus::Ok
}

/// True (1) when the cell (t, x) lies in the discrete causal future
/// (`future != 0`) or past of the source cell.
///
/// # Safety
/// `lattice` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn fp_cone_contains(
    lattice: *const FpLattice,
    source_t: usize,
    source_x: usize,
    future: i32,
    t: usize,
    x: usize,
    out: *mut i32,
) -> FpStatus {
    if lattice.is_null() || out.is_null() {
        set_error("null pointer argument");
        return FpStatus::NullPointer;
    }
    let l = (*lattice).inner;
    if source_t >= l.n_t || t >= l.n_t {
        set_error("time index out of range");
        return FpStatus::InvalidArgument;
    }
    let (earlier, later) = if future != 0 { (source_t, t) } else { (t, source_t) };
    let inside = later >= earlier && l.circ_dist(x, source_x) <= later - earlier;
    *out = inside as i32;
    FpStatus::Ok
}

/// Computes the scattered pair (f_minus, h_minus) of a probe smearing
/// `h` for the two-field model with the given masses, coupling profile
/// `rho` scaled by `lambda`. The outputs are freshly allocated grids.
///
/// # Safety
/// `lattice`, `rho`, `h` must be valid handles on the same lattice;
/// `out_f_minus` and `out_h_minus` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn fp_scattered_pair(
    lattice: *const FpLattice,
    system_mass: f64,
    probe_mass: f64,
    rho: *const FpGrid,
    lambda: f64,
    h: *const FpGrid,
    out_f_minus: *mut *mut FpGrid,
    out_h_minus: *mut *mut FpGrid,
) -> FpStatus {
    if lattice.is_null() || rho.is_null() || h.is_null() || out_f_minus.is_null() || out_h_minus.is_null() {
        set_error("null pointer argument");
        return FpStatus::NullPointer;
    }
    let l = (*lattice).inner;
    let scaled = (*rho).inner.scaled(C64::from(lambda));
    let context = match ScatteringContext::system_probe(l, system_mass, probe_mass, &scaled) {
        Ok(c) => c,
        Err(e) => return status_of(&e),
    };
    match context.scattered_pair(&(*h).inner) {
        Ok(pair) => {
            *out_f_minus = Box::into_raw(Box::new(FpGrid { inner: pair.f_minus().clone() }));
            *out_h_minus = Box::into_raw(Box::new(FpGrid { inner: pair.h_minus().clone() }));
            FpStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Evaluates the variance decomposition of the measurement of `h` in the
/// vacuum preparation: total, system and probe contributions.
///
/// # Safety
/// Handles must be valid; output pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_variance_report(
    lattice: *const FpLattice,
    system_mass: f64,
    probe_mass: f64,
    rho: *const FpGrid,
    lambda: f64,
    h: *const FpGrid,
    out_total: *mut f64,
    out_system: *mut f64,
    out_probe: *mut f64,
) -> FpStatus {
    if lattice.is_null()
        || rho.is_null()
        || h.is_null()
        || out_total.is_null()
        || out_system.is_null()
        || out_probe.is_null()
    {
        set_error("null pointer argument");
        return FpStatus::NullPointer;
    }
    let l = (*lattice).inner;
    let scaled = (*rho).inner.scaled(C64::from(lambda));
    let result = (|| -> fieldprobe::Result<fieldprobe::scheme::VarianceReport> {
        let context = ScatteringContext::system_probe(l, system_mass, probe_mass, &scaled)?;
        let prep = fieldprobe::QuasifreeState::product(vec![
            fieldprobe::QuasifreeState::vacuum(l, system_mass)?,
            fieldprobe::QuasifreeState::vacuum(l, probe_mass)?,
        ])?;
        context.variance_report(&prep, &(*h).inner)
    })();
    match result {
        Ok(rep) => {
            *out_total = rep.var_total;
            *out_system = rep.var_system;
            *out_probe = rep.var_probe;
            FpStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Runs every experiment of a TOML scenario, writing report and data
/// files into `out_dir`, and returns the combined report array as a
/// JSON string through `out_json` (release with `fp_string_free`).
/// Returns `FP_STATUS_TOLERANCE_FAILED` when all experiments ran but at
/// least one failed its tolerance.
///
/// # Safety
/// `config_toml` and `out_dir` must be NUL-terminated strings; `out_json`
/// must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn fp_run_scenario(
    config_toml: *const c_char,
    out_dir: *const c_char,
    out_json: *mut *mut c_char,
) -> FpStatus {
    if config_toml.is_null() || out_dir.is_null() || out_json.is_null() {
        set_error("null pointer argument");
        return FpStatus::NullPointer;
    }
    let Ok(text) = CStr::from_ptr(config_toml).to_str() else {
        set_error("config is not valid UTF-8");
        return FpStatus::InvalidArgument;
    };
    let Ok(dir) = CStr::from_ptr(out_dir).to_str() else {
        set_error("out_dir is not valid UTF-8");
        return FpStatus::InvalidArgument;
    };
    let outcome = (|| -> fieldprobe::Result<(String, bool)> {
        let cfg = ScenarioConfig::from_toml(text)?;
        let prepared = cfg.prepare()?;
        std::fs::create_dir_all(dir)?;
        let hash = report::config_hash(text);
        let mut all_pass = true;
        let mut reports = Vec::new();
        for (index, spec) in cfg.experiments.iter().enumerate() {
            let value = experiments::run_experiment(&prepared, spec, &hash, cfg.seed, Path::new(dir))?;
            all_pass &= value["pass"].as_bool().unwrap_or(false);
            std::fs::write(
                Path::new(dir).join(format!("{index:02}_{}.json", spec.name)),
                report::canonical_json(&value),
            )?;
            reports.push(value);
        }
        Ok((report::canonical_json(&serde_json_value_array(reports)), all_pass))
    })();
    match outcome {
        Ok((json, all_pass)) => {
            let c = CString::new(json.replace('\0', " ")).unwrap_or_default();
            *out_json = c.into_raw();
            if all_pass {
                FpStatus::Ok
            } else {
                set_error("at least one experiment failed its tolerance");
                FpStatus::ToleranceFailed
            }
        }
        Err(e) => status_of(&e),
    }
}

fn serde_json_value_array(items: Vec<serde_json::Value>) -> serde_json::Value {
    serde_json::Value::Array(items)
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must originate from this library, or be null.
#[no_mangle]
pub unsafe extern "C" fn fp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
