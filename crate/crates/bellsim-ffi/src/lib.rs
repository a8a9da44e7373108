//! C ABI for the bellsim simulator.
//!
//! Foreign callers work with two opaque handles: `BellsimConfig` (an
//! experiment configuration, created from defaults, a file, or text) and
//! `BellsimTable` (the result table of a scenario run). Every fallible
//! call returns a [`BellsimStatus`]; on failure a thread-local message is
//! available from [`bellsim_last_error_message`] until the next failing
//! call on the same thread.
//!
//! The matching header is generated into `include/bellsim.h` at build
//! time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};

use bellsim::analysis::find_optimal_angles;
use bellsim::config::{load_config, parse_config, ExperimentConfig};
use bellsim::detection::{analytic_correlation, AnalyzerSetting};
use bellsim::model::EffectiveTwoPhotonState;
use bellsim::scenario::{run_scenario, table_to_string, write_table, ResultTable};

/// Status code of a C-ABI call. `Ok` is zero; configuration and runtime
/// failures mirror the CLI exit codes 2 and 3.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellsimStatus {
    Ok = 0,
    NullArgument = 1,
    ConfigError = 2,
    RuntimeError = 3,
    InvalidUtf8 = 4,
    IoError = 5,
}

/// Opaque experiment configuration handle.
pub struct BellsimConfig {
    inner: ExperimentConfig,
}

/// Opaque result-table handle.
pub struct BellsimTable {
    inner: ResultTable,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() =
            CString::new(message).unwrap_or_else(|_| CString::new("invalid error text").unwrap());
    });
}

fn fail(status: BellsimStatus, message: impl Into<String>) -> BellsimStatus {
    set_error(message);
    status
}

/// Reads a required C-string argument.
unsafe fn required_str<'a>(ptr: *const c_char, name: &str) -> Result<&'a str, BellsimStatus> {
    if ptr.is_null() {
        return Err(fail(
            BellsimStatus::NullArgument,
            format!("argument `{name}` is null"),
        ));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        fail(
            BellsimStatus::InvalidUtf8,
            format!("argument `{name}` is not valid UTF-8"),
        )
    })
}

unsafe fn required_ref<'a, T>(ptr: *const T, name: &str) -> Result<&'a T, BellsimStatus> {
    ptr.as_ref().ok_or_else(|| {
        fail(
            BellsimStatus::NullArgument,
            format!("argument `{name}` is null"),
        )
    })
}

/// Version string of the library; statically allocated, do not free.
#[no_mangle]
pub extern "C" fn bellsim_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message describing the most recent failure on this thread. The pointer
/// stays valid until the next failing call on the same thread; do not
/// free it.
#[no_mangle]
pub extern "C" fn bellsim_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Creates a configuration with the built-in defaults. Free with
/// [`bellsim_config_free`].
#[no_mangle]
pub extern "C" fn bellsim_config_new() -> *mut BellsimConfig {
    Box::into_raw(Box::new(BellsimConfig {
        inner: ExperimentConfig::default(),
    }))
}

/// Loads a configuration file.
///
/// # Safety
/// `path` must be a valid NUL-terminated string and `out` a valid
/// destination pointer. On success `*out` owns a new handle.
#[no_mangle]
pub unsafe extern "C" fn bellsim_config_load(
    path: *const c_char,
    out: *mut *mut BellsimConfig,
) -> BellsimStatus {
    if out.is_null() {
        return fail(BellsimStatus::NullArgument, "argument `out` is null");
    }
    let path = match required_str(path, "path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match load_config(path) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(BellsimConfig { inner }));
            BellsimStatus::Ok
        }
        Err(err) => fail(BellsimStatus::ConfigError, err.to_string()),
    }
}

/// Parses configuration text (same format as a configuration file).
///
/// # Safety
/// `text` must be a valid NUL-terminated string and `out` a valid
/// destination pointer. On success `*out` owns a new handle.
#[no_mangle]
pub unsafe extern "C" fn bellsim_config_parse(
    text: *const c_char,
    out: *mut *mut BellsimConfig,
) -> BellsimStatus {
    if out.is_null() {
        return fail(BellsimStatus::NullArgument, "argument `out` is null");
    }
    let text = match required_str(text, "text") {
        Ok(t) => t,
        Err(status) => return status,
    };
    match parse_config(text) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(BellsimConfig { inner }));
            BellsimStatus::Ok
        }
        Err(err) => fail(BellsimStatus::ConfigError, err.to_string()),
    }
}

/// Applies one `key = value` assignment to a configuration, using the
/// configuration-file vocabulary (e.g. `scenario`, `seed`,
/// `trials_per_point`, `eps_b_plus`).
///
/// # Safety
/// `config` must be a live handle from this library; `key` and `value`
/// must be valid NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn bellsim_config_set(
    config: *mut BellsimConfig,
    key: *const c_char,
    value: *const c_char,
) -> BellsimStatus {
    let config = match config.as_mut() {
        Some(c) => c,
        None => return fail(BellsimStatus::NullArgument, "argument `config` is null"),
    };
    let key = match required_str(key, "key") {
        Ok(k) => k,
        Err(status) => return status,
    };
    let value = match required_str(value, "value") {
        Ok(v) => v,
        Err(status) => return status,
    };
    match config.inner.set_key(key, value) {
        Ok(()) => BellsimStatus::Ok,
        Err(err) => fail(BellsimStatus::ConfigError, err.to_string()),
    }
}

/// Releases a configuration handle. Passing null is a no-op.
///
/// # Safety
/// `config` must be null or a live handle from this library; it must not
/// be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bellsim_config_free(config: *mut BellsimConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Derives the effective two-photon state of a configuration and writes
/// its mixing angle (radians), relative phase (radians), and pair
/// probability per trial.
///
/// # Safety
/// `config` must be a live handle; output pointers must be valid or null
/// (null outputs are skipped).
#[no_mangle]
pub unsafe extern "C" fn bellsim_effective_state(
    config: *const BellsimConfig,
    eta_f_out: *mut f64,
    phi_f_out: *mut f64,
    p_pair_out: *mut f64,
) -> BellsimStatus {
    let config = match required_ref(config, "config") {
        Ok(c) => c,
        Err(status) => return status,
    };
    match config.inner.effective_state() {
        Ok(state) => {
            if !eta_f_out.is_null() {
                *eta_f_out = state.eta_f;
            }
            if !phi_f_out.is_null() {
                *phi_f_out = state.phi_f;
            }
            if !p_pair_out.is_null() {
                *p_pair_out = state.p_pair;
            }
            BellsimStatus::Ok
        }
        Err(err) => fail(BellsimStatus::RuntimeError, err.to_string()),
    }
}

/// Closed-form correlation `E(θ_A, θ_B)` of the two-photon state with
/// mixing angle `eta_f` and phase `phi_f` (radians), at analyzer
/// rotations in degrees and the given visibility.
#[no_mangle]
pub extern "C" fn bellsim_analytic_correlation(
    eta_f: f64,
    phi_f: f64,
    theta_a_deg: f64,
    theta_b_deg: f64,
    visibility: f64,
) -> f64 {
    let state = EffectiveTwoPhotonState::new(eta_f, phi_f, 1.0);
    analytic_correlation(
        &state,
        &AnalyzerSetting::new(theta_a_deg, theta_b_deg),
        visibility,
    )
}

/// Finds the analyzer angles maximizing the Bell parameter of the state.
/// `angles_deg_out` receives (θ_A, θ_A', θ_B, θ_B') in degrees.
///
/// # Safety
/// `angles_deg_out`, when non-null, must point to at least four doubles;
/// `s_out` must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn bellsim_optimal_angles(
    eta_f: f64,
    phi_f: f64,
    visibility: f64,
    angles_deg_out: *mut f64,
    s_out: *mut f64,
) -> BellsimStatus {
    let state = EffectiveTwoPhotonState::new(eta_f, phi_f, 1.0);
    let opt = find_optimal_angles(&state, visibility);
    if !angles_deg_out.is_null() {
        let slice = std::slice::from_raw_parts_mut(angles_deg_out, 4);
        slice[0] = opt.theta_a_deg;
        slice[1] = opt.theta_a_prime_deg;
        slice[2] = opt.theta_b_deg;
        slice[3] = opt.theta_b_prime_deg;
    }
    if !s_out.is_null() {
        *s_out = opt.predicted_s;
    }
    BellsimStatus::Ok
}

/// Runs the configuration's scenario and returns a result table. Free the
/// table with [`bellsim_table_free`].
///
/// # Safety
/// `config` must be a live handle and `out` a valid destination pointer.
#[no_mangle]
pub unsafe extern "C" fn bellsim_run_scenario(
    config: *const BellsimConfig,
    out: *mut *mut BellsimTable,
) -> BellsimStatus {
    if out.is_null() {
        return fail(BellsimStatus::NullArgument, "argument `out` is null");
    }
    let config = match required_ref(config, "config") {
        Ok(c) => c,
        Err(status) => return status,
    };
    match run_scenario(&config.inner) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(BellsimTable { inner }));
            BellsimStatus::Ok
        }
        Err(err) => fail(BellsimStatus::RuntimeError, err.to_string()),
    }
}

/// Number of rows in a result table.
///
/// # Safety
/// `table` must be a live handle; null yields zero.
#[no_mangle]
pub unsafe extern "C" fn bellsim_table_rows(table: *const BellsimTable) -> usize {
    table.as_ref().map_or(0, |t| t.inner.rows.len())
}

/// Extracts the Bell parameter row of a `chsh` or `oracle` table. Writes
/// S and its uncertainty (NaN when the table carries no sampling
/// uncertainty, as in oracle output).
///
/// # Safety
/// `table` must be a live handle; output pointers must be valid or null.
#[no_mangle]
pub unsafe extern "C" fn bellsim_table_bell(
    table: *const BellsimTable,
    s_out: *mut f64,
    sigma_out: *mut f64,
) -> BellsimStatus {
    let table = match required_ref(table, "table") {
        Ok(t) => t,
        Err(status) => return status,
    };
    let row = table.inner.rows.iter().rev().find(|r| r.s_value.is_some());
    match row {
        Some(row) => {
            if !s_out.is_null() {
                *s_out = row.s_value.unwrap_or(f64::NAN);
            }
            if !sigma_out.is_null() {
                *sigma_out = row.sigma_s.unwrap_or(f64::NAN);
            }
            BellsimStatus::Ok
        }
        None => fail(
            BellsimStatus::RuntimeError,
            "table contains no Bell-parameter row",
        ),
    }
}

/// Renders the table as CSV. The returned string must be released with
/// [`bellsim_string_free`].
///
/// # Safety
/// `table` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn bellsim_table_to_csv(table: *const BellsimTable) -> *mut c_char {
    match table.as_ref() {
        Some(t) => {
            let csv = table_to_string(&t.inner);
            CString::new(csv)
                .map(CString::into_raw)
                .unwrap_or(std::ptr::null_mut())
        }
        None => {
            set_error("argument `table` is null");
            std::ptr::null_mut()
        }
    }
}

/// Writes the table as CSV to `path`.
///
/// # Safety
/// `table` must be a live handle and `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bellsim_table_write_csv(
    table: *const BellsimTable,
    path: *const c_char,
) -> BellsimStatus {
    let table = match required_ref(table, "table") {
        Ok(t) => t,
        Err(status) => return status,
    };
    let path = match required_str(path, "path") {
        Ok(p) => p,
        Err(status) => return status,
    };
    match write_table(&table.inner, path) {
        Ok(()) => BellsimStatus::Ok,
        Err(err) => fail(BellsimStatus::IoError, err.to_string()),
    }
}

/// Releases a result-table handle. Passing null is a no-op.
///
/// # Safety
/// `table` must be null or a live handle; it must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bellsim_table_free(table: *mut BellsimTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Releases a string returned by [`bellsim_table_to_csv`]. Passing null
/// is a no-op.
///
/// # Safety
/// `s` must be null or a string allocated by this library; it must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bellsim_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
