//! C ABI for `oneform_lab`.
//!
//! Every object crosses the boundary as an opaque pointer created by an
//! `ofl_*_new*` / `ofl_*_parse` / `ofl_run` call and released with the
//! matching `ofl_*_destroy`. Every fallible function returns an
//! [`OflStatus`]; on failure [`ofl_last_error`] describes the cause. Panics
//! never unwind into the caller: they surface as [`OflStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use oneform_lab::cli::{self, CliError, Report, ScenarioConfig, ScenarioKind};
use oneform_lab::evolution::{loop_residual, Rectangle};
use oneform_lab::hierarchy::{
    builtin, zero_curvature_residual, Basis, Builtin, HamiltonianHierarchy, TimePoint,
    DEFAULT_FD_STEP,
};
use oneform_lab::kernelflow::ho_kernel;
use oneform_lab::timelattice::{count_paths, LatticeSpec};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OflStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed or out-of-range configuration or argument.
    Config = 3,
    /// A numerical operation failed (caustic, degenerate composition, …).
    Compute = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OflScenario {
    Curvature = 0,
    Loop = 1,
    Paths = 2,
    Kernel = 3,
    Closure = 4,
    FullSuite = 5,
}

impl From<OflScenario> for ScenarioKind {
    fn from(s: OflScenario) -> Self {
        match s {
            OflScenario::Curvature => ScenarioKind::Curvature,
            OflScenario::Loop => ScenarioKind::Loop,
            OflScenario::Paths => ScenarioKind::Paths,
            OflScenario::Kernel => ScenarioKind::Kernel,
            OflScenario::Closure => ScenarioKind::Closure,
            OflScenario::FullSuite => ScenarioKind::FullSuite,
        }
    }
}

/// Harmonic-oscillator kernel `A exp((i/ħ)(a x″² + 2b x″x′ + c x′²))`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OflKernel {
    pub a_re: f64,
    pub a_im: f64,
    pub b_re: f64,
    pub b_im: f64,
    pub c_re: f64,
    pub c_im: f64,
    pub amplitude_re: f64,
    pub amplitude_im: f64,
    pub phase_index: i64,
}

/// Scenario configuration.
pub struct OflConfig(ScenarioConfig);

/// Outcome of a scenario run.
pub struct OflReport(Report);

/// Multi-time Hamiltonian hierarchy with two time directions.
pub struct OflHierarchy(HamiltonianHierarchy);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(OflStatus, String);

impl From<CliError> for Failure {
    fn from(e: CliError) -> Self {
        let status = match e {
            CliError::Config(_) => OflStatus::Config,
            CliError::Compute { .. } => OflStatus::Compute,
            CliError::Io(_) => OflStatus::Io,
        };
        Failure(status, e.message())
    }
}

impl From<oneform_lab::Error> for Failure {
    fn from(e: oneform_lab::Error) -> Self {
        use oneform_lab::Error as E;
        let status = match e {
            E::InvalidArgument(_)
            | E::DimMismatch { .. }
            | E::IndexOutOfRange { .. }
            | E::NegativeDuration(_)
            | E::TooLarge(_)
            | E::StepTooSmall(_) => OflStatus::Config,
            _ => OflStatus::Compute,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(OflStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, recording failures and containing panics.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> OflStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OflStatus::Ok
        }
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
            OflStatus::Panic
        }
    }
}

unsafe fn utf8<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(OflStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = value;
    Ok(())
}

unsafe fn destroy<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message describing the most recent failure on the calling thread, or
/// null after a successful call. Valid until the next `ofl_*` call on the
/// same thread.
#[no_mangle]
pub extern "C" fn ofl_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ofl_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Default configuration for `scenario`.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ofl_config_new(
    scenario: OflScenario,
    out: *mut *mut OflConfig,
) -> OflStatus {
    guard(|| {
        let cfg = ScenarioConfig {
            scenario: scenario.into(),
            ..ScenarioConfig::default()
        };
        store(out, OflConfig(cfg))
    })
}

/// Configuration from TOML (`is_json == 0`) or JSON text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ofl_config_parse(
    text: *const c_char,
    is_json: i32,
    out: *mut *mut OflConfig,
) -> OflStatus {
    guard(|| {
        let src = utf8(text, "text")?;
        let cfg = ScenarioConfig::parse_str(src, is_json != 0)?;
        cfg.validate()?;
        store(out, OflConfig(cfg))
    })
}

/// Configuration from a `.toml` or `.json` file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ofl_config_load(
    path: *const c_char,
    out: *mut *mut OflConfig,
) -> OflStatus {
    guard(|| {
        let path = PathBuf::from(utf8(path, "path")?);
        let cfg = ScenarioConfig::load(&path)?;
        cfg.validate()?;
        store(out, OflConfig(cfg))
    })
}

/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn ofl_config_set_scenario(
    cfg: *mut OflConfig,
    scenario: OflScenario,
) -> OflStatus {
    guard(|| {
        handle_mut(cfg, "config")?.0.scenario = scenario.into();
        Ok(())
    })
}

/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn ofl_config_set_seed(cfg: *mut OflConfig, seed: u64) -> OflStatus {
    guard(|| {
        handle_mut(cfg, "config")?.0.seed = seed;
        Ok(())
    })
}

/// Sets `ħ` for both the operator hierarchies and the 1-form kernels.
///
/// # Safety
/// `cfg` must be a live configuration handle.
#[no_mangle]
pub unsafe extern "C" fn ofl_config_set_hbar(cfg: *mut OflConfig, hbar: f64) -> OflStatus {
    guard(|| {
        let c = &mut handle_mut(cfg, "config")?.0;
        c.hierarchy.hbar = hbar;
        c.oneform.hbar = hbar;
        Ok(())
    })
}

/// Effective configuration serialized as JSON. Release with
/// [`ofl_string_destroy`].
///
/// # Safety
/// `cfg` must be a live configuration handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ofl_config_to_json(
    cfg: *const OflConfig,
    out: *mut *mut c_char,
) -> OflStatus {
    guard(|| {
        let json = serde_json::to_string_pretty(&handle(cfg, "config")?.0)
            .map_err(|e| Failure(OflStatus::Io, e.to_string()))?;
        put(out, into_c_string(json))
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet destroyed.
#[no_mangle]
pub unsafe extern "C" fn ofl_config_destroy(cfg: *mut OflConfig) {
    destroy(cfg);
}

/// Validates `cfg` and runs its scenario. Assertion failures are not an
/// error: inspect them with [`ofl_report_pass`].
///
/// # Safety
/// `cfg` must be a live configuration handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ofl_run(cfg: *const OflConfig, out: *mut *mut OflReport) -> OflStatus {
    guard(|| {
        let cfg = &handle(cfg, "config")?.0;
        cfg.validate()?;
        store(out, OflReport(cli::execute(cfg)?))
    })
}

/// # Safety
/// `report` must be a live report handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ofl_report_pass(report: *const OflReport, out: *mut bool) -> OflStatus {
    guard(|| put(out, handle(report, "report")?.0.pass))
}

/// # Safety
/// `report` must be a live report handle; `total` and `failed` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ofl_report_counts(
    report: *const OflReport,
    total: *mut u64,
    failed: *mut u64,
) -> OflStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        put(total, r.assertions_total as u64)?;
        put(failed, r.assertions_failed as u64)
    })
}

/// Report serialized as JSON (the `report.json` contents). Release with
/// [`ofl_string_destroy`].
///
/// # Safety
/// `report` must be a live report handle; `out` valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ofl_report_to_json(
    report: *const OflReport,
    out: *mut *mut c_char,
) -> OflStatus {
    guard(|| {
        let json = serde_json::to_string_pretty(&handle(report, "report")?.0)
            .map_err(|e| Failure(OflStatus::Io, e.to_string()))?;
        put(out, into_c_string(json))
    })
}

/// Writes `report.json` and the CSV tables into `dir`, creating it.
///
/// # Safety
/// `report` must be a live report handle; `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ofl_report_write(
    report: *const OflReport,
    dir: *const c_char,
) -> OflStatus {
    guard(|| {
        let r = &handle(report, "report")?.0;
        Ok(r.write(&PathBuf::from(utf8(dir, "dir")?))?)
    })
}

/// # Safety
/// `report` must be null or a handle not yet destroyed.
#[no_mangle]
pub unsafe extern "C" fn ofl_report_destroy(report: *mut OflReport) {
    destroy(report);
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("interior NUL removed")
        .into_raw()
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet destroyed.
#[no_mangle]
pub unsafe extern "C" fn ofl_string_destroy(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Free hierarchy `H₁ = p`, `H₂ = p²/2` on a `dim`-point balanced grid.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ofl_hierarchy_new_free(
    dim: usize,
    out: *mut *mut OflHierarchy,
) -> OflStatus {
    guard(|| {
        let h = builtin(
            &Builtin::Free { orders: vec![1, 2] },
            dim,
            Basis::balanced_grid(dim),
        )?;
        store(out, OflHierarchy(h))
    })
}

/// Oscillator pair `H_j = p²/2 + ω_j² q²/2` in a truncated number basis.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn ofl_hierarchy_new_oscillator_pair(
    dim: usize,
    omega1: f64,
    omega2: f64,
    hbar: f64,
    out: *mut *mut OflHierarchy,
) -> OflStatus {
    guard(|| {
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Failure(
                OflStatus::Config,
                format!("hbar must be positive, got {hbar}"),
            ));
        }
        let h = builtin(
            &Builtin::OscillatorPair { omega1, omega2 },
            dim,
            Basis::Oscillator,
        )?
        .with_hbar(hbar);
        store(out, OflHierarchy(h))
    })
}

/// Frobenius norm of the zero-curvature residual `Z₁₂` at `(t1, t2)`.
///
/// # Safety
/// `h` must be a live hierarchy handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ofl_hierarchy_curvature(
    h: *const OflHierarchy,
    t1: f64,
    t2: f64,
    out: *mut f64,
) -> OflStatus {
    guard(|| {
        let h = &handle(h, "hierarchy")?.0;
        let t = TimePoint::new(vec![t1, t2])?;
        put(
            out,
            zero_curvature_residual(h, 0, 1, &t, DEFAULT_FD_STEP)?.norm,
        )
    })
}

/// `‖U_loop − I‖_F` around the rectangle with corner `(t1, t2)` and sides
/// `(side1, side2)`, integrated with `steps_per_unit` steps per unit time.
///
/// # Safety
/// `h` must be a live hierarchy handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ofl_hierarchy_loop_residual(
    h: *const OflHierarchy,
    t1: f64,
    t2: f64,
    side1: f64,
    side2: f64,
    steps_per_unit: usize,
    out: *mut f64,
) -> OflStatus {
    guard(|| {
        let h = &handle(h, "hierarchy")?.0;
        let rect = Rectangle::new(TimePoint::new(vec![t1, t2])?, (0, 1), (side1, side2))?;
        put(out, loop_residual(h, &rect, steps_per_unit)?)
    })
}

/// # Safety
/// `h` must be null or a handle not yet destroyed.
#[no_mangle]
pub unsafe extern "C" fn ofl_hierarchy_destroy(h: *mut OflHierarchy) {
    destroy(h);
}

/// Number of monotone staircase paths from the origin to `(steps, …, steps)`
/// with `n_times` axes.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ofl_count_paths(n_times: usize, steps: u32, out: *mut u64) -> OflStatus {
    guard(|| {
        let spec = LatticeSpec::unit(n_times, steps)?;
        let n = u64::try_from(count_paths(&spec))
            .map_err(|_| Failure(OflStatus::Config, "path count exceeds 64 bits".into()))?;
        put(out, n)
    })
}

/// Exact harmonic-oscillator kernel for one degree of freedom.
///
/// # Safety
/// `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn ofl_ho_kernel(
    omega: f64,
    duration: f64,
    hbar: f64,
    out: *mut OflKernel,
) -> OflStatus {
    guard(|| {
        let k = ho_kernel(omega, duration, hbar)?;
        let c = k.component(0);
        put(
            out,
            OflKernel {
                a_re: c.a.re,
                a_im: c.a.im,
                b_re: c.b.re,
                b_im: c.b.im,
                c_re: c.c.re,
                c_im: c.c.im,
                amplitude_re: c.amplitude.re,
                amplitude_im: c.amplitude.im,
                phase_index: c.phase_index,
            },
        )
    })
}
