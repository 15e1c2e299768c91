//! C interface to the `surfent` estimators.
//!
//! Systems are opaque handles created with [`surfent_system_new`] and
//! released with [`surfent_system_free`]. Every fallible function returns a
//! [`SurfentStatus`] and writes its result through an out-pointer; on
//! failure a message is available from [`surfent_last_error`] on the same
//! thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use surfent::cli::parse_curve;
use surfent::cocycle::integral_norm_growth;
use surfent::dynamics::{cocycle_jacobian, domain_grid, lambda_plus_series};
use surfent::entropy::{katok_estimate, DEFAULT_SATURATION};
use surfent::oscillator::{restricted_growth, theoretical_rate};
use surfent::polyline::{clipped_curve_growth_series, curve_growth_series};
use surfent::sampling::SamplePlan;
use surfent::zoo::{parse_params, system_by_name};
use surfent::{Error, Jacobian2, Point2, SurfaceSystem};

/// Result codes shared by every fallible entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfentStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Escapes, empty sample sets, exhausted budgets.
    Numerical = 3,
    /// The requested quantity is not known for this system.
    Unavailable = 4,
    Panic = 5,
}

/// Opaque handle to a surface system.
pub struct SurfentSystem {
    inner: SurfaceSystem,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = text);
}

fn fail(err: Error) -> SurfentStatus {
    let status = if err.is_numerical() { SurfentStatus::Numerical } else { SurfentStatus::InvalidArgument };
    set_error(err.to_string());
    status
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), SurfentStatus>) -> SurfentStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => SurfentStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            SurfentStatus::Panic
        }
    }
}

fn null(what: &str) -> SurfentStatus {
    set_error(format!("{what} is null"));
    SurfentStatus::NullPointer
}

unsafe fn system_ref<'a>(system: *const SurfentSystem) -> Result<&'a SurfaceSystem, SurfentStatus> {
    system.as_ref().map(|s| &s.inner).ok_or_else(|| null("system handle"))
}

unsafe fn str_arg<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, SurfentStatus> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error(format!("{what} is not valid UTF-8"));
        SurfentStatus::InvalidArgument
    })
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), SurfentStatus> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

fn horizons(n_min: usize, n_max: usize) -> Result<Vec<usize>, SurfentStatus> {
    if n_min == 0 || n_max < n_min {
        set_error(format!("invalid horizon range {n_min}..{n_max}"));
        return Err(SurfentStatus::InvalidArgument);
    }
    Ok((n_min..=n_max).collect())
}

unsafe fn write_matrix(out: *mut f64, m: Jacobian2) -> Result<(), SurfentStatus> {
    if out.is_null() {
        return Err(null("output matrix"));
    }
    for (i, v) in [m.a, m.b, m.c, m.d].into_iter().enumerate() {
        out.add(i).write(v);
    }
    Ok(())
}

/// Message for the most recent failure on this thread (empty if none). The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn surfent_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a built-in system by name, e.g. `"cat"` or `"standard"` with
/// `params` `"k=6"`. `params` may be null.
///
/// # Safety
/// `name` and `params` must be null or valid NUL-terminated strings; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn surfent_system_new(
    name: *const c_char,
    params: *const c_char,
    out: *mut *mut SurfentSystem,
) -> SurfentStatus {
    guard(|| {
        let name = str_arg(name, "system name")?;
        let params = if params.is_null() { "" } else { str_arg(params, "params")? };
        let parsed = parse_params(params).map_err(fail)?;
        let inner = system_by_name(name, &parsed).map_err(fail)?;
        write(out, Box::into_raw(Box::new(SurfentSystem { inner })))
    })
}

/// Releases a handle; null is ignored.
///
/// # Safety
/// `system` must come from [`surfent_system_new`] and not be used again.
#[no_mangle]
pub unsafe extern "C" fn surfent_system_free(system: *mut SurfentSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Topological entropy when it is known in closed form.
///
/// # Safety
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn surfent_known_entropy(system: *const SurfentSystem, out: *mut f64) -> SurfentStatus {
    guard(|| {
        let sys = system_ref(system)?;
        match sys.known_entropy {
            Some(h) => write(out, h),
            None => {
                set_error(format!("entropy of {} is not known in closed form", sys.name));
                Err(SurfentStatus::Unavailable)
            }
        }
    })
}

/// Largest singular value of the row-major 2×2 matrix `m`.
///
/// # Safety
/// `m` must point to four readable doubles and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn surfent_operator_norm(m: *const f64, out: *mut f64) -> SurfentStatus {
    guard(|| {
        if m.is_null() {
            return Err(null("matrix"));
        }
        let j = Jacobian2::new(*m, *m.add(1), *m.add(2), *m.add(3));
        write(out, surfent::operator_norm(&j))
    })
}

/// `Df^n` at `(u, v)`, written row-major into `out[0..4]`.
///
/// # Safety
/// `system` must be a live handle and `out` must hold four doubles.
#[no_mangle]
pub unsafe extern "C" fn surfent_cocycle_jacobian(
    system: *const SurfentSystem,
    u: f64,
    v: f64,
    n: usize,
    out: *mut f64,
) -> SurfentStatus {
    guard(|| {
        let sys = system_ref(system)?;
        let j = cocycle_jacobian(sys, Point2::new(u, v), n).map_err(fail)?;
        write_matrix(out, j)
    })
}

/// Extrapolated growth rate of `∫‖Df^n‖`, sampled on a stratified
/// `grid × grid` plan, over horizons `n_min..=n_max`.
///
/// # Safety
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn surfent_integral_norm_rate(
    system: *const SurfentSystem,
    grid: usize,
    seed: u64,
    n_min: usize,
    n_max: usize,
    out: *mut f64,
) -> SurfentStatus {
    guard(|| {
        let sys = system_ref(system)?;
        let n_list = horizons(n_min, n_max)?;
        let series = integral_norm_growth(sys, &SamplePlan::stratified(grid, seed), &n_list).map_err(fail)?;
        write(out, series.extrapolated_rate)
    })
}

/// Extrapolated length growth rate of a curve (`"hloop:0"`,
/// `"segment:0,0,1,1"`, …). Planar systems clip the image to their box.
///
/// # Safety
/// `system` must be a live handle, `curve` a valid string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn surfent_curve_growth_rate(
    system: *const SurfentSystem,
    curve: *const c_char,
    n_min: usize,
    n_max: usize,
    tol: f64,
    out: *mut f64,
) -> SurfentStatus {
    guard(|| {
        let sys = system_ref(system)?;
        let curve = parse_curve(str_arg(curve, "curve")?).map_err(fail)?;
        let n_list = horizons(n_min, n_max)?;
        let series = match sys.domain.extent() {
            Some(rect) if !sys.domain.is_torus() => clipped_curve_growth_series(sys, &curve, &n_list, &rect, tol),
            _ => curve_growth_series(sys, &curve, &n_list, tol),
        }
        .map_err(fail)?;
        write(out, series.extrapolated_rate)
    })
}

/// Extrapolated `max_x (1/n) log ‖Df^n_x‖` over a `grid × grid` grid.
///
/// # Safety
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn surfent_lambda_plus_rate(
    system: *const SurfentSystem,
    grid: usize,
    n_max: usize,
    out: *mut f64,
) -> SurfentStatus {
    guard(|| {
        let sys = system_ref(system)?;
        horizons(1, n_max)?;
        let points = domain_grid(sys, grid).map_err(fail)?;
        let series = lambda_plus_series(sys, &points, n_max).map_err(fail)?;
        write(out, series.extrapolated_rate)
    })
}

/// Growth slope of greedy `(n, eps)`-separated sets over a shuffled
/// stratified cloud of `grid²` points, horizons `1..=n_max`.
///
/// # Safety
/// `system` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn surfent_katok_slope(
    system: *const SurfentSystem,
    grid: usize,
    seed: u64,
    eps: f64,
    n_max: usize,
    out: *mut f64,
) -> SurfentStatus {
    guard(|| {
        let sys = system_ref(system)?;
        let n_list = horizons(1, n_max)?;
        let cloud = SamplePlan::stratified(grid, seed).shuffled_cloud(sys, seed).map_err(fail)?;
        let series = katok_estimate(sys, &cloud, &n_list, &[eps], DEFAULT_SATURATION).map_err(fail)?;
        match series[0].slope {
            Some(s) => write(out, s),
            None => {
                set_error("fewer than two unsaturated horizons; enlarge the grid or eps");
                Err(SurfentStatus::Numerical)
            }
        }
    })
}

/// Exact limiting rate of the oscillating-curve example for `a > 1`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn surfent_theoretical_rate(a: f64, out: *mut f64) -> SurfentStatus {
    guard(|| write(out, theoretical_rate(a).map_err(fail)?))
}

/// Fitted rate of the clipped oscillating-curve length over
/// `n_min, n_min + step, …, ≤ n_max`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn surfent_restricted_growth_rate(
    a: f64,
    n_min: usize,
    n_max: usize,
    step: usize,
    tol: f64,
    out: *mut f64,
) -> SurfentStatus {
    guard(|| {
        if step == 0 {
            set_error("step must be positive");
            return Err(SurfentStatus::InvalidArgument);
        }
        let n_list: Vec<usize> = horizons(n_min, n_max)?.into_iter().step_by(step).collect();
        write(out, restricted_growth(a, &n_list, tol).map_err(fail)?.extrapolated_rate)
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn surfent_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
