// SPDX-License-Identifier: Apache-2.0

//! C ABI over `ctcoint`. Matrices are row-major `double` arrays. Every
//! function returns a [`CtStatus`]; on failure the message is available
//! from [`ct_last_error`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;
use std::sync::Arc;

use ctcoint::coint_analysis::{classify, EmpiricalOptions, Verdict};
use ctcoint::factor_models::{DriverSpec, FactorModel, Start};
use ctcoint::forward_pricing::{affine_kernel_ou, forward_curve_affine};
use ctcoint::hilbert_curves::{filipovic_inner, CurveGrid, WeightSpec};
use ctcoint::numerics::{lyapunov_stationary_cov, mat_exp, DenseMatrix};
use ctcoint::pricing_system::PricingSystem;
use ctcoint::simulation::{simulate, PathEnsemble, TimeGrid};
use ctcoint::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtStatus {
    Ok = 0,
    NullPointer = 1,
    Dimension = 2,
    Domain = 3,
    Stability = 4,
    Numeric = 5,
    Parameter = 6,
    Precondition = 7,
    InsufficientSamples = 8,
    Resolution = 9,
    Unsupported = 10,
    Range = 11,
    Config = 12,
    Io = 13,
    BufferTooSmall = 14,
    Panic = 15,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtVerdict {
    CointegratedAnalytic = 0,
    CointegratedEmpirical = 1,
    NotCointegrated = 2,
    Inconclusive = 3,
}

/// Opaque factor model.
pub struct CtModel {
    inner: FactorModel,
}

/// Opaque pricing system.
pub struct CtPricing {
    inner: PricingSystem,
}

/// Opaque path ensemble.
pub struct CtEnsemble {
    inner: PathEnsemble,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(CtStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Dimension { .. } => CtStatus::Dimension,
            Error::Domain(_) => CtStatus::Domain,
            Error::Stability { .. } => CtStatus::Stability,
            Error::Numeric { .. } => CtStatus::Numeric,
            Error::Parameter(_) => CtStatus::Parameter,
            Error::Precondition(_) => CtStatus::Precondition,
            Error::InsufficientSamples { .. } => CtStatus::InsufficientSamples,
            Error::Resolution(_) => CtStatus::Resolution,
            Error::Unsupported(_) => CtStatus::Unsupported,
            Error::Range(_) => CtStatus::Range,
            Error::Config { .. } => CtStatus::Config,
            Error::Io(_) => CtStatus::Io,
        };
        Fail(status, e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(CtStatus::NullPointer, format!("null pointer: {what}"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> CtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            CtStatus::Ok
        }
        Ok(Err(Fail(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("internal panic");
            CtStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn optional<'a>(p: *const f64, len: usize) -> Option<&'a [f64]> {
    if p.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(p, len))
    }
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn matrix(p: *const f64, rows: usize, cols: usize, what: &str) -> Result<DenseMatrix, Fail> {
    Ok(DenseMatrix::new(rows, cols, input(p, rows * cols, what)?.to_vec())?)
}

unsafe fn put<T>(out: *mut *mut T, v: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(v));
    Ok(())
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failing call on this thread, or an empty string.
/// Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ct_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ct_version() -> *const c_char {
    static VERSION: &CStr = match CStr::from_bytes_with_nul(concat!(env!("CARGO_PKG_VERSION"), "\0").as_bytes()) {
        Ok(v) => v,
        Err(_) => c"",
    };
    VERSION.as_ptr()
}

/// `out = exp(m * tau)` for an `n x n` matrix.
///
/// # Safety
/// `m` and `out` must point to `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ct_mat_exp(m: *const f64, n: usize, tau: f64, out: *mut f64) -> CtStatus {
    guard(|| {
        let e = mat_exp(&matrix(m, n, n, "m")?, tau)?;
        output(out, n * n, "out")?.copy_from_slice(e.as_slice());
        Ok(())
    })
}

/// Stationary covariance `V` with `C V + V C^T + Q = 0`.
///
/// # Safety
/// `c`, `q` and `out` must point to `n * n` doubles.
#[no_mangle]
pub unsafe extern "C" fn ct_lyapunov(c: *const f64, q: *const f64, n: usize, out: *mut f64) -> CtStatus {
    guard(|| {
        let v = lyapunov_stationary_cov(&matrix(c, n, n, "c")?, &matrix(q, n, n, "q")?)?;
        output(out, n * n, "out")?.copy_from_slice(v.as_slice());
        Ok(())
    })
}

/// `dX = (mu + C X) dt + sigma dW` with `W` Brownian of covariance
/// `driver_cov` (`k x k`, identity when null). A null `x0` starts in the
/// stationary law.
///
/// # Safety
/// Non-null pointers must reference arrays of the documented sizes
/// (`mu`: n, `c`: n*n, `sigma`: n*k, `driver_cov`: k*k, `x0`: n).
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ct_model_mv_ou(
    n: usize,
    k: usize,
    mu: *const f64,
    c: *const f64,
    sigma: *const f64,
    driver_cov: *const f64,
    x0: *const f64,
    out: *mut *mut CtModel,
) -> CtStatus {
    guard(|| {
        let driver = match optional(driver_cov, k * k) {
            Some(v) => DriverSpec::brownian(DenseMatrix::new(k, k, v.to_vec())?)?,
            None => DriverSpec::standard(k),
        };
        let start = match optional(x0, n) {
            Some(v) => Start::At(v.to_vec()),
            None => Start::Stationary,
        };
        let model = FactorModel::mv_ou(
            input(mu, n, "mu")?.to_vec(),
            matrix(c, n, n, "c")?,
            matrix(sigma, n, k, "sigma")?,
            driver,
            start,
        )?;
        put(out, CtModel { inner: model })
    })
}

/// `dX = mu dt + sigma dW`, `W` standard `k`-dimensional.
///
/// # Safety
/// `mu` and `x0` must point to `n` doubles, `sigma` to `n * k`.
#[no_mangle]
pub unsafe extern "C" fn ct_model_drifted_bm(
    n: usize,
    k: usize,
    mu: *const f64,
    sigma: *const f64,
    x0: *const f64,
    out: *mut *mut CtModel,
) -> CtStatus {
    guard(|| {
        let model = FactorModel::drifted_bm(
            input(mu, n, "mu")?.to_vec(),
            matrix(sigma, n, k, "sigma")?,
            input(x0, n, "x0")?.to_vec(),
        )?;
        put(out, CtModel { inner: model })
    })
}

/// CARMA(p, q) driven by standard Brownian motion. A null `y0` starts in
/// the stationary law.
///
/// # Safety
/// `alpha` and `y0` must point to `p` doubles, `b` to `q + 1`.
#[no_mangle]
pub unsafe extern "C" fn ct_model_carma(
    p: usize,
    q: usize,
    alpha: *const f64,
    b: *const f64,
    y0: *const f64,
    out: *mut *mut CtModel,
) -> CtStatus {
    guard(|| {
        let start = match optional(y0, p) {
            Some(v) => Start::At(v.to_vec()),
            None => Start::Stationary,
        };
        let model = FactorModel::carma(
            p,
            q,
            input(alpha, p, "alpha")?.to_vec(),
            input(b, q + 1, "b")?.to_vec(),
            DriverSpec::standard(1),
            start,
        )?;
        put(out, CtModel { inner: model })
    })
}

/// # Safety
/// `model` must come from a `ct_model_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn ct_model_free(model: *mut CtModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_model_dim(model: *const CtModel, out: *mut usize) -> CtStatus {
    guard(|| {
        let m = get(model, "model")?;
        *out.as_mut().ok_or_else(|| null("out"))? = m.inner.dim();
        Ok(())
    })
}

/// Writes the NUL-terminated hex digest into `buf` (65 bytes suffice).
///
/// # Safety
/// `buf` must point to `cap` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ct_model_digest(model: *const CtModel, buf: *mut c_char, cap: usize) -> CtStatus {
    guard(|| {
        let d = get(model, "model")?.inner.digest();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if cap < d.len() + 1 {
            return Err(Fail(CtStatus::BufferTooSmall, format!("need {} bytes", d.len() + 1)));
        }
        ptr::copy_nonoverlapping(d.as_ptr() as *const c_char, buf, d.len());
        *buf.add(d.len()) = 0;
        Ok(())
    })
}

/// Pricing matrix `p` (`d x n`), optional candidate `c` (length `d`) and
/// optional stationary block size `m`.
///
/// # Safety
/// `p` must point to `d * n` doubles; non-null `c` to `d`; non-null `m` to
/// one `size_t`.
#[no_mangle]
pub unsafe extern "C" fn ct_pricing_new(
    d: usize,
    n: usize,
    p: *const f64,
    c: *const f64,
    m: *const usize,
    out: *mut *mut CtPricing,
) -> CtStatus {
    guard(|| {
        let sys = PricingSystem::new(matrix(p, d, n, "p")?, optional(c, d).map(<[f64]>::to_vec), m.as_ref().copied())?;
        put(out, CtPricing { inner: sys })
    })
}

/// # Safety
/// `sys` must come from [`ct_pricing_new`] or be null.
#[no_mangle]
pub unsafe extern "C" fn ct_pricing_free(sys: *mut CtPricing) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Simulates `n_paths` paths observed at the increasing `times`.
///
/// # Safety
/// `model` must be live; `times` must point to `n_times` doubles.
#[no_mangle]
pub unsafe extern "C" fn ct_simulate(
    model: *const CtModel,
    times: *const f64,
    n_times: usize,
    n_paths: usize,
    seed: u64,
    out: *mut *mut CtEnsemble,
) -> CtStatus {
    guard(|| {
        let m = get(model, "model")?;
        let grid = TimeGrid::new(input(times, n_times, "times")?.to_vec())?;
        let e = simulate(&m.inner, &grid, n_paths, seed)?;
        put(out, CtEnsemble { inner: e })
    })
}

/// # Safety
/// `e` must come from [`ct_simulate`] or be null.
#[no_mangle]
pub unsafe extern "C" fn ct_ensemble_free(e: *mut CtEnsemble) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// # Safety
/// `e` must be live; the three outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_ensemble_shape(
    e: *const CtEnsemble,
    n_paths: *mut usize,
    n_times: *mut usize,
    dim: *mut usize,
) -> CtStatus {
    guard(|| {
        let e = &get(e, "ensemble")?.inner;
        *n_paths.as_mut().ok_or_else(|| null("n_paths"))? = e.n_paths;
        *n_times.as_mut().ok_or_else(|| null("n_times"))? = e.n_times();
        *dim.as_mut().ok_or_else(|| null("dim"))? = e.dim;
        Ok(())
    })
}

/// Copies the samples laid out `[path][time][dim]`.
///
/// # Safety
/// `out` must point to `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ct_ensemble_values(e: *const CtEnsemble, out: *mut f64, cap: usize) -> CtStatus {
    guard(|| {
        let v = &get(e, "ensemble")?.inner.values;
        if cap < v.len() {
            return Err(Fail(CtStatus::BufferTooSmall, format!("need {} doubles", v.len())));
        }
        output(out, v.len(), "out")?.copy_from_slice(v);
        Ok(())
    })
}

/// Writes the ensemble CSV (`t,path,x1..xn`) to `path`.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn ct_ensemble_write_csv(e: *const CtEnsemble, path: *const c_char) -> CtStatus {
    guard(|| {
        let e = &get(e, "ensemble")?.inner;
        if path.is_null() {
            return Err(null("path"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Fail(CtStatus::Parameter, "path is not UTF-8".into()))?;
        let f = File::create(p).map_err(Error::from)?;
        Ok(e.write_csv(BufWriter::new(f))?)
    })
}

/// Cointegration verdict for the pricing system's candidate `c`.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_classify(
    model: *const CtModel,
    sys: *const CtPricing,
    n_paths: usize,
    n_boot: usize,
    seed: u64,
    out: *mut CtVerdict,
) -> CtStatus {
    guard(|| {
        let opts = EmpiricalOptions {
            n_paths,
            n_boot,
            ..EmpiricalOptions::new(seed)
        };
        let r = classify(&get(model, "model")?.inner, &get(sys, "pricing")?.inner, &opts)?;
        let v = match r.verdict {
            Verdict::CointegratedAnalytic => CtVerdict::CointegratedAnalytic,
            Verdict::CointegratedEmpirical => CtVerdict::CointegratedEmpirical,
            Verdict::NotCointegrated => CtVerdict::NotCointegrated,
            Verdict::Inconclusive => CtVerdict::Inconclusive,
        };
        *out.as_mut().ok_or_else(|| null("out"))? = v;
        Ok(())
    })
}

/// Affine forward curves `out[i * n_x + j] = f_i(t, x_j)` from the state
/// `x_t` of a Gaussian OU or drifted Brownian model.
///
/// # Safety
/// `x_t` must point to the model dimension, `x_grid` to `n_x`, and `out` to
/// `d * n_x` doubles.
#[no_mangle]
pub unsafe extern "C" fn ct_forward_affine(
    model: *const CtModel,
    sys: *const CtPricing,
    x_t: *const f64,
    x_grid: *const f64,
    n_x: usize,
    out: *mut f64,
) -> CtStatus {
    guard(|| {
        let m = &get(model, "model")?.inner;
        let s = &get(sys, "pricing")?.inner;
        let kernel = affine_kernel_ou(m)?;
        let f = forward_curve_affine(s, &kernel, input(x_t, m.dim(), "x_t")?, input(x_grid, n_x, "x_grid")?, None)?;
        let dst = output(out, s.d() * n_x, "out")?;
        for (i, row) in f.values.iter().enumerate() {
            dst[i * n_x..(i + 1) * n_x].copy_from_slice(row);
        }
        Ok(())
    })
}

/// Filipovic inner product of two curves sampled on the increasing grid
/// `x` (starting at 0) with weight `e^{alpha x}`.
///
/// # Safety
/// `x`, `f` and `g` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ct_filipovic_inner(
    x: *const f64,
    n: usize,
    f: *const f64,
    g: *const f64,
    alpha: f64,
    out: *mut f64,
) -> CtStatus {
    guard(|| {
        let w = WeightSpec::exponential(alpha)?;
        let grid = Arc::new(input(x, n, "x")?.to_vec());
        let fc = CurveGrid::new(grid.clone(), input(f, n, "f")?.to_vec(), w)?;
        let gc = CurveGrid::new(grid, input(g, n, "g")?.to_vec(), w)?;
        *out.as_mut().ok_or_else(|| null("out"))? = filipovic_inner(&fc, &gc)?;
        Ok(())
    })
}
