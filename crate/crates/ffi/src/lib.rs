//! C ABI over the `aflow` crate.
//!
//! Every fallible function returns an [`AflowStatus`]; on failure the
//! message is available from [`aflow_last_error_message`] on the same
//! thread. Datasets and persistent networks are opaque handles released
//! with their `_free` functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use aflow::data_model::{Dataset, VideoId};
use aflow::persistence::{apply_view_filters, extract_persistent_network, simulate_persistence_probability, PersistentNetwork};
use aflow::{evaluation, forecast, stats, Error};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AflowStatus {
    Ok = 0,
    InvalidArgument = 1,
    DataError = 2,
    NumericalError = 3,
    NullPointer = 4,
    Panic = 5,
}

/// Loaded and validated dataset.
pub struct AflowDataset {
    inner: Dataset,
}

/// Persistent network extracted from a dataset.
pub struct AflowPersistentNetwork {
    inner: PersistentNetwork,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(err: &Error) -> AflowStatus {
    match err.exit_code() {
        1 => AflowStatus::InvalidArgument,
        3 => AflowStatus::NumericalError,
        _ => AflowStatus::DataError,
    }
}

struct Failure(AflowStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(AflowStatus::NullPointer, format!("{what} is null"))
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> AflowStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            AflowStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            AflowStatus::Panic
        }
    }
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn aflow_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn aflow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads the dataset in directory `dir`.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn aflow_dataset_load(dir: *const c_char, out: *mut *mut AflowDataset) -> AflowStatus {
    guard(|| {
        if dir.is_null() {
            return Err(null("dir"));
        }
        let dir = CStr::from_ptr(dir)
            .to_str()
            .map_err(|_| Failure(AflowStatus::InvalidArgument, "dir is not UTF-8".into()))?;
        let ds = Dataset::load_dir(Path::new(dir))?;
        write(out, Box::into_raw(Box::new(AflowDataset { inner: ds })), "out")
    })
}

/// Releases a dataset; null is ignored.
///
/// # Safety
/// `ds` must come from [`aflow_dataset_load`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aflow_dataset_free(ds: *mut AflowDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Number of in-corpus videos and observed days.
///
/// # Safety
/// `ds` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn aflow_dataset_shape(ds: *const AflowDataset, videos: *mut usize, days: *mut usize) -> AflowStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("ds"))?;
        write(videos, ds.inner.corpus().len(), "videos")?;
        write(days, ds.inner.window().len, "days")
    })
}

/// Extracts the persistent network with default view filters.
///
/// # Safety
/// `ds` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn aflow_persistent_network_extract(
    ds: *const AflowDataset,
    cutoff: u32,
    out: *mut *mut AflowPersistentNetwork,
) -> AflowStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("ds"))?;
        let pn = extract_persistent_network(&ds.inner, &apply_view_filters(&ds.inner), cutoff)?;
        write(out, Box::into_raw(Box::new(AflowPersistentNetwork { inner: pn })), "out")
    })
}

/// Link and target counts of a persistent network.
///
/// # Safety
/// `pn` must be a live handle; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn aflow_persistent_network_size(pn: *const AflowPersistentNetwork, links: *mut usize, targets: *mut usize) -> AflowStatus {
    guard(|| {
        let pn = pn.as_ref().ok_or_else(|| null("pn"))?;
        write(links, pn.inner.len(), "links")?;
        write(targets, pn.inner.targets().len(), "targets")
    })
}

/// Releases a persistent network; null is ignored.
///
/// # Safety
/// `pn` must come from [`aflow_persistent_network_extract`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn aflow_persistent_network_free(pn: *mut AflowPersistentNetwork) {
    if !pn.is_null() {
        drop(Box::from_raw(pn));
    }
}

/// SMAPE (0..200) of `n` predictions.
///
/// # Safety
/// `y` and `y_hat` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aflow_smape(y: *const f64, y_hat: *const f64, n: usize, out: *mut f64) -> AflowStatus {
    guard(|| {
        let v = evaluation::smape(slice(y, n, "y")?, slice(y_hat, n, "y_hat")?)?;
        write(out, v, "out")
    })
}

/// Gini coefficient of `n` non-negative values.
///
/// # Safety
/// `values` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aflow_gini(values: *const f64, n: usize, out: *mut f64) -> AflowStatus {
    guard(|| write(out, stats::gini(slice(values, n, "values")?)?, "out"))
}

/// Spearman rank correlation of two series of length `n`.
///
/// # Safety
/// `x` and `y` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aflow_spearman(x: *const f64, y: *const f64, n: usize, out: *mut f64) -> AflowStatus {
    guard(|| write(out, stats::spearman(slice(x, n, "x")?, slice(y, n, "y")?)?, "out"))
}

/// Two-sided Pearson test; writes r and the p-value.
///
/// # Safety
/// `x` and `y` must point to `n` values; outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn aflow_pearson_test(x: *const f64, y: *const f64, n: usize, r: *mut f64, p: *mut f64) -> AflowStatus {
    guard(|| {
        let t = stats::pearson_test(slice(x, n, "x")?, slice(y, n, "y")?)?;
        write(r, t.r, "r")?;
        write(p, t.p, "p")
    })
}

/// Fraction of simulated links with daily presence `p_link` that persist.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn aflow_simulate_persistence(p_link: f64, days: usize, trials: usize, seed: u64, out: *mut f64) -> AflowStatus {
    guard(|| write(out, simulate_persistence_probability(p_link, days, trials, seed)?, "out"))
}

/// Fits ARNet on a target series of length `n` with `k` neighbour series
/// stored row by row in `neighbors` (`k * n` values). Writes `p` lag
/// coefficients to `alpha` and `k` link strengths to `beta`.
///
/// # Safety
/// Pointers must reference buffers of the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn aflow_fit_arnet(
    target: *const f64,
    n: usize,
    neighbors: *const f64,
    k: usize,
    p: usize,
    alpha: *mut f64,
    beta: *mut f64,
) -> AflowStatus {
    guard(|| {
        let target = slice(target, n, "target")?;
        let flat = slice(neighbors, n * k, "neighbors")?;
        let rows: Vec<&[f64]> = (0..k).map(|j| &flat[j * n..(j + 1) * n]).collect();
        let ids: Vec<VideoId> = (0..k).map(|j| VideoId::new(format!("n{j}"))).collect::<Result<_, _>>()?;
        let model = forecast::fit_arnet(target, &ids, &rows, p)?;
        if p > 0 && alpha.is_null() {
            return Err(null("alpha"));
        }
        if k > 0 && beta.is_null() {
            return Err(null("beta"));
        }
        for (i, a) in model.alpha.iter().enumerate() {
            alpha.add(i).write(*a);
        }
        for (j, b) in model.beta_values().iter().enumerate() {
            beta.add(j).write(*b);
        }
        Ok(())
    })
}
