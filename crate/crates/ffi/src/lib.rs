//! C interface to `dpg-core`.
//!
//! Datasets and indexes are opaque handles created by `dpg_*_new`/`load`/`build`
//! and released with the matching `*_free`. Every fallible call returns a
//! [`DpgStatus`]; on failure [`dpg_last_error_message`] describes the error on
//! the calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use dpg_core::bench::{build_index, Algo, BuildConfig};
use dpg_core::model::{DenseDataset, NeighborGraph, SearchParams};
use dpg_core::search::GraphSearcher;
use dpg_core::vecio::{load_index, read_fvecs, save_index};
use dpg_core::Error;

/// Diversification by occlusion counting.
pub const DPG_METHOD_COUNTING: u32 = 0;
/// Diversification by greedy angle maximization.
pub const DPG_METHOD_ANGULAR: u32 = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DpgStatus {
    Ok = 0,
    Usage = 2,
    Format = 3,
    Degenerate = 4,
    Structural = 5,
    Io = 6,
    NullPointer = 7,
    Panic = 8,
}

/// Row-major float vectors.
pub struct DpgDataset {
    inner: DenseDataset,
}

/// A K-NN graph or DPG over some dataset.
pub struct DpgIndex {
    inner: NeighborGraph,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DpgSearchStats {
    pub distance_computations: u64,
    pub hops: u64,
    pub wall_time_secs: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &Error) -> DpgStatus {
    match err {
        Error::Usage(_) => DpgStatus::Usage,
        Error::Format { .. } => DpgStatus::Format,
        Error::Degenerate(_) => DpgStatus::Degenerate,
        Error::Structural { .. } => DpgStatus::Structural,
        Error::Io(_) => DpgStatus::Io,
    }
}

enum Failure {
    Core(Error),
    Null(&'static str),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DpgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DpgStatus::Ok,
        Ok(Err(Failure::Core(e))) => {
            set_last_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Null(what))) => {
            set_last_error(format!("{what} is null"));
            DpgStatus::NullPointer
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            DpgStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or(Failure::Null(what))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Error::Usage("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dpg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Copies `n * d` floats from `data` into a new dataset.
///
/// # Safety
/// `data` must point to `n * d` readable floats and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpg_dataset_new(
    data: *const f32,
    n: usize,
    d: usize,
    out: *mut *mut DpgDataset,
) -> DpgStatus {
    guard(|| {
        if data.is_null() {
            return Err(Failure::Null("data"));
        }
        let len = n
            .checked_mul(d)
            .ok_or_else(|| Error::Usage(format!("n={n} times d={d} overflows")))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        store(out, DpgDataset { inner: DenseDataset::new(n, d, values)? })
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dpg_dataset_read_fvecs(
    path: *const c_char,
    out: *mut *mut DpgDataset,
) -> DpgStatus {
    guard(|| {
        let dataset = read_fvecs(path_arg(path)?)?;
        store(out, DpgDataset { inner: dataset })
    })
}

/// Number of vectors, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpg_dataset_len(dataset: *const DpgDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.len())
}

/// Vector dimension, or 0 for a null handle.
///
/// # Safety
/// `dataset` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpg_dataset_dim(dataset: *const DpgDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.dim())
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dpg_dataset_free(dataset: *mut DpgDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

unsafe fn build(dataset: *const DpgDataset, config: BuildConfig, out: *mut *mut DpgIndex) -> DpgStatus {
    guard(|| {
        let ds = deref(dataset, "dataset")?;
        let graph = build_index(&ds.inner, &config)?.graph;
        store(out, DpgIndex { inner: graph })
    })
}

/// Builds a DPG with degree parameter `kappa` over a 2*kappa-NN graph.
/// `method` is `DPG_METHOD_COUNTING` or `DPG_METHOD_ANGULAR`.
///
/// # Safety
/// `dataset` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dpg_index_build(
    dataset: *const DpgDataset,
    kappa: usize,
    method: u32,
    seed: u64,
    out: *mut *mut DpgIndex,
) -> DpgStatus {
    let algo = match method {
        DPG_METHOD_COUNTING => Algo::DpgCounting,
        DPG_METHOD_ANGULAR => Algo::DpgAngular,
        other => {
            set_last_error(format!("unknown diversification method {other}"));
            return DpgStatus::Usage;
        }
    };
    build(dataset, BuildConfig { kappa, seed, ..BuildConfig::new(algo) }, out)
}

/// Builds a plain K-NN graph by NN-descent.
///
/// # Safety
/// `dataset` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dpg_index_build_kgraph(
    dataset: *const DpgDataset,
    k: usize,
    seed: u64,
    out: *mut *mut DpgIndex,
) -> DpgStatus {
    build(
        dataset,
        BuildConfig { knn_k: Some(k), seed, ..BuildConfig::new(Algo::KGraph) },
        out,
    )
}

/// # Safety
/// `index` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn dpg_index_save(index: *const DpgIndex, path: *const c_char) -> DpgStatus {
    guard(|| {
        let index = deref(index, "index")?;
        save_index(&index.inner, path_arg(path)?)?;
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dpg_index_load(path: *const c_char, out: *mut *mut DpgIndex) -> DpgStatus {
    guard(|| {
        let graph = load_index(path_arg(path)?)?;
        store(out, DpgIndex { inner: graph })
    })
}

/// Number of nodes, or 0 for a null handle.
///
/// # Safety
/// `index` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpg_index_len(index: *const DpgIndex) -> usize {
    index.as_ref().map_or(0, |g| g.inner.len())
}

/// Directed edge count, or 0 for a null handle.
///
/// # Safety
/// `index` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn dpg_index_edge_count(index: *const DpgIndex) -> usize {
    index.as_ref().map_or(0, |g| g.inner.edge_count())
}

/// # Safety
/// `index` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn dpg_index_free(index: *mut DpgIndex) {
    if !index.is_null() {
        drop(Box::from_raw(index));
    }
}

/// Greedy search for the `k` nearest neighbors of `query` with a pool of
/// `pool_size` candidates and `entry_count` random entry points.
/// Writes `k` ids and distances in ascending distance order. `stats` may be null.
///
/// # Safety
/// `query` must hold `dim` floats; `out_ids` and `out_dists` must have room for `k` values.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn dpg_search(
    dataset: *const DpgDataset,
    index: *const DpgIndex,
    query: *const f32,
    dim: usize,
    k: usize,
    pool_size: usize,
    entry_count: usize,
    seed: u64,
    out_ids: *mut u32,
    out_dists: *mut f32,
    stats: *mut DpgSearchStats,
) -> DpgStatus {
    guard(|| {
        let ds = deref(dataset, "dataset")?;
        let index = deref(index, "index")?;
        if query.is_null() {
            return Err(Failure::Null("query"));
        }
        if out_ids.is_null() || out_dists.is_null() {
            return Err(Failure::Null("output buffer"));
        }
        let query = std::slice::from_raw_parts(query, dim);
        let params = SearchParams { k, pool_size, entry_count, seed };
        let res = GraphSearcher::new(&ds.inner, &index.inner)?.search(query, &params)?;
        let ids = std::slice::from_raw_parts_mut(out_ids, k);
        let dists = std::slice::from_raw_parts_mut(out_dists, k);
        for (i, nb) in res.neighbors.iter().enumerate() {
            ids[i] = nb.id;
            dists[i] = nb.dist;
        }
        if let Some(s) = stats.as_mut() {
            *s = DpgSearchStats {
                distance_computations: res.stats.distance_computations as u64,
                hops: res.stats.hops as u64,
                wall_time_secs: res.stats.wall_time.as_secs_f64(),
            };
        }
        Ok(())
    })
}
