//! C ABI over the sortlab core: opaque instance handles, status codes, and
//! the two sorters. Orders are written into caller-provided buffers of
//! `sortlab_instance_vertex_count` entries; strings returned by the library
//! are freed with `sortlab_string_free`.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use sortlab::instance::SortingInstance;
use sortlab::leveled_sort::{stochastic_sort, SortParams};
use sortlab::sparse_sort::{sparse_generalized_sort, FallbackPredictionSorter, SparseParams};
use sortlab::Error;

/// Opaque sorting instance.
pub struct SortlabInstance {
    inner: SortingInstance,
}

/// Status codes returned by every fallible entry point.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SortlabStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ParseError = 3,
    InternalError = 4,
    Utf8Error = 5,
}

/// Prediction-sorter backend selector for the sparse sorter.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SortlabBackend {
    /// Correct fallback backend (at most one query per edge).
    Fallback = 0,
    /// No backend: run the sampling loop until the order is pinned.
    LoopOnly = 1,
}

fn status_of(err: &Error) -> SortlabStatus {
    match err {
        Error::InvalidArgument(_) | Error::DegenerateParameter(_) | Error::Config(_) => {
            SortlabStatus::InvalidArgument
        }
        Error::Json(_) => SortlabStatus::ParseError,
        _ => SortlabStatus::InternalError,
    }
}

fn guard<F: FnOnce() -> SortlabStatus>(f: F) -> SortlabStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => SortlabStatus::InternalError,
    }
}

/// Generates a seeded instance: hidden order, planted path, stochastic
/// edges with probability `p`. On success stores a handle in `out`.
///
/// # Safety
/// `out` must be a valid pointer; the handle must be released with
/// `sortlab_instance_free`.
#[no_mangle]
pub unsafe extern "C" fn sortlab_instance_generate(
    n: u32,
    p: f64,
    seed: u64,
    out: *mut *mut SortlabInstance,
) -> SortlabStatus {
    if out.is_null() {
        return SortlabStatus::NullPointer;
    }
    guard(|| match SortingInstance::generate(n as usize, p, seed) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(SortlabInstance { inner })) };
            SortlabStatus::Ok
        }
        Err(err) => status_of(&err),
    })
}

/// Parses an instance from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sortlab_instance_from_json(
    json: *const c_char,
    out: *mut *mut SortlabInstance,
) -> SortlabStatus {
    if json.is_null() || out.is_null() {
        return SortlabStatus::NullPointer;
    }
    let text = match unsafe { CStr::from_ptr(json) }.to_str() {
        Ok(text) => text,
        Err(_) => return SortlabStatus::Utf8Error,
    };
    guard(|| match SortingInstance::from_json(text) {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(SortlabInstance { inner })) };
            SortlabStatus::Ok
        }
        Err(err) => status_of(&err),
    })
}

/// Serializes an instance to JSON; free the string with
/// `sortlab_string_free`.
///
/// # Safety
/// `instance` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sortlab_instance_to_json(
    instance: *const SortlabInstance,
    out: *mut *mut c_char,
) -> SortlabStatus {
    if instance.is_null() || out.is_null() {
        return SortlabStatus::NullPointer;
    }
    guard(|| {
        let inst = unsafe { &*instance };
        match inst.inner.to_json() {
            Ok(json) => match CString::new(json) {
                Ok(cstring) => {
                    unsafe { *out = cstring.into_raw() };
                    SortlabStatus::Ok
                }
                Err(_) => SortlabStatus::InternalError,
            },
            Err(err) => status_of(&err),
        }
    })
}

/// Number of vertices; 0 for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sortlab_instance_vertex_count(instance: *const SortlabInstance) -> u32 {
    if instance.is_null() {
        return 0;
    }
    unsafe { &*instance }.inner.n() as u32
}

/// Number of edges; 0 for a null handle.
///
/// # Safety
/// `instance` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sortlab_instance_edge_count(instance: *const SortlabInstance) -> u64 {
    if instance.is_null() {
        return 0;
    }
    unsafe { &*instance }.inner.edge_count() as u64
}

/// Recovers the hidden order with the leveled stochastic sorter.
/// `out_order` must hold `sortlab_instance_vertex_count(instance)` entries;
/// `out_queries` (optional) receives the distinct-pair query count.
///
/// # Safety
/// `instance` must be a live handle; `out_order` must point to enough space.
#[no_mangle]
pub unsafe extern "C" fn sortlab_sort_stochastic(
    instance: *const SortlabInstance,
    seed: u64,
    out_order: *mut u32,
    out_queries: *mut u64,
) -> SortlabStatus {
    if instance.is_null() || out_order.is_null() {
        return SortlabStatus::NullPointer;
    }
    guard(|| {
        let inst = unsafe { &*instance };
        match stochastic_sort(&inst.inner, &SortParams::default(), seed) {
            Ok(run) => unsafe {
                ptr::copy_nonoverlapping(run.order.as_ptr(), out_order, run.order.len());
                if !out_queries.is_null() {
                    *out_queries = run.queries as u64;
                }
                SortlabStatus::Ok
            },
            Err(err) => status_of(&err),
        }
    })
}

/// Recovers the hidden order with the sparse worst-case sorter.
///
/// # Safety
/// Same contracts as `sortlab_sort_stochastic`.
#[no_mangle]
pub unsafe extern "C" fn sortlab_sort_sparse(
    instance: *const SortlabInstance,
    seed: u64,
    backend: SortlabBackend,
    out_order: *mut u32,
    out_queries: *mut u64,
) -> SortlabStatus {
    if instance.is_null() || out_order.is_null() {
        return SortlabStatus::NullPointer;
    }
    guard(|| {
        let inst = unsafe { &*instance };
        let sorter = match backend {
            SortlabBackend::Fallback => {
                Some(&FallbackPredictionSorter as &dyn sortlab::sparse_sort::PredictionSorter)
            }
            SortlabBackend::LoopOnly => None,
        };
        match sparse_generalized_sort(&inst.inner, &SparseParams::default(), sorter, seed) {
            Ok(run) => unsafe {
                ptr::copy_nonoverlapping(run.order.as_ptr(), out_order, run.order.len());
                if !out_queries.is_null() {
                    *out_queries = run.queries as u64;
                }
                SortlabStatus::Ok
            },
            Err(err) => status_of(&err),
        }
    })
}

/// Releases an instance handle. Null is a no-op.
///
/// # Safety
/// `instance` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sortlab_instance_free(instance: *mut SortlabInstance) {
    if !instance.is_null() {
        drop(unsafe { Box::from_raw(instance) });
    }
}

/// Releases a string returned by this library. Null is a no-op.
///
/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sortlab_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sortlab_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}
