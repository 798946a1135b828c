//! C interface to the patent analytics core.
//!
//! Every fallible function returns a [`PaStatus`]. On failure the message is
//! available from [`pa_last_error_message`] on the same thread. Strings
//! returned through `out_json` parameters are owned by the caller and must be
//! released with [`pa_string_free`].

use std::cell::RefCell;
use std::ffi::{CStr, CString, c_char};
use std::panic::{AssertUnwindSafe, catch_unwind};
use std::path::Path;
use std::ptr;

use patent_analytics::Error;
use patent_analytics::api::{InlineDocument, PredictResponse};
use patent_analytics::features::{assemble_features, fnv1a64};
use patent_analytics::ingest::ingest_path;
use patent_analytics::model::{TrainedModelBundle, predict_grant_lag};
use patent_analytics::store::{AliasTable, EntityKey, EntityKind, GroupBy, PatentStore};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    Io = 5,
    InvalidDocument = 6,
    InsufficientData = 7,
    SchemaMismatch = 8,
    InvalidBundle = 9,
    CorruptStore = 10,
    Internal = 11,
    Panic = 12,
}

/// Opaque patent store handle.
pub struct PaStore {
    inner: PatentStore,
}

/// Opaque trained model handle.
pub struct PaModel {
    inner: TrainedModelBundle,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(PaStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => PaStatus::Io,
            Error::EntityNotFound(_) => PaStatus::NotFound,
            Error::Document(_) | Error::MissingField(_) | Error::UnnameableEntity(_) => PaStatus::InvalidDocument,
            Error::InvalidRange(_) | Error::InvalidArgument(_) | Error::Json(_) => PaStatus::InvalidArgument,
            Error::InsufficientData(_) | Error::InsufficientCalibration { .. } | Error::NoTestData => {
                PaStatus::InsufficientData
            }
            Error::SchemaMismatch { .. } => PaStatus::SchemaMismatch,
            Error::InvalidBundle(_) => PaStatus::InvalidBundle,
            Error::CorruptStore(_) => PaStatus::CorruptStore,
            _ => PaStatus::Internal,
        };
        Failure(status, e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure(PaStatus::InvalidArgument, e.to_string())
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            PaStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside patent analytics".into());
            PaStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(PaStatus::NullArgument, format!("{name} is null")));
    }
    unsafe { CStr::from_ptr(p) }.to_str().map_err(|_| Failure(PaStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn null(name: &str) -> Failure {
    Failure(PaStatus::NullArgument, format!("{name} is null"))
}

unsafe fn write_json(out: *mut *mut c_char, text: String) -> Result<(), Failure> {
    let c = CString::new(text).map_err(|e| Failure(PaStatus::Internal, e.to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Opens or creates a store file. `aliases_path` may be null for the
/// built-in alias table.
///
/// # Safety
/// String arguments must be valid NUL-terminated strings or null; `out`
/// must be writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pa_store_open(
    path: *const c_char,
    aliases_path: *const c_char,
    out: *mut *mut PaStore,
) -> PaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = unsafe { str_arg(path, "path") }?;
        let aliases = if aliases_path.is_null() {
            AliasTable::shipped()
        } else {
            AliasTable::load(Path::new(unsafe { str_arg(aliases_path, "aliases_path") }?))?
        };
        let store = PatentStore::open(Path::new(path), aliases)?;
        unsafe { *out = Box::into_raw(Box::new(PaStore { inner: store })) };
        Ok(())
    })
}

/// Flushes and releases a store. Null is ignored.
///
/// # Safety
/// `store` must come from [`pa_store_open`] and not be used afterwards.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pa_store_free(store: *mut PaStore) {
    if !store.is_null() {
        let mut s = unsafe { Box::from_raw(store) };
        let _ = catch_unwind(AssertUnwindSafe(|| s.inner.flush()));
    }
}

/// Ingests an XML file or directory. Writes the ingest report as JSON.
///
/// # Safety
/// `store` must be a live handle; `input_path` a valid string; `out_json`
/// writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pa_store_ingest(
    store: *mut PaStore,
    input_path: *const c_char,
    out_json: *mut *mut c_char,
) -> PaStatus {
    guard(|| {
        let store = unsafe { store.as_mut() }.ok_or_else(|| null("store"))?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let input = unsafe { str_arg(input_path, "input_path") }?;
        let mut fatal = None;
        let report = ingest_path(Path::new(input), &mut |doc| match store.inner.upsert_patent(doc) {
            Ok(_) => Ok(()),
            Err(e @ (Error::Io { .. } | Error::CorruptStore(_))) => {
                let msg = e.to_string();
                fatal = Some(e);
                Err(msg)
            }
            Err(e) => Err(e.to_string()),
        })?;
        if let Some(e) = fatal {
            return Err(e.into());
        }
        store.inner.flush()?;
        unsafe { write_json(out_json, serde_json::to_string(&report)?) }
    })
}

/// Summary statistics of an entity as JSON. `kind` is "inventor" or "org".
///
/// # Safety
/// `store` must be a live handle; strings valid; `out_json` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pa_store_entity_summary(
    store: *const PaStore,
    kind: *const c_char,
    id: *const c_char,
    out_json: *mut *mut c_char,
) -> PaStatus {
    guard(|| {
        let store = unsafe { store.as_ref() }.ok_or_else(|| null("store"))?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let kind = unsafe { str_arg(kind, "kind") }?;
        let kind = EntityKind::parse_segment(kind)
            .ok_or_else(|| Failure(PaStatus::InvalidArgument, format!("unknown entity kind {kind:?}")))?;
        let key = EntityKey { kind, canonical_id: unsafe { str_arg(id, "id") }?.to_string() };
        let summary = store.inner.entity_summary(&key)?;
        unsafe { write_json(out_json, serde_json::to_string(&summary)?) }
    })
}

/// Grant-lag statistics as a JSON array. `group_by` is "filing_year" or
/// "cpc_section".
///
/// # Safety
/// `store` must be a live handle; strings valid; `out_json` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pa_store_grant_lag_stats(
    store: *const PaStore,
    group_by: *const c_char,
    out_json: *mut *mut c_char,
) -> PaStatus {
    guard(|| {
        let store = unsafe { store.as_ref() }.ok_or_else(|| null("store"))?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let group_by = GroupBy::parse(unsafe { str_arg(group_by, "group_by") }?)?;
        unsafe { write_json(out_json, serde_json::to_string(&store.inner.grant_lag_aggregates(group_by))?) }
    })
}

/// Loads and validates a model bundle.
///
/// # Safety
/// `path` must be a valid string; `out` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pa_model_load(path: *const c_char, out: *mut *mut PaModel) -> PaStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = unsafe { str_arg(path, "path") }?;
        let bundle = TrainedModelBundle::load(Path::new(path))?;
        unsafe { *out = Box::into_raw(Box::new(PaModel { inner: bundle })) };
        Ok(())
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from [`pa_model_load`] and not be used afterwards.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pa_model_free(model: *mut PaModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Predicts grant lag for an inline document given as JSON, with the same
/// fields and response shape as the HTTP predict endpoint.
///
/// # Safety
/// `model` must be a live handle; `document_json` valid; `out_json` writable.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pa_model_predict_json(
    model: *const PaModel,
    document_json: *const c_char,
    out_json: *mut *mut c_char,
) -> PaStatus {
    guard(|| {
        let model = unsafe { model.as_ref() }.ok_or_else(|| null("model"))?;
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let inline: InlineDocument = serde_json::from_str(unsafe { str_arg(document_json, "document_json") }?)?;
        let doc = inline.into_document()?;
        let bundle = &model.inner;
        let result = predict_grant_lag(bundle, &assemble_features(&doc, &bundle.schema))?;
        unsafe { write_json(out_json, serde_json::to_string(&PredictResponse::new(&bundle.model_id, &result))?) }
    })
}

/// 64-bit FNV-1a of `len` bytes, as used for feature hashing.
///
/// # Safety
/// `bytes` must point to `len` readable bytes, or be null with `len` 0.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pa_fnv1a64(bytes: *const u8, len: usize) -> u64 {
    if bytes.is_null() {
        return fnv1a64(&[]);
    }
    fnv1a64(unsafe { std::slice::from_raw_parts(bytes, len) })
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[unsafe(no_mangle)]
pub extern "C" fn pa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from an `out_json` parameter and not be freed twice.
#[unsafe(no_mangle)]
pub unsafe extern "C" fn pa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
