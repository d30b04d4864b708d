//! C ABI over the core fingerprinting operations: opaque database handles,
//! integer error codes, and a thread-local last-error message.
//!
//! Every function is `extern "C"`; handles returned by this library must be
//! released with the matching `_free` function. Strings passed in are NUL
//! terminated UTF-8; strings returned are owned by the caller and released
//! with `genofp_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use genofp::io;
use genofp::keyed::SecretKey;
use genofp::metrics::{accuracy, per_cmp};
use genofp::mitigate::{mitigate_col, mitigate_row};
use genofp::scheme::{
    extract_fingerprint, insert_fingerprint, ExtractionParams, InsertionParams,
};
use genofp::snp::{FingerprintMask, Pedigree, SimilarityModel, JointModel, SnpDatabase};
use genofp::synth::{generate, GeneratorConfig};
use genofp::transport::SinkhornParams;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GenofpStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    DataError = 3,
    Utf8Error = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

fn fail(status: GenofpStatus, message: impl Into<String>) -> GenofpStatus {
    set_error(message);
    status
}

/// Opaque SNP database handle.
pub struct GenofpDatabase(SnpDatabase);

/// Opaque dataset handle: a database plus pedigree, public models and mask
/// state needed by mitigation.
pub struct GenofpDataset {
    database: SnpDatabase,
    pedigree: Pedigree,
    similarity: SimilarityModel,
    joint: JointModel,
}

/// Opaque fingerprint mask handle.
pub struct GenofpMask(FingerprintMask);

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, GenofpStatus> {
    if ptr.is_null() {
        return Err(GenofpStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| GenofpStatus::Utf8Error)
}

fn to_owned_cstring(s: String) -> *mut c_char {
    CString::new(s).map_or(ptr::null_mut(), CString::into_raw)
}

/// Library version as a caller-owned string.
#[no_mangle]
pub extern "C" fn genofp_version() -> *mut c_char {
    to_owned_cstring(env!("CARGO_PKG_VERSION").to_string())
}

/// Last error message for this thread, or NULL when none was recorded.
#[no_mangle]
pub extern "C" fn genofp_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null_mut(), |s| to_owned_cstring(s.to_string_lossy().into_owned()))
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be a pointer previously returned by this library, or NULL.
#[no_mangle]
pub unsafe extern "C" fn genofp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a database CSV.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn genofp_db_load(
    path: *const c_char,
    out: *mut *mut GenofpDatabase,
) -> GenofpStatus {
    if out.is_null() {
        return fail(GenofpStatus::NullArgument, "out pointer is null");
    }
    let path = match cstr(path) {
        Ok(p) => p,
        Err(status) => return fail(status, "invalid path argument"),
    };
    match io::load_database(Path::new(path)) {
        Ok(db) => {
            *out = Box::into_raw(Box::new(GenofpDatabase(db)));
            GenofpStatus::Ok
        }
        Err(e) => fail(GenofpStatus::DataError, e.to_string()),
    }
}

/// Saves a database as CSV.
///
/// # Safety
/// `db` must be a live handle from this library; `path` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn genofp_db_save(
    db: *const GenofpDatabase,
    path: *const c_char,
) -> GenofpStatus {
    let Some(db) = db.as_ref() else {
        return fail(GenofpStatus::NullArgument, "db handle is null");
    };
    let path = match cstr(path) {
        Ok(p) => p,
        Err(status) => return fail(status, "invalid path argument"),
    };
    match io::save_database(&db.0, Path::new(path)) {
        Ok(()) => GenofpStatus::Ok,
        Err(e) => fail(GenofpStatus::DataError, e.to_string()),
    }
}

/// Row count of a database handle (0 for NULL).
///
/// # Safety
/// `db` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn genofp_db_rows(db: *const GenofpDatabase) -> usize {
    db.as_ref().map_or(0, |d| d.0.rows())
}

/// Locus count of a database handle (0 for NULL).
///
/// # Safety
/// `db` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn genofp_db_loci(db: *const GenofpDatabase) -> usize {
    db.as_ref().map_or(0, |d| d.0.loci_count())
}

/// Frees a database handle.
///
/// # Safety
/// `db` must be a handle from this library, or NULL; not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn genofp_db_free(db: *mut GenofpDatabase) {
    if !db.is_null() {
        drop(Box::from_raw(db));
    }
}

/// Frees a mask handle.
///
/// # Safety
/// `mask` must be a handle from this library, or NULL; not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn genofp_mask_free(mask: *mut GenofpMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// Frees a dataset handle.
///
/// # Safety
/// `ds` must be a handle from this library, or NULL; not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn genofp_dataset_free(ds: *mut GenofpDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Synthetic dataset generation parameters.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GenofpGeneratorConfig {
    pub n_families: usize,
    pub total_rows: usize,
    pub n_loci: usize,
    pub maf_low: f64,
    pub maf_high: f64,
    pub ld_rho: f64,
    pub mutation_rate: f64,
    pub seed: u64,
}

/// Generates a synthetic dataset (database, pedigree and public models).
///
/// # Safety
/// `config` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn genofp_generate(
    config: *const GenofpGeneratorConfig,
    out: *mut *mut GenofpDataset,
) -> GenofpStatus {
    let (Some(config), false) = (config.as_ref(), out.is_null()) else {
        return fail(GenofpStatus::NullArgument, "null config or out pointer");
    };
    let generator = GeneratorConfig {
        n_families: config.n_families,
        total_rows: Some(config.total_rows),
        n_loci: config.n_loci,
        maf_range: (config.maf_low, config.maf_high),
        ld_rho: config.ld_rho,
        mutation_rate: config.mutation_rate,
        seed: config.seed,
    };
    match generate(&generator) {
        Ok(data) => {
            *out = Box::into_raw(Box::new(GenofpDataset {
                database: data.database,
                pedigree: data.pedigree,
                similarity: data.similarity,
                joint: data.joint,
            }));
            GenofpStatus::Ok
        }
        Err(e) => fail(GenofpStatus::InvalidArgument, e.to_string()),
    }
}

/// Borrows the dataset's database as a fresh caller-owned handle.
///
/// # Safety
/// `ds` must be a live dataset handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn genofp_dataset_database(
    ds: *const GenofpDataset,
    out: *mut *mut GenofpDatabase,
) -> GenofpStatus {
    let (Some(ds), false) = (ds.as_ref(), out.is_null()) else {
        return fail(GenofpStatus::NullArgument, "null dataset or out pointer");
    };
    *out = Box::into_raw(Box::new(GenofpDatabase(ds.database.clone())));
    GenofpStatus::Ok
}

/// Embeds the fingerprint for `sp_id` and returns the marked copy, the mask
/// and the fingerprint hex (caller-owned, may be NULL if not wanted).
///
/// # Safety
/// All handle and out pointers must be valid; `key` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn genofp_insert(
    db: *const GenofpDatabase,
    key: *const c_char,
    sp_id: u64,
    gamma_r: f64,
    gamma_l: f64,
    out_db: *mut *mut GenofpDatabase,
    out_mask: *mut *mut GenofpMask,
    out_fingerprint_hex: *mut *mut c_char,
) -> GenofpStatus {
    let (Some(db), false, false) = (db.as_ref(), out_db.is_null(), out_mask.is_null()) else {
        return fail(GenofpStatus::NullArgument, "null handle or out pointer");
    };
    let key = match cstr(key) {
        Ok(k) => k,
        Err(status) => return fail(status, "invalid key argument"),
    };
    let Some(secret) = SecretKey::new(key.as_bytes().to_vec()) else {
        return fail(GenofpStatus::InvalidArgument, "key must not be empty");
    };
    let params = InsertionParams {
        gamma_r,
        gamma_l,
        key: secret,
        sp_id,
    };
    match insert_fingerprint(&db.0, &params) {
        Ok((marked, mask, fingerprint)) => {
            *out_db = Box::into_raw(Box::new(GenofpDatabase(marked)));
            *out_mask = Box::into_raw(Box::new(GenofpMask(mask)));
            if !out_fingerprint_hex.is_null() {
                *out_fingerprint_hex = to_owned_cstring(fingerprint.to_hex());
            }
            GenofpStatus::Ok
        }
        Err(e) => fail(GenofpStatus::InvalidArgument, e.to_string()),
    }
}

/// Extracts the fingerprint pattern ('0'/'1'/'?' per position) as a
/// caller-owned string.
///
/// # Safety
/// `db` must be a live handle; `key` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn genofp_extract_pattern(
    db: *const GenofpDatabase,
    key: *const c_char,
    gamma_r: f64,
    gamma_l: f64,
    tau: f64,
    out: *mut *mut c_char,
) -> GenofpStatus {
    let (Some(db), false) = (db.as_ref(), out.is_null()) else {
        return fail(GenofpStatus::NullArgument, "null handle or out pointer");
    };
    let key = match cstr(key) {
        Ok(k) => k,
        Err(status) => return fail(status, "invalid key argument"),
    };
    let Some(secret) = SecretKey::new(key.as_bytes().to_vec()) else {
        return fail(GenofpStatus::InvalidArgument, "key must not be empty");
    };
    let params = ExtractionParams {
        gamma_r,
        gamma_l,
        key: secret,
        tau,
    };
    match extract_fingerprint(&db.0, &params) {
        Ok(extracted) => {
            *out = to_owned_cstring(extracted.to_pattern());
            GenofpStatus::Ok
        }
        Err(e) => fail(GenofpStatus::InvalidArgument, e.to_string()),
    }
}

/// Fraction of compromised fingerprint bits for a known key and SP.
///
/// # Safety
/// `db` must be a live handle; `key` NUL-terminated; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn genofp_per_cmp(
    db: *const GenofpDatabase,
    key: *const c_char,
    sp_id: u64,
    gamma_r: f64,
    gamma_l: f64,
    tau: f64,
    out: *mut f64,
) -> GenofpStatus {
    let (Some(db), false) = (db.as_ref(), out.is_null()) else {
        return fail(GenofpStatus::NullArgument, "null handle or out pointer");
    };
    let key = match cstr(key) {
        Ok(k) => k,
        Err(status) => return fail(status, "invalid key argument"),
    };
    let Some(secret) = SecretKey::new(key.as_bytes().to_vec()) else {
        return fail(GenofpStatus::InvalidArgument, "key must not be empty");
    };
    let fingerprint = genofp::keyed::gen_fingerprint(&secret, sp_id);
    let params = ExtractionParams {
        gamma_r,
        gamma_l,
        key: secret,
        tau,
    };
    let extracted = match extract_fingerprint(&db.0, &params) {
        Ok(e) => e,
        Err(e) => return fail(GenofpStatus::InvalidArgument, e.to_string()),
    };
    match per_cmp(&fingerprint, &extracted) {
        Ok(v) => {
            *out = v;
            GenofpStatus::Ok
        }
        Err(e) => fail(GenofpStatus::InvalidArgument, e.to_string()),
    }
}

/// Cell-level agreement between two equally shaped databases.
///
/// # Safety
/// Both handles must be live; `out` valid.
#[no_mangle]
pub unsafe extern "C" fn genofp_accuracy(
    original: *const GenofpDatabase,
    other: *const GenofpDatabase,
    out: *mut f64,
) -> GenofpStatus {
    let (Some(original), Some(other), false) = (original.as_ref(), other.as_ref(), out.is_null())
    else {
        return fail(GenofpStatus::NullArgument, "null handle or out pointer");
    };
    match accuracy(&original.0, &other.0) {
        Ok(v) => {
            *out = v;
            GenofpStatus::Ok
        }
        Err(e) => fail(GenofpStatus::InvalidArgument, e.to_string()),
    }
}

/// Applies both mitigations to a fingerprinted copy belonging to `ds`,
/// honouring the mask, and returns the repaired database.
///
/// # Safety
/// All handles must be live and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn genofp_mitigate(
    ds: *const GenofpDataset,
    fingerprinted: *const GenofpDatabase,
    mask: *const GenofpMask,
    lambda: f64,
    transport_seed: u64,
    out: *mut *mut GenofpDatabase,
) -> GenofpStatus {
    let (Some(ds), Some(db), Some(mask), false) = (
        ds.as_ref(),
        fingerprinted.as_ref(),
        mask.as_ref(),
        out.is_null(),
    ) else {
        return fail(GenofpStatus::NullArgument, "null handle or out pointer");
    };
    let after_row = match mitigate_row(&db.0, &mask.0, &ds.pedigree, &ds.similarity) {
        Ok((next, _)) => next,
        Err(e) => return fail(GenofpStatus::InvalidArgument, e.to_string()),
    };
    match mitigate_col(
        &after_row,
        &mask.0,
        &ds.joint,
        &SinkhornParams::with_lambda(lambda),
        transport_seed,
    ) {
        Ok((repaired, _)) => {
            *out = Box::into_raw(Box::new(GenofpDatabase(repaired)));
            GenofpStatus::Ok
        }
        Err(e) => fail(GenofpStatus::InvalidArgument, e.to_string()),
    }
}
