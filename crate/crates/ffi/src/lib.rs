//! C ABI over the fusebench core.
//!
//! Every entry point returns an [`FbStatus`]. On failure the thread-local
//! message from [`fb_last_error`] describes the cause. Objects cross the
//! boundary as opaque handles that must be released with their `_free`
//! function. Panics are caught at the boundary and reported as
//! `FB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fusebench::attribution::{shapley_exact, CoalitionGame, MAX_PLAYERS};
use fusebench::evaluation::auroc;
use fusebench::featurization::{featurize_signal, N_SIGNAL_FEATURES};
use fusebench::learner::TrainedEnsemble;
use fusebench::record_store::{ingest_blocks, Observation, SourceCatalog};
use fusebench::{Error, Matrix};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Validation = 3,
    Domain = 4,
    Numeric = 5,
    Io = 6,
    TooManyPlayers = 7,
    Panic = 99,
}

/// Number of features produced by [`fb_signal_stats`].
pub const FB_SIGNAL_FEATURES: usize = 11;
const _: () = assert!(FB_SIGNAL_FEATURES == N_SIGNAL_FEATURES);

/// Opaque source catalog.
pub struct FbCatalog(SourceCatalog);

/// Opaque coalition game.
pub struct FbGame(CoalitionGame);

/// Opaque trained boosted-tree model.
pub struct FbModel(TrainedEnsemble);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> FbStatus {
    match err {
        Error::Io { .. } => FbStatus::Io,
        Error::Domain(_) | Error::Unsorted { .. } | Error::EmptySet(_) | Error::SingleClass { .. } => {
            FbStatus::Domain
        }
        Error::NonFinite(_) | Error::NonConvergence { .. } | Error::DegenerateData(_) => FbStatus::Numeric,
        Error::TooManyPlayers { .. } => FbStatus::TooManyPlayers,
        _ => FbStatus::Validation,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (FbStatus, String)>) -> FbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FbStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FbStatus::Panic
        }
    }
}

fn core<T>(r: fusebench::Result<T>) -> Result<T, (FbStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (FbStatus, String) {
    (FbStatus::NullArgument, format!("{name} is null"))
}

unsafe fn path_arg(p: *const c_char, name: &str) -> Result<PathBuf, (FbStatus, String)> {
    if p.is_null() {
        return Err(null(name));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| (FbStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

unsafe fn slice_arg<'a, T>(p: *const T, n: usize, name: &str) -> Result<&'a [T], (FbStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (FbStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

/// Message of the last failed call on this thread, or null after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn fb_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a catalog manifest (JSON) from `path`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fb_catalog_load(path: *const c_char, out: *mut *mut FbCatalog) -> FbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = path_arg(path, "path")?;
        let cat = core(SourceCatalog::load(&path))?;
        *out = Box::into_raw(Box::new(FbCatalog(cat)));
        Ok(())
    })
}

/// The built-in eleven-source catalog.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fb_catalog_default(out: *mut *mut FbCatalog) -> FbStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(FbCatalog(SourceCatalog::standard())));
        Ok(())
    })
}

/// Number of sources; 0 for a null handle.
///
/// # Safety
/// `catalog` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fb_catalog_len(catalog: *const FbCatalog) -> usize {
    catalog.as_ref().map_or(0, |c| c.0.len())
}

/// Total fused dimension of all sources; 0 for a null handle.
///
/// # Safety
/// `catalog` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fb_catalog_total_dim(catalog: *const FbCatalog) -> usize {
    catalog.as_ref().map_or(0, |c| c.0.total_dim())
}

/// Validates an embedding-block file (JSONL or binary) against the catalog and
/// reports the number of samples it holds.
///
/// # Safety
/// `catalog` must be a live handle, `path` NUL-terminated, `n_samples` valid.
#[no_mangle]
pub unsafe extern "C" fn fb_blocks_validate(
    catalog: *const FbCatalog,
    path: *const c_char,
    n_samples: *mut usize,
) -> FbStatus {
    guard(|| {
        let cat = catalog.as_ref().ok_or_else(|| null("catalog"))?;
        let out = out_arg(n_samples, "n_samples")?;
        let path = path_arg(path, "path")?;
        let store = core(ingest_blocks(&cat.0, &[path]))?;
        *out = store.n_samples();
        Ok(())
    })
}

/// # Safety
/// `catalog` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fb_catalog_free(catalog: *mut FbCatalog) {
    if !catalog.is_null() {
        drop(Box::from_raw(catalog));
    }
}

/// Builds a game over `n_players` players from `2^n_players` coalition values
/// indexed by bitmask. Entry 0 is the empty coalition.
///
/// # Safety
/// `values` must point to `n_values` doubles and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn fb_game_new(
    n_players: usize,
    values: *const f64,
    n_values: usize,
    out: *mut *mut FbGame,
) -> FbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if n_players > MAX_PLAYERS {
            return Err((
                FbStatus::TooManyPlayers,
                format!("exact Shapley supports at most {MAX_PLAYERS} players, got {n_players}"),
            ));
        }
        let values = slice_arg(values, n_values, "values")?;
        let names = (0..n_players).map(|i| format!("p{i}")).collect();
        let game = core(CoalitionGame::new(names, values.to_vec()))?;
        *out = Box::into_raw(Box::new(FbGame(game)));
        Ok(())
    })
}

/// Writes the exact Shapley value of each player to `phi`.
///
/// # Safety
/// `game` must be a live handle and `phi` point to `n_phi` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fb_shapley_exact(game: *const FbGame, phi: *mut f64, n_phi: usize) -> FbStatus {
    guard(|| {
        let game = game.as_ref().ok_or_else(|| null("game"))?;
        let n = game.0.n_players();
        if n_phi != n {
            return Err((FbStatus::InvalidArgument, format!("phi holds {n_phi} values, game has {n} players")));
        }
        let values = core(shapley_exact(&game.0))?;
        if n > 0 {
            if phi.is_null() {
                return Err(null("phi"));
            }
            std::slice::from_raw_parts_mut(phi, n).copy_from_slice(&values);
        }
        Ok(())
    })
}

/// # Safety
/// `game` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fb_game_free(game: *mut FbGame) {
    if !game.is_null() {
        drop(Box::from_raw(game));
    }
}

/// Loads a trained model from its JSON serialization.
///
/// # Safety
/// `path` must be NUL-terminated and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn fb_model_load(path: *const c_char, out: *mut *mut FbModel) -> FbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = path_arg(path, "path")?;
        let text = std::fs::read_to_string(&path)
            .map_err(|e| (FbStatus::Io, format!("reading {}: {e}", path.display())))?;
        let model = core(TrainedEnsemble::from_json(&text))?;
        *out = Box::into_raw(Box::new(FbModel(model)));
        Ok(())
    })
}

/// Input width the model expects; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fb_model_n_features(model: *const FbModel) -> usize {
    model.as_ref().map_or(0, |m| m.0.n_features)
}

/// Scores `rows` row-major feature vectors of width `cols`. Features must
/// already be normalized the way the training split was.
///
/// # Safety
/// `x` must hold `rows * cols` doubles and `scores` have room for `rows`.
#[no_mangle]
pub unsafe extern "C" fn fb_model_predict(
    model: *const FbModel,
    x: *const f64,
    rows: usize,
    cols: usize,
    scores: *mut f64,
) -> FbStatus {
    guard(|| {
        let model = model.as_ref().ok_or_else(|| null("model"))?;
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| (FbStatus::InvalidArgument, "rows * cols overflows".to_string()))?;
        let data = slice_arg(x, len, "x")?;
        let m = core(Matrix::from_vec(rows, cols, data.to_vec()))?;
        let s = core(model.0.predict_scores(&m))?;
        if rows > 0 {
            if scores.is_null() {
                return Err(null("scores"));
            }
            std::slice::from_raw_parts_mut(scores, rows).copy_from_slice(&s);
        }
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fb_model_free(model: *mut FbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Area under the ROC curve with midranks for ties. Labels are 0 or 1.
///
/// # Safety
/// `scores` and `labels` must hold `n` elements and `out` be valid.
#[no_mangle]
pub unsafe extern "C" fn fb_auroc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> FbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let s = slice_arg(scores, n, "scores")?;
        let l = slice_arg(labels, n, "labels")?;
        if let Some(bad) = l.iter().find(|&&v| v > 1) {
            return Err((FbStatus::InvalidArgument, format!("label {bad} is not 0 or 1")));
        }
        *out = core(auroc(s, l))?;
        Ok(())
    })
}

/// Summary features of one irregular series, in order: count, max, min, mean,
/// median, population std, variance, interior peak count, OLS slope per hour,
/// mean successive difference, mean absolute successive difference.
/// `times` must be non-decreasing.
///
/// # Safety
/// `times` and `values` must hold `n` doubles; `out` must hold `FB_SIGNAL_FEATURES`.
#[no_mangle]
pub unsafe extern "C" fn fb_signal_stats(
    times: *const f64,
    values: *const f64,
    n: usize,
    out: *mut f64,
) -> FbStatus {
    guard(|| {
        let t = slice_arg(times, n, "times")?;
        let v = slice_arg(values, n, "values")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let points: Vec<Observation> = t
            .iter()
            .zip(v)
            .map(|(&time, &value)| Observation { time, value })
            .collect();
        let stats = core(featurize_signal(&points))?;
        std::slice::from_raw_parts_mut(out, N_SIGNAL_FEATURES).copy_from_slice(&stats.to_array());
        Ok(())
    })
}
