//! C ABI over the tangseg segmenter.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free` function. Every fallible call returns a
//! [`TsStatus`] and, on failure, leaves a message readable through
//! [`tangseg_last_error`] on the same thread. Strings returned to C are
//! NUL-terminated UTF-8 and must be released with [`tangseg_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use tangseg::corpus::{CorpusStats, Label, LabelConfig, RawDocument};
use tangseg::embedding::EmbeddingMatrix;
use tangseg::eval::score;
use tangseg::model::{Checkpoint, Segmenter};
use tangseg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    MissingPath = 4,
    Io = 5,
    Format = 6,
    Inference = 7,
    Evaluation = 8,
    BufferTooSmall = 9,
    InvalidLabel = 10,
    Panic = 11,
}

impl From<&Error> for TsStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => TsStatus::Config,
            Error::MissingPath(_) => TsStatus::MissingPath,
            Error::Io { .. } => TsStatus::Io,
            Error::Format { .. } | Error::Json(_) => TsStatus::Format,
            Error::Inference { .. } | Error::Training(_) => TsStatus::Inference,
            Error::Evaluation(_) => TsStatus::Evaluation,
        }
    }
}

/// Loaded character embeddings.
pub struct TsEmbeddings {
    matrix: EmbeddingMatrix,
}

/// Embeddings plus a trained classifier.
pub struct TsSegmenter {
    inner: Segmenter,
    labels: LabelConfig,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TsStats {
    pub noc: u64,
    pub nop: u64,
    /// nop / noc, or NaN when there are no content characters.
    pub ratio: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TsReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(TsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(TsStatus::from(&e), e.to_string())
    }
}

/// Runs `f`, recording any failure or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> TsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            TsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(TsStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure(TsStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn null(what: &str) -> Failure {
    Failure(TsStatus::NullPointer, format!("{what} is null"))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(TsStatus::Format, "output contains a NUL character".to_string()))
}

/// Library version as a static NUL-terminated string. Do not free.
#[no_mangle]
pub extern "C" fn tangseg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn tangseg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn tangseg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tangseg_embeddings_load(path: *const c_char, out: *mut *mut TsEmbeddings) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let path = PathBuf::from(str_arg(path, "path")?);
        let matrix = EmbeddingMatrix::load(&path)?;
        *out = Box::into_raw(Box::new(TsEmbeddings { matrix }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from `tangseg_embeddings_load`, freed once.
#[no_mangle]
pub unsafe extern "C" fn tangseg_embeddings_free(handle: *mut TsEmbeddings) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Vector dimension, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live embeddings handle.
#[no_mangle]
pub unsafe extern "C" fn tangseg_embeddings_dim(handle: *const TsEmbeddings) -> usize {
    handle.as_ref().map_or(0, |h| h.matrix.dim())
}

/// Vocabulary size, or 0 for a null handle.
///
/// # Safety
/// `handle` must be null or a live embeddings handle.
#[no_mangle]
pub unsafe extern "C" fn tangseg_embeddings_vocab_size(handle: *const TsEmbeddings) -> usize {
    handle.as_ref().map_or(0, |h| h.matrix.vocab().len())
}

/// Builds a segmenter from embeddings (copied, so the embeddings handle
/// stays independent) and a checkpoint file. Default label settings apply.
///
/// # Safety
/// `embeddings` must be a live handle, `checkpoint_path` a NUL-terminated
/// string, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tangseg_segmenter_new(
    embeddings: *const TsEmbeddings,
    checkpoint_path: *const c_char,
    out: *mut *mut TsSegmenter,
) -> TsStatus {
    guard(|| {
        let emb = embeddings.as_ref().ok_or_else(|| null("embeddings"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let path = PathBuf::from(str_arg(checkpoint_path, "checkpoint_path")?);
        let inner = Segmenter::new(emb.matrix.clone(), Checkpoint::load(&path)?)?;
        *out = Box::into_raw(Box::new(TsSegmenter {
            inner,
            labels: LabelConfig::default(),
        }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from `tangseg_segmenter_new`, freed once.
#[no_mangle]
pub unsafe extern "C" fn tangseg_segmenter_free(handle: *mut TsSegmenter) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Punctuates `text` with 。 at predicted boundaries. The result must be
/// released with `tangseg_string_free`.
///
/// # Safety
/// `handle` must be live, `text` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tangseg_segment(
    handle: *const TsSegmenter,
    text: *const c_char,
    out: *mut *mut c_char,
) -> TsStatus {
    guard(|| {
        let seg = handle.as_ref().ok_or_else(|| null("handle"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let text = str_arg(text, "text")?;
        *out = to_c_string(seg.inner.segment_text(text, &seg.labels)?)?;
        Ok(())
    })
}

/// Writes one label per character of `text` (0 non-boundary, 1 boundary).
/// The text is classified as-is, so pass content characters only. `len`
/// receives the character count; when `capacity` is too small nothing is
/// written and `BufferTooSmall` is returned.
///
/// # Safety
/// `handle` must be live, `text` NUL-terminated, `labels` valid for
/// `capacity` bytes, `len` writable.
#[no_mangle]
pub unsafe extern "C" fn tangseg_predict(
    handle: *const TsSegmenter,
    text: *const c_char,
    labels: *mut u8,
    capacity: usize,
    len: *mut usize,
) -> TsStatus {
    guard(|| {
        let seg = handle.as_ref().ok_or_else(|| null("handle"))?;
        if len.is_null() {
            return Err(null("len"));
        }
        let chars: Vec<char> = str_arg(text, "text")?.chars().collect();
        *len = chars.len();
        if chars.len() > capacity {
            return Err(Failure(
                TsStatus::BufferTooSmall,
                format!("need {} labels, capacity is {capacity}", chars.len()),
            ));
        }
        if chars.is_empty() {
            return Ok(());
        }
        if labels.is_null() {
            return Err(null("labels"));
        }
        let predicted = seg.inner.predict(&chars)?;
        let dst = std::slice::from_raw_parts_mut(labels, predicted.len());
        for (d, l) in dst.iter_mut().zip(predicted) {
            *d = l.index() as u8;
        }
        Ok(())
    })
}

unsafe fn label_slice(p: *const u8, len: usize, what: &str) -> Result<Vec<Label>, Failure> {
    if len == 0 {
        return Ok(Vec::new());
    }
    if p.is_null() {
        return Err(null(what));
    }
    std::slice::from_raw_parts(p, len)
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            Label::from_index(b as usize)
                .ok_or_else(|| Failure(TsStatus::InvalidLabel, format!("{what}[{i}] = {b} is not 0 or 1")))
        })
        .collect()
}

/// Boundary precision, recall and F1 over two label arrays of equal length.
///
/// # Safety
/// `gold` and `predicted` must be valid for `len` bytes (or `len` is 0);
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tangseg_score(
    gold: *const u8,
    predicted: *const u8,
    len: usize,
    out: *mut TsReport,
) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let g = label_slice(gold, len, "gold")?;
        let p = label_slice(predicted, len, "predicted")?;
        let r = score(&g, &p)?;
        *out = TsReport {
            precision: r.precision,
            recall: r.recall,
            f1: r.f1,
            tp: r.counts.tp,
            fp: r.counts.fp,
            fn_: r.counts.fn_,
            tn: r.counts.tn,
        };
        Ok(())
    })
}

/// Character and punctuation counts of punctuated text under the default
/// label settings.
///
/// # Safety
/// `text` must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tangseg_stats(text: *const c_char, out: *mut TsStats) -> TsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let doc = RawDocument::new("text", str_arg(text, "text")?);
        let s = CorpusStats::of_document(&doc, &LabelConfig::default());
        *out = TsStats {
            noc: s.noc,
            nop: s.nop,
            ratio: s.ratio().unwrap_or(f64::NAN),
        };
        Ok(())
    })
}
