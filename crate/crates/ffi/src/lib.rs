//! C interface to the tagger. Models and streams are opaque heap handles;
//! every fallible call returns one of the `CTT_*` status codes and leaves a
//! message for [`ctt_last_error`]. Strings returned through `out` pointers
//! are owned by the caller and released with [`ctt_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use ctt_core::data::tokenize;
use ctt_core::decoding::{tag_offline, DecodePolicy, Emission, StreamDecoder};
use ctt_core::model::{checkpoint, TrainedModel};
use ctt_core::Error;

pub const CTT_OK: i32 = 0;
/// A required pointer argument was null.
pub const CTT_ERR_NULL: i32 = 1;
/// Text input was not valid UTF-8.
pub const CTT_ERR_UTF8: i32 = 2;
pub const CTT_ERR_IO: i32 = 3;
/// The checkpoint file is malformed or inconsistent.
pub const CTT_ERR_CHECKPOINT: i32 = 4;
/// Invalid parameters, such as a zero frame rate.
pub const CTT_ERR_CONFIG: i32 = 5;
/// Input the model cannot handle: empty text, too many words, a finished
/// stream.
pub const CTT_ERR_INPUT: i32 = 6;
/// A bug: the library panicked. The handle involved should be freed.
pub const CTT_ERR_INTERNAL: i32 = 7;

/// Loaded model. Safe to share between threads for tagging.
pub struct CttModel {
    inner: Arc<TrainedModel>,
}

/// Incremental decoder over one word stream. Keeps its model alive, so the
/// model handle may be freed first.
pub struct CttStream {
    inner: StreamDecoder<Arc<TrainedModel>>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> i32 {
    match e {
        Error::Io(_) => CTT_ERR_IO,
        Error::Checkpoint(_) => CTT_ERR_CHECKPOINT,
        Error::Config(_) => CTT_ERR_CONFIG,
        _ => CTT_ERR_INPUT,
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CTT_OK,
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {msg}"));
            CTT_ERR_INTERNAL
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(CTT_ERR_NULL, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(CTT_ERR_UTF8, format!("{what}: {e}")))
}

unsafe fn write_out(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| Fail(CTT_ERR_INTERNAL, "output contains a NUL byte".into()))?;
    *out = c.into_raw();
    Ok(())
}

fn check_out<T>(out: *mut *mut T) -> Result<(), Fail> {
    if out.is_null() {
        Err(Fail(CTT_ERR_NULL, "output pointer is null".into()))
    } else {
        Ok(())
    }
}

fn lines(batch: &[Emission]) -> String {
    batch
        .iter()
        .map(|e| format!("{}\t{}\t{}\n", e.word, e.punct, e.disf))
        .collect()
}

/// Message describing the last failure on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ctt_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a checkpoint file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ctt_model_load(path: *const c_char, out: *mut *mut CttModel) -> i32 {
    guard(|| {
        check_out(out)?;
        let path = text(path, "path")?;
        let model = checkpoint::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(CttModel { inner: Arc::new(model) }));
        Ok(())
    })
}

/// # Safety
/// `model` must come from [`ctt_model_load`] and not be freed twice. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn ctt_model_free(model: *mut CttModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Tags whitespace-separated `words` in one pass. `*out` receives one
/// `word\tpunct\tdisf\n` line per word.
///
/// # Safety
/// `model` must be a live handle, `words` a NUL-terminated string and `out`
/// a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ctt_tag(model: *const CttModel, words: *const c_char, out: *mut *mut c_char) -> i32 {
    guard(|| {
        check_out(out)?;
        let model = model.as_ref().ok_or(Fail(CTT_ERR_NULL, "model is null".into()))?;
        let words = tokenize(text(words, "words")?);
        let seq = tag_offline(&*model.inner, &words)?;
        let (p, d) = (seq.punct().unwrap_or_default(), seq.disf().unwrap_or_default());
        let body = words
            .iter()
            .zip(p)
            .zip(d)
            .map(|((w, p), d)| format!("{w}\t{p}\t{d}\n"))
            .collect();
        write_out(out, body)
    })
}

/// Starts a stream that consumes `frame_rate` words per inference and
/// freezes a sentence once `lookahead_words` words follow its end. A
/// `max_buffer` of 0 leaves the buffer uncapped.
///
/// # Safety
/// `model` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ctt_stream_new(
    model: *const CttModel,
    frame_rate: u32,
    lookahead_words: u32,
    max_buffer: u32,
    out: *mut *mut CttStream,
) -> i32 {
    guard(|| {
        check_out(out)?;
        let model = model.as_ref().ok_or(Fail(CTT_ERR_NULL, "model is null".into()))?;
        let mut policy = DecodePolicy::new(frame_rate as usize, lookahead_words as usize);
        if max_buffer > 0 {
            policy = policy.with_max_buffer(max_buffer as usize);
        }
        let inner = StreamDecoder::new(Arc::clone(&model.inner), policy)?;
        *out = Box::into_raw(Box::new(CttStream { inner }));
        Ok(())
    })
}

/// Feeds whitespace-separated words. `*out` receives the words finalized by
/// this call as `word\tpunct\tdisf\n` lines, possibly none.
///
/// # Safety
/// `stream` must be a live handle, `words` a NUL-terminated string and `out`
/// a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ctt_stream_push(stream: *mut CttStream, words: *const c_char, out: *mut *mut c_char) -> i32 {
    guard(|| {
        check_out(out)?;
        let stream = stream.as_mut().ok_or(Fail(CTT_ERR_NULL, "stream is null".into()))?;
        let words = tokenize(text(words, "words")?);
        let batch = stream.inner.push(words)?;
        write_out(out, lines(&batch))
    })
}

/// Flushes the stream; `*out` receives every remaining word. Further pushes
/// fail with `CTT_ERR_INPUT`.
///
/// # Safety
/// `stream` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn ctt_stream_finish(stream: *mut CttStream, out: *mut *mut c_char) -> i32 {
    guard(|| {
        check_out(out)?;
        let stream = stream.as_mut().ok_or(Fail(CTT_ERR_NULL, "stream is null".into()))?;
        let batch = stream.inner.finish()?;
        write_out(out, lines(&batch))
    })
}

/// # Safety
/// `stream` must come from [`ctt_stream_new`] and not be freed twice. Null
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn ctt_stream_free(stream: *mut CttStream) {
    if !stream.is_null() {
        drop(Box::from_raw(stream));
    }
}

/// # Safety
/// `s` must be a string returned by this library, freed once. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn ctt_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
