//! C ABI over `pzero-core`.
//!
//! Handles are opaque and owned by the caller once returned; free them with
//! the matching `*_free` function. Every fallible call returns a
//! [`PzeroStatus`]; on failure a message is available from
//! [`pzero_last_error`] on the same thread until the next call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use pzero_core::checkpoint::{Checkpoint, ModelKind};
use pzero_core::corpus::load_parsed_corpus;
use pzero_core::datagen::emit_pzero_instances;
use pzero_core::encoder::heads::selection_scores;
use pzero_core::encoder::{encode, EncoderInput};
use pzero_core::training::finetune::{predict, FinetuneModel};
use pzero_core::vocab::{TokenId, Vocabulary};
use pzero_core::zar::ZarInstance;
use pzero_core::{jsonl, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PzeroStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Checkpoint = 5,
    WrongModelKind = 6,
    Empty = 7,
    BufferTooSmall = 8,
    Panic = 99,
}

/// A loaded checkpoint.
pub struct PzeroModel {
    checkpoint: Checkpoint,
}

/// A loaded vocabulary.
pub struct PzeroVocab {
    vocab: Vocabulary,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

type Failure = (PzeroStatus, String);

fn status_of(e: &Error) -> PzeroStatus {
    match e {
        Error::Io { .. } => PzeroStatus::Io,
        Error::Parse { .. } => PzeroStatus::Parse,
        Error::Checkpoint(_) => PzeroStatus::Checkpoint,
        Error::Empty(_) => PzeroStatus::Empty,
        _ => PzeroStatus::InvalidArgument,
    }
}

fn fail(e: Error) -> Failure {
    (status_of(&e), e.to_string())
}

fn set_error(message: Option<String>) {
    let c = message.map(|m| CString::new(m.replace('\0', " ")).expect("no interior NUL"));
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PzeroStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            PzeroStatus::Ok
        }
        Ok(Err((status, message))) => {
            set_error(Some(message));
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(Some(format!("internal panic: {msg}")));
            PzeroStatus::Panic
        }
    }
}

fn non_null<T>(p: *const T, name: &str) -> Result<(), Failure> {
    if p.is_null() {
        Err((PzeroStatus::NullArgument, format!("`{name}` is null")))
    } else {
        Ok(())
    }
}

/// # Safety
/// `p` must be null or point to a NUL-terminated string.
unsafe fn string_arg(p: *const c_char, name: &str) -> Result<String, Failure> {
    non_null(p, name)?;
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| (PzeroStatus::InvalidArgument, format!("`{name}` is not valid UTF-8")))
}

/// Message for the last failed call on this thread, or null after a
/// successful call. The pointer stays valid until the next call.
#[no_mangle]
pub extern "C" fn pzero_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pzero_vocab_load(path: *const c_char, out: *mut *mut PzeroVocab) -> PzeroStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = PathBuf::from(string_arg(path, "path")?);
        let vocab = Vocabulary::load(&path).map_err(fail)?;
        *out = Box::into_raw(Box::new(PzeroVocab { vocab }));
        Ok(())
    })
}

/// # Safety
/// `vocab` must be null or a handle from [`pzero_vocab_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pzero_vocab_free(vocab: *mut PzeroVocab) {
    if !vocab.is_null() {
        drop(Box::from_raw(vocab));
    }
}

/// # Safety
/// `vocab` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pzero_vocab_len(vocab: *const PzeroVocab, out: *mut usize) -> PzeroStatus {
    guard(|| {
        non_null(vocab, "vocab")?;
        non_null(out, "out")?;
        *out = (*vocab).vocab.len();
        Ok(())
    })
}

/// Id of `surface` after normalization; unknown words map to `[UNK]`.
///
/// # Safety
/// `vocab` must be a live handle, `surface` a NUL-terminated string and
/// `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pzero_vocab_id(vocab: *const PzeroVocab, surface: *const c_char, out: *mut u32) -> PzeroStatus {
    guard(|| {
        non_null(vocab, "vocab")?;
        non_null(out, "out")?;
        let s = string_arg(surface, "surface")?;
        *out = (*vocab).vocab.id(&s);
        Ok(())
    })
}

/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pzero_model_load(path: *const c_char, out: *mut *mut PzeroModel) -> PzeroStatus {
    guard(|| {
        non_null(out, "out")?;
        let path = PathBuf::from(string_arg(path, "path")?);
        let checkpoint = Checkpoint::load(&path).map_err(fail)?;
        *out = Box::into_raw(Box::new(PzeroModel { checkpoint }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`pzero_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pzero_model_free(model: *mut PzeroModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Model kind code: 0 base, 1 pzero, 2 cloze, 3 as, 4 as-pzero.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pzero_model_kind(model: *const PzeroModel, out: *mut u32) -> PzeroStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(out, "out")?;
        *out = match (*model).checkpoint.kind {
            ModelKind::Base => 0,
            ModelKind::Pzero => 1,
            ModelKind::Cloze => 2,
            ModelKind::As => 3,
            ModelKind::AsPzero => 4,
        };
        Ok(())
    })
}

/// Selection scores of every position for the `[MASK]` at 1-based
/// `mask_index`. Positions that can never be selected get `-INFINITY`.
///
/// # Safety
/// `model` must be a live handle, `tokens` must hold `len` ids and `out`
/// must have room for `out_len` floats.
#[no_mangle]
pub unsafe extern "C" fn pzero_selection_scores(
    model: *const PzeroModel,
    tokens: *const u32,
    len: usize,
    mask_index: usize,
    out: *mut f32,
    out_len: usize,
) -> PzeroStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(tokens, "tokens")?;
        non_null(out, "out")?;
        if out_len < len {
            return Err((PzeroStatus::BufferTooSmall, format!("need {len} floats, got {out_len}")));
        }
        let tokens: Vec<TokenId> = std::slice::from_raw_parts(tokens, len).to_vec();
        if mask_index == 0 || mask_index > len {
            return Err((PzeroStatus::InvalidArgument, format!("mask_index {mask_index} outside 1..={len}")));
        }
        let params = &(*model).checkpoint.params;
        let enc = encode(params, &[EncoderInput::plain(tokens.clone())]).map_err(fail)?;
        let s = selection_scores(params, enc.hidden_of(0), mask_index, &tokens);
        let dst = std::slice::from_raw_parts_mut(out, len);
        for (d, v) in dst.iter_mut().zip(s.iter()) {
            *d = *v;
        }
        Ok(())
    })
}

/// Decodes every slot of the ZAR instances in `instances_jsonl` (one JSON
/// instance per line) with an `as` or `as-pzero` model and writes the
/// predictions as NUL-terminated JSONL into `buf`. `needed` always receives
/// the required size including the NUL; with a short buffer the call
/// returns `BUFFER_TOO_SMALL` and writes nothing.
///
/// # Safety
/// `model` must be a live handle, `instances_jsonl` a NUL-terminated
/// string, `buf` null or valid for `buf_len` bytes and `needed` a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn pzero_predict(
    model: *const PzeroModel,
    instances_jsonl: *const c_char,
    buf: *mut c_char,
    buf_len: usize,
    needed: *mut usize,
) -> PzeroStatus {
    guard(|| {
        non_null(model, "model")?;
        non_null(needed, "needed")?;
        let text = string_arg(instances_jsonl, "instances_jsonl")?;
        let ck = &(*model).checkpoint;
        let which = match ck.kind {
            ModelKind::As => FinetuneModel::As,
            ModelKind::AsPzero => FinetuneModel::AsPzero,
            other => {
                return Err((
                    PzeroStatus::WrongModelKind,
                    format!("prediction needs an `as` or `as-pzero` model, got `{other}`"),
                ))
            }
        };
        let mut instances = Vec::new();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let inst: ZarInstance = serde_json::from_str(line)
                .map_err(|e| (PzeroStatus::Parse, format!("line {}: {e}", i + 1)))?;
            inst.validate().map_err(|e| (PzeroStatus::Parse, format!("line {}: {e}", i + 1)))?;
            instances.push(inst);
        }
        let preds = predict(which, &ck.params, &instances).map_err(fail)?;
        let mut out = String::new();
        for p in &preds {
            out.push_str(&serde_json::to_string(p).expect("serializable"));
            out.push('\n');
        }
        let bytes = out.len() + 1;
        *needed = bytes;
        if buf.is_null() || buf_len < bytes {
            return Err((PzeroStatus::BufferTooSmall, format!("need {bytes} bytes, got {buf_len}")));
        }
        let dst = std::slice::from_raw_parts_mut(buf as *mut u8, bytes);
        dst[..out.len()].copy_from_slice(out.as_bytes());
        dst[out.len()] = 0;
        Ok(())
    })
}

/// Generates PZero instances from the parsed corpus at `corpus_path` with
/// windows of `window_sentences` sentences and at most `max_len` tokens,
/// writing them as JSONL to `out_path`. Fails with `EMPTY` when no instance
/// can be generated.
///
/// # Safety
/// `corpus_path` and `out_path` must be NUL-terminated strings, `vocab` a
/// live handle and `count` null or a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn pzero_generate(
    corpus_path: *const c_char,
    vocab: *const PzeroVocab,
    window_sentences: usize,
    max_len: usize,
    out_path: *const c_char,
    count: *mut usize,
) -> PzeroStatus {
    guard(|| {
        non_null(vocab, "vocab")?;
        let corpus = PathBuf::from(string_arg(corpus_path, "corpus_path")?);
        let out = PathBuf::from(string_arg(out_path, "out_path")?);
        if window_sentences == 0 {
            return Err((PzeroStatus::InvalidArgument, "window_sentences must be positive".into()));
        }
        let docs = load_parsed_corpus(&corpus).map_err(fail)?;
        let mut instances = Vec::new();
        for d in &docs {
            instances.extend(emit_pzero_instances(d, window_sentences, max_len, &(*vocab).vocab).map_err(fail)?);
        }
        if instances.is_empty() {
            return Err((PzeroStatus::Empty, "no PZero instances generated".into()));
        }
        jsonl::write(&out, &instances).map_err(fail)?;
        if !count.is_null() {
            *count = instances.len();
        }
        Ok(())
    })
}
