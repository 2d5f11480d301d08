//! C ABI for mbrforge.
//!
//! Conventions shared by every function:
//!
//! - The return value is an [`MbrStatus`]. On anything other than
//!   `MBR_STATUS_OK` a message is available from [`mbrforge_last_error`] on
//!   the calling thread, and out-parameters are left untouched.
//! - Input strings are NUL-terminated UTF-8 and only borrowed for the call.
//! - Handles (`MbrCandidates`, `MbrSelection`, `MbrTensorStore`) are opaque
//!   and released with their `_free` function; freeing NULL is a no-op.
//! - Strings returned through `char **` out-parameters belong to the caller
//!   and are released with [`mbrforge_string_free`].
//! - Pointers must be valid for the documented length; the library checks
//!   for NULL but cannot check anything else. A Rust panic never crosses the
//!   boundary and is reported as `MBR_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use mbrforge::bridge::BridgeError;
use mbrforge::checkpoint::{self, LoraAdapter, ProbVector, TensorStore};
use mbrforge::mbr::{self, CandidateSet, UtilitySpec};
use mbrforge::metrics::{self, BleuConfig, ChrfConfig, Smoothing, TokenScheme};
use mbrforge::promptgen::{self, ChatDocument, ContextWindow, RenderedPrompt};
use mbrforge::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Misaligned, out-of-range or otherwise unusable input data.
    InvalidInput = 3,
    /// A malformed tensor file.
    Format = 4,
    Io = 5,
    /// The external scorer failed.
    Bridge = 6,
    Panic = 7,
}

/// Built-in MBR utilities.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MbrUtility {
    Chrf = 0,
    /// Sentence BLEU with add-0.1 smoothing on punctuation-split tokens.
    Bleu = 1,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: MbrStatus,
    message: String,
}

impl Failure {
    fn new(status: MbrStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn invalid(message: impl Into<String>) -> Self {
        Self::new(MbrStatus::InvalidInput, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::Format(_) => MbrStatus::Format,
            Error::Io { .. } => MbrStatus::Io,
            Error::Bridge(_) => MbrStatus::Bridge,
            _ => MbrStatus::InvalidInput,
        };
        Self::new(status, e.to_string())
    }
}

impl From<BridgeError> for Failure {
    fn from(e: BridgeError) -> Self {
        Error::from(e).into()
    }
}

type FfiResult<T = ()> = Result<T, Failure>;

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', "\\0")).expect("NULs replaced");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult) -> MbrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MbrStatus::Ok,
        Ok(Err(failure)) => {
            set_last_error(&failure.message);
            failure.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<String>()
                .map(String::as_str)
                .or_else(|| payload.downcast_ref::<&str>().copied())
                .unwrap_or("unknown panic");
            set_last_error(&format!("internal panic: {msg}"));
            MbrStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(Failure::new(MbrStatus::NullPointer, format!("{what} is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Failure::new(MbrStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> FfiResult<&'a T> {
    p.as_ref()
        .ok_or_else(|| Failure::new(MbrStatus::NullPointer, format!("{what} is NULL")))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::new(MbrStatus::NullPointer, format!("{what} is NULL")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> FfiResult {
    if out.is_null() {
        return Err(Failure::new(MbrStatus::NullPointer, format!("{what} is NULL")));
    }
    out.write(value);
    Ok(())
}

fn c_string(s: String) -> FfiResult<CString> {
    CString::new(s).map_err(|_| Failure::invalid("result contains a NUL byte"))
}

/// Message for the most recent failure on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn mbrforge_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn mbrforge_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn mbrforge_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- metrics ----

/// Sentence BLEU (0-100) of `hyp` against one reference, add-0.1 smoothing,
/// punctuation-split tokens.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_sentence_bleu(
    hyp: *const c_char,
    reference: *const c_char,
    out: *mut f64,
) -> MbrStatus {
    guard(|| {
        let scheme = TokenScheme::default();
        let h = metrics::tokenize(str_arg(hyp, "hyp")?, scheme);
        let r = metrics::tokenize(str_arg(reference, "reference")?, scheme);
        let cfg = BleuConfig {
            smoothing: Smoothing::AddK(Smoothing::DEFAULT_K),
            ..BleuConfig::default()
        };
        let score = metrics::sentence_bleu(&h, &[r], &cfg)?;
        put(out, score.value, "out")
    })
}

/// Sentence chrF (0-100), character order 6, beta 2.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_sentence_chrf(
    hyp: *const c_char,
    reference: *const c_char,
    out: *mut f64,
) -> MbrStatus {
    guard(|| {
        let score = metrics::sentence_chrf(
            str_arg(hyp, "hyp")?,
            str_arg(reference, "reference")?,
            &ChrfConfig::default(),
        )?;
        put(out, score.value, "out")
    })
}

// ---- MBR ----

/// Segments collected for MBR selection.
pub struct MbrCandidates {
    num_systems: usize,
    sources: Vec<String>,
    rows: Vec<Vec<String>>,
}

/// The outcome of [`mbrforge_mbr_decode`].
pub struct MbrSelection {
    texts: Vec<CString>,
    indices: Vec<usize>,
    utilities: Vec<f64>,
}

/// New empty candidate set whose segments each carry `num_systems` (>= 2)
/// candidates.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_candidates_new(num_systems: usize, out: *mut *mut MbrCandidates) -> MbrStatus {
    guard(|| {
        if num_systems < 2 {
            return Err(Failure::invalid(format!("need at least 2 systems, got {num_systems}")));
        }
        let handle = Box::new(MbrCandidates {
            num_systems,
            sources: Vec::new(),
            rows: Vec::new(),
        });
        put(out, Box::into_raw(handle), "out")
    })
}

/// Appends one segment: its source and exactly `num_systems` candidates.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_candidates_add(
    set: *mut MbrCandidates,
    source: *const c_char,
    candidates: *const *const c_char,
    count: usize,
) -> MbrStatus {
    guard(|| {
        let set = set
            .as_mut()
            .ok_or_else(|| Failure::new(MbrStatus::NullPointer, "set is NULL"))?;
        if count != set.num_systems {
            return Err(Failure::invalid(format!(
                "segment {} has {count} candidates, expected {}",
                set.rows.len(),
                set.num_systems
            )));
        }
        let source = str_arg(source, "source")?.to_string();
        let row = slice_arg(candidates, count, "candidates")?
            .iter()
            .enumerate()
            .map(|(i, &c)| str_arg(c, &format!("candidate {i}")).map(str::to_string))
            .collect::<FfiResult<Vec<_>>>()?;
        set.sources.push(source);
        set.rows.push(row);
        Ok(())
    })
}

/// Number of segments added so far; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_candidates_len(set: *const MbrCandidates) -> usize {
    set.as_ref().map_or(0, |s| s.rows.len())
}

#[no_mangle]
pub unsafe extern "C" fn mbrforge_candidates_free(set: *mut MbrCandidates) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Selects one candidate per segment. `workers` of 0 is treated as 1.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_mbr_decode(
    set: *const MbrCandidates,
    utility: MbrUtility,
    include_self: bool,
    workers: usize,
    out: *mut *mut MbrSelection,
) -> MbrStatus {
    guard(|| {
        let set = ref_arg(set, "set")?;
        if out.is_null() {
            return Err(Failure::new(MbrStatus::NullPointer, "out is NULL"));
        }
        let systems = (0..set.num_systems).map(|i| format!("system{i}")).collect();
        let candidates = CandidateSet::from_rows(set.sources.clone(), systems, set.rows.clone())?;
        let spec = UtilitySpec {
            include_self,
            ..match utility {
                MbrUtility::Chrf => UtilitySpec::chrf(),
                MbrUtility::Bleu => UtilitySpec::bleu(),
            }
        };
        let selection = mbr::mbr_decode(&candidates, &spec, workers.max(1))?;
        let texts = selection
            .chosen
            .into_iter()
            .map(c_string)
            .collect::<FfiResult<Vec<_>>>()?;
        let handle = Box::new(MbrSelection {
            texts,
            indices: selection.indices,
            utilities: selection.expected_utilities,
        });
        put(out, Box::into_raw(handle), "out")
    })
}

/// Number of segments in a selection; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_selection_len(selection: *const MbrSelection) -> usize {
    selection.as_ref().map_or(0, |s| s.indices.len())
}

/// Result for `segment`. Each out-parameter may be NULL. `out_text` borrows
/// from the selection and is valid until it is freed.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_selection_get(
    selection: *const MbrSelection,
    segment: usize,
    out_index: *mut usize,
    out_expected_utility: *mut f64,
    out_text: *mut *const c_char,
) -> MbrStatus {
    guard(|| {
        let s = ref_arg(selection, "selection")?;
        if segment >= s.indices.len() {
            return Err(Failure::invalid(format!(
                "segment {segment} out of range for {} segments",
                s.indices.len()
            )));
        }
        if !out_index.is_null() {
            out_index.write(s.indices[segment]);
        }
        if !out_expected_utility.is_null() {
            out_expected_utility.write(s.utilities[segment]);
        }
        if !out_text.is_null() {
            out_text.write(s.texts[segment].as_ptr());
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn mbrforge_selection_free(selection: *mut MbrSelection) {
    if !selection.is_null() {
        drop(Box::from_raw(selection));
    }
}

// ---- checkpoints ----

/// An in-memory set of named f32 tensors.
pub struct MbrTensorStore(TensorStore);

fn store_out(out: *mut *mut MbrTensorStore, store: TensorStore) -> FfiResult {
    unsafe { put(out, Box::into_raw(Box::new(MbrTensorStore(store))), "out") }
}

#[no_mangle]
pub unsafe extern "C" fn mbrforge_store_load(path: *const c_char, out: *mut *mut MbrTensorStore) -> MbrStatus {
    guard(|| {
        let store = TensorStore::load(str_arg(path, "path")?)?;
        store_out(out, store)
    })
}

/// Writes the store atomically.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_store_save(store: *const MbrTensorStore, path: *const c_char) -> MbrStatus {
    guard(|| {
        let store = ref_arg(store, "store")?;
        store.0.save(str_arg(path, "path")?)?;
        Ok(())
    })
}

/// Number of tensors; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_store_len(store: *const MbrTensorStore) -> usize {
    store.as_ref().map_or(0, |s| s.0.len())
}

/// Borrows the values of tensor `name` (row-major). The pointer is valid
/// until the store is freed.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_store_get(
    store: *const MbrTensorStore,
    name: *const c_char,
    out_data: *mut *const f32,
    out_len: *mut usize,
) -> MbrStatus {
    guard(|| {
        let store = ref_arg(store, "store")?;
        let name = str_arg(name, "name")?;
        let tensor = store
            .0
            .get(name)
            .ok_or_else(|| Failure::invalid(format!("no tensor named `{name}`")))?;
        if out_data.is_null() || out_len.is_null() {
            return Err(Failure::new(MbrStatus::NullPointer, "out_data or out_len is NULL"));
        }
        out_data.write(tensor.data().as_ptr());
        out_len.write(tensor.len());
        Ok(())
    })
}

/// Elementwise mean of `count` stores with identical names and shapes.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_store_average(
    stores: *const *const MbrTensorStore,
    count: usize,
    out: *mut *mut MbrTensorStore,
) -> MbrStatus {
    guard(|| {
        let owned = slice_arg(stores, count, "stores")?
            .iter()
            .enumerate()
            .map(|(i, &s)| ref_arg(s, &format!("stores[{i}]")).map(|s| s.0.clone()))
            .collect::<FfiResult<Vec<_>>>()?;
        store_out(out, checkpoint::average_checkpoints(&owned)?)
    })
}

/// Merges an adapter store holding `<name>.lora_A` / `<name>.lora_B` pairs
/// into `base` with scale `alpha / rank`.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_store_lora_merge(
    base: *const MbrTensorStore,
    adapter: *const MbrTensorStore,
    alpha: f64,
    out: *mut *mut MbrTensorStore,
) -> MbrStatus {
    guard(|| {
        let base = ref_arg(base, "base")?;
        let adapter = LoraAdapter::from_store(&ref_arg(adapter, "adapter")?.0, alpha)?;
        store_out(out, checkpoint::lora_merge(&base.0, &adapter)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn mbrforge_store_free(store: *mut MbrTensorStore) {
    if !store.is_null() {
        drop(Box::from_raw(store));
    }
}

// ---- R-Drop ----

unsafe fn distributions(p: *const f64, q: *const f64, len: usize) -> FfiResult<(ProbVector, ProbVector)> {
    let p = ProbVector::new(slice_arg(p, len, "p")?.to_vec())?;
    let q = ProbVector::new(slice_arg(q, len, "q")?.to_vec())?;
    Ok((p, q))
}

/// Symmetric KL penalty between two distributions of length `len`. With
/// `floor` every probability is raised to at least 1e-12 first.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_rdrop_penalty(
    p: *const f64,
    q: *const f64,
    len: usize,
    floor: bool,
    out: *mut f64,
) -> MbrStatus {
    guard(|| {
        let (p, q) = distributions(p, q, len)?;
        put(out, checkpoint::rdrop_penalty(&p, &q, floor)?, "out")
    })
}

/// `reg_alpha` times [`mbrforge_rdrop_penalty`].
#[no_mangle]
pub unsafe extern "C" fn mbrforge_rdrop_loss(
    p: *const f64,
    q: *const f64,
    len: usize,
    reg_alpha: f64,
    floor: bool,
    out: *mut f64,
) -> MbrStatus {
    guard(|| {
        let (p, q) = distributions(p, q, len)?;
        put(out, checkpoint::rdrop_loss(&p, &q, reg_alpha, floor)?, "out")
    })
}

// ---- prompts ----

unsafe fn find_doc(chat_jsonl: *const c_char, doc_id: *const c_char) -> FfiResult<ChatDocument> {
    let docs = promptgen::parse_chat_records(str_arg(chat_jsonl, "chat_jsonl")?)?;
    let id = str_arg(doc_id, "doc_id")?;
    docs.into_iter()
        .find(|d| d.doc_id == id)
        .ok_or_else(|| Failure::invalid(format!("no document `{id}`")))
}

unsafe fn prompt_out(p: RenderedPrompt, out_text: *mut *mut c_char, out_completion: *mut *mut c_char) -> FfiResult {
    if out_text.is_null() || out_completion.is_null() {
        return Err(Failure::new(
            MbrStatus::NullPointer,
            "out_text or out_completion is NULL",
        ));
    }
    let text = c_string(p.text)?;
    let completion = c_string(p.completion)?;
    out_text.write(text.into_raw());
    out_completion.write(completion.into_raw());
    Ok(())
}

/// Streaming-format prompt for turn `turn_index` of document `doc_id` in
/// the JSON-lines chat records `chat_jsonl`, with up to `k_history` turns.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_render_stream(
    chat_jsonl: *const c_char,
    doc_id: *const c_char,
    turn_index: usize,
    k_history: usize,
    out_text: *mut *mut c_char,
    out_completion: *mut *mut c_char,
) -> MbrStatus {
    guard(|| {
        let doc = find_doc(chat_jsonl, doc_id)?;
        prompt_out(
            promptgen::render_stream(&doc, turn_index, k_history)?,
            out_text,
            out_completion,
        )
    })
}

/// Context-aware prompt over the window `[turn - before, turn + after]`.
#[no_mangle]
pub unsafe extern "C" fn mbrforge_render_context(
    chat_jsonl: *const c_char,
    doc_id: *const c_char,
    turn_index: usize,
    before: usize,
    after: usize,
    include_query: bool,
    out_text: *mut *mut c_char,
    out_completion: *mut *mut c_char,
) -> MbrStatus {
    guard(|| {
        let doc = find_doc(chat_jsonl, doc_id)?;
        let window = ContextWindow {
            before,
            after,
            include_query,
        };
        prompt_out(
            promptgen::render_context(&doc, turn_index, window)?,
            out_text,
            out_completion,
        )
    })
}
