//! C interface to the summarizer.
//!
//! Functions return a [`CsStatus`]; on failure the message is available from
//! [`cs_last_error_message`] on the same thread. Handles are opaque and must
//! be released with their `*_free` function. Strings returned through out
//! parameters are owned by the caller and released with [`cs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use centrosum::cera::{self, CeraParams};
use centrosum::cli::summary_record;
use centrosum::corpus::{self, Cluster};
use centrosum::rouge;
use centrosum::selection::{self, SelectionConfig, SelectionMode};
use centrosum::{Error, ErrorKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    /// A required pointer was null or a string was not UTF-8.
    InvalidArgument = 1,
    Validation = 2,
    Data = 3,
    Numeric = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsMode {
    BaselineGreedy = 0,
    BeamOnly = 1,
    BeamGreedy = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsSelectionOptions {
    pub budget: usize,
    pub n: usize,
    pub beam: usize,
    pub window: usize,
    pub mode: CsMode,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CsRougeScore {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

/// A loaded corpus split.
pub struct CsCorpus {
    clusters: Vec<Cluster>,
}

/// A loaded centroid model.
pub struct CsModel {
    params: CeraParams,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CsStatus {
    match e.kind() {
        ErrorKind::Validation => CsStatus::Validation,
        ErrorKind::Data => CsStatus::Data,
        ErrorKind::Numeric => CsStatus::Numeric,
    }
}

enum Failure {
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Failure::Arg(m))) => {
            set_error(m);
            CsStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            CsStatus::Internal
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::Arg(format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::Arg(format!("{name} is not UTF-8")))
}

fn null_arg(name: &str) -> Failure {
    Failure::Arg(format!("{name} is null"))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Default options for a word budget.
#[no_mangle]
pub extern "C" fn cs_selection_defaults(budget: usize) -> CsSelectionOptions {
    let d = SelectionConfig::with_budget(budget);
    CsSelectionOptions {
        budget: d.budget,
        n: d.n,
        beam: d.beam,
        window: d.window,
        mode: CsMode::BeamGreedy,
    }
}

/// Loads cluster metadata (JSON lines) and its embedding store.
///
/// # Safety
/// `metadata_path` and `embeddings_path` must be null or valid C strings;
/// `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cs_corpus_load(
    metadata_path: *const c_char,
    embeddings_path: *const c_char,
    out: *mut *mut CsCorpus,
) -> CsStatus {
    guard(|| {
        let meta = str_arg(metadata_path, "metadata_path")?;
        let emb = str_arg(embeddings_path, "embeddings_path")?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let clusters = corpus::load_split(meta, emb)?;
        *out = Box::into_raw(Box::new(CsCorpus { clusters }));
        Ok(())
    })
}

/// # Safety
/// `corpus` must be null or a handle from [`cs_corpus_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_corpus_free(corpus: *mut CsCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Number of clusters, or 0 for a null handle.
///
/// # Safety
/// `corpus` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_corpus_len(corpus: *const CsCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.clusters.len())
}

/// Loads a model checkpoint.
///
/// # Safety
/// `path` must be null or a valid C string; `out` must be null or writable.
#[no_mangle]
pub unsafe extern "C" fn cs_model_load(path: *const c_char, out: *mut *mut CsModel) -> CsStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let params = cera::load_checkpoint(path)?.params;
        *out = Box::into_raw(Box::new(CsModel { params }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from [`cs_model_load`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_model_free(model: *mut CsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Summarizes cluster `index` and writes a JSON object with `cluster_id`,
/// `chosen`, `positions`, `text`, `words` and `score` to `out_json`.
/// A null `model` uses the mean-pooled centroid; a null `options` uses the
/// defaults for a 100-word budget.
///
/// # Safety
/// `corpus` and `model` must be null or live handles, `options` null or
/// readable, `out_json` null or writable.
#[no_mangle]
pub unsafe extern "C" fn cs_summarize(
    corpus: *const CsCorpus,
    index: usize,
    model: *const CsModel,
    options: *const CsSelectionOptions,
    out_json: *mut *mut c_char,
) -> CsStatus {
    guard(|| {
        let corpus = corpus.as_ref().ok_or_else(|| null_arg("corpus"))?;
        if out_json.is_null() {
            return Err(null_arg("out_json"));
        }
        let opts = options.as_ref().copied().unwrap_or(cs_selection_defaults(100));
        let config = SelectionConfig {
            n: opts.n,
            beam: opts.beam,
            window: opts.window,
            budget: opts.budget,
            mode: match opts.mode {
                CsMode::BaselineGreedy => SelectionMode::BaselineGreedy,
                CsMode::BeamOnly => SelectionMode::BeamOnly,
                CsMode::BeamGreedy => SelectionMode::BeamGreedy,
            },
        };
        config.validate()?;
        let cluster = corpus.clusters.get(index).ok_or_else(|| {
            Failure::Arg(format!(
                "cluster index {index} out of range ({} clusters)",
                corpus.clusters.len()
            ))
        })?;
        let cluster = corpus::preprocess_cluster(cluster, config.budget)?;
        let centroid = match model.as_ref() {
            Some(m) => {
                let dim = cluster.dim().unwrap_or(0);
                if m.params.dim != dim {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: m.params.dim,
                        context: "model".into(),
                    }
                    .into());
                }
                cera::predict_centroid(&cluster, &m.params)?
            }
            None => corpus::mean_pool_cluster(&cluster)?,
        };
        let state = selection::select_summary(&cluster, &centroid, &config)?;
        let json = serde_json::to_string(&summary_record(&cluster, &state))
            .expect("record serializes");
        *out_json = CString::new(json).expect("JSON has no nul bytes").into_raw();
        Ok(())
    })
}

/// ROUGE of `candidate` against `n_refs` references, averaged over
/// references. `order` 1 or 2 selects ROUGE-N; 0 selects ROUGE-L.
///
/// # Safety
/// `candidate` must be a valid C string, `references` an array of
/// `n_refs` valid C strings, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn cs_rouge(
    candidate: *const c_char,
    references: *const *const c_char,
    n_refs: usize,
    order: u32,
    out: *mut CsRougeScore,
) -> CsStatus {
    guard(|| {
        let candidate = str_arg(candidate, "candidate")?;
        if references.is_null() && n_refs > 0 {
            return Err(null_arg("references"));
        }
        if out.is_null() {
            return Err(null_arg("out"));
        }
        let refs = (0..n_refs)
            .map(|i| str_arg(*references.add(i), "reference"))
            .collect::<Result<Vec<&str>, _>>()?;
        let score = match order {
            0 => rouge::rouge_l(candidate, &refs)?,
            n => rouge::rouge_n(candidate, &refs, n as usize)?,
        };
        *out = CsRougeScore {
            recall: score.recall,
            precision: score.precision,
            f1: score.f1,
        };
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
