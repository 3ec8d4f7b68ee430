//! C ABI for the genderprobe library.
//!
//! Handles are opaque pointers owned by this library; every `*_free`
//! function accepts null. Functions return [`GpStatus`]; on any status
//! other than `Ok`, [`gp_last_error`] yields a thread-local message that
//! stays valid until the next failing call on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use genderprobe::classifier::MlpParams;
use genderprobe::corpus::{self, ConditionKind, TaggedCorpus};
use genderprobe::embeddings::{self, build_vocab, EmbeddingTable, SgnsConfig, TokenStream};
use genderprobe::error::Error;
use genderprobe::lexicon::GenderLabel;
use genderprobe::stats;
use genderprobe::ultradense::{
    build_pair_sets, gender_score, train_densifier, DensifierConfig, OrthogonalTransform,
};

/// Result codes. Mirrors the CLI exit codes, plus argument diagnostics.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GpStatus {
    GpOk = 0,
    GpUsage = 1,
    GpData = 2,
    GpNumeric = 3,
    GpNullArgument = 4,
    GpPanic = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap();
    });
}

fn status_of(error: &Error) -> GpStatus {
    set_error(&format!("{error}"));
    match error.exit_code() {
        1 => GpStatus::GpUsage,
        3 => GpStatus::GpNumeric,
        _ => GpStatus::GpData,
    }
}

/// Message describing the most recent failure on this thread. Never null;
/// empty before any failure. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn gp_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn gp_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr() as *const c_char
}

unsafe fn path_arg(ptr: *const c_char) -> Option<PathBuf> {
    if ptr.is_null() {
        return None;
    }
    Some(PathBuf::from(CStr::from_ptr(ptr).to_string_lossy().into_owned()))
}

unsafe fn str_arg<'a>(ptr: *const c_char) -> Option<std::borrow::Cow<'a, str>> {
    if ptr.is_null() {
        None
    } else {
        Some(CStr::from_ptr(ptr).to_string_lossy())
    }
}

fn null_argument(name: &str) -> GpStatus {
    set_error(&format!("null argument: {name}"));
    GpStatus::GpNullArgument
}

fn guard(body: impl FnOnce() -> GpStatus) -> GpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in genderprobe".to_string());
            set_error(&message);
            GpStatus::GpPanic
        }
    }
}

/// Opaque parsed-corpus handle.
pub struct GpCorpus(TaggedCorpus);
/// Opaque embedding-table handle.
pub struct GpVectors(EmbeddingTable);
/// Opaque orthogonal gender-transform handle.
pub struct GpTransform(OrthogonalTransform);
/// Opaque classifier snapshot handle.
pub struct GpModel(MlpParams);

/// Skip-gram training options. Obtain defaults from
/// [`gp_sgns_options_default`] and adjust fields as needed.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GpSgnsOptions {
    pub dim: u32,
    pub window: u32,
    pub negatives: u32,
    pub epochs: u32,
    pub initial_step: f64,
    pub subsample_threshold: f64,
    pub min_count: u64,
    pub seed: u64,
    /// 1 = deterministic single worker.
    pub workers: u32,
}

#[no_mangle]
pub extern "C" fn gp_sgns_options_default() -> GpSgnsOptions {
    let config = SgnsConfig::default();
    GpSgnsOptions {
        dim: config.dim as u32,
        window: config.window as u32,
        negatives: config.negatives as u32,
        epochs: config.epochs as u32,
        initial_step: config.initial_step,
        subsample_threshold: config.subsample_threshold,
        min_count: 5,
        seed: config.seed,
        workers: 1,
    }
}

/// Parse a tagged-corpus file into a new handle.
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer to receive the handle.
#[no_mangle]
pub unsafe extern "C" fn gp_corpus_parse_file(
    path: *const c_char,
    out: *mut *mut GpCorpus,
) -> GpStatus {
    guard(|| {
        if out.is_null() {
            return null_argument("out");
        }
        let Some(path) = path_arg(path) else {
            return null_argument("path");
        };
        match corpus::load_tagged_corpus(&path) {
            Ok(corpus) => {
                *out = Box::into_raw(Box::new(GpCorpus(corpus)));
                GpStatus::GpOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `corpus` must come from [`gp_corpus_parse_file`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gp_corpus_free(corpus: *mut GpCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// # Safety
/// `corpus` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gp_corpus_sentence_count(corpus: *const GpCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.sentences.len())
}

/// # Safety
/// `corpus` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gp_corpus_token_count(corpus: *const GpCorpus) -> usize {
    corpus.as_ref().map_or(0, |c| c.0.token_count())
}

/// Rewrite a corpus under a condition (`forms`, `lemmata`, `nouns`,
/// `not_nouns`) and write the token stream to a file.
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_corpus_condition_to_file(
    corpus: *const GpCorpus,
    kind: *const c_char,
    out_path: *const c_char,
) -> GpStatus {
    guard(|| {
        let Some(corpus) = corpus.as_ref() else {
            return null_argument("corpus");
        };
        let Some(kind) = str_arg(kind) else {
            return null_argument("kind");
        };
        let Some(out_path) = path_arg(out_path) else {
            return null_argument("out_path");
        };
        let kind = match ConditionKind::parse(&kind) {
            Ok(kind) => kind,
            Err(e) => return status_of(&e),
        };
        let file = match File::create(&out_path) {
            Ok(f) => f,
            Err(e) => return status_of(&Error::io(&out_path, e)),
        };
        let mut w = BufWriter::new(file);
        match corpus::write_condition_stream(&corpus.0, kind, &mut w) {
            Ok(()) => GpStatus::GpOk,
            Err(e) => status_of(&Error::io(&out_path, e)),
        }
    })
}

/// Train skip-gram embeddings from a token-stream file (space-separated
/// tokens, one sentence per line).
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_embeddings_train_file(
    stream_path: *const c_char,
    options: *const GpSgnsOptions,
    out: *mut *mut GpVectors,
) -> GpStatus {
    guard(|| {
        if out.is_null() {
            return null_argument("out");
        }
        let Some(options) = options.as_ref() else {
            return null_argument("options");
        };
        let Some(stream_path) = path_arg(stream_path) else {
            return null_argument("stream_path");
        };
        let text = match std::fs::read_to_string(&stream_path) {
            Ok(t) => t,
            Err(e) => return status_of(&Error::io(&stream_path, e)),
        };
        let vocab = build_vocab(
            text.lines().flat_map(|l| l.split_whitespace()),
            options.min_count,
        );
        let stream =
            TokenStream::from_sentences(text.lines().map(|l| l.split_whitespace()), &vocab);
        let config = SgnsConfig {
            dim: options.dim as usize,
            window: options.window as usize,
            negatives: options.negatives as usize,
            epochs: options.epochs as usize,
            initial_step: options.initial_step,
            subsample_threshold: options.subsample_threshold,
            seed: options.seed,
            workers: options.workers.max(1) as usize,
        };
        match embeddings::train_sgns(&stream, &vocab, &config) {
            Ok(table) => {
                *out = Box::into_raw(Box::new(GpVectors(table)));
                GpStatus::GpOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Load a vector file written by `gp_vectors_save` or the CLI.
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_vectors_load(path: *const c_char, out: *mut *mut GpVectors) -> GpStatus {
    guard(|| {
        if out.is_null() {
            return null_argument("out");
        }
        let Some(path) = path_arg(path) else {
            return null_argument("path");
        };
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) => return status_of(&Error::io(&path, e)),
        };
        match embeddings::load_vectors(file) {
            Ok(table) => {
                *out = Box::into_raw(Box::new(GpVectors(table)));
                GpStatus::GpOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_vectors_save(
    vectors: *const GpVectors,
    path: *const c_char,
) -> GpStatus {
    guard(|| {
        let Some(vectors) = vectors.as_ref() else {
            return null_argument("vectors");
        };
        let Some(path) = path_arg(path) else {
            return null_argument("path");
        };
        let file = match File::create(&path) {
            Ok(f) => f,
            Err(e) => return status_of(&Error::io(&path, e)),
        };
        let mut w = BufWriter::new(file);
        match embeddings::save_vectors(&vectors.0, &mut w) {
            Ok(()) => GpStatus::GpOk,
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `vectors` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gp_vectors_free(vectors: *mut GpVectors) {
    if !vectors.is_null() {
        drop(Box::from_raw(vectors));
    }
}

/// # Safety
/// `vectors` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gp_vectors_len(vectors: *const GpVectors) -> usize {
    vectors.as_ref().map_or(0, |v| v.0.len())
}

/// # Safety
/// `vectors` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gp_vectors_dim(vectors: *const GpVectors) -> usize {
    vectors.as_ref().map_or(0, |v| v.0.dim())
}

/// Copy one token's embedding into `buffer` (length `buffer_len`, which
/// must equal the dimension).
///
/// # Safety
/// `buffer` must point to at least `buffer_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn gp_vectors_lookup(
    vectors: *const GpVectors,
    token: *const c_char,
    buffer: *mut f64,
    buffer_len: usize,
) -> GpStatus {
    guard(|| {
        let Some(vectors) = vectors.as_ref() else {
            return null_argument("vectors");
        };
        let Some(token) = str_arg(token) else {
            return null_argument("token");
        };
        if buffer.is_null() {
            return null_argument("buffer");
        }
        if buffer_len != vectors.0.dim() {
            set_error(&format!(
                "buffer length {buffer_len} does not match dimension {}",
                vectors.0.dim()
            ));
            return GpStatus::GpUsage;
        }
        match vectors.0.vector(&token) {
            Some(row) => {
                for (i, v) in row.iter().enumerate() {
                    *buffer.add(i) = *v;
                }
                GpStatus::GpOk
            }
            None => {
                set_error(&format!("token `{token}` not in vocabulary"));
                GpStatus::GpData
            }
        }
    })
}

/// Train the orthogonal gender transform from a labeled-lemma file
/// (`lemma<TAB>gender` lines; genders `masc`/`fem`).
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_densifier_train(
    vectors: *const GpVectors,
    labeled_path: *const c_char,
    iterations: u64,
    learning_rate: f64,
    seed: u64,
    out: *mut *mut GpTransform,
) -> GpStatus {
    guard(|| {
        if out.is_null() {
            return null_argument("out");
        }
        let Some(vectors) = vectors.as_ref() else {
            return null_argument("vectors");
        };
        let Some(labeled_path) = path_arg(labeled_path) else {
            return null_argument("labeled_path");
        };
        let labeled = match read_labeled(&labeled_path) {
            Ok(items) => items,
            Err(e) => return status_of(&e),
        };
        let in_vocab: Vec<(String, GenderLabel)> = labeled
            .into_iter()
            .filter(|(lemma, _)| vectors.0.contains(lemma))
            .collect();
        let pairs = match build_pair_sets(&in_vocab) {
            Ok(p) => p,
            Err(e) => return status_of(&e),
        };
        let config = DensifierConfig {
            iterations: iterations as usize,
            learning_rate,
            seed,
        };
        match train_densifier(&vectors.0, &pairs, &config) {
            Ok(transform) => {
                *out = Box::into_raw(Box::new(GpTransform(transform)));
                GpStatus::GpOk
            }
            Err(e) => status_of(&e),
        }
    })
}

fn read_labeled(path: &PathBuf) -> Result<Vec<(String, GenderLabel)>, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut items = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split('\t');
        let lemma = fields.next().unwrap().trim().to_lowercase();
        let gender = fields
            .next()
            .and_then(GenderLabel::from_feature_value)
            .ok_or_else(|| {
                Error::parse(
                    &path.display().to_string(),
                    idx + 1,
                    "expected `lemma\\tgender`",
                )
            })?;
        items.push((lemma, gender));
    }
    Ok(items)
}

/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_transform_load(
    path: *const c_char,
    out: *mut *mut GpTransform,
) -> GpStatus {
    guard(|| {
        if out.is_null() {
            return null_argument("out");
        }
        let Some(path) = path_arg(path) else {
            return null_argument("path");
        };
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) => return status_of(&Error::io(&path, e)),
        };
        match OrthogonalTransform::from_reader(file) {
            Ok(transform) => {
                *out = Box::into_raw(Box::new(GpTransform(transform)));
                GpStatus::GpOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_transform_save(
    transform: *const GpTransform,
    path: *const c_char,
) -> GpStatus {
    guard(|| {
        let Some(transform) = transform.as_ref() else {
            return null_argument("transform");
        };
        let Some(path) = path_arg(path) else {
            return null_argument("path");
        };
        let file = match File::create(&path) {
            Ok(f) => f,
            Err(e) => return status_of(&Error::io(&path, e)),
        };
        let mut w = BufWriter::new(file);
        match transform.0.to_writer(&mut w, 0, 0) {
            Ok(()) => GpStatus::GpOk,
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `transform` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gp_transform_free(transform: *mut GpTransform) {
    if !transform.is_null() {
        drop(Box::from_raw(transform));
    }
}

/// # Safety
/// `transform` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn gp_transform_dim(transform: *const GpTransform) -> usize {
    transform.as_ref().map_or(0, |t| t.0.dim())
}

/// The gender coordinate of one token under a trained transform.
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_gender_score(
    transform: *const GpTransform,
    vectors: *const GpVectors,
    token: *const c_char,
    out: *mut f64,
) -> GpStatus {
    guard(|| {
        let Some(transform) = transform.as_ref() else {
            return null_argument("transform");
        };
        let Some(vectors) = vectors.as_ref() else {
            return null_argument("vectors");
        };
        let Some(token) = str_arg(token) else {
            return null_argument("token");
        };
        if out.is_null() {
            return null_argument("out");
        }
        if transform.0.dim() != vectors.0.dim() {
            set_error(&format!(
                "transform dimension {} does not match vectors dimension {}",
                transform.0.dim(),
                vectors.0.dim()
            ));
            return GpStatus::GpData;
        }
        match vectors.0.vector(&token) {
            Some(row) => {
                *out = gender_score(&transform.0, row);
                GpStatus::GpOk
            }
            None => {
                set_error(&format!("token `{token}` not in vocabulary"));
                GpStatus::GpData
            }
        }
    })
}

/// Load a classifier snapshot written by the CLI.
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_model_load(path: *const c_char, out: *mut *mut GpModel) -> GpStatus {
    guard(|| {
        if out.is_null() {
            return null_argument("out");
        }
        let Some(path) = path_arg(path) else {
            return null_argument("path");
        };
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) => return status_of(&Error::io(&path, e)),
        };
        match MlpParams::from_reader(file) {
            Ok(model) => {
                *out = Box::into_raw(Box::new(GpModel(model)));
                GpStatus::GpOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// # Safety
/// `model` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn gp_model_free(model: *mut GpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Probability that `token` is feminine under a classifier snapshot.
///
/// # Safety
/// All pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn gp_model_predict_feminine(
    model: *const GpModel,
    vectors: *const GpVectors,
    token: *const c_char,
    out: *mut f64,
) -> GpStatus {
    guard(|| {
        let Some(model) = model.as_ref() else {
            return null_argument("model");
        };
        let Some(vectors) = vectors.as_ref() else {
            return null_argument("vectors");
        };
        let Some(token) = str_arg(token) else {
            return null_argument("token");
        };
        if out.is_null() {
            return null_argument("out");
        }
        if model.0.shape.input_dim != vectors.0.dim() {
            set_error(&format!(
                "vector dimension {} does not match model input dimension {}",
                vectors.0.dim(),
                model.0.shape.input_dim
            ));
            return GpStatus::GpData;
        }
        match vectors.0.vector(&token) {
            Some(row) => {
                let (_, p_fem) = model.0.predict(row.to_slice().expect("contiguous row"));
                *out = p_fem;
                GpStatus::GpOk
            }
            None => {
                set_error(&format!("token `{token}` not in vocabulary"));
                GpStatus::GpData
            }
        }
    })
}

/// Spearman's ρ between scores and binary labels (0 masculine,
/// 1 feminine), tied ranks averaged.
///
/// # Safety
/// `scores` and `labels` must point to `n` readable elements; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn gp_spearman_rho(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
) -> GpStatus {
    guard(|| {
        if scores.is_null() {
            return null_argument("scores");
        }
        if labels.is_null() {
            return null_argument("labels");
        }
        if out.is_null() {
            return null_argument("out");
        }
        let scores = std::slice::from_raw_parts(scores, n);
        let labels = std::slice::from_raw_parts(labels, n);
        let coded: Vec<f64> = labels.iter().map(|&l| if l == 0 { 0.0 } else { 1.0 }).collect();
        match stats::spearman(scores, &coded) {
            Ok(rho) => {
                *out = rho;
                GpStatus::GpOk
            }
            Err(e) => status_of(&e),
        }
    })
}
