//! C ABI for the scgc clustering library.
//!
//! Handles are opaque pointers owned by this library; every constructor has
//! a matching `_free`. Functions return [`ScgcStatus`] (or null for
//! constructors) on failure, and the per-thread message from
//! [`scgc_last_error`] explains what went wrong.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use scgc::dataio::{load_dataset, Checkpoint, Dataset};
use scgc::graph::sbm_generate;
use scgc::inference::{evaluate, TrainedModel};
use scgc::pipeline::{run_full, TrainConfig};
use scgc::rng::RngState;

/// Result codes for every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScgcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Io = 4,
    /// Training or evaluation failed; see `scgc_last_error`.
    Runtime = 5,
    /// Output buffer too small for the requested data.
    BufferTooSmall = 6,
    /// A panic was caught at the boundary; state may be stale.
    Panic = 7,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: impl Into<String>) {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = message.into());
}

fn fail(status: ScgcStatus, message: impl Into<String>) -> ScgcStatus {
    set_error(message);
    status
}

/// A loaded dataset: features, graph structure, optional labels.
pub struct ScgcDataset {
    inner: Dataset,
}

/// A trained model ready for inference.
pub struct ScgcModel {
    inner: TrainedModel,
    seed: u64,
}

unsafe fn cstr<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, ScgcStatus> {
    if ptr.is_null() {
        return Err(fail(ScgcStatus::NullPointer, format!("{what} is null")));
    }
    unsafe { CStr::from_ptr(ptr) }
        .to_str()
        .map_err(|_| fail(ScgcStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn guard<T>(what: &str, body: impl FnOnce() -> Result<T, ScgcStatus>) -> Result<T, ScgcStatus> {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(result) => result,
        Err(_) => Err(fail(ScgcStatus::Panic, format!("panic inside {what}"))),
    }
}

/// Copy the last error message for this thread into `buffer` as a
/// NUL-terminated string. Returns `BufferTooSmall` when truncated.
///
/// # Safety
/// `buffer` must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn scgc_last_error(buffer: *mut c_char, len: usize) -> ScgcStatus {
    if buffer.is_null() || len == 0 {
        return ScgcStatus::NullPointer;
    }
    LAST_ERROR.with(|slot| {
        let message = slot.borrow();
        let bytes = message.as_bytes();
        let copy = bytes.len().min(len - 1);
        unsafe {
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buffer, copy);
            *buffer.add(copy) = 0;
        }
        if copy < bytes.len() {
            ScgcStatus::BufferTooSmall
        } else {
            ScgcStatus::Ok
        }
    })
}

/// Load a dataset directory (features.tsv, optional edges.txt and
/// labels.txt). `knn_k` of 0 means "use the edge list"; a positive value
/// builds a KNN graph from features instead. Returns null on failure.
///
/// # Safety
/// `dir` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn scgc_dataset_load(dir: *const c_char, knn_k: usize) -> *mut ScgcDataset {
    let result = guard("scgc_dataset_load", || {
        let dir = unsafe { cstr(dir, "dir") }?;
        let knn = if knn_k == 0 { None } else { Some(knn_k) };
        let inner =
            load_dataset(Path::new(dir), knn).map_err(|e| fail(ScgcStatus::Io, e.to_string()))?;
        Ok(ScgcDataset { inner })
    });
    match result {
        Ok(dataset) => Box::into_raw(Box::new(dataset)),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Generate a stochastic block model fixture in memory. `block_sizes`
/// points to `n_blocks` node counts. Returns null on failure.
///
/// # Safety
/// `block_sizes` must point to `n_blocks` readable values.
#[no_mangle]
pub unsafe extern "C" fn scgc_dataset_synthetic(
    block_sizes: *const usize,
    n_blocks: usize,
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    noise_sigma: f64,
    seed: u64,
) -> *mut ScgcDataset {
    let result = guard("scgc_dataset_synthetic", || {
        if block_sizes.is_null() || n_blocks == 0 {
            return Err(fail(ScgcStatus::NullPointer, "block_sizes is null or empty"));
        }
        let blocks = unsafe { std::slice::from_raw_parts(block_sizes, n_blocks) };
        let mut rng = RngState::new(seed);
        let (graph, features, labels) =
            sbm_generate(blocks, p_in, p_out, feature_dim, noise_sigma, &mut rng)
                .map_err(|e| fail(ScgcStatus::InvalidArgument, e.to_string()))?;
        Ok(ScgcDataset {
            inner: Dataset {
                name: "synthetic".into(),
                features,
                graph,
                labels: Some(labels),
                class_count: n_blocks,
            },
        })
    });
    match result {
        Ok(dataset) => Box::into_raw(Box::new(dataset)),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Number of nodes in the dataset; 0 if the handle is null.
#[no_mangle]
pub extern "C" fn scgc_dataset_nodes(dataset: *const ScgcDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    unsafe { &*dataset }.inner.features.rows()
}

/// Feature dimension of the dataset; 0 if the handle is null.
#[no_mangle]
pub extern "C" fn scgc_dataset_feature_dim(dataset: *const ScgcDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    unsafe { &*dataset }.inner.features.cols()
}

/// # Safety
/// `dataset` must come from a scgc constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scgc_dataset_free(dataset: *mut ScgcDataset) {
    if !dataset.is_null() {
        drop(unsafe { Box::from_raw(dataset) });
    }
}

/// Run the whole protocol (pretraining, centroid initialization, joint
/// training) on a dataset. `config_json` uses the same schema as the CLI's
/// `--config` files; pass `{}` for defaults. A zero `cluster_count` falls
/// back to the dataset's label class count. Returns null on failure.
///
/// # Safety
/// `dataset` must be a live handle; `config_json` a valid NUL-terminated
/// string.
#[no_mangle]
pub unsafe extern "C" fn scgc_train(
    dataset: *const ScgcDataset,
    config_json: *const c_char,
) -> *mut ScgcModel {
    let result = guard("scgc_train", || {
        if dataset.is_null() {
            return Err(fail(ScgcStatus::NullPointer, "dataset is null"));
        }
        let dataset = unsafe { &*dataset };
        let json = unsafe { cstr(config_json, "config_json") }?;
        let mut config = TrainConfig::from_json_str(json)
            .map_err(|e| fail(ScgcStatus::InvalidArgument, e.to_string()))?;
        if config.cluster_count == 0 {
            config.cluster_count = dataset.inner.class_count;
        }
        let run = run_full(
            &dataset.inner.features,
            &dataset.inner.graph,
            dataset.inner.labels.as_deref(),
            &config,
        )
        .map_err(|e| fail(ScgcStatus::Runtime, e.to_string()))?;
        Ok(ScgcModel {
            inner: run.model,
            seed: config.seed,
        })
    });
    match result {
        Ok(model) => Box::into_raw(Box::new(model)),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Load a model checkpoint written by `scgc_model_save` or the CLI.
/// Returns null on failure.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn scgc_model_load(path: *const c_char) -> *mut ScgcModel {
    let result = guard("scgc_model_load", || {
        let path = unsafe { cstr(path, "path") }?;
        let checkpoint =
            Checkpoint::load(Path::new(path)).map_err(|e| fail(ScgcStatus::Io, e.to_string()))?;
        Ok(ScgcModel {
            inner: checkpoint.model,
            seed: checkpoint.seed,
        })
    });
    match result {
        Ok(model) => Box::into_raw(Box::new(model)),
        Err(_) => std::ptr::null_mut(),
    }
}

/// Write a model checkpoint (JSON, same format as the CLI).
///
/// # Safety
/// `model` must be a live handle; `path` a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn scgc_model_save(
    model: *const ScgcModel,
    path: *const c_char,
) -> ScgcStatus {
    let result = guard("scgc_model_save", || {
        if model.is_null() {
            return Err(fail(ScgcStatus::NullPointer, "model is null"));
        }
        let model = unsafe { &*model };
        let path = unsafe { cstr(path, "path") }?;
        Checkpoint::new(model.seed, model.inner.clone())
            .save(Path::new(path))
            .map_err(|e| fail(ScgcStatus::Io, e.to_string()))?;
        Ok(())
    });
    match result {
        Ok(()) => ScgcStatus::Ok,
        Err(status) => status,
    }
}

/// Embedding width of a model; 0 if the handle is null.
#[no_mangle]
pub extern "C" fn scgc_model_embed_dim(model: *const ScgcModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.inner.params.embed_dim()
}

/// # Safety
/// `model` must come from a scgc constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn scgc_model_free(model: *mut ScgcModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Score a model against a labelled dataset. `out_metrics` receives
/// [acc, nmi, ari, f1]. Fails with `InvalidArgument` when the dataset has
/// no labels. Inference uses features only; the dataset's graph is never
/// touched.
///
/// # Safety
/// Handles must be live; `out_metrics` must point to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn scgc_evaluate(
    model: *const ScgcModel,
    dataset: *const ScgcDataset,
    out_metrics: *mut f64,
) -> ScgcStatus {
    let result = guard("scgc_evaluate", || {
        if model.is_null() || dataset.is_null() || out_metrics.is_null() {
            return Err(fail(ScgcStatus::NullPointer, "null handle or buffer"));
        }
        let model = unsafe { &*model };
        let dataset = unsafe { &*dataset };
        let labels = dataset.inner.labels.as_deref().ok_or_else(|| {
            fail(
                ScgcStatus::InvalidArgument,
                "dataset has no labels to score against",
            )
        })?;
        let evaluation = evaluate(&model.inner, &dataset.inner.features, Some(labels))
            .map_err(|e| fail(ScgcStatus::Runtime, e.to_string()))?;
        let report = evaluation.report.expect("labels were supplied");
        unsafe {
            let out = std::slice::from_raw_parts_mut(out_metrics, 4);
            out[0] = report.acc;
            out[1] = report.nmi;
            out[2] = report.ari;
            out[3] = report.f1;
        }
        Ok(())
    });
    match result {
        Ok(()) => ScgcStatus::Ok,
        Err(status) => status,
    }
}

/// Hard cluster assignments for every node. `out_labels` must hold
/// `scgc_dataset_nodes` entries.
///
/// # Safety
/// Handles must be live; `out_labels` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn scgc_assign(
    model: *const ScgcModel,
    dataset: *const ScgcDataset,
    out_labels: *mut u32,
    len: usize,
) -> ScgcStatus {
    let result = guard("scgc_assign", || {
        if model.is_null() || dataset.is_null() || out_labels.is_null() {
            return Err(fail(ScgcStatus::NullPointer, "null handle or buffer"));
        }
        let model = unsafe { &*model };
        let dataset = unsafe { &*dataset };
        let n = dataset.inner.features.rows();
        if len < n {
            return Err(fail(
                ScgcStatus::BufferTooSmall,
                format!("need {n} label slots, got {len}"),
            ));
        }
        let evaluation = evaluate(&model.inner, &dataset.inner.features, None)
            .map_err(|e| fail(ScgcStatus::Runtime, e.to_string()))?;
        let out = unsafe { std::slice::from_raw_parts_mut(out_labels, n) };
        for (slot, &label) in out.iter_mut().zip(&evaluation.assignments) {
            *slot = label as u32;
        }
        Ok(())
    });
    match result {
        Ok(()) => ScgcStatus::Ok,
        Err(status) => status,
    }
}

/// Node embeddings, row-major `n x embed_dim`. `len` is the buffer length
/// in doubles.
///
/// # Safety
/// Handles must be live; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn scgc_embed(
    model: *const ScgcModel,
    dataset: *const ScgcDataset,
    out: *mut f64,
    len: usize,
) -> ScgcStatus {
    let result = guard("scgc_embed", || {
        if model.is_null() || dataset.is_null() || out.is_null() {
            return Err(fail(ScgcStatus::NullPointer, "null handle or buffer"));
        }
        let model = unsafe { &*model };
        let dataset = unsafe { &*dataset };
        let evaluation = evaluate(&model.inner, &dataset.inner.features, None)
            .map_err(|e| fail(ScgcStatus::Runtime, e.to_string()))?;
        let needed = evaluation.embeddings.rows() * evaluation.embeddings.cols();
        if len < needed {
            return Err(fail(
                ScgcStatus::BufferTooSmall,
                format!("need {needed} doubles, got {len}"),
            ));
        }
        let out = unsafe { std::slice::from_raw_parts_mut(out, needed) };
        out.copy_from_slice(evaluation.embeddings.data());
        Ok(())
    });
    match result {
        Ok(()) => ScgcStatus::Ok,
        Err(status) => status,
    }
}
