#ifndef SCGC_H
#define SCGC_H

/* Generated by cbindgen from scgc-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes for every fallible call.
 */
typedef enum {
  SCGC_STATUS_OK = 0,
  SCGC_STATUS_NULL_POINTER = 1,
  SCGC_STATUS_INVALID_ARGUMENT = 2,
  SCGC_STATUS_INVALID_UTF8 = 3,
  SCGC_STATUS_IO = 4,
  /**
   * Training or evaluation failed; see `scgc_last_error`.
   */
  SCGC_STATUS_RUNTIME = 5,
  /**
   * Output buffer too small for the requested data.
   */
  SCGC_STATUS_BUFFER_TOO_SMALL = 6,
  /**
   * A panic was caught at the boundary; state may be stale.
   */
  SCGC_STATUS_PANIC = 7,
} ScgcStatus;

/**
 * A loaded dataset: features, graph structure, optional labels.
 */
typedef struct ScgcDataset ScgcDataset;

/**
 * A trained model ready for inference.
 */
typedef struct ScgcModel ScgcModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copy the last error message for this thread into `buffer` as a
 * NUL-terminated string. Returns `BufferTooSmall` when truncated.
 *
 * # Safety
 * `buffer` must point to at least `len` writable bytes.
 */
ScgcStatus scgc_last_error(char *buffer, size_t len);

/**
 * Load a dataset directory (features.tsv, optional edges.txt and
 * labels.txt). `knn_k` of 0 means "use the edge list"; a positive value
 * builds a KNN graph from features instead. Returns null on failure.
 *
 * # Safety
 * `dir` must be a valid NUL-terminated string.
 */
ScgcDataset *scgc_dataset_load(const char *dir, size_t knn_k);

/**
 * Generate a stochastic block model fixture in memory. `block_sizes`
 * points to `n_blocks` node counts. Returns null on failure.
 *
 * # Safety
 * `block_sizes` must point to `n_blocks` readable values.
 */
ScgcDataset *scgc_dataset_synthetic(const size_t *block_sizes,
                                    size_t n_blocks,
                                    double p_in,
                                    double p_out,
                                    size_t feature_dim,
                                    double noise_sigma,
                                    uint64_t seed);

/**
 * Number of nodes in the dataset; 0 if the handle is null.
 */
size_t scgc_dataset_nodes(const ScgcDataset *dataset);

/**
 * Feature dimension of the dataset; 0 if the handle is null.
 */
size_t scgc_dataset_feature_dim(const ScgcDataset *dataset);

/**
 * # Safety
 * `dataset` must come from a scgc constructor and not be freed twice.
 */
void scgc_dataset_free(ScgcDataset *dataset);

/**
 * Run the whole protocol (pretraining, centroid initialization, joint
 * training) on a dataset. `config_json` uses the same schema as the CLI's
 * `--config` files; pass `{}` for defaults. A zero `cluster_count` falls
 * back to the dataset's label class count. Returns null on failure.
 *
 * # Safety
 * `dataset` must be a live handle; `config_json` a valid NUL-terminated
 * string.
 */
ScgcModel *scgc_train(const ScgcDataset *dataset, const char *config_json);

/**
 * Load a model checkpoint written by `scgc_model_save` or the CLI.
 * Returns null on failure.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
ScgcModel *scgc_model_load(const char *path);

/**
 * Write a model checkpoint (JSON, same format as the CLI).
 *
 * # Safety
 * `model` must be a live handle; `path` a valid NUL-terminated string.
 */
ScgcStatus scgc_model_save(const ScgcModel *model, const char *path);

/**
 * Embedding width of a model; 0 if the handle is null.
 */
size_t scgc_model_embed_dim(const ScgcModel *model);

/**
 * # Safety
 * `model` must come from a scgc constructor and not be freed twice.
 */
void scgc_model_free(ScgcModel *model);

/**
 * Score a model against a labelled dataset. `out_metrics` receives
 * [acc, nmi, ari, f1]. Fails with `InvalidArgument` when the dataset has
 * no labels. Inference uses features only; the dataset's graph is never
 * touched.
 *
 * # Safety
 * Handles must be live; `out_metrics` must point to 4 writable doubles.
 */
ScgcStatus scgc_evaluate(const ScgcModel *model, const ScgcDataset *dataset, double *out_metrics);

/**
 * Hard cluster assignments for every node. `out_labels` must hold
 * `scgc_dataset_nodes` entries.
 *
 * # Safety
 * Handles must be live; `out_labels` must point to `len` writable values.
 */
ScgcStatus scgc_assign(const ScgcModel *model,
                       const ScgcDataset *dataset,
                       uint32_t *out_labels,
                       size_t len);

/**
 * Node embeddings, row-major `n x embed_dim`. `len` is the buffer length
 * in doubles.
 *
 * # Safety
 * Handles must be live; `out` must point to `len` writable doubles.
 */
ScgcStatus scgc_embed(const ScgcModel *model, const ScgcDataset *dataset, double *out, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SCGC_H */
