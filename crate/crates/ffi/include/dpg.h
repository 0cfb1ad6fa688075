#ifndef DPG_H
#define DPG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Diversification by occlusion counting.
 */
#define DPG_METHOD_COUNTING 0

/**
 * Diversification by greedy angle maximization.
 */
#define DPG_METHOD_ANGULAR 1

typedef enum DpgStatus {
  DPG_STATUS_OK = 0,
  DPG_STATUS_USAGE = 2,
  DPG_STATUS_FORMAT = 3,
  DPG_STATUS_DEGENERATE = 4,
  DPG_STATUS_STRUCTURAL = 5,
  DPG_STATUS_IO = 6,
  DPG_STATUS_NULL_POINTER = 7,
  DPG_STATUS_PANIC = 8,
} DpgStatus;

/**
 * Row-major float vectors.
 */
typedef struct DpgDataset DpgDataset;

/**
 * A K-NN graph or DPG over some dataset.
 */
typedef struct DpgIndex DpgIndex;

typedef struct DpgSearchStats {
  uint64_t distance_computations;
  uint64_t hops;
  double wall_time_secs;
} DpgSearchStats;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null if none.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *dpg_last_error_message(void);

/**
 * Copies `n * d` floats from `data` into a new dataset.
 *
 * # Safety
 * `data` must point to `n * d` readable floats and `out` must be writable.
 */
enum DpgStatus dpg_dataset_new(const float *data, size_t n, size_t d, struct DpgDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` must be writable.
 */
enum DpgStatus dpg_dataset_read_fvecs(const char *path, struct DpgDataset **out);

/**
 * Number of vectors, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t dpg_dataset_len(const struct DpgDataset *dataset);

/**
 * Vector dimension, or 0 for a null handle.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t dpg_dataset_dim(const struct DpgDataset *dataset);

/**
 * # Safety
 * `dataset` must be null or a handle not yet freed.
 */
void dpg_dataset_free(struct DpgDataset *dataset);

/**
 * Builds a DPG with degree parameter `kappa` over a 2*kappa-NN graph.
 * `method` is `DPG_METHOD_COUNTING` or `DPG_METHOD_ANGULAR`.
 *
 * # Safety
 * `dataset` must be a live handle and `out` writable.
 */
enum DpgStatus dpg_index_build(const struct DpgDataset *dataset,
                               size_t kappa,
                               uint32_t method,
                               uint64_t seed,
                               struct DpgIndex **out);

/**
 * Builds a plain K-NN graph by NN-descent.
 *
 * # Safety
 * `dataset` must be a live handle and `out` writable.
 */
enum DpgStatus dpg_index_build_kgraph(const struct DpgDataset *dataset,
                                      size_t k,
                                      uint64_t seed,
                                      struct DpgIndex **out);

/**
 * # Safety
 * `index` must be a live handle and `path` a NUL-terminated string.
 */
enum DpgStatus dpg_index_save(const struct DpgIndex *index, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum DpgStatus dpg_index_load(const char *path, struct DpgIndex **out);

/**
 * Number of nodes, or 0 for a null handle.
 *
 * # Safety
 * `index` must be null or a live handle.
 */
size_t dpg_index_len(const struct DpgIndex *index);

/**
 * Directed edge count, or 0 for a null handle.
 *
 * # Safety
 * `index` must be null or a live handle.
 */
size_t dpg_index_edge_count(const struct DpgIndex *index);

/**
 * # Safety
 * `index` must be null or a handle not yet freed.
 */
void dpg_index_free(struct DpgIndex *index);

/**
 * Greedy search for the `k` nearest neighbors of `query` with a pool of
 * `pool_size` candidates and `entry_count` random entry points.
 * Writes `k` ids and distances in ascending distance order. `stats` may be null.
 *
 * # Safety
 * `query` must hold `dim` floats; `out_ids` and `out_dists` must have room for `k` values.
 */
enum DpgStatus dpg_search(const struct DpgDataset *dataset,
                          const struct DpgIndex *index,
                          const float *query,
                          size_t dim,
                          size_t k,
                          size_t pool_size,
                          size_t entry_count,
                          uint64_t seed,
                          uint32_t *out_ids,
                          float *out_dists,
                          struct DpgSearchStats *stats);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DPG_H */
