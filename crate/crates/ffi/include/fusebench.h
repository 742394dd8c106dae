#ifndef FUSEBENCH_H
#define FUSEBENCH_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Number of features produced by [`fb_signal_stats`].
#define FB_SIGNAL_FEATURES 11

// Result code of every call.
typedef enum FbStatus {
  FB_STATUS_OK = 0,
  FB_STATUS_NULL_ARGUMENT = 1,
  FB_STATUS_INVALID_ARGUMENT = 2,
  FB_STATUS_VALIDATION = 3,
  FB_STATUS_DOMAIN = 4,
  FB_STATUS_NUMERIC = 5,
  FB_STATUS_IO = 6,
  FB_STATUS_TOO_MANY_PLAYERS = 7,
  FB_STATUS_PANIC = 99,
} FbStatus;

// Opaque source catalog.
typedef struct FbCatalog FbCatalog;

// Opaque coalition game.
typedef struct FbGame FbGame;

// Opaque trained boosted-tree model.
typedef struct FbModel FbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on the same thread.
const char *fb_last_error(void);

// Library version as a static NUL-terminated string.
const char *fb_version(void);

// Loads a catalog manifest (JSON) from `path`.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum FbStatus fb_catalog_load(const char *path, struct FbCatalog **out);

// The built-in eleven-source catalog.
//
// # Safety
// `out` must be a valid pointer.
enum FbStatus fb_catalog_default(struct FbCatalog **out);

// Number of sources; 0 for a null handle.
//
// # Safety
// `catalog` must be null or a live handle.
uintptr_t fb_catalog_len(const struct FbCatalog *catalog);

// Total fused dimension of all sources; 0 for a null handle.
//
// # Safety
// `catalog` must be null or a live handle.
uintptr_t fb_catalog_total_dim(const struct FbCatalog *catalog);

// Validates an embedding-block file (JSONL or binary) against the catalog and
// reports the number of samples it holds.
//
// # Safety
// `catalog` must be a live handle, `path` NUL-terminated, `n_samples` valid.
enum FbStatus fb_blocks_validate(const struct FbCatalog *catalog,
                                 const char *path,
                                 uintptr_t *n_samples);

// # Safety
// `catalog` must be null or a handle not yet freed.
void fb_catalog_free(struct FbCatalog *catalog);

// Builds a game over `n_players` players from `2^n_players` coalition values
// indexed by bitmask. Entry 0 is the empty coalition.
//
// # Safety
// `values` must point to `n_values` doubles and `out` be valid.
enum FbStatus fb_game_new(uintptr_t n_players,
                          const double *values,
                          uintptr_t n_values,
                          struct FbGame **out);

// Writes the exact Shapley value of each player to `phi`.
//
// # Safety
// `game` must be a live handle and `phi` point to `n_phi` writable doubles.
enum FbStatus fb_shapley_exact(const struct FbGame *game, double *phi, uintptr_t n_phi);

// # Safety
// `game` must be null or a handle not yet freed.
void fb_game_free(struct FbGame *game);

// Loads a trained model from its JSON serialization.
//
// # Safety
// `path` must be NUL-terminated and `out` valid.
enum FbStatus fb_model_load(const char *path, struct FbModel **out);

// Input width the model expects; 0 for a null handle.
//
// # Safety
// `model` must be null or a live handle.
uintptr_t fb_model_n_features(const struct FbModel *model);

// Scores `rows` row-major feature vectors of width `cols`. Features must
// already be normalized the way the training split was.
//
// # Safety
// `x` must hold `rows * cols` doubles and `scores` have room for `rows`.
enum FbStatus fb_model_predict(const struct FbModel *model,
                               const double *x,
                               uintptr_t rows,
                               uintptr_t cols,
                               double *scores);

// # Safety
// `model` must be null or a handle not yet freed.
void fb_model_free(struct FbModel *model);

// Area under the ROC curve with midranks for ties. Labels are 0 or 1.
//
// # Safety
// `scores` and `labels` must hold `n` elements and `out` be valid.
enum FbStatus fb_auroc(const double *scores, const uint8_t *labels, uintptr_t n, double *out);

// Summary features of one irregular series, in order: count, max, min, mean,
// median, population std, variance, interior peak count, OLS slope per hour,
// mean successive difference, mean absolute successive difference.
// `times` must be non-decreasing.
//
// # Safety
// `times` and `values` must hold `n` doubles; `out` must hold `FB_SIGNAL_FEATURES`.
enum FbStatus fb_signal_stats(const double *times, const double *values, uintptr_t n, double *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* FUSEBENCH_H */
