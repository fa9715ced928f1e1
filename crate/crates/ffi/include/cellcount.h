#ifndef CELLCOUNT_H
#define CELLCOUNT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CellcountStatus {
  CELLCOUNT_STATUS_OK = 0,
  CELLCOUNT_STATUS_NULL_POINTER = 1,
  CELLCOUNT_STATUS_INVALID_ARGUMENT = 2,
  CELLCOUNT_STATUS_BUFFER_TOO_SMALL = 3,
  CELLCOUNT_STATUS_OUT_OF_BOUNDS = 4,
  CELLCOUNT_STATUS_PARSE = 5,
  CELLCOUNT_STATUS_IO = 6,
  CELLCOUNT_STATUS_INTERNAL = 7,
} CellcountStatus;

/**
 * How the Gaussian width is chosen.
 */
typedef enum CellcountSigmaPolicy {
  /**
   * `sigma_value` times each prediction's radius.
   */
  CELLCOUNT_SIGMA_POLICY_RADIUS_SCALED = 0,
  /**
   * `sigma_value` pixels for every prediction.
   */
  CELLCOUNT_SIGMA_POLICY_FIXED = 1,
} CellcountSigmaPolicy;

typedef enum CellcountOutOfRadius {
  CELLCOUNT_OUT_OF_RADIUS_FORBID = 0,
  CELLCOUNT_OUT_OF_RADIUS_LINEAR_PENALTY = 1,
} CellcountOutOfRadius;

/**
 * Opaque density map.
 */
typedef struct CellcountDensityMap CellcountDensityMap;

/**
 * Opaque matching result.
 */
typedef struct CellcountMatchResult CellcountMatchResult;

/**
 * Opaque point set.
 */
typedef struct CellcountPointSet CellcountPointSet;

typedef struct CellcountMatchConfig {
  size_t k;
  enum CellcountSigmaPolicy sigma_policy;
  double sigma_value;
  double radius_floor;
  enum CellcountOutOfRadius out_of_radius;
} CellcountMatchConfig;

typedef struct CellcountPair {
  size_t pred;
  size_t gt;
  double distance;
  double weight;
} CellcountPair;

typedef struct CellcountKernelParams {
  double sigma;
  double dx;
  double dy;
  double sx;
  double sy;
} CellcountKernelParams;

typedef struct CellcountCountErrors {
  double mae;
  /**
   * Root of the mean squared error.
   */
  double mse_paper;
  /**
   * Mean squared error without the root.
   */
  double mse_literal;
} CellcountCountErrors;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *cellcount_last_error(void);

void cellcount_clear_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cellcount_version(void);

/**
 * Builds a point set from `n` interleaved `x, y` pairs.
 */
enum CellcountStatus cellcount_point_set_new(const double *xy,
                                             size_t n,
                                             struct CellcountPointSet **out);

/**
 * Reads an integer coordinate file (`x y` per line).
 */
enum CellcountStatus cellcount_point_set_read(const char *path, struct CellcountPointSet **out);

/**
 * Writes a coordinate file. `rounded`, if not NULL, receives how many points
 * were rounded to integers.
 */
enum CellcountStatus cellcount_point_set_write(const struct CellcountPointSet *set,
                                               const char *path,
                                               size_t *rounded);

/**
 * Number of points; 0 for NULL.
 */
size_t cellcount_point_set_len(const struct CellcountPointSet *set);

/**
 * Copies up to `capacity` points into `xy` as interleaved pairs.
 * `capacity` counts points, so `xy` must hold `2 * capacity` doubles.
 */
enum CellcountStatus cellcount_point_set_copy(const struct CellcountPointSet *set,
                                              double *xy,
                                              size_t capacity);

void cellcount_point_set_free(struct CellcountPointSet *set);

/**
 * Minimum-cost assignment on a row-major `rows × cols` matrix.
 * `row_to_col` (length `rows`) receives each row's column or -1.
 */
enum CellcountStatus cellcount_hungarian(const double *costs,
                                         size_t rows,
                                         size_t cols,
                                         ptrdiff_t *row_to_col,
                                         double *total_cost);

struct CellcountMatchConfig cellcount_match_config_default(void);

/**
 * Adaptive-radius Hungarian matching. `config` may be NULL for defaults.
 */
enum CellcountStatus cellcount_khm_match(const struct CellcountPointSet *pred,
                                         const struct CellcountPointSet *gt,
                                         const struct CellcountMatchConfig *config,
                                         struct CellcountMatchResult **out);

size_t cellcount_match_result_pair_count(const struct CellcountMatchResult *m);

double cellcount_match_result_total_weight(const struct CellcountMatchResult *m);

/**
 * Pair `index`, in ascending prediction order.
 */
enum CellcountStatus cellcount_match_result_pair(const struct CellcountMatchResult *m,
                                                 size_t index,
                                                 struct CellcountPair *out);

/**
 * Unmatched prediction indices. `len` always receives the full count, so a
 * first call with `capacity = 0` sizes the buffer.
 */
enum CellcountStatus cellcount_match_result_unmatched_pred(const struct CellcountMatchResult *m,
                                                           size_t *buf,
                                                           size_t capacity,
                                                           size_t *len);

/**
 * Unmatched ground-truth indices; same protocol as the prediction variant.
 */
enum CellcountStatus cellcount_match_result_unmatched_gt(const struct CellcountMatchResult *m,
                                                         size_t *buf,
                                                         size_t capacity,
                                                         size_t *len);

void cellcount_match_result_free(struct CellcountMatchResult *m);

/**
 * Row-major `size × size` kernel into `out`. `unit_sum` non-zero rescales
 * the samples to sum to one.
 */
enum CellcountStatus cellcount_kernel_synthesize(const struct CellcountKernelParams *params,
                                                 size_t size,
                                                 int32_t unit_sum,
                                                 double *out,
                                                 size_t out_len);

/**
 * Five row-major gradient grids, back to back, in the order σ, Δx, Δy,
 * sx, sy. `out_len` must be at least `5 * size * size`.
 */
enum CellcountStatus cellcount_kernel_gradients(const struct CellcountKernelParams *params,
                                                size_t size,
                                                double *out,
                                                size_t out_len);

enum CellcountStatus cellcount_count_error(const size_t *pred_counts,
                                           const size_t *gt_counts,
                                           size_t n,
                                           struct CellcountCountErrors *out);

/**
 * Sum of unit-mass Gaussians of width `sigma` at each point.
 */
enum CellcountStatus cellcount_density_render(const struct CellcountPointSet *points,
                                              double sigma,
                                              size_t height,
                                              size_t width,
                                              struct CellcountDensityMap **out);

size_t cellcount_density_map_height(const struct CellcountDensityMap *map);

size_t cellcount_density_map_width(const struct CellcountDensityMap *map);

/**
 * Row-major values, borrowed from the map; NULL for a NULL map.
 */
const double *cellcount_density_map_data(const struct CellcountDensityMap *map);

/**
 * Half the map maximum.
 */
double cellcount_density_map_default_threshold(const struct CellcountDensityMap *map);

/**
 * Local maxima at or above `threshold`, at least `min_distance` apart.
 */
enum CellcountStatus cellcount_density_extract_peaks(const struct CellcountDensityMap *map,
                                                     double threshold,
                                                     double min_distance,
                                                     struct CellcountPointSet **out);

enum CellcountStatus cellcount_density_map_write(const struct CellcountDensityMap *map,
                                                 const char *path);

enum CellcountStatus cellcount_density_map_read(const char *path, struct CellcountDensityMap **out);

void cellcount_density_map_free(struct CellcountDensityMap *map);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CELLCOUNT_H */
