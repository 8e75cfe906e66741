/* forgescan C API: boundary-based image forgery localization. */

#ifndef FORGESCAN_H
#define FORGESCAN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Which localization back end to run.
 */
typedef enum {
  /**
   * Exhaustive sliding-window detection.
   */
  FGS_BACKEND_SWD = 0,
  /**
   * Shared-feature-map path (identical output, less conv work).
   */
  FGS_BACKEND_FAST = 1,
} FgsBackend;

/**
 * Status code returned by every fallible function.
 */
typedef enum {
  FGS_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  FGS_STATUS_NULL_ARGUMENT = 1,
  FGS_STATUS_PARAMETER = 2,
  FGS_STATUS_DATA = 3,
  FGS_STATUS_IO = 4,
  FGS_STATUS_FORMAT = 5,
  FGS_STATUS_SHAPE = 6,
  FGS_STATUS_COLOR_SPACE = 7,
  FGS_STATUS_STATE = 8,
  /**
   * An internal invariant failed; the library state is unspecified.
   */
  FGS_STATUS_INTERNAL = 9,
} FgsStatus;

/**
 * Opaque handle around loaded network weights.
 */
typedef struct FgsDetector FgsDetector;

/**
 * Detection tuning knobs. Obtain defaults from `fgs_options_default`.
 */
typedef struct {
  FgsBackend backend;
  /**
   * Window stride in pixels (>= 1).
   */
  uint32_t stride;
  /**
   * Probability-map binarization threshold in (0, 1).
   */
  float threshold;
  /**
   * Median filter kernel (odd) applied to the binary map.
   */
  uint32_t median_k;
} FgsOptions;

/**
 * Axis-aligned pixel rectangle, half-open on bottom/right.
 */
typedef struct {
  uint32_t top;
  uint32_t left;
  uint32_t bottom;
  uint32_t right;
} FgsBox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fgs_version(void);

/**
 * Default detection options (fast back end, stride 2, threshold 0.5,
 * median kernel 5).
 */
FgsOptions fgs_options_default(void);

/**
 * Load SCNW weights from `path` into a new detector.
 *
 * On success writes the handle to `out` and returns `FGS_STATUS_OK`.
 * The handle must be released with `fgs_detector_close`.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
FgsStatus fgs_detector_open(const char *path, FgsDetector **out);

/**
 * Release a detector handle. Passing null is a no-op.
 *
 * # Safety
 * `detector` must come from `fgs_detector_open` and not be used afterwards.
 */
void fgs_detector_close(FgsDetector *detector);

/**
 * Localize forged regions in an 8-bit interleaved RGB image (row-major,
 * `height * width * 3` bytes). On success `*out_boxes` points to
 * `*out_count` boxes owned by the library; release them with
 * `fgs_boxes_free`. `options` may be null for defaults.
 *
 * # Safety
 * `detector` must be a live handle, `pixels` must reference at least
 * `height * width * 3` readable bytes, and the out pointers must be valid.
 */
FgsStatus fgs_detect_rgb8(const FgsDetector *detector,
                          const uint8_t *pixels,
                          uint32_t height,
                          uint32_t width,
                          const FgsOptions *options,
                          FgsBox **out_boxes,
                          uintptr_t *out_count);

/**
 * Release a box array returned by `fgs_detect_rgb8`. Passing null is a no-op.
 *
 * # Safety
 * `boxes`/`count` must match a previous successful `fgs_detect_rgb8` call.
 */
void fgs_boxes_free(FgsBox *boxes, uintptr_t count);

/**
 * Compute the raw probability map for an RGB8 image. On success
 * `*out_scores` holds `*out_rows * *out_cols` row-major scores owned by the
 * library; release with `fgs_scores_free`. `options` may be null; only its
 * backend and stride are used.
 *
 * # Safety
 * Same contract as [`fgs_detect_rgb8`].
 */
FgsStatus fgs_probability_map_rgb8(const FgsDetector *detector,
                                   const uint8_t *pixels,
                                   uint32_t height,
                                   uint32_t width,
                                   const FgsOptions *options,
                                   float **out_scores,
                                   uintptr_t *out_rows,
                                   uintptr_t *out_cols);

/**
 * Release a score array returned by `fgs_probability_map_rgb8`.
 *
 * # Safety
 * `scores`/`len` must match a previous successful call (`len = rows * cols`).
 */
void fgs_scores_free(float *scores, uintptr_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FORGESCAN_H */
