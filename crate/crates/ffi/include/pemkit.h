#ifndef PEMKIT_H
#define PEMKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PemStatus {
  PEM_STATUS_OK = 0,
  PEM_STATUS_NULL_POINTER = 1,
  PEM_STATUS_INVALID_UTF8 = 2,
  PEM_STATUS_IO = 3,
  PEM_STATUS_PARSE = 4,
  PEM_STATUS_INVALID_MODEL = 5,
  PEM_STATUS_INVALID_ARGUMENT = 6,
  PEM_STATUS_INVALID_FRAME = 7,
  PEM_STATUS_TIME_REGRESSION = 8,
  PEM_STATUS_DUPLICATE_ID = 9,
  PEM_STATUS_BUFFER_TOO_SMALL = 10,
  PEM_STATUS_PANIC = 11,
} PemStatus;

/**
 * Opaque injector handle: one seeded perception stream over a model.
 */
typedef struct PemInjector PemInjector;

/**
 * Opaque model handle.
 */
typedef struct PemModel PemModel;

/**
 * Ground-truth object in the ego frame: `x` right, `y` ahead, meters.
 * `occlusion` is the visibility level 0..=3.
 */
typedef struct PemObject {
  uint64_t id;
  double x;
  double y;
  uint8_t occlusion;
} PemObject;

typedef struct PemPerceived {
  uint64_t source_id;
  double x;
  double y;
} PemPerceived;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *pem_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pem_version(void);

/**
 * Loads a model file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PemStatus pem_model_load(const char *path, struct PemModel **out);

/**
 * Parses a model from its JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PemStatus pem_model_from_json(const char *json, struct PemModel **out);

/**
 * Error-free model (always detects, no position error) on the given grid.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PemStatus pem_model_perfect(double sector_width_deg,
                                 double ring_depth_m,
                                 double max_radius_m,
                                 struct PemModel **out);

/**
 * Releases a model. Injectors created from it stay valid.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards; null is
 * ignored.
 */
void pem_model_free(struct PemModel *model);

/**
 * Number of conditions (occlusion levels x rings x sectors); 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t pem_model_condition_count(const struct PemModel *model);

/**
 * Stationary detection probability of condition `index`.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PemStatus pem_model_stationary_detection(const struct PemModel *model,
                                              size_t index,
                                              double *out);

/**
 * Starts a perception stream over `model` with the given seed.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PemStatus pem_injector_new(const struct PemModel *model,
                                uint64_t seed,
                                double rate_hz,
                                struct PemInjector **out);

/**
 * Perceives one frame. `out` must hold at least `n_objects` entries; the
 * number written goes to `n_out`. A rejected frame leaves the injector
 * unchanged.
 *
 * # Safety
 * `injector` must be a live handle, `objects` must point to `n_objects`
 * entries (or be null when `n_objects` is 0), `out` to `out_capacity`
 * entries and `n_out` must be valid.
 */
enum PemStatus pem_injector_process(struct PemInjector *injector,
                                    double t,
                                    const struct PemObject *objects,
                                    size_t n_objects,
                                    struct PemPerceived *out,
                                    size_t out_capacity,
                                    size_t *n_out);

/**
 * Clears tracks and moves to the next random stream, as a server reset does.
 *
 * # Safety
 * `injector` must be null or a live handle.
 */
enum PemStatus pem_injector_reset(struct PemInjector *injector);

/**
 * # Safety
 * `injector` must come from this library and not be used afterwards; null
 * is ignored.
 */
void pem_injector_free(struct PemInjector *injector);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEMKIT_H */
