/* C interface for the earshot binaural simulation and localization toolkit. */

#ifndef EARSHOT_H
#define EARSHOT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code returned by every fallible function in this interface.
typedef enum EarshotStatus {
  // The call succeeded.
  EARSHOT_STATUS_OK = 0,
  // A required pointer argument was NULL.
  EARSHOT_STATUS_NULL_ARGUMENT = 1,
  // An argument value was out of range, malformed, or not UTF-8.
  EARSHOT_STATUS_INVALID_ARGUMENT = 2,
  // A buffer length does not match the model's dimensions.
  EARSHOT_STATUS_SHAPE_MISMATCH = 3,
  // A file or named resource does not exist.
  EARSHOT_STATUS_NOT_FOUND = 4,
  // A file exists but is not in the expected format.
  EARSHOT_STATUS_BAD_FORMAT = 5,
  // The operation failed while running (I/O, numerics, simulation).
  EARSHOT_STATUS_RUNTIME_ERROR = 6,
  // An internal panic was caught at the boundary. The process is still
  // usable but the library state that call touched should be treated
  // as suspect.
  EARSHOT_STATUS_PANIC = 7,
} EarshotStatus;

// Opaque handle to a loaded localization model.
//
// Obtain one with [`earshot_model_load`] and release it with
// [`earshot_model_free`].
typedef struct EarshotModel EarshotModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Returns the library version as a static NUL-terminated string.
const char *earshot_version(void);

// Returns the message recorded by the most recent failing call on the
// current thread, or an empty string if none has failed yet.
//
// The pointer stays valid until the next failing call on the same
// thread; copy the string if it must outlive that.
const char *earshot_last_error(void);

// Returns a static description of a status code (e.g. `"shape mismatch"`).
const char *earshot_status_message(enum EarshotStatus status);

// Loads a trained model from `path` and stores the new handle in
// `*out_model`. On failure `*out_model` is left untouched.
//
// # Safety
// `path` must be a NUL-terminated string and `out_model` a valid
// writable pointer. The returned handle must be released with
// [`earshot_model_free`].
enum EarshotStatus earshot_model_load(const char *path, struct EarshotModel **out_model);

// Releases a handle returned by [`earshot_model_load`]. Passing NULL is
// a no-op.
//
// # Safety
// `model` must be NULL or a handle from [`earshot_model_load`] that has
// not been freed yet; it must not be used afterwards.
void earshot_model_free(struct EarshotModel *model);

// Returns the model's feature dimension D, or 0 if `model` is NULL.
//
// # Safety
// `model` must be NULL or a live handle from [`earshot_model_load`].
size_t earshot_model_feature_dim(const struct EarshotModel *model);

// Returns the model's parameter dimension L, or 0 if `model` is NULL.
//
// # Safety
// `model` must be NULL or a live handle from [`earshot_model_load`].
size_t earshot_model_param_dim(const struct EarshotModel *model);

// Returns the number of mixture components K, or 0 if `model` is NULL.
//
// # Safety
// `model` must be NULL or a live handle from [`earshot_model_load`].
size_t earshot_model_component_count(const struct EarshotModel *model);

// Copies the NUL-terminated name of parameter slot `index` (for example
// `"azimuth_deg"`) into `buf`.
//
// Fails with `ShapeMismatch` if the buffer is too small for the name
// plus its terminator.
//
// # Safety
// `model` must be a live handle, and `buf` must be writable for
// `buf_len` bytes.
enum EarshotStatus earshot_model_param_name(const struct EarshotModel *model,
                                            size_t index,
                                            char *buf,
                                            size_t buf_len);

// Runs inverse prediction: maps one feature vector to the parameter
// estimate that most plausibly produced it.
//
// `features` must hold `earshot_model_feature_dim` values and
// `out_params` must have room for `earshot_model_param_dim` values.
// `out_responsibilities` may be NULL; if given it must have room for
// `earshot_model_component_count` values and receives the posterior
// component weights (non-negative, summing to 1).
//
// # Safety
// `model` must be a live handle and the pointers valid for the stated
// lengths.
enum EarshotStatus earshot_model_predict(const struct EarshotModel *model,
                                         const double *features,
                                         size_t n_features,
                                         double *out_params,
                                         size_t n_params,
                                         double *out_responsibilities);

// Simulates a binaural room impulse response for one source in the
// reference room and writes it to `path` as a stereo float WAV file.
//
// The source sits at `azimuth_deg`/`elevation_deg` (degrees, zero ahead,
// azimuth positive to the left, elevation positive up) and `range_m`
// metres from the listener. `wall_absorption` in [0, 1] is applied to
// every wall and frequency band. Equal inputs and `seed` give
// byte-identical files.
//
// # Safety
// `path` must be a NUL-terminated string.
enum EarshotStatus earshot_render_wav(double azimuth_deg,
                                      double elevation_deg,
                                      double range_m,
                                      double wall_absorption,
                                      uint64_t seed,
                                      const char *path);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EARSHOT_H */
