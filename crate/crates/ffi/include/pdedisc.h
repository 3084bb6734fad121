#ifndef PDEDISC_H
#define PDEDISC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PdStatus {
  PD_STATUS_OK = 0,
  PD_STATUS_NULL_POINTER = 1,
  PD_STATUS_INVALID_ARGUMENT = 2,
  PD_STATUS_BUFFER_TOO_SMALL = 3,
  PD_STATUS_FAILURE = 4,
  PD_STATUS_PANIC = 5,
} PdStatus;

/**
 * Opaque discovered-model handle.
 */
typedef struct PdModel PdModel;

/**
 * Opaque network handle.
 */
typedef struct PdNetwork PdNetwork;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next call into this library on the same thread.
 */
const char *pd_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void pd_string_free(char *s);

/**
 * Parses a network JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum PdStatus pd_network_from_json(const char *json, struct PdNetwork **out);

/**
 * # Safety
 * `net` must come from [`pd_network_from_json`] and not have been freed.
 */
void pd_network_free(struct PdNetwork *net);

/**
 * # Safety
 * `net` must be a live handle; `n_in`, `n_out` writable or null.
 */
enum PdStatus pd_network_dims(const struct PdNetwork *net, uintptr_t *n_in, uintptr_t *n_out);

/**
 * Evaluates the network at one point.
 *
 * # Safety
 * `x` holds `n_in` values and `out` has room for `n_out`.
 */
enum PdStatus pd_network_forward(const struct PdNetwork *net,
                                 const double *x,
                                 uintptr_t n_in,
                                 double *out,
                                 uintptr_t n_out);

/**
 * All partial derivatives up to `order` at one point, output-major in
 * graded multi-index order. `len` receives the entry count; when `cap` is
 * too small nothing is written and `BufferTooSmall` is returned.
 *
 * # Safety
 * `x` holds `n_in` values, `out` has room for `cap`, `len` is writable.
 */
enum PdStatus pd_network_jets(const struct PdNetwork *net,
                              const double *x,
                              uintptr_t n_in,
                              uint32_t order,
                              double *out,
                              uintptr_t cap,
                              uintptr_t *len);

/**
 * One partial derivative of `output`, differentiating once per entry of `vars`.
 *
 * # Safety
 * `x` holds `n_in` values, `vars` holds `n_vars` indices, `out` is writable.
 */
enum PdStatus pd_network_partial(const struct PdNetwork *net,
                                 const double *x,
                                 uintptr_t n_in,
                                 uintptr_t output,
                                 const uintptr_t *vars,
                                 uintptr_t n_vars,
                                 double *out);

/**
 * Number of derivative terms with total order ≤ `max_order` for `n_space`
 * space axes and `n_out` outputs, and the number of monomials of degree
 * 1..=`max_degree` in them. Either output pointer may be null.
 *
 * # Safety
 * Non-null outputs must be writable.
 */
enum PdStatus pd_library_counts(uintptr_t n_space,
                                uintptr_t n_out,
                                uint32_t max_order,
                                uint32_t max_degree,
                                uint64_t *derivatives,
                                uint64_t *monomials);

/**
 * Parses a model artifact JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum PdStatus pd_model_from_json(const char *json, struct PdModel **out);

/**
 * # Safety
 * `model` must come from this library and not have been freed.
 */
void pd_model_free(struct PdModel *model);

/**
 * Coefficients of a linear model. `len` receives the count.
 *
 * # Safety
 * `out` has room for `cap` values; `len` is writable.
 */
enum PdStatus pd_model_coefficients(const struct PdModel *model,
                                    double *out,
                                    uintptr_t cap,
                                    uintptr_t *len);

/**
 * Restates a transformed-coordinate linear model in physical coordinates
 * using the transform stored with it. The result is a new handle.
 *
 * # Safety
 * `model` must be live; `out` must be writable.
 */
enum PdStatus pd_model_back_transform(const struct PdModel *model, struct PdModel **out);

/**
 * Equation text of a model. Free the result with [`pd_string_free`].
 *
 * # Safety
 * `model` must be live; `out` must be writable.
 */
enum PdStatus pd_model_emit_symbolic(const struct PdModel *model, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDEDISC_H */
