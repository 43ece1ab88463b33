#ifndef PERIPINN_H
#define PERIPINN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum {
  PERIPINN_STATUS_OK = 0,
  PERIPINN_STATUS_NULL_POINTER = 1,
  PERIPINN_STATUS_INVALID_ARGUMENT = 2,
  PERIPINN_STATUS_CONFIG = 3,
  PERIPINN_STATUS_DIVERGENCE = 4,
  PERIPINN_STATUS_IO = 5,
  PERIPINN_STATUS_PARSE = 6,
  PERIPINN_STATUS_PANIC = 7,
} PeripinnStatus;

/**
 * Displacement samples on a space-time grid.
 */
typedef struct PeripinnDataset PeripinnDataset;

/**
 * Reference kernel `C(x)`.
 */
typedef struct PeripinnKernel PeripinnKernel;

/**
 * Two-branch network with its parameters.
 */
typedef struct PeripinnModel PeripinnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's most recent error message into `buf`
 * (NUL-terminated, truncated to `len - 1` bytes) and returns the full
 * message length in bytes. Pass `buf = NULL` to query the length.
 *
 * # Safety
 * `buf` must be NULL or point to `len` writable bytes.
 */
size_t peripinn_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *peripinn_version(void);

/**
 * Largest stencil offset `m` with `m·h < delta`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PeripinnStatus peripinn_truncation_halfwidth(double delta, double h, size_t *out);

/**
 * Learning rate of the quadratic schedule at `epoch` of `n_epochs`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PeripinnStatus peripinn_lr_at(double alpha0, size_t n_epochs, size_t epoch, double *out);

/**
 * `C(x) = slope·|x|` on `[−delta, delta]`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PeripinnStatus peripinn_kernel_v_shape(double slope, double delta, PeripinnKernel **out);

/**
 * Ramps of width `delta` at the ends of `[−half_width, half_width]`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PeripinnStatus peripinn_kernel_boundary_v(double delta, double half_width, PeripinnKernel **out);

/**
 * `C(x) = amplitude·exp(−sigma·x²)` sampled on `[−support, support]`.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PeripinnStatus peripinn_kernel_gaussian(double amplitude,
                                        double sigma,
                                        double support,
                                        PeripinnKernel **out);

/**
 * # Safety
 * `kernel` must come from a `peripinn_kernel_*` constructor; `out` must be
 * valid.
 */
PeripinnStatus peripinn_kernel_eval(const PeripinnKernel *kernel, double x, double *out);

/**
 * # Safety
 * `kernel` must be NULL or a handle not freed before.
 */
void peripinn_kernel_free(PeripinnKernel *kernel);

/**
 * Solves the forward problem for `kernel` from a Gaussian pulse
 * `amplitude·exp(−(x/width)²)` at rest.
 *
 * # Safety
 * `kernel` must be a live handle and `out` a valid pointer.
 */
PeripinnStatus peripinn_dataset_generate(const PeripinnKernel *kernel,
                                         double x_min,
                                         double x_max,
                                         size_t n_x,
                                         double t_min,
                                         double t_max,
                                         size_t n_t,
                                         double amplitude,
                                         double width,
                                         PeripinnDataset **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
PeripinnStatus peripinn_dataset_load(const char *path, PeripinnDataset **out);

/**
 * # Safety
 * `dataset` must be a live handle and `path` a NUL-terminated string.
 */
PeripinnStatus peripinn_dataset_save(const PeripinnDataset *dataset, const char *path);

/**
 * # Safety
 * `dataset` must be a live handle; the outputs must be valid pointers.
 */
PeripinnStatus peripinn_dataset_dims(const PeripinnDataset *dataset, size_t *n_x, size_t *n_t);

/**
 * Copies the `n_x·n_t` samples, time-major, into `buf`.
 *
 * # Safety
 * `dataset` must be a live handle and `buf` must hold `len` doubles.
 */
PeripinnStatus peripinn_dataset_values(const PeripinnDataset *dataset, double *buf, size_t len);

/**
 * # Safety
 * `dataset` must be NULL or a handle not freed before.
 */
void peripinn_dataset_free(PeripinnDataset *dataset);

/**
 * Fresh model with default architecture. `parametric != 0` selects the
 * two-parameter Gaussian kernel head.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
PeripinnStatus peripinn_model_new(int32_t parametric,
                                  double kernel_support,
                                  uint64_t seed,
                                  PeripinnModel **out);

/**
 * Reads a checkpoint file written by the command-line tool.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
PeripinnStatus peripinn_model_load(const char *path, PeripinnModel **out);

/**
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated string.
 */
PeripinnStatus peripinn_model_save(const PeripinnModel *model, const char *path);

/**
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
PeripinnStatus peripinn_model_param_count(const PeripinnModel *model, size_t *out);

/**
 * Kernel value `C(x)` of the model.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
PeripinnStatus peripinn_model_forward_c(const PeripinnModel *model, double x, double *out);

/**
 * `θ(x, t)` with its first and second time derivatives.
 *
 * # Safety
 * `model` must be a live handle; the outputs must be valid pointers.
 */
PeripinnStatus peripinn_model_forward_theta(const PeripinnModel *model,
                                            double x,
                                            double t,
                                            double *value,
                                            double *d_t,
                                            double *d_tt);

/**
 * `(γ*, σ*)` of a parametric model; `InvalidArgument` for a network head.
 *
 * # Safety
 * `model` must be a live handle; the outputs must be valid pointers.
 */
PeripinnStatus peripinn_model_parametric_kernel(const PeripinnModel *model,
                                                double *gamma_star,
                                                double *sigma_star);

/**
 * Trains `model` in place on `dataset` with default loss settings and
 * writes the total loss of the last epoch to `final_loss` (NaN for zero
 * epochs). `alpha0 <= 0` picks the default rate of the model kind.
 *
 * # Safety
 * `model` and `dataset` must be live handles; `final_loss` must be NULL or
 * valid.
 */
PeripinnStatus peripinn_model_train(PeripinnModel *model,
                                    const PeripinnDataset *dataset,
                                    size_t epochs,
                                    double alpha0,
                                    size_t batch_rows,
                                    uint64_t seed,
                                    double *final_loss);

/**
 * # Safety
 * `model` must be NULL or a handle not freed before.
 */
void peripinn_model_free(PeripinnModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PERIPINN_H */
