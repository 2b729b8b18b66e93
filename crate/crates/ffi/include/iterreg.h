#ifndef ITERREG_H
#define ITERREG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum IrStatus {
  IR_STATUS_OK = 0,
  IR_STATUS_NULL_POINTER = 1,
  IR_STATUS_INVALID_ARGUMENT = 2,
  IR_STATUS_DIMENSION_MISMATCH = 3,
  IR_STATUS_NON_FINITE = 4,
  IR_STATUS_DIVERGED = 5,
  IR_STATUS_UNSUPPORTED = 6,
  IR_STATUS_NUMERICAL = 7,
  IR_STATUS_IO = 8,
  IR_STATUS_PANIC = 9,
} IrStatus;

typedef enum IrPenalty {
  IR_PENALTY_ZERO = 0,
  IR_PENALTY_L1 = 1,
  // Nuclear norm of a `rows x cols` row-major matrix.
  IR_PENALTY_NUCLEAR = 2,
  // Isotropic total variation of a `rows x cols` row-major image.
  IR_PENALTY_TV = 3,
} IrPenalty;

typedef enum IrVariant {
  IR_VARIANT_DGD = 0,
  IR_VARIANT_ADGD = 1,
} IrVariant;

typedef struct IrOperator IrOperator;

typedef struct IrRegularizer IrRegularizer;

typedef struct IrTrace IrTrace;

// Solver settings; start from [`ir_solve_options_default`].
typedef struct IrSolveOptions {
  enum IrVariant variant;
  size_t max_iterations;
  // Dual step; zero or negative selects the automatic step.
  double step;
  size_t record_every;
  bool store_iterates;
  bool track_dual_objective;
} IrSolveOptions;

typedef struct IrTraceInfo {
  enum IrVariant variant;
  double alpha;
  double gamma;
  // `sqrt(alpha / gamma)`, the norm the step was sized for.
  double step_norm;
  size_t iterations;
  size_t inner_iterations;
  size_t records;
  size_t primal_dim;
  size_t dual_dim;
} IrTraceInfo;

typedef struct IrCertificate {
  enum IrVariant variant;
  double a;
  double b;
  double c;
  double delta;
  size_t t_delta;
  double final_bound;
} IrCertificate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null after a success.
// The pointer stays valid until the next call on this thread.
const char *ir_last_error(void);

const char *ir_version(void);

// Dense `rows x cols` operator from row-major `data`.
//
// # Safety
// `data` must point to `rows * cols` readable doubles; `out` must be writable.
enum IrStatus ir_operator_dense(const double *data,
                                size_t rows,
                                size_t cols,
                                struct IrOperator **out);

// Entry-sampling operator on a `rows x cols` grid; `indices` are row-major
// flat positions.
//
// # Safety
// `indices` must point to `count` readable values; `out` must be writable.
enum IrStatus ir_operator_mask(size_t rows,
                               size_t cols,
                               const size_t *indices,
                               size_t count,
                               struct IrOperator **out);

// Circular Gaussian blur of a `rows x cols` image.
//
// # Safety
// `out` must be writable.
enum IrStatus ir_operator_gaussian_blur(size_t rows,
                                        size_t cols,
                                        double sigma,
                                        size_t radius,
                                        struct IrOperator **out);

// `outer ∘ inner`. Both inputs are copied and stay owned by the caller.
//
// # Safety
// Handles must be valid or null; `out` must be writable.
enum IrStatus ir_operator_compose(const struct IrOperator *outer,
                                  const struct IrOperator *inner,
                                  struct IrOperator **out);

// # Safety
// `op` must be null or a handle not yet freed.
void ir_operator_free(struct IrOperator *op);

// # Safety
// `op` must be a valid handle; the outputs must be writable.
enum IrStatus ir_operator_dims(const struct IrOperator *op, size_t *domain, size_t *codomain);

// # Safety
// `x` must hold `x_len` doubles and `out` must have room for `out_len`.
enum IrStatus ir_operator_apply(const struct IrOperator *op,
                                const double *x,
                                size_t x_len,
                                double *out,
                                size_t out_len);

// # Safety
// `u` must hold `u_len` doubles and `out` must have room for `out_len`.
enum IrStatus ir_operator_adjoint(const struct IrOperator *op,
                                  const double *u,
                                  size_t u_len,
                                  double *out,
                                  size_t out_len);

// Largest singular value by the power method.
//
// # Safety
// `op` must be a valid handle; `norm` must be writable.
enum IrStatus ir_operator_norm(const struct IrOperator *op, double *norm);

// `penalty + (alpha/2)||.||^2`. `rows` and `cols` are read for the nuclear
// and total-variation penalties only.
//
// # Safety
// `out` must be writable.
enum IrStatus ir_regularizer_new(double alpha,
                                 enum IrPenalty penalty,
                                 size_t rows,
                                 size_t cols,
                                 struct IrRegularizer **out);

// # Safety
// `reg` must be null or a handle not yet freed.
void ir_regularizer_free(struct IrRegularizer *reg);

// `argmin_u penalty(u) + (alpha/2)||u - w||^2`.
//
// # Safety
// `w` must hold `len` doubles and `out` must have room for `len`.
enum IrStatus ir_regularizer_prox(struct IrRegularizer *reg,
                                  const double *w,
                                  size_t len,
                                  double *out);

// Gradient of the convex conjugate at `v`, `prox(v / alpha)`.
//
// # Safety
// `v` must hold `len` doubles and `out` must have room for `len`.
enum IrStatus ir_regularizer_dual_gradient(struct IrRegularizer *reg,
                                           const double *v,
                                           size_t len,
                                           double *out);

struct IrSolveOptions ir_solve_options_default(void);

// Runs DGD or ADGD on `op`, `y`. A null `options` means the defaults.
//
// # Safety
// Handles must be valid; `y` must hold `y_len` doubles; `out` must be writable.
enum IrStatus ir_solve(const struct IrOperator *op,
                       const double *y,
                       size_t y_len,
                       struct IrRegularizer *reg,
                       const struct IrSolveOptions *options,
                       struct IrTrace **out);

// # Safety
// `trace` must be null or a handle not yet freed.
void ir_trace_free(struct IrTrace *trace);

// # Safety
// `trace` must be a valid handle; `info` must be writable.
enum IrStatus ir_trace_info(const struct IrTrace *trace, struct IrTraceInfo *info);

// The solver's estimate after the last iteration: the running mean for DGD,
// the last primal iterate for ADGD.
//
// # Safety
// `out` must have room for `len` doubles.
enum IrStatus ir_trace_output(const struct IrTrace *trace, double *out, size_t len);

// # Safety
// `out` must have room for `len` doubles.
enum IrStatus ir_trace_final_dual(const struct IrTrace *trace, double *out, size_t len);

// Iteration index and dual objective of record `index`.
//
// # Safety
// `trace` must be a valid handle; the outputs must be writable.
enum IrStatus ir_trace_dual_objective(const struct IrTrace *trace,
                                      size_t index,
                                      size_t *t,
                                      double *value);

// Estimate stored at record `index` (needs `store_iterates`).
//
// # Safety
// `out` must have room for `len` doubles.
enum IrStatus ir_trace_iterate(const struct IrTrace *trace, size_t index, double *out, size_t len);

// A-priori stopping time and error bound. A non-positive `c` selects the
// default constant.
//
// # Safety
// `out` must be writable.
enum IrStatus ir_certificate(enum IrVariant variant_,
                             double operator_norm,
                             double dual_norm,
                             double alpha,
                             double delta,
                             double c,
                             struct IrCertificate *out);

// Error bound of `cert` at iteration `t`.
//
// # Safety
// `cert` must point to a certificate; `bound` must be writable.
enum IrStatus ir_certificate_bound(const struct IrCertificate *cert, size_t t, double *bound);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ITERREG_H */
