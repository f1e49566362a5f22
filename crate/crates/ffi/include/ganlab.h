#ifndef GANLAB_H
#define GANLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GanlabStatus {
  GANLAB_STATUS_OK = 0,
  GANLAB_STATUS_NULL_POINTER = 1,
  GANLAB_STATUS_INVALID_ARGUMENT = 2,
  GANLAB_STATUS_DIMENSION_MISMATCH = 3,
  GANLAB_STATUS_NOT_POSITIVE_SEMIDEFINITE = 4,
  GANLAB_STATUS_NOT_SYMMETRIC = 5,
  GANLAB_STATUS_TOO_LARGE = 6,
  GANLAB_STATUS_SINGULAR = 7,
  GANLAB_STATUS_BLOWUP = 8,
  GANLAB_STATUS_NUMERICAL = 9,
  GANLAB_STATUS_PANIC = 10,
} GanlabStatus;

/*
 Opaque Gaussian law `N(mean, cov)`.
 */
typedef struct GanlabGaussian GanlabGaussian;

/*
 Opaque recorded trajectory of either flow.

 Naive-flow states are `A` (row-major, `d²` values) followed by `v`;
 shared-flow states are `v` followed by `b` and `λ`.
 */
typedef struct GanlabTrajectory GanlabTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread; empty after a success.
 The pointer stays valid until the next call on the same thread.
 */
const char *ganlab_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *ganlab_version(void);

/*
 Creates `N(mean, cov)` from a length-`dim` mean and a `dim × dim` covariance.

 # Safety
 `mean` and `cov` must point to `dim` and `dim * dim` readable doubles and
 `out` to writable storage for one pointer.
 */
enum GanlabStatus ganlab_gaussian_new(size_t dim,
                                      const double *mean,
                                      const double *cov,
                                      struct GanlabGaussian **out);

/*
 # Safety
 `g` must come from [`ganlab_gaussian_new`] and not be used afterwards. Null is ignored.
 */
void ganlab_gaussian_free(struct GanlabGaussian *g);

/*
 Dimension of the law, or 0 for a null handle.

 # Safety
 `g` must be null or a live handle.
 */
size_t ganlab_gaussian_dim(const struct GanlabGaussian *g);

/*
 Closed-form W2 distance.

 # Safety
 `p`, `q` must be live handles and `out` writable.
 */
enum GanlabStatus ganlab_gauss_w2(const struct GanlabGaussian *p,
                                  const struct GanlabGaussian *q,
                                  double *out);

/*
 Total variation between laws sharing the identity covariance.

 # Safety
 As [`ganlab_gauss_w2`].
 */
enum GanlabStatus ganlab_gauss_tv(const struct GanlabGaussian *p,
                                  const struct GanlabGaussian *q,
                                  double *out);

/*
 Halfspace (Tukey) distance between laws sharing the identity covariance.

 # Safety
 As [`ganlab_gauss_w2`].
 */
enum GanlabStatus ganlab_gauss_tukey(const struct GanlabGaussian *p,
                                     const struct GanlabGaussian *q,
                                     double *out);

/*
 PSD square root of a symmetric `d × d` matrix.

 # Safety
 `s` and `out` must each hold `d * d` doubles.
 */
enum GanlabStatus ganlab_matrix_sqrt(size_t d, const double *s, double *out);

/*
 Rank-`r` spectral truncation of a PSD matrix, with the Frobenius
 error of the square roots.

 # Safety
 `s` and `out_cov` must hold `d * d` doubles; `out_error` must be writable.
 */
enum GanlabStatus ganlab_pca_truncate(size_t d,
                                      const double *s,
                                      size_t r,
                                      double *out_cov,
                                      double *out_error);

/*
 Exact W2 between two uniform empirical laws of `n` points in `R^d`.

 # Safety
 `a` and `b` must hold `n * d` doubles (row-major) and `out` be writable.
 */
enum GanlabStatus ganlab_w2_assignment(size_t n,
                                       size_t d,
                                       const double *a,
                                       const double *b,
                                       double *out);

/*
 Minimax value `Tr(K) - Σ_{i≤r} λ_i` of the naive game.

 # Safety
 `k` must hold `d * d` doubles and `out` be writable.
 */
enum GanlabStatus ganlab_minimax_value(size_t d, const double *k, size_t r, double *out);

/*
 Maximin value of the naive game over a grid of discriminators (`d ≤ 3`).

 # Safety
 As [`ganlab_minimax_value`].
 */
enum GanlabStatus ganlab_maximin_value(size_t d, const double *k, double *out);

/*
 `ρ_a` and the W2 ratio `√(2/(1+ρ_a))` for the two-point scale mixture `Q_a`.

 # Safety
 `out_rho` and `out_ratio` must be writable.
 */
enum GanlabStatus ganlab_qa_ratio(double a, double *out_rho, double *out_ratio);

/*
 RK4 run of the naive flow from `(A0, v0)`.

 # Safety
 `k` and `a0` must hold `d * d` doubles, `v0` `d` doubles, `out` one pointer.
 */
enum GanlabStatus ganlab_naive_flow_run(size_t d,
                                        const double *k,
                                        const double *a0,
                                        const double *v0,
                                        double h,
                                        double t_end,
                                        size_t record_every,
                                        struct GanlabTrajectory **out);

/*
 RK4 run of the shared-parameter flow from `(v0, b0, λ0)`; `v0` must be a unit vector.

 # Safety
 `k` must hold `d * d` doubles, `v0` `d` doubles, `out` one pointer.
 */
enum GanlabStatus ganlab_shared_flow_run(size_t d,
                                         const double *k,
                                         const double *v0,
                                         double b0,
                                         double lambda0,
                                         double h,
                                         double t_end,
                                         size_t record_every,
                                         struct GanlabTrajectory **out);

/*
 # Safety
 `tr` must be null or a live handle; it must not be used afterwards.
 */
void ganlab_trajectory_free(struct GanlabTrajectory *tr);

/*
 Number of recorded states, or 0 for a null handle.

 # Safety
 `tr` must be null or a live handle.
 */
size_t ganlab_trajectory_len(const struct GanlabTrajectory *tr);

/*
 Number of doubles per recorded state, or 0 for a null handle.

 # Safety
 `tr` must be null or a live handle.
 */
size_t ganlab_trajectory_state_len(const struct GanlabTrajectory *tr);

/*
 Worst one-step Lyapunov increase (NaN for the naive flow).

 # Safety
 `tr` must be a live handle and `out` writable.
 */
enum GanlabStatus ganlab_trajectory_max_lyapunov_increase(const struct GanlabTrajectory *tr,
                                                          double *out);

/*
 Time, objective and Lyapunov value (NaN for the naive flow) of state `i`,
 and the state itself copied into `state` (`state_len` doubles).

 # Safety
 `tr` must be a live handle; `state` must hold `state_len` doubles; the
 scalar out-pointers must be writable.
 */
enum GanlabStatus ganlab_trajectory_get(const struct GanlabTrajectory *tr,
                                        size_t i,
                                        double *out_t,
                                        double *out_objective,
                                        double *out_lyapunov,
                                        double *state,
                                        size_t state_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GANLAB_H */
