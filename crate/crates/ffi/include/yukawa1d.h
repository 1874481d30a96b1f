#ifndef YUKAWA1D_H
#define YUKAWA1D_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Ordering prescription for `yk_tadpole`.
 */
typedef enum YkScheme {
  YK_SCHEME_TIME_SPLITTING = 0,
  YK_SCHEME_SYMMETRIC = 1,
} YkScheme;

typedef enum YkStatus {
  YK_STATUS_OK = 0,
  YK_STATUS_NULL_POINTER = 1,
  YK_STATUS_INVALID_PARAMETER = 2,
  YK_STATUS_POLE = 3,
  YK_STATUS_TAU_OUT_OF_RANGE = 4,
  YK_STATUS_DEGENERATE_GROUND_STATE = 5,
  YK_STATUS_OFF_GRID_MOMENTUM = 6,
  YK_STATUS_MOMENTUM_NOT_CONSERVED = 7,
  YK_STATUS_WINDING_CUTOFF = 8,
  YK_STATUS_CONSISTENCY = 9,
  YK_STATUS_UNSUPPORTED = 10,
  YK_STATUS_ZERO_TEMPERATURE = 11,
  YK_STATUS_EMPTY_EIGEN_SYSTEM = 12,
  YK_STATUS_BUFFER_TOO_SMALL = 13,
  YK_STATUS_PANIC = 14,
} YkStatus;

/**
 * Opaque diagonalized Hamiltonian.
 */
typedef struct YkEigenSystem YkEigenSystem;

/**
 * Opaque model handle.
 */
typedef struct YkModel YkModel;

typedef struct YkChainSummary {
  double phi_mean;
  double phi_stderr;
  double phi_tau_int;
  /**
   * `<phi(beta/2) phi(0)>`.
   */
  double half_beta_mean;
  double half_beta_stderr;
  double acceptance;
  uint64_t samples;
  /**
   * Nonzero when the drift test flagged the chain.
   */
  uint8_t unthermalized;
} YkChainSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL
 * terminated, truncated to `len`). Returns the full length plus one.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t yk_last_error_message(char *buf, size_t len);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum YkStatus yk_model_new(double m, double mu, double lambda, double beta, struct YkModel **out);

/**
 * # Safety
 * `model` must be null or come from `yk_model_new` and not be freed twice.
 */
void yk_model_free(struct YkModel *model);

/**
 * Energy of level `n` in sector `sector` (0 bosonic, 1 fermionic).
 *
 * # Safety
 * Pointers must be valid.
 */
enum YkStatus yk_model_energy(const struct YkModel *model, uint8_t sector, size_t n, double *out);

/**
 * Exact thermal `<phi(tau) phi(0)>`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum YkStatus yk_exact_two_point(const struct YkModel *model, double tau, double *out);

/**
 * Exact thermal `<phi>`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum YkStatus yk_exact_phi(const struct YkModel *model, double *out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum YkStatus yk_eigensystem_new(const struct YkModel *model,
                                 size_t n_max,
                                 struct YkEigenSystem **out);

/**
 * # Safety
 * `eig` must be null or come from `yk_eigensystem_new` and not be freed twice.
 */
void yk_eigensystem_free(struct YkEigenSystem *eig);

/**
 * Writes all energies in ascending order. `written` receives the count,
 * or the required length when `len` is too small.
 *
 * # Safety
 * `buf` must be valid for `len` doubles; other pointers must be valid.
 */
enum YkStatus yk_eigensystem_energies(const struct YkEigenSystem *eig,
                                      double *buf,
                                      size_t len,
                                      size_t *written);

/**
 * Thermal `<phi>` in the truncated space, at the model's `beta`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum YkStatus yk_eigensystem_phi(const struct YkEigenSystem *eig, double *out);

/**
 * Time-ordered `<phi(tau) phi(0)>` in the truncated space.
 *
 * # Safety
 * Pointers must be valid.
 */
enum YkStatus yk_eigensystem_two_point(const struct YkEigenSystem *eig, double tau, double *out);

/**
 * First-order `<phi>`: the zero-temperature loop under `scheme` when
 * `beta` is infinite, otherwise the thermal winding result.
 *
 * # Safety
 * Pointers must be valid.
 */
enum YkStatus yk_tadpole(const struct YkModel *model, enum YkScheme scheme, double *out);

/**
 * Mass shift and residue extracted from the order-`lambda^2` fermion self-energy.
 *
 * # Safety
 * Pointers must be valid.
 */
enum YkStatus yk_pole_decomposition(const struct YkModel *model, double *delta_mu, double *z1f);

/**
 * One ordering of a connected loop with bosonic Matsubara indices `momenta`.
 *
 * # Safety
 * `momenta` must be valid for `j` entries; outputs must be valid.
 */
enum YkStatus yk_connected_loop(const int64_t *momenta_ptr,
                                size_t j,
                                double mu,
                                double beta,
                                double *re,
                                double *im);

/**
 * Sum over the `(j-1)!` cyclic orderings of the insertions.
 *
 * # Safety
 * `momenta` must be valid for `j` entries; `out` must be valid.
 */
enum YkStatus yk_symmetrized_loop(const int64_t *momenta_ptr,
                                  size_t j,
                                  double mu,
                                  double beta,
                                  double *out);

/**
 * `<N(tau_1) ... N(tau_j)>` assembled from connected loops.
 *
 * # Safety
 * `out` must be valid.
 */
enum YkStatus yk_full_number_correlator(size_t j, double mu, double beta, double *out);

/**
 * Runs one Monte Carlo chain at the model's finite `beta`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum YkStatus yk_run_chain(const struct YkModel *model,
                           size_t n_tau,
                           size_t sweeps,
                           uint64_t seed,
                           struct YkChainSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* YUKAWA1D_H */
