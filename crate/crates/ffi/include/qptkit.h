#ifndef QPTKIT_H
#define QPTKIT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  QPT_BOUNDARY_OPEN = 0,
  QPT_BOUNDARY_PERIODIC = 1,
} QptBoundary;

/**
 * Result codes shared by every fallible function.
 */
typedef enum {
  QPT_STATUS_OK = 0,
  QPT_STATUS_NULL_POINTER = 1,
  QPT_STATUS_INVALID_ARGUMENT = 2,
  QPT_STATUS_CONFIG = 3,
  /**
   * Singular systems, contract violations, dimension mismatches.
   */
  QPT_STATUS_NUMERICAL = 4,
  QPT_STATUS_IO = 5,
  /**
   * The caller's buffer is too small; the required length is reported.
   */
  QPT_STATUS_BUFFER_TOO_SMALL = 6,
  QPT_STATUS_PANIC = 7,
} QptStatus;

/**
 * Process matrix handle.
 */
typedef struct QptChi QptChi;

/**
 * Circuit handle.
 */
typedef struct QptCircuit QptCircuit;

/**
 * Simulated noisy executor handle.
 */
typedef struct QptExecutor QptExecutor;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *qpt_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next qptkit call on the same thread.
 */
const char *qpt_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void qpt_string_free(char *s);

/**
 * Trotter circuit of the Heisenberg chain, `order` 1 or 2, `steps` time steps.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
QptStatus qpt_circuit_trotter(uint32_t order,
                              size_t num_qubits,
                              QptBoundary bc,
                              double t,
                              size_t steps,
                              QptCircuit **out);

/**
 * Brickwall circuit with `len` parameters.
 *
 * # Safety
 * `theta` must point to `len` doubles; `out` must be valid.
 */
QptStatus qpt_circuit_brickwall(size_t num_qubits,
                                size_t layers,
                                const double *theta,
                                size_t len,
                                QptCircuit **out);

/**
 * Parses the OpenQASM 3 subset written by [`qpt_circuit_to_qasm`].
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid.
 */
QptStatus qpt_circuit_from_qasm(const char *text, QptCircuit **out);

/**
 * # Safety
 * `c` must be NULL or a handle from this library, freed at most once.
 */
void qpt_circuit_free(QptCircuit *c);

/**
 * Qubit count, 0 for NULL.
 *
 * # Safety
 * `c` must be NULL or a live handle.
 */
size_t qpt_circuit_num_qubits(const QptCircuit *c);

/**
 * CNOT count after lowering, 0 for NULL.
 *
 * # Safety
 * `c` must be NULL or a live handle.
 */
size_t qpt_circuit_cnot_count(const QptCircuit *c);

/**
 * Gate-level OpenQASM 3; free the result with [`qpt_string_free`].
 *
 * # Safety
 * `c` must be a live handle and `out` valid.
 */
QptStatus qpt_circuit_to_qasm(const QptCircuit *c, char **out);

/**
 * Approximation error ε of `c` against `exp(-iHt)`.
 *
 * # Safety
 * `c` must be a live handle and `out` valid.
 */
QptStatus qpt_epsilon(const QptCircuit *c, QptBoundary bc, double t, double *out);

/**
 * Executor with depolarizing gate noise and readout flips. SPAM noise is
 * applied when `noisy_spam` is nonzero.
 *
 * # Safety
 * `out` must be valid.
 */
QptStatus qpt_executor_new(double p1,
                           double p2,
                           double p_ro,
                           bool noisy_spam,
                           uint64_t seed,
                           QptExecutor **out);

/**
 * # Safety
 * `e` must be NULL or a handle from this library, freed at most once.
 */
void qpt_executor_free(QptExecutor *e);

/**
 * Full process tomography of `c` (at most 3 qubits); `shots == 0` uses
 * exact expectation values.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
QptStatus qpt_full_qpt(const QptExecutor *exec, const QptCircuit *c, size_t shots, QptChi **out);

/**
 * χ of the exact propagator `exp(-iHt)`.
 *
 * # Safety
 * `out` must be valid.
 */
QptStatus qpt_chi_ideal(size_t num_qubits, QptBoundary bc, double t, QptChi **out);

/**
 * # Safety
 * `chi` must be NULL or a handle from this library, freed at most once.
 */
void qpt_chi_free(QptChi *chi);

/**
 * Side length `4^L` of χ, 0 for NULL.
 *
 * # Safety
 * `chi` must be NULL or a live handle.
 */
size_t qpt_chi_dim(const QptChi *chi);

/**
 * Entry `χ_mn`.
 *
 * # Safety
 * `chi` must be live; `re` and `im` valid.
 */
QptStatus qpt_chi_get(const QptChi *chi, size_t m, size_t n, double *re, double *im);

/**
 * `Re Tr(χ_ideal† χ_exp)`.
 *
 * # Safety
 * Handles must be live and `out` valid.
 */
QptStatus qpt_process_fidelity(const QptChi *ideal, const QptChi *exp, double *out);

/**
 * Eigenvalues of the superoperator of `chi`, sorted by argument.
 *
 * `re` and `im` receive up to `cap` values; `len` always receives the
 * total count, and `QPT_STATUS_BUFFER_TOO_SMALL` is returned if `cap` is
 * short. Passing `cap == 0` with NULL buffers queries the size.
 *
 * # Safety
 * `re` and `im` must hold `cap` doubles; `len` must be valid.
 */
QptStatus qpt_chi_spectrum(const QptChi *chi, double *re, double *im, size_t cap, size_t *len);

/**
 * Runs one experiment pipeline from TOML config text. `kind` is one of
 * `compress`, `infidelity_scan`, `full_qpt`, `sqpt`, `twirl`, `spectrum`,
 * `export_qasm`. The result record is returned as JSON; free it with
 * [`qpt_string_free`].
 *
 * # Safety
 * `config_toml` and `kind` must be NUL-terminated; `out` valid.
 */
QptStatus qpt_run_experiment(const char *config_toml, const char *kind, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QPTKIT_H */
