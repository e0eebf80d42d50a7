#ifndef PRIVROUTE_H
#define PRIVROUTE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PrStatus {
  PR_STATUS_OK = 0,
  PR_STATUS_NULL_POINTER = 1,
  PR_STATUS_INVALID_UTF8 = 2,
  PR_STATUS_PARSE = 3,
  PR_STATUS_INVALID_ARGUMENT = 4,
  PR_STATUS_INFEASIBLE = 5,
  PR_STATUS_EXHAUSTED = 6,
  PR_STATUS_IO = 7,
  PR_STATUS_PANIC = 8,
} PrStatus;

typedef struct PrCounter PrCounter;

/**
 * Result of one engine run.
 */
typedef struct PrOutcome PrOutcome;

/**
 * Parsed and validated scenario.
 */
typedef struct PrScenario PrScenario;

typedef struct PrDims {
  size_t n;
  size_t m;
  size_t max_route_len;
  double sensitivity;
} PrDims;

typedef struct PrParams {
  uint64_t t;
  uint64_t k;
  double epsilon_prime;
  double count_error;
  double delta_t;
  bool feasible;
  double eta;
  double eta_prime;
} PrParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *pr_last_error_message(void);

/**
 * Parses scenario text.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum PrStatus pr_scenario_parse(const char *text, struct PrScenario **out);

/**
 * Reads and parses a scenario file.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum PrStatus pr_scenario_load(const char *path, struct PrScenario **out);

/**
 * # Safety
 * `scenario` must come from `pr_scenario_parse`/`pr_scenario_load` or be NULL.
 */
void pr_scenario_free(struct PrScenario *scenario);

/**
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum PrStatus pr_scenario_dims(const struct PrScenario *scenario, struct PrDims *out);

/**
 * Derived private-engine parameters. An infeasible α is reported through
 * `feasible`, not as an error.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum PrStatus pr_params_derive(const struct PrScenario *scenario,
                               double alpha,
                               double epsilon,
                               double beta,
                               struct PrParams *out);

/**
 * Exact dynamics with the default schedule for `alpha`.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum PrStatus pr_run_exact(const struct PrScenario *scenario, double alpha, struct PrOutcome **out);

/**
 * Private dynamics. Returns `PR_STATUS_INFEASIBLE` when α fails the gate.
 *
 * # Safety
 * `scenario` must be a live handle; `out` must be writable.
 */
enum PrStatus pr_run_private(const struct PrScenario *scenario,
                             double epsilon,
                             double beta,
                             double alpha,
                             uint64_t seed,
                             struct PrOutcome **out);

/**
 * # Safety
 * `outcome` must come from a `pr_run_*` call or be NULL.
 */
void pr_outcome_free(struct PrOutcome *outcome);

/**
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum PrStatus pr_outcome_converged(const struct PrOutcome *outcome, bool *out);

/**
 * Exact max regret of the final profile (or the halted one after a failure).
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum PrStatus pr_outcome_max_regret(const struct PrOutcome *outcome, double *out);

/**
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum PrStatus pr_outcome_turns(const struct PrOutcome *outcome, uint64_t *out);

/**
 * Accepted moves of `player`.
 *
 * # Safety
 * `outcome` must be a live handle; `out` must be writable.
 */
enum PrStatus pr_outcome_move_count(const struct PrOutcome *outcome, size_t player, uint64_t *out);

/**
 * New binary-mechanism counter. Pass `INFINITY` as `epsilon_prime` for a
 * noiseless counter.
 *
 * # Safety
 * `out` must be writable.
 */
enum PrStatus pr_counter_new(uint64_t budget,
                             double epsilon_prime,
                             uint64_t seed,
                             struct PrCounter **out);

/**
 * Feeds one symbol in {-1, 0, 1} and writes the noisy count.
 *
 * # Safety
 * `counter` must be a live handle; `out` must be writable.
 */
enum PrStatus pr_counter_feed(struct PrCounter *counter, int8_t symbol, double *out);

/**
 * # Safety
 * `counter` must come from `pr_counter_new` or be NULL.
 */
void pr_counter_free(struct PrCounter *counter);

/**
 * High-probability counter error bound.
 *
 * # Safety
 * `out` must be writable.
 */
enum PrStatus pr_error_bound(uint64_t stream_len,
                             double beta_prime,
                             double epsilon_prime,
                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PRIVROUTE_H */
