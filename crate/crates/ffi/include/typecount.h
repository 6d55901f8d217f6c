#ifndef TYPECOUNT_H
#define TYPECOUNT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum TcStatus {
  TC_STATUS_OK = 0,
  TC_STATUS_NULL_POINTER = 1,
  TC_STATUS_INVALID_UTF8 = 2,
  TC_STATUS_PARSE = 3,
  TC_STATUS_VALIDATION = 4,
  // The measure violates a condition required by the computation.
  TC_STATUS_CONDITION = 5,
  TC_STATUS_NUMERICAL = 6,
  TC_STATUS_OUT_OF_RANGE = 7,
  TC_STATUS_BUFFER_TOO_SMALL = 8,
  TC_STATUS_PANIC = 9,
} TcStatus;

typedef struct TcMeasure TcMeasure;

typedef struct TcRateTable TcRateTable;

typedef struct TcTypeDistribution TcTypeDistribution;

// Integrability summary of a measure. Infinite integrals are reported as
// `INFINITY`.
typedef struct TcConditions {
  bool proper_frequencies;
  bool simple;
  double h1;
  double m0;
} TcConditions;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *tc_version(void);

// Message for the last failed call on this thread, or NULL. The pointer
// stays valid until the next library call on the same thread.
const char *tc_last_error(void);

// Parses and validates a measure given as JSON text.
//
// # Safety
// `json` must be NULL or a NUL-terminated string; `out` must be NULL or
// writable.
enum TcStatus tc_measure_from_json(const char *json, struct TcMeasure **out);

// # Safety
// `measure` must be NULL or a handle from [`tc_measure_from_json`] that has
// not been freed.
void tc_measure_free(struct TcMeasure *measure);

// # Safety
// `measure` must be a live handle; `out` must be writable.
enum TcStatus tc_measure_conditions(const struct TcMeasure *measure, struct TcConditions *out);

// Laplace exponent `Φ(η)` of the subordinator `-log S_t`.
//
// # Safety
// `measure` must be a live handle; `out` must be writable.
enum TcStatus tc_laplace_exponent(const struct TcMeasure *measure, double eta, double *out);

// # Safety
// `measure` must be a live handle; `out` must be writable.
enum TcStatus tc_rate_table_build(const struct TcMeasure *measure,
                                  size_t n_max,
                                  struct TcRateTable **out);

// Rate `g(m, k)` at which `m` blocks merge into `k`, for `1 <= k < m <= n_max`.
//
// # Safety
// `table` must be a live handle; `out` must be writable.
enum TcStatus tc_rate_table_rate(const struct TcRateTable *table, size_t m, size_t k, double *out);

// Total rate `g(m)` out of `m` blocks, for `2 <= m <= n_max`.
//
// # Safety
// `table` must be a live handle; `out` must be writable.
enum TcStatus tc_rate_table_total(const struct TcRateTable *table, size_t m, double *out);

// # Safety
// `table` must be NULL or a live handle.
void tc_rate_table_free(struct TcRateTable *table);

// Distribution of the number of types for every sample size up to `n`.
//
// # Safety
// `table` must be a live handle; `out` must be writable.
enum TcStatus tc_type_distribution(const struct TcRateTable *table,
                                   double r,
                                   size_t n,
                                   struct TcTypeDistribution **out);

// `P(K_m = k)` for `1 <= k <= m <= n`.
//
// # Safety
// `dist` must be a live handle; `out` must be writable.
enum TcStatus tc_type_distribution_prob(const struct TcTypeDistribution *dist,
                                        size_t m,
                                        size_t k,
                                        double *out);

// `E(K_m)` for `1 <= m <= n`.
//
// # Safety
// `dist` must be a live handle; `out` must be writable.
enum TcStatus tc_type_distribution_mean(const struct TcTypeDistribution *dist,
                                        size_t m,
                                        double *out);

// # Safety
// `dist` must be NULL or a live handle.
void tc_type_distribution_free(struct TcTypeDistribution *dist);

// `P(K_n = n)`, computed without building the full distribution.
//
// # Safety
// `table` must be a live handle; `out` must be writable.
enum TcStatus tc_all_singletons_probability(const struct TcRateTable *table,
                                            double r,
                                            size_t n,
                                            double *out);

// Writes `E(K^j)`, `j = 0..len-1`, of the almost sure limit `K` of
// `K_n / n` into `buf`. Fails with `TC_STATUS_CONDITION` when the measure
// has no such limit.
//
// # Safety
// `measure` must be a live handle; `buf` must hold `len` doubles.
enum TcStatus tc_limit_moments(const struct TcMeasure *measure, double r, double *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TYPECOUNT_H */
