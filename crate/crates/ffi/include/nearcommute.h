#ifndef NEARCOMMUTE_H
#define NEARCOMMUTE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum NcStatus {
  NC_STATUS_OK = 0,
  NC_STATUS_NULL_POINTER = 1,
  NC_STATUS_DIM_MISMATCH = 2,
  NC_STATUS_NON_FINITE = 3,
  NC_STATUS_NOT_HERMITIAN = 4,
  NC_STATUS_NOT_UNITARY = 5,
  NC_STATUS_INVALID_INPUT = 6,
  NC_STATUS_HYPOTHESIS = 7,
  NC_STATUS_NUMERICAL = 8,
  NC_STATUS_BUDGET = 9,
  NC_STATUS_PANIC = 10,
  NC_STATUS_OTHER = 11,
} NcStatus;

/**
 * A square complex matrix.
 */
typedef struct NcMatrix NcMatrix;

/**
 * The result of a commuting-approximation run.
 */
typedef struct NcReport NcReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string.
 */
const char *nc_version(void);

/**
 * Copies the last error message of this thread into `buf` (nul-terminated,
 * truncated to `len`). Returns the full message length without the nul.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t nc_last_error(char *buf, size_t len);

/**
 * Static name of a status code.
 */
const char *nc_status_name(enum NcStatus status);

/**
 * Builds a `dim`×`dim` matrix from row-major real and imaginary parts.
 * `im` may be null for a real matrix.
 *
 * # Safety
 * `re` (and `im` when non-null) must point to `dim*dim` readable doubles;
 * `out` must be writable.
 */
enum NcStatus nc_matrix_new(size_t dim, const double *re, const double *im, struct NcMatrix **out);

/**
 * Dimension of a matrix, or 0 for null.
 *
 * # Safety
 * `m` must be null or a live handle.
 */
size_t nc_matrix_dim(const struct NcMatrix *m);

/**
 * Copies the entries row-major into `re` and `im` (either may be null).
 *
 * # Safety
 * `m` must be a live handle; non-null outputs must hold `dim*dim` doubles.
 */
enum NcStatus nc_matrix_read(const struct NcMatrix *m, double *re, double *im);

/**
 * Releases a matrix. Null is accepted.
 *
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void nc_matrix_free(struct NcMatrix *m);

/**
 * Commuting Hermitian approximation of a pair of Hermitian contractions.
 * A non-positive `gamma2` selects the default.
 *
 * # Safety
 * `a`, `b` must be live handles; `out` must be writable.
 */
enum NcStatus nc_commute_pair(const struct NcMatrix *a,
                              const struct NcMatrix *b,
                              double gamma2,
                              struct NcReport **out);

/**
 * New handles to the commuting outputs A′ and B′ (either output may be null).
 *
 * # Safety
 * `r` must be a live report handle.
 */
enum NcStatus nc_report_outputs(const struct NcReport *r,
                                struct NcMatrix **a_out,
                                struct NcMatrix **b_out);

/**
 * ‖A−A′‖, ‖B−B′‖ and ‖[A′,B′]‖ (any output may be null).
 *
 * # Safety
 * `r` must be a live report handle.
 */
enum NcStatus nc_report_distances(const struct NcReport *r,
                                  double *dist_a,
                                  double *dist_b,
                                  double *residual);

/**
 * 1 if every a-posteriori bound recorded in the report holds, 0 otherwise
 * or for null.
 *
 * # Safety
 * `r` must be null or a live report handle.
 */
int32_t nc_report_bounds_pass(const struct NcReport *r);

/**
 * Releases a report. Null is accepted.
 *
 * # Safety
 * `r` must be null or a handle not yet freed.
 */
void nc_report_free(struct NcReport *r);

/**
 * The n×n Voiculescu unitaries U (clock) and V (shift).
 *
 * # Safety
 * `u_out` and `v_out` must be writable.
 */
enum NcStatus nc_voiculescu(size_t n, struct NcMatrix **u_out, struct NcMatrix **v_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NEARCOMMUTE_H */
