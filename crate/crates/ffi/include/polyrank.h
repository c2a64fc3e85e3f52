#ifndef POLYRANK_H
#define POLYRANK_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PrStatus {
  PR_STATUS_OK = 0,
  PR_STATUS_NULL_POINTER = 1,
  PR_STATUS_INVALID_UTF8 = 2,
  PR_STATUS_PARSE_ERROR = 3,
  PR_STATUS_ANALYSIS_ERROR = 4,
  PR_STATUS_CONFIG_REJECTED = 5,
  PR_STATUS_OUT_OF_RANGE = 6,
  PR_STATUS_PANIC = 7,
} PrStatus;

typedef struct PrAnalysis PrAnalysis;

typedef struct PrMachine PrMachine;

typedef struct PrNest PrNest;

typedef struct PrRanking PrRanking;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next call on the same thread.
 */
const char *pr_last_error(void);

/**
 * # Safety
 * `s` must be null or a string returned by this library.
 */
void pr_string_free(char *s);

/**
 * Parses a nest description.
 *
 * # Safety
 * `src` must be a valid C string and `out` a valid pointer.
 */
enum PrStatus pr_nest_parse(const char *src, struct PrNest **out);

/**
 * Builds the convolution nest from `conv` or `conv:nImg,...,GEMM_BLOCK`.
 *
 * # Safety
 * `spec` must be a valid C string and `out` a valid pointer.
 */
enum PrStatus pr_nest_preset(const char *spec, struct PrNest **out);

/**
 * # Safety
 * `nest` must be null or a handle from this library, not yet freed.
 */
void pr_nest_free(struct PrNest *nest);

/**
 * Source text of the nest after `recipe` (`identity`, `perm=...;tile=...`).
 *
 * # Safety
 * Pointers must be valid; `*out` receives a string for `pr_string_free`.
 */
enum PrStatus pr_nest_emit(const struct PrNest *nest, const char *recipe, char **out);

/**
 * The built-in machine description.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum PrStatus pr_machine_default(struct PrMachine **out);

/**
 * # Safety
 * `src` must be a valid C string and `out` a valid pointer.
 */
enum PrStatus pr_machine_parse(const char *src, struct PrMachine **out);

/**
 * # Safety
 * `m` must be null or a handle from this library, not yet freed.
 */
void pr_machine_free(struct PrMachine *m);

/**
 * Dependences, working sets, placement and cost of a nest.
 *
 * # Safety
 * Handles must be live; `out` must be a valid pointer.
 */
enum PrStatus pr_analyze(const struct PrNest *nest,
                         const struct PrMachine *machine,
                         struct PrAnalysis **out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum PrStatus pr_analysis_dependence_count(const struct PrAnalysis *a, size_t *out);

/**
 * Minimum and maximum working set of dependence `index`.
 *
 * # Safety
 * Pointers must be valid.
 */
enum PrStatus pr_analysis_working_set(const struct PrAnalysis *a,
                                      size_t index,
                                      uint64_t *ws_min,
                                      uint64_t *ws_max);

/**
 * Label of dependence `index`, such as `RAR A[i][k] -> A[i][k]`.
 *
 * # Safety
 * Pointers must be valid; `*out` receives a string for `pr_string_free`.
 */
enum PrStatus pr_analysis_dependence_label(const struct PrAnalysis *a, size_t index, char **out);

/**
 * Exact cost as a decimal or `p/q` string.
 *
 * # Safety
 * Pointers must be valid; `*out` receives a string for `pr_string_free`.
 */
enum PrStatus pr_analysis_cost(const struct PrAnalysis *a, char **out);

/**
 * The same text the `analyze` command prints.
 *
 * # Safety
 * Pointers must be valid; `*out` receives a string for `pr_string_free`.
 */
enum PrStatus pr_analysis_report(const struct PrAnalysis *a, char **out);

/**
 * # Safety
 * `a` must be null or a handle from this library, not yet freed.
 */
void pr_analysis_free(struct PrAnalysis *a);

/**
 * Generates the variants described by `variants` (a variant configuration
 * document; null means the identity only) and ranks them by cost.
 *
 * # Safety
 * Handles must be live, `variants` null or a valid C string, `out` valid.
 */
enum PrStatus pr_rank(const struct PrNest *nest,
                      const struct PrMachine *machine,
                      const char *variants,
                      struct PrRanking **out);

/**
 * # Safety
 * Pointers must be valid.
 */
enum PrStatus pr_ranking_count(const struct PrRanking *r, size_t *out);

/**
 * Variant id at rank `position` (0 is best).
 *
 * # Safety
 * Pointers must be valid; `*out` receives a string for `pr_string_free`.
 */
enum PrStatus pr_ranking_id(const struct PrRanking *r, size_t position, char **out);

/**
 * Cost of the variant at rank `position`.
 *
 * # Safety
 * Pointers must be valid; `*out` receives a string for `pr_string_free`.
 */
enum PrStatus pr_ranking_cost(const struct PrRanking *r, size_t position, char **out);

/**
 * Source of the variant at rank `position`, with the microkernel restored.
 *
 * # Safety
 * Pointers must be valid; `*out` receives a string for `pr_string_free`.
 */
enum PrStatus pr_ranking_source(const struct PrRanking *r, size_t position, char **out);

/**
 * # Safety
 * `r` must be null or a handle from this library, not yet freed.
 */
void pr_ranking_free(struct PrRanking *r);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POLYRANK_H */
