#ifndef COHORT_TRENDS_H
#define COHORT_TRENDS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Values 1 to 3 match the CLI exit codes.
 */
typedef enum CtStatus {
  CT_STATUS_OK = 0,
  /**
   * Malformed or mismatched input data.
   */
  CT_STATUS_INPUT = 1,
  /**
   * Degenerate data, separation or a singular matrix.
   */
  CT_STATUS_NUMERICAL = 2,
  /**
   * Screening failure or inconsistent cohorts.
   */
  CT_STATUS_VALIDATION = 3,
  CT_STATUS_NULL_POINTER = 4,
  CT_STATUS_INVALID_UTF8 = 5,
  CT_STATUS_PANIC = 6,
} CtStatus;

/**
 * Opaque handle to a parsed score panel.
 */
typedef struct CtPanel CtPanel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, static storage.
 */
const char *ct_version(void);

/**
 * Copy of the calling thread's last error message, or NULL when the last
 * call succeeded. Free with `ct_string_free`.
 */
char *ct_last_error_message(void);

/**
 * Release a string returned by this library. NULL is ignored.
 */
void ct_string_free(char *s);

/**
 * Parse a long-format score CSV and a manifest CSV (both NUL-terminated
 * UTF-8) and keep the panel for `subject` (e.g. "mathematics").
 */
enum CtStatus ct_panel_parse(const char *score_csv,
                             const char *manifest_csv,
                             const char *subject,
                             struct CtPanel **out);

/**
 * Free a panel. NULL is ignored.
 */
void ct_panel_free(struct CtPanel *panel);

/**
 * Number of students, or 0 for NULL.
 */
size_t ct_panel_n_students(const struct CtPanel *panel);

/**
 * Number of tests, or 0 for NULL.
 */
size_t ct_panel_n_tests(const struct CtPanel *panel);

/**
 * Test id at chronological position `index`, or NULL. Free with `ct_string_free`.
 */
char *ct_panel_test_id(const struct CtPanel *panel, size_t index);

/**
 * Student id at sorted position `index`, or NULL. Free with `ct_string_free`.
 */
char *ct_panel_student_id(const struct CtPanel *panel, size_t index);

/**
 * Correct-answer ratios of every student on test `test_index`, written to
 * `out` (length `ct_panel_n_students`).
 */
enum CtStatus ct_panel_correct_ratios(const struct CtPanel *panel, size_t test_index, double *out);

/**
 * Pearson correlation with its two-sided p-value.
 */
enum CtStatus ct_pearson(const double *x, const double *y, size_t n, double *r, double *p);

/**
 * Deviation scores (mean 50, SD 10) of `raw`, written to `out`.
 */
enum CtStatus ct_deviation_scores(const double *raw, size_t n, double *out);

/**
 * VIFs of the `p` columns of a column-major `n × p` matrix.
 */
enum CtStatus ct_vif(const double *data, size_t n, size_t p, double *out);

/**
 * Screen a chain of `m` tests given its upper-triangle correlations
 * (row-major, `m(m-1)/2` values). `retained` receives 1/0 per test.
 */
enum CtStatus ct_screen_upper(const double *upper,
                              size_t m,
                              size_t n_students,
                              double theta_low,
                              size_t min_chain,
                              uint8_t *retained);

/**
 * k-means on `n` row-major points of dimension `dim`, best of `restarts`
 * seeds starting at `seed`.
 */
enum CtStatus ct_kmeans(const double *data,
                        size_t n,
                        size_t dim,
                        size_t k,
                        uint64_t seed,
                        size_t restarts,
                        size_t *assignment,
                        double *inertia);

/**
 * Logistic regression with intercept on a column-major `n × p` design.
 * `coef`, `se` and `pval` each receive `p + 1` values, intercept first.
 */
enum CtStatus ct_logistic_fit(const double *x,
                              const double *y,
                              size_t n,
                              size_t p,
                              double ridge,
                              double *coef,
                              double *se,
                              double *pval);

/**
 * Run every pipeline stage for a JSON config file. `out_dir` may be NULL to
 * use the config's output directory.
 */
enum CtStatus ct_run_all(const char *config_path, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COHORT_TRENDS_H */
