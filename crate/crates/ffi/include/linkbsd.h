#ifndef LINKBSD_H
#define LINKBSD_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define LB_RULE_RX_NO_AMP 1

#define LB_RULE_PREAMP 2

#define LB_RULE_RX_WITH_AMP 4

typedef enum LbStatus {
  LB_STATUS_OK = 0,
  LB_STATUS_NULL_POINTER = 1,
  LB_STATUS_INVALID_UTF8 = 2,
  /**
   * Bad configuration, sequence or argument.
   */
  LB_STATUS_INVALID_ARGUMENT = 3,
  /**
   * Degenerate or malformed data.
   */
  LB_STATUS_DATA_ERROR = 4,
  LB_STATUS_PANIC = 5,
} LbStatus;

/**
 * Component library handle.
 */
typedef struct LbLibrary LbLibrary;

/**
 * Threshold rule set handle.
 */
typedef struct LbRules LbRules;

typedef struct LbBer {
  double prob;
  /**
   * Exact even when `prob` underflows.
   */
  double log10;
} LbBer;

typedef struct LbVerdict {
  bool pass;
  double rx_dbm;
  /**
   * NaN when the design has no amplifier.
   */
  double preamp_dbm;
  double min_margin_db;
  /**
   * Bitwise OR of `LB_RULE_*` for every violated floor.
   */
  uint32_t failed_rules;
} LbVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *lb_last_error(void);

/**
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void lb_string_free(char *s);

/**
 * Library calibrated on the built-in no-amplifier table.
 */
struct LbLibrary *lb_library_default(void);

/**
 * Parses a library config document (same format as the `--library` file).
 *
 * # Safety
 * `json` must be a NUL-terminated string; the out pointer must be writable.
 */
enum LbStatus lb_library_from_json(const char *json, struct LbLibrary **out_lib);

/**
 * # Safety
 * `lib` must come from this library and not have been freed.
 */
void lb_library_free(struct LbLibrary *lib);

struct LbRules *lb_rules_default(void);

/**
 * Reads the `rules` object of a config document; missing fields keep defaults.
 *
 * # Safety
 * `json` must be a NUL-terminated string; the out pointer must be writable.
 */
enum LbStatus lb_rules_from_json(const char *json, struct LbRules **out_rules);

/**
 * # Safety
 * `rules` must come from this library and not have been freed.
 */
void lb_rules_free(struct LbRules *rules);

/**
 * # Safety
 * `out_ber` must be writable.
 */
enum LbStatus lb_ber_from_q(double q, struct LbBer *out_ber);

/**
 * Fits the two-level mixture to `len` amplitudes and reports Q and BER.
 *
 * # Safety
 * `samples` must point to `len` readable doubles; the out pointers must be writable.
 */
enum LbStatus lb_estimate_ber(const double *samples,
                              size_t len,
                              double *out_q,
                              struct LbBer *out_ber);

/**
 * Propagates and classifies one design. `right` may be NULL; `amp_gain_db`
 * NaN means no amplifier.
 *
 * # Safety
 * Handles must be live; strings NUL-terminated; `out_verdict` writable.
 */
enum LbStatus lb_classify(const struct LbLibrary *lib,
                          const struct LbRules *rules,
                          const char *left,
                          const char *right,
                          double amp_gain_db,
                          double launch_dbm,
                          double wavelength_nm,
                          struct LbVerdict *out_verdict);

/**
 * Learns a decision stump on a built-in table (`"table1"` or `"table2"`)
 * and returns it as JSON.
 *
 * # Safety
 * Strings NUL-terminated; `out_json` writable. Free the result with [`lb_string_free`].
 */
enum LbStatus lb_learn_stump(const char *table,
                             const char *feature,
                             double tolerance_log10,
                             char **out_json);

/**
 * Explores a design space (JSON, same format as the `explore` command) and
 * returns the ranked results as CSV.
 *
 * # Safety
 * Handles must be live; `space_json` NUL-terminated; `out_csv` writable.
 * Free the result with [`lb_string_free`].
 */
enum LbStatus lb_explore(const struct LbLibrary *lib,
                         const struct LbRules *rules,
                         const char *space_json,
                         char **out_csv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LINKBSD_H */
