#ifndef GGPLAB_H
#define GGPLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum GgpStatus {
  GGP_STATUS_OK = 0,
  GGP_STATUS_NULL_POINTER = 1,
  GGP_STATUS_INVALID_CONFIG = 2,
  GGP_STATUS_UNKNOWN_SUITE = 3,
  GGP_STATUS_BAD_THETA = 4,
  GGP_STATUS_INVALID_UTF8 = 5,
  GGP_STATUS_IO = 6,
  GGP_STATUS_INTERNAL = 7,
  GGP_STATUS_PANIC = 8,
} GgpStatus;

/**
 * Opaque run configuration.
 */
typedef struct GgpConfig GgpConfig;

/**
 * Opaque verification report.
 */
typedef struct GgpReport GgpReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Last error message on this thread, or null. Valid until the next failing call.
 */
const char *ggp_last_error(void);

/**
 * New configuration with default parameters and no suites.
 */
struct GgpConfig *ggp_config_new(void);

/**
 * # Safety
 * `cfg` must come from `ggp_config_new` and not be used afterwards.
 */
void ggp_config_free(struct GgpConfig *cfg);

/**
 * Sets one key, using the long flag names of the CLI (`suite`, `n`, `p`, `seed`, ...).
 *
 * # Safety
 * `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
 */
enum GgpStatus ggp_config_set(struct GgpConfig *cfg, const char *key, const char *value);

/**
 * Parses a flat `key = value` text block into the configuration.
 *
 * # Safety
 * `cfg` must be a live handle; `text` a NUL-terminated string.
 */
enum GgpStatus ggp_config_load_text(struct GgpConfig *cfg, const char *text);

/**
 * Validates and runs the configured suites. On success `*out` receives a report handle.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum GgpStatus ggp_run(const struct GgpConfig *cfg, struct GgpReport **out);

/**
 * # Safety
 * `rep` must come from `ggp_run` and not be used afterwards.
 */
void ggp_report_free(struct GgpReport *rep);

/**
 * 1 when no asserted check failed, 0 otherwise, -1 on a null handle.
 *
 * # Safety
 * `rep` must be a live handle or null.
 */
int32_t ggp_report_passed(const struct GgpReport *rep);

/**
 * # Safety
 * `rep` must be a live handle or null.
 */
size_t ggp_report_suite_count(const struct GgpReport *rep);

/**
 * Counts suites with the given status: 0 pass, 1 fail, 2 report-only, 3 skipped.
 *
 * # Safety
 * `rep` must be a live handle or null.
 */
size_t ggp_report_count_status(const struct GgpReport *rep, int32_t status);

/**
 * JSON rendering of the report; free with `ggp_string_free`.
 *
 * # Safety
 * `rep` must be a live handle or null.
 */
char *ggp_report_json(const struct GgpReport *rep);

/**
 * Markdown rendering of the report; free with `ggp_string_free`.
 *
 * # Safety
 * `rep` must be a live handle or null.
 */
char *ggp_report_markdown(const struct GgpReport *rep);

/**
 * Exponent record for (n, l, theta) as JSON with exact rationals; `theta` is "a/b" or a decimal.
 *
 * # Safety
 * `theta` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GgpStatus ggp_exponents_json(uint32_t n, uint32_t l, const char *theta, char **out);

/**
 * # Safety
 * `s` must come from this library and not be used afterwards.
 */
void ggp_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* GGPLAB_H */
