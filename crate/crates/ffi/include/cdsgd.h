#ifndef CDSGD_H
#define CDSGD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every entry point.
 */
typedef enum CdsgdStatus {
  CdsgdStatus_Ok = 0,
  CdsgdStatus_NullArgument = 1,
  CdsgdStatus_InvalidUtf8 = 2,
  CdsgdStatus_InvalidConfig = 3,
  CdsgdStatus_RunFailed = 4,
  CdsgdStatus_Panic = 5,
} CdsgdStatus;

/**
 * Opaque parsed configuration.
 */
typedef struct CdsgdConfig CdsgdConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread. The pointer stays
 * valid until the next failing call on the same thread; do not free it.
 */
const char *cdsgd_last_error(void);

/**
 * Parses a TOML configuration string into an opaque handle.
 *
 * # Safety
 * `toml` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum CdsgdStatus cdsgd_config_parse(const char *toml, struct CdsgdConfig **out);

/**
 * Loads a TOML configuration from a file path.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum CdsgdStatus cdsgd_config_from_file(const char *path, struct CdsgdConfig **out);

/**
 * Overrides the master seed on a parsed configuration.
 *
 * # Safety
 * `cfg` must be a live handle from a `cdsgd_config_*` constructor.
 */
enum CdsgdStatus cdsgd_config_set_seed(struct CdsgdConfig *cfg, uint64_t seed);

/**
 * Returns the stable configuration hash as a hex string.
 *
 * # Safety
 * `cfg` must be a live handle and `out` a valid pointer.
 */
enum CdsgdStatus cdsgd_config_hash(const struct CdsgdConfig *cfg, char **out);

/**
 * Releases a configuration handle. Null is a no-op.
 *
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void cdsgd_config_free(struct CdsgdConfig *cfg);

/**
 * Runs the configured trajectory and returns the full record as JSON.
 *
 * # Safety
 * `cfg` must be a live handle and `out_json` a valid pointer.
 */
enum CdsgdStatus cdsgd_run_json(const struct CdsgdConfig *cfg, char **out_json);

/**
 * Computes the bound report for every algorithm kind and returns JSON.
 *
 * # Safety
 * `cfg` must be a live handle and `out_json` a valid pointer.
 */
enum CdsgdStatus cdsgd_bounds_json(const struct CdsgdConfig *cfg, char **out_json);

/**
 * Runs every algorithm spec in `specs` (space-separated, each in the CLI
 * `kind:key=val,...` form) on the shared configuration and returns the
 * comparison as JSON.
 *
 * # Safety
 * `cfg` must be a live handle, `specs` a valid NUL-terminated string, and
 * `out_json` a valid pointer.
 */
enum CdsgdStatus cdsgd_compare_json(const struct CdsgdConfig *cfg,
                                    const char *specs,
                                    char **out_json);

/**
 * Sweeps one hyper-parameter ("alpha", "omega", or "tau") over `values`
 * and returns the sweep report as JSON.
 *
 * # Safety
 * `cfg` must be a live handle, `param` a valid NUL-terminated string,
 * `values` a readable array of `n_values` doubles, and `out_json` a valid
 * pointer.
 */
enum CdsgdStatus cdsgd_sweep_json(const struct CdsgdConfig *cfg,
                                  const char *param,
                                  const double *values,
                                  uintptr_t n_values,
                                  char **out_json);

/**
 * Releases a string returned through an out-parameter. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a string produced by this library, freed once.
 */
void cdsgd_string_free(char *s);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* CDSGD_H */
