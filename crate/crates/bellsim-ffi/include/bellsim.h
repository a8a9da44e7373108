/* C interface for the bellsim entanglement-protocol simulator. */

#ifndef BELLSIM_H
#define BELLSIM_H

/* Generated by cbindgen from crates/bellsim-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code of a C-ABI call. `Ok` is zero; configuration and runtime
 * failures mirror the CLI exit codes 2 and 3.
 */
typedef enum BellsimStatus {
  BELLSIM_STATUS_OK = 0,
  BELLSIM_STATUS_NULL_ARGUMENT = 1,
  BELLSIM_STATUS_CONFIG_ERROR = 2,
  BELLSIM_STATUS_RUNTIME_ERROR = 3,
  BELLSIM_STATUS_INVALID_UTF8 = 4,
  BELLSIM_STATUS_IO_ERROR = 5,
} BellsimStatus;

/**
 * Opaque experiment configuration handle.
 */
typedef struct BellsimConfig BellsimConfig;

/**
 * Opaque result-table handle.
 */
typedef struct BellsimTable BellsimTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Version string of the library; statically allocated, do not free.
 */
const char *bellsim_version(void);

/**
 * Message describing the most recent failure on this thread. The pointer
 * stays valid until the next failing call on the same thread; do not
 * free it.
 */
const char *bellsim_last_error_message(void);

/**
 * Creates a configuration with the built-in defaults. Free with
 * [`bellsim_config_free`].
 */
struct BellsimConfig *bellsim_config_new(void);

/**
 * Loads a configuration file.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string and `out` a valid
 * destination pointer. On success `*out` owns a new handle.
 */
enum BellsimStatus bellsim_config_load(const char *path, struct BellsimConfig **out);

/**
 * Parses configuration text (same format as a configuration file).
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid
 * destination pointer. On success `*out` owns a new handle.
 */
enum BellsimStatus bellsim_config_parse(const char *text, struct BellsimConfig **out);

/**
 * Applies one `key = value` assignment to a configuration, using the
 * configuration-file vocabulary (e.g. `scenario`, `seed`,
 * `trials_per_point`, `eps_b_plus`).
 *
 * # Safety
 * `config` must be a live handle from this library; `key` and `value`
 * must be valid NUL-terminated strings.
 */
enum BellsimStatus bellsim_config_set(struct BellsimConfig *config,
                                      const char *key,
                                      const char *value);

/**
 * Releases a configuration handle. Passing null is a no-op.
 *
 * # Safety
 * `config` must be null or a live handle from this library; it must not
 * be used afterwards.
 */
void bellsim_config_free(struct BellsimConfig *config);

/**
 * Derives the effective two-photon state of a configuration and writes
 * its mixing angle (radians), relative phase (radians), and pair
 * probability per trial.
 *
 * # Safety
 * `config` must be a live handle; output pointers must be valid or null
 * (null outputs are skipped).
 */
enum BellsimStatus bellsim_effective_state(const struct BellsimConfig *config,
                                           double *eta_f_out,
                                           double *phi_f_out,
                                           double *p_pair_out);

/**
 * Closed-form correlation `E(θ_A, θ_B)` of the two-photon state with
 * mixing angle `eta_f` and phase `phi_f` (radians), at analyzer
 * rotations in degrees and the given visibility.
 */
double bellsim_analytic_correlation(double eta_f,
                                    double phi_f,
                                    double theta_a_deg,
                                    double theta_b_deg,
                                    double visibility);

/**
 * Finds the analyzer angles maximizing the Bell parameter of the state.
 * `angles_deg_out` receives (θ_A, θ_A', θ_B, θ_B') in degrees.
 *
 * # Safety
 * `angles_deg_out`, when non-null, must point to at least four doubles;
 * `s_out` must be valid or null.
 */
enum BellsimStatus bellsim_optimal_angles(double eta_f,
                                          double phi_f,
                                          double visibility,
                                          double *angles_deg_out,
                                          double *s_out);

/**
 * Runs the configuration's scenario and returns a result table. Free the
 * table with [`bellsim_table_free`].
 *
 * # Safety
 * `config` must be a live handle and `out` a valid destination pointer.
 */
enum BellsimStatus bellsim_run_scenario(const struct BellsimConfig *config,
                                        struct BellsimTable **out);

/**
 * Number of rows in a result table.
 *
 * # Safety
 * `table` must be a live handle; null yields zero.
 */
uintptr_t bellsim_table_rows(const struct BellsimTable *table);

/**
 * Extracts the Bell parameter row of a `chsh` or `oracle` table. Writes
 * S and its uncertainty (NaN when the table carries no sampling
 * uncertainty, as in oracle output).
 *
 * # Safety
 * `table` must be a live handle; output pointers must be valid or null.
 */
enum BellsimStatus bellsim_table_bell(const struct BellsimTable *table,
                                      double *s_out,
                                      double *sigma_out);

/**
 * Renders the table as CSV. The returned string must be released with
 * [`bellsim_string_free`].
 *
 * # Safety
 * `table` must be a live handle.
 */
char *bellsim_table_to_csv(const struct BellsimTable *table);

/**
 * Writes the table as CSV to `path`.
 *
 * # Safety
 * `table` must be a live handle and `path` a valid NUL-terminated string.
 */
enum BellsimStatus bellsim_table_write_csv(const struct BellsimTable *table, const char *path);

/**
 * Releases a result-table handle. Passing null is a no-op.
 *
 * # Safety
 * `table` must be null or a live handle; it must not be used afterwards.
 */
void bellsim_table_free(struct BellsimTable *table);

/**
 * Releases a string returned by [`bellsim_table_to_csv`]. Passing null
 * is a no-op.
 *
 * # Safety
 * `s` must be null or a string allocated by this library; it must not be
 * used afterwards.
 */
void bellsim_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BELLSIM_H */
