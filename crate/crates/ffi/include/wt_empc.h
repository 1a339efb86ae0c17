#ifndef WT_EMPC_H
#define WT_EMPC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum WtStatus {
  WT_STATUS_OK = 0,
  WT_STATUS_NULL_POINTER = 1,
  WT_STATUS_INVALID_ARGUMENT = 2,
  WT_STATUS_CONFIG = 3,
  WT_STATUS_INFEASIBLE = 4,
  WT_STATUS_SOLVER = 5,
  WT_STATUS_IO = 6,
  WT_STATUS_NUMERICAL = 7,
  WT_STATUS_PANIC = 8,
} WtStatus;

/**
 * Simulation configuration.
 */
typedef struct WtConfig WtConfig;

/**
 * One controller instance.
 */
typedef struct WtController WtController;

/**
 * Log and metrics of a finished closed-loop run.
 */
typedef struct WtRun WtRun;

/**
 * Actuator command, SI units.
 */
typedef struct WtCommand {
  double torque_g;
  double pitch;
  double p_r;
  double p_g;
  double k_pred;
  /**
   * Nonzero when the previous command was repeated.
   */
  int32_t held;
} WtCommand;

/**
 * Scalar summary of a run.
 */
typedef struct WtRunSummary {
  size_t steps;
  size_t plateaus;
  double energy_j;
  double mean_solve_time_s;
  double max_solve_time_s;
  size_t degraded_steps;
  size_t held_steps;
  double max_terminal_gap;
  /**
   * Nonzero when the run stopped early.
   */
  int32_t aborted;
} WtRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t wt_last_error(char *buf, size_t len);

/**
 * Default configuration (staircase 6 to 17 m/s, N_p = 100, multi-mode).
 */
struct WtConfig *wt_config_default(void);

/**
 * Parses a TOML configuration. Relative table paths resolve against the
 * working directory.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum WtStatus wt_config_parse(const char *text, struct WtConfig **out);

/**
 * Sets the prediction horizon.
 *
 * # Safety
 * `cfg` must come from this API.
 */
enum WtStatus wt_config_set_horizon(struct WtConfig *cfg, size_t horizon);

/**
 * Replaces the wind profile by a constant speed for `duration` seconds.
 *
 * # Safety
 * `cfg` must come from this API.
 */
enum WtStatus wt_config_set_constant_wind(struct WtConfig *cfg, double speed, double duration);

/**
 * # Safety
 * `cfg` must be null or come from this API, and not be used afterwards.
 */
void wt_config_free(struct WtConfig *cfg);

/**
 * Builds a controller for the configured turbine and tower.
 *
 * # Safety
 * `cfg` must come from this API and `out` be a valid pointer.
 */
enum WtStatus wt_controller_new(const struct WtConfig *cfg, struct WtController **out);

/**
 * Number of tower locations expected by `wt_controller_step`, base included.
 *
 * # Safety
 * `ctrl` must be null or come from this API.
 */
size_t wt_controller_locations(const struct WtController *ctrl);

/**
 * One control step from measured generator speed (rad/s) and tower
 * displacement / velocity at every location (m, m/s), at wind `v_w` (m/s).
 *
 * # Safety
 * `x_p` and `v_p` must hold `n` values; `out` must be valid.
 */
enum WtStatus wt_controller_step(struct WtController *ctrl,
                                 double omega_g,
                                 const double *x_p,
                                 const double *v_p,
                                 size_t n,
                                 double v_w,
                                 struct WtCommand *out);

/**
 * # Safety
 * `ctrl` must be null or come from this API, and not be used afterwards.
 */
void wt_controller_free(struct WtController *ctrl);

/**
 * Runs the configured closed-loop scenario.
 *
 * # Safety
 * `cfg` must come from this API and `out` be a valid pointer.
 */
enum WtStatus wt_simulate(const struct WtConfig *cfg, struct WtRun **out);

/**
 * # Safety
 * `run` must come from this API and `out` be valid.
 */
enum WtStatus wt_run_summary(const struct WtRun *run, struct WtRunSummary *out);

/**
 * Settled mean electrical power (W) of plateau `index`.
 *
 * # Safety
 * `run` must come from this API and `out` be valid.
 */
enum WtStatus wt_run_plateau_power(const struct WtRun *run, size_t index, double *out);

/**
 * Writes the time series as CSV.
 *
 * # Safety
 * `run` must come from this API and `path` be a NUL-terminated string.
 */
enum WtStatus wt_run_write_csv(const struct WtRun *run, const char *path);

/**
 * # Safety
 * `run` must be null or come from this API, and not be used afterwards.
 */
void wt_run_free(struct WtRun *run);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* WT_EMPC_H */
