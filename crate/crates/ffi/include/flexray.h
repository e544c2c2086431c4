#ifndef FLEXRAY_FFI_H
#define FLEXRAY_FFI_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Non-negative values are outcomes, negative values errors.
 */
typedef enum FlexrayStatus {
  FLEXRAY_STATUS_OK = 0,
  /**
   * A predicate, assumption or campaign found a violation.
   */
  FLEXRAY_STATUS_VIOLATED = 1,
  /**
   * A monitor's precondition did not hold.
   */
  FLEXRAY_STATUS_REFUSED = 2,
  /**
   * The simulation hit a bus collision; the partial trace is returned.
   */
  FLEXRAY_STATUS_COLLISION = 3,
  FLEXRAY_STATUS_NULL_ARGUMENT = -1,
  FLEXRAY_STATUS_INVALID_UTF8 = -2,
  FLEXRAY_STATUS_PARSE_ERROR = -3,
  FLEXRAY_STATUS_SHAPE_ERROR = -4,
  FLEXRAY_STATUS_INVALID_CONFIG = -5,
  FLEXRAY_STATUS_UNKNOWN_PREDICATE = -6,
  FLEXRAY_STATUS_PANIC = -99,
} FlexrayStatus;

/**
 * Opaque cluster configuration.
 */
typedef struct FlexrayCluster FlexrayCluster;

/**
 * Opaque simulation trace.
 */
typedef struct FlexrayTrace FlexrayTrace;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *flexray_last_error(void);

/**
 * Static version string.
 */
const char *flexray_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void flexray_string_free(char *s);

/**
 * Parses `{"nodes":[{"schedule":[..],"cycle_length":L},..]}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
enum FlexrayStatus flexray_cluster_from_json(const char *json, struct FlexrayCluster **out);

/**
 * # Safety
 * `cluster` must be NULL or a handle from [`flexray_cluster_from_json`].
 */
void flexray_cluster_free(struct FlexrayCluster *cluster);

/**
 * Number of nodes, 0 for NULL.
 *
 * # Safety
 * `cluster` must be NULL or a live handle.
 */
size_t flexray_cluster_node_count(const struct FlexrayCluster *cluster);

/**
 * Static assumption check. Writes a JSON array of verdicts to `out_json`
 * and returns `Ok` or `Violated`.
 *
 * # Safety
 * `cluster` must be a live handle; `out_json` must be writable.
 */
enum FlexrayStatus flexray_cluster_validate(const struct FlexrayCluster *cluster, char **out_json);

/**
 * Simulates `horizon` ticks with inputs generated from `seed`.
 *
 * On `Collision` a trace is still written to `out` (truncated unless
 * `continue_on_collision`).
 *
 * # Safety
 * `cluster` must be a live handle; `out` must be writable.
 */
enum FlexrayStatus flexray_simulate_seeded(const struct FlexrayCluster *cluster,
                                           uint64_t seed,
                                           uint64_t horizon,
                                           bool continue_on_collision,
                                           struct FlexrayTrace **out);

/**
 * Simulates with inputs given as JSONL, one `{"t":..,"returns":[..]}`
 * object per tick.
 *
 * # Safety
 * `cluster` must be a live handle, `inputs_jsonl` a NUL-terminated string
 * and `out` writable.
 */
enum FlexrayStatus flexray_simulate_inputs(const struct FlexrayCluster *cluster,
                                           const char *inputs_jsonl,
                                           uint64_t horizon,
                                           bool continue_on_collision,
                                           struct FlexrayTrace **out);

/**
 * # Safety
 * `jsonl` must be a NUL-terminated string; `out` must be writable.
 */
enum FlexrayStatus flexray_trace_from_jsonl(const char *jsonl, struct FlexrayTrace **out);

/**
 * # Safety
 * `trace` must be a live handle; `out_jsonl` must be writable.
 */
enum FlexrayStatus flexray_trace_to_jsonl(const struct FlexrayTrace *trace, char **out_jsonl);

/**
 * Number of ticks in the trace, 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
uint64_t flexray_trace_horizon(const struct FlexrayTrace *trace);

/**
 * # Safety
 * `trace` must be NULL or a handle from this library.
 */
void flexray_trace_free(struct FlexrayTrace *trace);

/**
 * Evaluates one named predicate (`frame_transmission`, `broadcast`,
 * `send`, `receive`, `msg_bounds`, `self_exclusion`, `bus_conservation`).
 * Writes `{"predicate":..,"holds":..,"violation":..,"refused":..}`.
 *
 * # Safety
 * Handles must be live, `predicate` NUL-terminated, `out_json` writable.
 */
enum FlexrayStatus flexray_check(const struct FlexrayTrace *trace,
                                 const struct FlexrayCluster *cluster,
                                 const char *predicate,
                                 char **out_json);

/**
 * Runs a campaign described by a JSON `CampaignConfig` and writes the
 * report. Returns `Violated` iff the report lists failures.
 *
 * # Safety
 * `config_json` must be NUL-terminated; `out_report` must be writable.
 */
enum FlexrayStatus flexray_run_campaign(const char *config_json, size_t jobs, char **out_report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FLEXRAY_FFI_H */
