#ifndef KVTHERM_H
#define KVTHERM_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible function.
 */
typedef enum KvStatus {
  KV_STATUS_OK = 0,
  KV_STATUS_NULL_POINTER = 1,
  KV_STATUS_INVALID_UTF8 = 2,
  KV_STATUS_NOT_FOUND = 3,
  KV_STATUS_PARSE = 4,
  KV_STATUS_VALIDATION = 5,
  KV_STATUS_SOLVER = 6,
  KV_STATUS_FINISHED = 7,
  KV_STATUS_BUFFER_TOO_SMALL = 8,
  KV_STATUS_IO = 9,
  KV_STATUS_PANIC = 10,
} KvStatus;

/**
 * Opaque simulation handle.
 */
typedef struct KvSim KvSim;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates a simulation from a preset name or a config file path.
 * `workers = 0` uses all cores.
 *
 * # Safety
 * `source` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KvStatus kv_sim_from_preset(const char *source, size_t workers, struct KvSim **out);

/**
 * Creates a simulation from TOML configuration text.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` a valid pointer.
 */
enum KvStatus kv_sim_from_toml(const char *text, size_t workers, struct KvSim **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `sim` must come from a constructor of this library and not be used afterwards.
 */
void kv_sim_free(struct KvSim *sim);

/**
 * Advances one time step. Returns `Finished` once all steps are done.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum KvStatus kv_sim_step(struct KvSim *sim);

/**
 * Runs the remaining steps.
 *
 * # Safety
 * `sim` must be a live handle.
 */
enum KvStatus kv_sim_run(struct KvSim *sim);

/**
 * Number of mesh nodes, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t kv_sim_num_nodes(const struct KvSim *sim);

/**
 * Completed steps, or 0 for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
size_t kv_sim_steps_done(const struct KvSim *sim);

/**
 * Current time, or NaN for a null handle.
 *
 * # Safety
 * `sim` must be null or a live handle.
 */
double kv_sim_time(const struct KvSim *sim);

/**
 * Dissipation and total internal energy of the last step (both 0 before the first).
 *
 * # Safety
 * `sim` must be a live handle; the outputs must be valid pointers.
 */
enum KvStatus kv_sim_last_energies(const struct KvSim *sim,
                                   double *dissipation,
                                   double *internal_energy);

/**
 * Copies nodal temperatures (`num_nodes` values).
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` writes.
 */
enum KvStatus kv_sim_temperature(const struct KvSim *sim, double *buf, size_t len);

/**
 * Copies deformed nodal positions, interleaved `x0 y0 x1 y1 ...` (`2 * num_nodes` values).
 *
 * # Safety
 * `sim` must be a live handle and `buf` valid for `len` writes.
 */
enum KvStatus kv_sim_positions(const struct KvSim *sim, double *buf, size_t len);

/**
 * Copies the calling thread's last error message, NUL-terminated and
 * truncated to `len`. Returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` writes.
 */
size_t kv_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* KVTHERM_H */
