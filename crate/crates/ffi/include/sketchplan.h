#ifndef SKETCHPLAN_H
#define SKETCHPLAN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum SpStatus {
  SP_STATUS_OK = 0,
  SP_STATUS_NULL_ARGUMENT = 1,
  SP_STATUS_INVALID_UTF8 = 2,
  SP_STATUS_INVALID_JSON = 3,
  SP_STATUS_UNKNOWN_TASK = 4,
  SP_STATUS_UNKNOWN_NAME = 5,
  SP_STATUS_SCENE_FAILURE = 6,
  SP_STATUS_PROGRAM_ERROR = 7,
  /**
   * The solver used its whole budget; the outcome JSON is still written.
   */
  SP_STATUS_EXHAUSTED = 8,
  SP_STATUS_BACKEND_ERROR = 9,
  SP_STATUS_PANIC = 10,
} SpStatus;

/**
 * Opaque configuration handle.
 */
typedef struct SpConfig SpConfig;

/**
 * Opaque world state handle.
 */
typedef struct SpWorld SpWorld;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. The pointer stays
 * valid until the next call into this library from the same thread.
 */
const char *sp_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void sp_string_free(char *s);

/**
 * Library version, statically allocated.
 */
const char *sp_version(void);

/**
 * # Safety
 * `out` must be valid for writes.
 */
enum SpStatus sp_config_default(struct SpConfig **out);

/**
 * Default configuration with the fields present in `json` overridden.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum SpStatus sp_config_from_json(const char *json, struct SpConfig **out);

/**
 * # Safety
 * `c` must come from `sp_config_*` and not have been freed. Null is ignored.
 */
void sp_config_free(struct SpConfig *c);

/**
 * Seeded initial scene for a catalog task. `config` may be null.
 *
 * # Safety
 * Pointers must be valid; `task` NUL-terminated.
 */
enum SpStatus sp_world_for_task(const char *task,
                                uint64_t seed,
                                const struct SpConfig *config,
                                struct SpWorld **out);

/**
 * # Safety
 * `json` must be NUL-terminated; `out` valid for writes.
 */
enum SpStatus sp_world_from_json(const char *json, struct SpWorld **out);

/**
 * Serializes the world. Free the result with `sp_string_free`.
 *
 * # Safety
 * `world` must be a live handle; `out` valid for writes.
 */
enum SpStatus sp_world_to_json(const struct SpWorld *world, char **out);

/**
 * Top-down SVG of the world. `config` may be null.
 *
 * # Safety
 * `world` must be a live handle; `out` valid for writes.
 */
enum SpStatus sp_world_svg(const struct SpWorld *world, const struct SpConfig *config, char **out);

/**
 * # Safety
 * `w` must come from `sp_world_*` and not have been freed. Null is ignored.
 */
void sp_world_free(struct SpWorld *w);

/**
 * Extracts the program from `response` and samples its parameters against
 * `world` in environment `env`. Writes the solver outcome as JSON and returns
 * `Ok` when solved, `Exhausted` when the budget ran out.
 *
 * # Safety
 * String arguments must be NUL-terminated; `world` live; `out` valid for writes.
 */
enum SpStatus sp_solve(const struct SpWorld *world,
                       const char *env,
                       const char *response,
                       size_t budget,
                       uint64_t seed,
                       const struct SpConfig *config,
                       char **out);

/**
 * Runs the goal checker of `task` on `world`. `diagnostics` may be null.
 *
 * # Safety
 * `task` NUL-terminated; `world` live; `success` valid for writes.
 */
enum SpStatus sp_check_goal(const char *task,
                            const struct SpWorld *world,
                            const struct SpConfig *config,
                            bool *success,
                            char **diagnostics);

/**
 * Runs one episode of `approach` on `task` with a replayed model. `responses`
 * is a JSON array of response strings served in order. Writes the episode log
 * as JSON.
 *
 * # Safety
 * String arguments must be NUL-terminated; `out` valid for writes.
 */
enum SpStatus sp_run_episode(const char *task,
                             const char *approach,
                             uint64_t seed,
                             const char *responses,
                             const struct SpConfig *config,
                             char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SKETCHPLAN_H */
