#ifndef RANDCOVER_H
#define RANDCOVER_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RcStageMode {
  RC_STAGE_MODE_CONTAINED = 0,
  RC_STAGE_MODE_INTERSECTED = 1,
} RcStageMode;

typedef enum RcStatus {
  RC_STATUS_OK = 0,
  RC_STATUS_NULL_POINTER = 1,
  RC_STATUS_INVALID_UTF8 = 2,
  RC_STATUS_PARSE = 3,
  RC_STATUS_INVALID_ARGUMENT = 4,
  RC_STATUS_OUT_OF_RANGE = 5,
  RC_STATUS_INFEASIBLE = 6,
  RC_STATUS_BUDGET = 7,
  RC_STATUS_NUMERICAL = 8,
  RC_STATUS_PANIC = 9,
} RcStatus;

// Set of dyadic cubes at a fixed level.
typedef struct RcGridSet RcGridSet;

// Validated length sequence.
typedef struct RcLengthSpec RcLengthSpec;

// One covering realization (seed, sequence, N).
typedef struct RcRealization RcRealization;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next library call on this thread.
const char *rc_last_error(void);

// Library version as a static NUL-terminated string.
const char *rc_version(void);

// Frees a string returned by this library.
//
// # Safety
// `s` must be null or a pointer obtained from this library and not yet freed.
void rc_string_free(char *s);

// Parses and validates a length sequence from JSON, e.g.
// `{"variant":"power_law","alpha":0.5,"c":0.5,"d":1}`.
//
// # Safety
// `json` must be a NUL-terminated string; `out` must be writable.
enum RcStatus rc_length_spec_from_json(const char *json, struct RcLengthSpec **out);

// l_n for 1 ≤ n, written to `out`.
//
// # Safety
// `spec` must be a live handle; `out` must be writable.
enum RcStatus rc_length_spec_value(const struct RcLengthSpec *spec, uint64_t n, double *out);

// # Safety
// `spec` must be null or a handle from `rc_length_spec_from_json` not yet freed.
void rc_length_spec_free(struct RcLengthSpec *spec);

// Realization of the first `n` balls under `seed`. The spec is copied, so
// it may be freed afterwards.
//
// # Safety
// `spec` must be a live handle; `out` must be writable.
enum RcStatus rc_realization_new(uint64_t seed,
                                 const struct RcLengthSpec *spec,
                                 uint64_t n,
                                 struct RcRealization **out);

// Writes the center of ball `j` (1 ≤ j ≤ N) into `coords[0..d]`.
//
// # Safety
// `r` must be a live handle; `coords` must have room for `len` doubles.
enum RcStatus rc_realization_center(const struct RcRealization *r,
                                    uint64_t j,
                                    double *coords,
                                    uintptr_t len);

// Radius l_j / 2 of ball `j`.
//
// # Safety
// `r` must be a live handle; `out` must be writable.
enum RcStatus rc_realization_radius(const struct RcRealization *r, uint64_t j, double *out);

// # Safety
// `r` must be null or a handle from `rc_realization_new` not yet freed.
void rc_realization_free(struct RcRealization *r);

// Level-`level` grid image of the balls with index in [first, last].
//
// # Safety
// `r` must be a live handle; `out` must be writable.
enum RcStatus rc_gridset_stage(const struct RcRealization *r,
                               uint64_t first,
                               uint64_t last,
                               uint32_t level,
                               enum RcStageMode mode,
                               struct RcGridSet **out);

// Run-length text form of a grid set (see `rc_gridset_from_rle`).
//
// # Safety
// `g` must be a live handle; `out` must be writable. Free the result with
// `rc_string_free`.
enum RcStatus rc_gridset_to_rle(const struct RcGridSet *g, char **out);

// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum RcStatus rc_gridset_from_rle(const char *text, struct RcGridSet **out);

// Number of cubes in the set.
//
// # Safety
// `g` must be a live handle; `out` must be writable.
enum RcStatus rc_gridset_count(const struct RcGridSet *g, uint64_t *out);

// Whether the cube with linear index `i` is in the set.
//
// # Safety
// `g` must be a live handle; `out` must be writable.
enum RcStatus rc_gridset_contains(const struct RcGridSet *g, uint64_t i, bool *out);

// Whether two grid sets share a cube; the coarser one is refined first.
//
// # Safety
// `a` and `b` must be live handles; `out` must be writable.
enum RcStatus rc_gridset_hits(const struct RcGridSet *a, const struct RcGridSet *b, bool *out);

// # Safety
// `g` must be null or a grid set handle not yet freed.
void rc_gridset_free(struct RcGridSet *g);

// Runs one experiment from a JSON config with the same fields as the CLI
// TOML (`experiment`, `params`, `seed`, `trials`) and returns the report
// as JSON. A failing verdict is still `RC_STATUS_OK`; read it from the
// report.
//
// # Safety
// `config_json` must be a NUL-terminated string; `out` must be writable.
// Free the result with `rc_string_free`.
enum RcStatus rc_run_experiment_json(const char *config_json, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RANDCOVER_H */
