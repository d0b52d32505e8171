#ifndef SUBSHIFT_H
#define SUBSHIFT_H

/* Generated from the Rust sources by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Call outcome. Zero is success; everything else leaves a message
 * retrievable with [`subshift_last_error`].
 */
typedef enum SubshiftStatus {
  /**
   * The call completed.
   */
  SUBSHIFT_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  SUBSHIFT_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  SUBSHIFT_STATUS_INVALID_UTF8 = 2,
  /**
   * The input was rejected: malformed JSON, bad parameters, or a
   * geometry mismatch between arguments.
   */
  SUBSHIFT_STATUS_INVALID_INPUT = 3,
  /**
   * File reading or writing failed.
   */
  SUBSHIFT_STATUS_IO = 4,
  /**
   * An internal invariant broke; the library state is still usable.
   */
  SUBSHIFT_STATUS_INTERNAL = 5,
} SubshiftStatus;

/**
 * Opaque handle to one built stage: its side, schedules, and pattern set.
 */
typedef struct SubshiftStage SubshiftStage;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Creates the initial stage in `dim` dimensions and stores the new handle
 * in `out`.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum SubshiftStatus subshift_stage_init(size_t dim, struct SubshiftStage **out);

/**
 * Parses a stage from its JSON serialization and stores the new handle in
 * `out`.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be valid for writing
 * one pointer.
 */
enum SubshiftStatus subshift_stage_from_json(const char *text, struct SubshiftStage **out);

/**
 * Reads a stage file from `path` and stores the new handle in `out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be valid for writing
 * one pointer.
 */
enum SubshiftStatus subshift_stage_read_file(const char *path, struct SubshiftStage **out);

/**
 * Serializes the stage to its canonical JSON form and stores a new string
 * in `out`.
 *
 * # Safety
 * `stage` must be a live handle from this library; `out` must be valid for
 * writing one pointer.
 */
enum SubshiftStatus subshift_stage_to_json(const struct SubshiftStage *stage, char **out);

/**
 * Writes the stage file to `path`.
 *
 * # Safety
 * `stage` must be a live handle from this library; `path` must be a
 * NUL-terminated string.
 */
enum SubshiftStatus subshift_stage_write_file(const struct SubshiftStage *stage, const char *path);

/**
 * Stores the stage's dimension in `out`.
 *
 * # Safety
 * `stage` must be a live handle from this library; `out` must be valid for
 * writing one value.
 */
enum SubshiftStatus subshift_stage_dim(const struct SubshiftStage *stage, size_t *out);

/**
 * Stores the stage's one-based index in `out`.
 *
 * # Safety
 * `stage` must be a live handle from this library; `out` must be valid for
 * writing one value.
 */
enum SubshiftStatus subshift_stage_index(const struct SubshiftStage *stage, size_t *out);

/**
 * Stores the side length of the stage's patterns in `out`.
 *
 * # Safety
 * `stage` must be a live handle from this library; `out` must be valid for
 * writing one value.
 */
enum SubshiftStatus subshift_stage_side(const struct SubshiftStage *stage, uint64_t *out);

/**
 * Stores the stage's residue modulus in `out`.
 *
 * # Safety
 * `stage` must be a live handle from this library; `out` must be valid for
 * writing one value.
 */
enum SubshiftStatus subshift_stage_modulus(const struct SubshiftStage *stage, uint64_t *out);

/**
 * Stores the number of stored patterns in `out`.
 *
 * # Safety
 * `stage` must be a live handle from this library; `out` must be valid for
 * writing one value.
 */
enum SubshiftStatus subshift_stage_pattern_count(const struct SubshiftStage *stage, size_t *out);

/**
 * Builds the next stage from `prev` using JSON parameters, e.g.
 * `{"l": 6, "m": 6, "d": "3/10", "target": 40, "seed": 1}` with optional
 * `nu` (default "1/10"), `slack` (default "1/2"), `budget` (default
 * 100 * target), `seed` (default 0), and `fill` (default "random", also
 * "all_zero", "all_one", or "explicit:bits").
 *
 * `out_complete` receives whether the target count was reached within the
 * draw budget; a stage handle is produced either way. `out_report_json`
 * may be null when the caller does not want the build report.
 *
 * # Safety
 * `prev` must be a live handle from this library; `params_json` must be a
 * NUL-terminated string; `out_stage` and `out_complete` must be valid for
 * writing; `out_report_json` must be null or valid for writing.
 */
enum SubshiftStatus subshift_build_next(const struct SubshiftStage *prev,
                                        const char *params_json,
                                        struct SubshiftStage **out_stage,
                                        bool *out_complete,
                                        char **out_report_json);

/**
 * Re-derives every stored condition for a consecutive stage pair.
 * `out_pass` receives the verdict; `out_report_json` may be null, or
 * receives the full report with per-condition flags and counterexamples.
 *
 * # Safety
 * `earlier` and `later` must be live handles from this library;
 * `out_pass` must be valid for writing; `out_report_json` must be null or
 * valid for writing.
 */
enum SubshiftStatus subshift_verify_pair(const struct SubshiftStage *earlier,
                                         const struct SubshiftStage *later,
                                         bool *out_pass,
                                         char **out_report_json);

/**
 * Releases a stage handle. Null is accepted and ignored.
 *
 * # Safety
 * `stage` must be null or a handle from this library that has not been
 * freed before.
 */
void subshift_stage_free(struct SubshiftStage *stage);

/**
 * Releases a string returned by this library. Null is accepted and
 * ignored.
 *
 * # Safety
 * `text` must be null or a string from this library that has not been
 * freed before.
 */
void subshift_string_free(char *text);

/**
 * Returns a copy of the message from the most recent failing call on this
 * thread, or null when the last call succeeded. The caller releases the
 * copy with [`subshift_string_free`].
 */
char *subshift_last_error(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SUBSHIFT_H */
