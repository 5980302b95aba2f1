#ifndef DIALOGUE_FORGE_H
#define DIALOGUE_FORGE_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every call.
 */
typedef enum DfStatus {
  DF_STATUS_OK = 0,
  DF_STATUS_NULL_ARGUMENT = 1,
  DF_STATUS_INVALID_UTF8 = 2,
  DF_STATUS_INVALID_ARGUMENT = 3,
  DF_STATUS_IO = 4,
  DF_STATUS_RUNTIME = 5,
  DF_STATUS_PANIC = 6,
} DfStatus;

/**
 * Parsed dialogue act.
 */
typedef struct DfAct DfAct;

/**
 * Loaded domain pack.
 */
typedef struct DfPack DfPack;

/**
 * Overall scores of a simulation run.
 */
typedef struct DfSummary {
  uint64_t episodes;
  double success_rate;
  double inform_f1;
  double avg_turns;
} DfSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until
 * the next call on the same thread; do not free.
 */
const char *df_last_error(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void df_string_free(char *s);

/**
 * Parses `Intent-Domain-Slot-Value`.
 *
 * # Safety
 * `text` must be a NUL-terminated string; `out` must be writable.
 */
enum DfStatus df_act_parse(const char *text, struct DfAct **out);

/**
 * Formats an act back to its canonical string.
 *
 * # Safety
 * `act` must be a live handle; `out` must be writable.
 */
enum DfStatus df_act_format(const struct DfAct *act, char **out);

/**
 * # Safety
 * `act` must come from [`df_act_parse`] and not have been freed.
 */
void df_act_free(struct DfAct *act);

/**
 * The pack compiled into the library.
 *
 * # Safety
 * `out` must be writable.
 */
enum DfStatus df_pack_bundled(struct DfPack **out);

/**
 * Loads a pack directory.
 *
 * # Safety
 * `dir` must be a NUL-terminated string; `out` must be writable.
 */
enum DfStatus df_pack_load(const char *dir, struct DfPack **out);

/**
 * # Safety
 * `pack` must come from this library and not have been freed.
 */
void df_pack_free(struct DfPack *pack);

/**
 * Simulates `episodes` dialogues (seeds `base_seed`, `base_seed + 1`, ...)
 * and writes them as JSON lines to `corpus_path`. `config_json` is a
 * simulation config document, or NULL for defaults. `summary` may be NULL.
 *
 * # Safety
 * Pointers must be valid as documented; strings NUL-terminated.
 */
enum DfStatus df_simulate(const struct DfPack *pack,
                          const char *config_json,
                          uint64_t episodes,
                          uint64_t base_seed,
                          const char *corpus_path,
                          struct DfSummary *summary);

/**
 * Analyzes a corpus file. The JSON report goes to `report_json` (free with
 * [`df_string_free`]); when `html_path` is not NULL the HTML report is
 * written there too.
 *
 * # Safety
 * Pointers must be valid as documented; strings NUL-terminated.
 */
enum DfStatus df_analyze(const struct DfPack *pack,
                         const char *corpus_path,
                         const char *html_path,
                         char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DIALOGUE_FORGE_H */
