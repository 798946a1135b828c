#ifndef PATENT_ANALYTICS_H
#define PATENT_ANALYTICS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PaStatus {
  PA_STATUS_OK = 0,
  PA_STATUS_NULL_ARGUMENT = 1,
  PA_STATUS_INVALID_UTF8 = 2,
  PA_STATUS_INVALID_ARGUMENT = 3,
  PA_STATUS_NOT_FOUND = 4,
  PA_STATUS_IO = 5,
  PA_STATUS_INVALID_DOCUMENT = 6,
  PA_STATUS_INSUFFICIENT_DATA = 7,
  PA_STATUS_SCHEMA_MISMATCH = 8,
  PA_STATUS_INVALID_BUNDLE = 9,
  PA_STATUS_CORRUPT_STORE = 10,
  PA_STATUS_INTERNAL = 11,
  PA_STATUS_PANIC = 12,
} PaStatus;

/**
 * Opaque trained model handle.
 */
typedef struct PaModel PaModel;

/**
 * Opaque patent store handle.
 */
typedef struct PaStore PaStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Opens or creates a store file. `aliases_path` may be null for the
 * built-in alias table.
 *
 * # Safety
 * String arguments must be valid NUL-terminated strings or null; `out`
 * must be writable.
 */
enum PaStatus pa_store_open(const char *path, const char *aliases_path, struct PaStore **out);

/**
 * Flushes and releases a store. Null is ignored.
 *
 * # Safety
 * `store` must come from [`pa_store_open`] and not be used afterwards.
 */
void pa_store_free(struct PaStore *store);

/**
 * Ingests an XML file or directory. Writes the ingest report as JSON.
 *
 * # Safety
 * `store` must be a live handle; `input_path` a valid string; `out_json`
 * writable.
 */
enum PaStatus pa_store_ingest(struct PaStore *store, const char *input_path, char **out_json);

/**
 * Summary statistics of an entity as JSON. `kind` is "inventor" or "org".
 *
 * # Safety
 * `store` must be a live handle; strings valid; `out_json` writable.
 */
enum PaStatus pa_store_entity_summary(const struct PaStore *store,
                                      const char *kind,
                                      const char *id,
                                      char **out_json);

/**
 * Grant-lag statistics as a JSON array. `group_by` is "filing_year" or
 * "cpc_section".
 *
 * # Safety
 * `store` must be a live handle; strings valid; `out_json` writable.
 */
enum PaStatus pa_store_grant_lag_stats(const struct PaStore *store,
                                       const char *group_by,
                                       char **out_json);

/**
 * Loads and validates a model bundle.
 *
 * # Safety
 * `path` must be a valid string; `out` writable.
 */
enum PaStatus pa_model_load(const char *path, struct PaModel **out);

/**
 * Releases a model. Null is ignored.
 *
 * # Safety
 * `model` must come from [`pa_model_load`] and not be used afterwards.
 */
void pa_model_free(struct PaModel *model);

/**
 * Predicts grant lag for an inline document given as JSON, with the same
 * fields and response shape as the HTTP predict endpoint.
 *
 * # Safety
 * `model` must be a live handle; `document_json` valid; `out_json` writable.
 */
enum PaStatus pa_model_predict_json(const struct PaModel *model,
                                    const char *document_json,
                                    char **out_json);

/**
 * 64-bit FNV-1a of `len` bytes, as used for feature hashing.
 *
 * # Safety
 * `bytes` must point to `len` readable bytes, or be null with `len` 0.
 */
uint64_t pa_fnv1a64(const uint8_t *bytes, size_t len);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into this library on the same thread.
 */
const char *pa_last_error_message(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from an `out_json` parameter and not be freed twice.
 */
void pa_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PATENT_ANALYTICS_H */
