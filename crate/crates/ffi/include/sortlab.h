/* C interface to the sortlab generalized-sorting laboratory. */

#ifndef SORTLAB_H
#define SORTLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Prediction-sorter backend selector for the sparse sorter.
 */
typedef enum SortlabBackend {
  /**
   * Correct fallback backend (at most one query per edge).
   */
  SORTLAB_BACKEND_FALLBACK = 0,
  /**
   * No backend: run the sampling loop until the order is pinned.
   */
  SORTLAB_BACKEND_LOOP_ONLY = 1,
} SortlabBackend;

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum SortlabStatus {
  SORTLAB_STATUS_OK = 0,
  SORTLAB_STATUS_NULL_POINTER = 1,
  SORTLAB_STATUS_INVALID_ARGUMENT = 2,
  SORTLAB_STATUS_PARSE_ERROR = 3,
  SORTLAB_STATUS_INTERNAL_ERROR = 4,
  SORTLAB_STATUS_UTF8_ERROR = 5,
} SortlabStatus;

/**
 * Opaque sorting instance.
 */
typedef struct SortlabInstance SortlabInstance;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Generates a seeded instance: hidden order, planted path, stochastic
 * edges with probability `p`. On success stores a handle in `out`.
 *
 * # Safety
 * `out` must be a valid pointer; the handle must be released with
 * `sortlab_instance_free`.
 */
enum SortlabStatus sortlab_instance_generate(uint32_t n,
                                             double p,
                                             uint64_t seed,
                                             struct SortlabInstance **out);

/**
 * Parses an instance from its JSON form.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum SortlabStatus sortlab_instance_from_json(const char *json, struct SortlabInstance **out);

/**
 * Serializes an instance to JSON; free the string with
 * `sortlab_string_free`.
 *
 * # Safety
 * `instance` must be a live handle and `out` a valid pointer.
 */
enum SortlabStatus sortlab_instance_to_json(const struct SortlabInstance *instance, char **out);

/**
 * Number of vertices; 0 for a null handle.
 *
 * # Safety
 * `instance` must be null or a live handle.
 */
uint32_t sortlab_instance_vertex_count(const struct SortlabInstance *instance);

/**
 * Number of edges; 0 for a null handle.
 *
 * # Safety
 * `instance` must be null or a live handle.
 */
uint64_t sortlab_instance_edge_count(const struct SortlabInstance *instance);

/**
 * Recovers the hidden order with the leveled stochastic sorter.
 * `out_order` must hold `sortlab_instance_vertex_count(instance)` entries;
 * `out_queries` (optional) receives the distinct-pair query count.
 *
 * # Safety
 * `instance` must be a live handle; `out_order` must point to enough space.
 */
enum SortlabStatus sortlab_sort_stochastic(const struct SortlabInstance *instance,
                                           uint64_t seed,
                                           uint32_t *out_order,
                                           uint64_t *out_queries);

/**
 * Recovers the hidden order with the sparse worst-case sorter.
 *
 * # Safety
 * Same contracts as `sortlab_sort_stochastic`.
 */
enum SortlabStatus sortlab_sort_sparse(const struct SortlabInstance *instance,
                                       uint64_t seed,
                                       enum SortlabBackend backend,
                                       uint32_t *out_order,
                                       uint64_t *out_queries);

/**
 * Releases an instance handle. Null is a no-op.
 *
 * # Safety
 * `instance` must be null or a handle not yet freed.
 */
void sortlab_instance_free(struct SortlabInstance *instance);

/**
 * Releases a string returned by this library. Null is a no-op.
 *
 * # Safety
 * `s` must be null or a string returned by this library, not yet freed.
 */
void sortlab_string_free(char *s);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sortlab_version(void);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* SORTLAB_H */
