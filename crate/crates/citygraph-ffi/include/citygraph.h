/* C interface of the citygraph urban social network generator. */

#ifndef CITYGRAPH_H
#define CITYGRAPH_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every fallible call. The numeric values match
 the CLI exit codes where they overlap.
 */
typedef enum CgStatus {
  CG_OK = 0,
  CG_ERR_CONFIG = 2,
  CG_ERR_FEASIBILITY = 3,
  CG_ERR_IO = 4,
  CG_ERR_NULL_POINTER = 5,
  CG_ERR_INVALID_UTF8 = 6,
  CG_ERR_PANIC = 7,
} CgStatus;

/*
 Opaque run configuration.
 */
typedef struct CgConfig CgConfig;

/*
 Opaque generated graph plus the grid it lives on.
 */
typedef struct CgGraph CgGraph;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the most recent error on this thread; the pointer stays
 valid until the next failing call on the same thread.
 */
const char *cg_last_error_message(void);

/*
 Library version as a static string.
 */
const char *cg_version(void);

/*
 Loads a run configuration from a JSON file. On success writes a handle
 to `out`; free it with `cg_config_free`.

 # Safety
 `path` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum CgStatus cg_config_from_file(const char *path, struct CgConfig **out);

/*
 Parses a run configuration from a JSON string; relative input paths are
 resolved against the current working directory.

 # Safety
 `json` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum CgStatus cg_config_from_json(const char *json, struct CgConfig **out);

/*
 Overrides the seed of a loaded configuration.

 # Safety
 `config` must be a live handle from `cg_config_from_*`.
 */
enum CgStatus cg_config_set_seed(struct CgConfig *config, uint64_t seed);

/*
 Validates a configuration without running it.

 # Safety
 `config` must be a live handle from `cg_config_from_*`.
 */
enum CgStatus cg_config_validate(const struct CgConfig *config);

/*
 # Safety
 `config` must be a handle from `cg_config_from_*` not yet freed, or null.
 */
void cg_config_free(struct CgConfig *config);

/*
 Runs one generation (population, households, friendship layer) with the
 configuration's seed. On success writes a graph handle to `out`; free it
 with `cg_graph_free`.

 # Safety
 `config` must be a live config handle and `out` a valid pointer.
 */
enum CgStatus cg_generate(const struct CgConfig *config, struct CgGraph **out);

/*
 # Safety
 `graph` must be a handle from `cg_generate` not yet freed, or null.
 */
void cg_graph_free(struct CgGraph *graph);

/*
 # Safety
 `graph` must be a live graph handle.
 */
uint64_t cg_graph_node_count(const struct CgGraph *graph);

/*
 Edge count of one layer: 0 = household, 1 = friendship, 2 = flattened
 simple graph.

 # Safety
 `graph` must be a live graph handle.
 */
uint64_t cg_graph_edge_count(const struct CgGraph *graph, int32_t layer);

/*
 Mean degree of the flattened graph.

 # Safety
 `graph` must be a live graph handle.
 */
double cg_graph_mean_degree(const struct CgGraph *graph);

/*
 Largest feasible mean friendship degree for the generated context.

 # Safety
 `graph` must be a live graph handle.
 */
double cg_graph_mu_max(const struct CgGraph *graph);

/*
 Degree of `node` in the flattened graph, or -1 if out of range.

 # Safety
 `graph` must be a live graph handle.
 */
int64_t cg_graph_degree(const struct CgGraph *graph, uint64_t node);

/*
 Writes nodes.csv, edges.csv and households.csv into `dir`.

 # Safety
 `graph` must be a live graph handle and `dir` a valid NUL-terminated
 string.
 */
enum CgStatus cg_graph_write_csv(const struct CgGraph *graph, const char *dir);

/*
 Runs the full metric suite and returns it as a JSON document allocated
 by the library; free it with `cg_string_free`.

 # Safety
 `graph` must be a live graph handle and `out_json` a valid pointer.
 */
enum CgStatus cg_graph_metrics_json(const struct CgGraph *graph, char **out_json);

/*
 Frees a string allocated by this library.

 # Safety
 `s` must be a pointer previously returned by `cg_graph_metrics_json`
 (or null), not yet freed.
 */
void cg_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CITYGRAPH_H */
