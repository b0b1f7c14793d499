#ifndef H2ATLAS_H
#define H2ATLAS_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum H2aStatus {
  H2A_STATUS_OK = 0,
  H2A_STATUS_NULL_POINTER = 1,
  H2A_STATUS_INVALID_ARGUMENT = 2,
  H2A_STATUS_NOT_FOUND = 3,
  H2A_STATUS_CONFIG = 4,
  H2A_STATUS_IO = 5,
  H2A_STATUS_DOMAIN = 6,
  H2A_STATUS_INFEASIBLE = 7,
  H2A_STATUS_SOLVER = 8,
  H2A_STATUS_BUFFER_TOO_SMALL = 9,
  H2A_STATUS_PANIC = 10,
} H2aStatus;

/*
 Stored eligibility of one region in one run; supports what-if buffers.
 */
typedef struct H2aEligibility H2aEligibility;

/*
 Single-region node model for the capacity-expansion LP.
 */
typedef struct H2aNode H2aNode;

/*
 Result store rooted at a directory.
 */
typedef struct H2aStore H2aStore;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or null. Valid until the
 next call into the library from the same thread.
 */
const char *h2a_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *h2a_version(void);

/*
 # Safety
 `s` must come from this library and not have been freed.
 */
void h2a_string_free(char *s);

/*
 PV capacity in GWp for `area_km2` of land at `m2_per_kwp`.

 # Safety
 `out_gw` must be valid for writes.
 */
enum H2aStatus h2a_pv_capacity_from_area(double area_km2, double m2_per_kwp, double *out_gw);

/*
 Opens (creating if needed) a result store.

 # Safety
 `root` must be a NUL-terminated string; `out` must be valid for writes.
 */
enum H2aStatus h2a_store_open(const char *root, struct H2aStore **out);

/*
 # Safety
 `store` must come from [`h2a_store_open`] and not have been freed.
 */
void h2a_store_free(struct H2aStore *store);

/*
 Runs the pipeline for a config file. Writes the 16-character run id and a
 trailing NUL into `run_id_buf` (at least 17 bytes) and whether the run
 was already cached. `threads` of 0 uses all cores.

 # Safety
 Pointers must be valid; `run_id_buf` must hold `buf_len` bytes.
 */
enum H2aStatus h2a_run(const struct H2aStore *store,
                       const char *config_path,
                       uint32_t threads,
                       char *run_id_buf,
                       uintptr_t buf_len,
                       bool *out_cached);

/*
 Cost-potential curve CSV of a region. Free the result with [`h2a_string_free`].

 # Safety
 Pointers must be valid NUL-terminated strings; `out` valid for writes.
 */
enum H2aStatus h2a_curve_csv(const struct H2aStore *store,
                             const char *run_id,
                             const char *gid,
                             char **out);

/*
 Map layer as GeoJSON (`csv == false`) or CSV. Free with [`h2a_string_free`].

 # Safety
 Pointers must be valid NUL-terminated strings; `out` valid for writes.
 */
enum H2aStatus h2a_layer_export(const struct H2aStore *store,
                                const char *run_id,
                                const char *layer,
                                bool csv,
                                char **out);

/*
 Loads the stored eligibility of `gid` for `tech` ("wind" or "pv").

 # Safety
 Pointers must be valid NUL-terminated strings; `out` valid for writes.
 */
enum H2aStatus h2a_eligibility_open(const struct H2aStore *store,
                                    const char *run_id,
                                    const char *gid,
                                    const char *tech,
                                    struct H2aEligibility **out);

/*
 Stored eligible fraction.

 # Safety
 `elig` must be a live handle; `out` valid for writes.
 */
enum H2aStatus h2a_eligibility_fraction(const struct H2aEligibility *elig, double *out);

/*
 Eligible fraction with `n` buffer overrides (criterion id, meters).

 # Safety
 `ids` and `meters` must each hold `n` elements (may be null when `n == 0`).
 */
enum H2aStatus h2a_eligibility_whatif(const struct H2aEligibility *elig,
                                      const uint8_t *ids,
                                      const double *meters,
                                      uintptr_t n,
                                      double *out_fraction);

/*
 # Safety
 `elig` must come from [`h2a_eligibility_open`] and not have been freed.
 */
void h2a_eligibility_free(struct H2aEligibility *elig);

/*
 Parses a node model from JSON.

 # Safety
 `json` must be a NUL-terminated string; `out` valid for writes.
 */
enum H2aStatus h2a_node_from_json(const char *json, struct H2aNode **out);

/*
 Solves the node for `demand_t` tonnes of H₂ per year over `days`
 representative days (0 for every hour). Writes LCOH in €/kg and the
 annual cost in €.

 # Safety
 `node` must be a live handle; outputs valid for writes (`out_cost` may be null).
 */
enum H2aStatus h2a_node_solve(const struct H2aNode *node,
                              double demand_t,
                              uint32_t days,
                              double *out_lcoh,
                              double *out_cost);

/*
 Cost-potential curve of the node as JSON. `config_json` may be null for
 defaults. Free the result with [`h2a_string_free`].

 # Safety
 `node` must be a live handle; strings NUL-terminated; `out` valid for writes.
 */
enum H2aStatus h2a_node_curve_json(const struct H2aNode *node, const char *config_json, char **out);

/*
 # Safety
 `node` must come from [`h2a_node_from_json`] and not have been freed.
 */
void h2a_node_free(struct H2aNode *node);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* H2ATLAS_H */
