/* C interface to the astoria simulator. Strings returned through `char**`
 * out-parameters are owned by the caller and released with
 * astoria_string_free. On failure a call returns a nonzero status and
 * astoria_last_error() describes it (per thread). */
#ifndef ASTORIA_H
#define ASTORIA_H

#include <stddef.h>
#include <stdint.h>

#if defined(ASTORIA_BUILDING_LIBRARY)
#define ASTORIA_API __attribute__((visibility("default")))
#else
#define ASTORIA_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum astoria_status {
  ASTORIA_OK = 0,
  ASTORIA_E_PARSE = 1,    /* malformed input or inconsistent configuration */
  ASTORIA_E_RUNTIME = 2,  /* selection, solver or I/O failure */
  ASTORIA_E_ARGUMENT = 3  /* null handle or out-of-range argument */
} astoria_status;

typedef struct astoria_config astoria_config;
typedef struct astoria_world astoria_world;

ASTORIA_API const char* astoria_version(void);
ASTORIA_API const char* astoria_last_error(void);
ASTORIA_API void astoria_string_free(char* s);

/* ---- configuration: flat key=value settings ---- */

ASTORIA_API astoria_config* astoria_config_new(void);
ASTORIA_API void astoria_config_free(astoria_config* cfg);
/* Reads `key = value` lines; later settings override earlier ones. */
ASTORIA_API astoria_status astoria_config_load_file(astoria_config* cfg, const char* path);
/* `origin` labels the value in diagnostics, e.g. "--seed"; may be NULL. */
ASTORIA_API astoria_status astoria_config_set(astoria_config* cfg, const char* key,
                                              const char* value, const char* origin);
/* Parses and validates the accumulated settings. */
ASTORIA_API astoria_status astoria_config_check(const astoria_config* cfg);

/* Runs the configured experiment and writes report.json and circuits.csv to
 * the configured output directory. `out_warnings` (optional) receives a JSON
 * array of warning strings. */
ASTORIA_API astoria_status astoria_run(const astoria_config* cfg, char** out_warnings);
/* Same, but returns the report and circuit log instead of writing files. */
ASTORIA_API astoria_status astoria_run_capture(const astoria_config* cfg, char** out_report,
                                               char** out_circuits, char** out_warnings);

/* Emits the LP for (src, dst) with guards drawn from the config seed. */
ASTORIA_API astoria_status astoria_lp_dump(const astoria_config* cfg, uint32_t src,
                                           uint32_t dst, char** out_text);
/* Emits the LP for an incidence listing, one `label: 0 1 1` row per adversary. */
ASTORIA_API astoria_status astoria_lp_dump_incidence(const char* incidence_text,
                                                     char** out_text);

/* ---- loaded topology for ad-hoc queries ---- */

/* Loads topology, siblings and countries from `cfg`; keeps its threat options. */
ASTORIA_API astoria_status astoria_world_open(const astoria_config* cfg, astoria_world** out);
ASTORIA_API void astoria_world_close(astoria_world* world);
ASTORIA_API astoria_status astoria_world_counts(const astoria_world* world, size_t* ases,
                                                size_t* edges);

/* mode: "single-as", "sibling" or "state"; NULL uses the configured mode. */
ASTORIA_API astoria_status astoria_assess(astoria_world* world, uint32_t src, uint32_t entry,
                                          uint32_t exit, uint32_t dst, const char* mode,
                                          int* out_assessable, int* out_vulnerable);
ASTORIA_API astoria_status astoria_assess_json(astoria_world* world, uint32_t src,
                                               uint32_t entry, uint32_t exit, uint32_t dst,
                                               const char* mode, char** out_json);
/* enumerate != 0 adds the concrete paths, at most `cap` per direction;
 * cap 0 uses the configured cap. */
ASTORIA_API astoria_status astoria_paths_json(astoria_world* world, uint32_t a, uint32_t b,
                                              int enumerate, size_t cap, char** out_json);

/* ---- numerics ---- */

/* Minimax LP over `pairs` columns and `adversaries` rows; `incidence` is
 * row-major, nonzero where the adversary observes the pair. Writes `pairs`
 * probabilities to `out_probs`. */
ASTORIA_API astoria_status astoria_lp_solve(size_t pairs, size_t adversaries,
                                            const uint8_t* incidence, double* out_probs,
                                            double* out_objective);

ASTORIA_API astoria_status astoria_middle_relay_risk(uint64_t population,
                                                     uint64_t destinations, double mu_low,
                                                     double p_mid, double* out_expected,
                                                     double* out_observations,
                                                     double* out_probability);

#ifdef __cplusplus
}
#endif

#endif
