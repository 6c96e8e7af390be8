#ifndef COGNISNN_H
#define COGNISNN_H

/* C interface to the CogniSNN engine. All state lives behind opaque handles;
 * every fallible call returns a cogni_status and leaves a human-readable
 * message in cogni_last_error() (thread-local). */

#include <stdint.h>

#if defined(_WIN32) || defined(__CYGWIN__)
#define COGNI_API __declspec(dllexport)
#else
#define COGNI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cogni_status {
    COGNI_OK = 0,
    COGNI_ERROR_CONFIG = 2,
    COGNI_ERROR_DATA = 3,
    COGNI_ERROR_NUMERIC = 4,
    COGNI_ERROR_INVALID_ARGUMENT = 5,
    COGNI_ERROR_CAPACITY = 6,
    COGNI_ERROR_INTERNAL = 7
} cogni_status;

typedef struct cogni_topology cogni_topology;

COGNI_API const char* cogni_version(void);

/* message from the most recent failing call on this thread; empty if none */
COGNI_API const char* cogni_last_error(void);

/* process exit code convention: 0 ok, 2 config, 3 data, 4 numeric */
COGNI_API int cogni_status_exit_code(cogni_status status);

COGNI_API cogni_status cogni_topology_generate_er(uint32_t nodes, double p,
                                                  uint64_t seed, cogni_topology** out);
COGNI_API cogni_status cogni_topology_generate_ws(uint32_t nodes, uint32_t k,
                                                  double p_rewire, uint64_t seed,
                                                  cogni_topology** out);
COGNI_API cogni_status cogni_topology_chain(uint32_t nodes, cogni_topology** out);
COGNI_API cogni_status cogni_topology_load(const char* path, cogni_topology** out);
COGNI_API cogni_status cogni_topology_save(const cogni_topology* topo, const char* path);
COGNI_API uint32_t cogni_topology_nodes(const cogni_topology* topo);
COGNI_API uint32_t cogni_topology_edges(const cogni_topology* topo);

/* betweenness-ranked source->sink path listing; free with cogni_string_free */
COGNI_API cogni_status cogni_topology_path_report(const cogni_topology* topo,
                                                  uint64_t path_cap, char** report_out);

COGNI_API void cogni_topology_free(cogni_topology* topo);
COGNI_API void cogni_string_free(char* s);

/* Runs one experiment subcommand (generate-graph | train | eval | paths |
 * continual | energy | gradcheck) against a config file; artifacts and a
 * manifest land in out_dir. seed_override is a decimal u64 string or NULL. */
COGNI_API cogni_status cogni_run(const char* subcommand, const char* config_path,
                                 const char* out_dir, const char* seed_override,
                                 int smooth_mode);

#ifdef __cplusplus
}
#endif

#endif /* COGNISNN_H */
