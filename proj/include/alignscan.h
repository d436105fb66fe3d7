/*
 * C interface to the aligned-scan library.
 *
 * Every fallible call returns an as_status; on failure a human-readable
 * message is available from as_last_error() on the same thread until the
 * next failing call. Objects are opaque handles released with their _free
 * function. Strings returned through char** are owned by the caller and
 * released with as_string_free.
 */
#ifndef ALIGNSCAN_H
#define ALIGNSCAN_H

#include <stddef.h>
#include <stdint.h>

#if defined(ALIGNSCAN_BUILDING_LIBRARY)
#define ALIGNSCAN_API __attribute__((visibility("default")))
#else
#define ALIGNSCAN_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum as_status {
  AS_OK = 0,
  AS_ERR_INVALID_ARGUMENT = 1,
  AS_ERR_STRUCTURAL = 2,
  AS_ERR_DOMAIN = 3,
  AS_ERR_UNSUPPORTED = 4,
  AS_ERR_CONFIG = 5,
  AS_ERR_IO = 6,
  AS_ERR_INTERNAL = 7
} as_status;

typedef struct as_config as_config;
typedef struct as_model as_model;
typedef struct as_bench_result as_bench_result;

ALIGNSCAN_API const char* as_version(void);
ALIGNSCAN_API const char* as_status_name(as_status status);
ALIGNSCAN_API const char* as_last_error(void);
ALIGNSCAN_API void as_string_free(char* s);

/* Model configuration (JSON schema documented in README). */
ALIGNSCAN_API as_status as_config_from_file(const char* path, as_config** out);
ALIGNSCAN_API as_status as_config_from_json(const char* json, as_config** out);
ALIGNSCAN_API void as_config_free(as_config* cfg);
/* Replaces the seed with ALIGNED_SCAN_SEED when that variable is set. */
ALIGNSCAN_API as_status as_config_apply_env(as_config* cfg);
ALIGNSCAN_API as_status as_config_set_keep_rate(as_config* cfg, double keep_rate);
ALIGNSCAN_API as_status as_config_to_json(const as_config* cfg, char** out);

/* Analytic multiply-accumulate report (dense vs pruned) as JSON. */
ALIGNSCAN_API as_status as_flops_json(const as_config* cfg, char** out);

/* Timed forward passes; mode is "dense", "aligned" or "condensed". */
ALIGNSCAN_API as_status as_bench_run(const as_config* cfg, const char* mode,
                                     int repeats, int warmup, unsigned threads,
                                     as_bench_result** out);
ALIGNSCAN_API void as_bench_result_free(as_bench_result* r);
ALIGNSCAN_API double as_bench_result_speedup(const as_bench_result* r);
ALIGNSCAN_API as_status as_bench_result_json(const as_bench_result* r, char** out);
ALIGNSCAN_API const char* as_bench_csv_header(void);
ALIGNSCAN_API as_status as_bench_result_csv_row(const as_bench_result* r,
                                                char** out);

/* Block stack. weights_dir may be NULL for seeded initialization. */
ALIGNSCAN_API as_status as_model_create(const as_config* cfg,
                                        const char* weights_dir,
                                        as_model** out);
ALIGNSCAN_API void as_model_free(as_model* model);
ALIGNSCAN_API as_status as_model_set_threads(as_model* model, unsigned threads);
ALIGNSCAN_API as_status as_model_save_weights(const as_model* model,
                                              const char* dir);
/*
 * input: batch x tokens x embed_dim row-major doubles, tokens equal to the
 * grid size. features receives batch x out_tokens x embed_dim values;
 * features_capacity is its length in doubles.
 */
ALIGNSCAN_API as_status as_model_forward(as_model* model, const double* input,
                                         size_t batch, size_t tokens,
                                         size_t embed_dim, double* features,
                                         size_t features_capacity,
                                         size_t* out_tokens);
/*
 * Runs a forward pass and returns per-stage position maps and scores as
 * JSON. input_path (raw tensor + sidecar) may be NULL for a seeded input;
 * dump_path, when set, receives the final features in the same format.
 */
ALIGNSCAN_API as_status as_model_prune_sim_json(as_model* model,
                                                const char* input_path,
                                                const char* dump_path,
                                                char** out);

/*
 * Single-sequence aligned scan over `positions` original steps. keep_mask
 * has `positions` bytes (nonzero = kept); K is the number of kept steps.
 * a_diag: channels x state_dim. delta: K x channels. b, c: K x state_dim.
 * x, y: K x channels.
 */
ALIGNSCAN_API as_status as_scan_aligned(size_t positions,
                                        const unsigned char* keep_mask,
                                        size_t channels, size_t state_dim,
                                        const double* a_diag,
                                        const double* delta, const double* b,
                                        const double* c, const double* x,
                                        double* y);

/* Randomized kernel equivalence suites. *passed is 1 when all pass. */
ALIGNSCAN_API as_status as_verify(uint64_t seed, unsigned threads, int* passed,
                                  char** report);

#ifdef __cplusplus
}
#endif

#endif /* ALIGNSCAN_H */
