/* rlx2 — sparse off-policy deep-RL training library.
 *
 * C interface over the training core: opaque handles, integer status codes.
 * Status codes match the CLI exit codes: 0 ok, 1 run failure, 2 usage error.
 * On any nonzero status, rlx2_last_error() describes the problem; the message
 * is thread-local and valid until the next failing call on the same thread.
 */
#ifndef RLX2_H
#define RLX2_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RLX2_API __declspec(dllexport)
#else
#define RLX2_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum {
    RLX2_OK = 0,
    RLX2_ERR_RUN = 1,
    RLX2_ERR_USAGE = 2
};

typedef struct rlx2_config rlx2_config;
typedef struct rlx2_result rlx2_result;

/* Line-oriented progress/report callback; `user` is passed through. */
typedef void (*rlx2_line_cb)(const char* line, void* user);

RLX2_API const char* rlx2_version(void);
RLX2_API const char* rlx2_last_error(void);

/* Comma-separated registered environment names written into buf. */
RLX2_API int rlx2_env_list(char* buf, size_t bufsize);

/* --- configuration ---------------------------------------------------------
 * A config starts from the published defaults. Entries loaded from a file
 * override the defaults; entries set directly override the file. Keys mirror
 * the CLI flag names (e.g. "algo", "env", "actor-sparsity", "steps").
 */
RLX2_API rlx2_config* rlx2_config_new(void);
RLX2_API void rlx2_config_free(rlx2_config* cfg);
RLX2_API int rlx2_config_set(rlx2_config* cfg, const char* key, const char* value);
RLX2_API int rlx2_config_load_file(rlx2_config* cfg, const char* path);
/* Resolve and validate the layered entries without running anything. */
RLX2_API int rlx2_config_validate(const rlx2_config* cfg);
/* Fingerprint of the fully resolved configuration (0 on invalid config). */
RLX2_API uint64_t rlx2_config_fingerprint(const rlx2_config* cfg);
/* Resolved value of one key, as text. */
RLX2_API int rlx2_config_get(const rlx2_config* cfg, const char* key, char* buf,
                             size_t bufsize);

/* --- training ----------------------------------------------------------------
 * Runs one job to completion and writes manifest.txt, metrics.csv,
 * summary.json, checkpoint.txt and masks/ under out_dir. On success *out
 * receives a result handle (free with rlx2_result_free).
 */
RLX2_API int rlx2_train(const rlx2_config* cfg, const char* out_dir, rlx2_result** out);

RLX2_API void rlx2_result_free(rlx2_result* res);
RLX2_API double rlx2_result_final_score(const rlx2_result* res);
RLX2_API int64_t rlx2_result_eval_count(const rlx2_result* res);
RLX2_API int rlx2_result_eval_point(const rlx2_result* res, int64_t index, int64_t* step,
                                    double* mean_return);
/* Summary JSON (same content as summary.json). Returns RLX2_ERR_USAGE if the
 * buffer is too small; required size is written to *needed when non-NULL. */
RLX2_API int rlx2_result_summary_json(const rlx2_result* res, char* buf, size_t bufsize,
                                      size_t* needed);

/* --- sweeps -------------------------------------------------------------------
 * grid_csv like "0.5,0.9,0.95"; a dense reference row at sparsity 0 is always
 * included. seeds runs per level starting at the configured seed; jobs
 * parallel workers (runs are independent). Writes sweep.csv and
 * sweep_summary.json under out_dir.
 */
RLX2_API int rlx2_sweep(const rlx2_config* cfg, const char* grid_csv, int seeds, int jobs,
                        const char* out_dir, rlx2_line_cb cb, void* user);

/* --- verification ---------------------------------------------------------------
 * suite: "gradient", "decomposition", "flops", "conservation" or "all"/NULL.
 * inject_fault != 0 flips one mask bit inside the conservation suite to prove
 * the check trips (the suite is then expected to fail). Emits one line per
 * check through cb and returns RLX2_ERR_RUN if any suite failed.
 */
RLX2_API int rlx2_verify(const char* suite, uint64_t seed, int inject_fault,
                         rlx2_line_cb cb, void* user);

#ifdef __cplusplus
}
#endif

#endif /* RLX2_H */
