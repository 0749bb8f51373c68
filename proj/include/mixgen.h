/* mixgen C API: opaque session handle over the generative auto-mixing
 * pipeline. All functions return MG_OK on success; on failure they return an
 * error code and mg_errmsg(session) carries the message. */
#ifndef MIXGEN_H
#define MIXGEN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct mg_session mg_session;

typedef enum {
    MG_OK = 0,
    MG_E_INVALID_ARG = 1,
    MG_E_IO = 2,
    MG_E_CONFIG = 3,
    MG_E_STATE = 4,
    MG_E_RUNTIME = 5
} mg_status;

const char* mg_version(void);

/* Parse the config file and attach the run directory (created if missing).
 * seed_override >= 0 replaces the config seed. */
mg_status mg_open(const char* config_path, const char* out_dir, int64_t seed_override,
                  mg_session** out_session);
void mg_close(mg_session* s);

/* Message of the last failing call on this session. */
const char* mg_errmsg(const mg_session* s);

/* Resolved config value / run config hash as strings. */
mg_status mg_config_get(mg_session* s, const char* key, char* buf, size_t buf_len);
mg_status mg_config_hash(mg_session* s, char* buf, size_t buf_len);

/* Stages: gen-data, train-fxenc, train-adaptor, train-score, train-proc,
 * mix, baseline-eqloud. */
mg_status mg_run_stage(mg_session* s, const char* stage);

/* Mix explicit per-track WAV files. embeddings_path (MGEB, one row per
 * track) is optional; when given it supplies the effect embeddings instead
 * of sampling them. Outputs <out_prefix>_mix.wav, stems, and the z rows. */
mg_status mg_mix_files(mg_session* s, const char* const* track_wavs, size_t n_tracks,
                       const char* embeddings_path, const char* out_prefix);

/* Kernel audio distance between two MGEB embedding files. */
mg_status mg_kad_files(mg_session* s, const char* emb_a, const char* emb_b,
                       double* out_kad);

/* eval-kad stage over the configured mix directories. */
mg_status mg_eval_kad(mg_session* s, double* out_kad);

#ifdef __cplusplus
}
#endif

#endif /* MIXGEN_H */
