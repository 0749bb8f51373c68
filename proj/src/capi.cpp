#include "mixgen.h"

#include <cstring>
#include <sstream>

#include "mixgen/mmd.hpp"
#include "mixgen/pipeline.hpp"

using namespace mixgen;

struct mg_session {
    RunConfig cfg;
    RunDir rd;
    std::string errmsg;

    mg_session(RunConfig c, std::string root) : cfg(std::move(c)), rd(std::move(root)) {}
};

namespace {

mg_status fail_with(mg_session* s, mg_status code, const std::string& msg) {
    if (s) s->errmsg = msg;
    return code;
}

mg_status copy_out(mg_session* s, const std::string& value, char* buf, size_t buf_len) {
    if (!buf || buf_len == 0) return fail_with(s, MG_E_INVALID_ARG, "null output buffer");
    if (value.size() + 1 > buf_len)
        return fail_with(s, MG_E_INVALID_ARG,
                         format_str("buffer too small (%zu needed)", value.size() + 1));
    std::memcpy(buf, value.c_str(), value.size() + 1);
    return MG_OK;
}

}  // namespace

extern "C" {

const char* mg_version(void) { return "mixgen 0.1.0"; }

mg_status mg_open(const char* config_path, const char* out_dir, int64_t seed_override,
                  mg_session** out_session) {
    if (out_session) *out_session = nullptr;
    if (!config_path || !out_dir || !out_session) return MG_E_INVALID_ARG;
    try {
        RunConfig cfg = load_config(config_path);
        if (seed_override >= 0) cfg.seed = uint64_t(seed_override);
        if (cfg.threads > 0) set_default_threads(cfg.threads);
        auto* s = new mg_session(std::move(cfg), out_dir);
        *out_session = s;
        return MG_OK;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "[mixgen] open failed: %s\n", e.what());
        return MG_E_CONFIG;
    }
}

void mg_close(mg_session* s) { delete s; }

const char* mg_errmsg(const mg_session* s) {
    return s ? s->errmsg.c_str() : "null session";
}

mg_status mg_config_get(mg_session* s, const char* key, char* buf, size_t buf_len) {
    if (!s) return MG_E_INVALID_ARG;
    if (!key) return fail_with(s, MG_E_INVALID_ARG, "null key");
    std::istringstream in(serialize_config(s->cfg));
    std::string line;
    std::string want = std::string(key) + " = ";
    while (std::getline(in, line))
        if (line.rfind(want, 0) == 0) return copy_out(s, line.substr(want.size()), buf, buf_len);
    return fail_with(s, MG_E_INVALID_ARG, std::string("unknown config key: ") + key);
}

mg_status mg_config_hash(mg_session* s, char* buf, size_t buf_len) {
    if (!s) return MG_E_INVALID_ARG;
    return copy_out(s, hex(config_hash(s->cfg)), buf, buf_len);
}

mg_status mg_run_stage(mg_session* s, const char* stage) {
    if (!s) return MG_E_INVALID_ARG;
    if (!stage) return fail_with(s, MG_E_INVALID_ARG, "null stage name");
    try {
        std::string name = stage;
        if (name == "gen-data")
            stage_gen_data(s->cfg, s->rd);
        else if (name == "train-fxenc")
            stage_train_fxenc(s->cfg, s->rd);
        else if (name == "train-adaptor")
            stage_train_adaptor(s->cfg, s->rd);
        else if (name == "train-score")
            stage_train_score(s->cfg, s->rd);
        else if (name == "train-proc")
            stage_train_proc(s->cfg, s->rd);
        else if (name == "mix")
            stage_mix(s->cfg, s->rd, s->cfg.seed);
        else if (name == "baseline-eqloud")
            stage_baseline_eqloud(s->cfg, s->rd);
        else
            return fail_with(s, MG_E_INVALID_ARG, "unknown stage: " + name);
        return MG_OK;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        mg_status code = MG_E_RUNTIME;
        if (msg.find("cannot open") != std::string::npos) code = MG_E_IO;
        if (msg.find("checkpoint") != std::string::npos ||
            msg.find("run gen-data first") != std::string::npos)
            code = MG_E_STATE;
        return fail_with(s, code, msg);
    }
}

mg_status mg_mix_files(mg_session* s, const char* const* track_wavs, size_t n_tracks,
                       const char* embeddings_path, const char* out_prefix) {
    if (!s) return MG_E_INVALID_ARG;
    if (!track_wavs || n_tracks == 0 || !out_prefix)
        return fail_with(s, MG_E_INVALID_ARG, "missing tracks or output prefix");
    try {
        std::vector<std::string> paths;
        for (size_t i = 0; i < n_tracks; ++i) {
            if (!track_wavs[i]) return fail_with(s, MG_E_INVALID_ARG, "null track path");
            paths.emplace_back(track_wavs[i]);
        }
        mix_files(s->cfg, s->rd, paths, embeddings_path ? embeddings_path : "",
                  out_prefix, s->cfg.seed);
        return MG_OK;
    } catch (const std::exception& e) {
        return fail_with(s, MG_E_RUNTIME, e.what());
    }
}

mg_status mg_kad_files(mg_session* s, const char* emb_a, const char* emb_b,
                       double* out_kad) {
    if (!s) return MG_E_INVALID_ARG;
    if (!emb_a || !emb_b || !out_kad)
        return fail_with(s, MG_E_INVALID_ARG, "null arguments to mg_kad_files");
    try {
        EmbeddingSet a = load_embeddings(emb_a);
        EmbeddingSet b = load_embeddings(emb_b);
        KernelConfig kc;
        kc.scale = s->cfg.kad_scale;
        *out_kad = kad(a, b, kc);
        return MG_OK;
    } catch (const std::exception& e) {
        return fail_with(s, MG_E_RUNTIME, e.what());
    }
}

mg_status mg_eval_kad(mg_session* s, double* out_kad) {
    if (!s) return MG_E_INVALID_ARG;
    if (!out_kad) return fail_with(s, MG_E_INVALID_ARG, "null output pointer");
    try {
        KadReport report = stage_eval_kad(s->cfg, s->rd);
        *out_kad = report.value;
        return MG_OK;
    } catch (const std::exception& e) {
        std::string msg = e.what();
        mg_status code = msg.find("checkpoint") != std::string::npos ? MG_E_STATE
                                                                     : MG_E_RUNTIME;
        return fail_with(s, code, msg);
    }
}

}  // extern "C"
