#pragma once

#include "mixgen/config.hpp"
#include "mixgen/diffusion.hpp"
#include "mixgen/embedding.hpp"
#include "mixgen/encoders.hpp"
#include "mixgen/mmd.hpp"
#include "mixgen/processor.hpp"
#include "mixgen/synth.hpp"

namespace mixgen {

// Run directory: config.lock, metrics.jsonl, data/, models/, mixes/.
struct RunDir {
    std::string root;

    explicit RunDir(std::string root_);

    std::string path(const std::string& rel) const;
    void ensure_dir(const std::string& rel) const;
    void append_metric(const std::string& stage, int64_t step, const std::string& metric,
                       double value) const;
    void write_lock(const RunConfig& cfg) const;
};

struct Models {
    ContentEncoder content;
    EffectEncoder fx;
    Adaptor adaptor;
    ScoreNet<float> score;
    EdmConfig edm;
    NoiseSchedule schedule;
    ProcessorContext proc;
};

// Stages behind the CLI subcommands.
void stage_gen_data(const RunConfig& cfg, const RunDir& rd);
void stage_train_fxenc(const RunConfig& cfg, const RunDir& rd);
void stage_train_adaptor(const RunConfig& cfg, const RunDir& rd);
void stage_train_score(const RunConfig& cfg, const RunDir& rd);
void stage_train_proc(const RunConfig& cfg, const RunDir& rd);
void stage_mix(const RunConfig& cfg, const RunDir& rd, uint64_t seed);
void stage_baseline_eqloud(const RunConfig& cfg, const RunDir& rd);

struct KadReport {
    double value = 0.0;
    std::string dir_a, dir_b;
    int rows_a = 0, rows_b = 0;
};
KadReport stage_eval_kad(const RunConfig& cfg, const RunDir& rd);

Models load_models(const RunConfig& cfg, const RunDir& rd);

// One song through the full system.
struct MixOptions {
    uint64_t seed = 0;
    // test hooks: explicit identity assignment and initial diffusion noise
    const std::vector<int>* ids = nullptr;
    const Tensor<float>* init_noise = nullptr;
    // oracle-mode embeddings (one per track); bypasses the sampler
    const std::vector<EffectEmbedding>* oracle_z = nullptr;
};

struct MixResult {
    AudioBuffer mix;
    TrackSet stems;
    EmbeddingSet embeddings;  // the per-track effect embeddings that were used
};

MixResult mix_song(Models& models, const RunConfig& cfg, const TrackSet& dry_tracks,
                   const MixOptions& opts);

// Equal-loudness baseline: common per-track RMS, center-panned monos, summed,
// peak-normalized to -1 dBFS.
AudioBuffer equal_loudness_mix(const TrackSet& tracks);

// Effect-encoder embeddings of every *_mix.wav in a directory (sorted).
EmbeddingSet embed_mix_dir(EffectEncoder& fx, const std::string& dir);

// Mix explicitly given track files (the per-track inference surface); writes
// <out_prefix>_mix.wav and stems. embeddings_path, when given, supplies
// oracle z rows in the MGEB format instead of sampling.
void mix_files(const RunConfig& cfg, const RunDir& rd,
               const std::vector<std::string>& track_wavs,
               const std::string& embeddings_path, const std::string& out_prefix,
               uint64_t seed);

// Synthetic benchmark/train data helpers shared by stages and tests.
struct SongPaths {
    std::vector<std::string> dry;
    std::vector<std::string> wet;
    std::string ref_mix;
};
SongPaths song_paths(const RunDir& rd, const std::string& split, int song, int n_tracks);
int count_songs(const RunDir& rd, const std::string& split);
int count_tracks(const RunDir& rd, const std::string& split, int song);

}  // namespace mixgen
