#pragma once

#include <string>
#include <vector>

#include "mixgen/fx.hpp"
#include "mixgen/hash.hpp"

namespace mixgen {

// Flat key = value run configuration. Every run artifact records the hash of
// the resolved config (seed and threads excluded, so one config file drives
// all stages and repeated runs with different seeds stay compatible).
struct RunConfig {
    // core
    uint64_t seed = 1;
    int sample_rate = 44100;
    double segment_s = 11.9;
    int n_max = 14;
    int d_fx = 32;
    int c_dim = 64;
    double lambda_dyn = 1.0;
    double sigma_t = 0.05;
    bool smooth_dry = true;
    std::string input_domain = "dry";  // dry | wet
    int threads = 0;

    // codec / encoders
    uint64_t codec_seed = 7;
    double rff_std = 0.2;
    int mel_bands = 64;
    int fxenc_width = 48;
    uint64_t fxenc_seed = 11;
    uint64_t content_seed = 5;

    // diffusion schedule
    double sigma_min = 0.002;
    double sigma_max_mult = 80.0;
    double rho = 7.0;
    int sample_steps = 32;
    double p_mean = -1.2;
    double p_std = 1.2;

    // score network
    int score_blocks = 4;
    int score_width = 128;
    int score_heads = 4;
    double score_lr = 1e-3;
    int score_steps = 3000;
    int score_batch = 8;
    uint64_t score_seed = 21;

    // effect-encoder training
    int fxenc_steps = 2500;
    int fxenc_batch = 16;
    double fxenc_lr = 1e-3;
    double fxenc_temp = 0.1;

    // adaptor
    int adaptor_hidden = 128;
    int adaptor_epochs = 200;
    double adaptor_lr = 1e-3;
    uint64_t adaptor_seed = 31;

    // processor
    int proc_channels = 64;
    int proc_blocks = 10;
    int proc_kernel = 15;
    double proc_lr = 1e-3;
    int proc_steps = 800;
    int64_t proc_crop = 16384;
    double beta_deep = 0.1;
    double rms_target = 0.05;
    uint64_t proc_seed = 41;

    // data generation
    uint64_t data_seed = 101;
    int songs_train = 48;
    int songs_heldout = 12;
    int songs_bench = 40;
    int tracks_min = 2;
    int tracks_max = 5;
    int fxenc_chains = 256;
    int fxenc_sources = 12;
    double fxenc_segment_s = 0.75;
    bool regroup = true;
    std::string mix_mode = "generative";  // generative | oracle

    // synthetic chain ranges
    ChainRanges chains;

    // evaluation
    double kad_scale = 100.0;
    std::string eval_dir_a = "mixes/generative";
    std::string eval_dir_b = "mixes/ref";

    int64_t segment_frames() const { return int64_t(segment_s * sample_rate); }
    void validate() const;
};

RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical text form: every key, sorted, one per line.
std::string serialize_config(const RunConfig& cfg);

// Hash of the canonical form minus the excluded keys (seed, threads).
Sha256Digest config_hash(const RunConfig& cfg);

void write_config_lock(const std::string& path, const RunConfig& cfg);

}  // namespace mixgen
