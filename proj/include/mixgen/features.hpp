#pragma once

#include <array>
#include <string>
#include <vector>

#include "mixgen/audio.hpp"

namespace mixgen {

// Track-level dynamics/stereo descriptors. Depending on context the six
// values are raw (dB / unitless) or standardized; helpers below convert.
struct DynStereoFeatures {
    double log_rms_l = 0.0;       // dB, max across 400 ms windows
    double log_rms_r = 0.0;       // dB
    double crest_db = 0.0;        // 20 log10(peak / overall RMS)
    double dyn_spread_db = 0.0;   // std-dev of per-window RMS in dB
    double stereo_width = 0.0;    // E_side / (E_mid + E_side), [0, 1]
    double stereo_imbalance = 0.0;  // (E_R - E_L) / (E_R + E_L), [-1, 1]

    std::array<double, 6> to_vec() const {
        return {log_rms_l, log_rms_r, crest_db, dyn_spread_db, stereo_width,
                stereo_imbalance};
    }
    static DynStereoFeatures from_vec(const std::array<double, 6>& v) {
        return {v[0], v[1], v[2], v[3], v[4], v[5]};
    }
};

struct FeatureStats {
    std::array<double, 6> mean{};
    std::array<double, 6> std{};

    void validate() const;
};

constexpr int kFourierDesignated = 6;
constexpr int kFourierRandom = 26;
constexpr int kFourierDim = 2 * (kFourierDesignated + kFourierRandom);  // 64

// Deterministic Fourier feature codec. The six designated diagonal rows keep
// |2 pi b_j f_j| < pi/2 over the standardized range [-4, 4], which makes the
// decode an exact atan2 inversion; the 26 seeded random rows only add
// representation richness and are ignored when decoding.
struct FourierCodec {
    int d_fx = 32;
    double lambda = 1.0;  // dyn-vs-fx RMS ratio used by augment_embedding
    FeatureStats stats;
    std::array<double, kFourierDesignated> designated_freqs{};
    std::array<std::array<double, 6>, kFourierRandom> random_matrix{};
    double scale = 1.0;

    void validate() const;
};

FourierCodec build_codec(int d_fx, double lambda, const FeatureStats& stats,
                         uint64_t seed, double rff_std = 0.2);

struct EffectEmbedding {
    std::vector<float> fx_part;
    std::vector<float> dyn_part;  // size kFourierDim

    std::vector<float> flat() const;
    static EffectEmbedding from_flat(const std::vector<float>& v, int d_fx);
};

constexpr double kFeatWindowMs = 400.0;
constexpr double kFeatHopMs = 100.0;

DynStereoFeatures extract_raw_features(const AudioBuffer& y,
                                       double window_ms = kFeatWindowMs,
                                       double hop_ms = kFeatHopMs);

DynStereoFeatures standardize(const DynStereoFeatures& f, const FeatureStats& stats);
DynStereoFeatures destandardize(const DynStereoFeatures& f, const FeatureStats& stats);

DynStereoFeatures extract_features(const AudioBuffer& y, const FeatureStats& stats,
                                   double window_ms = kFeatWindowMs,
                                   double hop_ms = kFeatHopMs);

FeatureStats compute_feature_stats(const std::vector<AudioBuffer>& corpus,
                                   double window_ms = kFeatWindowMs,
                                   double hop_ms = kFeatHopMs);

// [sin(2 pi B f); cos(2 pi B f)] scaled; out-of-range inputs are clamped to
// [-4, 4] with a warning.
std::vector<float> fourier_expand(const std::array<double, 6>& f_std,
                                  const FourierCodec& codec);
std::array<double, 6> fourier_invert(const std::vector<float>& v,
                                     const FourierCodec& codec);

EffectEmbedding augment_embedding(const std::vector<float>& fx,
                                  const DynStereoFeatures& f_std,
                                  const FourierCodec& codec);

struct SplitEmbedding {
    std::vector<float> fx;
    DynStereoFeatures features;  // de-standardized
};
SplitEmbedding split_embedding(const EffectEmbedding& z, const FourierCodec& codec);

void save_codec(const std::string& path, const FourierCodec& codec);
FourierCodec load_codec(const std::string& path);

}  // namespace mixgen
