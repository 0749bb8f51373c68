#pragma once

#include <vector>

#include "mixgen/audio.hpp"

namespace mixgen {

enum class EqType { LowShelf, Peak, HighShelf };

struct EqBand {
    EqType type = EqType::Peak;
    double freq_hz = 1000.0;
    double gain_db = 0.0;
    double q = 0.707;
};

struct CompressorParams {
    double threshold_db = -24.0;
    double ratio = 1.0;  // >= 1
    double attack_ms = 10.0;
    double release_ms = 100.0;
    double makeup_db = 0.0;
};

struct ReverbParams {
    double decay_s = 0.8;
    double wet_mix = 0.0;  // [0, 1]
};

// Ground-truth parameters of one synthetic chain; the verification oracle.
struct EffectChainParams {
    double gain_db = 0.0;
    std::vector<EqBand> eq_bands;
    CompressorParams comp;
    double pan = 0.0;           // [-1, 1]
    double haas_delay_ms = 0.0; // [0, 30]
    ReverbParams reverb;

    void validate() const;
};

struct BiquadCoeffs {
    double b0 = 1.0, b1 = 0.0, b2 = 0.0, a1 = 0.0, a2 = 0.0;  // normalized (a0 = 1)
};

// RBJ audio-EQ-cookbook designs.
BiquadCoeffs design_biquad(EqType type, double sample_rate, double freq_hz,
                           double gain_db, double q);

// |H(e^{j 2 pi f / fs})| from the coefficients.
double biquad_magnitude(const BiquadCoeffs& c, double freq_hz, double sample_rate);

void biquad_process(const BiquadCoeffs& c, std::vector<float>& x);

// Feed-forward compressor, RMS detector (5 ms window), 6 dB soft knee.
void compressor_process(const CompressorParams& p, std::vector<float>& x, int sample_rate);

// gain -> EQ -> compressor -> equal-power pan -> Haas (right channel) ->
// Schroeder reverb (wet/dry). Deterministic given (x, p, seed).
AudioBuffer apply_effect_chain(const AudioBuffer& x, const EffectChainParams& p,
                               uint64_t seed);

// Uniform (log-uniform for freq_hz and ratio) parameter ranges used by the
// synthetic data generator. The paper-side augmentation does not state its
// ranges, so these defaults are invented and config-exposed.
struct ChainRanges {
    double gain_db_min = -6.0, gain_db_max = 6.0;
    int n_eq_bands = 3;
    double eq_freq_min[3] = {60.0, 250.0, 2000.0};
    double eq_freq_max[3] = {250.0, 4000.0, 12000.0};
    double eq_gain_db_min = -9.0, eq_gain_db_max = 9.0;
    double eq_q_min = 0.4, eq_q_max = 4.0;
    double comp_threshold_db_min = -40.0, comp_threshold_db_max = -15.0;
    double comp_ratio_min = 1.0, comp_ratio_max = 8.0;
    double comp_attack_ms_min = 1.0, comp_attack_ms_max = 30.0;
    double comp_release_ms_min = 40.0, comp_release_ms_max = 250.0;
    double comp_makeup_db_min = 0.0, comp_makeup_db_max = 6.0;
    double pan_abs_max = 0.8;
    double haas_ms_min = 0.0, haas_ms_max = 12.0;
    double reverb_decay_s_min = 0.2, reverb_decay_s_max = 1.5;
    double wet_mix_min = 0.0, wet_mix_max = 0.45;

    void validate() const;
};

EffectChainParams sample_effect_chain(uint64_t rng_seed, const ChainRanges& ranges);

}  // namespace mixgen
