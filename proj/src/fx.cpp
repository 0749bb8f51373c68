#include "mixgen/fx.hpp"

#include <cmath>
#include <complex>

namespace mixgen {

void EffectChainParams::validate() const {
    require(std::isfinite(gain_db) && gain_db >= -60.0 && gain_db <= 24.0,
            "chain: gain_db out of range");
    for (const auto& b : eq_bands) {
        require(b.freq_hz > 20.0 && b.freq_hz < 20000.0, "chain: eq freq out of range");
        require(b.q > 0.1 && b.q < 10.0, "chain: eq Q out of range");
        require(std::isfinite(b.gain_db) && std::fabs(b.gain_db) <= 24.0,
                "chain: eq gain out of range");
    }
    require(comp.ratio >= 1.0, "chain: compressor ratio must be >= 1");
    require(comp.attack_ms > 0.0 && comp.release_ms > 0.0, "chain: compressor times");
    require(pan >= -1.0 && pan <= 1.0, "chain: pan out of range");
    require(haas_delay_ms >= 0.0 && haas_delay_ms <= 30.0, "chain: haas delay out of range");
    require(reverb.wet_mix >= 0.0 && reverb.wet_mix <= 1.0, "chain: wet_mix out of range");
    require(reverb.decay_s > 0.0, "chain: reverb decay must be positive");
}

BiquadCoeffs design_biquad(EqType type, double fs, double f0, double gain_db, double q) {
    double A = std::pow(10.0, gain_db / 40.0);
    double w0 = 2.0 * M_PI * f0 / fs;
    double cw = std::cos(w0), sw = std::sin(w0);
    double alpha = sw / (2.0 * q);
    double b0, b1, b2, a0, a1, a2;
    switch (type) {
        case EqType::Peak: {
            b0 = 1.0 + alpha * A;
            b1 = -2.0 * cw;
            b2 = 1.0 - alpha * A;
            a0 = 1.0 + alpha / A;
            a1 = -2.0 * cw;
            a2 = 1.0 - alpha / A;
            break;
        }
        case EqType::LowShelf: {
            double s2A = 2.0 * std::sqrt(A) * alpha;
            b0 = A * ((A + 1.0) - (A - 1.0) * cw + s2A);
            b1 = 2.0 * A * ((A - 1.0) - (A + 1.0) * cw);
            b2 = A * ((A + 1.0) - (A - 1.0) * cw - s2A);
            a0 = (A + 1.0) + (A - 1.0) * cw + s2A;
            a1 = -2.0 * ((A - 1.0) + (A + 1.0) * cw);
            a2 = (A + 1.0) + (A - 1.0) * cw - s2A;
            break;
        }
        case EqType::HighShelf:
        default: {
            double s2A = 2.0 * std::sqrt(A) * alpha;
            b0 = A * ((A + 1.0) + (A - 1.0) * cw + s2A);
            b1 = -2.0 * A * ((A - 1.0) + (A + 1.0) * cw);
            b2 = A * ((A + 1.0) + (A - 1.0) * cw - s2A);
            a0 = (A + 1.0) - (A - 1.0) * cw + s2A;
            a1 = 2.0 * ((A - 1.0) - (A + 1.0) * cw);
            a2 = (A + 1.0) - (A - 1.0) * cw - s2A;
            break;
        }
    }
    BiquadCoeffs c;
    c.b0 = b0 / a0;
    c.b1 = b1 / a0;
    c.b2 = b2 / a0;
    c.a1 = a1 / a0;
    c.a2 = a2 / a0;
    return c;
}

double biquad_magnitude(const BiquadCoeffs& c, double freq_hz, double fs) {
    std::complex<double> z = std::exp(std::complex<double>(0.0, -2.0 * M_PI * freq_hz / fs));
    std::complex<double> num = c.b0 + c.b1 * z + c.b2 * z * z;
    std::complex<double> den = 1.0 + c.a1 * z + c.a2 * z * z;
    return std::abs(num / den);
}

void biquad_process(const BiquadCoeffs& c, std::vector<float>& x) {
    // transposed direct form II, double state
    double z1 = 0.0, z2 = 0.0;
    for (auto& s : x) {
        double in = double(s);
        double out = c.b0 * in + z1;
        z1 = c.b1 * in - c.a1 * out + z2;
        z2 = c.b2 * in - c.a2 * out;
        s = float(out);
    }
}

void compressor_process(const CompressorParams& p, std::vector<float>& x, int sample_rate) {
    if (p.ratio == 1.0 && p.makeup_db == 0.0) return;  // exact identity
    const double knee_db = 6.0;
    const double det_alpha = std::exp(-1.0 / (0.005 * sample_rate));
    const double atk_alpha = std::exp(-1.0 / (p.attack_ms * 1e-3 * sample_rate));
    const double rel_alpha = std::exp(-1.0 / (p.release_ms * 1e-3 * sample_rate));
    const double inv_ratio = 1.0 / p.ratio;
    const double t = p.threshold_db;

    double env = 0.0;      // running mean square
    double gain_db = 0.0;  // smoothed gain (<= 0 before makeup)
    for (auto& s : x) {
        double in = double(s);
        env = det_alpha * env + (1.0 - det_alpha) * in * in;
        double level_db = 10.0 * std::log10(env + 1e-12);
        double over = level_db - t;
        double target_db;
        if (over <= -knee_db / 2.0) {
            target_db = 0.0;
        } else if (over < knee_db / 2.0) {
            double d = over + knee_db / 2.0;
            target_db = (inv_ratio - 1.0) * d * d / (2.0 * knee_db);
        } else {
            target_db = (inv_ratio - 1.0) * over;
        }
        // attack when reducing gain further, release when recovering
        double alpha = target_db < gain_db ? atk_alpha : rel_alpha;
        gain_db = alpha * gain_db + (1.0 - alpha) * target_db;
        s = float(in * db_to_lin(gain_db + p.makeup_db));
    }
}

namespace {

// Schroeder reverberator: 4 parallel feedback combs into 2 series allpasses.
std::vector<float> schroeder_reverb(const std::vector<float>& x, int sample_rate,
                                    double decay_s, double jitter) {
    static const double comb_ms[4] = {29.7, 37.1, 41.1, 43.7};
    static const double ap_ms[2] = {5.0, 1.7};
    const int64_t n = int64_t(x.size());
    std::vector<float> acc(size_t(n), 0.0f);
    for (int ci = 0; ci < 4; ++ci) {
        double ms = comb_ms[ci] * (1.0 + jitter * (ci % 2 == 0 ? 1.0 : -1.0));
        int delay = std::max(1, int(std::lround(ms * 1e-3 * sample_rate)));
        double g = std::pow(10.0, -3.0 * (delay / double(sample_rate)) / decay_s);
        std::vector<float> line(size_t(delay), 0.0f);
        size_t pos = 0;
        for (int64_t i = 0; i < n; ++i) {
            float out = line[pos];
            line[pos] = x[size_t(i)] + float(g) * out;
            pos = (pos + 1) % size_t(delay);
            acc[size_t(i)] += 0.25f * out;
        }
    }
    for (double ms : ap_ms) {
        int delay = std::max(1, int(std::lround(ms * 1e-3 * sample_rate)));
        const float g = 0.7f;
        std::vector<float> line(size_t(delay), 0.0f);
        size_t pos = 0;
        for (int64_t i = 0; i < n; ++i) {
            float buf = line[pos];
            float in = acc[size_t(i)];
            float v = in + (-g) * buf;
            line[pos] = v;
            pos = (pos + 1) % size_t(delay);
            acc[size_t(i)] = buf + g * v;
        }
    }
    return acc;
}

}  // namespace

AudioBuffer apply_effect_chain(const AudioBuffer& x, const EffectChainParams& p,
                               uint64_t seed) {
    x.validate();
    require(x.mono(), "apply_effect_chain: input must be mono");
    p.validate();

    std::vector<float> mono = x.ch[0];

    double gain = db_to_lin(p.gain_db);
    if (gain != 1.0)
        for (auto& s : mono) s = float(double(s) * gain);

    for (const auto& band : p.eq_bands) {
        auto c = design_biquad(band.type, x.sample_rate, band.freq_hz, band.gain_db, band.q);
        biquad_process(c, mono);
    }

    compressor_process(p.comp, mono, x.sample_rate);

    // equal-power pan
    double theta = (p.pan + 1.0) * M_PI / 4.0;
    float gl = float(std::cos(theta));
    float gr = float(std::sin(theta));
    AudioBuffer out(2, x.frames(), x.sample_rate);
    for (int64_t i = 0; i < x.frames(); ++i) {
        out.ch[0][size_t(i)] = mono[size_t(i)] * gl;
        out.ch[1][size_t(i)] = mono[size_t(i)] * gr;
    }

    // Haas delay on the right channel, same frame count
    int delay = int(std::lround(p.haas_delay_ms * 1e-3 * x.sample_rate));
    if (delay > 0) {
        auto& r = out.ch[1];
        for (int64_t i = x.frames() - 1; i >= delay; --i) r[size_t(i)] = r[size_t(i - delay)];
        for (int64_t i = 0; i < delay && i < x.frames(); ++i) r[size_t(i)] = 0.0f;
    }

    if (p.reverb.wet_mix > 0.0) {
        Rng rng(seed);
        for (int c = 0; c < 2; ++c) {
            // small seeded delay spread decorrelates the two channels
            double jitter = 0.02 * rng.uniform(-1.0, 1.0);
            auto wet = schroeder_reverb(out.ch[size_t(c)], x.sample_rate,
                                        p.reverb.decay_s, jitter);
            const float w = float(p.reverb.wet_mix);
            for (int64_t i = 0; i < x.frames(); ++i)
                out.ch[size_t(c)][size_t(i)] =
                    (1.0f - w) * out.ch[size_t(c)][size_t(i)] + w * wet[size_t(i)];
        }
    }
    return out;
}

void ChainRanges::validate() const {
    auto ok = [](double lo, double hi) { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; };
    require(ok(gain_db_min, gain_db_max), "ranges: gain");
    require(n_eq_bands >= 0 && n_eq_bands <= 3, "ranges: eq band count");
    for (int i = 0; i < n_eq_bands; ++i) {
        require(ok(eq_freq_min[i], eq_freq_max[i]) && eq_freq_min[i] > 20.0 &&
                    eq_freq_max[i] < 20000.0,
                "ranges: eq freq");
        require(eq_freq_min[i] > 0.0, "ranges: eq freq must be positive");
    }
    require(ok(eq_gain_db_min, eq_gain_db_max), "ranges: eq gain");
    require(ok(eq_q_min, eq_q_max) && eq_q_min > 0.1 && eq_q_max < 10.0, "ranges: eq q");
    require(ok(comp_threshold_db_min, comp_threshold_db_max), "ranges: threshold");
    require(ok(comp_ratio_min, comp_ratio_max) && comp_ratio_min >= 1.0, "ranges: ratio");
    require(ok(comp_attack_ms_min, comp_attack_ms_max) && comp_attack_ms_min > 0.0,
            "ranges: attack");
    require(ok(comp_release_ms_min, comp_release_ms_max) && comp_release_ms_min > 0.0,
            "ranges: release");
    require(ok(comp_makeup_db_min, comp_makeup_db_max), "ranges: makeup");
    require(pan_abs_max >= 0.0 && pan_abs_max <= 1.0, "ranges: pan");
    require(ok(haas_ms_min, haas_ms_max) && haas_ms_max <= 30.0, "ranges: haas");
    require(ok(reverb_decay_s_min, reverb_decay_s_max) && reverb_decay_s_min > 0.0,
            "ranges: decay");
    require(ok(wet_mix_min, wet_mix_max) && wet_mix_min >= 0.0 && wet_mix_max <= 1.0,
            "ranges: wet mix");
}

EffectChainParams sample_effect_chain(uint64_t rng_seed, const ChainRanges& r) {
    r.validate();
    Rng rng(rng_seed);
    EffectChainParams p;
    p.gain_db = rng.uniform(r.gain_db_min, r.gain_db_max);
    static const EqType kTypes[3] = {EqType::LowShelf, EqType::Peak, EqType::HighShelf};
    for (int i = 0; i < r.n_eq_bands; ++i) {
        EqBand b;
        b.type = kTypes[i % 3];
        b.freq_hz = r.eq_freq_min[i] == r.eq_freq_max[i]
                        ? r.eq_freq_min[i]
                        : rng.log_uniform(r.eq_freq_min[i], r.eq_freq_max[i]);
        b.gain_db = rng.uniform(r.eq_gain_db_min, r.eq_gain_db_max);
        b.q = rng.uniform(r.eq_q_min, r.eq_q_max);
        p.eq_bands.push_back(b);
    }
    p.comp.threshold_db = rng.uniform(r.comp_threshold_db_min, r.comp_threshold_db_max);
    p.comp.ratio = r.comp_ratio_min == r.comp_ratio_max
                       ? r.comp_ratio_min
                       : rng.log_uniform(r.comp_ratio_min, r.comp_ratio_max);
    p.comp.attack_ms = rng.uniform(r.comp_attack_ms_min, r.comp_attack_ms_max);
    p.comp.release_ms = rng.uniform(r.comp_release_ms_min, r.comp_release_ms_max);
    p.comp.makeup_db = rng.uniform(r.comp_makeup_db_min, r.comp_makeup_db_max);
    p.pan = rng.uniform(-r.pan_abs_max, r.pan_abs_max);
    p.haas_delay_ms = rng.uniform(r.haas_ms_min, r.haas_ms_max);
    p.reverb.decay_s = rng.uniform(r.reverb_decay_s_min, r.reverb_decay_s_max);
    p.reverb.wet_mix = rng.uniform(r.wet_mix_min, r.wet_mix_max);
    p.validate();
    return p;
}

}  // namespace mixgen
