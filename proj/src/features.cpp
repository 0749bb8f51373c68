#include "mixgen/features.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace mixgen {

void FeatureStats::validate() const {
    for (double m : mean) require(std::isfinite(m), "FeatureStats: non-finite mean");
    for (double s : std) require(s >= 1e-6, "FeatureStats: std below 1e-6");
}

void FourierCodec::validate() const {
    require(d_fx > 0, "codec: d_fx must be positive");
    require(lambda > 0.0, "codec: lambda must be positive");
    require(scale > 0.0, "codec: scale must be positive");
    stats.validate();
    for (double b : designated_freqs)
        require(b > 0.0 && 2.0 * M_PI * b * 4.0 < M_PI / 2.0,
                "codec: designated freq breaks the invertibility bound");
}

FourierCodec build_codec(int d_fx, double lambda, const FeatureStats& stats,
                         uint64_t seed, double rff_std) {
    FourierCodec c;
    c.d_fx = d_fx;
    c.lambda = lambda;
    c.stats = stats;
    c.designated_freqs.fill(0.06);  // max angle 2*pi*0.06*4 = 1.508 < pi/2
    Rng rng(seed);
    for (auto& row : c.random_matrix)
        for (auto& w : row) w = rff_std * rng.normal();
    c.validate();
    return c;
}

std::vector<float> EffectEmbedding::flat() const {
    std::vector<float> out;
    out.reserve(fx_part.size() + dyn_part.size());
    out.insert(out.end(), fx_part.begin(), fx_part.end());
    out.insert(out.end(), dyn_part.begin(), dyn_part.end());
    return out;
}

EffectEmbedding EffectEmbedding::from_flat(const std::vector<float>& v, int d_fx) {
    require(int(v.size()) == d_fx + kFourierDim,
            format_str("EffectEmbedding: flat size %zu != %d", v.size(), d_fx + kFourierDim));
    EffectEmbedding z;
    z.fx_part.assign(v.begin(), v.begin() + d_fx);
    z.dyn_part.assign(v.begin() + d_fx, v.end());
    return z;
}

namespace {

// Per-window overall RMS (both channels pooled per window).
std::vector<double> stereo_windowed_rms(const AudioBuffer& y, int win, int hop) {
    const int64_t n = y.frames();
    std::vector<double> out;
    auto win_rms = [&](int64_t start, int64_t len) {
        double acc = 0.0;
        for (int c = 0; c < 2; ++c)
            for (int64_t i = start; i < start + len; ++i)
                acc += double(y.ch[size_t(c)][size_t(i)]) * double(y.ch[size_t(c)][size_t(i)]);
        return std::sqrt(acc / double(2 * len));
    };
    if (n <= win) {
        out.push_back(win_rms(0, n));
        return out;
    }
    for (int64_t start = 0; start + win <= n; start += hop)
        out.push_back(win_rms(start, win));
    return out;
}

}  // namespace

DynStereoFeatures extract_raw_features(const AudioBuffer& y, double window_ms,
                                       double hop_ms) {
    y.validate();
    require(y.stereo(), "extract_features: input must be stereo");
    double r_all = rms_overall(y);
    require(r_all > 0.0, "silent-track: extract_features on silent input");

    const int win = std::max(1, int(std::lround(window_ms * 1e-3 * y.sample_rate)));
    const int hop = std::max(1, int(std::lround(hop_ms * 1e-3 * y.sample_rate)));

    DynStereoFeatures f;
    double rl = max_window_rms(y.ch[0], win, hop);
    double rr = max_window_rms(y.ch[1], win, hop);
    f.log_rms_l = lin_to_db(std::max(rl, 1e-6));
    f.log_rms_r = lin_to_db(std::max(rr, 1e-6));
    f.crest_db = lin_to_db(peak_abs(y) / r_all);

    auto wrms = stereo_windowed_rms(y, win, hop);
    double mean_db = 0.0;
    std::vector<double> dbs;
    dbs.reserve(wrms.size());
    for (double r : wrms) {
        dbs.push_back(lin_to_db(std::max(r, 1e-6)));
        mean_db += dbs.back();
    }
    mean_db /= double(dbs.size());
    double var = 0.0;
    for (double d : dbs) var += (d - mean_db) * (d - mean_db);
    f.dyn_spread_db = dbs.size() > 1 ? std::sqrt(var / double(dbs.size())) : 0.0;

    double e_mid = 0.0, e_side = 0.0, e_l = 0.0, e_r = 0.0;
    for (int64_t i = 0; i < y.frames(); ++i) {
        double l = y.ch[0][size_t(i)], r = y.ch[1][size_t(i)];
        double m = 0.5 * (l + r), s = 0.5 * (l - r);
        e_mid += m * m;
        e_side += s * s;
        e_l += l * l;
        e_r += r * r;
    }
    f.stereo_width = e_mid + e_side > 0.0 ? e_side / (e_mid + e_side) : 0.0;
    f.stereo_imbalance = e_l + e_r > 0.0 ? (e_r - e_l) / (e_r + e_l) : 0.0;
    return f;
}

DynStereoFeatures standardize(const DynStereoFeatures& f, const FeatureStats& stats) {
    stats.validate();
    auto v = f.to_vec();
    std::array<double, 6> out{};
    for (int i = 0; i < 6; ++i) out[size_t(i)] = (v[size_t(i)] - stats.mean[size_t(i)]) / stats.std[size_t(i)];
    return DynStereoFeatures::from_vec(out);
}

DynStereoFeatures destandardize(const DynStereoFeatures& f, const FeatureStats& stats) {
    stats.validate();
    auto v = f.to_vec();
    std::array<double, 6> out{};
    for (int i = 0; i < 6; ++i) out[size_t(i)] = v[size_t(i)] * stats.std[size_t(i)] + stats.mean[size_t(i)];
    return DynStereoFeatures::from_vec(out);
}

DynStereoFeatures extract_features(const AudioBuffer& y, const FeatureStats& stats,
                                   double window_ms, double hop_ms) {
    return standardize(extract_raw_features(y, window_ms, hop_ms), stats);
}

FeatureStats compute_feature_stats(const std::vector<AudioBuffer>& corpus,
                                   double window_ms, double hop_ms) {
    require(!corpus.empty(), "compute_feature_stats: empty corpus");
    std::array<double, 6> sum{}, sum2{};
    for (const auto& y : corpus) {
        auto v = extract_raw_features(y, window_ms, hop_ms).to_vec();
        for (int i = 0; i < 6; ++i) {
            sum[size_t(i)] += v[size_t(i)];
            sum2[size_t(i)] += v[size_t(i)] * v[size_t(i)];
        }
    }
    FeatureStats stats;
    double n = double(corpus.size());
    for (int i = 0; i < 6; ++i) {
        stats.mean[size_t(i)] = sum[size_t(i)] / n;
        double var = sum2[size_t(i)] / n - stats.mean[size_t(i)] * stats.mean[size_t(i)];
        stats.std[size_t(i)] = std::max(std::sqrt(std::max(var, 0.0)), 1e-6);
    }
    return stats;
}

namespace {

std::array<double, kFourierDesignated + kFourierRandom> codec_angles(
    const std::array<double, 6>& f, const FourierCodec& codec) {
    std::array<double, kFourierDesignated + kFourierRandom> angles{};
    for (int j = 0; j < kFourierDesignated; ++j)
        angles[size_t(j)] = 2.0 * M_PI * codec.designated_freqs[size_t(j)] * f[size_t(j)];
    for (int r = 0; r < kFourierRandom; ++r) {
        double acc = 0.0;
        for (int j = 0; j < 6; ++j) acc += codec.random_matrix[size_t(r)][size_t(j)] * f[size_t(j)];
        angles[size_t(kFourierDesignated + r)] = 2.0 * M_PI * acc;
    }
    return angles;
}

std::vector<float> expand_with_scale(const std::array<double, 6>& f_in,
                                     const FourierCodec& codec, double scale) {
    std::array<double, 6> f = f_in;
    for (int j = 0; j < 6; ++j) {
        if (std::fabs(f[size_t(j)]) > 4.0) {
            warn(format_str("fourier_expand: feature %d = %.3f outside [-4, 4], clamping",
                            j, f[size_t(j)]));
            f[size_t(j)] = f[size_t(j)] > 0.0 ? 4.0 : -4.0;
        }
    }
    auto angles = codec_angles(f, codec);
    const int half = kFourierDesignated + kFourierRandom;
    std::vector<float> out(static_cast<size_t>(kFourierDim));
    for (int k = 0; k < half; ++k) {
        out[size_t(k)] = float(scale * std::sin(angles[size_t(k)]));
        out[size_t(half + k)] = float(scale * std::cos(angles[size_t(k)]));
    }
    return out;
}

}  // namespace

std::vector<float> fourier_expand(const std::array<double, 6>& f_std,
                                  const FourierCodec& codec) {
    codec.validate();
    return expand_with_scale(f_std, codec, codec.scale);
}

std::array<double, 6> fourier_invert(const std::vector<float>& v,
                                     const FourierCodec& codec) {
    require(int(v.size()) == kFourierDim, "fourier_invert: wrong vector size");
    const int half = kFourierDesignated + kFourierRandom;
    std::array<double, 6> f{};
    for (int j = 0; j < kFourierDesignated; ++j) {
        double s = double(v[size_t(j)]);
        double c = double(v[size_t(half + j)]);
        // scale-free: atan2 cancels any positive per-embedding scaling
        double angle = (s == 0.0 && c == 0.0) ? 0.0 : std::atan2(s, c);
        f[size_t(j)] = angle / (2.0 * M_PI * codec.designated_freqs[size_t(j)]);
    }
    return f;
}

EffectEmbedding augment_embedding(const std::vector<float>& fx,
                                  const DynStereoFeatures& f_std,
                                  const FourierCodec& codec) {
    codec.validate();
    require(int(fx.size()) == codec.d_fx, "augment_embedding: fx size != codec d_fx");
    require(codec.lambda > 0.0, "augment_embedding: lambda must be positive");
    for (float x : fx) require(std::isfinite(x), "augment_embedding: non-finite fx");

    double fx_rms = 0.0;
    for (float x : fx) fx_rms += double(x) * double(x);
    fx_rms = std::sqrt(fx_rms / double(fx.size()));
    // RMS of a unit-scale [sin; cos] block is exactly 1/sqrt(2)
    double dyn_scale = fx_rms > 0.0 ? codec.lambda * fx_rms * std::sqrt(2.0) : codec.scale;

    EffectEmbedding z;
    z.fx_part = fx;
    z.dyn_part = expand_with_scale(f_std.to_vec(), codec, dyn_scale);
    return z;
}

SplitEmbedding split_embedding(const EffectEmbedding& z, const FourierCodec& codec) {
    codec.validate();
    require(int(z.fx_part.size()) == codec.d_fx, "split_embedding: fx dimension mismatch");
    require(int(z.dyn_part.size()) == kFourierDim, "split_embedding: dyn dimension mismatch");
    SplitEmbedding out;
    out.fx = z.fx_part;
    auto f_std = DynStereoFeatures::from_vec(fourier_invert(z.dyn_part, codec));
    auto f = destandardize(f_std, codec.stats);
    f.stereo_width = std::min(1.0, std::max(0.0, f.stereo_width));
    f.stereo_imbalance = std::min(1.0, std::max(-1.0, f.stereo_imbalance));
    out.features = f;
    return out;
}

namespace {

void put_f32(std::vector<uint8_t>& out, float v) {
    uint32_t u;
    std::memcpy(&u, &v, 4);
    out.push_back(uint8_t(u));
    out.push_back(uint8_t(u >> 8));
    out.push_back(uint8_t(u >> 16));
    out.push_back(uint8_t(u >> 24));
}

float get_f32(const uint8_t* p) {
    uint32_t u = uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 |
                 uint32_t(p[3]) << 24;
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

}  // namespace

void save_codec(const std::string& path, const FourierCodec& codec) {
    codec.validate();
    std::vector<uint8_t> out;
    out.insert(out.end(), {'M', 'G', 'F', 'C'});
    out.push_back(1);  // version u16 LE
    out.push_back(0);
    uint32_t d = uint32_t(codec.d_fx);
    out.push_back(uint8_t(d));
    out.push_back(uint8_t(d >> 8));
    out.push_back(uint8_t(d >> 16));
    out.push_back(uint8_t(d >> 24));
    put_f32(out, float(codec.lambda));
    for (int i = 0; i < 6; ++i) put_f32(out, float(codec.stats.mean[size_t(i)]));
    for (int i = 0; i < 6; ++i) put_f32(out, float(codec.stats.std[size_t(i)]));
    for (int i = 0; i < kFourierDesignated; ++i)
        put_f32(out, float(codec.designated_freqs[size_t(i)]));
    for (int r = 0; r < kFourierRandom; ++r)
        for (int j = 0; j < 6; ++j) put_f32(out, float(codec.random_matrix[size_t(r)][size_t(j)]));
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "save_codec: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    require(f.good(), "save_codec: short write");
}

FourierCodec load_codec(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "load_codec: cannot open " + path);
    std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
    const size_t expect = 4 + 2 + 4 + 4 + 12 * 4 + 6 * 4 + size_t(kFourierRandom) * 6 * 4;
    require(raw.size() == expect, "load_codec: truncated or oversized codec file");
    require(std::memcmp(raw.data(), "MGFC", 4) == 0, "load_codec: bad magic");
    uint16_t version = uint16_t(raw[4] | raw[5] << 8);
    require(version == 1, "load_codec: unsupported version");
    FourierCodec c;
    size_t pos = 6;
    c.d_fx = int(uint32_t(raw[pos]) | uint32_t(raw[pos + 1]) << 8 |
                 uint32_t(raw[pos + 2]) << 16 | uint32_t(raw[pos + 3]) << 24);
    pos += 4;
    c.lambda = double(get_f32(raw.data() + pos));
    pos += 4;
    for (int i = 0; i < 6; ++i, pos += 4) c.stats.mean[size_t(i)] = double(get_f32(raw.data() + pos));
    for (int i = 0; i < 6; ++i, pos += 4) c.stats.std[size_t(i)] = double(get_f32(raw.data() + pos));
    for (int i = 0; i < kFourierDesignated; ++i, pos += 4)
        c.designated_freqs[size_t(i)] = double(get_f32(raw.data() + pos));
    for (int r = 0; r < kFourierRandom; ++r)
        for (int j = 0; j < 6; ++j, pos += 4)
            c.random_matrix[size_t(r)][size_t(j)] = double(get_f32(raw.data() + pos));
    c.validate();
    return c;
}

}  // namespace mixgen
