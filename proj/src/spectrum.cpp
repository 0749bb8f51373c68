#include "mixgen/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "json.hpp"

namespace mixgen {

const std::vector<double>& third_octave_centers() {
    static const std::vector<double> centers = [] {
        std::vector<double> c;
        // 10^(k/10) for k = 13..43 gives the preferred 20 Hz .. 20 kHz series.
        for (int k = 13; k <= 43; ++k) c.push_back(std::pow(10.0, double(k) / 10.0));
        return c;
    }();
    return centers;
}

void SpectrumProfile::validate() const {
    require(int(band_gains.size()) == kNumBands, "SpectrumProfile: wrong band count");
    for (double g : band_gains)
        require(std::isfinite(g) && g >= 0.0, "SpectrumProfile: bad band gain");
}

std::vector<double> band_magnitudes(const AudioBuffer& x, int fft_size) {
    x.validate();
    const auto& centers = third_octave_centers();
    // Welch average of the power spectrum, all channels pooled.
    std::vector<double> avg_pow(size_t(fft_size / 2 + 1), 0.0);
    int64_t n_frames = 0;
    for (const auto& cdata : x.ch) {
        std::vector<double> xd(cdata.begin(), cdata.end());
        if (int64_t(xd.size()) < fft_size) xd.resize(size_t(fft_size), 0.0);
        auto frames = stft_power<double>(xd, fft_size, fft_size / 2);
        for (const auto& f : frames) {
            for (size_t k = 0; k < avg_pow.size(); ++k) avg_pow[k] += f[k];
            ++n_frames;
        }
    }
    require(n_frames > 0, "band_magnitudes: signal too short");
    for (auto& p : avg_pow) p /= double(n_frames);

    double bin_hz = double(x.sample_rate) / double(fft_size);
    std::vector<double> mags(size_t(kNumBands), 0.0);
    const double edge = std::pow(2.0, 1.0 / 6.0);
    for (int b = 0; b < kNumBands; ++b) {
        double lo = centers[size_t(b)] / edge;
        double hi = centers[size_t(b)] * edge;
        int k_lo = std::max(1, int(std::ceil(lo / bin_hz)));
        int k_hi = std::min(fft_size / 2, int(std::floor(hi / bin_hz)));
        if (k_hi < k_lo) {  // band narrower than one bin: take nearest bin
            int k = std::max(1, std::min(fft_size / 2, int(std::round(centers[size_t(b)] / bin_hz))));
            k_lo = k_hi = k;
        }
        double acc = 0.0;
        for (int k = k_lo; k <= k_hi; ++k) acc += avg_pow[size_t(k)];
        mags[size_t(b)] = std::sqrt(acc / double(k_hi - k_lo + 1));
    }
    return mags;
}

SpectrumProfile compute_average_spectrum(const std::vector<AudioBuffer>& corpus) {
    require(!corpus.empty(), "compute_average_spectrum: empty corpus");
    std::vector<double> log_acc(size_t(kNumBands), 0.0);
    for (const auto& track : corpus) {
        auto mags = band_magnitudes(track);
        for (int b = 0; b < kNumBands; ++b)
            log_acc[size_t(b)] += std::log(std::max(mags[size_t(b)], 1e-12));
    }
    SpectrumProfile p;
    p.reference = format_str("corpus-%zu", corpus.size());
    p.band_gains.resize(size_t(kNumBands));
    for (int b = 0; b < kNumBands; ++b)
        p.band_gains[size_t(b)] = std::exp(log_acc[size_t(b)] / double(corpus.size()));
    return p;
}

namespace {
constexpr double kMaxBandGainDb = 24.0;
}

AudioBuffer eq_normalize(const AudioBuffer& x, const SpectrumProfile& profile) {
    x.validate();
    profile.validate();
    require(rms_overall(x) > 0.0, "silent-track: eq_normalize on silent input");

    auto mags = band_magnitudes(x);
    const auto& centers = third_octave_centers();
    std::vector<double> gain_db(static_cast<size_t>(kNumBands));
    for (int b = 0; b < kNumBands; ++b) {
        double target = profile.band_gains[size_t(b)];
        double have = std::max(mags[size_t(b)], 1e-12);
        double g = lin_to_db(std::max(target, 1e-12) / have);
        gain_db[size_t(b)] = std::min(kMaxBandGainDb, std::max(-kMaxBandGainDb, g));
    }

    // Zero-phase FFT-domain filter: interpolate the band gains (in dB over
    // log-frequency), smooth lightly, and multiply the full spectrum.
    int fft_size = next_pow2(x.frames());
    fft_size = std::max(fft_size, 8192);
    double bin_hz = double(x.sample_rate) / double(fft_size);
    std::vector<double> curve_db(static_cast<size_t>(fft_size / 2 + 1));
    for (int k = 0; k <= fft_size / 2; ++k) {
        double f = std::max(k * bin_hz, 1.0);
        double lf = std::log10(f);
        double lo_c = std::log10(centers.front());
        double hi_c = std::log10(centers.back());
        double g;
        if (lf <= lo_c) {
            g = gain_db.front();
        } else if (lf >= hi_c) {
            g = gain_db.back();
        } else {
            double pos = (lf - lo_c) / (hi_c - lo_c) * double(kNumBands - 1);
            int i0 = int(std::floor(pos));
            int i1 = std::min(kNumBands - 1, i0 + 1);
            double t = pos - i0;
            g = (1.0 - t) * gain_db[size_t(i0)] + t * gain_db[size_t(i1)];
        }
        curve_db[size_t(k)] = g;
    }
    // 3-point smoothing pass over the curve to avoid ringing at band edges.
    std::vector<double> smooth = curve_db;
    for (int k = 1; k < fft_size / 2; ++k)
        smooth[size_t(k)] = 0.25 * curve_db[size_t(k - 1)] + 0.5 * curve_db[size_t(k)] +
                            0.25 * curve_db[size_t(k + 1)];

    AudioBuffer out(x.channels(), x.frames(), x.sample_rate);
    for (int c = 0; c < x.channels(); ++c) {
        std::vector<std::complex<double>> buf(static_cast<size_t>(fft_size));
        for (int64_t i = 0; i < x.frames(); ++i) buf[size_t(i)] = double(x.ch[size_t(c)][size_t(i)]);
        fft_inplace(buf, false);
        for (int k = 0; k <= fft_size / 2; ++k) {
            double g = db_to_lin(smooth[size_t(k)]);
            buf[size_t(k)] *= g;
            if (k != 0 && k != fft_size / 2) buf[size_t(fft_size - k)] *= g;
        }
        fft_inplace(buf, true);
        for (int64_t i = 0; i < x.frames(); ++i)
            out.ch[size_t(c)][size_t(i)] = float(buf[size_t(i)].real());
    }
    return out;
}

void save_profile(const std::string& path, const SpectrumProfile& p) {
    p.validate();
    nlohmann::json j;
    j["reference"] = p.reference;
    j["band_gains"] = p.band_gains;
    std::ofstream f(path);
    require(f.good(), "save_profile: cannot open " + path);
    f << j.dump(2) << "\n";
}

SpectrumProfile load_profile(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "load_profile: cannot open " + path);
    nlohmann::json j;
    f >> j;
    SpectrumProfile p;
    p.reference = j.at("reference").get<std::string>();
    p.band_gains = j.at("band_gains").get<std::vector<double>>();
    p.validate();
    return p;
}

void MelBank::build() {
    auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
    auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
    double mel_lo = hz_to_mel(fmin);
    double mel_hi = hz_to_mel(fmax);
    std::vector<double> edges(size_t(n_mels + 2));
    for (int i = 0; i < n_mels + 2; ++i)
        edges[size_t(i)] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * double(i) / double(n_mels + 1));
    double bin_hz = double(sample_rate) / double(fft_size);
    filters.assign(size_t(n_mels), {});
    for (int b = 0; b < n_mels; ++b) {
        double lo = edges[size_t(b)], mid = edges[size_t(b + 1)], hi = edges[size_t(b + 2)];
        for (int k = 0; k <= fft_size / 2; ++k) {
            double f = k * bin_hz;
            double w = 0.0;
            if (f > lo && f < mid)
                w = (f - lo) / (mid - lo);
            else if (f >= mid && f < hi)
                w = (hi - f) / (hi - mid);
            if (w > 0.0) filters[size_t(b)].push_back({k, w});
        }
        if (filters[size_t(b)].empty()) {
            int k = std::min(fft_size / 2, std::max(0, int(std::round(mid / bin_hz))));
            filters[size_t(b)].push_back({k, 1.0});
        }
    }
}

}  // namespace mixgen
