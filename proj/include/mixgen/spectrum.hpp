#pragma once

#include <complex>
#include <string>
#include <vector>

#include "mixgen/audio.hpp"

namespace mixgen {

// Iterative radix-2 FFT, power-of-two sizes only. Templated so gradient
// checks can run the same transform in double.
template <typename T>
void fft_inplace(std::vector<std::complex<T>>& a, bool inverse) {
    const size_t n = a.size();
    require(n != 0 && (n & (n - 1)) == 0, "fft: size must be a power of two");
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        T ang = T(2.0 * M_PI) / T(len) * (inverse ? T(1) : T(-1));
        std::complex<T> wl(std::cos(ang), std::sin(ang));
        for (size_t i = 0; i < n; i += len) {
            std::complex<T> w(1);
            for (size_t k = 0; k < len / 2; ++k) {
                std::complex<T> u = a[i + k];
                std::complex<T> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse) {
        T inv = T(1) / T(n);
        for (auto& x : a) x *= inv;
    }
}

template <typename T>
std::vector<T> hann_window(int n) {
    std::vector<T> w(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i)
        w[size_t(i)] = T(0.5) * (T(1) - std::cos(T(2.0 * M_PI) * T(i) / T(n)));
    return w;
}

inline int next_pow2(int64_t n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

// 31 third-octave center frequencies, 20 Hz .. 20 kHz.
constexpr int kNumBands = 31;
const std::vector<double>& third_octave_centers();

struct SpectrumProfile {
    std::vector<double> band_gains;  // linear magnitudes, size kNumBands
    std::string reference;

    void validate() const;
};

// Long-term third-octave magnitudes via Welch-averaged power spectrum.
std::vector<double> band_magnitudes(const AudioBuffer& x, int fft_size = 8192);

SpectrumProfile compute_average_spectrum(const std::vector<AudioBuffer>& corpus);

// Match the long-term band magnitudes of x to the profile with a smoothed
// zero-phase gain curve applied by FFT multiply. Per-band gain is clamped to
// +/- 24 dB.
AudioBuffer eq_normalize(const AudioBuffer& x, const SpectrumProfile& profile);

void save_profile(const std::string& path, const SpectrumProfile& p);
SpectrumProfile load_profile(const std::string& path);

// Mel filterbank over an STFT power spectrum.
struct MelBank {
    int sample_rate = kDefaultSampleRate;
    int fft_size = 1024;
    int hop = 256;
    int n_mels = 64;
    double fmin = 40.0;
    double fmax = 16000.0;
    // triangle weights per mel band: (bin index, weight)
    std::vector<std::vector<std::pair<int, double>>> filters;

    void build();
};

// STFT power frames: out[frame][bin], bins = fft_size/2+1.
template <typename T>
std::vector<std::vector<T>> stft_power(const std::vector<T>& x, int fft_size, int hop) {
    std::vector<T> win = hann_window<T>(fft_size);
    std::vector<std::vector<T>> frames;
    int64_t n = int64_t(x.size());
    if (n < fft_size) return frames;
    for (int64_t start = 0; start + fft_size <= n; start += hop) {
        std::vector<std::complex<T>> buf(static_cast<size_t>(fft_size));
        for (int i = 0; i < fft_size; ++i)
            buf[size_t(i)] = x[size_t(start + i)] * win[size_t(i)];
        fft_inplace(buf, false);
        std::vector<T> pow(static_cast<size_t>(fft_size / 2 + 1));
        for (int k = 0; k <= fft_size / 2; ++k)
            pow[size_t(k)] = buf[size_t(k)].real() * buf[size_t(k)].real() +
                             buf[size_t(k)].imag() * buf[size_t(k)].imag();
        frames.push_back(std::move(pow));
    }
    return frames;
}

// Log-mel frames for a mono signal: out[frame][band].
template <typename T>
std::vector<std::vector<T>> log_mel_frames(const std::vector<T>& x, const MelBank& mel) {
    auto pow = stft_power<T>(x, mel.fft_size, mel.hop);
    std::vector<std::vector<T>> out;
    out.reserve(pow.size());
    for (const auto& frame : pow) {
        std::vector<T> bands(static_cast<size_t>(mel.n_mels));
        for (int b = 0; b < mel.n_mels; ++b) {
            T acc = 0;
            for (const auto& [k, w] : mel.filters[size_t(b)]) acc += T(w) * frame[size_t(k)];
            bands[size_t(b)] = std::log(acc + T(1e-10));
        }
        out.push_back(std::move(bands));
    }
    return out;
}

}  // namespace mixgen
