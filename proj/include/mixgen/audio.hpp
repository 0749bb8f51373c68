#pragma once

#include <string>
#include <vector>

#include "mixgen/common.hpp"

namespace mixgen {

constexpr int kDefaultSampleRate = 44100;

// Interleaving-free audio: one vector per channel, 1 or 2 channels.
struct AudioBuffer {
    int sample_rate = kDefaultSampleRate;
    std::vector<std::vector<float>> ch;

    AudioBuffer() = default;
    AudioBuffer(int channels, int64_t frames, int sr = kDefaultSampleRate)
        : sample_rate(sr), ch(size_t(channels), std::vector<float>(size_t(frames), 0.0f)) {}

    int channels() const { return int(ch.size()); }
    int64_t frames() const { return ch.empty() ? 0 : int64_t(ch[0].size()); }
    bool mono() const { return channels() == 1; }
    bool stereo() const { return channels() == 2; }

    void validate() const;
    bool finite() const;
};

struct TrackSet {
    std::vector<AudioBuffer> tracks;
    int valid_count = 0;

    void validate() const;
};

enum class WavFormat { Pcm16, Pcm24, Float32 };

AudioBuffer read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioBuffer& buf,
               WavFormat fmt = WavFormat::Float32);

// Energy / level measurements.
double rms_overall(const AudioBuffer& buf);              // across all channels
double rms_of(const std::vector<float>& x);
double peak_abs(const AudioBuffer& buf);

// Per-channel RMS over sliding windows; the final partial window is dropped
// unless the signal is shorter than one window.
std::vector<double> windowed_rms(const std::vector<float>& x, int win, int hop);
double max_window_rms(const std::vector<float>& x, int win, int hop);

struct RmsNormResult {
    AudioBuffer audio;
    double applied_gain = 1.0;
};
RmsNormResult rms_normalize(const AudioBuffer& x, double target_rms);

AudioBuffer mono_downmix(const AudioBuffer& x);
AudioBuffer to_stereo_center(const AudioBuffer& x);  // mono -> equal-power center

// Sample-wise sum of stereo stems, no normalization. Accumulates in long
// double so the result does not depend on track order.
AudioBuffer sum_mix(const TrackSet& tracks);

AudioBuffer scale(const AudioBuffer& x, double gain);

}  // namespace mixgen
