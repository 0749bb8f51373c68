#include "mixgen/audio.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace mixgen {

void AudioBuffer::validate() const {
    require(channels() == 1 || channels() == 2,
            format_str("AudioBuffer: channels must be 1 or 2, got %d", channels()));
    require(frames() > 0, "AudioBuffer: empty");
    for (const auto& c : ch)
        require(c.size() == ch[0].size(), "AudioBuffer: ragged channels");
    require(finite(), "AudioBuffer: non-finite samples");
}

bool AudioBuffer::finite() const {
    for (const auto& c : ch)
        for (float s : c)
            if (!std::isfinite(s)) return false;
    return true;
}

void TrackSet::validate() const {
    require(valid_count >= 1, "TrackSet: valid_count must be >= 1");
    require(size_t(valid_count) <= tracks.size(), "TrackSet: valid_count exceeds tracks");
    for (const auto& t : tracks) {
        t.validate();
        require(t.sample_rate == tracks[0].sample_rate, "TrackSet: sample rate mismatch");
        require(t.frames() == tracks[0].frames(), "TrackSet: frame count mismatch");
    }
}

namespace {

uint32_t rd_u32(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}
uint16_t rd_u16(const uint8_t* p) { return uint16_t(p[0] | p[1] << 8); }

void wr_u32(std::vector<uint8_t>& out, uint32_t v) {
    out.push_back(uint8_t(v)); out.push_back(uint8_t(v >> 8));
    out.push_back(uint8_t(v >> 16)); out.push_back(uint8_t(v >> 24));
}
void wr_u16(std::vector<uint8_t>& out, uint16_t v) {
    out.push_back(uint8_t(v)); out.push_back(uint8_t(v >> 8));
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "read_wav: cannot open " + path);
    std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
    require(raw.size() >= 44, "read_wav: file too small: " + path);
    require(std::memcmp(raw.data(), "RIFF", 4) == 0 && std::memcmp(raw.data() + 8, "WAVE", 4) == 0,
            "read_wav: not a RIFF/WAVE file: " + path);

    size_t pos = 12;
    uint16_t format = 0, channels = 0, bits = 0;
    uint32_t sr = 0;
    const uint8_t* data = nullptr;
    uint32_t data_len = 0;
    while (pos + 8 <= raw.size()) {
        const uint8_t* hdr = raw.data() + pos;
        uint32_t chunk_len = rd_u32(hdr + 4);
        if (std::memcmp(hdr, "fmt ", 4) == 0) {
            require(chunk_len >= 16 && pos + 8 + chunk_len <= raw.size(), "read_wav: bad fmt chunk");
            const uint8_t* p = hdr + 8;
            format = rd_u16(p);
            channels = rd_u16(p + 2);
            sr = rd_u32(p + 4);
            bits = rd_u16(p + 14);
            if (format == 0xFFFE && chunk_len >= 40) format = rd_u16(p + 24);  // extensible
        } else if (std::memcmp(hdr, "data", 4) == 0) {
            require(pos + 8 + chunk_len <= raw.size(), "read_wav: truncated data chunk");
            data = hdr + 8;
            data_len = chunk_len;
        }
        pos += 8 + chunk_len + (chunk_len & 1);
    }
    require(data != nullptr && channels >= 1, "read_wav: missing chunks in " + path);
    require(channels <= 2, "read_wav: only mono/stereo supported");
    require((format == 1 && (bits == 16 || bits == 24)) || (format == 3 && bits == 32),
            format_str("read_wav: unsupported format %u/%u bits", format, bits));

    int bytes_per = bits / 8;
    int64_t n_frames = data_len / uint32_t(bytes_per * channels);
    AudioBuffer out(channels, n_frames, int(sr));
    for (int64_t i = 0; i < n_frames; ++i) {
        for (int c = 0; c < channels; ++c) {
            const uint8_t* p = data + (i * channels + c) * bytes_per;
            float s = 0.0f;
            if (format == 3) {
                uint32_t u = rd_u32(p);
                std::memcpy(&s, &u, 4);
            } else if (bits == 16) {
                int16_t v = int16_t(rd_u16(p));
                s = float(v) / 32768.0f;
            } else {  // 24-bit
                int32_t v = int32_t(uint32_t(p[0]) << 8 | uint32_t(p[1]) << 16 |
                                    uint32_t(p[2]) << 24) >> 8;
                s = float(v) / 8388608.0f;
            }
            out.ch[size_t(c)][size_t(i)] = s;
        }
    }
    out.validate();
    return out;
}

void write_wav(const std::string& path, const AudioBuffer& buf, WavFormat fmt) {
    buf.validate();
    int channels = buf.channels();
    int64_t n = buf.frames();
    int bits = fmt == WavFormat::Pcm16 ? 16 : fmt == WavFormat::Pcm24 ? 24 : 32;
    uint16_t format = fmt == WavFormat::Float32 ? 3 : 1;
    int bytes_per = bits / 8;
    uint32_t data_len = uint32_t(n * channels * bytes_per);

    std::vector<uint8_t> out;
    out.reserve(44 + data_len);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    wr_u32(out, 36 + data_len);
    out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
    wr_u32(out, 16);
    wr_u16(out, format);
    wr_u16(out, uint16_t(channels));
    wr_u32(out, uint32_t(buf.sample_rate));
    wr_u32(out, uint32_t(buf.sample_rate * channels * bytes_per));
    wr_u16(out, uint16_t(channels * bytes_per));
    wr_u16(out, uint16_t(bits));
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    wr_u32(out, data_len);

    for (int64_t i = 0; i < n; ++i) {
        for (int c = 0; c < channels; ++c) {
            float s = buf.ch[size_t(c)][size_t(i)];
            if (fmt == WavFormat::Float32) {
                uint32_t u;
                std::memcpy(&u, &s, 4);
                wr_u32(out, u);
            } else if (fmt == WavFormat::Pcm16) {
                double q = std::round(double(s) * 32768.0);
                int16_t v = int16_t(std::min(32767.0, std::max(-32768.0, q)));
                wr_u16(out, uint16_t(v));
            } else {
                double q = std::round(double(s) * 8388608.0);
                int32_t v = int32_t(std::min(8388607.0, std::max(-8388608.0, q)));
                out.push_back(uint8_t(v));
                out.push_back(uint8_t(v >> 8));
                out.push_back(uint8_t(v >> 16));
            }
        }
    }
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "write_wav: cannot open " + path);
    f.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    require(f.good(), "write_wav: short write to " + path);
}

double rms_of(const std::vector<float>& x) {
    if (x.empty()) return 0.0;
    double acc = 0.0;
    for (float s : x) acc += double(s) * double(s);
    return std::sqrt(acc / double(x.size()));
}

double rms_overall(const AudioBuffer& buf) {
    double acc = 0.0;
    int64_t count = 0;
    for (const auto& c : buf.ch) {
        for (float s : c) acc += double(s) * double(s);
        count += int64_t(c.size());
    }
    return count ? std::sqrt(acc / double(count)) : 0.0;
}

double peak_abs(const AudioBuffer& buf) {
    double p = 0.0;
    for (const auto& c : buf.ch)
        for (float s : c) p = std::max(p, double(std::fabs(s)));
    return p;
}

std::vector<double> windowed_rms(const std::vector<float>& x, int win, int hop) {
    require(win > 0 && hop > 0, "windowed_rms: window and hop must be positive");
    std::vector<double> out;
    if (int64_t(x.size()) <= win) {
        out.push_back(rms_of(x));
        return out;
    }
    for (int64_t start = 0; start + win <= int64_t(x.size()); start += hop) {
        double acc = 0.0;
        for (int64_t i = start; i < start + win; ++i) acc += double(x[size_t(i)]) * double(x[size_t(i)]);
        out.push_back(std::sqrt(acc / double(win)));
    }
    return out;
}

double max_window_rms(const std::vector<float>& x, int win, int hop) {
    double best = 0.0;
    for (double r : windowed_rms(x, win, hop)) best = std::max(best, r);
    return best;
}

RmsNormResult rms_normalize(const AudioBuffer& x, double target_rms) {
    x.validate();
    require(target_rms > 0.0, "rms_normalize: target must be positive");
    double r = rms_overall(x);
    require(r > 0.0, "silent-track: rms_normalize on silent input");
    double gain = target_rms / r;
    RmsNormResult out;
    out.applied_gain = gain;
    out.audio = scale(x, gain);
    return out;
}

AudioBuffer mono_downmix(const AudioBuffer& x) {
    x.validate();
    if (x.mono()) return x;
    AudioBuffer out(1, x.frames(), x.sample_rate);
    for (int64_t i = 0; i < x.frames(); ++i)
        out.ch[0][size_t(i)] = 0.5f * (x.ch[0][size_t(i)] + x.ch[1][size_t(i)]);
    return out;
}

AudioBuffer to_stereo_center(const AudioBuffer& x) {
    x.validate();
    if (x.stereo()) return x;
    AudioBuffer out(2, x.frames(), x.sample_rate);
    const float g = float(1.0 / std::sqrt(2.0));
    for (int64_t i = 0; i < x.frames(); ++i) {
        float s = x.ch[0][size_t(i)] * g;
        out.ch[0][size_t(i)] = s;
        out.ch[1][size_t(i)] = s;
    }
    return out;
}

AudioBuffer sum_mix(const TrackSet& tracks) {
    tracks.validate();
    for (int t = 0; t < tracks.valid_count; ++t)
        require(tracks.tracks[size_t(t)].stereo(), "sum_mix: all tracks must be stereo");
    const int64_t n = tracks.tracks[0].frames();
    AudioBuffer out(2, n, tracks.tracks[0].sample_rate);
    for (int c = 0; c < 2; ++c) {
        for (int64_t i = 0; i < n; ++i) {
            long double acc = 0.0L;
            for (int t = 0; t < tracks.valid_count; ++t)
                acc += (long double)tracks.tracks[size_t(t)].ch[size_t(c)][size_t(i)];
            out.ch[size_t(c)][size_t(i)] = float(acc);
        }
    }
    return out;
}

AudioBuffer scale(const AudioBuffer& x, double gain) {
    AudioBuffer out = x;
    for (auto& c : out.ch)
        for (auto& s : c) s = float(double(s) * gain);
    return out;
}

}  // namespace mixgen
