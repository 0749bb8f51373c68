#include "mixgen/synth.hpp"

#include <cmath>

namespace mixgen {

const char* track_kind_name(TrackKind k) {
    switch (k) {
        case TrackKind::Bass: return "bass";
        case TrackKind::Lead: return "lead";
        case TrackKind::Pad: return "pad";
        case TrackKind::Perc: return "perc";
        case TrackKind::Keys: return "keys";
    }
    return "unknown";
}

namespace {

const double kPentatonic[5] = {0.0, 3.0, 5.0, 7.0, 10.0};

double note_hz(double base_hz, int degree, int octave) {
    double semis = kPentatonic[degree % 5] + 12.0 * octave;
    return base_hz * std::pow(2.0, semis / 12.0);
}

// Sum of decaying harmonics with a pluck/sustain envelope.
void add_tone(std::vector<float>& out, int sr, int64_t start, int64_t len, double f0,
              int n_harm, double harm_decay, double amp, double attack_s, double decay_s,
              double phase0) {
    int64_t end = std::min<int64_t>(int64_t(out.size()), start + len);
    for (int64_t i = start; i < end; ++i) {
        double t = double(i - start) / sr;
        double env = (1.0 - std::exp(-t / std::max(1e-4, attack_s))) *
                     std::exp(-t / std::max(1e-3, decay_s));
        double s = 0.0;
        for (int h = 1; h <= n_harm; ++h) {
            double hf = f0 * h;
            if (hf > sr * 0.45) break;
            s += std::sin(2.0 * M_PI * hf * t + phase0 * h) / std::pow(double(h), harm_decay);
        }
        out[size_t(i)] += float(amp * env * s);
    }
}

void add_noise_burst(std::vector<float>& out, Rng& rng, int sr, int64_t start, int64_t len,
                     double amp, double decay_s, double lp_coef) {
    int64_t end = std::min<int64_t>(int64_t(out.size()), start + len);
    double y = 0.0;
    for (int64_t i = start; i < end; ++i) {
        double t = double(i - start) / sr;
        double env = std::exp(-t / decay_s);
        double n = rng.uniform(-1.0, 1.0);
        y = lp_coef * y + (1.0 - lp_coef) * n;
        out[size_t(i)] += float(amp * env * y);
    }
}

}  // namespace

AudioBuffer synth_dry_track(TrackKind kind, uint64_t seed, int64_t frames, int sr) {
    Rng rng(seed);
    AudioBuffer buf(1, frames, sr);
    auto& x = buf.ch[0];
    double beat_s = rng.uniform(0.4, 0.6);
    int64_t beat = int64_t(beat_s * sr);
    double base = 110.0 * std::pow(2.0, rng.uniform(-0.2, 0.2));

    switch (kind) {
        case TrackKind::Bass: {
            for (int64_t pos = 0; pos < frames; pos += beat) {
                int deg = int(rng.randint(5));
                double f = note_hz(base / 2.0, deg, 0);
                add_tone(x, sr, pos, int64_t(beat_s * 0.9 * sr), f, 6, 1.0, 0.5,
                         0.004, rng.uniform(0.2, 0.5), rng.uniform(0.0, 6.28));
            }
            break;
        }
        case TrackKind::Lead: {
            int64_t step = beat / 2;
            for (int64_t pos = 0; pos < frames; pos += step) {
                if (rng.uniform() < 0.25) continue;  // rests
                int deg = int(rng.randint(5));
                double f = note_hz(base * 2.0, deg, int(rng.randint(2)));
                add_tone(x, sr, pos, int64_t(beat_s * 0.5 * sr), f, 8, 1.4, 0.35,
                         0.008, rng.uniform(0.1, 0.3), rng.uniform(0.0, 6.28));
            }
            break;
        }
        case TrackKind::Pad: {
            int64_t chord_len = std::max<int64_t>(beat * 4, frames / 3);
            for (int64_t pos = 0; pos < frames; pos += chord_len) {
                int root = int(rng.randint(5));
                for (int v = 0; v < 3; ++v) {
                    double f = note_hz(base, (root + 2 * v) % 5, 1) *
                               (1.0 + 0.002 * rng.uniform(-1.0, 1.0));
                    add_tone(x, sr, pos, chord_len, f, 5, 1.2, 0.12, 0.3, 4.0,
                             rng.uniform(0.0, 6.28));
                }
            }
            break;
        }
        case TrackKind::Perc: {
            for (int64_t pos = 0, k = 0; pos < frames; pos += beat / 2, ++k) {
                if (k % 2 == 0) {
                    // kick: swept sine
                    int64_t len = int64_t(0.12 * sr);
                    int64_t end = std::min(frames, pos + len);
                    for (int64_t i = pos; i < end; ++i) {
                        double t = double(i - pos) / sr;
                        double f = 100.0 * std::exp(-t * 18.0) + 45.0;
                        x[size_t(i)] += float(0.7 * std::exp(-t * 22.0) *
                                              std::sin(2.0 * M_PI * f * t));
                    }
                } else {
                    add_noise_burst(x, rng, sr, pos, int64_t(0.08 * sr), 0.4,
                                    0.02, 0.3);
                }
                if (rng.uniform() < 0.7)
                    add_noise_burst(x, rng, sr, pos + beat / 4, int64_t(0.03 * sr), 0.12,
                                    0.008, 0.02);
            }
            break;
        }
        case TrackKind::Keys: {
            for (int64_t pos = 0; pos < frames; pos += beat) {
                if (rng.uniform() < 0.2) continue;
                int root = int(rng.randint(5));
                for (int v = 0; v < 2; ++v) {
                    double f = note_hz(base, (root + 2 * v) % 5, 1 + v);
                    add_tone(x, sr, pos, int64_t(beat_s * 0.8 * sr), f, 6, 1.6, 0.2,
                             0.003, rng.uniform(0.15, 0.4), rng.uniform(0.0, 6.28));
                }
            }
            break;
        }
    }

    if (rms_of(x) == 0.0) {
        // rest draws can empty a very short segment; fall back to one tone
        add_tone(x, sr, 0, frames, base, 4, 1.2, 0.3, 0.01, 0.5, 0.0);
    }
    double r = rms_of(x);
    double target = 0.05 * std::pow(10.0, rng.uniform(-6.0, 6.0) / 20.0);
    double g = target / r;
    for (auto& s : x) s = float(double(s) * g);

    // broadband floor (breath/pick/room texture): keeps the full spectrum
    // weakly excited on every source
    double floor_amp = target * std::pow(10.0, rng.uniform(-34.0, -26.0) / 20.0);
    double lp = 0.0;
    for (auto& s : x) {
        lp = 0.5 * lp + 0.5 * rng.uniform(-1.0, 1.0);
        s += float(floor_amp * (rng.uniform(-1.0, 1.0) + 2.0 * lp));
    }
    return buf;
}

SynthSong synth_song(uint64_t seed, int n_tracks, int64_t frames,
                     const ChainRanges& ranges, int sample_rate) {
    require(n_tracks >= 1, "synth_song: need at least one track");
    Rng rng(seed);
    SynthSong song;
    for (int t = 0; t < n_tracks; ++t) {
        TrackKind kind = t < kNumTrackKinds
                             ? TrackKind(t)
                             : TrackKind(rng.randint(kNumTrackKinds));
        uint64_t tseed = rng.next_u64();
        AudioBuffer dry = synth_dry_track(kind, tseed, frames, sample_rate);
        EffectChainParams chain = sample_effect_chain(rng.next_u64(), ranges);
        AudioBuffer wet = apply_effect_chain(dry, chain, rng.next_u64());
        song.kinds.push_back(kind);
        song.dry.push_back(std::move(dry));
        song.chains.push_back(chain);
        song.wet.push_back(std::move(wet));
    }
    return song;
}

}  // namespace mixgen
