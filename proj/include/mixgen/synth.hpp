#pragma once

#include "mixgen/audio.hpp"
#include "mixgen/fx.hpp"

namespace mixgen {

enum class TrackKind { Bass, Lead, Pad, Perc, Keys };
constexpr int kNumTrackKinds = 5;

const char* track_kind_name(TrackKind k);

// Deterministic mono instrument-like signal. Used to build synthetic songs.
AudioBuffer synth_dry_track(TrackKind kind, uint64_t seed, int64_t frames,
                            int sample_rate = kDefaultSampleRate);

struct SynthSong {
    std::vector<AudioBuffer> dry;              // mono
    std::vector<AudioBuffer> wet;              // stereo
    std::vector<EffectChainParams> chains;     // ground truth per track
    std::vector<TrackKind> kinds;
};

SynthSong synth_song(uint64_t seed, int n_tracks, int64_t frames,
                     const ChainRanges& ranges, int sample_rate = kDefaultSampleRate);

}  // namespace mixgen
