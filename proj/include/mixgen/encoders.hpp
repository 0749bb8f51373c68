#pragma once

#include "mixgen/audio.hpp"
#include "mixgen/nn.hpp"
#include "mixgen/spectrum.hpp"

namespace mixgen {

// ---------------------------------------------------------------------------
// Content encoder: fixed (untrained) mel-statistics feature map followed by a
// seeded linear projection, L2-normalized. Carries "what is played" plus the
// effect leakage the domain adaptor later removes.
struct ContentEncoder {
    int c_dim = 64;
    MelBank mel;
    Tensor<float> proj;  // [c_dim, 3 * n_mels]

    ContentEncoder() = default;
    ContentEncoder(int c_dim_, uint64_t seed, int sample_rate = kDefaultSampleRate);

    std::vector<float> encode(const AudioBuffer& x_mono) const;
};

// ---------------------------------------------------------------------------
// Effect encoder net over mid/side log-mel features: two dilated convs,
// mean+std pooling over time, two dense layers, L2 normalization. Templated
// so gradient checks and the deep-feature loss can run in double.
template <typename T>
struct EffectEncoderNet {
    int d_fx = 32, in_ch = 128, width = 48;
    Conv1d<T> conv1, conv2, conv3;
    Dense<T> head1, head2;
    Silu<T> act1, act2, act2b, act3;
    // caches
    Tensor<T> pooled_in_, pre_norm_;
    std::vector<T> mean_, sd_;
    T norm_ = T(1);

    EffectEncoderNet() = default;
    EffectEncoderNet(int d_fx_, int mel_bands, int width_, Rng& rng)
        : d_fx(d_fx_), in_ch(2 * mel_bands), width(width_),
          conv1(2 * mel_bands, width_, 5, 1, rng), conv2(width_, width_, 5, 2, rng),
          conv3(width_, width_, 5, 8, rng),
          head1(2 * width_, width_, rng), head2(width_, d_fx_, rng) {}

    // x: [2*mel_bands, frames] -> unit-norm embedding [d_fx]
    std::vector<T> forward(const Tensor<T>& x) {
        Tensor<T> h = act1.forward(conv1.forward(x));
        h = act2.forward(conv2.forward(h));
        h = act2b.forward(conv3.forward(h));
        const int64_t frames = h.cols();
        pooled_in_ = h;
        mean_.assign(size_t(width), T(0));
        sd_.assign(size_t(width), T(0));
        Tensor<T> pooled({1, 2 * width});
        for (int c = 0; c < width; ++c) {
            const T* row = &h.v[size_t(c) * size_t(frames)];
            T m = 0;
            for (int64_t t = 0; t < frames; ++t) m += row[t];
            m /= T(frames);
            T var = 0;
            for (int64_t t = 0; t < frames; ++t) var += (row[t] - m) * (row[t] - m);
            var /= T(frames);
            T s = std::sqrt(var + T(1e-4));
            mean_[size_t(c)] = m;
            sd_[size_t(c)] = s;
            pooled.v[size_t(c)] = m;
            pooled.v[size_t(width + c)] = s;
        }
        Tensor<T> u = head2.forward(act3.forward(head1.forward(pooled)));
        pre_norm_ = u;
        T r = 0;
        for (T v : u.v) r += v * v;
        norm_ = std::sqrt(r + T(1e-12));
        std::vector<T> out(static_cast<size_t>(d_fx));
        for (int i = 0; i < d_fx; ++i) out[size_t(i)] = u.v[size_t(i)] / norm_;
        return out;
    }

    // demb -> gradient w.r.t. the input feature matrix
    Tensor<T> backward(const std::vector<T>& demb) {
        // through L2 normalization: du = dy/r - u (u . dy) / r^3
        T udotdy = 0;
        for (int i = 0; i < d_fx; ++i) udotdy += pre_norm_.v[size_t(i)] * demb[size_t(i)];
        Tensor<T> du({1, d_fx});
        for (int i = 0; i < d_fx; ++i)
            du.v[size_t(i)] = demb[size_t(i)] / norm_ -
                              pre_norm_.v[size_t(i)] * udotdy / (norm_ * norm_ * norm_);
        Tensor<T> dpooled = head1.backward(act3.backward(head2.backward(du)));
        const int64_t frames = pooled_in_.cols();
        Tensor<T> dh({width, int(frames)});
        for (int c = 0; c < width; ++c) {
            T dm = dpooled.v[size_t(c)];
            T ds = dpooled.v[size_t(width + c)];
            const T* row = &pooled_in_.v[size_t(c) * size_t(frames)];
            T* drow = &dh.v[size_t(c) * size_t(frames)];
            T m = mean_[size_t(c)], s = sd_[size_t(c)];
            for (int64_t t = 0; t < frames; ++t)
                drow[t] = dm / T(frames) + ds * (row[t] - m) / (T(frames) * s);
        }
        Tensor<T> d3 = conv3.backward(act2b.backward(dh));
        return conv1.backward(act1.backward(conv2.backward(act2.backward(d3))));
    }

    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> out;
        for (auto* p : conv1.params()) out.push_back(p);
        for (auto* p : conv2.params()) out.push_back(p);
        for (auto* p : conv3.params()) out.push_back(p);
        for (auto* p : head1.params()) out.push_back(p);
        for (auto* p : head2.params()) out.push_back(p);
        return out;
    }

    std::vector<std::pair<std::string, Tensor<T>*>> named_params() {
        return {{"conv1.w", &conv1.w}, {"conv1.b", &conv1.b},
                {"conv2.w", &conv2.w}, {"conv2.b", &conv2.b},
                {"conv3.w", &conv3.w}, {"conv3.b", &conv3.b},
                {"head1.w", &head1.w}, {"head1.b", &head1.b},
                {"head2.w", &head2.w}, {"head2.b", &head2.b}};
    }
};

// Mid/side log-mel feature extraction with cached spectra so the deep-feature
// loss can push gradients back into the audio.
template <typename T>
struct MelFrontend {
    MelBank mel;
    // Log-mels are centered on the mid channel's global mean (level
    // invariance: gain lives in the dynamics block of the embedding, not
    // here) and scaled to roughly unit spread.
    double log_scale = 4.0;

    struct Cache {
        // per channel (mid, side): complex STFT frames and pre-log mel powers
        std::vector<std::vector<std::complex<T>>> spectra[2];
        std::vector<std::vector<T>> mel_acc[2];
        int64_t in_len = 0;
    };

    // mid/side signals -> [2*n_mels, frames]
    Tensor<T> forward(const std::vector<T>& mid, const std::vector<T>& side,
                      Cache* cache = nullptr) const {
        const std::vector<T>* chans[2] = {&mid, &side};
        int64_t n = int64_t(mid.size());
        require(n >= mel.fft_size, "mel frontend: signal shorter than one FFT frame");
        int64_t n_frames = (n - mel.fft_size) / mel.hop + 1;
        Tensor<T> out({2 * mel.n_mels, int(n_frames)});
        std::vector<T> win = hann_window<T>(mel.fft_size);
        for (int c = 0; c < 2; ++c) {
            if (cache) {
                cache->spectra[c].clear();
                cache->mel_acc[c].clear();
                cache->in_len = n;
            }
            for (int64_t fr = 0; fr < n_frames; ++fr) {
                std::vector<std::complex<T>> buf(static_cast<size_t>(mel.fft_size));
                int64_t start = fr * mel.hop;
                for (int i = 0; i < mel.fft_size; ++i)
                    buf[size_t(i)] = (*chans[c])[size_t(start + i)] * win[size_t(i)];
                fft_inplace(buf, false);
                std::vector<T> accs(static_cast<size_t>(mel.n_mels));
                for (int b = 0; b < mel.n_mels; ++b) {
                    T acc = 0;
                    for (const auto& [k, w] : mel.filters[size_t(b)]) {
                        const auto& X = buf[size_t(k)];
                        acc += T(w) * (X.real() * X.real() + X.imag() * X.imag());
                    }
                    accs[size_t(b)] = acc;
                    out.at(c * mel.n_mels + b, int(fr)) = std::log(acc + T(1e-10));
                }
                if (cache) {
                    buf.resize(size_t(mel.fft_size / 2 + 1));
                    cache->spectra[c].push_back(std::move(buf));
                    cache->mel_acc[c].push_back(std::move(accs));
                }
            }
        }
        // center on the mid channel's global log level
        T mu = 0;
        const int64_t n_mid = int64_t(mel.n_mels) * n_frames;
        for (int b = 0; b < mel.n_mels; ++b)
            for (int64_t fr = 0; fr < n_frames; ++fr) mu += out.at(b, int(fr));
        mu /= T(n_mid);
        for (auto& v : out.v) v = (v - mu) / T(log_scale);
        return out;
    }

    // dfeat: [2*n_mels, frames] -> gradients w.r.t. mid and side signals
    std::pair<std::vector<T>, std::vector<T>> backward(const Tensor<T>& dfeat,
                                                       const Cache& cache) const {
        std::vector<T> win = hann_window<T>(mel.fft_size);
        std::pair<std::vector<T>, std::vector<T>> grads;
        grads.first.assign(size_t(cache.in_len), T(0));
        grads.second.assign(size_t(cache.in_len), T(0));
        std::vector<T>* outs[2] = {&grads.first, &grads.second};
        const int64_t n_frames = int64_t(cache.spectra[0].size());
        const int nfft = mel.fft_size;
        // chain through the mid-mean centering: every raw mid log-mel entry
        // receives -mean(all dfeat)/log_scale
        T dsum = 0;
        for (T v : dfeat.v) dsum += v;
        const T dmu = -dsum / (T(mel.n_mels) * T(n_frames));
        for (int c = 0; c < 2; ++c) {
            for (int64_t fr = 0; fr < n_frames; ++fr) {
                // dL/dpow[k] from the mel bands of this frame
                std::vector<T> dpow(size_t(nfft / 2 + 1), T(0));
                for (int b = 0; b < mel.n_mels; ++b) {
                    T draw = dfeat.at(c * mel.n_mels + b, int(fr));
                    if (c == 0) draw += dmu;
                    T dmel = draw / T(log_scale) /
                             (cache.mel_acc[c][size_t(fr)][size_t(b)] + T(1e-10));
                    for (const auto& [k, w] : mel.filters[size_t(b)])
                        dpow[size_t(k)] += T(w) * dmel;
                }
                // dL/dframe via H[k] = dpow[k] * X[k], dx = 2 N Re(IFFT(H))
                std::vector<std::complex<T>> H(static_cast<size_t>(nfft));
                for (int k = 0; k <= nfft / 2; ++k)
                    H[size_t(k)] = cache.spectra[c][size_t(fr)][size_t(k)] * dpow[size_t(k)];
                fft_inplace(H, true);
                // adjoint of the unnormalized forward FFT: scale by nfft
                int64_t start = fr * mel.hop;
                for (int i = 0; i < nfft; ++i)
                    (*outs[c])[size_t(start + i)] +=
                        T(2) * T(nfft) * H[size_t(i)].real() * win[size_t(i)];
            }
        }
        return grads;
    }
};

// Float-precision effect encoder bound to audio input.
struct EffectEncoder {
    int d_fx = 32;
    MelFrontend<float> frontend;
    EffectEncoderNet<float> net;
    bool trained = false;

    EffectEncoder() = default;
    EffectEncoder(int d_fx_, int mel_bands, int width, uint64_t seed,
                  int sample_rate = kDefaultSampleRate);

    // Raw forward, usable before training (the trainers need it).
    std::vector<float> forward(const AudioBuffer& y_stereo);
    // Public encode; requires a trained model.
    std::vector<float> encode(const AudioBuffer& y_stereo);
};

// mid/side split helper shared by the encoder paths
template <typename T>
std::pair<std::vector<T>, std::vector<T>> mid_side(const AudioBuffer& y) {
    require(y.stereo(), "mid_side: stereo input required");
    std::pair<std::vector<T>, std::vector<T>> out;
    out.first.resize(size_t(y.frames()));
    out.second.resize(size_t(y.frames()));
    for (int64_t i = 0; i < y.frames(); ++i) {
        T l = T(y.ch[0][size_t(i)]), r = T(y.ch[1][size_t(i)]);
        out.first[size_t(i)] = T(0.5) * (l + r);
        out.second[size_t(i)] = T(0.5) * (l - r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Contrastive training of the effect encoder. Positives share the effect
// chain across different dry sources.
struct FxPairDataset {
    // groups[k] = renders of chain k applied to different sources
    std::vector<std::vector<AudioBuffer>> groups;
};

struct FxEncTrainConfig {
    int steps = 500;
    int batch = 16;
    double lr = 1e-3;
    double temperature = 0.1;
    uint64_t seed = 1;
    int log_every = 50;
    std::function<void(int, const std::string&, double)> metric_hook;
};

struct FxEncTrainReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

FxEncTrainReport train_effect_encoder(EffectEncoder& enc, const FxPairDataset& data,
                                      const FxEncTrainConfig& cfg);

// Single InfoNCE evaluation over one batch of (anchor, positive) embeddings.
double info_nce_loss(const std::vector<std::vector<float>>& anchors,
                     const std::vector<std::vector<float>>& positives,
                     double temperature);

// ---------------------------------------------------------------------------
// Domain adaptor: two-layer MLP mapping wet content embeddings toward the
// dry embedding distribution.
struct Adaptor {
    Dense<float> l1, l2;
    Silu<float> act;
    bool trained = false;

    Adaptor() = default;
    Adaptor(int c_dim, int hidden, uint64_t seed);

    std::vector<float> apply(const std::vector<float>& c);
    std::vector<std::pair<std::string, Tensor<float>*>> named_params();
};

struct AdaptorTrainConfig {
    int hidden_dim = 128;
    double sigma_t = 0.05;  // smoothing noise std, inference-time
    int epochs = 200;
    double lr = 1e-3;
    uint64_t seed = 1;
    double holdout_frac = 0.2;
    std::function<void(int, const std::string&, double)> metric_hook;
};

struct AdaptorTrainReport {
    double holdout_l2_identity = 0.0;  // ||E(y) - E(x)||^2 mean
    double holdout_l2_adapted = 0.0;   // ||T(E(y)) - E(x)||^2 mean
};

AdaptorTrainReport train_adaptor(Adaptor& adaptor, const ContentEncoder& enc,
                                 const std::vector<std::pair<AudioBuffer, AudioBuffer>>& dry_wet_pairs,
                                 const AdaptorTrainConfig& cfg);

// T(c) + sigma_T * eps (wet domain); identity + noise for the dry domain.
std::vector<float> adapt_smooth(const std::vector<float>& c, double sigma_t, Rng& rng,
                                Adaptor* adaptor = nullptr);

}  // namespace mixgen
