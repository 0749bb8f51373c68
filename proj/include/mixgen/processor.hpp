#pragma once

#include "mixgen/audio.hpp"
#include "mixgen/encoders.hpp"
#include "mixgen/features.hpp"
#include "mixgen/nn.hpp"
#include "mixgen/spectrum.hpp"

namespace mixgen {

// ---------------------------------------------------------------------------
// Multi-scale spectral loss: sum over FFT sizes of (mean L1 on log magnitude
// + normalized Frobenius on magnitude), averaged over channels.
const std::vector<int>& msspec_fft_sizes();

template <typename T>
struct ChannelGrad {
    std::vector<std::vector<T>> ch;
};

// grad_y_hat, when non-null, receives dL/d(y_hat) accumulated per channel.
template <typename T>
double msspec_loss_t(const std::vector<std::vector<T>>& y_hat,
                     const std::vector<std::vector<T>>& y,
                     std::vector<std::vector<T>>* grad_y_hat);

double msspec_loss(const AudioBuffer& y_hat, const AudioBuffer& y);

// 1 - cosine(Phi(y_hat), Phi(y)) on the effect-encoder embeddings.
double deep_feature_loss(EffectEncoder& enc, const AudioBuffer& y_hat,
                         const AudioBuffer& y);

// Training-path variant with gradients w.r.t. y_hat channels.
double deep_feature_loss_grad(EffectEncoder& enc,
                              const std::vector<std::vector<float>>& y_hat,
                              const std::vector<std::vector<float>>& y,
                              std::vector<std::vector<float>>* grad_y_hat);

// ---------------------------------------------------------------------------
// FiLM-conditioned dilated TCN, mono in, stereo out.
template <typename T>
struct TcnBlock {
    Conv1d<T> conv;
    FiLM<T> film;
    Silu<T> act;

    TcnBlock() = default;
    TcnBlock(int ch, int kernel, int dil, int cond_dim, Rng& rng)
        : conv(ch, ch, kernel, dil, rng), film(cond_dim, ch, rng) {}

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& cond, bool parallel) {
        Tensor<T> h = act.forward(film.forward(conv.forward(x, parallel), cond));
        for (size_t i = 0; i < h.v.size(); ++i) h.v[i] += x.v[i];
        return h;
    }

    // returns (dx, dcond)
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dy, bool parallel) {
        auto [dfilm, dcond] = film.backward(act.backward(dy));
        Tensor<T> dx = conv.backward(dfilm, parallel);
        for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dy.v[i];
        return {dx, dcond};
    }
};

template <typename T>
struct Tcn {
    int channels = 64, kernel = 15, n_blocks = 10, cond_dim = 0;
    Conv1d<T> in_proj;   // 1 -> ch
    Conv1d<T> out_proj;  // ch -> 2
    std::vector<TcnBlock<T>> blocks;
    bool trained = false;

    Tcn() = default;
    Tcn(int ch, int kernel_, int n_blocks_, int cond_dim_, Rng& rng)
        : channels(ch), kernel(kernel_), n_blocks(n_blocks_), cond_dim(cond_dim_),
          in_proj(1, ch, 1, 1, rng), out_proj(ch, 2, 1, 1, rng) {
        for (int b = 0; b < n_blocks_; ++b)
            blocks.emplace_back(ch, kernel_, 1 << b, cond_dim_, rng);
    }

    int64_t receptive_field() const {
        int64_t rf = 1;
        for (int b = 0; b < n_blocks; ++b) rf += int64_t(kernel - 1) * (int64_t(1) << b);
        return rf;
    }

    // x: [1, frames]; cond: [1, cond_dim] -> [2, frames]
    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& cond, bool parallel = false) {
        Tensor<T> h = in_proj.forward(x, parallel);
        for (auto& b : blocks) h = b.forward(h, cond, parallel);
        return out_proj.forward(h, parallel);
    }

    Tensor<T> backward(const Tensor<T>& dy, bool parallel = false) {
        Tensor<T> dh = out_proj.backward(dy, parallel);
        for (int b = int(blocks.size()) - 1; b >= 0; --b) {
            auto [dx, dcond] = blocks[size_t(b)].backward(dh, parallel);
            dh = dx;
        }
        return in_proj.backward(dh, parallel);
    }

    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> out;
        auto app = [&](std::vector<Tensor<T>*> v) { out.insert(out.end(), v.begin(), v.end()); };
        app(in_proj.params());
        app(out_proj.params());
        for (auto& b : blocks) {
            app(b.conv.params());
            app(b.film.params());
        }
        return out;
    }

    std::vector<std::pair<std::string, Tensor<T>*>> named_params() {
        std::vector<std::pair<std::string, Tensor<T>*>> out = {
            {"in_proj.w", &in_proj.w}, {"in_proj.b", &in_proj.b},
            {"out_proj.w", &out_proj.w}, {"out_proj.b", &out_proj.b}};
        for (size_t b = 0; b < blocks.size(); ++b) {
            std::string p = format_str("block%zu.", b);
            out.insert(out.end(), {{p + "conv.w", &blocks[b].conv.w},
                                   {p + "conv.b", &blocks[b].conv.b},
                                   {p + "film.w", &blocks[b].film.proj.w},
                                   {p + "film.b", &blocks[b].film.proj.b}});
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Inference pipeline.
struct ProcessorContext {
    Tcn<float> tcn;
    FourierCodec codec;
    SpectrumProfile profile;
    double rms_target = 0.05;
};

// Decoded per-channel gain targets in dB, clamped to [-80, 0] with warnings.
std::pair<double, double> decode_gain_targets_db(const EffectEmbedding& z,
                                                 const FourierCodec& codec);

AudioBuffer apply_gain_from_embedding(const AudioBuffer& y_norm, const EffectEmbedding& z,
                                      const FourierCodec& codec);

// mono downmix -> RMS normalize -> EQ normalize -> RMS normalize -> TCN with
// FiLM on [z; c] -> per-channel gain from the embedding. Deterministic.
AudioBuffer process_track(ProcessorContext& ctx, const AudioBuffer& x,
                          const EffectEmbedding& z, const std::vector<float>& c,
                          bool parallel = false);

// ---------------------------------------------------------------------------
// Training. Samples are pre-normalized by the caller, which also guarantees
// the "z extracted before target normalization" ordering.
struct ProcSample {
    std::vector<float> x_norm;                // mono, after rms->eq->rms
    std::vector<std::vector<float>> y_norm;   // stereo, RMS-normalized wet
    std::vector<float> cond;                  // [z; c]
};

struct ProcTrainConfig {
    int steps = 800;
    int64_t crop = 16384;
    double lr = 1e-3;
    double beta_deep = 0.1;
    double grad_clip = 1.0;  // global gradient-norm clip, <= 0 disables
    uint64_t seed = 1;
    int val_every = 100;
    int log_every = 50;
    bool parallel = true;
    std::function<void(int, const std::string&, double)> metric_hook;
};

struct ProcTrainReport {
    double initial_val_msspec = 0.0;  // untrained-network validation loss
    double final_val_msspec = 0.0;
    double initial_train_loss = 0.0;
    double final_train_loss = 0.0;
};

ProcTrainReport train_processor(Tcn<float>& tcn, EffectEncoder& fx_enc,
                                const std::vector<ProcSample>& train,
                                const std::vector<ProcSample>& val,
                                const ProcTrainConfig& cfg);

}  // namespace mixgen
