#pragma once

#include <functional>

#include "mixgen/nn.hpp"

namespace mixgen {

// EDM rho-spaced noise grid: sigma(tau) = tau, sigma_max plays the role of T.
struct NoiseSchedule {
    double sigma_min = 0.002;
    double sigma_max = 80.0;
    double rho = 7.0;
    int steps = 32;

    void validate() const {
        require(sigma_min > 0.0 && sigma_min < sigma_max, "schedule: need 0 < sigma_min < sigma_max");
        require(steps >= 1, "schedule: steps must be >= 1");
        require(rho > 0.0, "schedule: rho must be positive");
    }

    // i in [0, steps] with sigma(steps) = 0
    double sigma_at(int i) const {
        if (i >= steps) return 0.0;
        if (steps == 1) return sigma_max;
        double a = std::pow(sigma_max, 1.0 / rho);
        double b = std::pow(sigma_min, 1.0 / rho);
        double s = a + (b - a) * double(i) / double(steps - 1);
        return std::pow(s, rho);
    }
};

// Preconditioning constants and the training sigma distribution.
struct EdmConfig {
    double sigma_data = 0.25;
    double p_mean = -1.2;
    double p_std = 1.2;

    double c_skip(double sigma) const {
        double s2 = sigma_data * sigma_data;
        return s2 / (sigma * sigma + s2);
    }
    double c_out(double sigma) const {
        double s2 = sigma_data * sigma_data;
        return sigma * sigma_data / std::sqrt(sigma * sigma + s2);
    }
    double c_in(double sigma) const {
        double s2 = sigma_data * sigma_data;
        return 1.0 / std::sqrt(sigma * sigma + s2);
    }
    double c_noise(double sigma) const { return std::log(sigma) / 4.0; }
    double loss_weight(double sigma) const {
        double s2 = sigma_data * sigma_data;
        return (sigma * sigma + s2) / (sigma * sigma * s2);
    }
};

struct DiffusionState {
    Tensor<float> z_set;     // [n_max, d]
    std::vector<char> mask;  // validity per slot
    double tau = 0.0;
};

// ---------------------------------------------------------------------------
// Permutation-equivariant transformer score network. The public wrappers
// gather the valid rows in canonical (track-id) order before running the
// dense computation and scatter the results back, which makes permutation
// equivariance and padding independence exact rather than approximate.
template <typename T>
struct ScoreBlock {
    LayerNorm<T> ln_self, ln_cross, ln_mlp;
    MultiheadAttention<T> attn_self, attn_cross;
    Dense<T> mlp1, mlp2;
    Silu<T> mlp_act;

    ScoreBlock() = default;
    ScoreBlock(int width, int heads, Rng& rng)
        : ln_self(width), ln_cross(width), ln_mlp(width),
          attn_self(width, heads, rng, /*zero_out_proj=*/true),
          attn_cross(width, heads, rng, /*zero_out_proj=*/true),
          mlp1(width, 2 * width, rng), mlp2(2 * width, width, rng) {}

    Tensor<T> forward(const Tensor<T>& x_in, const Tensor<T>& cond_tok) {
        Tensor<T> x = x_in;
        auto add_ = [](Tensor<T>& a, const Tensor<T>& b) {
            for (size_t i = 0; i < a.v.size(); ++i) a.v[i] += b.v[i];
        };
        Tensor<T> ln_out = ln_self.forward(x);
        Tensor<T> h = attn_self.forward(ln_out, ln_out);
        add_(x, h);
        Tensor<T> h2 = attn_cross.forward(ln_cross.forward(x), cond_tok);
        add_(x, h2);
        Tensor<T> h3 = mlp2.forward(mlp_act.forward(mlp1.forward(ln_mlp.forward(x))));
        add_(x, h3);
        return x;
    }

    // returns (dx, dcond_tok)
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        // mlp branch
        Tensor<T> dmlp = ln_mlp.backward(
            mlp1.backward(mlp_act.backward(mlp2.backward(dy))));
        for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dmlp.v[i];
        // cross-attention branch
        auto [dq_c, dkv_c] = attn_cross.backward(dx);
        Tensor<T> dln_c = ln_cross.backward(dq_c);
        for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dln_c.v[i];
        // self-attention branch: q and kv both come from ln_self(x)
        auto [dq_s, dkv_s] = attn_self.backward(dx);
        for (size_t i = 0; i < dq_s.v.size(); ++i) dq_s.v[i] += dkv_s.v[i];
        Tensor<T> dln_s = ln_self.backward(dq_s);
        for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] += dln_s.v[i];
        return {dx, dkv_c};
    }

    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> out;
        auto app = [&](std::vector<Tensor<T>*> v) { out.insert(out.end(), v.begin(), v.end()); };
        app(ln_self.params());
        app(ln_cross.params());
        app(ln_mlp.params());
        app(attn_self.params());
        app(attn_cross.params());
        app(mlp1.params());
        app(mlp2.params());
        return out;
    }
};

constexpr int kNoiseEmbFreqs = 16;

template <typename T>
struct ScoreNet {
    int n_max = 14, d = 96, c_dim = 64, width = 128, heads = 4, n_blocks = 4;
    Dense<T> in_proj, cond_proj, noise1, noise2, out_proj;
    LayerNorm<T> ln_final;
    Silu<T> noise_act;
    std::vector<ScoreBlock<T>> blocks;
    double sigma_data = 0.25;
    bool trained_ = false;

    // caches
    Tensor<T> noise_fourier_, cond_tok_;
    int fwd_rows_ = 0;

    ScoreNet() = default;
    ScoreNet(int n_max_, int d_, int c_dim_, int width_, int heads_, int n_blocks_,
             Rng& rng)
        : n_max(n_max_), d(d_), c_dim(c_dim_), width(width_), heads(heads_),
          n_blocks(n_blocks_),
          in_proj(d_ + n_max_, width_, rng),
          cond_proj(c_dim_ + n_max_, width_, rng),
          noise1(2 * kNoiseEmbFreqs, width_, rng), noise2(width_, width_, rng),
          out_proj(width_, d_, rng, /*zero_init=*/true),
          ln_final(width_) {
        for (int b = 0; b < n_blocks_; ++b) blocks.emplace_back(width_, heads_, rng);
    }

    static Tensor<T> noise_fourier(double c_noise) {
        Tensor<T> out({1, 2 * kNoiseEmbFreqs});
        for (int k = 0; k < kNoiseEmbFreqs; ++k) {
            double f = std::pow(2.0, double(k) * 0.5 - 2.0);
            out.v[size_t(k)] = T(std::sin(2.0 * M_PI * f * c_noise));
            out.v[size_t(kNoiseEmbFreqs + k)] = T(std::cos(2.0 * M_PI * f * c_noise));
        }
        return out;
    }

    // Rows already gathered in canonical order and scaled by c_in. ids give
    // the one-hot identity channel per row.
    Tensor<T> forward_gathered(const Tensor<T>& z_rows, const Tensor<T>& cond_rows,
                               const std::vector<int>& ids, double c_noise) {
        const int n = z_rows.rows();
        fwd_rows_ = n;
        Tensor<T> zin({n, d + n_max}), cin({n, c_dim + n_max});
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < d; ++j) zin.at(i, j) = z_rows.at(i, j);
            for (int j = 0; j < c_dim; ++j) cin.at(i, j) = cond_rows.at(i, j);
            require(ids[size_t(i)] >= 0 && ids[size_t(i)] < n_max,
                    "score net: track id out of range");
            zin.at(i, d + ids[size_t(i)]) = T(1);
            cin.at(i, c_dim + ids[size_t(i)]) = T(1);
        }
        Tensor<T> x = in_proj.forward(zin);
        cond_tok_ = cond_proj.forward(cin);
        noise_fourier_ = noise_fourier(c_noise);
        Tensor<T> nemb = noise2.forward(noise_act.forward(noise1.forward(noise_fourier_)));
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < width; ++j) x.at(i, j) += nemb.v[size_t(j)];
        for (auto& b : blocks) x = b.forward(x, cond_tok_);
        return out_proj.forward(ln_final.forward(x));
    }

    // Accumulates parameter gradients; returns gradient w.r.t. z_rows.
    Tensor<T> backward_gathered(const Tensor<T>& dout) {
        Tensor<T> dx = ln_final.backward(out_proj.backward(dout));
        Tensor<T> dcond_tok({fwd_rows_, width});
        for (int b = int(blocks.size()) - 1; b >= 0; --b) {
            auto [dxb, dct] = blocks[size_t(b)].backward(dx);
            dx = dxb;
            for (size_t i = 0; i < dcond_tok.v.size(); ++i) dcond_tok.v[i] += dct.v[i];
        }
        // noise embedding: gradient is the row-sum of dx
        Tensor<T> dnemb({1, width});
        for (int i = 0; i < fwd_rows_; ++i)
            for (int j = 0; j < width; ++j) dnemb.v[size_t(j)] += dx.at(i, j);
        noise1.backward(noise_act.backward(noise2.backward(dnemb)));
        cond_proj.backward(dcond_tok);
        Tensor<T> dzin = in_proj.backward(dx);
        Tensor<T> dz({fwd_rows_, d});
        for (int i = 0; i < fwd_rows_; ++i)
            for (int j = 0; j < d; ++j) dz.at(i, j) = dzin.at(i, j);
        return dz;
    }

    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> out;
        auto app = [&](std::vector<Tensor<T>*> v) { out.insert(out.end(), v.begin(), v.end()); };
        app(in_proj.params());
        app(cond_proj.params());
        app(noise1.params());
        app(noise2.params());
        app(out_proj.params());
        app(ln_final.params());
        for (auto& b : blocks) app(b.params());
        return out;
    }

    std::vector<std::pair<std::string, Tensor<T>*>> named_params() {
        std::vector<std::pair<std::string, Tensor<T>*>> out = {
            {"in_proj.w", &in_proj.w},   {"in_proj.b", &in_proj.b},
            {"cond_proj.w", &cond_proj.w}, {"cond_proj.b", &cond_proj.b},
            {"noise1.w", &noise1.w},     {"noise1.b", &noise1.b},
            {"noise2.w", &noise2.w},     {"noise2.b", &noise2.b},
            {"out_proj.w", &out_proj.w}, {"out_proj.b", &out_proj.b},
            {"ln_final.g", &ln_final.gamma}, {"ln_final.b", &ln_final.beta}};
        for (size_t b = 0; b < blocks.size(); ++b) {
            auto& blk = blocks[b];
            std::string p = format_str("block%zu.", b);
            out.insert(out.end(), {
                {p + "ln_self.g", &blk.ln_self.gamma}, {p + "ln_self.b", &blk.ln_self.beta},
                {p + "ln_cross.g", &blk.ln_cross.gamma}, {p + "ln_cross.b", &blk.ln_cross.beta},
                {p + "ln_mlp.g", &blk.ln_mlp.gamma}, {p + "ln_mlp.b", &blk.ln_mlp.beta},
                {p + "self.wq.w", &blk.attn_self.wq.w}, {p + "self.wq.b", &blk.attn_self.wq.b},
                {p + "self.wk.w", &blk.attn_self.wk.w}, {p + "self.wk.b", &blk.attn_self.wk.b},
                {p + "self.wv.w", &blk.attn_self.wv.w}, {p + "self.wv.b", &blk.attn_self.wv.b},
                {p + "self.wo.w", &blk.attn_self.wo.w}, {p + "self.wo.b", &blk.attn_self.wo.b},
                {p + "cross.wq.w", &blk.attn_cross.wq.w}, {p + "cross.wq.b", &blk.attn_cross.wq.b},
                {p + "cross.wk.w", &blk.attn_cross.wk.w}, {p + "cross.wk.b", &blk.attn_cross.wk.b},
                {p + "cross.wv.w", &blk.attn_cross.wv.w}, {p + "cross.wv.b", &blk.attn_cross.wv.b},
                {p + "cross.wo.w", &blk.attn_cross.wo.w}, {p + "cross.wo.b", &blk.attn_cross.wo.b},
                {p + "mlp1.w", &blk.mlp1.w}, {p + "mlp1.b", &blk.mlp1.b},
                {p + "mlp2.w", &blk.mlp2.w}, {p + "mlp2.b", &blk.mlp2.b}});
        }
        return out;
    }
};

// ---------------------------------------------------------------------------
// Set-level operations (float precision, used by the pipeline).

struct PaddedSet {
    Tensor<float> z_set;     // [n_max, d]
    Tensor<float> cond_set;  // [n_max, c]
    std::vector<char> mask;
    std::vector<int> ids;    // identity channel per slot (slot index by default)
};

PaddedSet pad_and_mask(const std::vector<std::vector<float>>& embeddings,
                       const std::vector<std::vector<float>>& conds, int n_max);

DiffusionState noise_set(const Tensor<float>& z_clean, const std::vector<char>& mask,
                         double tau, Rng& rng);

// Denoiser D_theta with EDM preconditioning wrapped around the score net.
// Masked rows of the result are zero.
Tensor<float> score_forward(ScoreNet<float>& net, const EdmConfig& edm,
                            const DiffusionState& state, const Tensor<float>& cond_set,
                            const std::vector<char>& cond_mask,
                            const std::vector<int>* ids = nullptr);

// Pluggable denoiser for oracle tests and the sampler: (z_set, mask, sigma) -> D.
using DenoiserFn =
    std::function<Tensor<float>(const Tensor<float>&, const std::vector<char>&, double)>;

// Denoising-score-matching loss at one sampled noise level. `denoiser` is
// the preconditioned D_theta.
double dsm_loss_with(const DenoiserFn& denoiser, const EdmConfig& edm,
                     const Tensor<float>& z_clean, const std::vector<char>& mask,
                     Rng& rng);

double dsm_loss(ScoreNet<float>& net, const EdmConfig& edm, const Tensor<float>& z_clean,
                const Tensor<float>& cond_set, const std::vector<char>& mask,
                Rng& rng, const std::vector<int>* ids = nullptr);

// One DSM training step (forward + backward, no optimizer update).
double dsm_backward(ScoreNet<float>& net, const EdmConfig& edm,
                    const Tensor<float>& z_clean, const Tensor<float>& cond_set,
                    const std::vector<char>& mask, Rng& rng,
                    const std::vector<int>* ids = nullptr, double grad_scale = 1.0);

// Heun integration of the probability-flow ODE from sigma_max to sigma_min.
// init_noise, when given, is the unit-variance start (scaled by sigma_max
// internally); otherwise it is drawn from rng.
Tensor<float> sample_set(const DenoiserFn& denoiser, const std::vector<char>& mask,
                         int d, const NoiseSchedule& schedule, Rng& rng,
                         const Tensor<float>* init_noise = nullptr);

Tensor<float> sample_set(ScoreNet<float>& net, const EdmConfig& edm,
                         const Tensor<float>& cond_set, const std::vector<char>& mask,
                         const NoiseSchedule& schedule, Rng& rng,
                         const std::vector<int>* ids = nullptr,
                         const Tensor<float>* init_noise = nullptr);

// ---------------------------------------------------------------------------
// Training loop over a dataset of embedding sets.
struct SetSample {
    std::vector<std::vector<float>> z;  // one row per track
    std::vector<std::vector<float>> c;
};

struct ScoreTrainConfig {
    int steps = 3000;
    int batch = 8;
    double lr = 1e-3;
    uint64_t seed = 1;
    double sigma_max_mult = 80.0;  // sigma_max = mult * sigma_data
    double cond_noise = 0.0;       // smoothing noise on conditions per draw
    int log_every = 100;
    std::function<void(int, const std::string&, double)> metric_hook;
};

struct ScoreTrainReport {
    double sigma_data = 0.0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

ScoreTrainReport train_score(ScoreNet<float>& net, EdmConfig& edm,
                             const std::vector<SetSample>& train_sets,
                             const std::vector<SetSample>& val_sets,
                             const ScoreTrainConfig& cfg);

}  // namespace mixgen
