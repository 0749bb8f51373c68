#include "mixgen/encoders.hpp"

#include <algorithm>
#include <cmath>

namespace mixgen {

ContentEncoder::ContentEncoder(int c_dim_, uint64_t seed, int sample_rate) : c_dim(c_dim_) {
    mel.sample_rate = sample_rate;
    mel.build();
    Rng rng(seed);
    proj = Tensor<float>({c_dim, 3 * mel.n_mels});
    double s = 1.0 / std::sqrt(double(3 * mel.n_mels));
    for (auto& v : proj.v) v = float(s * rng.normal());
}

std::vector<float> ContentEncoder::encode(const AudioBuffer& x_mono) const {
    x_mono.validate();
    require(x_mono.mono(), "content_encode: input must be mono");
    require(rms_overall(x_mono) > 0.0, "silent-track: content_encode on silent input");

    std::vector<float> sig = x_mono.ch[0];
    auto frames = log_mel_frames<float>(sig, mel);
    require(!frames.empty(), "content_encode: signal too short");
    const int B = mel.n_mels;
    const int64_t T = int64_t(frames.size());

    // per-band mean (level-normalized), per-band std, per-band delta mean
    std::vector<double> mean(size_t(B), 0.0), sd(size_t(B), 0.0), dmean(size_t(B), 0.0);
    double global = 0.0;
    for (const auto& fr : frames)
        for (int b = 0; b < B; ++b) global += fr[size_t(b)];
    global /= double(T * B);
    for (int b = 0; b < B; ++b) {
        double m = 0.0;
        for (const auto& fr : frames) m += fr[size_t(b)];
        m /= double(T);
        double var = 0.0;
        for (const auto& fr : frames) var += (fr[size_t(b)] - m) * (fr[size_t(b)] - m);
        var /= double(T);
        double dm = 0.0;
        for (int64_t t = 1; t < T; ++t)
            dm += std::fabs(double(frames[size_t(t)][size_t(b)]) -
                            double(frames[size_t(t - 1)][size_t(b)]));
        if (T > 1) dm /= double(T - 1);
        mean[size_t(b)] = m - global;  // gain cancels here
        sd[size_t(b)] = std::sqrt(var);
        dmean[size_t(b)] = dm;
    }

    std::vector<float> feat(static_cast<size_t>(3 * B));
    for (int b = 0; b < B; ++b) {
        feat[size_t(b)] = float(mean[size_t(b)]);
        feat[size_t(B + b)] = float(sd[size_t(b)]);
        feat[size_t(2 * B + b)] = float(dmean[size_t(b)]);
    }
    std::vector<float> out(size_t(c_dim), 0.0f);
    for (int i = 0; i < c_dim; ++i) {
        double acc = 0.0;
        for (int j = 0; j < 3 * B; ++j)
            acc += double(proj.at(i, j)) * double(feat[size_t(j)]);
        out[size_t(i)] = float(acc);
    }
    double r = 0.0;
    for (float v : out) r += double(v) * double(v);
    r = std::sqrt(r);
    require(r > 0.0, "content_encode: degenerate embedding");
    for (auto& v : out) v = float(double(v) / r);
    return out;
}

EffectEncoder::EffectEncoder(int d_fx_, int mel_bands, int net_width, uint64_t seed,
                             int sample_rate)
    : d_fx(d_fx_) {
    frontend.mel.sample_rate = sample_rate;
    frontend.mel.n_mels = mel_bands;
    frontend.mel.build();
    Rng rng(seed);
    net = EffectEncoderNet<float>(d_fx_, mel_bands, net_width, rng);
}

std::vector<float> EffectEncoder::forward(const AudioBuffer& y_stereo) {
    y_stereo.validate();
    auto [mid, side] = mid_side<float>(y_stereo);
    auto feat = frontend.forward(mid, side);
    return net.forward(feat);
}

std::vector<float> EffectEncoder::encode(const AudioBuffer& y_stereo) {
    require(trained, "effect_encode: model is untrained");
    return forward(y_stereo);
}

double info_nce_loss(const std::vector<std::vector<float>>& anchors,
                     const std::vector<std::vector<float>>& positives,
                     double temperature) {
    const size_t B = anchors.size();
    require(B >= 2 && positives.size() == B, "info_nce: need a batch of pairs");
    double total = 0.0;
    for (size_t i = 0; i < B; ++i) {
        double mx = -1e30;
        std::vector<double> logits(B);
        for (size_t j = 0; j < B; ++j) {
            double dot = 0.0;
            for (size_t k = 0; k < anchors[i].size(); ++k)
                dot += double(anchors[i][k]) * double(positives[j][k]);
            logits[j] = dot / temperature;
            mx = std::max(mx, logits[j]);
        }
        double denom = 0.0;
        for (double l : logits) denom += std::exp(l - mx);
        total += -(logits[i] - mx - std::log(denom));
    }
    return total / double(B);
}

FxEncTrainReport train_effect_encoder(EffectEncoder& enc, const FxPairDataset& data,
                                      const FxEncTrainConfig& cfg) {
    require(cfg.batch >= 8, "train_effect_encoder: batch must be >= 8");
    require(int(data.groups.size()) >= cfg.batch,
            "train_effect_encoder: need at least `batch` chain groups");
    for (const auto& g : data.groups)
        require(g.size() >= 2, "train_effect_encoder: every chain needs >= 2 renders");

    Rng rng(cfg.seed);
    auto params = enc.net.params();
    Adam<float> opt;
    opt.lr = cfg.lr;
    opt.init(params);

    // mel features are fixed per render; compute them once
    std::vector<std::vector<Tensor<float>>> feats(data.groups.size());
    parallel_for(int64_t(data.groups.size()), [&](int64_t lo, int64_t hi) {
        for (int64_t k = lo; k < hi; ++k) {
            for (const auto& render : data.groups[size_t(k)]) {
                auto [mid, side] = mid_side<float>(render);
                feats[size_t(k)].push_back(enc.frontend.forward(mid, side));
            }
        }
    });

    FxEncTrainReport report;
    const int B = cfg.batch;
    for (int step = 0; step < cfg.steps; ++step) {
        // cosine decay to 10% of the peak rate
        opt.lr = cfg.lr * (0.1 + 0.45 * (1.0 + std::cos(M_PI * double(step) / double(cfg.steps))));
        // pick B distinct chains, two distinct renders each
        std::vector<size_t> chains(data.groups.size());
        for (size_t i = 0; i < chains.size(); ++i) chains[i] = i;
        for (size_t i = chains.size(); i > 1; --i)
            std::swap(chains[i - 1], chains[rng.randint(i)]);
        chains.resize(size_t(B));

        struct Pick { size_t chain, a, b; };
        std::vector<Pick> picks;
        std::vector<std::vector<float>> anc(static_cast<size_t>(B)), pos(static_cast<size_t>(B));
        for (int i = 0; i < B; ++i) {
            const auto& g = feats[chains[size_t(i)]];
            size_t a = rng.randint(g.size());
            size_t b = (a + 1 + rng.randint(g.size() - 1)) % g.size();
            picks.push_back({chains[size_t(i)], a, b});
            anc[size_t(i)] = enc.net.forward(g[a]);
            pos[size_t(i)] = enc.net.forward(g[b]);
        }
        double loss = info_nce_loss(anc, pos, cfg.temperature);
        if (step == 0) report.initial_loss = loss;
        report.final_loss = loss;

        // collapse diagnostic: per-coordinate std across the batch
        double max_std = 0.0;
        for (int k = 0; k < enc.d_fx; ++k) {
            double m = 0.0, v = 0.0;
            for (int i = 0; i < B; ++i) m += double(anc[size_t(i)][size_t(k)]);
            m /= B;
            for (int i = 0; i < B; ++i) {
                double d = double(anc[size_t(i)][size_t(k)]) - m;
                v += d * d;
            }
            max_std = std::max(max_std, std::sqrt(v / B));
        }
        if (step > cfg.steps / 4 && max_std < 1e-4)
            fail(format_str("train_effect_encoder: embeddings collapsed at step %d "
                            "(max coordinate std %.2e)", step, max_std));

        // gradients of InfoNCE w.r.t. the embeddings
        std::vector<std::vector<double>> danc(size_t(B), std::vector<double>(size_t(enc.d_fx), 0.0));
        std::vector<std::vector<double>> dpos(size_t(B), std::vector<double>(size_t(enc.d_fx), 0.0));
        for (int i = 0; i < B; ++i) {
            std::vector<double> logits(static_cast<size_t>(B));
            double mx = -1e30;
            for (int j = 0; j < B; ++j) {
                double dot = 0.0;
                for (int k = 0; k < enc.d_fx; ++k)
                    dot += double(anc[size_t(i)][size_t(k)]) * double(pos[size_t(j)][size_t(k)]);
                logits[size_t(j)] = dot / cfg.temperature;
                mx = std::max(mx, logits[size_t(j)]);
            }
            double denom = 0.0;
            for (double l : logits) denom += std::exp(l - mx);
            for (int j = 0; j < B; ++j) {
                double p = std::exp(logits[size_t(j)] - mx) / denom;
                double dl = (p - (j == i ? 1.0 : 0.0)) / (cfg.temperature * B);
                for (int k = 0; k < enc.d_fx; ++k) {
                    danc[size_t(i)][size_t(k)] += dl * double(pos[size_t(j)][size_t(k)]);
                    dpos[size_t(j)][size_t(k)] += dl * double(anc[size_t(i)][size_t(k)]);
                }
            }
        }

        for (auto* p : params) p->zero_grad();
        // re-run each forward so the layer caches belong to the right sample
        for (int i = 0; i < B; ++i) {
            const auto& g = feats[picks[size_t(i)].chain];
            std::vector<float> d1(static_cast<size_t>(enc.d_fx)), d2(static_cast<size_t>(enc.d_fx));
            for (int k = 0; k < enc.d_fx; ++k) {
                d1[size_t(k)] = float(danc[size_t(i)][size_t(k)]);
                d2[size_t(k)] = float(dpos[size_t(i)][size_t(k)]);
            }
            enc.net.forward(g[picks[size_t(i)].a]);
            enc.net.backward(d1);
            enc.net.forward(g[picks[size_t(i)].b]);
            enc.net.backward(d2);
        }
        opt.step(params);

        if (cfg.metric_hook && (step % cfg.log_every == 0 || step == cfg.steps - 1))
            cfg.metric_hook(step, "infonce_loss", loss);
    }
    enc.trained = true;
    return report;
}

Adaptor::Adaptor(int c_dim, int hidden, uint64_t seed) {
    Rng rng(seed);
    l1 = Dense<float>(c_dim, hidden, rng);
    // zero-init second layer: the adaptor starts as the identity map and
    // learns the wet-to-dry correction on top
    l2 = Dense<float>(hidden, c_dim, rng, /*zero_init=*/true);
}

std::vector<float> Adaptor::apply(const std::vector<float>& c) {
    Tensor<float> x({1, l1.in_dim()});
    require(int(c.size()) == l1.in_dim(), "adaptor: dimension mismatch");
    x.v.assign(c.begin(), c.end());
    auto y = l2.forward(act.forward(l1.forward(x)));
    for (int i = 0; i < l1.in_dim(); ++i) y.v[size_t(i)] += c[size_t(i)];
    return y.v;
}

std::vector<std::pair<std::string, Tensor<float>*>> Adaptor::named_params() {
    return {{"l1.w", &l1.w}, {"l1.b", &l1.b}, {"l2.w", &l2.w}, {"l2.b", &l2.b}};
}

AdaptorTrainReport train_adaptor(Adaptor& adaptor, const ContentEncoder& enc,
                                 const std::vector<std::pair<AudioBuffer, AudioBuffer>>& pairs,
                                 const AdaptorTrainConfig& cfg) {
    require(!pairs.empty(), "train_adaptor: no pairs");
    if (pairs.size() < 100)
        warn(format_str("train_adaptor: only %zu pairs (< 100), expect weak generalization",
                        pairs.size()));

    // encode once: c_wet = E(mono(y)), target c_dry = E(x)
    std::vector<std::vector<float>> wet, dry;
    wet.reserve(pairs.size());
    dry.reserve(pairs.size());
    for (const auto& [x, y] : pairs) {
        dry.push_back(enc.encode(x.mono() ? x : mono_downmix(x)));
        wet.push_back(enc.encode(mono_downmix(y)));
    }

    size_t n_hold = std::max<size_t>(1, size_t(double(pairs.size()) * cfg.holdout_frac));
    size_t n_train = pairs.size() - n_hold;
    require(n_train >= 1, "train_adaptor: not enough pairs for a train split");

    Rng rng(cfg.seed);
    auto [l1w, l1b, l2w, l2b] = std::tuple{&adaptor.l1.w, &adaptor.l1.b, &adaptor.l2.w, &adaptor.l2.b};
    std::vector<Tensor<float>*> params{l1w, l1b, l2w, l2b};
    Adam<float> opt;
    opt.lr = cfg.lr;
    opt.init(params);

    const int c_dim = adaptor.l1.in_dim();
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order(n_train);
        for (size_t i = 0; i < n_train; ++i) order[i] = i;
        for (size_t i = n_train; i > 1; --i) std::swap(order[i - 1], order[rng.randint(i)]);
        double epoch_loss = 0.0;
        for (size_t idx : order) {
            for (auto* p : params) p->zero_grad();
            Tensor<float> x({1, c_dim});
            x.v.assign(wet[idx].begin(), wet[idx].end());
            auto y = adaptor.l2.forward(adaptor.act.forward(adaptor.l1.forward(x)));
            for (int k = 0; k < c_dim; ++k) y.v[size_t(k)] += wet[idx][size_t(k)];
            Tensor<float> dy({1, c_dim});
            double loss = 0.0;
            for (int k = 0; k < c_dim; ++k) {
                double d = double(y.v[size_t(k)]) - double(dry[idx][size_t(k)]);
                loss += d * d;
                dy.v[size_t(k)] = float(2.0 * d);
            }
            epoch_loss += loss;
            adaptor.l1.backward(adaptor.act.backward(adaptor.l2.backward(dy)));
            opt.step(params);
        }
        if (cfg.metric_hook && (epoch % 20 == 0 || epoch == cfg.epochs - 1))
            cfg.metric_hook(epoch, "adaptor_train_l2", epoch_loss / double(n_train));
    }
    adaptor.trained = true;

    AdaptorTrainReport report;
    for (size_t i = n_train; i < pairs.size(); ++i) {
        double ident = 0.0, adapted = 0.0;
        auto mapped = adaptor.apply(wet[i]);
        for (int k = 0; k < c_dim; ++k) {
            double di = double(wet[i][size_t(k)]) - double(dry[i][size_t(k)]);
            double da = double(mapped[size_t(k)]) - double(dry[i][size_t(k)]);
            ident += di * di;
            adapted += da * da;
        }
        report.holdout_l2_identity += ident;
        report.holdout_l2_adapted += adapted;
    }
    report.holdout_l2_identity /= double(n_hold);
    report.holdout_l2_adapted /= double(n_hold);
    return report;
}

std::vector<float> adapt_smooth(const std::vector<float>& c, double sigma_t, Rng& rng,
                                Adaptor* adaptor) {
    require(sigma_t >= 0.0, "adapt_smooth: sigma_T must be >= 0");
    std::vector<float> out = adaptor ? adaptor->apply(c) : c;
    if (sigma_t > 0.0)
        for (auto& v : out) v += float(sigma_t * rng.normal());
    return out;
}

}  // namespace mixgen
