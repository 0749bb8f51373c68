#include "mixgen/processor.hpp"

#include <algorithm>
#include <cmath>

namespace mixgen {

const std::vector<int>& msspec_fft_sizes() {
    static const std::vector<int> sizes = {512, 1024, 2048, 4096};
    return sizes;
}

namespace {
constexpr double kLogEps = 1e-7;   // floor inside the log-magnitude term
constexpr double kMagEps = 1e-20;  // keeps sqrt differentiable at zero
constexpr double kAbsEps2 = 1e-6;  // pseudo-Huber smoothing of |.| (1e-3 wide)
}  // namespace

template <typename T>
double msspec_loss_t(const std::vector<std::vector<T>>& y_hat,
                     const std::vector<std::vector<T>>& y,
                     std::vector<std::vector<T>>* grad_y_hat) {
    require(y_hat.size() == y.size() && !y.empty(), "msspec: channel count mismatch");
    for (size_t c = 0; c < y.size(); ++c)
        require(y_hat[c].size() == y[c].size(), "msspec: length mismatch");
    const int n_ch = int(y.size());
    const int64_t n = int64_t(y[0].size());

    if (grad_y_hat) {
        grad_y_hat->assign(size_t(n_ch), std::vector<T>(size_t(n), T(0)));
    }

    double total = 0.0;
    int used_sizes = 0;
    for (int fft_size : msspec_fft_sizes()) {
        if (n < fft_size) continue;
        ++used_sizes;
        const int hop = fft_size / 4;
        std::vector<T> win = hann_window<T>(fft_size);
        const int n_bins = fft_size / 2 + 1;
        double size_loss = 0.0;
        for (int c = 0; c < n_ch; ++c) {
            // spectra of both signals
            int64_t n_frames = (n - fft_size) / hop + 1;
            std::vector<std::vector<std::complex<T>>> spec_h(static_cast<size_t>(n_frames));
            std::vector<std::vector<T>> mag_h(static_cast<size_t>(n_frames));
            std::vector<std::vector<T>> mag_y(static_cast<size_t>(n_frames));
            double l1 = 0.0, fro_num = 0.0, fro_den = 0.0;
            for (int64_t fr = 0; fr < n_frames; ++fr) {
                std::vector<std::complex<T>> bh(static_cast<size_t>(fft_size));
                std::vector<std::complex<T>> by(static_cast<size_t>(fft_size));
                int64_t start = fr * hop;
                for (int i = 0; i < fft_size; ++i) {
                    bh[size_t(i)] = y_hat[size_t(c)][size_t(start + i)] * win[size_t(i)];
                    by[size_t(i)] = y[size_t(c)][size_t(start + i)] * win[size_t(i)];
                }
                fft_inplace(bh, false);
                fft_inplace(by, false);
                mag_h[size_t(fr)].resize(size_t(n_bins));
                mag_y[size_t(fr)].resize(size_t(n_bins));
                for (int k = 0; k < n_bins; ++k) {
                    T ph = bh[size_t(k)].real() * bh[size_t(k)].real() +
                           bh[size_t(k)].imag() * bh[size_t(k)].imag();
                    T py = by[size_t(k)].real() * by[size_t(k)].real() +
                           by[size_t(k)].imag() * by[size_t(k)].imag();
                    T mh = std::sqrt(ph + T(kMagEps));
                    T my = std::sqrt(py + T(kMagEps));
                    mag_h[size_t(fr)][size_t(k)] = mh;
                    mag_y[size_t(fr)][size_t(k)] = my;
                    double dlog = double(std::log(mh + T(kLogEps))) -
                                  double(std::log(my + T(kLogEps)));
                    l1 += std::sqrt(dlog * dlog + kAbsEps2) - std::sqrt(kAbsEps2);
                    double d = double(mh) - double(my);
                    fro_num += d * d;
                    fro_den += double(my) * double(my);
                }
                bh.resize(size_t(n_bins));
                spec_h[size_t(fr)] = std::move(bh);
            }
            const double n_elems = double(n_frames) * double(n_bins);
            double fro = std::sqrt(fro_num + 1e-30) / std::sqrt(fro_den + 1e-30);
            size_loss += l1 / n_elems + fro;

            if (grad_y_hat) {
                // dL/dmag -> dL/dpow -> frame gradient via 2 N Re(IFFT(dpow * X))
                for (int64_t fr = 0; fr < n_frames; ++fr) {
                    std::vector<std::complex<T>> H(static_cast<size_t>(fft_size));
                    for (int k = 0; k < n_bins; ++k) {
                        double mh = double(mag_h[size_t(fr)][size_t(k)]);
                        double my = double(mag_y[size_t(fr)][size_t(k)]);
                        double dlog = std::log(mh + kLogEps) - std::log(my + kLogEps);
                        double dl = dlog / std::sqrt(dlog * dlog + kAbsEps2);
                        double dmag = dl / ((mh + kLogEps) * n_elems) +
                                      (mh - my) / (std::sqrt(fro_num + 1e-30) *
                                                   std::sqrt(fro_den + 1e-30));
                        dmag /= double(n_ch);
                        double dpow = dmag / (2.0 * mh);
                        H[size_t(k)] = spec_h[size_t(fr)][size_t(k)] * T(dpow);
                    }
                    fft_inplace(H, true);
                    // adjoint of the unnormalized forward FFT: scale by N
                    int64_t start = fr * hop;
                    for (int i = 0; i < fft_size; ++i)
                        (*grad_y_hat)[size_t(c)][size_t(start + i)] +=
                            T(2) * T(fft_size) * H[size_t(i)].real() * win[size_t(i)];
                }
            }
        }
        total += size_loss / double(n_ch);
    }
    require(used_sizes > 0, "msspec: signal shorter than the smallest FFT size");
    return total;
}

template double msspec_loss_t<float>(const std::vector<std::vector<float>>&,
                                     const std::vector<std::vector<float>>&,
                                     std::vector<std::vector<float>>*);
template double msspec_loss_t<double>(const std::vector<std::vector<double>>&,
                                      const std::vector<std::vector<double>>&,
                                      std::vector<std::vector<double>>*);

double msspec_loss(const AudioBuffer& y_hat, const AudioBuffer& y) {
    require(y_hat.channels() == y.channels() && y_hat.frames() == y.frames(),
            "msspec: shape mismatch");
    std::vector<std::vector<float>> a(y_hat.ch.begin(), y_hat.ch.end());
    std::vector<std::vector<float>> b(y.ch.begin(), y.ch.end());
    return msspec_loss_t<float>(a, b, nullptr);
}

double deep_feature_loss(EffectEncoder& enc, const AudioBuffer& y_hat,
                         const AudioBuffer& y) {
    require(enc.trained, "deep_feature_loss: untrained effect encoder");
    auto a = enc.encode(y_hat);
    auto b = enc.encode(y);
    double dot = 0.0;
    for (size_t i = 0; i < a.size(); ++i) dot += double(a[i]) * double(b[i]);
    return 1.0 - dot;  // embeddings are unit-norm
}

double deep_feature_loss_grad(EffectEncoder& enc,
                              const std::vector<std::vector<float>>& y_hat,
                              const std::vector<std::vector<float>>& y,
                              std::vector<std::vector<float>>* grad_y_hat) {
    require(enc.trained, "deep_feature_loss: untrained effect encoder");
    require(y_hat.size() == 2 && y.size() == 2, "deep_feature_loss: stereo expected");
    const int64_t n = int64_t(y_hat[0].size());

    auto ms = [&](const std::vector<std::vector<float>>& sig) {
        std::pair<std::vector<float>, std::vector<float>> out;
        out.first.resize(size_t(n));
        out.second.resize(size_t(n));
        for (int64_t i = 0; i < n; ++i) {
            out.first[size_t(i)] = 0.5f * (sig[0][size_t(i)] + sig[1][size_t(i)]);
            out.second[size_t(i)] = 0.5f * (sig[0][size_t(i)] - sig[1][size_t(i)]);
        }
        return out;
    };

    auto [mid_y, side_y] = ms(y);
    auto feat_y = enc.frontend.forward(mid_y, side_y);
    auto emb_y = enc.net.forward(feat_y);

    auto [mid_h, side_h] = ms(y_hat);
    MelFrontend<float>::Cache cache;
    auto feat_h = enc.frontend.forward(mid_h, side_h, &cache);
    auto emb_h = enc.net.forward(feat_h);

    double dot = 0.0;
    for (size_t i = 0; i < emb_h.size(); ++i) dot += double(emb_h[i]) * double(emb_y[i]);
    double loss = 1.0 - dot;

    if (grad_y_hat) {
        std::vector<float> demb(emb_h.size());
        for (size_t i = 0; i < demb.size(); ++i) demb[i] = -emb_y[i];
        Tensor<float> dfeat = enc.net.backward(demb);
        auto [dmid, dside] = enc.frontend.backward(dfeat, cache);
        grad_y_hat->assign(2, std::vector<float>(size_t(n), 0.0f));
        for (int64_t i = 0; i < n; ++i) {
            (*grad_y_hat)[0][size_t(i)] = 0.5f * (dmid[size_t(i)] + dside[size_t(i)]);
            (*grad_y_hat)[1][size_t(i)] = 0.5f * (dmid[size_t(i)] - dside[size_t(i)]);
        }
    }
    return loss;
}

std::pair<double, double> decode_gain_targets_db(const EffectEmbedding& z,
                                                 const FourierCodec& codec) {
    auto split = split_embedding(z, codec);
    auto clamp_db = [](double v, const char* which) {
        if (v < -80.0) {
            warn(format_str("apply_gain: decoded %s RMS %.1f dB below -80 dB, clamping", which, v));
            return -80.0;
        }
        if (v > 0.0) {
            warn(format_str("apply_gain: decoded %s RMS %.1f dB above 0 dB, clamping", which, v));
            return 0.0;
        }
        return v;
    };
    return {clamp_db(split.features.log_rms_l, "left"),
            clamp_db(split.features.log_rms_r, "right")};
}

AudioBuffer apply_gain_from_embedding(const AudioBuffer& y_norm, const EffectEmbedding& z,
                                      const FourierCodec& codec) {
    y_norm.validate();
    require(y_norm.stereo(), "apply_gain: stereo input expected");
    auto [target_l, target_r] = decode_gain_targets_db(z, codec);

    const int win = int(std::lround(kFeatWindowMs * 1e-3 * y_norm.sample_rate));
    const int hop = int(std::lround(kFeatHopMs * 1e-3 * y_norm.sample_rate));
    AudioBuffer out = y_norm;
    const double targets[2] = {target_l, target_r};
    for (int c = 0; c < 2; ++c) {
        double measured = max_window_rms(y_norm.ch[size_t(c)], win, hop);
        double measured_db = lin_to_db(std::max(measured, 1e-6));
        double gain = db_to_lin(targets[c] - measured_db);
        for (auto& s : out.ch[size_t(c)]) s = float(double(s) * gain);
    }
    return out;
}

AudioBuffer process_track(ProcessorContext& ctx, const AudioBuffer& x,
                          const EffectEmbedding& z, const std::vector<float>& c,
                          bool parallel) {
    require(ctx.tcn.trained, "process_track: untrained processor");
    AudioBuffer mono = mono_downmix(x);
    mono = rms_normalize(mono, ctx.rms_target).audio;
    mono = eq_normalize(mono, ctx.profile);
    mono = rms_normalize(mono, ctx.rms_target).audio;

    std::vector<float> zc = z.flat();
    zc.insert(zc.end(), c.begin(), c.end());
    require(int(zc.size()) == ctx.tcn.cond_dim, "process_track: cond dim mismatch");

    Tensor<float> xin({1, int(mono.frames())});
    xin.v.assign(mono.ch[0].begin(), mono.ch[0].end());
    Tensor<float> cond({1, int(zc.size())});
    cond.v = zc;
    Tensor<float> out = ctx.tcn.forward(xin, cond, parallel);

    AudioBuffer y_norm(2, mono.frames(), mono.sample_rate);
    for (int ch = 0; ch < 2; ++ch)
        for (int64_t i = 0; i < mono.frames(); ++i)
            y_norm.ch[size_t(ch)][size_t(i)] = out.at(ch, int(i));
    require(y_norm.finite(), "process_track: non-finite network output");
    return apply_gain_from_embedding(y_norm, z, ctx.codec);
}

ProcTrainReport train_processor(Tcn<float>& tcn, EffectEncoder& fx_enc,
                                const std::vector<ProcSample>& train,
                                const std::vector<ProcSample>& val,
                                const ProcTrainConfig& cfg) {
    require(!train.empty(), "train_processor: empty dataset");
    if (cfg.beta_deep > 0.0)
        require(fx_enc.trained, "train_processor: deep loss needs a trained effect encoder");
    for (const auto& s : train)
        require(int64_t(s.x_norm.size()) >= cfg.crop,
                "train_processor: sample shorter than the crop length");

    Rng rng(cfg.seed);
    auto params = tcn.params();
    Adam<float> opt;
    opt.lr = cfg.lr;
    opt.init(params);

    auto eval_set = [&](const std::vector<ProcSample>& samples, uint64_t seed) {
        if (samples.empty()) return 0.0;
        Rng vr(seed);
        double acc = 0.0;
        int count = 0;
        Tcn<float>& net = tcn;
        for (const auto& s : samples) {
            int64_t off = int64_t(vr.randint(uint64_t(int64_t(s.x_norm.size()) - cfg.crop + 1)));
            Tensor<float> xin({1, int(cfg.crop)});
            for (int64_t i = 0; i < cfg.crop; ++i) xin.v[size_t(i)] = s.x_norm[size_t(off + i)];
            Tensor<float> cond({1, int(s.cond.size())});
            cond.v = s.cond;
            Tensor<float> out = net.forward(xin, cond, cfg.parallel);
            std::vector<std::vector<float>> yh(2, std::vector<float>(size_t(cfg.crop)));
            std::vector<std::vector<float>> yt(2, std::vector<float>(size_t(cfg.crop)));
            for (int c = 0; c < 2; ++c)
                for (int64_t i = 0; i < cfg.crop; ++i) {
                    yh[size_t(c)][size_t(i)] = out.at(c, int(i));
                    yt[size_t(c)][size_t(i)] = s.y_norm[size_t(c)][size_t(off + i)];
                }
            acc += msspec_loss_t<float>(yh, yt, nullptr);
            ++count;
        }
        return acc / double(count);
    };
    auto eval_val = [&](uint64_t seed) { return eval_set(val, seed); };

    ProcTrainReport report;
    report.initial_val_msspec = eval_val(4242);
    report.initial_train_loss = eval_set(train, 2323);
    if (cfg.metric_hook) cfg.metric_hook(0, "val_msspec_initial", report.initial_val_msspec);

    for (int step = 0; step < cfg.steps; ++step) {
        // cosine decay to 5% of the peak rate
        opt.lr = cfg.lr * (0.05 + 0.475 * (1.0 + std::cos(M_PI * double(step) / double(cfg.steps))));
        const auto& s = train[rng.randint(train.size())];
        int64_t off = int64_t(rng.randint(uint64_t(int64_t(s.x_norm.size()) - cfg.crop + 1)));

        Tensor<float> xin({1, int(cfg.crop)});
        for (int64_t i = 0; i < cfg.crop; ++i) xin.v[size_t(i)] = s.x_norm[size_t(off + i)];
        Tensor<float> cond({1, int(s.cond.size())});
        cond.v = s.cond;

        Tensor<float> out = tcn.forward(xin, cond, cfg.parallel);
        std::vector<std::vector<float>> yh(2, std::vector<float>(size_t(cfg.crop)));
        std::vector<std::vector<float>> yt(2, std::vector<float>(size_t(cfg.crop)));
        for (int c = 0; c < 2; ++c)
            for (int64_t i = 0; i < cfg.crop; ++i) {
                yh[size_t(c)][size_t(i)] = out.at(c, int(i));
                yt[size_t(c)][size_t(i)] = s.y_norm[size_t(c)][size_t(off + i)];
            }

        std::vector<std::vector<float>> grad;
        double loss = msspec_loss_t<float>(yh, yt, &grad);
        if (cfg.beta_deep > 0.0) {
            std::vector<std::vector<float>> dgrad;
            double dloss = deep_feature_loss_grad(fx_enc, yh, yt, &dgrad);
            loss += cfg.beta_deep * dloss;
            for (int c = 0; c < 2; ++c)
                for (int64_t i = 0; i < cfg.crop; ++i)
                    grad[size_t(c)][size_t(i)] += float(cfg.beta_deep) * dgrad[size_t(c)][size_t(i)];
        }

        Tensor<float> dout({2, int(cfg.crop)});
        for (int c = 0; c < 2; ++c)
            for (int64_t i = 0; i < cfg.crop; ++i) dout.at(c, int(i)) = grad[size_t(c)][size_t(i)];
        for (auto* p : params) p->zero_grad();
        tcn.backward(dout, cfg.parallel);
        if (cfg.grad_clip > 0.0) {
            double norm2 = 0.0;
            for (auto* p : params)
                for (float g : p->g) norm2 += double(g) * double(g);
            double norm = std::sqrt(norm2);
            if (norm > cfg.grad_clip) {
                float scl = float(cfg.grad_clip / norm);
                for (auto* p : params)
                    for (auto& g : p->g) g *= scl;
            }
        }
        opt.step(params);

        if (cfg.metric_hook && (step % cfg.log_every == 0 || step == cfg.steps - 1))
            cfg.metric_hook(step, "proc_train_loss", loss);
        if (cfg.metric_hook && cfg.val_every > 0 &&
            (step % cfg.val_every == cfg.val_every - 1))
            cfg.metric_hook(step, "val_msspec", eval_val(4242));
    }
    tcn.trained = true;
    report.final_train_loss = eval_set(train, 2323);
    report.final_val_msspec = eval_val(4242);
    if (cfg.metric_hook)
        cfg.metric_hook(cfg.steps, "val_msspec_final", report.final_val_msspec);
    return report;
}

}  // namespace mixgen
