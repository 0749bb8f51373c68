#include "mixgen/diffusion.hpp"

#include <algorithm>
#include <cmath>

namespace mixgen {

PaddedSet pad_and_mask(const std::vector<std::vector<float>>& embeddings,
                       const std::vector<std::vector<float>>& conds, int n_max) {
    require(!embeddings.empty(), "pad_and_mask: empty track list");
    require(embeddings.size() == conds.size(), "pad_and_mask: z/cond count mismatch");
    require(int(embeddings.size()) <= n_max,
            format_str("pad_and_mask: %zu tracks exceed n_max=%d", embeddings.size(), n_max));
    const int d = int(embeddings[0].size());
    const int c = int(conds[0].size());
    PaddedSet out;
    out.z_set = Tensor<float>({n_max, d});
    out.cond_set = Tensor<float>({n_max, c});
    out.mask.assign(size_t(n_max), 0);
    out.ids.resize(size_t(n_max));
    for (int i = 0; i < n_max; ++i) out.ids[size_t(i)] = i;
    for (size_t i = 0; i < embeddings.size(); ++i) {
        require(embeddings[i].size() == size_t(d), "pad_and_mask: ragged embeddings");
        require(conds[i].size() == size_t(c), "pad_and_mask: ragged conds");
        out.mask[i] = 1;
        for (int j = 0; j < d; ++j) out.z_set.at(int(i), j) = embeddings[i][size_t(j)];
        for (int j = 0; j < c; ++j) out.cond_set.at(int(i), j) = conds[i][size_t(j)];
    }
    return out;
}

DiffusionState noise_set(const Tensor<float>& z_clean, const std::vector<char>& mask,
                         double tau, Rng& rng) {
    require(tau >= 0.0, "noise_set: negative tau");
    require(size_t(z_clean.rows()) == mask.size(), "noise_set: mask size mismatch");
    DiffusionState state;
    state.tau = tau;
    state.mask = mask;
    state.z_set = Tensor<float>({z_clean.rows(), z_clean.cols()});
    for (int i = 0; i < z_clean.rows(); ++i) {
        if (!mask[size_t(i)]) continue;  // masked rows stay zero
        for (int j = 0; j < z_clean.cols(); ++j)
            state.z_set.at(i, j) = z_clean.at(i, j) + float(tau * rng.normal());
    }
    return state;
}

namespace {

struct Gathered {
    std::vector<int> slots;  // padded-set row index per gathered row
    std::vector<int> ids;    // identity channel per gathered row
};

Gathered gather_order(const std::vector<char>& mask, const std::vector<int>* ids, int n_max) {
    Gathered g;
    for (int i = 0; i < n_max; ++i)
        if (mask[size_t(i)]) g.slots.push_back(i);
    require(!g.slots.empty(), "score net: all rows masked");
    std::vector<int> row_ids(g.slots.size());
    for (size_t r = 0; r < g.slots.size(); ++r)
        row_ids[r] = ids ? (*ids)[size_t(g.slots[r])] : g.slots[r];
    // canonical order: ascending identity; makes equivariance exact
    std::vector<size_t> order(g.slots.size());
    for (size_t r = 0; r < order.size(); ++r) order[r] = r;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return row_ids[a] < row_ids[b]; });
    Gathered sorted;
    for (size_t r : order) {
        sorted.slots.push_back(g.slots[r]);
        sorted.ids.push_back(row_ids[r]);
    }
    for (size_t r = 1; r < sorted.ids.size(); ++r)
        require(sorted.ids[r] != sorted.ids[r - 1], "score net: duplicate track ids");
    return sorted;
}

Tensor<float> gather_rows(const Tensor<float>& set, const std::vector<int>& slots) {
    Tensor<float> out({int(slots.size()), set.cols()});
    for (size_t r = 0; r < slots.size(); ++r)
        for (int j = 0; j < set.cols(); ++j) out.at(int(r), j) = set.at(slots[r], j);
    return out;
}

}  // namespace

Tensor<float> score_forward(ScoreNet<float>& net, const EdmConfig& edm,
                            const DiffusionState& state, const Tensor<float>& cond_set,
                            const std::vector<char>& cond_mask,
                            const std::vector<int>* ids) {
    require(state.mask == cond_mask, "score_forward: state/cond mask mismatch");
    require(state.z_set.rows() == net.n_max && cond_set.rows() == net.n_max,
            "score_forward: set size != n_max");
    const double sigma = state.tau;
    require(sigma > 0.0, "score_forward: sigma must be positive");

    Gathered g = gather_order(state.mask, ids, net.n_max);
    Tensor<float> z_rows = gather_rows(state.z_set, g.slots);
    Tensor<float> c_rows = gather_rows(cond_set, g.slots);
    const float cin = float(edm.c_in(sigma));
    Tensor<float> z_scaled = z_rows;
    for (auto& v : z_scaled.v) v *= cin;

    Tensor<float> f = net.forward_gathered(z_scaled, c_rows, g.ids, edm.c_noise(sigma));

    const float cskip = float(edm.c_skip(sigma));
    const float cout = float(edm.c_out(sigma));
    Tensor<float> out({net.n_max, net.d});
    for (size_t r = 0; r < g.slots.size(); ++r)
        for (int j = 0; j < net.d; ++j)
            out.at(g.slots[r], j) = cskip * z_rows.at(int(r), j) + cout * f.at(int(r), j);
    return out;
}

double dsm_loss_with(const DenoiserFn& denoiser, const EdmConfig& edm,
                     const Tensor<float>& z_clean, const std::vector<char>& mask,
                     Rng& rng) {
    int n_valid = 0;
    for (char m : mask) n_valid += m ? 1 : 0;
    require(n_valid > 0, "dsm_loss: all rows masked");

    double sigma = std::exp(edm.p_mean + edm.p_std * rng.normal());
    DiffusionState state = noise_set(z_clean, mask, sigma, rng);
    Tensor<float> d = denoiser(state.z_set, mask, sigma);

    double err = 0.0;
    for (int i = 0; i < z_clean.rows(); ++i) {
        if (!mask[size_t(i)]) continue;
        for (int j = 0; j < z_clean.cols(); ++j) {
            double e = double(d.at(i, j)) - double(z_clean.at(i, j));
            err += e * e;
        }
    }
    return edm.loss_weight(sigma) * err / double(n_valid);
}

double dsm_loss(ScoreNet<float>& net, const EdmConfig& edm, const Tensor<float>& z_clean,
                const Tensor<float>& cond_set, const std::vector<char>& mask, Rng& rng,
                const std::vector<int>* ids) {
    auto denoiser = [&](const Tensor<float>& z_noisy, const std::vector<char>& m,
                        double sigma) {
        DiffusionState st{z_noisy, m, sigma};
        return score_forward(net, edm, st, cond_set, m, ids);
    };
    return dsm_loss_with(denoiser, edm, z_clean, mask, rng);
}

double dsm_backward(ScoreNet<float>& net, const EdmConfig& edm,
                    const Tensor<float>& z_clean, const Tensor<float>& cond_set,
                    const std::vector<char>& mask, Rng& rng,
                    const std::vector<int>* ids, double grad_scale) {
    int n_valid = 0;
    for (char m : mask) n_valid += m ? 1 : 0;
    require(n_valid > 0, "dsm_backward: all rows masked");

    double sigma = std::exp(edm.p_mean + edm.p_std * rng.normal());
    DiffusionState state = noise_set(z_clean, mask, sigma, rng);

    Gathered g = gather_order(mask, ids, net.n_max);
    Tensor<float> z_rows = gather_rows(state.z_set, g.slots);
    Tensor<float> c_rows = gather_rows(cond_set, g.slots);
    const float cin = float(edm.c_in(sigma));
    Tensor<float> z_scaled = z_rows;
    for (auto& v : z_scaled.v) v *= cin;
    Tensor<float> f = net.forward_gathered(z_scaled, c_rows, g.ids, edm.c_noise(sigma));

    const double cskip = edm.c_skip(sigma);
    const double cout = edm.c_out(sigma);
    const double w = edm.loss_weight(sigma);
    double err = 0.0;
    Tensor<float> df({int(g.slots.size()), net.d});
    for (size_t r = 0; r < g.slots.size(); ++r) {
        for (int j = 0; j < net.d; ++j) {
            double dval = cskip * double(z_rows.at(int(r), j)) + cout * double(f.at(int(r), j));
            double e = dval - double(z_clean.at(g.slots[r], j));
            err += e * e;
            df.at(int(r), j) = float(grad_scale * w * 2.0 * e * cout / double(n_valid));
        }
    }
    net.backward_gathered(df);
    return w * err / double(n_valid);
}

Tensor<float> sample_set(const DenoiserFn& denoiser, const std::vector<char>& mask,
                         int d, const NoiseSchedule& schedule, Rng& rng,
                         const Tensor<float>* init_noise) {
    schedule.validate();
    const int n_max = int(mask.size());
    Tensor<float> x({n_max, d});
    for (int i = 0; i < n_max; ++i) {
        if (!mask[size_t(i)]) continue;
        for (int j = 0; j < d; ++j) {
            double eps = init_noise ? double(init_noise->at(i, j)) : rng.normal();
            x.at(i, j) = float(schedule.sigma_max * eps);
        }
    }

    for (int i = 0; i < schedule.steps; ++i) {
        double s0 = schedule.sigma_at(i);
        double s1 = schedule.sigma_at(i + 1);
        Tensor<float> den = denoiser(x, mask, s0);
        Tensor<float> dcur({n_max, d});
        Tensor<float> x_next({n_max, d});
        for (int r = 0; r < n_max; ++r) {
            if (!mask[size_t(r)]) continue;
            for (int j = 0; j < d; ++j) {
                double dv = (double(x.at(r, j)) - double(den.at(r, j))) / s0;
                dcur.at(r, j) = float(dv);
                x_next.at(r, j) = float(double(x.at(r, j)) + (s1 - s0) * dv);
            }
        }
        if (s1 > 0.0) {  // Heun correction
            Tensor<float> den2 = denoiser(x_next, mask, s1);
            for (int r = 0; r < n_max; ++r) {
                if (!mask[size_t(r)]) continue;
                for (int j = 0; j < d; ++j) {
                    double d2 = (double(x_next.at(r, j)) - double(den2.at(r, j))) / s1;
                    x_next.at(r, j) = float(double(x.at(r, j)) +
                                            (s1 - s0) * 0.5 * (double(dcur.at(r, j)) + d2));
                }
            }
        }
        x = x_next;
        for (int r = 0; r < n_max; ++r) {
            if (!mask[size_t(r)]) continue;
            for (int j = 0; j < d; ++j)
                require(std::isfinite(x.at(r, j)),
                        format_str("sample_set: non-finite state at step %d (sigma %.4g)", i, s0));
        }
    }
    return x;
}

Tensor<float> sample_set(ScoreNet<float>& net, const EdmConfig& edm,
                         const Tensor<float>& cond_set, const std::vector<char>& mask,
                         const NoiseSchedule& schedule, Rng& rng,
                         const std::vector<int>* ids, const Tensor<float>* init_noise) {
    auto denoiser = [&](const Tensor<float>& z_noisy, const std::vector<char>& m,
                        double sigma) {
        DiffusionState st{z_noisy, m, sigma};
        return score_forward(net, edm, st, cond_set, m, ids);
    };
    return sample_set(denoiser, mask, net.d, schedule, rng, init_noise);
}

ScoreTrainReport train_score(ScoreNet<float>& net, EdmConfig& edm,
                             const std::vector<SetSample>& train_sets,
                             const std::vector<SetSample>& val_sets,
                             const ScoreTrainConfig& cfg) {
    require(!train_sets.empty(), "train_score: empty dataset");

    // sigma_data from the training-embedding std
    double sum = 0.0, sum2 = 0.0;
    int64_t count = 0;
    for (const auto& s : train_sets)
        for (const auto& row : s.z)
            for (float v : row) {
                sum += double(v);
                sum2 += double(v) * double(v);
                ++count;
            }
    double mean = sum / double(count);
    double sigma_data = std::sqrt(std::max(sum2 / double(count) - mean * mean, 1e-12));
    edm.sigma_data = sigma_data;
    net.sigma_data = sigma_data;

    ScoreTrainReport report;
    report.sigma_data = sigma_data;

    Rng rng(cfg.seed);
    auto params = net.params();
    Adam<float> opt;
    opt.lr = cfg.lr;
    opt.init(params);

    auto eval_val = [&](uint64_t seed) {
        if (val_sets.empty()) return 0.0;
        Rng vr(seed);
        double acc = 0.0;
        int n = 0;
        for (const auto& s : val_sets) {
            PaddedSet p = pad_and_mask(s.z, s.c, net.n_max);
            acc += dsm_loss(net, edm, p.z_set, p.cond_set, p.mask, vr);
            ++n;
        }
        return acc / double(n);
    };

    for (int step = 0; step < cfg.steps; ++step) {
        for (auto* p : params) p->zero_grad();
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch; ++b) {
            const auto& sample = train_sets[rng.randint(train_sets.size())];
            // identity-assignment augmentation: shuffle the track order so
            // each track lands on a random one-hot id
            std::vector<size_t> order(sample.z.size());
            for (size_t i = 0; i < order.size(); ++i) order[i] = i;
            for (size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.randint(i)]);
            std::vector<std::vector<float>> z, c;
            for (size_t i : order) {
                z.push_back(sample.z[i]);
                c.push_back(sample.c[i]);
                if (cfg.cond_noise > 0.0)
                    for (auto& v : c.back()) v += float(cfg.cond_noise * rng.normal());
            }
            PaddedSet p = pad_and_mask(z, c, net.n_max);
            batch_loss += dsm_backward(net, edm, p.z_set, p.cond_set, p.mask, rng,
                                       nullptr, 1.0 / double(cfg.batch));
        }
        batch_loss /= double(cfg.batch);
        if (step == 0) report.initial_loss = batch_loss;
        report.final_loss = batch_loss;
        opt.step(params);
        if (cfg.metric_hook && (step % cfg.log_every == 0 || step == cfg.steps - 1)) {
            cfg.metric_hook(step, "dsm_loss", batch_loss);
            if (!val_sets.empty()) cfg.metric_hook(step, "val_dsm_loss", eval_val(999));
        }
    }
    net.trained_ = true;
    return report;
}

}  // namespace mixgen
