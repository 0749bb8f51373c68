// Acceptance suite: one test case per criterion, each printing a pass/fail
// line. Criteria 8-10 share one full pipeline run (lazy fixture).
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "mixgen/pipeline.hpp"

using namespace mixgen;
namespace fs = std::filesystem;

namespace {

void criterion_line(int n, const char* desc, bool ok) {
    std::printf("[criterion %2d] %s - %s\n", n, ok ? "PASS" : "FAIL", desc);
    std::fflush(stdout);
}

double cosine(const std::vector<float>& a, const std::vector<float>& b) {
    double d = 0, na = 0, nb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        d += double(a[i]) * b[i];
        na += double(a[i]) * a[i];
        nb += double(b[i]) * b[i];
    }
    return d / std::sqrt(na * nb + 1e-30);
}

// ---------------------------------------------------------------------------
// Desk-scale pipeline fixture shared by criteria 8, 9, 10.
RunConfig acceptance_config() {
    RunConfig cfg;
    cfg.seed = 2024;
    cfg.segment_s = 1.5;
    cfg.n_max = 14;
    cfg.d_fx = 16;
    cfg.c_dim = 32;
    cfg.mel_bands = 48;
    cfg.fxenc_width = 64;
    cfg.threads = 2;
    cfg.songs_train = 40;
    cfg.songs_heldout = 8;
    cfg.songs_bench = 40;
    cfg.tracks_min = 2;
    cfg.tracks_max = 4;
    cfg.fxenc_chains = 256;
    cfg.fxenc_sources = 12;
    cfg.fxenc_segment_s = 0.75;
    cfg.fxenc_steps = 1600;
    cfg.fxenc_batch = 16;
    cfg.fxenc_lr = 1e-3;
    cfg.fxenc_temp = 0.1;
    cfg.adaptor_hidden = 96;
    cfg.adaptor_epochs = 150;
    cfg.score_width = 96;
    cfg.score_blocks = 3;
    cfg.score_heads = 4;
    cfg.score_steps = 2500;
    cfg.score_batch = 8;
    cfg.score_lr = 1e-3;
    cfg.proc_channels = 16;
    cfg.proc_blocks = 8;
    cfg.proc_kernel = 15;
    cfg.proc_steps = 700;
    cfg.proc_crop = 16384;
    cfg.proc_lr = 2e-3;
    cfg.beta_deep = 0.1;
    cfg.sample_steps = 32;
    return cfg;
}

struct PipelineFixture {
    RunConfig cfg;
    std::string root;
    double kad_generative = 0.0;
    double kad_oracle = 0.0;
    double kad_eqloud = 0.0;
    double proc_initial_val = 0.0;
    double proc_final_val = 0.0;

    PipelineFixture() : cfg(acceptance_config()) {
        root = (fs::current_path() / "acceptance_run").string();
        fs::remove_all(root);
        RunDir rd(root);
        set_default_threads(cfg.threads);

        std::printf("[pipeline] gen-data...\n");
        std::fflush(stdout);
        stage_gen_data(cfg, rd);
        std::printf("[pipeline] train-fxenc...\n");
        std::fflush(stdout);
        stage_train_fxenc(cfg, rd);
        std::printf("[pipeline] train-adaptor...\n");
        std::fflush(stdout);
        stage_train_adaptor(cfg, rd);
        std::printf("[pipeline] train-score...\n");
        std::fflush(stdout);
        stage_train_score(cfg, rd);
        std::printf("[pipeline] train-proc...\n");
        std::fflush(stdout);
        stage_train_proc(cfg, rd);

        std::printf("[pipeline] mix (generative)...\n");
        std::fflush(stdout);
        stage_mix(cfg, rd, cfg.seed);
        RunConfig oracle_cfg = cfg;
        oracle_cfg.mix_mode = "oracle";
        std::printf("[pipeline] mix (oracle)...\n");
        std::fflush(stdout);
        stage_mix(oracle_cfg, rd, cfg.seed);
        std::printf("[pipeline] baseline-eqloud...\n");
        std::fflush(stdout);
        stage_baseline_eqloud(cfg, rd);

        RunConfig eval_cfg = cfg;
        eval_cfg.eval_dir_a = "mixes/generative";
        kad_generative = stage_eval_kad(eval_cfg, rd).value;
        eval_cfg.eval_dir_a = "mixes/oracle";
        kad_oracle = stage_eval_kad(eval_cfg, rd).value;
        eval_cfg.eval_dir_a = "mixes/eqloud";
        kad_eqloud = stage_eval_kad(eval_cfg, rd).value;
        std::printf("[pipeline] kad: generative %.4f | oracle %.4f | eqloud %.4f\n",
                    kad_generative, kad_oracle, kad_eqloud);
        std::fflush(stdout);

        // recover the recorded processor validation losses
        std::ifstream mf(RunDir(root).path("metrics.jsonl"));
        std::string line;
        while (std::getline(mf, line)) {
            auto has = [&](const char* k) { return line.find(k) != std::string::npos; };
            auto value_of = [&]() {
                auto pos = line.find("\"value\":");
                return std::stod(line.substr(pos + 8));
            };
            if (has("initial_val_msspec")) proc_initial_val = value_of();
            if (has("final_val_msspec")) proc_final_val = value_of();
        }
    }
};

PipelineFixture& pipeline() {
    static PipelineFixture fixture;
    return fixture;
}

}  // namespace

// ---------------------------------------------------------------------------
TEST_CASE("criterion 1: equivariance and padding independence, bit-exact") {
    Rng rng(1001);
    ScoreNet<float> net(14, 12, 8, 48, 4, 2, rng);
    EdmConfig edm;
    edm.sigma_data = 0.5;
    bool equivariant = true, pad_independent = true;
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 + int(rng.randint(14));
        std::vector<std::vector<float>> z(static_cast<size_t>(n)), c(static_cast<size_t>(n));
        for (auto& r : z) {
            r.resize(12);
            for (auto& v : r) v = rng.normalf();
        }
        for (auto& r : c) {
            r.resize(8);
            for (auto& v : r) v = rng.normalf();
        }
        auto p = pad_and_mask(z, c, 14);
        double tau = std::exp(rng.uniform(-2.0, 2.0));
        DiffusionState st{p.z_set, p.mask, tau};
        auto out = score_forward(net, edm, st, p.cond_set, p.mask, &p.ids);

        // permuted storage, ids travel with their rows
        std::vector<int> perm(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) perm[size_t(i)] = i;
        for (size_t i = perm.size(); i > 1; --i)
            std::swap(perm[i - 1], perm[rng.randint(i)]);
        std::vector<std::vector<float>> z2(static_cast<size_t>(n)), c2(static_cast<size_t>(n));
        std::vector<int> ids2(static_cast<size_t>(14));
        for (int i = 0; i < 14; ++i) ids2[size_t(i)] = i;
        for (int i = 0; i < n; ++i) {
            z2[size_t(i)] = z[size_t(perm[size_t(i)])];
            c2[size_t(i)] = c[size_t(perm[size_t(i)])];
            ids2[size_t(i)] = perm[size_t(i)];
        }
        auto p2 = pad_and_mask(z2, c2, 14);
        DiffusionState st2{p2.z_set, p2.mask, tau};
        auto out2 = score_forward(net, edm, st2, p2.cond_set, p2.mask, &ids2);
        for (int i = 0; i < n && equivariant; ++i)
            for (int j = 0; j < 12; ++j)
                if (out2.at(i, j) != out.at(perm[size_t(i)], j)) {
                    equivariant = false;
                    break;
                }

        // garbage in the padded slots must not change anything
        auto p3 = p;
        for (int i = n; i < 14; ++i) {
            for (int j = 0; j < 12; ++j) p3.z_set.at(i, j) = float(1e3 * rng.normal());
            for (int j = 0; j < 8; ++j) p3.cond_set.at(i, j) = float(1e3 * rng.normal());
        }
        DiffusionState st3{p3.z_set, p3.mask, tau};
        auto out3 = score_forward(net, edm, st3, p3.cond_set, p3.mask, &p3.ids);
        for (int i = 0; i < 14 && pad_independent; ++i)
            for (int j = 0; j < 12; ++j)
                if (out3.at(i, j) != out.at(i, j)) {
                    pad_independent = false;
                    break;
                }
    }
    criterion_line(1, "score_forward equivariance + padding independence (tolerance 0)",
                   equivariant && pad_independent);
    CHECK(equivariant);
    CHECK(pad_independent);
}

TEST_CASE("criterion 2: gradient suite at rel-error < 1e-3") {
    Rng rng(1002);
    double worst = 0.0;
    auto track = [&](const char* name, double err) {
        std::printf("    grad %-18s %.2e\n", name, err);
        worst = std::max(worst, err);
    };

    {  // dense
        Dense<double> layer(7, 5, rng);
        Tensor<double> x({3, 7});
        for (auto& v : x.v) v = rng.normal();
        auto loss = [&]() {
            Dense<double> c = layer;
            auto y = c.forward(x);
            double l = 0;
            for (auto v : y.v) l += std::sin(v) * v;
            return l;
        };
        auto grad = [&]() {
            for (auto* p : layer.params()) p->zero_grad();
            auto y = layer.forward(x);
            Tensor<double> dy = y;
            for (size_t i = 0; i < y.v.size(); ++i)
                dy.v[i] = std::cos(y.v[i]) * y.v[i] + std::sin(y.v[i]);
            layer.backward(dy);
        };
        track("dense", grad_check<double>(layer.params(), loss, grad, 1e-5, rng).max_rel_error);
    }
    {  // layernorm
        LayerNorm<double> ln(9);
        Tensor<double> x({4, 9});
        for (auto& v : x.v) v = 1.5 * rng.normal() + 0.5;
        auto loss = [&]() {
            LayerNorm<double> c = ln;
            auto y = c.forward(x);
            double l = 0;
            for (auto v : y.v) l += v * v * v / 3.0 + v;
            return l;
        };
        auto grad = [&]() {
            for (auto* p : ln.params()) p->zero_grad();
            auto y = ln.forward(x);
            Tensor<double> dy = y;
            for (size_t i = 0; i < y.v.size(); ++i) dy.v[i] = y.v[i] * y.v[i] + 1.0;
            ln.backward(dy);
        };
        track("layernorm", grad_check<double>(ln.params(), loss, grad, 1e-5, rng).max_rel_error);
    }
    {  // masked attention (self + cross through the score block)
        ScoreBlock<double> block(16, 4, rng);
        for (auto& v : block.attn_self.wo.w.v) v = 0.2 * rng.normal();
        for (auto& v : block.attn_cross.wo.w.v) v = 0.2 * rng.normal();
        Tensor<double> x({5, 16}), cond({5, 16});
        for (auto& v : x.v) v = rng.normal();
        for (auto& v : cond.v) v = rng.normal();
        auto loss = [&]() {
            ScoreBlock<double> c = block;
            auto y = c.forward(x, cond);
            double l = 0;
            for (auto v : y.v) l += v * v;
            return l;
        };
        auto grad = [&]() {
            for (auto* p : block.params()) p->zero_grad();
            auto y = block.forward(x, cond);
            Tensor<double> dy = y;
            for (auto& v : dy.v) v *= 2.0;
            block.backward(dy);
        };
        track("attention-block",
              grad_check<double>(block.params(), loss, grad, 1e-5, rng, 250).max_rel_error);
    }
    {  // conv1d + film
        Conv1d<double> conv(3, 4, 7, 4, rng);
        FiLM<double> film(5, 4, rng);
        Tensor<double> x({3, 50}), cond({1, 5});
        for (auto& v : x.v) v = rng.normal();
        for (auto& v : cond.v) v = rng.normal();
        std::vector<Tensor<double>*> params = conv.params();
        for (auto* p : film.params()) params.push_back(p);
        auto loss = [&]() {
            Conv1d<double> c = conv;
            FiLM<double> f = film;
            auto y = f.forward(c.forward(x), cond);
            double l = 0;
            for (auto v : y.v) l += silu(v);
            return l;
        };
        auto grad = [&]() {
            for (auto* p : params) p->zero_grad();
            auto y = film.forward(conv.forward(x), cond);
            Tensor<double> dy = y;
            for (size_t i = 0; i < y.v.size(); ++i) dy.v[i] = silu_grad(y.v[i]);
            auto [dx, dc] = film.backward(dy);
            conv.backward(dx);
        };
        track("conv1d+film",
              grad_check<double>(params, loss, grad, 1e-5, rng, 250).max_rel_error);
    }
    {  // effect encoder net
        EffectEncoderNet<double> net(5, 8, 10, rng);
        Tensor<double> x({16, 24});
        for (auto& v : x.v) v = rng.normal();
        std::vector<double> tgt(5);
        for (auto& v : tgt) v = rng.normal();
        auto loss = [&]() {
            EffectEncoderNet<double> c = net;
            auto e = c.forward(x);
            double l = 0;
            for (int i = 0; i < 5; ++i) l += (e[size_t(i)] - tgt[size_t(i)]) * (e[size_t(i)] - tgt[size_t(i)]);
            return l;
        };
        auto grad = [&]() {
            for (auto* p : net.params()) p->zero_grad();
            auto e = net.forward(x);
            std::vector<double> de(5);
            for (int i = 0; i < 5; ++i) de[size_t(i)] = 2.0 * (e[size_t(i)] - tgt[size_t(i)]);
            net.backward(de);
        };
        track("effect-encoder",
              grad_check<double>(net.params(), loss, grad, 1e-5, rng, 250).max_rel_error);
    }
    {  // score network end to end
        ScoreNet<double> net(4, 5, 3, 16, 2, 2, rng);
        for (auto& v : net.out_proj.w.v) v = 0.1 * rng.normal();
        Tensor<double> z({3, 5}), c({3, 3});
        for (auto& v : z.v) v = rng.normal();
        for (auto& v : c.v) v = rng.normal();
        std::vector<int> ids = {0, 2, 3};
        auto loss = [&]() {
            ScoreNet<double> copy = net;
            auto f = copy.forward_gathered(z, c, ids, -0.4);
            double l = 0;
            for (auto v : f.v) l += v * v;
            return l;
        };
        auto grad = [&]() {
            for (auto* p : net.params()) p->zero_grad();
            auto f = net.forward_gathered(z, c, ids, -0.4);
            Tensor<double> df = f;
            for (auto& v : df.v) v *= 2.0;
            net.backward_gathered(df);
        };
        track("score-net",
              grad_check<double>(net.params(), loss, grad, 1e-5, rng, 250).max_rel_error);
    }
    {  // tcn
        Tcn<double> tcn(5, 5, 3, 6, rng);
        Tensor<double> x({1, 48}), cond({1, 6});
        for (auto& v : x.v) v = rng.normal();
        for (auto& v : cond.v) v = rng.normal();
        auto loss = [&]() {
            Tcn<double> c = tcn;
            auto y = c.forward(x, cond);
            double l = 0;
            for (auto v : y.v) l += v * v;
            return l;
        };
        auto grad = [&]() {
            for (auto* p : tcn.params()) p->zero_grad();
            auto y = tcn.forward(x, cond);
            Tensor<double> dy = y;
            for (auto& v : dy.v) v *= 2.0;
            tcn.backward(dy);
        };
        track("tcn", grad_check<double>(tcn.params(), loss, grad, 1e-5, rng, 250).max_rel_error);
    }
    {  // adaptor-shaped MLP
        Dense<double> l1(10, 16, rng), l2(16, 10, rng);
        Silu<double> act;
        Tensor<double> x({2, 10});
        for (auto& v : x.v) v = rng.normal();
        std::vector<Tensor<double>*> params = l1.params();
        for (auto* p : l2.params()) params.push_back(p);
        auto loss = [&]() {
            Dense<double> a = l1, b = l2;
            Silu<double> s;
            auto y = b.forward(s.forward(a.forward(x)));
            double l = 0;
            for (auto v : y.v) l += v * v;
            return l;
        };
        auto grad = [&]() {
            for (auto* p : params) p->zero_grad();
            auto y = l2.forward(act.forward(l1.forward(x)));
            Tensor<double> dy = y;
            for (auto& v : dy.v) v *= 2.0;
            l1.backward(act.backward(l2.backward(dy)));
        };
        track("adaptor-mlp", grad_check<double>(params, loss, grad, 1e-5, rng).max_rel_error);
    }
    {  // msspec loss w.r.t. audio
        Tensor<double> audio({2, 1024});
        for (auto& v : audio.v) v = 0.3 * rng.normal();
        std::vector<std::vector<double>> target(2, std::vector<double>(1024));
        for (auto& ch : target)
            for (auto& v : ch) v = 0.3 * rng.normal();
        auto unpack = [&]() {
            std::vector<std::vector<double>> ch(2, std::vector<double>(1024));
            for (int c = 0; c < 2; ++c)
                for (int i = 0; i < 1024; ++i) ch[size_t(c)][size_t(i)] = audio.at(c, i);
            return ch;
        };
        auto loss = [&]() { return msspec_loss_t<double>(unpack(), target, nullptr); };
        auto grad = [&]() {
            audio.zero_grad();
            std::vector<std::vector<double>> g;
            msspec_loss_t<double>(unpack(), target, &g);
            for (int c = 0; c < 2; ++c)
                for (int i = 0; i < 1024; ++i) audio.gat(c, i) = g[size_t(c)][size_t(i)];
        };
        track("msspec-loss", grad_check<double>({&audio}, loss, grad, 1e-5, rng, 150).max_rel_error);
    }
    {  // deep feature loss w.r.t. audio
        MelFrontend<double> fe;
        fe.mel.fft_size = 256;
        fe.mel.hop = 128;
        fe.mel.n_mels = 12;
        fe.mel.build();
        EffectEncoderNet<double> net(4, 12, 8, rng);
        Tensor<double> audio({2, 768});
        for (auto& v : audio.v) v = 0.25 * rng.normal();
        std::vector<double> tgt(4);
        double nn = 0;
        for (auto& v : tgt) {
            v = rng.normal();
            nn += v * v;
        }
        for (auto& v : tgt) v /= std::sqrt(nn);
        auto run = [&](MelFrontend<double>::Cache* cache, EffectEncoderNet<double>& n2) {
            std::vector<double> mid(768), side(768);
            for (int i = 0; i < 768; ++i) {
                mid[size_t(i)] = 0.5 * (audio.at(0, i) + audio.at(1, i));
                side[size_t(i)] = 0.5 * (audio.at(0, i) - audio.at(1, i));
            }
            return n2.forward(fe.forward(mid, side, cache));
        };
        auto loss = [&]() {
            EffectEncoderNet<double> c = net;
            auto e = run(nullptr, c);
            double dot = 0;
            for (size_t i = 0; i < e.size(); ++i) dot += e[i] * tgt[i];
            return 1.0 - dot;
        };
        auto grad = [&]() {
            audio.zero_grad();
            MelFrontend<double>::Cache cache;
            auto e = run(&cache, net);
            std::vector<double> de(e.size());
            for (size_t i = 0; i < e.size(); ++i) de[i] = -tgt[i];
            auto df = net.backward(de);
            auto [dm, ds] = fe.backward(df, cache);
            for (int i = 0; i < 768; ++i) {
                audio.gat(0, i) = 0.5 * (dm[size_t(i)] + ds[size_t(i)]);
                audio.gat(1, i) = 0.5 * (dm[size_t(i)] - ds[size_t(i)]);
            }
        };
        track("deep-feature-loss",
              grad_check<double>({&audio}, loss, grad, 1e-5, rng, 150).max_rel_error);
    }

    bool ok = worst < 1e-3;
    criterion_line(2, "every layer and both losses pass finite-difference checks", ok);
    CHECK(worst < 1e-3);
}

TEST_CASE("criterion 3: sampler correctness with the analytic Gaussian oracle") {
    const int d = 4;
    const double sd = 1.0;
    std::vector<double> mu = {1.0, -0.5, 0.25, 0.8};
    auto denoiser = [&](const Tensor<float>& zs, const std::vector<char>& mask,
                        double sigma) {
        Tensor<float> out({zs.rows(), zs.cols()});
        double s2 = sigma * sigma;
        for (int i = 0; i < zs.rows(); ++i) {
            if (!mask[size_t(i)]) continue;
            for (int j = 0; j < zs.cols(); ++j)
                out.at(i, j) = float((sd * sd * double(zs.at(i, j)) + s2 * mu[size_t(j)]) /
                                     (sd * sd + s2));
        }
        return out;
    };
    NoiseSchedule sched;
    sched.sigma_max = 80.0 * sd;
    sched.steps = 32;

    std::vector<char> mask4 = {1, 1, 1, 1};
    Rng rng(1003);
    const int draws = 2500;  // 4 rows per draw -> 10000 samples
    std::vector<double> acc(size_t(d), 0.0), acc2(size_t(d), 0.0);
    for (int t = 0; t < draws; ++t) {
        auto out = sample_set(denoiser, mask4, d, sched, rng);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < d; ++j) {
                acc[size_t(j)] += out.at(i, j);
                acc2[size_t(j)] += double(out.at(i, j)) * out.at(i, j);
            }
    }
    bool mean_ok = true, var_ok = true;
    for (int j = 0; j < d; ++j) {
        double mean = acc[size_t(j)] / (4 * draws);
        double var = acc2[size_t(j)] / (4 * draws) - mean * mean;
        if (std::fabs(mean - mu[size_t(j)]) >= 0.05 * sd) mean_ok = false;
        if (std::fabs(var - sd * sd) >= 0.10 * sd * sd) var_ok = false;
    }

    // monotone error decrease over the step sweep, same starts
    std::vector<char> mask1 = {1};
    const int reps = 200;
    std::vector<Tensor<float>> inits;
    for (int r = 0; r < reps; ++r) {
        Tensor<float> e({1, d});
        for (auto& v : e.v) v = rng.normalf();
        inits.push_back(e);
    }
    bool monotone = true;
    double prev = 1e30;
    for (int steps : {4, 8, 16, 32, 64}) {
        NoiseSchedule s2 = sched;
        s2.steps = steps;
        double err = 0.0;
        for (int r = 0; r < reps; ++r) {
            Rng tmp(0);
            auto out = sample_set(denoiser, mask1, d, s2, tmp, &inits[size_t(r)]);
            double shrink = sd / std::sqrt(sd * sd + s2.sigma_max * s2.sigma_max);
            for (int j = 0; j < d; ++j) {
                double x_t = s2.sigma_max * double(inits[size_t(r)].v[size_t(j)]);
                double exact = mu[size_t(j)] + (x_t - mu[size_t(j)]) * shrink;
                err += std::fabs(double(out.at(0, j)) - exact);
            }
        }
        if (err >= prev) monotone = false;
        prev = err;
    }
    criterion_line(3, "Heun sampler: mean within 0.05 sd, var within 10%, monotone in steps",
                   mean_ok && var_ok && monotone);
    CHECK(mean_ok);
    CHECK(var_ok);
    CHECK(monotone);
}

TEST_CASE("criterion 4: conditional multimodality beats the regression predictor") {
    Rng rng(1004);
    const int D = 4, C = 3, n_max = 2;
    std::vector<std::vector<float>> conds = {{1.0f, 0.2f, -0.5f}, {-0.8f, 0.6f, 0.3f}};
    std::vector<std::vector<float>> modes = {{1.5f, -1.0f, 0.8f, -0.6f},
                                             {-0.7f, 1.2f, -1.1f, 0.9f}};
    auto draw_target = [&](int cond_idx, Rng& r) {
        std::vector<float> z(static_cast<size_t>(D));
        float sign = r.uniform() < 0.5 ? 1.0f : -1.0f;
        for (int j = 0; j < D; ++j)
            z[size_t(j)] = sign * modes[size_t(cond_idx)][size_t(j)] + 0.05f * r.normalf();
        return z;
    };
    std::vector<SetSample> train;
    for (int i = 0; i < 512; ++i) {
        SetSample s;
        int ci = i % 2;
        s.z.push_back(draw_target(ci, rng));
        s.c.push_back(conds[size_t(ci)]);
        train.push_back(s);
    }
    ScoreNet<float> net(n_max, D, C, 48, 4, 2, rng);
    EdmConfig edm;
    ScoreTrainConfig tc;
    tc.steps = 2200;
    tc.batch = 8;
    tc.lr = 2e-3;
    tc.seed = 5;
    train_score(net, edm, train, {}, tc);

    NoiseSchedule sched;
    sched.sigma_max = 80.0 * edm.sigma_data;
    sched.steps = 32;
    std::vector<char> mask = {1, 0};

    bool freq_ok = true;
    EmbeddingSet diffusion_set, regression_set, truth_set;
    Rng sample_rng(77);
    Rng truth_rng(78);
    for (int ci = 0; ci < 2; ++ci) {
        std::vector<std::vector<float>> cond_rows = {conds[size_t(ci)]};
        std::vector<std::vector<float>> dummy_z = {std::vector<float>(static_cast<size_t>(D), 0.0f)};
        PaddedSet p = pad_and_mask(dummy_z, cond_rows, n_max);
        int hits = 0;
        const int n_draws = 500;
        for (int t = 0; t < n_draws; ++t) {
            auto out = sample_set(net, edm, p.cond_set, p.mask, sched, sample_rng, &p.ids);
            std::vector<float> row(static_cast<size_t>(D));
            double dot = 0.0;
            for (int j = 0; j < D; ++j) {
                row[size_t(j)] = out.at(0, j);
                dot += double(out.at(0, j)) * modes[size_t(ci)][size_t(j)];
            }
            if (dot > 0) ++hits;
            diffusion_set.rows.push_back(row);
            truth_set.rows.push_back(draw_target(ci, truth_rng));
            regression_set.rows.push_back(std::vector<float>(static_cast<size_t>(D), 0.0f));
        }
        double freq = double(hits) / n_draws;
        std::printf("    condition %d: mode frequency %.3f\n", ci, freq);
        if (freq < 0.4 || freq > 0.6) freq_ok = false;
    }
    // the exact L2-optimal point prediction is the conditional mean (~0);
    // tiny jitter keeps the kernel bandwidth well-defined
    Rng jitter(79);
    for (auto& r : regression_set.rows)
        for (auto& v : r) v += 1e-3f * jitter.normalf();

    double kad_diff = kad(diffusion_set, truth_set);
    double kad_reg = kad(regression_set, truth_set);
    std::printf("    kad diffusion %.4f vs regression %.4f\n", kad_diff, kad_reg);
    bool mmd_ok = kad_diff < kad_reg;
    criterion_line(4, "two-mode toy: frequencies 0.5 +/- 0.1 and lower MMD than regression",
                   freq_ok && mmd_ok);
    CHECK(freq_ok);
    CHECK(mmd_ok);
}

TEST_CASE("criterion 5: fourier codec roundtrip and decoded-gain accuracy") {
    FeatureStats stats;
    stats.mean = {-24.0, -24.0, 11.0, 2.0, 0.25, 0.0};
    stats.std = {6.0, 6.0, 4.0, 1.5, 0.15, 0.3};
    auto codec = build_codec(16, 1.0, stats, 1005);
    Rng rng(1005);
    double worst_rt = 0.0;
    for (int t = 0; t < 1000; ++t) {
        std::array<double, 6> f{};
        for (auto& x : f) x = rng.uniform(-4.0, 4.0);
        auto back = fourier_invert(fourier_expand(f, codec), codec);
        for (int j = 0; j < 6; ++j)
            worst_rt = std::max(worst_rt, std::fabs(back[size_t(j)] - f[size_t(j)]));
    }
    bool roundtrip_ok = worst_rt < 1e-6;

    ChainRanges ranges;
    bool gain_ok = true;
    for (int trial = 0; trial < 10; ++trial) {
        auto dry = synth_dry_track(TrackKind(trial % kNumTrackKinds), 3000 + uint64_t(trial), 66150);
        auto wet = apply_effect_chain(dry, sample_effect_chain(rng.next_u64(), ranges),
                                      rng.next_u64());
        auto raw = extract_raw_features(wet);
        std::vector<float> fx(16);
        for (auto& v : fx) v = rng.normalf();
        auto z = augment_embedding(fx, standardize(raw, stats), codec);
        auto y_norm = rms_normalize(wet, 0.05).audio;
        auto out = apply_gain_from_embedding(y_norm, z, codec);
        const int win = int(std::lround(kFeatWindowMs * 1e-3 * wet.sample_rate));
        const int hop = int(std::lround(kFeatHopMs * 1e-3 * wet.sample_rate));
        for (int c = 0; c < 2; ++c) {
            double got = lin_to_db(max_window_rms(out.ch[size_t(c)], win, hop));
            double want = lin_to_db(max_window_rms(wet.ch[size_t(c)], win, hop));
            if (std::fabs(got - want) >= 0.1) gain_ok = false;
        }
    }
    criterion_line(5, "codec roundtrip < 1e-6; decoded gain within 0.1 dB", roundtrip_ok && gain_ok);
    CHECK(roundtrip_ok);
    CHECK(gain_ok);
}

TEST_CASE("criterion 6: domain adaptation beats identity for 3 seeds") {
    ContentEncoder enc(32, 1006);
    ChainRanges ranges;
    Rng rng(1006);
    std::vector<std::pair<AudioBuffer, AudioBuffer>> pairs;
    for (int i = 0; i < 240; ++i) {
        auto x = synth_dry_track(TrackKind(i % kNumTrackKinds), 4000 + uint64_t(i), 33075);
        auto w = apply_effect_chain(x, sample_effect_chain(rng.next_u64(), ranges),
                                    rng.next_u64());
        pairs.push_back({std::move(x), std::move(w)});
    }
    bool all_ok = true;
    for (uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        Adaptor adaptor(32, 96, seed);
        AdaptorTrainConfig tc;
        tc.epochs = 150;
        tc.lr = 1e-3;
        tc.seed = seed;
        auto report = train_adaptor(adaptor, enc, pairs, tc);
        bool l2_ok = report.holdout_l2_adapted <= 0.7 * report.holdout_l2_identity;

        // set-level MMD on the held-out pairs
        size_t n_hold = size_t(240 * 0.2);
        EmbeddingSet dry_set, wet_set, adapted_set;
        for (size_t i = pairs.size() - n_hold; i < pairs.size(); ++i) {
            auto cd = enc.encode(pairs[i].first);
            auto cw = enc.encode(mono_downmix(pairs[i].second));
            dry_set.rows.push_back(cd);
            wet_set.rows.push_back(cw);
            adapted_set.rows.push_back(adaptor.apply(cw));
        }
        double mmd_raw = kad(wet_set, dry_set);
        double mmd_adapted = kad(adapted_set, dry_set);
        bool mmd_ok = mmd_adapted < mmd_raw;
        std::printf("    seed %llu: L2 %.4f -> %.4f | MMD %.4f -> %.4f\n",
                    (unsigned long long)seed, report.holdout_l2_identity,
                    report.holdout_l2_adapted, mmd_raw, mmd_adapted);
        if (!(l2_ok && mmd_ok)) all_ok = false;
    }
    criterion_line(6, "adaptor: >= 30% L2 reduction and lower set MMD, 3 seeds", all_ok);
    CHECK(all_ok);
}

TEST_CASE("criterion 7: kad oracle equivalence and null concentration") {
    Rng rng(1007);
    bool oracle_ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        int m = 2 + int(rng.randint(30));
        int n = 2 + int(rng.randint(30));
        int dim = 1 + int(rng.randint(10));
        EmbeddingSet a, b;
        a.rows.assign(size_t(m), std::vector<float>(size_t(dim)));
        b.rows.assign(size_t(n), std::vector<float>(size_t(dim)));
        double shift = rng.uniform(-1.0, 1.0);
        for (auto& r : a.rows)
            for (auto& v : r) v = rng.normalf();
        for (auto& r : b.rows)
            for (auto& v : r) v = float(shift + rng.normal());
        if (std::fabs(kad(a, b) - mmd_bruteforce(a, b)) >= 1e-9) oracle_ok = false;
    }

    int hits = 0;
    for (uint64_t t = 0; t < 100; ++t) {
        Rng r2(50000 + t);
        EmbeddingSet h1, h2, shifted;
        h1.rows.assign(100, std::vector<float>(6));
        h2.rows.assign(100, std::vector<float>(6));
        shifted.rows.assign(100, std::vector<float>(6));
        for (auto& row : h1.rows)
            for (auto& v : row) v = r2.normalf();
        for (auto& row : h2.rows)
            for (auto& v : row) v = r2.normalf();
        for (auto& row : shifted.rows)
            for (auto& v : row) v = float(1.0 + r2.normal());
        if (std::fabs(kad(h1, h2)) < kad(h1, shifted)) ++hits;
    }
    bool null_ok = hits >= 95;
    std::printf("    null concentration: %d/100 trials\n", hits);
    criterion_line(7, "kad == brute force to 1e-9; null splits concentrate", oracle_ok && null_ok);
    CHECK(oracle_ok);
    CHECK(null_ok);
}

TEST_CASE("criterion 8: generative mixes beat equal loudness on the benchmark") {
    auto& p = pipeline();
    bool ok = p.kad_generative < p.kad_eqloud;
    std::printf("    kad(generative, ref) = %.4f < kad(eqloud, ref) = %.4f ?\n",
                p.kad_generative, p.kad_eqloud);
    criterion_line(8, "kad(MEGAMI-style mixes, refs) < kad(equal loudness, refs)", ok);
    CHECK(ok);
}

TEST_CASE("criterion 9: oracle embeddings do at least as well as sampling") {
    auto& p = pipeline();
    bool ok = p.kad_oracle <= p.kad_generative;
    std::printf("    kad(oracle, ref) = %.4f <= kad(generative, ref) = %.4f ?\n",
                p.kad_oracle, p.kad_generative);
    criterion_line(9, "oracle-embedding kad <= generative kad", ok);
    CHECK(ok);
}

TEST_CASE("criterion 10: mix determinism and config-hash traceability") {
    auto& p = pipeline();
    RunDir rd(p.root);
    Models models = load_models(p.cfg, rd);

    int n_tracks = count_tracks(rd, "bench", 0);
    auto paths = song_paths(rd, "bench", 0, n_tracks);
    TrackSet dry;
    dry.valid_count = n_tracks;
    for (int t = 0; t < n_tracks; ++t) dry.tracks.push_back(read_wav(paths.dry[size_t(t)]));

    set_default_threads(1);
    MixOptions opts;
    opts.seed = 424242;
    auto r1 = mix_song(models, p.cfg, dry, opts);
    auto r2 = mix_song(models, p.cfg, dry, opts);
    set_default_threads(p.cfg.threads);
    bool deterministic = r1.mix.ch[0] == r2.mix.ch[0] && r1.mix.ch[1] == r2.mix.ch[1];
    for (int t = 0; t < n_tracks && deterministic; ++t)
        deterministic = r1.stems.tracks[size_t(t)].ch[0] == r2.stems.tracks[size_t(t)].ch[0];

    // hash recorded in the lock file and in every checkpoint
    auto expected = config_hash(p.cfg);
    bool hash_ok = true;
    {
        std::ifstream f(rd.path("config.lock"));
        std::string l1, l2;
        std::getline(f, l1);
        std::getline(f, l2);
        if (l2.find(hex(expected)) == std::string::npos) hash_ok = false;
    }
    for (const char* name : {"models/fxenc.mgck", "models/adaptor.mgck",
                             "models/score.mgck", "models/proc.mgck"}) {
        auto ckpt = load_checkpoint(rd.path(name));
        if (ckpt.config_hash != expected) hash_ok = false;
    }
    criterion_line(10, "mix is bit-reproducible single-threaded; hash in every artifact",
                   deterministic && hash_ok);
    CHECK(deterministic);
    CHECK(hash_ok);
}

// ---------------------------------------------------------------------------
// Pipeline-dependent properties beyond the numbered criteria.

TEST_CASE("pipeline extras: seed variation, set-level equivariance, encoder quality") {
    auto& p = pipeline();
    RunDir rd(p.root);
    Models models = load_models(p.cfg, rd);

    int n_tracks = count_tracks(rd, "bench", 1);
    auto paths = song_paths(rd, "bench", 1, n_tracks);
    TrackSet dry;
    dry.valid_count = n_tracks;
    for (int t = 0; t < n_tracks; ++t) dry.tracks.push_back(read_wav(paths.dry[size_t(t)]));

    SUBCASE("different seeds give different valid mixes") {
        MixOptions o1, o2;
        o1.seed = 111;
        o2.seed = 222;
        auto r1 = mix_song(models, p.cfg, dry, o1);
        auto r2 = mix_song(models, p.cfg, dry, o2);
        double d = msspec_loss(r1.mix, r2.mix);
        std::printf("    seed-to-seed msspec distance: %.4f\n", d);
        CHECK(d > 0.01);
        for (const auto& row : r1.embeddings.rows) {
            auto z = EffectEmbedding::from_flat(row, p.cfg.d_fx);
            auto dec = split_embedding(z, models.proc.codec);
            CHECK(std::isfinite(dec.features.log_rms_l));
            CHECK(dec.features.log_rms_l >= -81.0);
        }
        // stems sum exactly to the mix
        auto resum = sum_mix(r1.stems);
        CHECK(resum.ch[0] == r1.mix.ch[0]);
    }

    SUBCASE("permuting tracks with noise and ids permutes stems, mix unchanged") {
        const int n = dry.valid_count;
        Rng noise_rng(5151);
        Tensor<float> init({p.cfg.n_max, models.score.d});
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < models.score.d; ++j) init.at(i, j) = noise_rng.normalf();
        std::vector<int> ids(static_cast<size_t>(p.cfg.n_max));
        for (int i = 0; i < p.cfg.n_max; ++i) ids[size_t(i)] = i;

        MixOptions base;
        base.seed = 999;
        base.ids = &ids;
        base.init_noise = &init;
        auto r1 = mix_song(models, p.cfg, dry, base);

        std::vector<int> perm(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) perm[size_t(i)] = (i + 1) % n;  // rotate
        TrackSet dry2;
        dry2.valid_count = n;
        Tensor<float> init2({p.cfg.n_max, models.score.d});
        std::vector<int> ids2 = ids;
        for (int i = 0; i < n; ++i) {
            dry2.tracks.push_back(dry.tracks[size_t(perm[size_t(i)])]);
            ids2[size_t(i)] = perm[size_t(i)];
            for (int j = 0; j < models.score.d; ++j)
                init2.at(i, j) = init.at(perm[size_t(i)], j);
        }
        MixOptions opts2;
        opts2.seed = 999;
        opts2.ids = &ids2;
        opts2.init_noise = &init2;
        auto r2 = mix_song(models, p.cfg, dry2, opts2);

        bool stems_permuted = true;
        for (int i = 0; i < n && stems_permuted; ++i)
            stems_permuted = r2.stems.tracks[size_t(i)].ch[0] ==
                             r1.stems.tracks[size_t(perm[size_t(i)])].ch[0];
        CHECK(stems_permuted);
        CHECK(r2.mix.ch[0] == r1.mix.ch[0]);
        CHECK(r2.mix.ch[1] == r1.mix.ch[1]);
    }

    SUBCASE("trained effect encoder separates held-out chains (triplets)") {
        ChainRanges ranges = p.cfg.chains;
        Rng rng(6161);
        std::vector<AudioBuffer> sources;
        for (int m = 0; m < 8; ++m) {
            auto t = synth_dry_track(TrackKind(m % kNumTrackKinds), 7000 + uint64_t(m),
                                     int64_t(p.cfg.fxenc_segment_s * p.cfg.sample_rate));
            sources.push_back(rms_normalize(t, p.cfg.rms_target).audio);
        }
        std::vector<std::vector<std::vector<float>>> embs;
        for (int k = 0; k < 40; ++k) {
            auto chain = sample_effect_chain(rng.next_u64(), ranges);
            std::vector<std::vector<float>> row;
            for (int m = 0; m < 8; ++m)
                row.push_back(models.fx.encode(apply_effect_chain(sources[size_t(m)], chain,
                                                                  rng.next_u64())));
            embs.push_back(std::move(row));
        }
        int wins = 0;
        double intra = 0.0, inter = 0.0;
        int n_intra = 0, n_inter = 0;
        Rng trip_rng(626);
        for (int t = 0; t < 500; ++t) {
            size_t k = trip_rng.randint(embs.size());
            size_t k2 = (k + 1 + trip_rng.randint(embs.size() - 1)) % embs.size();
            size_t sa = trip_rng.randint(8);
            size_t sb = (sa + 1 + trip_rng.randint(7)) % 8;
            double pos = cosine(embs[k][sa], embs[k][sb]);
            double neg = cosine(embs[k][sa], embs[k2][sa]);
            if (pos > neg) ++wins;
            intra += 1.0 - pos;
            ++n_intra;
            inter += 1.0 - neg;
            ++n_inter;
        }
        double acc = wins / 500.0;
        std::printf("    fxenc heldout triplet accuracy: %.3f (intra %.3f inter %.3f)\n",
                    acc, intra / n_intra, inter / n_inter);
        CHECK(acc >= 0.8);
        CHECK(intra / n_intra < inter / n_inter);
    }

    SUBCASE("processor validation improved during training") {
        std::printf("    val msspec: untrained %.4f -> trained %.4f\n",
                    p.proc_initial_val, p.proc_final_val);
        CHECK(p.proc_final_val < 0.6 * p.proc_initial_val);
    }

    SUBCASE("deep feature loss decreases along an interpolation toward the target") {
        auto y = read_wav(paths.wet[0]);
        auto other = read_wav(song_paths(rd, "bench", 2, 1).wet[0]);
        std::vector<double> losses;
        for (int t = 0; t <= 10; ++t) {
            double alpha = double(t) / 10.0;
            AudioBuffer interp(2, y.frames(), y.sample_rate);
            for (int c = 0; c < 2; ++c)
                for (int64_t i = 0; i < y.frames(); ++i)
                    interp.ch[size_t(c)][size_t(i)] =
                        float((1.0 - alpha) * other.ch[size_t(c)][size_t(i)] +
                              alpha * y.ch[size_t(c)][size_t(i)]);
            losses.push_back(deep_feature_loss(models.fx, interp, y));
        }
        // Spearman rank correlation between step index and loss
        std::vector<size_t> order(losses.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(),
                  [&](size_t a, size_t b) { return losses[a] > losses[b]; });
        double rho = 0.0;
        {
            double n = double(losses.size());
            double sum_d2 = 0.0;
            for (size_t rank = 0; rank < order.size(); ++rank) {
                double d = double(rank) - double(order[rank]);
                sum_d2 += d * d;
            }
            rho = 1.0 - 6.0 * sum_d2 / (n * (n * n - 1.0));
        }
        std::printf("    interpolation monotonicity rho = %.3f (loss %.4f -> %.4f)\n", rho,
                    losses.front(), losses.back());
        CHECK(rho > 0.8);
        CHECK(losses.back() == doctest::Approx(0.0).epsilon(1e-6));
    }

    SUBCASE("style control: swapped z moves decoded dynamics the right way") {
        REQUIRE(dry.valid_count >= 2);
        // two very different styles on the same input track
        FeatureStats stats = models.proc.codec.stats;
        auto make_style = [&](double rms_db, double width) {
            DynStereoFeatures f;
            f.log_rms_l = rms_db;
            f.log_rms_r = rms_db;
            f.crest_db = 11.0;
            f.dyn_spread_db = 2.0;
            f.stereo_width = width;
            f.stereo_imbalance = 0.0;
            Rng zr(99);
            std::vector<float> fx(static_cast<size_t>(p.cfg.d_fx));
            for (auto& v : fx) v = zr.normalf() * 0.25f;
            return augment_embedding(fx, standardize(f, stats), models.proc.codec);
        };
        auto z_quiet = make_style(-30.0, 0.05);
        auto z_loud = make_style(-14.0, 0.4);
        auto c = models.content.encode(mono_downmix(dry.tracks[0]));
        auto y_quiet = process_track(models.proc, dry.tracks[0], z_quiet, c);
        auto y_loud = process_track(models.proc, dry.tracks[0], z_loud, c);
        auto f_quiet = extract_raw_features(y_quiet);
        auto f_loud = extract_raw_features(y_loud);
        std::printf("    swapped z: rms %.1f vs %.1f dB, width %.3f vs %.3f\n",
                    f_quiet.log_rms_l, f_loud.log_rms_l, f_quiet.stereo_width,
                    f_loud.stereo_width);
        CHECK(f_loud.log_rms_l > f_quiet.log_rms_l + 10.0);  // gain follows z
        CHECK(f_loud.log_rms_r > f_quiet.log_rms_r + 10.0);
    }
}
