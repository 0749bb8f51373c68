#include "doctest.h"
#include "mixgen/diffusion.hpp"

#include <cmath>

using namespace mixgen;

namespace {

std::vector<std::vector<float>> random_rows(int n, int d, Rng& rng, double s = 1.0) {
    std::vector<std::vector<float>> out(static_cast<size_t>(n), std::vector<float>(static_cast<size_t>(d)));
    for (auto& row : out)
        for (auto& v : row) v = float(s * rng.normal());
    return out;
}

ScoreNet<float> small_net(Rng& rng, int n_max = 14, int d = 8, int c = 6) {
    return ScoreNet<float>(n_max, d, c, 32, 4, 2, rng);
}

}  // namespace

TEST_SUITE_BEGIN("diffusion");

TEST_CASE("pad_and_mask: counts, boundary, guards") {
    Rng rng(1);
    auto z = random_rows(3, 8, rng);
    auto c = random_rows(3, 6, rng);
    auto p = pad_and_mask(z, c, 14);
    int n_valid = 0;
    for (char m : p.mask) n_valid += m;
    CHECK(n_valid == 3);
    CHECK(p.z_set.rows() == 14);
    for (int j = 0; j < 8; ++j) CHECK(p.z_set.at(5, j) == 0.0f);  // padding zeroed
    CHECK(p.ids[2] == 2);

    auto zf = random_rows(14, 8, rng);
    auto cf = random_rows(14, 6, rng);
    auto pf = pad_and_mask(zf, cf, 14);
    for (char m : pf.mask) CHECK(m == 1);

    CHECK_THROWS((void)pad_and_mask({}, {}, 14));
    auto z15 = random_rows(15, 8, rng);
    auto c15 = random_rows(15, 6, rng);
    CHECK_THROWS((void)pad_and_mask(z15, c15, 14));
}

TEST_CASE("noise_set: tau 0 identity, mask contract, variance, guard") {
    Rng rng(2);
    Tensor<float> z({4, 6});
    for (auto& v : z.v) v = rng.normalf();
    std::vector<char> mask = {1, 1, 0, 1};
    for (int j = 0; j < 6; ++j) z.at(2, j) = 0.0f;

    auto s0 = noise_set(z, mask, 0.0, rng);
    for (size_t i = 0; i < z.v.size(); ++i) CHECK(s0.z_set.v[i] == z.v[i]);

    auto s1 = noise_set(z, mask, 5.0, rng);
    for (int j = 0; j < 6; ++j) CHECK(s1.z_set.at(2, j) == 0.0f);

    // per-coordinate variance at tau=2 over many draws
    Tensor<float> zz({1, 4});
    std::vector<char> m1 = {1};
    const int n = 10000;
    std::vector<double> acc(4, 0.0), acc2(4, 0.0);
    for (int i = 0; i < n; ++i) {
        auto st = noise_set(zz, m1, 2.0, rng);
        for (int j = 0; j < 4; ++j) {
            acc[size_t(j)] += st.z_set.at(0, j);
            acc2[size_t(j)] += double(st.z_set.at(0, j)) * st.z_set.at(0, j);
        }
    }
    for (int j = 0; j < 4; ++j) {
        double mean = acc[size_t(j)] / n;
        double var = acc2[size_t(j)] / n - mean * mean;
        CHECK(var == doctest::Approx(4.0).epsilon(0.10));
    }

    CHECK_THROWS((void)noise_set(z, mask, -0.1, rng));
}

TEST_CASE("score_forward: permutation equivariance is exact") {
    Rng rng(3);
    auto net = small_net(rng);
    EdmConfig edm;
    edm.sigma_data = 0.5;
    for (int trial = 0; trial < 20; ++trial) {
        int n = 1 + int(rng.randint(14));
        auto z = random_rows(n, 8, rng);
        auto c = random_rows(n, 6, rng);
        auto p = pad_and_mask(z, c, 14);
        DiffusionState st{p.z_set, p.mask, 0.7};
        auto out = score_forward(net, edm, st, p.cond_set, p.mask, &p.ids);

        // permute the valid rows (ids travel with their rows)
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
        DiffusionState st2{p2.z_set, p2.mask, 0.7};
        auto out2 = score_forward(net, edm, st2, p2.cond_set, p2.mask, &ids2);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < 8; ++j)
                CHECK(out2.at(i, j) == out.at(perm[size_t(i)], j));
    }
}

TEST_CASE("score_forward: padded rows cannot influence valid outputs") {
    Rng rng(4);
    auto net = small_net(rng);
    EdmConfig edm;
    for (int trial = 0; trial < 10; ++trial) {
        int n = 1 + int(rng.randint(13));
        auto z = random_rows(n, 8, rng);
        auto c = random_rows(n, 6, rng);
        auto p = pad_and_mask(z, c, 14);
        DiffusionState st{p.z_set, p.mask, 1.3};
        auto out = score_forward(net, edm, st, p.cond_set, p.mask, &p.ids);

        auto p2 = p;
        for (int i = n; i < 14; ++i)
            for (int j = 0; j < 8; ++j) {
                p2.z_set.at(i, j) = float(100.0 * rng.normal());
                if (j < 6) p2.cond_set.at(i, j) = float(100.0 * rng.normal());
            }
        DiffusionState st2{p2.z_set, p2.mask, 1.3};
        auto out2 = score_forward(net, edm, st2, p2.cond_set, p2.mask, &p2.ids);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < 8; ++j) CHECK(out2.at(i, j) == out.at(i, j));
        for (int i = n; i < 14; ++i)
            for (int j = 0; j < 8; ++j) CHECK(out2.at(i, j) == 0.0f);
    }
}

TEST_CASE("score_forward rejects mask mismatch") {
    Rng rng(5);
    auto net = small_net(rng);
    EdmConfig edm;
    auto z = random_rows(3, 8, rng);
    auto c = random_rows(3, 6, rng);
    auto p = pad_and_mask(z, c, 14);
    DiffusionState st{p.z_set, p.mask, 1.0};
    auto bad_mask = p.mask;
    bad_mask[5] = 1;
    CHECK_THROWS_WITH_AS((void)score_forward(net, edm, st, p.cond_set, bad_mask),
                         doctest::Contains("mask mismatch"), std::runtime_error);
}

TEST_CASE("score net end-to-end gradient check (double)") {
    Rng rng(6);
    ScoreNet<double> net(4, 5, 3, 16, 2, 2, rng);
    // zero-init output projection leaves trivial gradients at init; randomize
    for (auto& v : net.out_proj.w.v) v = 0.1 * rng.normal();
    const int n = 3;
    Tensor<double> z({n, 5}), c({n, 3});
    for (auto& v : z.v) v = rng.normal();
    for (auto& v : c.v) v = rng.normal();
    std::vector<int> ids = {0, 1, 2};
    Tensor<double> target({n, 5});
    for (auto& v : target.v) v = rng.normal();

    auto loss_fn = [&]() {
        ScoreNet<double> copy = net;
        auto f = copy.forward_gathered(z, c, ids, 0.3);
        double l = 0.0;
        for (size_t i = 0; i < f.v.size(); ++i)
            l += (f.v[i] - target.v[i]) * (f.v[i] - target.v[i]);
        return l;
    };
    auto grad_fn = [&]() {
        for (auto* p : net.params()) p->zero_grad();
        auto f = net.forward_gathered(z, c, ids, 0.3);
        Tensor<double> df({n, 5});
        for (size_t i = 0; i < f.v.size(); ++i) df.v[i] = 2.0 * (f.v[i] - target.v[i]);
        net.backward_gathered(df);
    };
    auto rep = grad_check<double>(net.params(), loss_fn, grad_fn, 1e-5, rng, 250);
    CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("dsm loss oracles") {
    Rng rng(7);
    Tensor<float> z({3, 4});
    for (auto& v : z.v) v = rng.normalf();
    std::vector<char> mask = {1, 1, 1};
    EdmConfig edm;
    edm.sigma_data = 1.0;

    SUBCASE("perfect denoiser gives zero loss") {
        auto oracle = [&](const Tensor<float>&, const std::vector<char>&, double) { return z; };
        Rng r2(99);
        CHECK(dsm_loss_with(oracle, edm, z, mask, r2) == doctest::Approx(0.0));
    }
    SUBCASE("zero denoiser gives lambda(sigma) * mean row norm") {
        auto zero = [&](const Tensor<float>& zs, const std::vector<char>&, double) {
            Tensor<float> out({zs.rows(), zs.cols()});
            return out;
        };
        Rng r2(123);
        double loss = dsm_loss_with(zero, edm, z, mask, r2);
        // replicate the sigma draw: it is the first normal consumed
        Rng r3(123);
        double sigma = std::exp(edm.p_mean + edm.p_std * r3.normal());
        double expect = 0.0;
        for (float v : z.v) expect += double(v) * double(v);
        expect *= edm.loss_weight(sigma) / 3.0;
        CHECK(loss == doctest::Approx(expect).epsilon(1e-5));
    }
    SUBCASE("all-masked batch is rejected") {
        std::vector<char> none = {0, 0, 0};
        auto oracle = [&](const Tensor<float>&, const std::vector<char>&, double) { return z; };
        Rng r2(5);
        CHECK_THROWS((void)dsm_loss_with(oracle, edm, z, none, r2));
    }
}

TEST_CASE("sampler with the analytic Gaussian oracle") {
    // data ~ N(mu, sd^2 I): D(z, sigma) = (sd^2 z + sigma^2 mu) / (sd^2 + sigma^2)
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
    sched.sigma_min = 0.002;
    sched.sigma_max = 80.0 * sd;
    sched.steps = 32;

    SUBCASE("mean and variance over 10000 samples") {
        std::vector<char> mask = {1, 1, 1, 1};  // 4 rows per draw
        Rng rng(11);
        const int draws = 2500;  // 4 rows each -> 10000 samples
        std::vector<double> acc(size_t(d), 0.0), acc2(size_t(d), 0.0);
        for (int t = 0; t < draws; ++t) {
            auto out = sample_set(denoiser, mask, d, sched, rng);
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < d; ++j) {
                    acc[size_t(j)] += out.at(i, j);
                    acc2[size_t(j)] += double(out.at(i, j)) * out.at(i, j);
                }
        }
        for (int j = 0; j < d; ++j) {
            double mean = acc[size_t(j)] / (4 * draws);
            double var = acc2[size_t(j)] / (4 * draws) - mean * mean;
            CHECK(std::fabs(mean - mu[size_t(j)]) < 0.05 * sd);
            CHECK(var == doctest::Approx(sd * sd).epsilon(0.10));
        }
    }

    SUBCASE("error decreases monotonically with step count") {
        std::vector<char> mask = {1};
        Rng rng(12);
        const int reps = 200;
        std::vector<Tensor<float>> inits;
        for (int r = 0; r < reps; ++r) {
            Tensor<float> e({1, d});
            for (auto& v : e.v) v = rng.normalf();
            inits.push_back(e);
        }
        double prev = 1e30;
        for (int steps : {4, 8, 16, 32, 64}) {
            NoiseSchedule s2 = sched;
            s2.steps = steps;
            double err = 0.0;
            for (int r = 0; r < reps; ++r) {
                Rng tmp(0);
                auto out = sample_set(denoiser, mask, d, s2, tmp, &inits[size_t(r)]);
                // exact PF-ODE endpoint from this start
                double shrink = sd / std::sqrt(sd * sd + s2.sigma_max * s2.sigma_max);
                for (int j = 0; j < d; ++j) {
                    double x_T = s2.sigma_max * double(inits[size_t(r)].v[size_t(j)]);
                    double exact = mu[size_t(j)] + (x_T - mu[size_t(j)]) * shrink;
                    err += std::fabs(double(out.at(0, j)) - exact);
                }
            }
            err /= double(reps * d);
            CHECK(err < prev);
            prev = err;
        }
    }

    SUBCASE("same seed twice is identical") {
        std::vector<char> mask = {1, 0, 1};
        Rng a(5), b(5);
        auto o1 = sample_set(denoiser, mask, d, sched, a);
        auto o2 = sample_set(denoiser, mask, d, sched, b);
        CHECK(o1.v == o2.v);
        for (int j = 0; j < d; ++j) CHECK(o1.at(1, j) == 0.0f);  // masked row untouched
    }

    SUBCASE("non-finite state aborts with the step index") {
        auto nan_denoiser = [&](const Tensor<float>& zs, const std::vector<char>&, double) {
            Tensor<float> out({zs.rows(), zs.cols()});
            for (auto& v : out.v) v = std::numeric_limits<float>::quiet_NaN();
            return out;
        };
        std::vector<char> mask = {1};
        Rng rng(1);
        CHECK_THROWS_WITH_AS((void)sample_set(nan_denoiser, mask, d, sched, rng),
                             doctest::Contains("step"), std::runtime_error);
    }
}

TEST_CASE("trained score net beats the mean predictor on a bimodal toy task") {
    // z in R^2 drawn from {+a, -a} with equal probability, one condition
    Rng rng(21);
    const int D = 2, C = 3;
    std::vector<float> a_mode = {1.2f, -0.8f};
    std::vector<float> cond = {0.5f, -0.25f, 0.1f};
    std::vector<SetSample> train;
    for (int i = 0; i < 256; ++i) {
        SetSample s;
        float sign = (i % 2 == 0) ? 1.0f : -1.0f;
        s.z.push_back({sign * a_mode[0] + 0.05f * rng.normalf(),
                       sign * a_mode[1] + 0.05f * rng.normalf()});
        s.c.push_back(cond);
        train.push_back(s);
    }
    ScoreNet<float> net(2, D, C, 32, 4, 2, rng);
    EdmConfig edm;
    ScoreTrainConfig cfg;
    cfg.steps = 900;
    cfg.batch = 8;
    cfg.lr = 2e-3;
    cfg.seed = 2;
    auto report = train_score(net, edm, train, {}, cfg);
    CHECK(report.sigma_data > 0.5);

    // evaluate on fresh draws with the same sigma/noise stream for both
    // the model and the analytic mean predictor
    double model_loss = 0.0, mean_loss = 0.0;
    Tensor<float> mean_pred({2, D});  // dataset mean is ~0 per coordinate
    for (int t = 0; t < 200; ++t) {
        const auto& s = train[size_t(t % train.size())];
        PaddedSet p = pad_and_mask(s.z, s.c, 2);
        Rng r1(1000 + uint64_t(t)), r2(1000 + uint64_t(t));
        model_loss += dsm_loss(net, edm, p.z_set, p.cond_set, p.mask, r1);
        auto mean_denoiser = [&](const Tensor<float>&, const std::vector<char>&, double) {
            return mean_pred;
        };
        mean_loss += dsm_loss_with(mean_denoiser, edm, p.z_set, p.mask, r2);
    }
    CHECK(model_loss < mean_loss);
}

TEST_SUITE_END();
