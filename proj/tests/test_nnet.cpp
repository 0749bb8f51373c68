#include "doctest.h"
#include "mixgen/nn.hpp"

#include <cmath>
#include <filesystem>

using namespace mixgen;

namespace {

template <typename T>
Tensor<T> random_tensor(std::vector<int> shape, Rng& rng, double s = 1.0) {
    Tensor<T> t(std::move(shape));
    for (auto& v : t.v) v = T(s * rng.normal());
    return t;
}

std::string temp_file(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE_BEGIN("nnet");

TEST_CASE("adam first step equals -lr * sign(g) as eps -> 0") {
    Tensor<float> p({1});
    p.v[0] = 2.0f;
    p.ensure_grad();
    p.g[0] = 0.37f;
    Adam<float> opt;
    opt.lr = 0.1;
    opt.eps = 1e-12;
    opt.step({&p});
    CHECK(p.v[0] == doctest::Approx(2.0f - 0.1f).epsilon(1e-5));

    Tensor<float> q({1});
    q.v[0] = -1.0f;
    q.ensure_grad();
    q.g[0] = -5.0f;
    Adam<float> opt2;
    opt2.lr = 0.1;
    opt2.eps = 1e-12;
    opt2.step({&q});
    CHECK(q.v[0] == doctest::Approx(-1.0f + 0.1f).epsilon(1e-5));
}

TEST_CASE("adam zero gradient leaves parameters unchanged") {
    Tensor<float> p({4});
    for (int i = 0; i < 4; ++i) p.v[size_t(i)] = float(i);
    p.zero_grad();
    Adam<float> opt;
    opt.step({&p});
    for (int i = 0; i < 4; ++i) CHECK(p.v[size_t(i)] == float(i));
}

TEST_CASE("adam converges on (w-3)^2") {
    Tensor<float> w({1});
    w.v[0] = 0.0f;
    w.ensure_grad();
    Adam<float> opt;
    opt.lr = 0.1;
    for (int i = 0; i < 100; ++i) {
        w.zero_grad();
        w.g[0] = 2.0f * (w.v[0] - 3.0f);
        opt.step({&w});
    }
    CHECK(std::fabs(w.v[0] - 3.0f) < 0.05f);
}

TEST_CASE("adam skips non-finite gradients and counts them") {
    Tensor<float> p({2});
    p.v = {1.0f, 2.0f};
    p.zero_grad();
    p.g[0] = std::numeric_limits<float>::quiet_NaN();
    Adam<float> opt;
    CHECK_FALSE(opt.step({&p}));
    CHECK(opt.skipped == 1);
    CHECK(p.v[0] == 1.0f);
    CHECK(opt.step_count == 0);
}

TEST_CASE("grad_check: dense layer below 1e-4") {
    Rng rng(1);
    Dense<double> layer(6, 4, rng);
    Tensor<double> x = random_tensor<double>({3, 6}, rng);
    Tensor<double> target = random_tensor<double>({3, 4}, rng);
    auto loss_fn = [&]() {
        Dense<double> copy = layer;
        auto y = copy.forward(x);
        double l = 0;
        for (size_t i = 0; i < y.v.size(); ++i)
            l += (y.v[i] - target.v[i]) * (y.v[i] - target.v[i]);
        return l;
    };
    auto grad_fn = [&]() {
        for (auto* p : layer.params()) p->zero_grad();
        auto y = layer.forward(x);
        Tensor<double> dy = y;
        for (size_t i = 0; i < y.v.size(); ++i) dy.v[i] = 2.0 * (y.v[i] - target.v[i]);
        layer.backward(dy);
    };
    auto rep = grad_check<double>(layer.params(), loss_fn, grad_fn, 1e-5, rng);
    CHECK(rep.checked > 0);
    CHECK(rep.max_rel_error < 1e-4);
}

TEST_CASE("grad_check: zero-parameter module reports nothing to check") {
    Rng rng(2);
    auto rep = grad_check<double>({}, [] { return 0.0; }, [] {}, 1e-5, rng);
    CHECK(rep.checked == 0);
    CHECK(rep.max_rel_error == 0.0);
}

TEST_CASE("grad_check: masked attention below 1e-3") {
    Rng rng(3);
    const int dim = 8, n = 5;
    MultiheadAttention<double> attn(dim, 2, rng);
    Tensor<double> x = random_tensor<double>({n, dim}, rng);
    std::vector<char> mask = {1, 1, 1, 0, 0};
    Tensor<double> target = random_tensor<double>({n, dim}, rng);
    auto run = [&](MultiheadAttention<double>& a) {
        return a.forward(x, x, &mask, &mask);
    };
    auto loss_of = [&](Tensor<double>& y) {
        double l = 0;
        for (int i = 0; i < 3; ++i)  // only valid rows contribute
            for (int j = 0; j < dim; ++j)
                l += (y.at(i, j) - target.at(i, j)) * (y.at(i, j) - target.at(i, j));
        return l;
    };
    auto loss_fn = [&]() {
        MultiheadAttention<double> copy = attn;
        auto y = run(copy);
        return loss_of(y);
    };
    auto grad_fn = [&]() {
        for (auto* p : attn.params()) p->zero_grad();
        auto y = run(attn);
        Tensor<double> dy({n, dim});
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < dim; ++j) dy.at(i, j) = 2.0 * (y.at(i, j) - target.at(i, j));
        attn.backward(dy);
    };
    auto rep = grad_check<double>(attn.params(), loss_fn, grad_fn, 1e-5, rng);
    CHECK(rep.max_rel_error < 1e-3);
}

TEST_CASE("grad_check: layernorm, silu, conv1d, film") {
    Rng rng(4);
    SUBCASE("layernorm") {
        LayerNorm<double> ln(7);
        Tensor<double> x = random_tensor<double>({4, 7}, rng);
        auto loss_fn = [&]() {
            LayerNorm<double> copy = ln;
            auto y = copy.forward(x);
            double l = 0;
            for (auto v : y.v) l += std::sin(v);  // nontrivial downstream
            return l;
        };
        auto grad_fn = [&]() {
            for (auto* p : ln.params()) p->zero_grad();
            auto y = ln.forward(x);
            Tensor<double> dy = y;
            for (size_t i = 0; i < y.v.size(); ++i) dy.v[i] = std::cos(y.v[i]);
            ln.backward(dy);
        };
        auto rep = grad_check<double>(ln.params(), loss_fn, grad_fn, 1e-6, rng);
        CHECK(rep.max_rel_error < 1e-3);
    }
    SUBCASE("conv1d + film params and input gradient") {
        Conv1d<double> conv(3, 5, 9, 2, rng);
        FiLM<double> film(6, 5, rng);
        Tensor<double> x = random_tensor<double>({3, 40}, rng);
        Tensor<double> cond = random_tensor<double>({1, 6}, rng);
        std::vector<Tensor<double>*> params = conv.params();
        for (auto* p : film.params()) params.push_back(p);
        params.push_back(&x);  // also check the input gradient path
        auto loss_fn = [&]() {
            Conv1d<double> c2 = conv;
            FiLM<double> f2 = film;
            auto y = f2.forward(c2.forward(x), cond);
            double l = 0;
            for (auto v : y.v) l += v * v;
            return l;
        };
        auto grad_fn = [&]() {
            for (auto* p : params) p->zero_grad();
            auto y = film.forward(conv.forward(x), cond);
            Tensor<double> dy = y;
            for (size_t i = 0; i < y.v.size(); ++i) dy.v[i] = 2.0 * y.v[i];
            auto [dxf, dcond] = film.backward(dy);
            (void)dcond;
            Tensor<double> dx = conv.backward(dxf);
            x.g = dx.v;
        };
        auto rep = grad_check<double>(params, loss_fn, grad_fn, 1e-6, rng);
        CHECK(rep.max_rel_error < 1e-3);
    }
}

TEST_CASE("layernorm normalizes before affine") {
    Rng rng(5);
    LayerNorm<double> ln(64);
    Tensor<double> x = random_tensor<double>({8, 64}, rng, 2.0);
    for (auto& v : x.v) v += 1.5;
    auto y = ln.forward(x);
    for (int i = 0; i < 8; ++i) {
        double mu = 0, var = 0;
        for (int j = 0; j < 64; ++j) mu += y.at(i, j);
        mu /= 64.0;
        for (int j = 0; j < 64; ++j) var += (y.at(i, j) - mu) * (y.at(i, j) - mu);
        var /= 64.0;
        CHECK(std::fabs(mu) < 1e-5);
        CHECK(std::fabs(var - 1.0) < 1e-5);
    }
}

TEST_CASE("attention ignores padded slots bit-exactly") {
    Rng rng(6);
    const int dim = 16, n = 6;
    MultiheadAttention<float> attn(dim, 4, rng);
    Tensor<float> x = random_tensor<float>({n, dim}, rng);
    std::vector<char> mask = {1, 0, 1, 1, 0, 1};
    auto y1 = attn.forward(x, x, &mask, &mask);
    Tensor<float> x2 = x;
    for (int i = 0; i < n; ++i)
        if (!mask[size_t(i)])
            for (int j = 0; j < dim; ++j) x2.at(i, j) = float(rng.normal() * 100.0);
    auto y2 = attn.forward(x2, x2, &mask, &mask);
    for (int i = 0; i < n; ++i) {
        if (!mask[size_t(i)]) continue;
        for (int j = 0; j < dim; ++j) CHECK(y1.at(i, j) == y2.at(i, j));
    }
    // masked query rows come out zero
    for (int j = 0; j < dim; ++j) CHECK(y1.at(1, j) == 0.0f);
}

TEST_CASE("checkpoint roundtrip is exact and guarded") {
    Rng rng(7);
    Dense<float> layer(8, 8, rng);
    Tensor<float> probe = random_tensor<float>({2, 8}, rng);
    auto y0 = layer.forward(probe);

    Checkpoint ckpt;
    ckpt.config_hash = sha256(std::string("config-A"));
    store_params<float>(ckpt, "dense.", {{"w", &layer.w}, {"b", &layer.b}});
    auto path = temp_file("mixgen_test.mgck");
    save_checkpoint(path, ckpt);

    SUBCASE("probe output identical after reload") {
        Dense<float> fresh(8, 8, rng);
        auto loaded = load_checkpoint(path, ckpt.config_hash);
        load_params<float>(loaded, "dense.", {{"w", &fresh.w}, {"b", &fresh.b}});
        auto y1 = fresh.forward(probe);
        for (size_t i = 0; i < y0.v.size(); ++i) CHECK(y1.v[i] == y0.v[i]);
    }
    SUBCASE("truncated file is rejected") {
        auto corrupt = temp_file("mixgen_trunc.mgck");
        std::filesystem::copy_file(path, corrupt,
                                   std::filesystem::copy_options::overwrite_existing);
        std::filesystem::resize_file(corrupt, std::filesystem::file_size(corrupt) / 2);
        CHECK_THROWS_WITH_AS(load_checkpoint(corrupt), doctest::Contains("truncated"),
                             std::runtime_error);
    }
    SUBCASE("config-hash mismatch is rejected") {
        auto other = sha256(std::string("config-B"));
        CHECK_THROWS_WITH_AS(load_checkpoint(path, other), doctest::Contains("config-hash"),
                             std::runtime_error);
    }
    SUBCASE("missing array is reported by name") {
        auto loaded = load_checkpoint(path);
        Dense<float> fresh(8, 8, rng);
        CHECK_THROWS_WITH_AS(
            load_params<float>(loaded, "oops.", {{"w", &fresh.w}}),
            doctest::Contains("oops.w"), std::runtime_error);
    }
}

TEST_SUITE_END();
