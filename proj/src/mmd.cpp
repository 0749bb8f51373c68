#include "mixgen/mmd.hpp"

#include <algorithm>
#include <cmath>

namespace mixgen {

namespace {

double sq_dist(const std::vector<float>& x, const std::vector<float>& y) {
    double acc = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double d = double(x[i]) - double(y[i]);
        acc += d * d;
    }
    return acc;
}

// Median pairwise distance over the pooled rows.
double median_bandwidth(const std::vector<const std::vector<float>*>& pool) {
    std::vector<double> dists;
    dists.reserve(pool.size() * (pool.size() - 1) / 2);
    for (size_t i = 0; i < pool.size(); ++i)
        for (size_t j = i + 1; j < pool.size(); ++j)
            dists.push_back(std::sqrt(sq_dist(*pool[i], *pool[j])));
    require(!dists.empty(), "kad: not enough rows to estimate a bandwidth");
    std::sort(dists.begin(), dists.end());
    size_t m = dists.size();
    double med = (m % 2 == 1) ? dists[m / 2] : 0.5 * (dists[m / 2 - 1] + dists[m / 2]);
    require(med > 0.0, "kad: zero bandwidth (all pooled rows identical)");
    return med;
}

void check_sets(const EmbeddingSet& a, const EmbeddingSet& b) {
    a.validate();
    b.validate();
    require(a.count() >= 2 && b.count() >= 2, "kad: both sets need at least 2 rows");
    require(a.dim() == b.dim(), "kad: dimension mismatch");
}

}  // namespace

namespace {

// canonical argument order makes kad(a, b) == kad(b, a) bit-exact
bool set_less(const EmbeddingSet& x, const EmbeddingSet& y) {
    if (x.count() != y.count()) return x.count() < y.count();
    for (int i = 0; i < x.count(); ++i)
        for (int j = 0; j < x.dim(); ++j) {
            float xv = x.rows[size_t(i)][size_t(j)], yv = y.rows[size_t(i)][size_t(j)];
            if (xv != yv) return xv < yv;
        }
    return false;
}

}  // namespace

double kad(const EmbeddingSet& a, const EmbeddingSet& b, const KernelConfig& cfg) {
    check_sets(a, b);
    if (set_less(b, a)) return kad(b, a, cfg);
    const int m = a.count(), n = b.count();

    double h;
    if (cfg.fixed_bandwidth > 0.0) {
        h = cfg.fixed_bandwidth;
    } else {
        std::vector<const std::vector<float>*> pool;
        pool.reserve(size_t(m + n));
        for (const auto& r : a.rows) pool.push_back(&r);
        for (const auto& r : b.rows) pool.push_back(&r);
        h = median_bandwidth(pool);
    }
    const double gamma = 1.0 / (2.0 * h * h);

    // precomputed squared-distance tables, kernel sums without diagonals
    double sum_aa = 0.0;
    for (int i = 0; i < m; ++i) {
        double row = 0.0;
        for (int j = i + 1; j < m; ++j)
            row += std::exp(-gamma * sq_dist(a.rows[size_t(i)], a.rows[size_t(j)]));
        sum_aa += row;
    }
    double sum_bb = 0.0;
    for (int i = 0; i < n; ++i) {
        double row = 0.0;
        for (int j = i + 1; j < n; ++j)
            row += std::exp(-gamma * sq_dist(b.rows[size_t(i)], b.rows[size_t(j)]));
        sum_bb += row;
    }
    double sum_ab = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            sum_ab += std::exp(-gamma * sq_dist(a.rows[size_t(i)], b.rows[size_t(j)]));

    double mmd2 = 2.0 * sum_aa / (double(m) * double(m - 1)) +
                  2.0 * sum_bb / (double(n) * double(n - 1)) -
                  2.0 * sum_ab / (double(m) * double(n));
    return cfg.scale * mmd2;
}

double mmd_bruteforce(const EmbeddingSet& a, const EmbeddingSet& b,
                      const KernelConfig& cfg) {
    check_sets(a, b);
    require(a.count() <= 64 && b.count() <= 64, "mmd_bruteforce: sets too large");
    const int m = a.count(), n = b.count();

    double h = cfg.fixed_bandwidth;
    if (h <= 0.0) {
        // own median computation, independent of kad's
        std::vector<std::vector<float>> pool;
        for (const auto& r : a.rows) pool.push_back(r);
        for (const auto& r : b.rows) pool.push_back(r);
        std::vector<double> dists;
        for (size_t i = 0; i < pool.size(); ++i)
            for (size_t j = 0; j < pool.size(); ++j) {
                if (j <= i) continue;
                double acc = 0.0;
                for (size_t k = 0; k < pool[i].size(); ++k) {
                    double d = double(pool[i][k]) - double(pool[j][k]);
                    acc += d * d;
                }
                dists.push_back(std::sqrt(acc));
            }
        std::sort(dists.begin(), dists.end());
        size_t cnt = dists.size();
        h = (cnt % 2 == 1) ? dists[cnt / 2] : 0.5 * (dists[cnt / 2 - 1] + dists[cnt / 2]);
        require(h > 0.0, "mmd_bruteforce: zero bandwidth");
    }

    auto kernel = [&](const std::vector<float>& x, const std::vector<float>& y) {
        double acc = 0.0;
        for (size_t k = 0; k < x.size(); ++k) {
            double d = double(x[k]) - double(y[k]);
            acc += d * d;
        }
        return std::exp(-acc / (2.0 * h * h));
    };

    double term_a = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (i != j) term_a += kernel(a.rows[size_t(i)], a.rows[size_t(j)]);
    term_a /= double(m) * double(m - 1);

    double term_b = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (i != j) term_b += kernel(b.rows[size_t(i)], b.rows[size_t(j)]);
    term_b /= double(n) * double(n - 1);

    double term_ab = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) term_ab += kernel(a.rows[size_t(i)], b.rows[size_t(j)]);
    term_ab /= double(m) * double(n);

    return cfg.scale * (term_a + term_b - 2.0 * term_ab);
}

}  // namespace mixgen
