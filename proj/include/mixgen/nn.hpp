#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mixgen/hash.hpp"
#include "mixgen/tensor.hpp"

namespace mixgen {

constexpr double kLayerNormEps = 1e-6;

template <typename T>
T silu(T x) {
    T s = T(1) / (T(1) + std::exp(-x));
    return x * s;
}
template <typename T>
T silu_grad(T x) {
    T s = T(1) / (T(1) + std::exp(-x));
    return s * (T(1) + x * (T(1) - s));
}

// ---------------------------------------------------------------------------
// Dense: y = x W^T + b, rows are independent samples.
template <typename T>
struct Dense {
    Tensor<T> w;  // [out, in]
    Tensor<T> b;  // [out]
    Tensor<T> x_;

    Dense() = default;
    Dense(int in, int out, Rng& rng, bool zero_init = false) {
        w = Tensor<T>({out, in});
        b = Tensor<T>({out});
        if (!zero_init) {
            double s = std::sqrt(1.0 / double(in));
            for (auto& v : w.v) v = T(rng.uniform(-s, s));
        }
        w.ensure_grad();
        b.ensure_grad();
    }

    int in_dim() const { return w.cols(); }
    int out_dim() const { return w.rows(); }

    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        const int n = x.rows(), in = in_dim(), out = out_dim();
        Tensor<T> y({n, out});
        for (int i = 0; i < n; ++i) {
            const T* xr = &x.v[size_t(i) * size_t(in)];
            T* yr = &y.v[size_t(i) * size_t(out)];
            for (int o = 0; o < out; ++o) {
                const T* wr = &w.v[size_t(o) * size_t(in)];
                T acc = b.v[size_t(o)];
                for (int j = 0; j < in; ++j) acc += wr[j] * xr[j];
                yr[o] = acc;
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int n = x_.rows(), in = in_dim(), out = out_dim();
        Tensor<T> dx({n, in});
        for (int i = 0; i < n; ++i) {
            const T* xr = &x_.v[size_t(i) * size_t(in)];
            const T* dyr = &dy.v[size_t(i) * size_t(out)];
            T* dxr = &dx.v[size_t(i) * size_t(in)];
            for (int o = 0; o < out; ++o) {
                T g = dyr[o];
                b.g[size_t(o)] += g;
                T* wg = &w.g[size_t(o) * size_t(in)];
                const T* wr = &w.v[size_t(o) * size_t(in)];
                for (int j = 0; j < in; ++j) {
                    wg[j] += g * xr[j];
                    dxr[j] += g * wr[j];
                }
            }
        }
        return dx;
    }

    std::vector<Tensor<T>*> params() { return {&w, &b}; }
};

// ---------------------------------------------------------------------------
// LayerNorm over the last dimension of [n, dim] rows.
template <typename T>
struct LayerNorm {
    Tensor<T> gamma, beta;
    Tensor<T> xhat_;
    std::vector<T> inv_std_;

    LayerNorm() = default;
    explicit LayerNorm(int dim) {
        gamma = Tensor<T>({dim});
        beta = Tensor<T>({dim});
        std::fill(gamma.v.begin(), gamma.v.end(), T(1));
        gamma.ensure_grad();
        beta.ensure_grad();
    }

    Tensor<T> forward(const Tensor<T>& x) {
        const int n = x.rows(), d = x.cols();
        xhat_ = Tensor<T>({n, d});
        inv_std_.assign(size_t(n), T(0));
        Tensor<T> y({n, d});
        for (int i = 0; i < n; ++i) {
            const T* xr = &x.v[size_t(i) * size_t(d)];
            T mu = 0;
            for (int j = 0; j < d; ++j) mu += xr[j];
            mu /= T(d);
            T var = 0;
            for (int j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
            var /= T(d);
            T inv = T(1) / std::sqrt(var + T(kLayerNormEps));
            inv_std_[size_t(i)] = inv;
            for (int j = 0; j < d; ++j) {
                T xh = (xr[j] - mu) * inv;
                xhat_.at(i, j) = xh;
                y.at(i, j) = gamma.v[size_t(j)] * xh + beta.v[size_t(j)];
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const int n = xhat_.rows(), d = xhat_.cols();
        Tensor<T> dx({n, d});
        for (int i = 0; i < n; ++i) {
            T sum_dxhat = 0, sum_dxhat_xhat = 0;
            for (int j = 0; j < d; ++j) {
                T g = dy.at(i, j);
                gamma.g[size_t(j)] += g * xhat_.at(i, j);
                beta.g[size_t(j)] += g;
                T dxhat = g * gamma.v[size_t(j)];
                sum_dxhat += dxhat;
                sum_dxhat_xhat += dxhat * xhat_.at(i, j);
            }
            for (int j = 0; j < d; ++j) {
                T dxhat = dy.at(i, j) * gamma.v[size_t(j)];
                dx.at(i, j) = inv_std_[size_t(i)] *
                              (dxhat - sum_dxhat / T(d) -
                               xhat_.at(i, j) * sum_dxhat_xhat / T(d));
            }
        }
        return dx;
    }

    std::vector<Tensor<T>*> params() { return {&gamma, &beta}; }
};

// ---------------------------------------------------------------------------
// SiLU over a whole tensor.
template <typename T>
struct Silu {
    Tensor<T> x_;
    Tensor<T> forward(const Tensor<T>& x) {
        x_ = x;
        Tensor<T> y = x;
        for (auto& v : y.v) v = silu(v);
        return y;
    }
    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.v.size(); ++i) dx.v[i] *= silu_grad(x_.v[i]);
        return dx;
    }
};

// ---------------------------------------------------------------------------
// Multi-head attention. Queries come from x [n, dim], keys/values from kv
// [m, dim]. An optional key mask excludes padded rows from the softmax
// entirely, so valid outputs cannot depend on padded contents. Masked query
// rows produce zero rows.
template <typename T>
struct MultiheadAttention {
    int dim = 0, heads = 1, dh = 0;
    Dense<T> wq, wk, wv, wo;
    Tensor<T> q_, k_, v_, attn_, ctx_;
    std::vector<char> qmask_, kmask_;

    MultiheadAttention() = default;
    MultiheadAttention(int dim_, int heads_, Rng& rng, bool zero_out_proj = false)
        : dim(dim_), heads(heads_), dh(dim_ / heads_),
          wq(dim_, dim_, rng), wk(dim_, dim_, rng), wv(dim_, dim_, rng),
          wo(dim_, dim_, rng, zero_out_proj) {
        require(dim_ % heads_ == 0, "attention: dim must divide heads");
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& kv,
                      const std::vector<char>* q_mask = nullptr,
                      const std::vector<char>* k_mask = nullptr) {
        const int n = x.rows(), m = kv.rows();
        q_ = wq.forward(x);
        k_ = wk.forward(kv);
        v_ = wv.forward(kv);
        qmask_.assign(size_t(n), 1);
        kmask_.assign(size_t(m), 1);
        if (q_mask) qmask_ = *q_mask;
        if (k_mask) kmask_ = *k_mask;

        attn_ = Tensor<T>({heads, n, m});
        ctx_ = Tensor<T>({n, dim});
        const T inv_sqrt = T(1) / std::sqrt(T(dh));
        for (int h = 0; h < heads; ++h) {
            for (int i = 0; i < n; ++i) {
                if (!qmask_[size_t(i)]) continue;
                const T* qi = &q_.v[size_t(i) * size_t(dim) + size_t(h) * size_t(dh)];
                T mx = -std::numeric_limits<T>::infinity();
                for (int j = 0; j < m; ++j) {
                    if (!kmask_[size_t(j)]) continue;
                    const T* kj = &k_.v[size_t(j) * size_t(dim) + size_t(h) * size_t(dh)];
                    T s = 0;
                    for (int c = 0; c < dh; ++c) s += qi[c] * kj[c];
                    s *= inv_sqrt;
                    attn_.v[(size_t(h) * size_t(n) + size_t(i)) * size_t(m) + size_t(j)] = s;
                    if (s > mx) mx = s;
                }
                T denom = 0;
                for (int j = 0; j < m; ++j) {
                    if (!kmask_[size_t(j)]) continue;
                    size_t idx = (size_t(h) * size_t(n) + size_t(i)) * size_t(m) + size_t(j);
                    T e = std::exp(attn_.v[idx] - mx);
                    attn_.v[idx] = e;
                    denom += e;
                }
                T* ci = &ctx_.v[size_t(i) * size_t(dim) + size_t(h) * size_t(dh)];
                for (int j = 0; j < m; ++j) {
                    if (!kmask_[size_t(j)]) continue;
                    size_t idx = (size_t(h) * size_t(n) + size_t(i)) * size_t(m) + size_t(j);
                    attn_.v[idx] /= denom;
                    const T* vj = &v_.v[size_t(j) * size_t(dim) + size_t(h) * size_t(dh)];
                    T a = attn_.v[idx];
                    for (int c = 0; c < dh; ++c) ci[c] += a * vj[c];
                }
            }
        }
        Tensor<T> y = wo.forward(ctx_);
        for (int i = 0; i < n; ++i)
            if (!qmask_[size_t(i)])
                for (int j = 0; j < dim; ++j) y.at(i, j) = T(0);
        return y;
    }

    // Returns (dx, dkv).
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dy) {
        const int n = int(qmask_.size()), m = int(kmask_.size());
        Tensor<T> dy_masked = dy;
        for (int i = 0; i < n; ++i)
            if (!qmask_[size_t(i)])
                for (int j = 0; j < dim; ++j) dy_masked.at(i, j) = T(0);
        Tensor<T> dctx = wo.backward(dy_masked);
        Tensor<T> dq({n, dim}), dk({m, dim}), dv({m, dim});
        const T inv_sqrt = T(1) / std::sqrt(T(dh));
        for (int h = 0; h < heads; ++h) {
            for (int i = 0; i < n; ++i) {
                if (!qmask_[size_t(i)]) continue;
                const T* dci = &dctx.v[size_t(i) * size_t(dim) + size_t(h) * size_t(dh)];
                // d alpha and softmax backward over valid keys
                T dot_adalpha = 0;
                std::vector<T> dalpha(size_t(m), T(0));
                for (int j = 0; j < m; ++j) {
                    if (!kmask_[size_t(j)]) continue;
                    const T* vj = &v_.v[size_t(j) * size_t(dim) + size_t(h) * size_t(dh)];
                    T da = 0;
                    for (int c = 0; c < dh; ++c) da += dci[c] * vj[c];
                    dalpha[size_t(j)] = da;
                    size_t idx = (size_t(h) * size_t(n) + size_t(i)) * size_t(m) + size_t(j);
                    dot_adalpha += attn_.v[idx] * da;
                }
                const T* qi = &q_.v[size_t(i) * size_t(dim) + size_t(h) * size_t(dh)];
                T* dqi = &dq.v[size_t(i) * size_t(dim) + size_t(h) * size_t(dh)];
                for (int j = 0; j < m; ++j) {
                    if (!kmask_[size_t(j)]) continue;
                    size_t idx = (size_t(h) * size_t(n) + size_t(i)) * size_t(m) + size_t(j);
                    T a = attn_.v[idx];
                    T ds = a * (dalpha[size_t(j)] - dot_adalpha) * inv_sqrt;
                    const T* kj = &k_.v[size_t(j) * size_t(dim) + size_t(h) * size_t(dh)];
                    T* dkj = &dk.v[size_t(j) * size_t(dim) + size_t(h) * size_t(dh)];
                    T* dvj = &dv.v[size_t(j) * size_t(dim) + size_t(h) * size_t(dh)];
                    for (int c = 0; c < dh; ++c) {
                        dqi[c] += ds * kj[c];
                        dkj[c] += ds * qi[c];
                        dvj[c] += a * dci[c];
                    }
                }
            }
        }
        Tensor<T> dx = wq.backward(dq);
        Tensor<T> dkv = wk.backward(dk);
        Tensor<T> dkv2 = wv.backward(dv);
        for (size_t i = 0; i < dkv.v.size(); ++i) dkv.v[i] += dkv2.v[i];
        return {dx, dkv};
    }

    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> out;
        for (auto* p : wq.params()) out.push_back(p);
        for (auto* p : wk.params()) out.push_back(p);
        for (auto* p : wv.params()) out.push_back(p);
        for (auto* p : wo.params()) out.push_back(p);
        return out;
    }
};

// ---------------------------------------------------------------------------
// Dilated 1-D convolution over [channels, frames], zero-padded so the output
// length equals the input length (centered taps).
template <typename T>
struct Conv1d {
    int in_ch = 0, out_ch = 0, kernel = 1, dilation = 1;
    Tensor<T> w;  // [out_ch, in_ch, kernel]
    Tensor<T> b;  // [out_ch]
    Tensor<T> x_;

    Conv1d() = default;
    Conv1d(int ic, int oc, int k, int dil, Rng& rng)
        : in_ch(ic), out_ch(oc), kernel(k), dilation(dil) {
        w = Tensor<T>({oc, ic, k});
        b = Tensor<T>({oc});
        double s = std::sqrt(1.0 / double(ic * k));
        for (auto& v : w.v) v = T(rng.uniform(-s, s));
        w.ensure_grad();
        b.ensure_grad();
    }

    Tensor<T> forward(const Tensor<T>& x, bool parallel = false) {
        x_ = x;
        const int64_t frames = x.cols();
        Tensor<T> y({out_ch, int(frames)});
        const int center = kernel / 2;
        auto work = [&](int64_t lo, int64_t hi) {
            for (int64_t o = lo; o < hi; ++o) {
                T* yr = &y.v[size_t(o) * size_t(frames)];
                for (int64_t t = 0; t < frames; ++t) yr[t] = b.v[size_t(o)];
                for (int ic = 0; ic < in_ch; ++ic) {
                    const T* xr = &x.v[size_t(ic) * size_t(frames)];
                    const T* wr = &w.v[(size_t(o) * size_t(in_ch) + size_t(ic)) * size_t(kernel)];
                    for (int k = 0; k < kernel; ++k) {
                        int64_t off = int64_t(k - center) * dilation;
                        T wv = wr[k];
                        if (wv == T(0)) continue;
                        int64_t t0 = std::max<int64_t>(0, -off);
                        int64_t t1 = std::min<int64_t>(frames, frames - off);
                        const T* xs = xr + off;
                        for (int64_t t = t0; t < t1; ++t) yr[t] += wv * xs[t];
                    }
                }
            }
        };
        if (parallel)
            parallel_for(out_ch, work);
        else
            work(0, out_ch);
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy, bool parallel = false) {
        const int64_t frames = x_.cols();
        Tensor<T> dx({in_ch, int(frames)});
        const int center = kernel / 2;
        auto work_w = [&](int64_t lo, int64_t hi) {
            for (int64_t o = lo; o < hi; ++o) {
                const T* dyr = &dy.v[size_t(o) * size_t(frames)];
                T db = 0;
                for (int64_t t = 0; t < frames; ++t) db += dyr[t];
                b.g[size_t(o)] += db;
                for (int ic = 0; ic < in_ch; ++ic) {
                    const T* xr = &x_.v[size_t(ic) * size_t(frames)];
                    T* wg = &w.g[(size_t(o) * size_t(in_ch) + size_t(ic)) * size_t(kernel)];
                    for (int k = 0; k < kernel; ++k) {
                        int64_t off = int64_t(k - center) * dilation;
                        int64_t t0 = std::max<int64_t>(0, -off);
                        int64_t t1 = std::min<int64_t>(frames, frames - off);
                        const T* xs = xr + off;
                        T acc = 0;
                        for (int64_t t = t0; t < t1; ++t) acc += dyr[t] * xs[t];
                        wg[k] += acc;
                    }
                }
            }
        };
        auto work_x = [&](int64_t lo, int64_t hi) {
            for (int64_t ic = lo; ic < hi; ++ic) {
                T* dxr = &dx.v[size_t(ic) * size_t(frames)];
                for (int o = 0; o < out_ch; ++o) {
                    const T* dyr = &dy.v[size_t(o) * size_t(frames)];
                    const T* wr = &w.v[(size_t(o) * size_t(in_ch) + size_t(ic)) * size_t(kernel)];
                    for (int k = 0; k < kernel; ++k) {
                        int64_t off = int64_t(k - center) * dilation;
                        T wv = wr[k];
                        if (wv == T(0)) continue;
                        int64_t t0 = std::max<int64_t>(0, -off);
                        int64_t t1 = std::min<int64_t>(frames, frames - off);
                        T* dxs = dxr + off;
                        for (int64_t t = t0; t < t1; ++t) dxs[t] += wv * dyr[t];
                    }
                }
            }
        };
        if (parallel) {
            parallel_for(out_ch, work_w);
            parallel_for(in_ch, work_x);
        } else {
            work_w(0, out_ch);
            work_x(0, in_ch);
        }
        return dx;
    }

    std::vector<Tensor<T>*> params() { return {&w, &b}; }
};

// ---------------------------------------------------------------------------
// Feature-wise linear modulation on [ch, frames]: y = gamma(cond) * x +
// beta(cond). The projection bias starts at gamma = 1, beta = 0.
template <typename T>
struct FiLM {
    int ch = 0;
    Dense<T> proj;  // cond_dim -> 2*ch
    Tensor<T> x_, gb_;

    FiLM() = default;
    FiLM(int cond_dim, int channels, Rng& rng) : ch(channels), proj(cond_dim, 2 * channels, rng) {
        for (int c = 0; c < ch; ++c) proj.b.v[size_t(c)] = T(1);
    }

    Tensor<T> forward(const Tensor<T>& x, const Tensor<T>& cond) {
        x_ = x;
        gb_ = proj.forward(cond);  // [1, 2*ch]
        const int64_t frames = x.cols();
        Tensor<T> y({ch, int(frames)});
        for (int c = 0; c < ch; ++c) {
            T g = gb_.v[size_t(c)], bt = gb_.v[size_t(ch + c)];
            const T* xr = &x.v[size_t(c) * size_t(frames)];
            T* yr = &y.v[size_t(c) * size_t(frames)];
            for (int64_t t = 0; t < frames; ++t) yr[t] = g * xr[t] + bt;
        }
        return y;
    }

    // Returns (dx, dcond).
    std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& dy) {
        const int64_t frames = x_.cols();
        Tensor<T> dgb({1, 2 * ch});
        Tensor<T> dx({ch, int(frames)});
        for (int c = 0; c < ch; ++c) {
            const T* dyr = &dy.v[size_t(c) * size_t(frames)];
            const T* xr = &x_.v[size_t(c) * size_t(frames)];
            T* dxr = &dx.v[size_t(c) * size_t(frames)];
            T g = gb_.v[size_t(c)];
            T dgamma = 0, dbeta = 0;
            for (int64_t t = 0; t < frames; ++t) {
                dgamma += dyr[t] * xr[t];
                dbeta += dyr[t];
                dxr[t] = g * dyr[t];
            }
            dgb.v[size_t(c)] = dgamma;
            dgb.v[size_t(ch + c)] = dbeta;
        }
        Tensor<T> dcond = proj.backward(dgb);
        return {dx, dcond};
    }

    std::vector<Tensor<T>*> params() { return proj.params(); }
};

// ---------------------------------------------------------------------------
// Adam with bias correction. A non-finite gradient skips the whole step.
template <typename T>
struct Adam {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int64_t step_count = 0;
    int64_t skipped = 0;
    std::vector<std::vector<double>> m_, v_;

    void init(const std::vector<Tensor<T>*>& params) {
        m_.clear();
        v_.clear();
        for (auto* p : params) {
            m_.emplace_back(p->v.size(), 0.0);
            v_.emplace_back(p->v.size(), 0.0);
        }
    }

    bool step(const std::vector<Tensor<T>*>& params) {
        if (m_.size() != params.size()) init(params);
        for (auto* p : params) {
            p->ensure_grad();
            for (T g : p->g)
                if (!std::isfinite(double(g))) {
                    ++skipped;
                    warn(format_str("adam: non-finite gradient, skipping step (total skipped %lld)",
                                    (long long)skipped));
                    return false;
                }
        }
        ++step_count;
        double bc1 = 1.0 - std::pow(beta1, double(step_count));
        double bc2 = 1.0 - std::pow(beta2, double(step_count));
        for (size_t pi = 0; pi < params.size(); ++pi) {
            auto& p = *params[pi];
            auto& m = m_[pi];
            auto& v = v_[pi];
            for (size_t i = 0; i < p.v.size(); ++i) {
                double g = double(p.g[i]);
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                double mhat = m[i] / bc1;
                double vhat = v[i] / bc2;
                p.v[i] = T(double(p.v[i]) - lr * mhat / (std::sqrt(vhat) + eps));
            }
        }
        return true;
    }
};

// ---------------------------------------------------------------------------
// Central finite-difference gradient check over at most `max_checks`
// randomly chosen parameter entries. `grad_fn` must zero grads, run forward
// and backward, and leave gradients in the tensors; `loss_fn` must run the
// forward pass only.
struct GradCheckReport {
    double max_rel_error = 0.0;
    int checked = 0;
};

template <typename T>
GradCheckReport grad_check(const std::vector<Tensor<T>*>& params,
                           const std::function<double()>& loss_fn,
                           const std::function<void()>& grad_fn, double epsilon,
                           Rng& rng, int max_checks = 200) {
    GradCheckReport rep;
    grad_fn();
    require(std::isfinite(loss_fn()), "grad_check: non-finite loss");
    std::vector<std::pair<size_t, size_t>> entries;
    for (size_t pi = 0; pi < params.size(); ++pi)
        for (size_t i = 0; i < params[pi]->v.size(); ++i) entries.push_back({pi, i});
    if (entries.empty()) return rep;
    // shuffle and take a subset
    for (size_t i = entries.size(); i > 1; --i)
        std::swap(entries[i - 1], entries[rng.randint(i)]);
    size_t n = std::min(entries.size(), size_t(max_checks));
    for (size_t e = 0; e < n; ++e) {
        auto [pi, i] = entries[e];
        Tensor<T>& p = *params[pi];
        double bp = double(p.g[i]);
        T saved = p.v[i];
        p.v[i] = saved + T(epsilon);
        double lp = loss_fn();
        p.v[i] = saved - T(epsilon);
        double lm = loss_fn();
        p.v[i] = saved;
        double fd = (lp - lm) / (2.0 * epsilon);
        double denom = std::max(std::max(std::fabs(fd), std::fabs(bp)), 1e-8);
        double rel = std::fabs(fd - bp) / denom;
        rep.max_rel_error = std::max(rep.max_rel_error, rel);
        ++rep.checked;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Checkpoint: named float32 arrays with a config hash, format "MGCK".
struct Checkpoint {
    uint16_t version = 1;
    Sha256Digest config_hash{};
    std::vector<std::pair<std::string, std::vector<float>>> arrays;

    void set(const std::string& name, std::vector<float> data);
    const std::vector<float>* find(const std::string& name) const;
    const std::vector<float>& get(const std::string& name) const;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);
Checkpoint load_checkpoint(const std::string& path, const Sha256Digest& expected_hash);

// Move float32 arrays in and out of typed parameter tensors.
template <typename T>
void store_params(Checkpoint& ckpt, const std::string& prefix,
                  const std::vector<std::pair<std::string, Tensor<T>*>>& named) {
    for (const auto& [name, t] : named) {
        std::vector<float> data(t->v.size());
        for (size_t i = 0; i < data.size(); ++i) data[i] = float(t->v[i]);
        ckpt.set(prefix + name, std::move(data));
    }
}

template <typename T>
void load_params(const Checkpoint& ckpt, const std::string& prefix,
                 const std::vector<std::pair<std::string, Tensor<T>*>>& named) {
    for (const auto& [name, t] : named) {
        const auto& data = ckpt.get(prefix + name);
        require(data.size() == t->v.size(),
                "checkpoint: size mismatch for array " + prefix + name);
        for (size_t i = 0; i < data.size(); ++i) t->v[i] = T(data[i]);
    }
}

}  // namespace mixgen
