// The trainable decoder: per-level encoder MLPs (2-layer residual, tanh),
// an SDF head (one hidden layer, tanh output) and a mask head (one hidden
// layer, scalar logit). Everything is double precision with hand-written
// forward/backward passes; parameters flatten to a single vector in declared
// order (per-level W1,b1,W2,b2, then SDF head, then mask head), which is also
// the binary file layout.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "sfr/core.hpp"

namespace sfr {

// Row-major dense layer y = W x + b.
struct DenseLayer {
    int in = 0;
    int out = 0;
    std::vector<double> W;  // out x in
    std::vector<double> b;  // out

    void resize(int in_, int out_) {
        in = in_;
        out = out_;
        W.assign(std::size_t(in) * std::size_t(out), 0.0);
        b.assign(std::size_t(out), 0.0);
    }

    void forward(const double* x, double* y) const {
        for (int o = 0; o < out; ++o) {
            const double* row = W.data() + std::size_t(o) * std::size_t(in);
            double acc = b[std::size_t(o)];
            for (int i = 0; i < in; ++i) acc += row[i] * x[i];
            y[o] = acc;
        }
    }

    // Accumulates parameter gradients for upstream dy and optionally the
    // input gradient dx (pass nullptr when the input is not a parameter path).
    void backward(const double* x, const double* dy, DenseLayer& grad,
                  double* dx) const {
        for (int o = 0; o < out; ++o) {
            const double g = dy[o];
            grad.b[std::size_t(o)] += g;
            double* grow = grad.W.data() + std::size_t(o) * std::size_t(in);
            for (int i = 0; i < in; ++i) grow[i] += g * x[i];
        }
        if (dx) {
            for (int i = 0; i < in; ++i) {
                double acc = 0.0;
                for (int o = 0; o < out; ++o)
                    acc += W[std::size_t(o) * std::size_t(in) + std::size_t(i)] * dy[o];
                dx[i] = acc;
            }
        }
    }
};

// h1 = tanh(W1 x + b1); y = tanh(W2 h1 + b2) + h1.
struct EncoderMlp {
    DenseLayer l1;  // (D+3) -> H
    DenseLayer l2;  // H -> H

    struct Cache {
        std::vector<double> x;   // input copy
        std::vector<double> h1;  // post-activation
        std::vector<double> h2;  // post-activation of layer 2 (before residual)
        std::vector<double> y;
    };

    void forward(const double* x, Cache& c) const {
        const int h = l1.out;
        c.x.assign(x, x + l1.in);
        c.h1.resize(std::size_t(h));
        c.h2.resize(std::size_t(h));
        c.y.resize(std::size_t(h));
        l1.forward(x, c.h1.data());
        for (int i = 0; i < h; ++i) c.h1[std::size_t(i)] = std::tanh(c.h1[std::size_t(i)]);
        l2.forward(c.h1.data(), c.h2.data());
        for (int i = 0; i < h; ++i) c.h2[std::size_t(i)] = std::tanh(c.h2[std::size_t(i)]);
        for (int i = 0; i < h; ++i) c.y[std::size_t(i)] = c.h2[std::size_t(i)] + c.h1[std::size_t(i)];
    }

    void backward(const Cache& c, const double* dy, EncoderMlp& grad,
                  std::vector<double>& scratch) const {
        const int h = l1.out;
        scratch.resize(2 * std::size_t(h));
        double* da2 = scratch.data();       // gradient at layer-2 pre-activation
        double* dh1 = scratch.data() + h;   // gradient at h1
        for (int i = 0; i < h; ++i) {
            const double t = c.h2[std::size_t(i)];
            da2[i] = dy[i] * (1.0 - t * t);
            dh1[i] = dy[i];  // residual path
        }
        // l2 input gradient adds to the residual path.
        std::vector<double> dh1_l2(std::size_t(h), 0.0);
        l2.backward(c.h1.data(), da2, grad.l2, dh1_l2.data());
        for (int i = 0; i < h; ++i) {
            const double t = c.h1[std::size_t(i)];
            dh1[i] = (dh1[i] + dh1_l2[std::size_t(i)]) * (1.0 - t * t);
        }
        l1.backward(c.x.data(), dh1, grad.l1, nullptr);
    }
};

// scalar = Wo tanh(Wh f + bh) + bo. The SDF head additionally applies tanh to
// the scalar at the call site; the mask head uses it raw as a logit.
struct HeadMlp {
    DenseLayer hidden;  // H -> H
    DenseLayer out;     // H -> 1

    struct Cache {
        std::vector<double> f;  // input copy
        std::vector<double> h;  // post-activation
        double raw = 0.0;
    };

    double forward(const double* f, Cache& c) const {
        const int h = hidden.out;
        c.f.assign(f, f + hidden.in);
        c.h.resize(std::size_t(h));
        hidden.forward(f, c.h.data());
        for (int i = 0; i < h; ++i) c.h[std::size_t(i)] = std::tanh(c.h[std::size_t(i)]);
        out.forward(c.h.data(), &c.raw);
        return c.raw;
    }

    // Accumulates grads and adds the input-feature gradient into df.
    void backward(const Cache& c, double d_raw, HeadMlp& grad, double* df) const {
        const int h = hidden.out;
        std::vector<double> dh(std::size_t(h), 0.0);
        out.backward(c.h.data(), &d_raw, grad.out, dh.data());
        for (int i = 0; i < h; ++i) {
            const double t = c.h[std::size_t(i)];
            dh[std::size_t(i)] *= (1.0 - t * t);
        }
        std::vector<double> df_local(std::size_t(hidden.in), 0.0);
        hidden.backward(c.f.data(), dh.data(), grad.hidden, df_local.data());
        for (int i = 0; i < hidden.in; ++i) df[i] += df_local[std::size_t(i)];
    }
};

struct DecoderParams {
    int feature_dim = 8;  // D: per-point feature width
    int hidden = 32;      // H: encoder/head width
    std::vector<EncoderMlp> encoders;  // one per pyramid level
    HeadMlp sdf_head;
    HeadMlp mask_head;

    int level_count() const { return int(encoders.size()); }

    static DecoderParams zeros(int feature_dim, int levels, int hidden) {
        DecoderParams p;
        p.feature_dim = feature_dim;
        p.hidden = hidden;
        p.encoders.resize(std::size_t(levels));
        for (auto& e : p.encoders) {
            e.l1.resize(feature_dim + 3, hidden);
            e.l2.resize(hidden, hidden);
        }
        p.sdf_head.hidden.resize(hidden, hidden);
        p.sdf_head.out.resize(hidden, 1);
        p.mask_head.hidden.resize(hidden, hidden);
        p.mask_head.out.resize(hidden, 1);
        return p;
    }

    static DecoderParams random_init(int feature_dim, int levels, int hidden,
                                     std::uint64_t seed) {
        DecoderParams p = zeros(feature_dim, levels, hidden);
        std::mt19937_64 rng(seed);
        auto fill = [&rng](DenseLayer& l) {
            std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(double(l.in)));
            for (double& w : l.W) w = dist(rng);
            for (double& b : l.b) b = 0.0;
        };
        for (auto& e : p.encoders) {
            fill(e.l1);
            fill(e.l2);
        }
        fill(p.sdf_head.hidden);
        fill(p.sdf_head.out);
        fill(p.mask_head.hidden);
        fill(p.mask_head.out);
        return p;
    }

    template <typename Fn>
    void for_each_layer(Fn&& fn) {
        for (auto& e : encoders) {
            fn(e.l1);
            fn(e.l2);
        }
        fn(sdf_head.hidden);
        fn(sdf_head.out);
        fn(mask_head.hidden);
        fn(mask_head.out);
    }
    template <typename Fn>
    void for_each_layer(Fn&& fn) const {
        for (const auto& e : encoders) {
            fn(e.l1);
            fn(e.l2);
        }
        fn(sdf_head.hidden);
        fn(sdf_head.out);
        fn(mask_head.hidden);
        fn(mask_head.out);
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for_each_layer([&n](const DenseLayer& l) { n += l.W.size() + l.b.size(); });
        return n;
    }

    std::vector<double> flatten() const {
        std::vector<double> flat;
        flat.reserve(param_count());
        for_each_layer([&flat](const DenseLayer& l) {
            flat.insert(flat.end(), l.W.begin(), l.W.end());
            flat.insert(flat.end(), l.b.begin(), l.b.end());
        });
        return flat;
    }

    void unflatten(const std::vector<double>& flat) {
        std::size_t pos = 0;
        for_each_layer([&flat, &pos](DenseLayer& l) {
            std::copy_n(flat.begin() + std::ptrdiff_t(pos), l.W.size(), l.W.begin());
            pos += l.W.size();
            std::copy_n(flat.begin() + std::ptrdiff_t(pos), l.b.size(), l.b.begin());
            pos += l.b.size();
        });
        if (pos != flat.size())
            throw InvalidSpecError("flat parameter vector size mismatch");
    }

    DecoderParams shaped_zeros() const {
        return zeros(feature_dim, level_count(), hidden);
    }

    void zero() {
        for_each_layer([](DenseLayer& l) {
            std::fill(l.W.begin(), l.W.end(), 0.0);
            std::fill(l.b.begin(), l.b.end(), 0.0);
        });
    }
};

}  // namespace sfr
