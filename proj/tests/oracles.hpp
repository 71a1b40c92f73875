#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is written with plain loops and shares no code with the
// implementations under test.

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "ucf/common.hpp"
#include "ucf/geometry.hpp"
#include "ucf/tensor.hpp"

namespace oracle {

// --------------------------------------------------------------------------
// finite differences

inline std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                       const std::vector<double>& x, double h = 1e-6) {
    std::vector<double> g(x.size());
    std::vector<double> xp = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + h;
        const double fp = f(xp);
        xp[i] = x[i] - h;
        const double fm = f(xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

// Relative error with a unit floor so near-zero derivatives stay
// well-conditioned; for O(1) gradients this is plain relative error.
inline double grad_rel_err(double ad, double fd) {
    return std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
}

// Analytic-vs-FD check for an arbitrary scalar-valued graph builder.
// `build` must construct a fresh graph from the given tensors and return a
// scalar loss. Returns the worst grad_rel_err over all inputs.
inline double max_grad_err(const std::vector<ucf::Shape>& shapes,
                           const std::vector<std::vector<double>>& datas,
                           const std::function<ucf::Tensor(const std::vector<ucf::Tensor>&)>& build,
                           double h = 1e-6) {
    std::vector<ucf::Tensor> ts;
    ts.reserve(shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i)
        ts.push_back(ucf::Tensor::from_data(shapes[i], datas[i], true));
    ucf::Tensor loss = build(ts);
    ucf::backward(loss);
    double worst = 0.0;
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        auto f = [&](const std::vector<double>& x) {
            ucf::NoGradGuard ng;
            std::vector<ucf::Tensor> us;
            us.reserve(shapes.size());
            for (std::size_t j = 0; j < shapes.size(); ++j)
                us.push_back(ucf::Tensor::from_data(shapes[j], j == i ? x : datas[j]));
            return build(us).item();
        };
        const std::vector<double> fd = fd_gradient(f, datas[i], h);
        const std::vector<double>& ad = ts[i].grad();
        for (std::size_t k = 0; k < fd.size(); ++k)
            worst = std::max(worst, grad_rel_err(ad[k], fd[k]));
    }
    return worst;
}

// --------------------------------------------------------------------------
// random inputs for gradient sweeps

inline std::vector<double> uniform_vec(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

// Values with magnitude in [0.1, 1] and random sign — keeps relu/abs/min/max
// probes away from their kinks.
inline std::vector<double> offset_vec(std::mt19937_64& rng, std::size_t n) {
    std::uniform_real_distribution<double> mag(0.1, 1.0);
    std::uniform_int_distribution<int> sign(0, 1);
    std::vector<double> v(n);
    for (double& x : v) x = (sign(rng) ? 1.0 : -1.0) * mag(rng);
    return v;
}

// Per-op gradient sweep covering every differentiable op in the tensor
// library. Returns (op name, worst relative error) pairs. Each op's output is
// contracted against a fixed random weight tensor so the loss gradient is
// non-uniform over elements (a plain sum would hide permutation bugs in the
// shape ops); the weights are drawn once per op so the analytic and
// finite-difference passes see the same function.
inline std::vector<std::pair<std::string, double>> op_gradient_sweep(std::uint64_t seed) {
    std::vector<std::pair<std::string, double>> out;
    std::mt19937_64 rng(seed);

    auto run_n = [&](const std::string& name, const std::vector<ucf::Shape>& shapes,
                     const std::vector<std::vector<double>>& datas,
                     const std::function<ucf::Tensor(const std::vector<ucf::Tensor>&)>& op) {
        ucf::Shape oshape;
        {
            ucf::NoGradGuard ng;
            std::vector<ucf::Tensor> probe;
            for (std::size_t i = 0; i < shapes.size(); ++i)
                probe.push_back(ucf::Tensor::from_data(shapes[i], datas[i]));
            oshape = op(probe).shape();
        }
        std::vector<double> w = uniform_vec(rng, ucf::detail::shape_numel(oshape), -1.0, 1.0);
        double err = max_grad_err(shapes, datas, [&](const std::vector<ucf::Tensor>& ts) {
            return ucf::sum(ucf::mul(op(ts), ucf::Tensor::from_data(oshape, w)));
        });
        out.emplace_back(name, err);
    };
    auto run1 = [&](const std::string& name, const ucf::Shape& shape, std::vector<double> data,
                    const std::function<ucf::Tensor(const ucf::Tensor&)>& op) {
        run_n(name, {shape}, {std::move(data)},
              [op](const std::vector<ucf::Tensor>& ts) { return op(ts[0]); });
    };
    auto run2 = [&](const std::string& name, const ucf::Shape& sa, std::vector<double> da,
                    const ucf::Shape& sb, std::vector<double> db,
                    const std::function<ucf::Tensor(const ucf::Tensor&, const ucf::Tensor&)>& op) {
        run_n(name, {sa, sb}, {std::move(da), std::move(db)},
              [op](const std::vector<ucf::Tensor>& ts) { return op(ts[0], ts[1]); });
    };

    const ucf::Shape s23{2, 3};
    run2("add", s23, uniform_vec(rng, 6, -1, 1), s23, uniform_vec(rng, 6, -1, 1),
         [](const ucf::Tensor& a, const ucf::Tensor& b) { return ucf::add(a, b); });
    run2("sub", s23, uniform_vec(rng, 6, -1, 1), s23, uniform_vec(rng, 6, -1, 1),
         [](const ucf::Tensor& a, const ucf::Tensor& b) { return ucf::sub(a, b); });
    run2("mul", s23, uniform_vec(rng, 6, -1, 1), s23, uniform_vec(rng, 6, -1, 1),
         [](const ucf::Tensor& a, const ucf::Tensor& b) { return ucf::mul(a, b); });
    run2("div", s23, uniform_vec(rng, 6, -1, 1), s23, uniform_vec(rng, 6, 0.5, 1.5),
         [](const ucf::Tensor& a, const ucf::Tensor& b) { return ucf::div(a, b); });
    run1("scale", s23, uniform_vec(rng, 6, -1, 1),
         [](const ucf::Tensor& a) { return ucf::scale(a, -1.7); });
    run1("add_scalar", s23, uniform_vec(rng, 6, -1, 1),
         [](const ucf::Tensor& a) { return ucf::add_scalar(a, 0.3); });
    {
        std::vector<double> a = offset_vec(rng, 6);
        std::vector<double> b = a;
        std::uniform_real_distribution<double> delta(0.1, 0.5);
        std::uniform_int_distribution<int> sign(0, 1);
        for (double& x : b) x += (sign(rng) ? 1.0 : -1.0) * delta(rng);
        run2("minimum", s23, a, s23, b,
             [](const ucf::Tensor& p, const ucf::Tensor& q) { return ucf::minimum(p, q); });
        run2("maximum", s23, a, s23, b,
             [](const ucf::Tensor& p, const ucf::Tensor& q) { return ucf::maximum(p, q); });
    }
    run1("relu", s23, offset_vec(rng, 6), [](const ucf::Tensor& a) { return ucf::relu(a); });
    run1("gelu", s23, uniform_vec(rng, 6, -2, 2), [](const ucf::Tensor& a) { return ucf::gelu(a); });
    run1("sigmoid", s23, uniform_vec(rng, 6, -3, 3),
         [](const ucf::Tensor& a) { return ucf::sigmoid(a); });
    run1("abs", s23, offset_vec(rng, 6), [](const ucf::Tensor& a) { return ucf::abs_val(a); });
    run1("sum", s23, uniform_vec(rng, 6, -1, 1), [](const ucf::Tensor& a) { return ucf::sum(a); });
    run1("mean", s23, uniform_vec(rng, 6, -1, 1), [](const ucf::Tensor& a) { return ucf::mean(a); });
    run2("matmul", {3, 4}, uniform_vec(rng, 12, -1, 1), {4, 2}, uniform_vec(rng, 8, -1, 1),
         [](const ucf::Tensor& a, const ucf::Tensor& b) { return ucf::matmul(a, b); });
    run1("transpose2d", {3, 4}, uniform_vec(rng, 12, -1, 1),
         [](const ucf::Tensor& a) { return ucf::transpose2d(a); });
    run2("add_row_bias", {3, 4}, uniform_vec(rng, 12, -1, 1), {4}, uniform_vec(rng, 4, -1, 1),
         [](const ucf::Tensor& x, const ucf::Tensor& b) { return ucf::add_row_bias(x, b); });
    run2("add_channel_bias", {2, 3, 3}, uniform_vec(rng, 18, -1, 1), {2},
         uniform_vec(rng, 2, -1, 1),
         [](const ucf::Tensor& x, const ucf::Tensor& b) { return ucf::add_channel_bias(x, b); });
    run2("conv2d_s1p0", {2, 4, 4}, uniform_vec(rng, 32, -1, 1), {3, 2, 2, 2},
         uniform_vec(rng, 24, -1, 1),
         [](const ucf::Tensor& x, const ucf::Tensor& k) { return ucf::conv2d(x, k, 1, 0); });
    run2("conv2d_s2p1", {2, 5, 5}, uniform_vec(rng, 50, -1, 1), {3, 2, 3, 3},
         uniform_vec(rng, 54, -1, 1),
         [](const ucf::Tensor& x, const ucf::Tensor& k) { return ucf::conv2d(x, k, 2, 1); });
    run1("softmax_rows", {3, 5}, uniform_vec(rng, 15, -2, 2),
         [](const ucf::Tensor& a) { return ucf::softmax_rows(a); });
    run_n("layernorm", {{3, 4}, {4}, {4}},
          {uniform_vec(rng, 12, -1, 1), uniform_vec(rng, 4, 0.5, 1.5), uniform_vec(rng, 4, -1, 1)},
          [](const std::vector<ucf::Tensor>& ts) {
              return ucf::layernorm(ts[0], ts[1], ts[2], 1e-5);
          });
    run1("reshape", {2, 6}, uniform_vec(rng, 12, -1, 1),
         [](const ucf::Tensor& a) { return ucf::reshape(a, {3, 4}); });
    run1("chw_to_tokens", {3, 2, 2}, uniform_vec(rng, 12, -1, 1),
         [](const ucf::Tensor& a) { return ucf::chw_to_tokens(a); });
    run2("concat_rows", {2, 3}, uniform_vec(rng, 6, -1, 1), {4, 3}, uniform_vec(rng, 12, -1, 1),
         [](const ucf::Tensor& a, const ucf::Tensor& b) { return ucf::concat_rows(a, b); });
    run1("col_slice", {3, 6}, uniform_vec(rng, 18, -1, 1),
         [](const ucf::Tensor& a) { return ucf::col_slice(a, 1, 3); });
    run2("concat_cols", {3, 2}, uniform_vec(rng, 6, -1, 1), {3, 4}, uniform_vec(rng, 12, -1, 1),
         [](const ucf::Tensor& a, const ucf::Tensor& b) {
             return ucf::concat_cols({a, b});
         });
    run2("concat_flat", {2, 2}, uniform_vec(rng, 4, -1, 1), {3}, uniform_vec(rng, 3, -1, 1),
         [](const ucf::Tensor& a, const ucf::Tensor& b) {
             return ucf::concat_flat({a, b});
         });
    run1("element", {5}, uniform_vec(rng, 5, -1, 1),
         [](const ucf::Tensor& a) { return ucf::element(a, 3); });
    run_n("attention", {{2, 3}, {4, 3}, {4, 3}},
          {uniform_vec(rng, 6, -1, 1), uniform_vec(rng, 12, -1, 1), uniform_vec(rng, 12, -1, 1)},
          [](const std::vector<ucf::Tensor>& ts) {
              return ucf::attention(ts[0], ts[1], ts[2]);
          });
    return out;
}

// --------------------------------------------------------------------------
// conv2d reference: naive sliding window, zero padding, cross-correlation

inline std::vector<double> conv2d_ref(const std::vector<double>& x, std::size_t cin, std::size_t h,
                                      std::size_t w, const std::vector<double>& kern,
                                      std::size_t cout, std::size_t k, std::size_t stride,
                                      std::size_t pad, std::size_t& ho, std::size_t& wo) {
    ho = (h + 2 * pad - k) / stride + 1;
    wo = (w + 2 * pad - k) / stride + 1;
    std::vector<double> y(cout * ho * wo, 0.0);
    for (std::size_t co = 0; co < cout; ++co)
        for (std::size_t oy = 0; oy < ho; ++oy)
            for (std::size_t ox = 0; ox < wo; ++ox) {
                double acc = 0.0;
                for (std::size_t ci = 0; ci < cin; ++ci)
                    for (std::size_t ky = 0; ky < k; ++ky)
                        for (std::size_t kx = 0; kx < k; ++kx) {
                            const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(pad);
                            const long ix = static_cast<long>(ox * stride + kx) - static_cast<long>(pad);
                            if (iy < 0 || iy >= static_cast<long>(h) || ix < 0 ||
                                ix >= static_cast<long>(w))
                                continue;
                            acc += x[(ci * h + iy) * w + ix] *
                                   kern[((co * cin + ci) * k + ky) * k + kx];
                        }
                y[(co * ho + oy) * wo + ox] = acc;
            }
    return y;
}

// --------------------------------------------------------------------------
// attention reference: brute-force softmax(QK^T/sqrt(d)) V

inline std::vector<double> attention_ref(const std::vector<double>& q, std::size_t lq,
                                         const std::vector<double>& k, std::size_t lk,
                                         const std::vector<double>& v, std::size_t d,
                                         std::size_t dv) {
    std::vector<double> out(lq * dv, 0.0);
    const double inv = 1.0 / std::sqrt(static_cast<double>(d));
    for (std::size_t i = 0; i < lq; ++i) {
        std::vector<double> scores(lk);
        double mx = -1e300;
        for (std::size_t j = 0; j < lk; ++j) {
            double s = 0.0;
            for (std::size_t c = 0; c < d; ++c) s += q[i * d + c] * k[j * d + c];
            scores[j] = s * inv;
            mx = std::max(mx, scores[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < lk; ++j) {
            scores[j] = std::exp(scores[j] - mx);
            z += scores[j];
        }
        for (std::size_t j = 0; j < lk; ++j)
            for (std::size_t c = 0; c < dv; ++c) out[i * dv + c] += (scores[j] / z) * v[j * dv + c];
    }
    return out;
}

// --------------------------------------------------------------------------
// rasterized IOU over the unit square (pixel-center sampling; a box owns the
// half-open region [x1,x2) x [y1,y2), the same convention the frames use)

inline double raster_iou(const ucf::BoundingBox& a, const ucf::BoundingBox& b, int n = 1000) {
    long ia = 0, ib = 0, both = 0;
    for (int r = 0; r < n; ++r) {
        const double cy = (r + 0.5) / n;
        for (int c = 0; c < n; ++c) {
            const double cx = (c + 0.5) / n;
            const bool in_a = cx >= a.x1 && cx < a.x2 && cy >= a.y1 && cy < a.y2;
            const bool in_b = cx >= b.x1 && cx < b.x2 && cy >= b.y1 && cy < b.y2;
            ia += in_a;
            ib += in_b;
            both += in_a && in_b;
        }
    }
    const long uni = ia + ib - both;
    return uni == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(uni);
}

}  // namespace oracle
