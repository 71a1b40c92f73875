#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "ucf/common.hpp"

// Minimal dense tensor with reverse-mode differentiation. 64-bit floats
// throughout; row-major storage; the recorded graph lives in the tensors
// themselves (freed when the loss value goes out of scope). Dense GEMM
// kernels are delegated to Eigen.

namespace ucf {

using Shape = std::vector<std::size_t>;

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first accumulation
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

inline bool& autograd_flag() {
    thread_local bool enabled = true;
    return enabled;
}

inline std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out += std::to_string(s[i]);
        if (i + 1 < s.size()) out += "x";
    }
    return out + "]";
}

inline std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
}

}  // namespace detail

inline bool autograd_enabled() { return detail::autograd_flag(); }

// RAII scope that disables graph recording (inference / oracle evaluation).
struct NoGradGuard {
    NoGradGuard() : prev_(detail::autograd_flag()) { detail::autograd_flag() = false; }
    ~NoGradGuard() { detail::autograd_flag() = prev_; }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool prev_;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
        for (std::size_t d : shape)
            if (d == 0) throw ShapeError("zero dimension in shape " + detail::shape_str(shape));
        if (detail::shape_numel(shape) != data.size())
            throw ShapeError("shape " + detail::shape_str(shape) + " does not match data length " +
                             std::to_string(data.size()));
        Tensor t;
        t.n_ = std::make_shared<detail::Node>();
        t.n_->shape = std::move(shape);
        t.n_->value = std::move(data);
        t.n_->requires_grad = requires_grad;
        return t;
    }

    static Tensor zeros(Shape shape, bool requires_grad = false) {
        std::size_t n = detail::shape_numel(shape);
        return from_data(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
    }

    static Tensor full(Shape shape, double v, bool requires_grad = false) {
        std::size_t n = detail::shape_numel(shape);
        return from_data(std::move(shape), std::vector<double>(n, v), requires_grad);
    }

    static Tensor scalar(double v, bool requires_grad = false) {
        return from_data({1}, {v}, requires_grad);
    }

    bool valid() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    std::size_t numel() const { return n_->value.size(); }
    const std::vector<double>& data() const { return n_->value; }
    // Direct mutable access for initialization and optimizer updates;
    // mutations here are not recorded on any tape.
    std::vector<double>& raw() { return n_->value; }

    bool requires_grad() const { return n_->requires_grad; }
    void set_requires_grad(bool rg) { n_->requires_grad = rg; }

    bool has_grad() const { return !n_->grad.empty(); }
    const std::vector<double>& grad() const {
        if (n_->grad.empty()) throw ContractError("gradient not populated");
        return n_->grad;
    }
    std::vector<double>& grad_ref() {
        n_->ensure_grad();
        return n_->grad;
    }
    void zero_grad() { n_->grad.clear(); }

    double item() const {
        if (numel() != 1) throw ContractError("item() on non-scalar tensor " +
                                              detail::shape_str(shape()));
        return n_->value[0];
    }

    std::shared_ptr<detail::Node> node() const { return n_; }

private:
    std::shared_ptr<detail::Node> n_;
};

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<RowMat>;
using CMapRM = Eigen::Map<const RowMat>;

inline Tensor make_result(Shape shape, std::vector<double> value,
                          std::vector<Tensor> inputs,
                          std::function<void(Node&)> backprop) {
    Tensor out = Tensor::from_data(std::move(shape), std::move(value));
    bool record = autograd_flag();
    bool any_rg = false;
    for (const Tensor& t : inputs) any_rg = any_rg || t.requires_grad();
    if (record && any_rg) {
        auto node = out.node();
        node->requires_grad = true;
        node->parents.reserve(inputs.size());
        for (const Tensor& t : inputs) node->parents.push_back(t.node());
        node->backprop = std::move(backprop);
    }
    return out;
}

inline void accum(const std::shared_ptr<Node>& p, std::size_t i, double g) {
    p->grad[i] += g;
}

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

inline void require_rank(const Tensor& t, std::size_t r, const char* op) {
    if (t.shape().size() != r)
        throw ShapeError(std::string(op) + ": expected rank " + std::to_string(r) + ", got " +
                         shape_str(t.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// element-wise ops

inline Tensor add(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + b.data()[i];
    return detail::make_result(a.shape(), std::move(v), {a, b}, [](detail::Node& out) {
        auto& pa = out.parents[0];
        auto& pb = out.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < out.grad.size(); ++i) pa->grad[i] += out.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < out.grad.size(); ++i) pb->grad[i] += out.grad[i];
        }
    });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "sub");
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] - b.data()[i];
    return detail::make_result(a.shape(), std::move(v), {a, b}, [](detail::Node& out) {
        auto& pa = out.parents[0];
        auto& pb = out.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < out.grad.size(); ++i) pa->grad[i] += out.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < out.grad.size(); ++i) pb->grad[i] -= out.grad[i];
        }
    });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "mul");
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * b.data()[i];
    std::vector<double> av = a.data(), bv = b.data();
    return detail::make_result(a.shape(), std::move(v), {a, b},
                               [av = std::move(av), bv = std::move(bv)](detail::Node& out) {
        auto& pa = out.parents[0];
        auto& pb = out.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < out.grad.size(); ++i) pa->grad[i] += out.grad[i] * bv[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < out.grad.size(); ++i) pb->grad[i] += out.grad[i] * av[i];
        }
    });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "div");
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] / b.data()[i];
    std::vector<double> av = a.data(), bv = b.data();
    return detail::make_result(a.shape(), std::move(v), {a, b},
                               [av = std::move(av), bv = std::move(bv)](detail::Node& out) {
        auto& pa = out.parents[0];
        auto& pb = out.parents[1];
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < out.grad.size(); ++i) pa->grad[i] += out.grad[i] / bv[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < out.grad.size(); ++i)
                pb->grad[i] -= out.grad[i] * av[i] / (bv[i] * bv[i]);
        }
    });
}

inline Tensor scale(const Tensor& a, double c) {
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] * c;
    return detail::make_result(a.shape(), std::move(v), {a}, [c](detail::Node& out) {
        auto& pa = out.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < out.grad.size(); ++i) pa->grad[i] += out.grad[i] * c;
    });
}

inline Tensor add_scalar(const Tensor& a, double c) {
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] + c;
    return detail::make_result(a.shape(), std::move(v), {a}, [](detail::Node& out) {
        auto& pa = out.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < out.grad.size(); ++i) pa->grad[i] += out.grad[i];
    });
}

inline Tensor minimum(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "minimum");
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::min(a.data()[i], b.data()[i]);
    std::vector<double> av = a.data(), bv = b.data();
    return detail::make_result(a.shape(), std::move(v), {a, b},
                               [av = std::move(av), bv = std::move(bv)](detail::Node& out) {
        auto& pa = out.parents[0];
        auto& pb = out.parents[1];
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            if (av[i] <= bv[i]) {  // ties route to the first argument
                if (pa->requires_grad) { pa->ensure_grad(); pa->grad[i] += out.grad[i]; }
            } else if (pb->requires_grad) {
                pb->ensure_grad();
                pb->grad[i] += out.grad[i];
            }
        }
    });
}

inline Tensor maximum(const Tensor& a, const Tensor& b) {
    detail::require_same_shape(a, b, "maximum");
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::max(a.data()[i], b.data()[i]);
    std::vector<double> av = a.data(), bv = b.data();
    return detail::make_result(a.shape(), std::move(v), {a, b},
                               [av = std::move(av), bv = std::move(bv)](detail::Node& out) {
        auto& pa = out.parents[0];
        auto& pb = out.parents[1];
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            if (av[i] >= bv[i]) {
                if (pa->requires_grad) { pa->ensure_grad(); pa->grad[i] += out.grad[i]; }
            } else if (pb->requires_grad) {
                pb->ensure_grad();
                pb->grad[i] += out.grad[i];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// nonlinearities

inline Tensor relu(const Tensor& a) {
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
    std::vector<double> av = a.data();
    return detail::make_result(a.shape(), std::move(v), {a},
                               [av = std::move(av)](detail::Node& out) {
        auto& pa = out.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < out.grad.size(); ++i)
            if (av[i] > 0.0) pa->grad[i] += out.grad[i];
    });
}

// Exact (erf-based) GELU; smooth everywhere, which keeps finite-difference
// gradient checks clean.
inline Tensor gelu(const Tensor& a) {
    constexpr double inv_sqrt2 = 0.7071067811865475244;
    constexpr double inv_sqrt2pi = 0.3989422804014326779;
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double x = a.data()[i];
        v[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    }
    std::vector<double> av = a.data();
    return detail::make_result(a.shape(), std::move(v), {a},
                               [av = std::move(av)](detail::Node& out) {
        auto& pa = out.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            double x = av[i];
            double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            pa->grad[i] += out.grad[i] * (cdf + x * pdf);
        }
    });
}

inline Tensor sigmoid(const Tensor& a) {
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double x = a.data()[i];
        v[i] = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
    }
    std::vector<double> yv = v;
    return detail::make_result(a.shape(), std::move(v), {a},
                               [yv = std::move(yv)](detail::Node& out) {
        auto& pa = out.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < out.grad.size(); ++i)
            pa->grad[i] += out.grad[i] * yv[i] * (1.0 - yv[i]);
    });
}

inline Tensor abs_val(const Tensor& a) {
    std::vector<double> v(a.numel());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::abs(a.data()[i]);
    std::vector<double> av = a.data();
    return detail::make_result(a.shape(), std::move(v), {a},
                               [av = std::move(av)](detail::Node& out) {
        auto& pa = out.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < out.grad.size(); ++i) {
            double s = av[i] > 0.0 ? 1.0 : (av[i] < 0.0 ? -1.0 : 0.0);
            pa->grad[i] += out.grad[i] * s;
        }
    });
}

// ---------------------------------------------------------------------------
// reductions

inline Tensor sum(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    return detail::make_result({1}, {s}, {a}, [](detail::Node& out) {
        auto& pa = out.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += out.grad[0];
    });
}

inline Tensor mean(const Tensor& a) {
    double s = 0.0;
    for (double x : a.data()) s += x;
    double n = static_cast<double>(a.numel());
    return detail::make_result({1}, {s / n}, {a}, [n](detail::Node& out) {
        auto& pa = out.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < pa->grad.size(); ++i) pa->grad[i] += out.grad[0] / n;
    });
}

// ---------------------------------------------------------------------------
// linear algebra

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    detail::require_rank(a, 2, "matmul");
    detail::require_rank(b, 2, "matmul");
    const std::size_t m = a.shape()[0], k = a.shape()[1];
    const std::size_t k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw ShapeError("matmul: inner dimensions disagree, " + detail::shape_str(a.shape()) +
                         " x " + detail::shape_str(b.shape()));
    std::vector<double> v(m * n);
    {
        detail::CMapRM A(a.data().data(), m, k);
        detail::CMapRM B(b.data().data(), k, n);
        detail::MapRM C(v.data(), m, n);
        C.noalias() = A * B;
    }
    std::vector<double> av = a.data(), bv = b.data();
    return detail::make_result({m, n}, std::move(v), {a, b},
                               [av = std::move(av), bv = std::move(bv), m, k, n](detail::Node& out) {
        auto& pa = out.parents[0];
        auto& pb = out.parents[1];
        detail::CMapRM G(out.grad.data(), m, n);
        if (pa->requires_grad) {
            pa->ensure_grad();
            detail::CMapRM B(bv.data(), k, n);
            detail::MapRM GA(pa->grad.data(), m, k);
            GA.noalias() += G * B.transpose();
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            detail::CMapRM A(av.data(), m, k);
            detail::MapRM GB(pb->grad.data(), k, n);
            GB.noalias() += A.transpose() * G;
        }
    });
}

inline Tensor transpose2d(const Tensor& a) {
    detail::require_rank(a, 2, "transpose2d");
    const std::size_t m = a.shape()[0], n = a.shape()[1];
    std::vector<double> v(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) v[j * m + i] = a.data()[i * n + j];
    return detail::make_result({n, m}, std::move(v), {a}, [m, n](detail::Node& out) {
        auto& pa = out.parents[0];
        if (!pa->requires_grad) return;
        pa->ensure_grad();
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) pa->grad[i * n + j] += out.grad[j * m + i];
    });
}

// Bias broadcast over the last dimension of a [R x d] matrix.
inline Tensor add_row_bias(const Tensor& x, const Tensor& b) {
    detail::require_rank(x, 2, "add_row_bias");
    detail::require_rank(b, 1, "add_row_bias");
    const std::size_t r = x.shape()[0], d = x.shape()[1];
    if (b.shape()[0] != d)
        throw ShapeError("add_row_bias: bias length " + std::to_string(b.shape()[0]) +
                         " vs row width " + std::to_string(d));
    std::vector<double> v(r * d);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < d; ++j) v[i * d + j] = x.data()[i * d + j] + b.data()[j];
    return detail::make_result(x.shape(), std::move(v), {x, b}, [r, d](detail::Node& out) {
        auto& px = out.parents[0];
        auto& pb = out.parents[1];
        if (px->requires_grad) {
            px->ensure_grad();
            for (std::size_t i = 0; i < out.grad.size(); ++i) px->grad[i] += out.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < r; ++i)
                for (std::size_t j = 0; j < d; ++j) pb->grad[j] += out.grad[i * d + j];
        }
    });
}

// Bias broadcast per channel of a [C x H x W] feature map.
inline Tensor add_channel_bias(const Tensor& x, const Tensor& b) {
    detail::require_rank(x, 3, "add_channel_bias");
    detail::require_rank(b, 1, "add_channel_bias");
    const std::size_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
    if (b.shape()[0] != c)
        throw ShapeError("add_channel_bias: bias length " + std::to_string(b.shape()[0]) +
                         " vs channels " + std::to_string(c));
    std::vector<double> v(x.numel());
    for (std::size_t ci = 0; ci < c; ++ci)
        for (std::size_t i = 0; i < hw; ++i) v[ci * hw + i] = x.data()[ci * hw + i] + b.data()[ci];
    return detail::make_result(x.shape(), std::move(v), {x, b}, [c, hw](detail::Node& out) {
        auto& px = out.parents[0];
        auto& pb = out.parents[1];
        if (px->requires_grad) {
            px->ensure_grad();
            for (std::size_t i = 0; i < out.grad.size(); ++i) px->grad[i] += out.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t ci = 0; ci < c; ++ci)
                for (std::size_t i = 0; i < hw; ++i) pb->grad[ci] += out.grad[ci * hw + i];
        }
    });
}

// ---------------------------------------------------------------------------
// conv2d (cross-correlation, zero padding) via im2col + GEMM

inline Tensor conv2d(const Tensor& input, const Tensor& kernels, std::size_t stride,
                     std::size_t padding) {
    detail::require_rank(input, 3, "conv2d input");
    detail::require_rank(kernels, 4, "conv2d kernels");
    if (stride == 0) throw ShapeError("conv2d: stride must be positive");
    const std::size_t cin = input.shape()[0], h = input.shape()[1], w = input.shape()[2];
    const std::size_t cout = kernels.shape()[0], kcin = kernels.shape()[1];
    const std::size_t kh = kernels.shape()[2], kw = kernels.shape()[3];
    if (kcin != cin)
        throw ShapeError("conv2d: kernel channels " + std::to_string(kcin) + " vs input channels " +
                         std::to_string(cin));
    if (kh != kw) throw ShapeError("conv2d: non-square kernel");
    const std::size_t k = kh;
    if (h + 2 * padding < k || w + 2 * padding < k)
        throw ShapeError("conv2d: non-positive output size for input " +
                         detail::shape_str(input.shape()) + ", kernel " + std::to_string(k) +
                         ", stride " + std::to_string(stride) + ", padding " +
                         std::to_string(padding));
    const std::size_t ho = (h + 2 * padding - k) / stride + 1;
    const std::size_t wo = (w + 2 * padding - k) / stride + 1;

    const std::size_t patch = cin * k * k;
    auto cols = std::make_shared<std::vector<double>>(patch * ho * wo, 0.0);
    const double* xd = input.data().data();
    for (std::size_t oy = 0; oy < ho; ++oy) {
        for (std::size_t ox = 0; ox < wo; ++ox) {
            const std::size_t col = oy * wo + ox;
            for (std::size_t ci = 0; ci < cin; ++ci) {
                for (std::size_t ky = 0; ky < k; ++ky) {
                    const long iy = static_cast<long>(oy * stride + ky) - static_cast<long>(padding);
                    if (iy < 0 || iy >= static_cast<long>(h)) continue;
                    for (std::size_t kx = 0; kx < k; ++kx) {
                        const long ix =
                            static_cast<long>(ox * stride + kx) - static_cast<long>(padding);
                        if (ix < 0 || ix >= static_cast<long>(w)) continue;
                        (*cols)[(ci * k * k + ky * k + kx) * (ho * wo) + col] =
                            xd[(ci * h + iy) * w + ix];
                    }
                }
            }
        }
    }

    std::vector<double> v(cout * ho * wo);
    {
        detail::CMapRM K(kernels.data().data(), cout, patch);
        detail::CMapRM Cm(cols->data(), patch, ho * wo);
        detail::MapRM O(v.data(), cout, ho * wo);
        O.noalias() = K * Cm;
    }

    std::vector<double> kv = kernels.data();
    return detail::make_result(
        {cout, ho, wo}, std::move(v), {input, kernels},
        [cols, kv = std::move(kv), cin, h, w, cout, k, stride, padding, ho, wo](detail::Node& out) {
            auto& px = out.parents[0];
            auto& pk = out.parents[1];
            const std::size_t patch = cin * k * k;
            detail::CMapRM G(out.grad.data(), cout, ho * wo);
            if (pk->requires_grad) {
                pk->ensure_grad();
                detail::CMapRM Cm(cols->data(), patch, ho * wo);
                detail::MapRM GK(pk->grad.data(), cout, patch);
                GK.noalias() += G * Cm.transpose();
            }
            if (px->requires_grad) {
                px->ensure_grad();
                detail::RowMat dcols(patch, ho * wo);
                detail::CMapRM K(kv.data(), cout, patch);
                dcols.noalias() = K.transpose() * G;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        const std::size_t col = oy * wo + ox;
                        for (std::size_t ci = 0; ci < cin; ++ci) {
                            for (std::size_t ky = 0; ky < k; ++ky) {
                                const long iy = static_cast<long>(oy * stride + ky) -
                                                static_cast<long>(padding);
                                if (iy < 0 || iy >= static_cast<long>(h)) continue;
                                for (std::size_t kx = 0; kx < k; ++kx) {
                                    const long ix = static_cast<long>(ox * stride + kx) -
                                                    static_cast<long>(padding);
                                    if (ix < 0 || ix >= static_cast<long>(w)) continue;
                                    px->grad[(ci * h + iy) * w + ix] +=
                                        dcols(ci * k * k + ky * k + kx, col);
                                }
                            }
                        }
                    }
                }
            }
        });
}

// ---------------------------------------------------------------------------
// softmax / layernorm

inline Tensor softmax_rows(const Tensor& x) {
    detail::require_rank(x, 2, "softmax_rows");
    const std::size_t r = x.shape()[0], m = x.shape()[1];
    std::vector<double> v(r * m);
    for (std::size_t i = 0; i < r; ++i) {
        const double* row = x.data().data() + i * m;
        double mx = row[0];
        for (std::size_t j = 1; j < m; ++j) mx = std::max(mx, row[j]);
        double s = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            v[i * m + j] = std::exp(row[j] - mx);
            s += v[i * m + j];
        }
        for (std::size_t j = 0; j < m; ++j) v[i * m + j] /= s;
    }
    std::vector<double> yv = v;
    return detail::make_result(x.shape(), std::move(v), {x},
                               [yv = std::move(yv), r, m](detail::Node& out) {
        auto& px = out.parents[0];
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t i = 0; i < r; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < m; ++j) dot += out.grad[i * m + j] * yv[i * m + j];
            for (std::size_t j = 0; j < m; ++j)
                px->grad[i * m + j] += yv[i * m + j] * (out.grad[i * m + j] - dot);
        }
    });
}

// Row-wise normalization over the last dimension, then affine by gain/bias.
inline Tensor layernorm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
    detail::require_rank(gain, 1, "layernorm gain");
    detail::require_rank(bias, 1, "layernorm bias");
    if (x.shape().empty()) throw ShapeError("layernorm: scalar input");
    const std::size_t d = x.shape().back();
    if (d == 0 || gain.shape()[0] != d || bias.shape()[0] != d)
        throw ShapeError("layernorm: last dim " + std::to_string(d) + " vs gain " +
                         std::to_string(gain.shape()[0]) + " / bias " +
                         std::to_string(bias.shape()[0]));
    const std::size_t rows = x.numel() / d;
    std::vector<double> v(x.numel());
    auto xhat = std::make_shared<std::vector<double>>(x.numel());
    auto inv_std = std::make_shared<std::vector<double>>(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        const double* row = x.data().data() + i * d;
        double mu = 0.0;
        for (std::size_t j = 0; j < d; ++j) mu += row[j];
        mu /= static_cast<double>(d);
        double var = 0.0;
        for (std::size_t j = 0; j < d; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(d);
        const double inv = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = inv;
        for (std::size_t j = 0; j < d; ++j) {
            (*xhat)[i * d + j] = (row[j] - mu) * inv;
            v[i * d + j] = gain.data()[j] * (*xhat)[i * d + j] + bias.data()[j];
        }
    }
    std::vector<double> gv = gain.data();
    return detail::make_result(x.shape(), std::move(v), {x, gain, bias},
                               [xhat, inv_std, gv = std::move(gv), rows, d](detail::Node& out) {
        auto& px = out.parents[0];
        auto& pg = out.parents[1];
        auto& pb = out.parents[2];
        if (pg->requires_grad) {
            pg->ensure_grad();
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < d; ++j)
                    pg->grad[j] += out.grad[i * d + j] * (*xhat)[i * d + j];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = 0; i < rows; ++i)
                for (std::size_t j = 0; j < d; ++j) pb->grad[j] += out.grad[i * d + j];
        }
        if (px->requires_grad) {
            px->ensure_grad();
            const double dn = static_cast<double>(d);
            for (std::size_t i = 0; i < rows; ++i) {
                double s1 = 0.0, s2 = 0.0;
                for (std::size_t j = 0; j < d; ++j) {
                    const double dxh = out.grad[i * d + j] * gv[j];
                    s1 += dxh;
                    s2 += dxh * (*xhat)[i * d + j];
                }
                for (std::size_t j = 0; j < d; ++j) {
                    const double dxh = out.grad[i * d + j] * gv[j];
                    px->grad[i * d + j] +=
                        (*inv_std)[i] * (dxh - s1 / dn - (*xhat)[i * d + j] * s2 / dn);
                }
            }
        }
    });
}

// ---------------------------------------------------------------------------
// shape ops

inline Tensor reshape(const Tensor& x, Shape shape) {
    if (detail::shape_numel(shape) != x.numel())
        throw ShapeError("reshape: " + detail::shape_str(x.shape()) + " -> " +
                         detail::shape_str(shape) + " changes element count");
    std::vector<double> v = x.data();
    return detail::make_result(std::move(shape), std::move(v), {x}, [](detail::Node& out) {
        auto& px = out.parents[0];
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t i = 0; i < out.grad.size(); ++i) px->grad[i] += out.grad[i];
    });
}

// [C x H x W] feature map -> [(H*W) x C] token matrix, row-major spatial order.
inline Tensor chw_to_tokens(const Tensor& x) {
    detail::require_rank(x, 3, "chw_to_tokens");
    const std::size_t c = x.shape()[0], hw = x.shape()[1] * x.shape()[2];
    std::vector<double> v(x.numel());
    for (std::size_t t = 0; t < hw; ++t)
        for (std::size_t ci = 0; ci < c; ++ci) v[t * c + ci] = x.data()[ci * hw + t];
    return detail::make_result({hw, c}, std::move(v), {x}, [c, hw](detail::Node& out) {
        auto& px = out.parents[0];
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t t = 0; t < hw; ++t)
            for (std::size_t ci = 0; ci < c; ++ci) px->grad[ci * hw + t] += out.grad[t * c + ci];
    });
}

inline Tensor concat_rows(const Tensor& a, const Tensor& b) {
    detail::require_rank(a, 2, "concat_rows");
    detail::require_rank(b, 2, "concat_rows");
    if (a.shape()[1] != b.shape()[1])
        throw ShapeError("concat_rows: channel mismatch " + detail::shape_str(a.shape()) + " vs " +
                         detail::shape_str(b.shape()));
    const std::size_t ra = a.shape()[0], rb = b.shape()[0], c = a.shape()[1];
    std::vector<double> v;
    v.reserve((ra + rb) * c);
    v.insert(v.end(), a.data().begin(), a.data().end());
    v.insert(v.end(), b.data().begin(), b.data().end());
    return detail::make_result({ra + rb, c}, std::move(v), {a, b}, [ra, c](detail::Node& out) {
        auto& pa = out.parents[0];
        auto& pb = out.parents[1];
        const std::size_t na = ra * c;
        if (pa->requires_grad) {
            pa->ensure_grad();
            for (std::size_t i = 0; i < na; ++i) pa->grad[i] += out.grad[i];
        }
        if (pb->requires_grad) {
            pb->ensure_grad();
            for (std::size_t i = na; i < out.grad.size(); ++i) pb->grad[i - na] += out.grad[i];
        }
    });
}

inline Tensor col_slice(const Tensor& x, std::size_t c0, std::size_t width) {
    detail::require_rank(x, 2, "col_slice");
    const std::size_t r = x.shape()[0], m = x.shape()[1];
    if (c0 + width > m)
        throw ShapeError("col_slice: [" + std::to_string(c0) + ", " + std::to_string(c0 + width) +
                         ") out of " + std::to_string(m) + " columns");
    std::vector<double> v(r * width);
    for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < width; ++j) v[i * width + j] = x.data()[i * m + c0 + j];
    return detail::make_result({r, width}, std::move(v), {x}, [r, m, c0, width](detail::Node& out) {
        auto& px = out.parents[0];
        if (!px->requires_grad) return;
        px->ensure_grad();
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < width; ++j)
                px->grad[i * m + c0 + j] += out.grad[i * width + j];
    });
}

inline Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols: empty input");
    const std::size_t r = parts[0].shape()[0];
    std::size_t total = 0;
    for (const Tensor& p : parts) {
        detail::require_rank(p, 2, "concat_cols");
        if (p.shape()[0] != r) throw ShapeError("concat_cols: row mismatch");
        total += p.shape()[1];
    }
    std::vector<double> v(r * total);
    std::size_t off = 0;
    std::vector<std::size_t> widths;
    for (const Tensor& p : parts) {
        const std::size_t w = p.shape()[1];
        for (std::size_t i = 0; i < r; ++i)
            for (std::size_t j = 0; j < w; ++j) v[i * total + off + j] = p.data()[i * w + j];
        widths.push_back(w);
        off += w;
    }
    return detail::make_result({r, total}, std::move(v), parts,
                               [r, total, widths = std::move(widths)](detail::Node& out) {
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < out.parents.size(); ++pi) {
            const std::size_t w = widths[pi];
            auto& p = out.parents[pi];
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < r; ++i)
                    for (std::size_t j = 0; j < w; ++j)
                        p->grad[i * w + j] += out.grad[i * total + off + j];
            }
            off += w;
        }
    });
}

// Flattened concatenation of arbitrary tensors into a rank-1 vector.
inline Tensor concat_flat(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw ShapeError("concat_flat: empty input");
    std::vector<double> v;
    std::vector<std::size_t> sizes;
    for (const Tensor& p : parts) {
        v.insert(v.end(), p.data().begin(), p.data().end());
        sizes.push_back(p.numel());
    }
    const std::size_t total = v.size();
    return detail::make_result({total}, std::move(v), parts,
                               [sizes = std::move(sizes)](detail::Node& out) {
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < out.parents.size(); ++pi) {
            auto& p = out.parents[pi];
            if (p->requires_grad) {
                p->ensure_grad();
                for (std::size_t i = 0; i < sizes[pi]; ++i) p->grad[i] += out.grad[off + i];
            }
            off += sizes[pi];
        }
    });
}

inline Tensor element(const Tensor& x, std::size_t i) {
    if (i >= x.numel()) throw ShapeError("element: index " + std::to_string(i) + " out of range");
    return detail::make_result({1}, {x.data()[i]}, {x}, [i](detail::Node& out) {
        auto& px = out.parents[0];
        if (!px->requires_grad) return;
        px->ensure_grad();
        px->grad[i] += out.grad[0];
    });
}

// ---------------------------------------------------------------------------
// attention: softmax(Q K^T / sqrt(d)) V

inline Tensor attention(const Tensor& query, const Tensor& key, const Tensor& value) {
    detail::require_rank(query, 2, "attention");
    detail::require_rank(key, 2, "attention");
    detail::require_rank(value, 2, "attention");
    if (query.shape()[1] != key.shape()[1])
        throw ShapeError("attention: query dim " + std::to_string(query.shape()[1]) +
                         " vs key dim " + std::to_string(key.shape()[1]));
    if (key.shape()[0] != value.shape()[0])
        throw ShapeError("attention: key rows " + std::to_string(key.shape()[0]) +
                         " vs value rows " + std::to_string(value.shape()[0]));
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(query.shape()[1]));
    Tensor scores = scale(matmul(query, transpose2d(key)), inv_sqrt_d);
    Tensor weights = softmax_rows(scores);
    return matmul(weights, value);
}

// ---------------------------------------------------------------------------
// reverse pass

inline void backward(const Tensor& loss) {
    if (loss.numel() != 1)
        throw ContractError("backward: loss must be scalar, got " +
                            detail::shape_str(loss.shape()));
    // Post-order topological sort (iterative); pointer-set via sorted vector,
    // graphs here are ~1e3-1e4 nodes.
    std::vector<detail::Node*> topo;
    std::vector<std::pair<detail::Node*, std::size_t>> stack;
    std::vector<detail::Node*> seen_sorted;
    auto mark = [&](detail::Node* n) {
        auto it = std::lower_bound(seen_sorted.begin(), seen_sorted.end(), n);
        if (it != seen_sorted.end() && *it == n) return false;
        seen_sorted.insert(it, n);
        return true;
    };
    if (mark(loss.node().get())) stack.emplace_back(loss.node().get(), 0);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            detail::Node* p = node->parents[idx++].get();
            if (mark(p)) stack.emplace_back(p, 0);
        } else {
            topo.push_back(node);
            stack.pop_back();
        }
    }
    // Clear stale gradients on interior nodes so repeated backward calls
    // accumulate exactly one contribution per call into the leaves.
    for (detail::Node* n : topo)
        if (n->backprop) n->grad.assign(n->value.size(), 0.0);
    loss.node()->ensure_grad();
    loss.node()->grad[0] += 1.0;
    for (auto it = topo.rbegin(); it != topo.rend(); ++it) {
        detail::Node* n = *it;
        if (n->backprop) n->backprop(*n);
    }
}

}  // namespace ucf
