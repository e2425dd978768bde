#pragma once

// Layer kernels with hand-derived backward passes. Each op comes as a pair of free
// functions (forward filling a context, backward consuming it) plus a small stateful
// layer wrapper that owns its parameters and the context of the last forward call.

#include <Eigen/Core>

#include <optional>
#include <string>
#include <vector>

#include "bsgan/tensor.hpp"

namespace bsgan {

struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor adam_m;
    Tensor adam_v;
    long step_count = 0;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(Tensor::zeros_like(value)),
          adam_m(Tensor::zeros_like(value)),
          adam_v(Tensor::zeros_like(value)) {}

    void zero_grad() { grad.fill(0.0); }
};

using ParamRefs = std::vector<Parameter*>;

/// Centered uniform init with bound sqrt(2 / fan_in).
inline Tensor init_weight(Shape shape, std::size_t fan_in, Rng& rng) {
    const double bound = std::sqrt(2.0 / static_cast<double>(fan_in));
    return random_tensor(std::move(shape), rng, -bound, bound);
}

namespace detail {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

inline std::size_t conv_out_extent(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad,
                                   const char* axis) {
    if (in + 2 * pad < k)
        throw ShapeError(std::string("conv2d: ") + axis + " extent " + std::to_string(in) + " + 2*pad " +
                         std::to_string(pad) + " is smaller than kernel " + std::to_string(k));
    return (in + 2 * pad - k) / stride + 1;
}

struct ConvGeometry {
    std::size_t n, c, h, w, o, kh, kw, stride, pad, oh, ow;
    std::size_t k() const { return c * kh * kw; }
    std::size_t p() const { return oh * ow; }
};

// Output columns ox whose source column ox*stride + k - pad lies inside [0, w).
inline std::pair<std::size_t, std::size_t> valid_range(std::size_t out, std::size_t in, std::size_t k,
                                                       std::size_t stride, std::size_t pad) {
    const long lo_num = static_cast<long>(pad) - static_cast<long>(k);
    const long lo = lo_num <= 0 ? 0 : (lo_num + static_cast<long>(stride) - 1) / static_cast<long>(stride);
    const long hi_num = static_cast<long>(in + pad) - static_cast<long>(k);
    long hi = hi_num <= 0 ? 0 : (hi_num + static_cast<long>(stride) - 1) / static_cast<long>(stride);
    hi = std::min<long>(hi, static_cast<long>(out));
    if (hi < lo) hi = lo;
    return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

// One sample: col is [c*kh*kw, oh*ow], row-major.
inline void im2col(const double* in, const ConvGeometry& g, double* col) {
    const std::size_t P = g.p();
    for (std::size_t ci = 0; ci < g.c; ++ci) {
        const double* plane = in + ci * g.h * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const auto [y0, y1] = valid_range(g.oh, g.h, ky, g.stride, g.pad);
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const auto [x0, x1] = valid_range(g.ow, g.w, kx, g.stride, g.pad);
                double* dst = col + ((ci * g.kh + ky) * g.kw + kx) * P;
                std::fill(dst, dst + y0 * g.ow, 0.0);
                for (std::size_t oy = y0; oy < y1; ++oy) {
                    double* drow = dst + oy * g.ow;
                    const double* srow = plane + (oy * g.stride + ky - g.pad) * g.w;
                    std::fill(drow, drow + x0, 0.0);
                    if (g.stride == 1) {
                        const double* s0 = srow + (x0 + kx - g.pad);
                        for (std::size_t ox = x0; ox < x1; ++ox) drow[ox] = s0[ox - x0];
                    } else {
                        for (std::size_t ox = x0; ox < x1; ++ox) drow[ox] = srow[ox * g.stride + kx - g.pad];
                    }
                    std::fill(drow + x1, drow + g.ow, 0.0);
                }
                std::fill(dst + y1 * g.ow, dst + P, 0.0);
            }
        }
    }
}

// Adjoint of im2col: accumulates into in.
inline void col2im(const double* col, const ConvGeometry& g, double* in) {
    const std::size_t P = g.p();
    for (std::size_t ci = 0; ci < g.c; ++ci) {
        double* plane = in + ci * g.h * g.w;
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
            const auto [y0, y1] = valid_range(g.oh, g.h, ky, g.stride, g.pad);
            for (std::size_t kx = 0; kx < g.kw; ++kx) {
                const auto [x0, x1] = valid_range(g.ow, g.w, kx, g.stride, g.pad);
                const double* src = col + ((ci * g.kh + ky) * g.kw + kx) * P;
                for (std::size_t oy = y0; oy < y1; ++oy) {
                    const double* srow = src + oy * g.ow;
                    double* irow = plane + (oy * g.stride + ky - g.pad) * g.w;
                    if (g.stride == 1) {
                        double* i0 = irow + (x0 + kx - g.pad);
                        for (std::size_t ox = x0; ox < x1; ++ox) i0[ox - x0] += srow[ox];
                    } else {
                        for (std::size_t ox = x0; ox < x1; ++ox) irow[ox * g.stride + kx - g.pad] += srow[ox];
                    }
                }
            }
        }
    }
}

// Per-thread scratch reused across calls; conv kernels are re-entrant per thread.
inline std::vector<double>& scratch(std::size_t n) {
    thread_local std::vector<double> buf;
    if (buf.size() < n) buf.resize(n);
    return buf;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// conv2d

struct Conv2dCtx {
    Tensor input;
    Tensor weight;
    std::size_t stride = 1;
    std::size_t pad = 0;
    bool valid = false;
};

struct Conv2dGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

inline detail::ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, const Tensor& bias,
                                          std::size_t stride, std::size_t pad) {
    require_rank(input, 4, "conv2d input");
    require_rank(weight, 4, "conv2d weight");
    require_rank(bias, 1, "conv2d bias");
    if (stride == 0) throw ShapeError("conv2d: stride must be positive");
    const auto& is = input.shape();
    const auto& ws = weight.shape();
    if (ws[1] != is[1])
        throw ShapeError("conv2d: channel axis mismatch, input has " + std::to_string(is[1]) +
                         " channels but weight expects " + std::to_string(ws[1]));
    if (bias.dim(0) != ws[0])
        throw ShapeError("conv2d: bias length " + std::to_string(bias.dim(0)) + " does not match " +
                         std::to_string(ws[0]) + " output channels");
    if (ws[2] % 2 == 0 || ws[3] % 2 == 0)
        throw ShapeError("conv2d: kernel height/width must be odd, got " + shape_str(ws));
    detail::ConvGeometry g{is[0], is[1], is[2], is[3], ws[0], ws[2], ws[3], stride, pad, 0, 0};
    g.oh = detail::conv_out_extent(g.h, g.kh, stride, pad, "height");
    g.ow = detail::conv_out_extent(g.w, g.kw, stride, pad, "width");
    return g;
}

/// Cross-correlation with zero padding. Output extent floor((h + 2 pad - k) / stride) + 1.
inline Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
                     std::size_t pad, Conv2dCtx* ctx = nullptr) {
    const auto g = conv_geometry(input, weight, bias, stride, pad);
    const std::size_t K = g.k(), P = g.p();
    detail::ConvGeometry one = g;
    one.n = 1;

    double* col = detail::scratch(K * P).data();
    Tensor out({g.n, g.o, g.oh, g.ow});
    const detail::ConstMatMap wm(weight.data(), g.o, K);
    for (std::size_t s = 0; s < g.n; ++s) {
        detail::im2col(input.data() + s * g.c * g.h * g.w, one, col);
        detail::MatMap om(out.data() + s * g.o * P, g.o, P);
        om.noalias() = wm * detail::ConstMatMap(col, K, P);
        for (std::size_t oc = 0; oc < g.o; ++oc) om.row(static_cast<Eigen::Index>(oc)).array() += bias[oc];
    }

    if (ctx) {
        ctx->input = input;
        ctx->weight = weight;
        ctx->stride = stride;
        ctx->pad = pad;
        ctx->valid = true;
    }
    return out;
}

inline Conv2dGrads conv2d_backward(const Conv2dCtx& ctx, const Tensor& grad_out) {
    if (!ctx.valid) throw std::logic_error("conv2d_backward: no saved forward context");
    const Tensor bias_shape(Shape{ctx.weight.dim(0)});
    const auto g = conv_geometry(ctx.input, ctx.weight, bias_shape, ctx.stride, ctx.pad);
    const Shape expect{g.n, g.o, g.oh, g.ow};
    if (grad_out.shape() != expect)
        throw ShapeError("conv2d_backward: grad_out shape " + shape_str(grad_out.shape()) + ", expected " +
                         shape_str(expect));
    const std::size_t K = g.k(), P = g.p();
    detail::ConvGeometry one = g;
    one.n = 1;

    Conv2dGrads grads{Tensor(ctx.input.shape()), Tensor(ctx.weight.shape()), Tensor(Shape{g.o})};
    double* col = detail::scratch(K * P).data();
    const detail::ConstMatMap wm(ctx.weight.data(), g.o, K);
    detail::MatMap gw(grads.weight.data(), g.o, K);
    for (std::size_t s = 0; s < g.n; ++s) {
        const detail::ConstMatMap gm(grad_out.data() + s * g.o * P, g.o, P);
        for (std::size_t oc = 0; oc < g.o; ++oc) grads.bias[oc] += gm.row(static_cast<Eigen::Index>(oc)).sum();
        detail::im2col(ctx.input.data() + s * g.c * g.h * g.w, one, col);
        gw.noalias() += gm * detail::ConstMatMap(col, K, P).transpose();
        detail::MatMap(col, K, P).noalias() = wm.transpose() * gm;
        detail::col2im(col, one, grads.input.data() + s * g.c * g.h * g.w);
    }
    return grads;
}

class Conv2d {
public:
    Conv2d() = default;
    Conv2d(const std::string& name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel, std::size_t stride,
           std::size_t pad, Rng& rng)
        : weight_(name + ".weight", init_weight({out_ch, in_ch, kernel, kernel}, in_ch * kernel * kernel, rng)),
          bias_(name + ".bias", Tensor(Shape{out_ch})),
          stride_(stride),
          pad_(pad) {}

    /// "same" 3x3 / 1x1 convolution
    static Conv2d same(const std::string& name, std::size_t in_ch, std::size_t out_ch, std::size_t kernel, Rng& rng) {
        return Conv2d(name, in_ch, out_ch, kernel, 1, (kernel - 1) / 2, rng);
    }

    Tensor forward(const Tensor& x) { return conv2d(x, weight_.value, bias_.value, stride_, pad_, &ctx_); }
    Tensor forward_const(const Tensor& x) const { return conv2d(x, weight_.value, bias_.value, stride_, pad_); }

    Tensor backward(const Tensor& grad_out) {
        auto g = conv2d_backward(ctx_, grad_out);
        weight_.grad += g.weight;
        bias_.grad += g.bias;
        return std::move(g.input);
    }

    void collect(ParamRefs& out) {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }

    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }
    const Parameter& weight() const { return weight_; }
    std::size_t out_channels() const { return weight_.value.dim(0); }

private:
    Parameter weight_;
    Parameter bias_;
    std::size_t stride_ = 1;
    std::size_t pad_ = 0;
    Conv2dCtx ctx_;
};

// ---------------------------------------------------------------------------
// activations

enum class Activation { identity, relu, leaky_relu, sigmoid, tanh };

inline constexpr double kLeakySlope = 0.2;

inline double activate_scalar(double v, Activation kind) {
    switch (kind) {
        case Activation::identity: return v;
        case Activation::relu: return v > 0.0 ? v : 0.0;
        case Activation::leaky_relu: return v > 0.0 ? v : kLeakySlope * v;
        case Activation::sigmoid:
            // split by sign so exp never overflows
            if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
            else {
                const double e = std::exp(v);
                return e / (1.0 + e);
            }
        case Activation::tanh: return std::tanh(v);
    }
    return v;
}

inline Tensor activate(const Tensor& x, Activation kind) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate_scalar(x[i], kind);
    return y;
}

/// Backward given the forward input x and output y.
inline Tensor activation_backward(const Tensor& x, const Tensor& y, const Tensor& grad_out, Activation kind) {
    grad_out.require_same_shape(x, "activation_backward");
    Tensor g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        double d = 1.0;
        switch (kind) {
            case Activation::identity: break;
            case Activation::relu: d = x[i] > 0.0 ? 1.0 : 0.0; break;
            case Activation::leaky_relu: d = x[i] > 0.0 ? 1.0 : kLeakySlope; break;
            case Activation::sigmoid: d = y[i] * (1.0 - y[i]); break;
            case Activation::tanh: d = 1.0 - y[i] * y[i]; break;
        }
        g[i] = grad_out[i] * d;
    }
    return g;
}

class ActivationLayer {
public:
    explicit ActivationLayer(Activation kind = Activation::relu) : kind_(kind) {}
    Tensor forward(const Tensor& x) {
        x_ = x;
        y_ = activate(x, kind_);
        return y_;
    }
    Tensor forward_const(const Tensor& x) const { return activate(x, kind_); }
    Tensor backward(const Tensor& g) const { return activation_backward(x_, y_, g, kind_); }
    Activation kind() const { return kind_; }

private:
    Activation kind_;
    Tensor x_, y_;
};

// ---------------------------------------------------------------------------
// dense

struct DenseGrads {
    Tensor input;
    Tensor weight;
    Tensor bias;
};

inline Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    require_rank(x, 2, "dense input");
    require_rank(weight, 2, "dense weight");
    require_rank(bias, 1, "dense bias");
    const std::size_t n = x.dim(0), a = x.dim(1), b = weight.dim(1);
    if (weight.dim(0) != a)
        throw ShapeError("dense: input feature axis has " + std::to_string(a) + " entries but weight expects " +
                         std::to_string(weight.dim(0)));
    if (bias.dim(0) != b)
        throw ShapeError("dense: bias length " + std::to_string(bias.dim(0)) + " vs output width " +
                         std::to_string(b));
    Tensor y({n, b});
    detail::MatMap ym(y.data(), n, b);
    ym.noalias() = detail::ConstMatMap(x.data(), n, a) * detail::ConstMatMap(weight.data(), a, b);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < b; ++j) y.at(i, j) += bias[j];
    return y;
}

inline DenseGrads dense_backward(const Tensor& x, const Tensor& weight, const Tensor& grad_out) {
    const std::size_t n = x.dim(0), a = x.dim(1), b = weight.dim(1);
    if (grad_out.shape() != Shape{n, b})
        throw ShapeError("dense_backward: grad_out shape " + shape_str(grad_out.shape()));
    DenseGrads g{Tensor(x.shape()), Tensor(weight.shape()), Tensor(Shape{b})};
    const detail::ConstMatMap gm(grad_out.data(), n, b);
    detail::MatMap(g.input.data(), n, a).noalias() = gm * detail::ConstMatMap(weight.data(), a, b).transpose();
    detail::MatMap(g.weight.data(), a, b).noalias() = detail::ConstMatMap(x.data(), n, a).transpose() * gm;
    for (std::size_t j = 0; j < b; ++j) g.bias[j] = gm.col(static_cast<Eigen::Index>(j)).sum();
    return g;
}

class Dense {
public:
    Dense() = default;
    Dense(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
        : weight_(name + ".weight", init_weight({in, out}, in, rng)), bias_(name + ".bias", Tensor(Shape{out})) {}

    Tensor forward(const Tensor& x) {
        x_ = x;
        return dense(x, weight_.value, bias_.value);
    }
    Tensor forward_const(const Tensor& x) const { return dense(x, weight_.value, bias_.value); }
    Tensor backward(const Tensor& grad_out) {
        auto g = dense_backward(x_, weight_.value, grad_out);
        weight_.grad += g.weight;
        bias_.grad += g.bias;
        return std::move(g.input);
    }
    void collect(ParamRefs& out) {
        out.push_back(&weight_);
        out.push_back(&bias_);
    }
    Parameter& weight() { return weight_; }
    Parameter& bias() { return bias_; }

private:
    Parameter weight_;
    Parameter bias_;
    Tensor x_;
};

// ---------------------------------------------------------------------------
// pooling, resampling, channel plumbing

inline Tensor global_avg_pool(const Tensor& x) {
    require_rank(x, 4, "global_avg_pool");
    const std::size_t n = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
    Tensor y({n, c});
    for (std::size_t i = 0; i < n * c; ++i) {
        const double* p = x.data() + i * hw;
        double s = 0.0;
        for (std::size_t k = 0; k < hw; ++k) s += p[k];
        y[i] = s / static_cast<double>(hw);
    }
    return y;
}

inline Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& grad_out) {
    const std::size_t n = input_shape[0], c = input_shape[1], hw = input_shape[2] * input_shape[3];
    if (grad_out.shape() != Shape{n, c}) throw ShapeError("global_avg_pool_backward: grad shape mismatch");
    Tensor g(input_shape);
    for (std::size_t i = 0; i < n * c; ++i) {
        const double v = grad_out[i] / static_cast<double>(hw);
        std::fill(g.data() + i * hw, g.data() + (i + 1) * hw, v);
    }
    return g;
}

inline Tensor upsample_nearest(const Tensor& x, std::size_t factor) {
    require_rank(x, 4, "upsample_nearest");
    if (factor == 0) throw ShapeError("upsample_nearest: factor must be positive");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor y({n, c, h * factor, w * factor});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t yy = 0; yy < h * factor; ++yy)
                for (std::size_t xx = 0; xx < w * factor; ++xx)
                    y.at(s, ch, yy, xx) = x.at(s, ch, yy / factor, xx / factor);
    return y;
}

inline Tensor upsample_nearest_backward(const Tensor& grad_out, std::size_t factor) {
    require_rank(grad_out, 4, "upsample_nearest_backward");
    const std::size_t n = grad_out.dim(0), c = grad_out.dim(1);
    if (grad_out.dim(2) % factor || grad_out.dim(3) % factor)
        throw ShapeError("upsample_nearest_backward: extents not divisible by factor");
    const std::size_t h = grad_out.dim(2) / factor, w = grad_out.dim(3) / factor;
    Tensor g({n, c, h, w});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t yy = 0; yy < h * factor; ++yy)
                for (std::size_t xx = 0; xx < w * factor; ++xx)
                    g.at(s, ch, yy / factor, xx / factor) += grad_out.at(s, ch, yy, xx);
    return g;
}

/// Non-overlapping mean pooling; left inverse of upsample_nearest.
inline Tensor avg_pool(const Tensor& x, std::size_t factor) {
    require_rank(x, 4, "avg_pool");
    if (factor == 0 || x.dim(2) % factor || x.dim(3) % factor)
        throw ShapeError("avg_pool: extents " + shape_str(x.shape()) + " not divisible by factor");
    Tensor y = upsample_nearest_backward(x, factor);
    y *= 1.0 / static_cast<double>(factor * factor);
    return y;
}

inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
    require_rank(a, 4, "concat_channels");
    require_rank(b, 4, "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw ShapeError("concat_channels: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    const std::size_t n = a.dim(0), ca = a.dim(1), cb = b.dim(1), hw = a.dim(2) * a.dim(3);
    Tensor y({n, ca + cb, a.dim(2), a.dim(3)});
    for (std::size_t s = 0; s < n; ++s) {
        std::copy_n(a.data() + s * ca * hw, ca * hw, y.data() + s * (ca + cb) * hw);
        std::copy_n(b.data() + s * cb * hw, cb * hw, y.data() + (s * (ca + cb) + ca) * hw);
    }
    return y;
}

/// Inverse of concat_channels: returns channels [0, first) and [first, c).
inline std::pair<Tensor, Tensor> split_channels(const Tensor& y, std::size_t first) {
    require_rank(y, 4, "split_channels");
    const std::size_t n = y.dim(0), c = y.dim(1), hw = y.dim(2) * y.dim(3);
    if (first > c) throw ShapeError("split_channels: split point beyond channel axis");
    Tensor a({n, first, y.dim(2), y.dim(3)}), b({n, c - first, y.dim(2), y.dim(3)});
    for (std::size_t s = 0; s < n; ++s) {
        std::copy_n(y.data() + s * c * hw, first * hw, a.data() + s * first * hw);
        std::copy_n(y.data() + (s * c + first) * hw, (c - first) * hw, b.data() + s * (c - first) * hw);
    }
    return {std::move(a), std::move(b)};
}

/// Rows [begin, end) of the batch axis.
inline Tensor slice_batch(const Tensor& x, std::size_t begin, std::size_t end) {
    if (x.rank() == 0 || end > x.dim(0) || begin > end) throw ShapeError("slice_batch: range out of bounds");
    const std::size_t per = x.size() / x.dim(0);
    Shape s = x.shape();
    s[0] = end - begin;
    std::vector<double> d(x.data() + begin * per, x.data() + end * per);
    return Tensor(std::move(s), std::move(d));
}

inline Tensor stack_batch(const std::vector<Tensor>& items) {
    if (items.empty()) throw ShapeError("stack_batch: empty list");
    Shape s = items.front().shape();
    s.insert(s.begin(), items.size());
    Tensor y(s);
    const std::size_t per = items.front().size();
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].shape() != items.front().shape()) throw ShapeError("stack_batch: ragged items");
        std::copy_n(items[i].data(), per, y.data() + i * per);
    }
    return y;
}

inline Tensor unstack_item(const Tensor& batch, std::size_t i) {
    Tensor t = slice_batch(batch, i, i + 1);
    Shape s(batch.shape().begin() + 1, batch.shape().end());
    return t.reshaped(std::move(s));
}

}  // namespace bsgan
