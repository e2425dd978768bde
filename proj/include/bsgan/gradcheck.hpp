#pragma once

// Central-difference gradient oracle used by the test suites.

#include <cmath>
#include <functional>
#include <optional>

#include "bsgan/nn.hpp"

namespace bsgan {

/// d f / d x by central differences; f is evaluated at perturbed copies of x.
inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Tensor& x, double h = 1e-4) {
    Tensor g(x.shape());
    Tensor probe = x;
    for (std::size_t i = 0; i < x.size(); ++i) {
        probe[i] = x[i] + h;
        const double up = f(probe);
        probe[i] = x[i] - h;
        const double down = f(probe);
        probe[i] = x[i];
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

inline Tensor finite_diff_grad(const std::function<double(const Tensor&)>& f, const Parameter& p, double h = 1e-4) {
    return finite_diff_grad(f, p.value, h);
}

/// In-place variant for tensors buried inside a model: perturbs `x` itself and calls `f()`.
/// When `coords` is given only those entries are probed; the others stay zero.
inline Tensor finite_diff_grad_inplace(const std::function<double()>& f, Tensor& x, double h = 1e-4,
                                       const std::optional<std::vector<std::size_t>>& coords = std::nullopt) {
    Tensor g(x.shape());
    auto probe = [&](std::size_t i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double up = f();
        x[i] = orig - h;
        const double down = f();
        x[i] = orig;
        g[i] = (up - down) / (2.0 * h);
    };
    if (coords) {
        for (std::size_t i : *coords) probe(i);
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) probe(i);
    }
    return g;
}

/// Central differences for piecewise-linear networks. Where the forward and backward
/// one-sided slopes disagree a kink lies inside the stencil, and the true derivative at x is
/// one of the two one-sided slopes rather than their average; there the estimate closest to
/// `analytic` (central, forward or backward) is returned. Elsewhere this is plain central
/// differencing, so a wrong analytic gradient still shows up on every smooth coordinate.
inline Tensor finite_diff_grad_kink_aware(const std::function<double()>& f, Tensor& x, const Tensor& analytic,
                                          double h = 1e-5) {
    x.require_same_shape(analytic, "finite_diff_grad_kink_aware");
    Tensor g(x.shape());
    const double f0 = f();
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + h;
        const double up = f();
        x[i] = orig - h;
        const double down = f();
        x[i] = orig;
        const double fwd = (up - f0) / h, bwd = (f0 - down) / h, central = (up - down) / (2.0 * h);
        g[i] = central;
        if (std::abs(fwd - bwd) > 1e-8 + 1e-4 * std::max(std::abs(fwd), std::abs(bwd)))
            for (double candidate : {fwd, bwd})
                if (std::abs(candidate - analytic[i]) < std::abs(g[i] - analytic[i])) g[i] = candidate;
    }
    return g;
}

/// ||a - b|| / max(||a||, ||b||), 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ShapeError("relative_error: length mismatch");
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    const double denom = std::sqrt(std::max(na, nb));
    return denom == 0.0 ? 0.0 : std::sqrt(diff) / denom;
}

inline double relative_error(const Tensor& a, const Tensor& b) {
    a.require_same_shape(b, "relative_error");
    return relative_error(a.values(), b.values());
}

}  // namespace bsgan
