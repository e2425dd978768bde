#pragma once

#include <cmath>

#include "bsgan/nn.hpp"

namespace bsgan {

struct AdamHyper {
    double lr = 0.0008;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const {
        if (!(lr > 0.0)) throw ConfigError("adam: lr must be positive");
        if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("adam: beta1 must lie in (0,1)");
        if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("adam: beta2 must lie in (0,1)");
        if (!(eps > 0.0)) throw ConfigError("adam: eps must be positive");
    }
};

/// Bias-corrected Adam update. Consumes and zeroes p.grad.
inline void adam_step(Parameter& p, const AdamHyper& hyper) {
    if (!p.grad.all_finite()) throw NumericError("adam_step: non-finite gradient in " + p.name);
    ++p.step_count;
    const double t = static_cast<double>(p.step_count);
    const double c1 = 1.0 - std::pow(hyper.beta1, t);
    const double c2 = 1.0 - std::pow(hyper.beta2, t);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
        const double g = p.grad[i];
        p.adam_m[i] = hyper.beta1 * p.adam_m[i] + (1.0 - hyper.beta1) * g;
        p.adam_v[i] = hyper.beta2 * p.adam_v[i] + (1.0 - hyper.beta2) * g * g;
        const double m_hat = p.adam_m[i] / c1;
        const double v_hat = p.adam_v[i] / c2;
        p.value[i] -= hyper.lr * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
    p.zero_grad();
}

inline void adam_step(const ParamRefs& params, const AdamHyper& hyper) {
    for (Parameter* p : params) adam_step(*p, hyper);
}

inline void zero_grads(const ParamRefs& params) {
    for (Parameter* p : params) p->zero_grad();
}

}  // namespace bsgan
