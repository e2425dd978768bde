#pragma once

// Equilibrium mathematics of the GAN value function on finite supports, independent of any
// network. Natural logarithms throughout; 0 log 0 := 0.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "bsgan/tensor.hpp"

namespace bsgan::theory {

class DiscreteDistribution {
public:
    explicit DiscreteDistribution(std::vector<double> probs) : p_(std::move(probs)) {
        if (p_.empty()) throw ConfigError("distribution: empty support");
        double s = 0.0;
        for (double v : p_) {
            if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("distribution: probabilities must be finite and >= 0");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-12) throw ConfigError("distribution: probabilities must sum to 1");
    }

    /// Normalizes non-negative weights.
    static DiscreteDistribution from_weights(std::vector<double> w) {
        double s = 0.0;
        for (double v : w) s += v;
        if (!(s > 0.0)) throw ConfigError("distribution: weights sum to zero");
        for (double& v : w) v /= s;
        // absorb the residual rounding into the largest entry
        double t = 0.0;
        for (double v : w) t += v;
        *std::max_element(w.begin(), w.end()) += 1.0 - t;
        return DiscreteDistribution(std::move(w));
    }

    std::size_t size() const { return p_.size(); }
    double operator[](std::size_t i) const { return p_[i]; }
    const std::vector<double>& probs() const { return p_; }

private:
    std::vector<double> p_;
};

inline void require_aligned(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    if (p.size() != q.size()) throw ShapeError("distributions are defined over different supports");
}

/// D*(x) = p_data(x) / (p_data(x) + p_g(x)); 0.5 where both vanish.
inline std::vector<double> optimal_discriminator(const DiscreteDistribution& p_data, const DiscreteDistribution& p_g) {
    require_aligned(p_data, p_g);
    std::vector<double> d(p_data.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        const double s = p_data[i] + p_g[i];
        d[i] = s > 0.0 ? p_data[i] / s : 0.5;
    }
    return d;
}

inline double kl_divergence(const DiscreteDistribution& p, const std::vector<double>& m) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) s += p[i] * std::log(p[i] / m[i]);
    return s;
}

/// Jensen-Shannon divergence in nats. Symmetric by construction (the mixture is formed
/// with a commutative sum and both halves are added in a fixed order of magnitude).
inline double js_divergence(const DiscreteDistribution& p, const DiscreteDistribution& q) {
    require_aligned(p, q);
    std::vector<double> m(p.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = 0.5 * (p[i] + q[i]);
    const double a = kl_divergence(p, m), b = kl_divergence(q, m);
    // rounding can push a disjoint pair a few ulps past ln 2
    return std::clamp(0.5 * (std::min(a, b) + std::max(a, b)), 0.0, std::numbers::ln2);
}

/// V = sum_x p_data(x) ln D(x) + p_g(x) ln(1 - D(x)); terms with zero mass contribute 0.
inline double value_function(const DiscreteDistribution& p_data, const DiscreteDistribution& p_g,
                             const std::vector<double>& D) {
    require_aligned(p_data, p_g);
    if (D.size() != p_data.size()) throw ShapeError("value_function: discriminator length mismatch");
    double v = 0.0;
    for (std::size_t i = 0; i < D.size(); ++i) {
        if (p_data[i] > 0.0) v += p_data[i] * std::log(D[i]);
        if (p_g[i] > 0.0) v += p_g[i] * std::log(1.0 - D[i]);
    }
    return v;
}

struct EquilibriumCheck {
    double value = 0.0;      // V(D*, G)
    double predicted = 0.0;  // -ln 4 + 2 JSD
    double residual = 0.0;
};

inline EquilibriumCheck check_equilibrium(const DiscreteDistribution& p_data, const DiscreteDistribution& p_g) {
    EquilibriumCheck r;
    r.value = value_function(p_data, p_g, optimal_discriminator(p_data, p_g));
    r.predicted = -std::log(4.0) + 2.0 * js_divergence(p_data, p_g);
    r.residual = std::abs(r.value - r.predicted);
    return r;
}

inline DiscreteDistribution random_histogram(Rng& rng, std::size_t bins, double zero_prob = 0.0) {
    std::vector<double> w(bins);
    for (double& v : w) v = uniform(rng, 0.0, 1.0) < zero_prob ? 0.0 : uniform(rng, 0.0, 1.0);
    if (std::all_of(w.begin(), w.end(), [](double v) { return v == 0.0; })) w[uniform_index(rng, bins)] = 1.0;
    return DiscreteDistribution::from_weights(std::move(w));
}

}  // namespace bsgan::theory
