#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "bsgan/nn.hpp"

namespace bsgan {

inline constexpr Activation kGenAct = Activation::leaky_relu;
inline constexpr Activation kDiscAct = Activation::leaky_relu;

// ---------------------------------------------------------------------------
// Residual block: out = act(conv3(act(conv3(x)))) + proj(x)

class ResidualBlock {
public:
    ResidualBlock() = default;
    ResidualBlock(const std::string& name, std::size_t in_ch, std::size_t out_ch, Rng& rng)
        : conv1_(Conv2d::same(name + ".conv1", in_ch, out_ch, 3, rng)),
          conv2_(Conv2d::same(name + ".conv2", out_ch, out_ch, 3, rng)),
          act1_(kGenAct),
          act2_(kGenAct) {
        if (in_ch != out_ch) proj_ = Conv2d::same(name + ".proj", in_ch, out_ch, 1, rng);
    }

    Tensor forward(const Tensor& x) {
        Tensor h = act2_.forward(conv2_.forward(act1_.forward(conv1_.forward(x))));
        h += proj_ ? proj_->forward(x) : x;
        return h;
    }

    Tensor forward_const(const Tensor& x) const {
        Tensor h = act2_.forward_const(conv2_.forward_const(act1_.forward_const(conv1_.forward_const(x))));
        h += proj_ ? proj_->forward_const(x) : x;
        return h;
    }

    Tensor backward(const Tensor& g) {
        Tensor gx = conv1_.backward(act1_.backward(conv2_.backward(act2_.backward(g))));
        gx += proj_ ? proj_->backward(g) : g;
        return gx;
    }

    void collect(ParamRefs& out) {
        conv1_.collect(out);
        conv2_.collect(out);
        if (proj_) proj_->collect(out);
    }

    bool has_projection() const { return proj_.has_value(); }
    std::size_t out_channels() const { return conv2_.out_channels(); }

private:
    Conv2d conv1_, conv2_;
    std::optional<Conv2d> proj_;
    ActivationLayer act1_, act2_;
};

// ---------------------------------------------------------------------------
// Squeeze-and-excitation: out[n,c] = x[n,c] * sigmoid(W2 relu(W1 gap(x)))[n,c]

class SeBlock {
public:
    SeBlock() = default;
    SeBlock(const std::string& name, std::size_t channels, std::size_t reduction, Rng& rng)
        : fc1_(name + ".fc1", channels, std::max<std::size_t>(1, channels / reduction), rng),
          fc2_(name + ".fc2", std::max<std::size_t>(1, channels / reduction), channels, rng),
          act_(Activation::relu),
          gate_act_(Activation::sigmoid) {}

    Tensor forward(const Tensor& x) {
        x_ = x;
        gate_ = gate_act_.forward(fc2_.forward(act_.forward(fc1_.forward(global_avg_pool(x)))));
        return apply_gate(x, gate_);
    }

    Tensor forward_const(const Tensor& x) const {
        const Tensor gate =
            gate_act_.forward_const(fc2_.forward_const(act_.forward_const(fc1_.forward_const(global_avg_pool(x)))));
        return apply_gate(x, gate);
    }

    Tensor backward(const Tensor& g) {
        const std::size_t n = x_.dim(0), c = x_.dim(1), hw = x_.dim(2) * x_.dim(3);
        Tensor gx = apply_gate(g, gate_);
        Tensor g_gate({n, c});
        for (std::size_t i = 0; i < n * c; ++i) {
            double s = 0.0;
            for (std::size_t k = 0; k < hw; ++k) s += g[i * hw + k] * x_[i * hw + k];
            g_gate[i] = s;
        }
        const Tensor g_pool = fc1_.backward(act_.backward(fc2_.backward(gate_act_.backward(g_gate))));
        gx += global_avg_pool_backward(x_.shape(), g_pool);
        return gx;
    }

    void collect(ParamRefs& out) {
        fc1_.collect(out);
        fc2_.collect(out);
    }

    const Tensor& last_gate() const { return gate_; }
    Dense& fc1() { return fc1_; }
    Dense& fc2() { return fc2_; }

private:
    static Tensor apply_gate(const Tensor& x, const Tensor& gate) {
        const std::size_t nc = x.dim(0) * x.dim(1), hw = x.dim(2) * x.dim(3);
        Tensor y(x.shape());
        for (std::size_t i = 0; i < nc; ++i)
            for (std::size_t k = 0; k < hw; ++k) y[i * hw + k] = x[i * hw + k] * gate[i];
        return y;
    }

    Dense fc1_, fc2_;
    ActivationLayer act_, gate_act_;
    Tensor x_, gate_;
};

// ---------------------------------------------------------------------------
// Minibatch discrimination.
//
// M_i = F_i . T (B x C per sample); o_ib = sum_j exp(-||M_ib - M_jb||_1), j over the whole
// batch including i. The n terms of each sum are added in sorted order so that permuting
// the batch permutes the output bit-for-bit.

struct MbdParams {
    Tensor T;  // [A, B, C]
};

namespace detail {

inline Tensor mbd_project(const Tensor& features, const Tensor& T) {
    require_rank(features, 2, "minibatch_discrimination features");
    require_rank(T, 3, "minibatch_discrimination kernel");
    const std::size_t n = features.dim(0), a = features.dim(1), bc = T.dim(1) * T.dim(2);
    if (T.dim(0) != a)
        throw ShapeError("minibatch_discrimination: feature width " + std::to_string(a) + " vs kernel rows " +
                         std::to_string(T.dim(0)));
    Tensor m({n, T.dim(1), T.dim(2)});
    MatMap(m.data(), n, bc).noalias() = ConstMatMap(features.data(), n, a) * ConstMatMap(T.data(), a, bc);
    return m;
}

// e[(i*n + j)*B + b] = exp(-||M_ib - M_jb||_1)
inline std::vector<double> mbd_kernel_terms(const Tensor& m) {
    const std::size_t n = m.dim(0), B = m.dim(1), C = m.dim(2);
    std::vector<double> e(n * n * B);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t b = 0; b < B; ++b) {
                double dist = 0.0;
                for (std::size_t c = 0; c < C; ++c) dist += std::abs(m[(i * B + b) * C + c] - m[(j * B + b) * C + c]);
                e[(i * n + j) * B + b] = std::exp(-dist);
            }
    return e;
}

}  // namespace detail

inline Tensor minibatch_discrimination(const Tensor& features, const MbdParams& mbd) {
    const Tensor m = detail::mbd_project(features, mbd.T);
    const std::size_t n = m.dim(0), B = m.dim(1);
    const auto e = detail::mbd_kernel_terms(m);
    Tensor o({n, B});
    std::vector<double> terms(n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t b = 0; b < B; ++b) {
            for (std::size_t j = 0; j < n; ++j) terms[j] = e[(i * n + j) * B + b];
            std::sort(terms.begin(), terms.end());
            double s = 0.0;
            for (double t : terms) s += t;
            o.at(i, b) = s;
        }
    return o;
}

class MinibatchDiscrimination {
public:
    MinibatchDiscrimination() = default;
    MinibatchDiscrimination(const std::string& name, std::size_t a, std::size_t b, std::size_t c, Rng& rng)
        : T_(name + ".T", init_weight({a, b, c}, a, rng)) {}

    Tensor forward(const Tensor& features) {
        f_ = features;
        m_ = detail::mbd_project(features, T_.value);
        return minibatch_discrimination(features, MbdParams{T_.value});
    }
    Tensor forward_const(const Tensor& features) const {
        return minibatch_discrimination(features, MbdParams{T_.value});
    }

    Tensor backward(const Tensor& g) {
        const std::size_t n = m_.dim(0), B = m_.dim(1), C = m_.dim(2), a = f_.dim(1);
        if (g.shape() != Shape{n, B}) throw ShapeError("minibatch_discrimination backward: grad shape mismatch");
        const auto e = detail::mbd_kernel_terms(m_);
        Tensor gm(m_.shape());
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                if (i == j) continue;
                for (std::size_t b = 0; b < B; ++b) {
                    const double w = (g.at(i, b) + g.at(j, b)) * e[(i * n + j) * B + b];
                    for (std::size_t c = 0; c < C; ++c) {
                        const double d = m_[(i * B + b) * C + c] - m_[(j * B + b) * C + c];
                        const double sgn = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
                        gm[(i * B + b) * C + c] -= w * sgn;
                    }
                }
            }
        const std::size_t bc = B * C;
        const detail::ConstMatMap gmm(gm.data(), n, bc);
        Tensor gT(T_.value.shape());
        detail::MatMap(gT.data(), a, bc).noalias() = detail::ConstMatMap(f_.data(), n, a).transpose() * gmm;
        T_.grad += gT;
        Tensor gf({n, a});
        detail::MatMap(gf.data(), n, a).noalias() = gmm * detail::ConstMatMap(T_.value.data(), a, bc).transpose();
        return gf;
    }

    void collect(ParamRefs& out) { out.push_back(&T_); }
    Parameter& kernel() { return T_; }

private:
    Parameter T_;
    Tensor f_, m_;
};

// ---------------------------------------------------------------------------
// Generator: wavelet-domain U-Net of residual blocks with an SE block at the center.

struct GeneratorConfig {
    std::size_t input_size = 64;  // image extent; the network sees input_size/2 when wavelet_input
    std::size_t base_channels = 16;
    std::size_t n_res_blocks = 12;
    std::size_t se_reduction = 4;
    std::size_t depth = 3;
    bool wavelet_input = true;
    double noise_std = 0.0;  // >0 injects Gaussian noise at the center and each decoder level

    std::size_t channels() const { return wavelet_input ? 4 : 1; }
    std::size_t grid() const { return wavelet_input ? input_size / 2 : input_size; }

    void validate() const {
        if (input_size == 0 || input_size % 2) throw ConfigError("generator: input_size must be even");
        if (depth == 0) throw ConfigError("generator: depth must be at least 1");
        if (input_size % (std::size_t{1} << (depth + 1)))
            throw ConfigError("generator: input_size " + std::to_string(input_size) + " must be divisible by 2^(depth+1) = " +
                              std::to_string(std::size_t{1} << (depth + 1)));
        if (n_res_blocks % 2) throw ConfigError("generator: n_res_blocks must be even");
        if (n_res_blocks / 2 < depth)
            throw ConfigError("generator: need at least one residual block per encoder level (n_res_blocks/2 >= depth)");
        if (base_channels == 0) throw ConfigError("generator: base_channels must be positive");
        if (se_reduction == 0) throw ConfigError("generator: se_reduction must be positive");
        if (!(noise_std >= 0.0)) throw ConfigError("generator: noise_std must be non-negative");
    }

    std::size_t level_channels(std::size_t level) const { return base_channels << level; }

    /// Encoder blocks per level; the decoder mirrors the same counts.
    std::vector<std::size_t> blocks_per_level() const {
        const std::size_t half = n_res_blocks / 2;
        std::vector<std::size_t> out(depth, half / depth);
        for (std::size_t l = 0; l < half % depth; ++l) ++out[l];
        return out;
    }

    bool operator==(const GeneratorConfig&) const = default;
};

class Generator {
public:
    Generator() = default;
    Generator(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
        cfg_.validate();
        const auto counts = cfg_.blocks_per_level();
        std::size_t ch = cfg_.channels();
        for (std::size_t l = 0; l < cfg_.depth; ++l) {
            Level lv;
            const std::size_t c = cfg_.level_channels(l);
            for (std::size_t b = 0; b < counts[l]; ++b) {
                lv.blocks.emplace_back("g.enc" + std::to_string(l) + ".block" + std::to_string(b), ch, c, rng);
                ch = c;
            }
            lv.resample = Conv2d("g.enc" + std::to_string(l) + ".down", c, cfg_.level_channels(l + 1), 3, 2, 1, rng);
            lv.act = ActivationLayer(kGenAct);
            ch = cfg_.level_channels(l + 1);
            encoder_.push_back(std::move(lv));
        }
        center_ = SeBlock("g.center.se", ch, cfg_.se_reduction, rng);
        for (std::size_t k = 0; k < cfg_.depth; ++k) {
            const std::size_t l = cfg_.depth - 1 - k;
            const std::size_t c = cfg_.level_channels(l);
            Level lv;
            lv.resample = Conv2d::same("g.dec" + std::to_string(l) + ".up", ch, c, 3, rng);
            lv.act = ActivationLayer(kGenAct);
            std::size_t in = 2 * c;
            for (std::size_t b = 0; b < counts[l]; ++b) {
                lv.blocks.emplace_back("g.dec" + std::to_string(l) + ".block" + std::to_string(b), in, c, rng);
                in = c;
            }
            ch = c;
            decoder_.push_back(std::move(lv));
        }
        head_ = Conv2d::same("g.head", ch, cfg_.channels(), 3, rng);
    }

    const GeneratorConfig& config() const { return cfg_; }

    /// Training forward; caches activations for backward. noise_rng is used only when noise_std > 0.
    Tensor forward(const Tensor& x, Rng* noise_rng = nullptr) { return run<true>(*this, x, noise_rng); }

    /// Read-only inference path, safe to call concurrently.
    Tensor infer(const Tensor& x) const { return run<false>(*this, x, nullptr); }

    Tensor backward(const Tensor& grad_out) {
        Tensor g = head_.backward(grad_out);
        for (std::size_t k = decoder_.size(); k-- > 0;) {
            Level& lv = decoder_[k];
            for (std::size_t b = lv.blocks.size(); b-- > 0;) g = lv.blocks[b].backward(g);
            const std::size_t l = cfg_.depth - 1 - k;
            auto [g_up, g_skip] = split_channels(g, cfg_.level_channels(l));
            skip_grads_[l] = std::move(g_skip);
            g = upsample_nearest_backward(lv.resample.backward(lv.act.backward(g_up)), 2);
        }
        g = center_.backward(g);
        for (std::size_t l = encoder_.size(); l-- > 0;) {
            Level& lv = encoder_[l];
            g = lv.resample.backward(lv.act.backward(g));
            g += skip_grads_[l];
            for (std::size_t b = lv.blocks.size(); b-- > 0;) g = lv.blocks[b].backward(g);
        }
        return g;
    }

    ParamRefs parameters() {
        ParamRefs out;
        for (auto& lv : encoder_) {
            for (auto& b : lv.blocks) b.collect(out);
            lv.resample.collect(out);
        }
        center_.collect(out);
        for (auto& lv : decoder_) {
            lv.resample.collect(out);
            for (auto& b : lv.blocks) b.collect(out);
        }
        head_.collect(out);
        return out;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto* p : parameters()) n += p->value.size();
        return n;
    }

    std::size_t residual_block_count() const {
        std::size_t n = 0;
        for (const auto& lv : encoder_) n += lv.blocks.size();
        for (const auto& lv : decoder_) n += lv.blocks.size();
        return n;
    }
    std::size_t skip_connection_count() const { return encoder_.size(); }

private:
    struct Level {
        std::vector<ResidualBlock> blocks;
        Conv2d resample;
        ActivationLayer act;
    };

    template <bool Train, class Self>
    static Tensor run(Self& self, const Tensor& x, Rng* noise_rng) {
        require_rank(x, 4, "generator input");
        const auto& cfg = self.cfg_;
        if (x.dim(1) != cfg.channels())
            throw ShapeError("generator: expected " + std::to_string(cfg.channels()) + " input channels, got " +
                             std::to_string(x.dim(1)));
        if (x.dim(2) != cfg.grid() || x.dim(3) != cfg.grid())
            throw ShapeError("generator: expected spatial extent " + std::to_string(cfg.grid()) + ", got " +
                             shape_str(x.shape()));
        auto fwd = [](auto& layer, const Tensor& t) {
            if constexpr (Train) return layer.forward(t);
            else return layer.forward_const(t);
        };
        auto add_noise = [&](Tensor& t) {
            if (cfg.noise_std > 0.0 && noise_rng)
                for (double& v : t.storage()) v += normal(*noise_rng, 0.0, cfg.noise_std);
        };

        std::vector<Tensor> skips(cfg.depth);
        Tensor h = x;
        for (std::size_t l = 0; l < cfg.depth; ++l) {
            auto& lv = self.encoder_[l];
            for (auto& b : lv.blocks) h = fwd(b, h);
            skips[l] = h;
            h = fwd(lv.act, fwd(lv.resample, h));
        }
        h = fwd(self.center_, h);
        add_noise(h);
        for (std::size_t k = 0; k < cfg.depth; ++k) {
            const std::size_t l = cfg.depth - 1 - k;
            auto& lv = self.decoder_[k];
            h = fwd(lv.act, fwd(lv.resample, upsample_nearest(h, 2)));
            add_noise(h);
            h = concat_channels(h, skips[l]);
            for (auto& b : lv.blocks) h = fwd(b, h);
        }
        if constexpr (Train) self.skip_grads_.assign(cfg.depth, Tensor());
        return fwd(self.head_, h);
    }

    GeneratorConfig cfg_;
    std::vector<Level> encoder_;
    SeBlock center_;
    std::vector<Level> decoder_;
    Conv2d head_;
    std::vector<Tensor> skip_grads_;
};

// ---------------------------------------------------------------------------
// Discriminator: n_conv stride-2 convolutions -> flatten -> [minibatch discrimination,
// concatenated to the features] -> dense -> sigmoid.

struct DiscriminatorConfig {
    std::size_t n_conv = 7;
    std::size_t base_channels = 16;
    std::size_t mbd_kernels = 16;  // B
    std::size_t mbd_dim = 8;       // C
    bool mbd_on = true;
    bool condition_on_source = true;

    void validate() const {
        if (n_conv == 0) throw ConfigError("discriminator: n_conv must be positive");
        if (base_channels == 0) throw ConfigError("discriminator: base_channels must be positive");
        if (mbd_on && (mbd_kernels == 0 || mbd_dim == 0))
            throw ConfigError("discriminator: mbd_kernels and mbd_dim must be positive");
    }

    /// Channel schedule doubles per layer, capped at 8x base.
    std::size_t layer_channels(std::size_t l) const { return base_channels << std::min<std::size_t>(l, 3); }

    bool operator==(const DiscriminatorConfig&) const = default;
};

class Discriminator {
public:
    Discriminator() = default;
    /// `channels`/`grid` describe one sample of the domain being judged (before conditioning).
    Discriminator(const DiscriminatorConfig& cfg, std::size_t channels, std::size_t grid, Rng& rng)
        : cfg_(cfg), domain_channels_(channels), grid_(grid) {
        cfg_.validate();
        std::size_t ch = input_channels();
        std::size_t extent = grid;
        for (std::size_t l = 0; l < cfg_.n_conv; ++l) {
            const std::size_t out = cfg_.layer_channels(l);
            convs_.emplace_back("d.conv" + std::to_string(l), ch, out, 3, 2, 1, rng);
            acts_.emplace_back(kDiscAct);
            ch = out;
            extent = (extent + 2 - 3) / 2 + 1;
        }
        features_ = ch * extent * extent;
        std::size_t width = features_;
        if (cfg_.mbd_on) {
            mbd_ = MinibatchDiscrimination("d.mbd", features_, cfg_.mbd_kernels, cfg_.mbd_dim, rng);
            width += cfg_.mbd_kernels;
        }
        fc_ = Dense("d.fc", width, 1, rng);
    }

    const DiscriminatorConfig& config() const { return cfg_; }
    std::size_t input_channels() const { return domain_channels_ * (cfg_.condition_on_source ? 2 : 1); }
    std::size_t feature_width() const { return features_; }

    /// Probabilities in (0,1), one per sample.
    Tensor forward(const Tensor& x) { return run<true>(*this, x); }
    Tensor infer(const Tensor& x) const { return run<false>(*this, x); }

    /// Gradient of a loss w.r.t. the probabilities -> gradient w.r.t. the input batch.
    Tensor backward(const Tensor& grad_probs) {
        const std::size_t n = grad_probs.dim(0);
        Tensor g = out_act_.backward(grad_probs.reshaped({n, 1}));
        g = fc_.backward(g);
        if (cfg_.mbd_on) {
            Tensor gf({n, features_});
            Tensor go({n, cfg_.mbd_kernels});
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(g.data() + i * g.dim(1), features_, gf.data() + i * features_);
                std::copy_n(g.data() + i * g.dim(1) + features_, cfg_.mbd_kernels, go.data() + i * cfg_.mbd_kernels);
            }
            gf += mbd_->backward(go);
            g = std::move(gf);
        }
        g = g.reshaped(conv_out_shape_);
        for (std::size_t l = convs_.size(); l-- > 0;) g = convs_[l].backward(acts_[l].backward(g));
        return g;
    }

    ParamRefs parameters() {
        ParamRefs out;
        for (auto& c : convs_) c.collect(out);
        if (mbd_) mbd_->collect(out);
        fc_.collect(out);
        return out;
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto* p : parameters()) n += p->value.size();
        return n;
    }

private:
    template <bool Train, class Self>
    static Tensor run(Self& self, const Tensor& x) {
        require_rank(x, 4, "discriminator input");
        if (x.dim(1) != self.input_channels())
            throw ShapeError("discriminator: expected " + std::to_string(self.input_channels()) +
                             " input channels, got " + std::to_string(x.dim(1)));
        if (x.dim(2) != self.grid_ || x.dim(3) != self.grid_)
            throw ShapeError("discriminator: expected spatial extent " + std::to_string(self.grid_) + ", got " +
                             shape_str(x.shape()));
        auto fwd = [](auto& layer, const Tensor& t) {
            if constexpr (Train) return layer.forward(t);
            else return layer.forward_const(t);
        };
        const std::size_t n = x.dim(0);
        Tensor h = x;
        for (std::size_t l = 0; l < self.convs_.size(); ++l) h = fwd(self.acts_[l], fwd(self.convs_[l], h));
        if constexpr (Train) self.conv_out_shape_ = h.shape();
        Tensor f = h.reshaped({n, self.features_});
        if (self.cfg_.mbd_on) {
            const Tensor o = fwd(*self.mbd_, f);
            const std::size_t B = o.dim(1), w = self.features_ + B;
            Tensor cat({n, w});
            for (std::size_t i = 0; i < n; ++i) {
                std::copy_n(f.data() + i * self.features_, self.features_, cat.data() + i * w);
                std::copy_n(o.data() + i * B, B, cat.data() + i * w + self.features_);
            }
            f = std::move(cat);
        }
        Tensor p = fwd(self.out_act_, fwd(self.fc_, f));
        return p.reshaped({n});
    }

    DiscriminatorConfig cfg_;
    std::size_t domain_channels_ = 4;
    std::size_t grid_ = 32;
    std::size_t features_ = 0;
    std::vector<Conv2d> convs_;
    std::vector<ActivationLayer> acts_;
    std::optional<MinibatchDiscrimination> mbd_;
    Dense fc_;
    ActivationLayer out_act_{Activation::sigmoid};
    Shape conv_out_shape_;
};

}  // namespace bsgan
