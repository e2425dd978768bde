#pragma once

// Adversarial training: losses, the history buffer, one alternating D/G update, and the
// epoch loop with validation and best-checkpoint selection.

#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bsgan/impipe.hpp"
#include "bsgan/models.hpp"
#include "bsgan/optim.hpp"
#include "bsgan/wavelet.hpp"

namespace bsgan {

// ---------------------------------------------------------------------------
// losses

inline constexpr double kProbClamp = 1e-7;

namespace detail {

inline double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

inline void require_probs(const Tensor& p, const char* what) {
    require_rank(p, 1, what);
    if (p.empty()) throw ShapeError(std::string(what) + ": empty batch");
}

}  // namespace detail

/// -1/2 mean(ln D(real)) - 1/2 mean(ln(1 - D(fake))), probabilities clamped to [1e-7, 1-1e-7].
inline double discriminator_loss(const Tensor& d_real, const Tensor& d_fake) {
    detail::require_probs(d_real, "discriminator_loss real");
    detail::require_probs(d_fake, "discriminator_loss fake");
    double a = 0.0, b = 0.0;
    for (double p : d_real.values()) a += std::log(detail::clamp_prob(p));
    for (double p : d_fake.values()) b += std::log(1.0 - detail::clamp_prob(p));
    return -0.5 * a / static_cast<double>(d_real.size()) - 0.5 * b / static_cast<double>(d_fake.size());
}

// Gradients are taken at the clamped probability, so a saturated discriminator still hands
// the generator a usable signal. The real and fake halves are separable.
inline Tensor discriminator_real_grad(const Tensor& d_real) {
    detail::require_probs(d_real, "discriminator_loss real");
    Tensor g(d_real.shape());
    const double n = static_cast<double>(d_real.size());
    for (std::size_t i = 0; i < d_real.size(); ++i) g[i] = -0.5 / (n * detail::clamp_prob(d_real[i]));
    return g;
}

inline Tensor discriminator_fake_grad(const Tensor& d_fake) {
    detail::require_probs(d_fake, "discriminator_loss fake");
    Tensor g(d_fake.shape());
    const double n = static_cast<double>(d_fake.size());
    for (std::size_t i = 0; i < d_fake.size(); ++i) g[i] = 0.5 / (n * (1.0 - detail::clamp_prob(d_fake[i])));
    return g;
}

enum class GeneratorLoss { non_saturating, minimax };

/// Non-saturating: -1/2 mean(ln D(G(x))).
inline double generator_adv_loss(const Tensor& d_fake) {
    detail::require_probs(d_fake, "generator_adv_loss");
    double s = 0.0;
    for (double p : d_fake.values()) s += std::log(detail::clamp_prob(p));
    return -0.5 * s / static_cast<double>(d_fake.size());
}

inline Tensor generator_adv_loss_grad(const Tensor& d_fake) {
    detail::require_probs(d_fake, "generator_adv_loss");
    Tensor g(d_fake.shape());
    const double n = static_cast<double>(d_fake.size());
    for (std::size_t i = 0; i < d_fake.size(); ++i) g[i] = -0.5 / (n * detail::clamp_prob(d_fake[i]));
    return g;
}

/// Zero-sum alternative: the negated discriminator loss.
inline double generator_minimax_loss(const Tensor& d_real, const Tensor& d_fake) {
    return -discriminator_loss(d_real, d_fake);
}

/// Gradient of the zero-sum loss w.r.t. the fake probabilities (the real term is constant in G).
inline Tensor generator_minimax_loss_grad(const Tensor& d_fake) {
    detail::require_probs(d_fake, "generator_minimax_loss");
    Tensor g(d_fake.shape());
    const double n = static_cast<double>(d_fake.size());
    for (std::size_t i = 0; i < d_fake.size(); ++i) g[i] = -0.5 / (n * (1.0 - detail::clamp_prob(d_fake[i])));
    return g;
}

/// Mean absolute difference over every element.
inline double l1_guidance(const Tensor& pred, const Tensor& target) {
    pred.require_same_shape(target, "l1_guidance");
    if (pred.empty()) throw ShapeError("l1_guidance: empty tensors");
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - target[i]);
    return s / static_cast<double>(pred.size());
}

/// sign(pred - target) / N, with sign(0) = 0.
inline Tensor l1_guidance_grad(const Tensor& pred, const Tensor& target) {
    pred.require_same_shape(target, "l1_guidance");
    Tensor g(pred.shape());
    const double inv = 1.0 / static_cast<double>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - target[i];
        g[i] = d > 0.0 ? inv : (d < 0.0 ? -inv : 0.0);
    }
    return g;
}

inline double generator_total_loss(double adv, double l1, double lambda) { return adv + lambda * l1; }

// ---------------------------------------------------------------------------
// history buffer

/// Replay store of 2k generated samples. Real samples never enter it.
class HistoryBuffer {
public:
    HistoryBuffer() = default;
    HistoryBuffer(std::size_t k, std::uint64_t seed) : k_(k), rng_(make_rng(seed, "buffer")) {}

    std::size_t half() const { return k_; }
    std::size_t capacity() const { return 2 * k_; }
    std::size_t size() const { return items_.size(); }
    bool full() const { return k_ > 0 && items_.size() == capacity(); }

    /// Stores the first k samples of an n = 2k batch. Once the buffer is full, k stored samples
    /// are drawn at random and replace the first half of the returned batch.
    Tensor mix(const Tensor& fake) {
        if (k_ == 0) return fake;
        if (fake.rank() < 1) throw ShapeError("history_mix: batch has no sample axis");
        const std::size_t n = fake.dim(0);
        if (n % 2) throw ShapeError("history_mix: batch size " + std::to_string(n) + " is odd");
        if (n != 2 * k_)
            throw ShapeError("history_mix: batch size " + std::to_string(n) + " does not match buffer half " +
                             std::to_string(k_));
        const bool was_full = full();
        std::vector<Tensor> popped;
        if (was_full) {
            std::shuffle(items_.begin(), items_.end(), rng_);
            popped.assign(std::make_move_iterator(items_.end() - static_cast<std::ptrdiff_t>(k_)),
                          std::make_move_iterator(items_.end()));
            items_.resize(items_.size() - k_);
        }
        for (std::size_t i = 0; i < k_; ++i) items_.push_back(unstack_item(fake, i));
        if (!was_full) return fake;
        for (std::size_t i = k_; i < n; ++i) popped.push_back(unstack_item(fake, i));
        return stack_batch(popped);
    }

private:
    std::size_t k_ = 0;
    Rng rng_;
    std::vector<Tensor> items_;
};

inline Tensor history_mix(HistoryBuffer& buffer, const Tensor& fake_batch) { return buffer.mix(fake_batch); }

// ---------------------------------------------------------------------------
// configuration

struct TrainConfig {
    std::size_t batch_size = 8;
    double lr = 0.0008;
    double lambda_l1 = 100.0;
    std::size_t steps = 1000;
    std::uint64_t seed = 1;
    bool history_buffer_on = true;
    bool mbd_on = true;
    bool haar_on = true;
    bool gan_on = true;
    bool l1_image_domain = false;  // L1 on reconstructed images instead of the four sub-bands
    GeneratorLoss generator_loss = GeneratorLoss::non_saturating;
    std::size_t eval_every = 50;
    GeneratorConfig generator{};
    DiscriminatorConfig discriminator{};

    /// The generator's domain follows haar_on.
    GeneratorConfig generator_config() const {
        GeneratorConfig g = generator;
        g.wavelet_input = haar_on;
        return g;
    }
    DiscriminatorConfig discriminator_config() const {
        DiscriminatorConfig d = discriminator;
        d.mbd_on = mbd_on;
        return d;
    }
    AdamHyper adam() const { return AdamHyper{lr}; }

    void validate() const {
        if (batch_size == 0) throw ConfigError("train: batch_size must be positive");
        if (history_buffer_on && gan_on && batch_size % 2)
            throw ConfigError("train: batch_size must be even when the history buffer is on");
        if (!(lambda_l1 >= 0.0) || !std::isfinite(lambda_l1)) throw ConfigError("train: lambda_l1 must be >= 0");
        if (eval_every == 0) throw ConfigError("train: eval_every must be positive");
        adam().validate();
        generator_config().validate();
        discriminator_config().validate();
    }

    bool operator==(const TrainConfig&) const = default;
};

// ---------------------------------------------------------------------------
// data preparation

/// Image [h, w] -> network domain: [4, h/2, w/2] sub-bands or [1, h, w].
inline Tensor to_domain(const Tensor& image, bool haar) {
    require_rank(image, 2, "to_domain");
    if (haar) return pack_subbands(haar_decompose(image));
    return image.reshaped({1, image.dim(0), image.dim(1)});
}

inline Tensor from_domain(const Tensor& t, bool haar) {
    require_rank(t, 3, "from_domain");
    if (haar) return haar_reconstruct(unpack_subbands(t));
    if (t.dim(0) != 1) throw ShapeError("from_domain: expected one image channel");
    return t.reshaped({t.dim(1), t.dim(2)});
}

/// Batched [n, C, g, g] -> [n, 1, h, w].
inline Tensor batch_to_images(const Tensor& t, bool haar) {
    return haar ? haar_inverse_batch(t) : t;
}

/// One training pair in network units. Both images are z-scored with the composite's
/// statistics so the prediction can be mapped back with the same affine map.
struct PairedSample {
    Tensor source;
    Tensor target;
    ZScoreStats stats;
};

inline PairedSample prepare_pair(const RawImage& composite, const RawImage& clean, bool haar) {
    if (composite.width != clean.width || composite.height != clean.height)
        throw DataError("composite and clean images differ in size");
    const Tensor src = to_unit(composite);
    const ZScoreStats st = zscore_stats(src);
    return {to_domain(apply_zscore(src, st), haar), to_domain(apply_zscore(to_unit(clean), st), haar), st};
}

struct TrainData {
    std::vector<PairedSample> train;
    std::vector<PairedSample> val;
};

inline TrainData prepare_dataset(const std::vector<DatasetItem>& items, bool haar) {
    TrainData d;
    for (const auto& it : items) {
        if (it.split == "train") d.train.push_back(prepare_pair(it.composite, it.clean, haar));
        else if (it.split == "val") d.val.push_back(prepare_pair(it.composite, it.clean, haar));
    }
    return d;
}

/// Runs a trained generator on one raw composite and returns the suppressed image in [0, 1].
inline Tensor suppress_image(const Generator& g, const RawImage& composite) {
    const bool haar = g.config().wavelet_input;
    if (composite.width != g.config().input_size || composite.height != g.config().input_size)
        throw ShapeError("suppress: image is " + std::to_string(composite.width) + "x" +
                         std::to_string(composite.height) + ", the generator expects " +
                         std::to_string(g.config().input_size) + "x" + std::to_string(g.config().input_size));
    const Tensor src = to_unit(composite);
    const ZScoreStats st = zscore_stats(src);
    const Tensor x = to_domain(apply_zscore(src, st), haar);
    Shape batched{1};
    batched.insert(batched.end(), x.shape().begin(), x.shape().end());
    const Tensor y = g.infer(x.reshaped(batched));
    Tensor img = undo_zscore(from_domain(unstack_item(y, 0), haar), st);
    for (double& v : img.storage()) v = std::clamp(v, 0.0, 1.0);
    return img;
}

// ---------------------------------------------------------------------------
// training state and one step

struct NamedTensor {
    std::string name;
    Tensor value;
    bool operator==(const NamedTensor&) const = default;
};

inline std::vector<NamedTensor> snapshot_parameters(const ParamRefs& params) {
    std::vector<NamedTensor> out;
    out.reserve(params.size());
    for (const auto* p : params) out.push_back({p->name, p->value});
    return out;
}

struct StepLosses {
    double j_d = 0.0;
    double j_g_adv = 0.0;
    double l1 = 0.0;
};

struct LossRow {
    std::size_t step = 0;
    StepLosses losses;
    std::optional<double> val_l1;
};

struct TrainState {
    TrainConfig config;
    Generator generator;
    Discriminator discriminator;
    HistoryBuffer buffer;
    Rng noise_rng;
    std::size_t step = 0;
    std::vector<LossRow> log;

    explicit TrainState(const TrainConfig& cfg) : config(cfg) {
        config.validate();
        Rng init = make_rng(cfg.seed, "init");
        const GeneratorConfig gc = cfg.generator_config();
        generator = Generator(gc, init);
        discriminator = Discriminator(cfg.discriminator_config(), gc.channels(), gc.grid(), init);
        buffer = HistoryBuffer(cfg.history_buffer_on ? cfg.batch_size / 2 : 0, cfg.seed);
        noise_rng = make_rng(cfg.seed, "noise");
    }
};

struct PairedBatch {
    Tensor source;  // [n, C, g, g]
    Tensor target;
};

inline PairedBatch make_batch(const std::vector<PairedSample>& samples, std::span<const std::size_t> idx) {
    std::vector<Tensor> s, t;
    s.reserve(idx.size());
    t.reserve(idx.size());
    for (auto i : idx) {
        s.push_back(samples.at(i).source);
        t.push_back(samples.at(i).target);
    }
    return {stack_batch(s), stack_batch(t)};
}

namespace detail {

inline Tensor d_input(const TrainConfig& cfg, const Tensor& source, const Tensor& sample) {
    return cfg.discriminator.condition_on_source ? concat_channels(source, sample) : sample;
}

/// L1 loss and its gradient w.r.t. the generator output, in the configured domain.
inline std::pair<double, Tensor> l1_term(const TrainConfig& cfg, const Tensor& fake, const Tensor& target) {
    if (cfg.haar_on && cfg.l1_image_domain) {
        const Tensor pi = haar_inverse_batch(fake), ti = haar_inverse_batch(target);
        return {l1_guidance(pi, ti), haar_forward_batch(l1_guidance_grad(pi, ti))};
    }
    return {l1_guidance(fake, target), l1_guidance_grad(fake, target)};
}

inline void require_finite_loss(double v, std::size_t step, const char* what) {
    if (!std::isfinite(v))
        throw NumericError("step " + std::to_string(step) + ": non-finite " + std::string(what) + " (" +
                           std::to_string(v) + ")");
}

}  // namespace detail

/// One alternating update: D on real pairs vs history-mixed fakes, then G on the current fakes.
inline StepLosses train_step(TrainState& st, const PairedBatch& batch) {
    const TrainConfig& cfg = st.config;
    const std::size_t step = st.step + 1;
    StepLosses out;
    const Tensor fake = st.generator.forward(batch.source, &st.noise_rng);
    auto [l1, g_fake] = detail::l1_term(cfg, fake, batch.target);
    out.l1 = l1;
    detail::require_finite_loss(l1, step, "L1 loss");
    g_fake *= cfg.lambda_l1;

    if (cfg.gan_on) {
        Discriminator& d = st.discriminator;
        const ParamRefs d_params = d.parameters();
        const Tensor real_pair = detail::d_input(cfg, batch.source, batch.target);
        const Tensor fake_pair = detail::d_input(cfg, batch.source, fake);
        const Tensor mixed = cfg.history_buffer_on ? history_mix(st.buffer, fake_pair) : fake_pair;

        // the discriminator caches one forward at a time, so each half is run and back-propagated in turn
        const Tensor p_real = d.forward(real_pair);
        d.backward(discriminator_real_grad(p_real));
        const Tensor p_mixed = d.forward(mixed);
        d.backward(discriminator_fake_grad(p_mixed));
        out.j_d = discriminator_loss(p_real, p_mixed);
        detail::require_finite_loss(out.j_d, step, "discriminator loss");
        adam_step(d_params, cfg.adam());

        const Tensor p_g = d.forward(fake_pair);
        Tensor grad_p;
        if (cfg.generator_loss == GeneratorLoss::minimax) {
            out.j_g_adv = generator_minimax_loss(d.infer(real_pair), p_g);
            grad_p = generator_minimax_loss_grad(p_g);
        } else {
            out.j_g_adv = generator_adv_loss(p_g);
            grad_p = generator_adv_loss_grad(p_g);
        }
        detail::require_finite_loss(out.j_g_adv, step, "generator adversarial loss");
        Tensor g_in = d.backward(grad_p);
        zero_grads(d_params);
        if (cfg.discriminator.condition_on_source) g_in = split_channels(g_in, batch.source.dim(1)).second;
        g_fake += g_in;
    }

    st.generator.backward(g_fake);
    adam_step(st.generator.parameters(), cfg.adam());
    st.step = step;
    return out;
}

/// Losses on a batch without touching any state.
inline StepLosses evaluate_batch(const TrainState& st, const PairedBatch& batch) {
    const TrainConfig& cfg = st.config;
    StepLosses out;
    const Tensor fake = st.generator.infer(batch.source);
    out.l1 = detail::l1_term(cfg, fake, batch.target).first;
    if (cfg.gan_on) {
        const Tensor p_real = st.discriminator.infer(detail::d_input(cfg, batch.source, batch.target));
        const Tensor p_fake = st.discriminator.infer(detail::d_input(cfg, batch.source, fake));
        out.j_d = discriminator_loss(p_real, p_fake);
        out.j_g_adv = cfg.generator_loss == GeneratorLoss::minimax ? generator_minimax_loss(p_real, p_fake)
                                                                    : generator_adv_loss(p_fake);
    }
    return out;
}

/// Mean absolute error of the reconstructed images over a set, in normalized units.
inline double validation_l1(const Generator& g, const std::vector<PairedSample>& samples, std::size_t chunk = 8) {
    if (samples.empty()) throw DataError("validation set is empty");
    const bool haar = g.config().wavelet_input;
    double total = 0.0;
    std::size_t count = 0;
    std::vector<std::size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t b = 0; b < idx.size(); b += chunk) {
        const std::size_t e = std::min(idx.size(), b + chunk);
        const PairedBatch batch = make_batch(samples, std::span(idx).subspan(b, e - b));
        const Tensor pred = batch_to_images(g.infer(batch.source), haar);
        const Tensor tgt = batch_to_images(batch.target, haar);
        for (std::size_t i = 0; i < pred.size(); ++i) total += std::abs(pred[i] - tgt[i]);
        count += pred.size();
    }
    return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// the loop

struct TrainResult {
    std::vector<LossRow> log;
    std::vector<NamedTensor> best_parameters;  // generator then discriminator
    std::size_t best_step = 0;
    std::optional<double> best_val_l1;
};

inline std::vector<NamedTensor> snapshot(TrainState& st) {
    auto out = snapshot_parameters(st.generator.parameters());
    auto d = snapshot_parameters(st.discriminator.parameters());
    out.insert(out.end(), std::make_move_iterator(d.begin()), std::make_move_iterator(d.end()));
    return out;
}

/// Epochs over the training split in seeded shuffled order (partial batches dropped).
/// Validation L1 is logged at step 0, every eval_every steps and at the last step; the
/// parameters with the lowest validation L1 are kept. Without a validation split the final
/// parameters are kept.
inline TrainResult train(const TrainConfig& cfg, const TrainData& data,
                         const std::function<void(const LossRow&)>& on_row = {}) {
    cfg.validate();
    if (data.train.empty()) throw DataError("training split is empty");
    if (data.train.size() < cfg.batch_size)
        throw DataError("training split has " + std::to_string(data.train.size()) + " items, fewer than batch_size " +
                        std::to_string(cfg.batch_size));
    const Shape expected = to_domain(Tensor({cfg.generator.input_size, cfg.generator.input_size}), cfg.haar_on).shape();
    for (const auto& s : data.train)
        if (s.source.shape() != expected)
            throw DataError("training sample has shape " + shape_str(s.source.shape()) + ", expected " +
                            shape_str(expected) + " for input_size " + std::to_string(cfg.generator.input_size));

    TrainState st(cfg);
    TrainResult res;
    Rng order_rng = make_rng(cfg.seed, "data");
    std::vector<std::size_t> order(data.train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), order_rng);
    std::size_t cursor = 0;

    auto record = [&](LossRow row) {
        if (row.val_l1 && (!res.best_val_l1 || *row.val_l1 < *res.best_val_l1)) {
            res.best_val_l1 = row.val_l1;
            res.best_step = row.step;
            res.best_parameters = snapshot(st);
        }
        if (on_row) on_row(row);
        res.log.push_back(std::move(row));
    };
    auto maybe_val = [&](std::size_t step) -> std::optional<double> {
        if (data.val.empty()) return std::nullopt;
        if (step % cfg.eval_every == 0 || step == cfg.steps) return validation_l1(st.generator, data.val, cfg.batch_size);
        return std::nullopt;
    };

    const std::span<const std::size_t> first(order.data(), cfg.batch_size);
    record({0, evaluate_batch(st, make_batch(data.train, first)), maybe_val(0)});

    for (std::size_t s = 1; s <= cfg.steps; ++s) {
        if (cursor + cfg.batch_size > order.size()) {
            std::shuffle(order.begin(), order.end(), order_rng);
            cursor = 0;
        }
        const PairedBatch batch = make_batch(data.train, std::span<const std::size_t>(order).subspan(cursor, cfg.batch_size));
        cursor += cfg.batch_size;
        const StepLosses l = train_step(st, batch);
        record({s, l, maybe_val(s)});
    }
    if (data.val.empty()) {
        res.best_step = cfg.steps;
        res.best_parameters = snapshot(st);
    }
    return res;
}

}  // namespace bsgan
