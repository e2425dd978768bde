#include <gtest/gtest.h>

#include <cmath>

#include "bsgan/gradcheck.hpp"
#include "bsgan/nn.hpp"
#include "bsgan/optim.hpp"

using namespace bsgan;

namespace {

// Direct six-loop cross-correlation with explicit zero padding.
Tensor conv_oracle(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride, std::size_t pad) {
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
    const std::size_t o = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const std::size_t oh = (h + 2 * pad - kh) / stride + 1, ow = (wd + 2 * pad - kw) / stride + 1;
    Tensor out({n, o, oh, ow});
    for (std::size_t s = 0; s < n; ++s)
        for (std::size_t oc = 0; oc < o; ++oc)
            for (std::size_t y = 0; y < oh; ++y)
                for (std::size_t xx = 0; xx < ow; ++xx) {
                    double acc = b[oc];
                    for (std::size_t ic = 0; ic < c; ++ic)
                        for (std::size_t ky = 0; ky < kh; ++ky)
                            for (std::size_t kx = 0; kx < kw; ++kx) {
                                const long iy = static_cast<long>(y * stride + ky) - static_cast<long>(pad);
                                const long ix = static_cast<long>(xx * stride + kx) - static_cast<long>(pad);
                                if (iy < 0 || ix < 0 || iy >= static_cast<long>(h) || ix >= static_cast<long>(wd)) continue;
                                acc += w.at(oc, ic, ky, kx) * x.at(s, ic, static_cast<std::size_t>(iy), static_cast<std::size_t>(ix));
                            }
                    out.at(s, oc, y, xx) = acc;
                }
    return out;
}

double weighted_sum(const Tensor& y, const Tensor& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
    return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// conv2d

TEST(Conv2d, IdentityKernelReturnsInput) {
    Rng rng = make_rng(1, "t");
    const Tensor x = random_tensor({1, 1, 3, 3}, rng);
    const Tensor y = conv2d(x, Tensor({1, 1, 1, 1}, 1.0), Tensor({1}), 1, 0);
    EXPECT_EQ(y, x);
}

TEST(Conv2d, OnesKernelOverOneToNine) {
    Tensor x({1, 1, 3, 3}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8, 9});
    const Tensor y = conv2d(x, Tensor({1, 1, 3, 3}, 1.0), Tensor({1}), 1, 0);
    ASSERT_EQ(y.shape(), (Shape{1, 1, 1, 1}));
    EXPECT_EQ(y[0], 45.0);
}

TEST(Conv2d, ZeroInputGivesBiasMap) {
    Rng rng = make_rng(2, "t");
    const Tensor w = random_tensor({3, 2, 3, 3}, rng);
    const Tensor b({3}, std::vector<double>{0.5, -1.0, 2.0});
    const Tensor y = conv2d(Tensor({2, 2, 5, 5}), w, b, 1, 1);
    for (std::size_t s = 0; s < 2; ++s)
        for (std::size_t oc = 0; oc < 3; ++oc)
            for (std::size_t i = 0; i < 25; ++i) EXPECT_EQ(y[(s * 3 + oc) * 25 + i], b[oc]);
}

TEST(Conv2d, MatchesDirectLoopOracle) {
    Rng rng = make_rng(3, "t");
    struct Case {
        std::size_t n, c, h, w, o, k, stride, pad;
    };
    for (const Case cs : {Case{2, 3, 7, 6, 4, 3, 1, 1}, Case{1, 2, 8, 8, 3, 3, 2, 1}, Case{3, 1, 5, 9, 2, 5, 2, 2},
                          Case{1, 4, 4, 4, 2, 1, 1, 0}, Case{2, 2, 3, 3, 1, 3, 1, 0}}) {
        const Tensor x = random_tensor({cs.n, cs.c, cs.h, cs.w}, rng);
        const Tensor w = random_tensor({cs.o, cs.c, cs.k, cs.k}, rng);
        const Tensor b = random_tensor({cs.o}, rng);
        const Tensor y = conv2d(x, w, b, cs.stride, cs.pad);
        const Tensor ref = conv_oracle(x, w, b, cs.stride, cs.pad);
        ASSERT_EQ(y.shape(), ref.shape());
        EXPECT_LT(max_abs_diff(y, ref), 1e-12);
    }
}

TEST(Conv2d, SamePaddingPreservesExtent) {
    Rng rng = make_rng(4, "t");
    for (std::size_t k : {1u, 3u, 5u}) {
        const Tensor y = conv2d(random_tensor({1, 2, 6, 9}, rng), random_tensor({3, 2, k, k}, rng), Tensor({3}), 1, (k - 1) / 2);
        EXPECT_EQ(y.shape(), (Shape{1, 3, 6, 9}));
    }
}

TEST(Conv2d, ShapeErrorsNameTheAxis) {
    const Tensor x({1, 2, 4, 4});
    try {
        conv2d(x, Tensor({1, 3, 3, 3}), Tensor({1}), 1, 1);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("channel"), std::string::npos);
    }
    try {
        conv2d(Tensor({1, 1, 2, 8}), Tensor({1, 1, 5, 5}), Tensor({1}), 1, 1);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("height"), std::string::npos);
    }
    EXPECT_THROW(conv2d(x, Tensor({1, 2, 2, 2}), Tensor({1}), 1, 0), ShapeError);  // even kernel
    EXPECT_THROW(conv2d(x, Tensor({2, 2, 3, 3}), Tensor({1}), 1, 1), ShapeError);  // bias length
    EXPECT_THROW(conv2d(Tensor({2, 4, 4}), Tensor({1, 2, 3, 3}), Tensor({1}), 1, 1), ShapeError);
}

TEST(Conv2dBackward, MissingContextThrows) {
    EXPECT_THROW(conv2d_backward(Conv2dCtx{}, Tensor({1, 1, 1, 1})), std::logic_error);
}

TEST(Conv2dBackward, SumLossThroughIdentityKernel) {
    Rng rng = make_rng(5, "t");
    Conv2dCtx ctx;
    const Tensor x = random_tensor({2, 1, 4, 4}, rng);
    const Tensor y = conv2d(x, Tensor({1, 1, 1, 1}, 1.0), Tensor({1}), 1, 0, &ctx);
    const auto g = conv2d_backward(ctx, Tensor(y.shape(), 1.0));
    EXPECT_EQ(g.input, Tensor(x.shape(), 1.0));
}

TEST(Conv2dBackward, BiasGradIsPerChannelSum) {
    Rng rng = make_rng(6, "t");
    Conv2dCtx ctx;
    const Tensor y = conv2d(random_tensor({2, 2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng), Tensor({3}), 1, 1, &ctx);
    const Tensor go = random_tensor(y.shape(), rng);
    const auto g = conv2d_backward(ctx, go);
    for (std::size_t oc = 0; oc < 3; ++oc) {
        double s = 0.0;
        for (std::size_t n = 0; n < 2; ++n)
            for (std::size_t i = 0; i < 25; ++i) s += go[(n * 3 + oc) * 25 + i];
        EXPECT_NEAR(g.bias[oc], s, 1e-12);
    }
}

TEST(Conv2dBackward, MatchesFiniteDifferences) {
    Rng rng = make_rng(7, "t");
    struct Case {
        std::size_t n, c, h, w, o, k, stride, pad;
    };
    for (const Case cs : {Case{2, 3, 6, 5, 4, 3, 1, 1}, Case{1, 2, 8, 8, 3, 3, 2, 1}, Case{2, 1, 7, 7, 2, 5, 2, 2},
                          Case{3, 4, 4, 4, 2, 1, 1, 0}}) {
        const Tensor x = random_tensor({cs.n, cs.c, cs.h, cs.w}, rng);
        const Tensor w = random_tensor({cs.o, cs.c, cs.k, cs.k}, rng);
        const Tensor b = random_tensor({cs.o}, rng);
        Conv2dCtx ctx;
        const Tensor y = conv2d(x, w, b, cs.stride, cs.pad, &ctx);
        const Tensor r = random_tensor(y.shape(), rng);
        const auto g = conv2d_backward(ctx, r);
        auto loss_x = [&](const Tensor& t) { return weighted_sum(conv2d(t, w, b, cs.stride, cs.pad), r); };
        auto loss_w = [&](const Tensor& t) { return weighted_sum(conv2d(x, t, b, cs.stride, cs.pad), r); };
        auto loss_b = [&](const Tensor& t) { return weighted_sum(conv2d(x, w, t, cs.stride, cs.pad), r); };
        EXPECT_LT(relative_error(g.input, finite_diff_grad(loss_x, x)), 1e-5);
        EXPECT_LT(relative_error(g.weight, finite_diff_grad(loss_w, w)), 1e-5);
        EXPECT_LT(relative_error(g.bias, finite_diff_grad(loss_b, b)), 1e-5);
    }
}

TEST(Conv2dLayer, BackwardAccumulatesIntoParameters) {
    Rng rng = make_rng(8, "t");
    Conv2d conv("c", 2, 3, 3, 1, 1, rng);
    const Tensor x = random_tensor({1, 2, 4, 4}, rng);
    const Tensor r = random_tensor({1, 3, 4, 4}, rng);
    conv.forward(x);
    conv.backward(r);
    const Tensor once = conv.weight().grad;
    conv.forward(x);
    conv.backward(r);
    EXPECT_LT(max_abs_diff(conv.weight().grad, once * 2.0), 1e-12);
}

TEST(Init, UniformWithinHeScaleBound) {
    Rng rng = make_rng(9, "t");
    Conv2d conv("c", 8, 4, 3, 1, 1, rng);
    const double bound = std::sqrt(2.0 / 72.0);
    for (double v : conv.weight().value.values()) EXPECT_LE(std::abs(v), bound);
    EXPECT_EQ(conv.bias().value, Tensor({4}));
}

// ---------------------------------------------------------------------------
// activations

TEST(Activation, ScalarGoldens) {
    EXPECT_EQ(activate_scalar(-1.0, Activation::leaky_relu), -0.2);
    EXPECT_EQ(activate_scalar(2.0, Activation::leaky_relu), 2.0);
    EXPECT_EQ(activate_scalar(0.0, Activation::sigmoid), 0.5);
    EXPECT_EQ(activate_scalar(-3.0, Activation::relu), 0.0);
    EXPECT_EQ(activate_scalar(0.0, Activation::tanh), 0.0);
}

TEST(Activation, SigmoidStaysInsideOpenInterval) {
    for (double v : {-30.0, -5.0, 0.0, 5.0, 30.0}) {
        const double s = activate_scalar(v, Activation::sigmoid);
        EXPECT_GT(s, 0.0);
        EXPECT_LT(s, 1.0);
    }
    EXPECT_TRUE(std::isfinite(activate_scalar(-1000.0, Activation::sigmoid)));
}

TEST(Activation, TanhGradAtZeroIsOne) {
    const Tensor x({1}, 0.0);
    const Tensor y = activate(x, Activation::tanh);
    const Tensor g = activation_backward(x, y, Tensor({1}, 1.0), Activation::tanh);
    const Tensor fd = finite_diff_grad([](const Tensor& t) { return activate(t, Activation::tanh)[0]; }, x);
    EXPECT_NEAR(g[0], 1.0, 1e-15);
    EXPECT_NEAR(fd[0], 1.0, 1e-8);
}

TEST(Activation, BackwardMatchesFiniteDifferences) {
    Rng rng = make_rng(10, "t");
    for (auto kind : {Activation::relu, Activation::leaky_relu, Activation::sigmoid, Activation::tanh, Activation::identity}) {
        Tensor x = random_tensor({2, 3, 4, 4}, rng, -2.0, 2.0);
        for (double& v : x.storage())
            if (std::abs(v) < 1e-3) v = 0.5;  // keep probes off the kink
        const Tensor r = random_tensor(x.shape(), rng);
        const Tensor g = activation_backward(x, activate(x, kind), r, kind);
        const Tensor fd = finite_diff_grad([&](const Tensor& t) { return weighted_sum(activate(t, kind), r); }, x);
        EXPECT_LT(relative_error(g, fd), 1e-5) << static_cast<int>(kind);
    }
}

// ---------------------------------------------------------------------------
// dense

TEST(Dense, IdentityWeightKeepsInput) {
    const Tensor x({2, 2}, std::vector<double>{1, 2, 3, 4});
    const Tensor w({2, 2}, std::vector<double>{1, 0, 0, 1});
    EXPECT_EQ(dense(x, w, Tensor({2})), x);
}

TEST(Dense, HandComputedExample) {
    const Tensor y = dense(Tensor({1, 2}, std::vector<double>{1, 2}), Tensor({2, 2}, std::vector<double>{1, 0, 0, 1}),
                           Tensor({2}, std::vector<double>{3, 4}));
    EXPECT_EQ(y, Tensor({1, 2}, std::vector<double>{4, 6}));
}

TEST(Dense, DimensionMismatchThrows) {
    EXPECT_THROW(dense(Tensor({1, 3}), Tensor({2, 2}), Tensor({2})), ShapeError);
    EXPECT_THROW(dense(Tensor({1, 2}), Tensor({2, 2}), Tensor({3})), ShapeError);
}

TEST(Dense, BackwardMatchesFiniteDifferences) {
    Rng rng = make_rng(11, "t");
    const Tensor x = random_tensor({4, 5}, rng), w = random_tensor({5, 3}, rng), b = random_tensor({3}, rng);
    const Tensor r = random_tensor({4, 3}, rng);
    const auto g = dense_backward(x, w, r);
    EXPECT_LT(relative_error(g.input, finite_diff_grad([&](const Tensor& t) { return weighted_sum(dense(t, w, b), r); }, x)), 1e-5);
    EXPECT_LT(relative_error(g.weight, finite_diff_grad([&](const Tensor& t) { return weighted_sum(dense(x, t, b), r); }, w)), 1e-5);
    EXPECT_LT(relative_error(g.bias, finite_diff_grad([&](const Tensor& t) { return weighted_sum(dense(x, w, t), r); }, b)), 1e-5);
}

// ---------------------------------------------------------------------------
// pooling and resampling

TEST(GlobalAvgPool, ConstantAndHandMean) {
    EXPECT_EQ(global_avg_pool(Tensor({1, 1, 3, 3}, 2.5))[0], 2.5);
    EXPECT_EQ(global_avg_pool(Tensor({1, 1, 2, 2}, std::vector<double>{1, 2, 3, 4}))[0], 2.5);
}

TEST(GlobalAvgPool, BackwardSpreadsUniformly) {
    const Tensor g = global_avg_pool_backward({1, 2, 2, 3}, Tensor({1, 2}, std::vector<double>{6, 12}));
    for (std::size_t i = 0; i < 6; ++i) EXPECT_EQ(g[i], 1.0);
    for (std::size_t i = 6; i < 12; ++i) EXPECT_EQ(g[i], 2.0);
}

TEST(GlobalAvgPool, BackwardMatchesFiniteDifferences) {
    Rng rng = make_rng(12, "t");
    const Tensor x = random_tensor({2, 3, 4, 5}, rng), r = random_tensor({2, 3}, rng);
    const Tensor fd = finite_diff_grad([&](const Tensor& t) { return weighted_sum(global_avg_pool(t), r); }, x);
    EXPECT_LT(relative_error(global_avg_pool_backward(x.shape(), r), fd), 1e-5);
}

TEST(Upsample, SinglePixelBecomesBlock) {
    EXPECT_EQ(upsample_nearest(Tensor({1, 1, 1, 1}, 5.0), 2), Tensor({1, 1, 2, 2}, 5.0));
}

TEST(Upsample, AvgPoolIsLeftInverse) {
    Rng rng = make_rng(13, "t");
    const Tensor x = random_tensor({2, 3, 4, 5}, rng);
    EXPECT_LT(max_abs_diff(avg_pool(upsample_nearest(x, 2), 2), x), 1e-15);
    EXPECT_LT(max_abs_diff(avg_pool(upsample_nearest(x, 3), 3), x), 1e-15);
}

TEST(Upsample, BackwardMatchesFiniteDifferences) {
    Rng rng = make_rng(14, "t");
    const Tensor x = random_tensor({2, 2, 3, 4}, rng), r = random_tensor({2, 2, 6, 8}, rng);
    const Tensor fd = finite_diff_grad([&](const Tensor& t) { return weighted_sum(upsample_nearest(t, 2), r); }, x);
    EXPECT_LT(relative_error(upsample_nearest_backward(r, 2), fd), 1e-5);
}

TEST(Channels, ConcatSplitRoundtrip) {
    Rng rng = make_rng(15, "t");
    const Tensor a = random_tensor({2, 3, 2, 2}, rng), b = random_tensor({2, 1, 2, 2}, rng);
    const Tensor cat = concat_channels(a, b);
    EXPECT_EQ(cat.shape(), (Shape{2, 4, 2, 2}));
    const auto [x, y] = split_channels(cat, 3);
    EXPECT_EQ(x, a);
    EXPECT_EQ(y, b);
}

TEST(Batch, StackSliceUnstack) {
    Rng rng = make_rng(16, "t");
    const Tensor a = random_tensor({2, 3, 3}, rng), b = random_tensor({2, 3, 3}, rng);
    const Tensor s = stack_batch({a, b});
    EXPECT_EQ(s.shape(), (Shape{2, 2, 3, 3}));
    EXPECT_EQ(unstack_item(s, 1), b);
    EXPECT_EQ(slice_batch(s, 0, 1).shape(), (Shape{1, 2, 3, 3}));
    EXPECT_THROW(stack_batch({a, Tensor({1, 3, 3})}), ShapeError);
}

// ---------------------------------------------------------------------------
// Adam and the finite-difference oracle

TEST(Adam, FirstStepMovesByLearningRate) {
    Parameter p("p", Tensor({1}, 0.0));
    p.grad[0] = 1.0;
    adam_step(p, AdamHyper{});
    EXPECT_NEAR(p.value[0], -0.0008, 1e-6);
    EXPECT_EQ(p.step_count, 1);
    EXPECT_EQ(p.grad[0], 0.0);
}

TEST(Adam, ZeroGradLeavesValue) {
    Parameter p("p", Tensor({3}, 1.5));
    adam_step(p, AdamHyper{});
    EXPECT_EQ(p.value, Tensor({3}, 1.5));
}

TEST(Adam, QuadraticDecreases) {
    Parameter p("p", Tensor({1}, 1.0));
    for (int i = 0; i < 400; ++i) {
        p.grad[0] = 2.0 * p.value[0];
        adam_step(p, AdamHyper{});
    }
    EXPECT_LT(std::abs(p.value[0]), 0.8);
}

TEST(Adam, NonFiniteGradThrows) {
    Parameter p("p", Tensor({2}, 0.0));
    p.grad[1] = std::nan("");
    EXPECT_THROW(adam_step(p, AdamHyper{}), NumericError);
}

TEST(Adam, DeterministicGivenState) {
    Parameter a("p", Tensor({4}, 0.3)), b("p", Tensor({4}, 0.3));
    for (int i = 0; i < 5; ++i) {
        for (std::size_t k = 0; k < 4; ++k) a.grad[k] = b.grad[k] = std::sin(0.7 * i + k);
        adam_step(a, AdamHyper{});
        adam_step(b, AdamHyper{});
    }
    EXPECT_EQ(a.value, b.value);
    EXPECT_EQ(a.adam_v, b.adam_v);
}

TEST(Adam, HyperValidation) {
    EXPECT_THROW((AdamHyper{0.0}.validate()), ConfigError);
    EXPECT_THROW((AdamHyper{0.001, 1.0}.validate()), ConfigError);
    EXPECT_THROW((AdamHyper{0.001, 0.9, 0.0}.validate()), ConfigError);
    EXPECT_THROW((AdamHyper{0.001, 0.9, 0.999, 0.0}.validate()), ConfigError);
    EXPECT_NO_THROW(AdamHyper{}.validate());
}

TEST(FiniteDiff, SumGivesOnes) {
    Rng rng = make_rng(17, "t");
    const Tensor x = random_tensor({3, 4}, rng);
    const Tensor g = finite_diff_grad([](const Tensor& t) { return t.sum(); }, x);
    for (double v : g.values()) EXPECT_NEAR(v, 1.0, 1e-10);
}

TEST(FiniteDiff, SquareAtThree) {
    const Parameter p("theta", Tensor({1}, 3.0));
    const Tensor g = finite_diff_grad([](const Tensor& t) { return t[0] * t[0]; }, p);
    EXPECT_NEAR(g[0], 6.0, 1e-6);
}

TEST(FiniteDiff, RelativeErrorProperties) {
    const Tensor a({2}, std::vector<double>{3, 4});
    EXPECT_EQ(relative_error(a, a), 0.0);
    EXPECT_EQ(relative_error(Tensor({2}), Tensor({2})), 0.0);
    EXPECT_NEAR(relative_error(a, Tensor({2})), 1.0, 1e-15);
}

TEST(FiniteDiff, KinkAwareRecoversOneSidedSlopeNearAKink) {
    // leaky ReLU with its kink 1e-7 to the left of the probe point: slope 1 at x
    Tensor x({2}, std::vector<double>{1e-7, 2.0});
    auto f = [&] { return (x[0] > 0.0 ? x[0] : 0.2 * x[0]) + x[1] * x[1]; };
    const Tensor analytic({2}, std::vector<double>{1.0, 4.0});
    EXPECT_GT(std::abs(finite_diff_grad_inplace(f, x, 1e-5)[0] - 1.0), 0.1);
    const Tensor g = finite_diff_grad_kink_aware(f, x, analytic);
    EXPECT_NEAR(g[0], 1.0, 1e-6);
    EXPECT_NEAR(g[1], 4.0, 1e-6);
}

TEST(FiniteDiff, KinkAwareStillExposesWrongGradients) {
    Tensor x({2}, std::vector<double>{0.5, 2.0});
    auto f = [&] { return x[0] * x[0] * x[0] + x[1] * x[1]; };
    const Tensor wrong({2}, std::vector<double>{0.5, 4.0});  // true d/dx0 is 0.75
    EXPECT_NEAR(finite_diff_grad_kink_aware(f, x, wrong)[0], 0.75, 1e-6);
}
