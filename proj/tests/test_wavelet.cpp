#include <gtest/gtest.h>

#include "bsgan/nn.hpp"
#include "bsgan/wavelet.hpp"

using namespace bsgan;

namespace {

Tensor random_image(Rng& rng, std::size_t h, std::size_t w) { return random_tensor({h, w}, rng, -1.0, 1.0); }

// Integer-valued image: every Haar sum and the halving are exact in binary floating point.
Tensor integer_image(Rng& rng, std::size_t h, std::size_t w) {
    Tensor t({h, w});
    for (double& v : t.storage()) v = static_cast<double>(uniform_index(rng, 201)) - 100.0;
    return t;
}

void expect_bands_eq(const SubbandSet& a, const SubbandSet& b) {
    EXPECT_EQ(a.ll, b.ll);
    EXPECT_EQ(a.lh, b.lh);
    EXPECT_EQ(a.hl, b.hl);
    EXPECT_EQ(a.hh, b.hh);
}

}  // namespace

TEST(HaarDecompose, SingleBlockGolden) {
    const SubbandSet s = haar_decompose(Tensor({2, 2}, std::vector<double>{1, 2, 3, 4}));
    EXPECT_EQ(s.ll[0], 5.0);
    EXPECT_EQ(s.lh[0], -1.0);
    EXPECT_EQ(s.hl[0], -2.0);
    EXPECT_EQ(s.hh[0], 0.0);
}

TEST(HaarDecompose, ConstantImageHasOnlyApproximation) {
    const SubbandSet s = haar_decompose(Tensor({6, 8}, 1.25));
    EXPECT_EQ(s.ll, Tensor({3, 4}, 2.5));
    for (const Tensor* b : {&s.lh, &s.hl, &s.hh}) EXPECT_EQ(*b, Tensor({3, 4}, 0.0));
}

TEST(HaarDecompose, CheckerboardIsPureDiagonal) {
    Tensor img({4, 6});
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 6; ++x) img.at(y, x) = (x + y) % 2 ? -1.0 : 1.0;
    const SubbandSet s = haar_decompose(img);
    for (const Tensor* b : {&s.ll, &s.lh, &s.hl}) EXPECT_EQ(*b, Tensor({2, 3}, 0.0));
    for (double v : s.hh.values()) EXPECT_EQ(std::abs(v), 2.0);
}

TEST(HaarDecompose, OddExtentAsksForPadding) {
    try {
        haar_decompose(Tensor({5, 4}));
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        EXPECT_NE(std::string(e.what()).find("pad"), std::string::npos);
    }
    EXPECT_THROW(haar_decompose(Tensor({4, 7})), ShapeError);
    EXPECT_THROW(haar_decompose(Tensor({1, 4, 4})), ShapeError);
}

TEST(HaarReconstruct, ZeroBandsGiveZeroImage) {
    const Tensor z({3, 3});
    EXPECT_EQ(haar_reconstruct({z, z, z, z}), Tensor({6, 6}, 0.0));
}

TEST(HaarReconstruct, ApproximationOnlyGivesFlatBlocks) {
    Rng rng = make_rng(1, "t");
    const Tensor ll = random_image(rng, 3, 2), z({3, 2});
    const Tensor img = haar_reconstruct({ll, z, z, z});
    for (std::size_t y = 0; y < 6; ++y)
        for (std::size_t x = 0; x < 4; ++x) EXPECT_EQ(img.at(y, x), 0.5 * ll.at(y / 2, x / 2));
}

TEST(HaarReconstruct, MismatchedBandsThrow) {
    EXPECT_THROW(haar_reconstruct({Tensor({2, 2}), Tensor({2, 2}), Tensor({2, 3}), Tensor({2, 2})}), ShapeError);
}

TEST(Haar, RoundTripAndParsevalOnRandomImages) {
    Rng rng = make_rng(2, "t");
    for (int i = 0; i < 200; ++i) {
        const std::size_t h = 2 * (1 + uniform_index(rng, 20)), w = 2 * (1 + uniform_index(rng, 20));
        const Tensor x = random_image(rng, h, w);
        const SubbandSet s = haar_decompose(x);
        EXPECT_LT(max_abs_diff(haar_reconstruct(s), x), 1e-10);
        EXPECT_NEAR(s.energy(), x.sum_squares(), 1e-10);
    }
}

TEST(Haar, LinearityIsExactOnIntegerImages) {
    Rng rng = make_rng(3, "t");
    for (int i = 0; i < 50; ++i) {
        const Tensor x = integer_image(rng, 8, 10), y = integer_image(rng, 8, 10);
        const SubbandSet sx = haar_decompose(x), sy = haar_decompose(y);
        const SubbandSet lhs = haar_decompose(x * 2.0 + y * -3.0);
        expect_bands_eq(lhs, {sx.ll * 2.0 + sy.ll * -3.0, sx.lh * 2.0 + sy.lh * -3.0, sx.hl * 2.0 + sy.hl * -3.0,
                              sx.hh * 2.0 + sy.hh * -3.0});
    }
}

TEST(Haar, LinearityOnRealImagesToRoundoff) {
    Rng rng = make_rng(4, "t");
    const Tensor x = random_image(rng, 16, 16), y = random_image(rng, 16, 16);
    const double a = 0.37, b = -1.9;
    const SubbandSet sx = haar_decompose(x), sy = haar_decompose(y), s = haar_decompose(x * a + y * b);
    EXPECT_LT(max_abs_diff(s.hh, sx.hh * a + sy.hh * b), 1e-14);
    EXPECT_LT(max_abs_diff(s.ll, sx.ll * a + sy.ll * b), 1e-14);
}

TEST(Subbands, PackOrderAndRoundTrip) {
    Rng rng = make_rng(5, "t");
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{2, 2}, {6, 10}, {64, 64}}) {
        const SubbandSet s = haar_decompose(random_image(rng, h, w));
        const Tensor p = pack_subbands(s);
        EXPECT_EQ(p.shape(), (Shape{4, h / 2, w / 2}));
        EXPECT_EQ(unstack_item(p, 0), s.ll);
        expect_bands_eq(unpack_subbands(p), s);
        EXPECT_EQ(pack_subbands(unpack_subbands(p)), p);
    }
    EXPECT_THROW(unpack_subbands(Tensor({3, 2, 2})), ShapeError);
}

TEST(Subbands, BatchHelpersAreMutualInverses) {
    Rng rng = make_rng(6, "t");
    const Tensor imgs = random_tensor({3, 1, 8, 12}, rng);
    const Tensor bands = haar_forward_batch(imgs);
    EXPECT_EQ(bands.shape(), (Shape{3, 4, 4, 6}));
    EXPECT_LT(max_abs_diff(haar_inverse_batch(bands), imgs), 1e-14);
    EXPECT_THROW(haar_forward_batch(Tensor({1, 2, 4, 4})), ShapeError);
    EXPECT_THROW(haar_inverse_batch(Tensor({1, 3, 4, 4})), ShapeError);
}
