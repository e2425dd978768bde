#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <set>

#include "bsgan/impipe.hpp"

using namespace bsgan;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("bsgan_test_impipe_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

RawImage random_raw(Rng& rng, std::size_t w, std::size_t h, std::uint16_t maxval = 65535) {
    RawImage img(w, h, maxval);
    for (auto& p : img.pixels) p = static_cast<std::uint16_t>(uniform_index(rng, std::size_t{maxval} + 1));
    return img;
}

// Smooth-histogram image: clipped Gaussian gray levels.
RawImage gaussian_raw(Rng& rng, std::size_t w, std::size_t h, double mean, double sd) {
    RawImage img(w, h);
    for (auto& p : img.pixels) p = static_cast<std::uint16_t>(std::clamp(std::lround(normal(rng, mean, sd)), 0L, 65535L));
    return img;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

// ---------------------------------------------------------------------------
// PGM

TEST(Pgm, SixteenBitRoundTripIsExact) {
    Rng rng = make_rng(1, "t");
    const fs::path dir = scratch("pgm16");
    const RawImage img = random_raw(rng, 13, 7);
    write_pgm(dir / "a.pgm", img);
    EXPECT_EQ(read_pgm(dir / "a.pgm"), img);
    const std::string bytes = slurp(dir / "a.pgm");
    EXPECT_EQ(bytes.substr(0, 14), "P5\n13 7\n65535\n");
    EXPECT_EQ(bytes.size(), 14u + 2 * 13 * 7);
    // big-endian samples
    EXPECT_EQ(static_cast<unsigned char>(bytes[14]), img.pixels[0] >> 8);
}

TEST(Pgm, EightBitFilesAreWidened) {
    const fs::path dir = scratch("pgm8");
    {
        std::ofstream out(dir / "b.pgm", std::ios::binary);
        out << "P5\n# comment\n3 1\n255\n";
        out.put(static_cast<char>(0)).put(static_cast<char>(128)).put(static_cast<char>(255));
    }
    const RawImage img = read_pgm(dir / "b.pgm");
    EXPECT_EQ(img.maxval, 255);
    EXPECT_EQ(img.pixels, (std::vector<std::uint16_t>{0, 128, 255}));
    EXPECT_EQ(to_unit(img)[2], 1.0);
}

TEST(Pgm, MalformedFilesNameThePath) {
    const fs::path dir = scratch("pgmbad");
    std::ofstream(dir / "magic.pgm") << "P2\n1 1\n255\n0\n";
    std::ofstream(dir / "short.pgm", std::ios::binary) << "P5\n4 4\n65535\nab";
    std::ofstream(dir / "header.pgm") << "P5\nfour 4\n255\n";
    for (const char* name : {"magic.pgm", "short.pgm", "header.pgm", "missing.pgm"}) {
        try {
            read_pgm(dir / name);
            FAIL() << name;
        } catch (const DataError& e) {
            EXPECT_NE(std::string(e.what()).find(name), std::string::npos) << e.what();
        }
    }
}

TEST(RawImage, UnitConversionRoundTrip) {
    Rng rng = make_rng(2, "t");
    const RawImage img = random_raw(rng, 8, 6);
    EXPECT_EQ(from_unit(to_unit(img)), img);
    EXPECT_EQ(to_unit(img).shape(), (Shape{6, 8}));
}

// ---------------------------------------------------------------------------
// windowing and normalization

TEST(LinearWindow, Goldens) {
    RawImage img(4, 1);
    img.pixels = {2048, 0, 3072, 60000};
    const Tensor w = linear_window(img, 2048, 4096);
    EXPECT_EQ(w[0], 0.5);
    EXPECT_EQ(w[1], 0.0);
    EXPECT_EQ(w[2], 0.75);
    EXPECT_EQ(w[3], 1.0);
    EXPECT_EQ(linear_window(img, 3000, 100)[1], 0.0);
    EXPECT_THROW(linear_window(img, 0, 0), ConfigError);
}

TEST(ZScore, MeanZeroUnitDeviation) {
    Rng rng = make_rng(3, "t");
    const Tensor x = random_tensor({17, 11}, rng, 2.0, 5.0);
    const Tensor z = normalize_zscore(x);
    const double n = static_cast<double>(z.size());
    double mean = z.sum() / n, var = 0.0;
    for (double v : z.values()) var += (v - mean) * (v - mean);
    EXPECT_LT(std::abs(mean), 1e-12);
    EXPECT_LT(std::abs(std::sqrt(var / n) - 1.0), 1e-12);
}

TEST(ZScore, MatchesTwoPassOracleAndIsAffineInvariant) {
    Rng rng = make_rng(4, "t");
    const Tensor x = random_tensor({9, 9}, rng);
    double m = 0.0;
    for (double v : x.values()) m += v;
    m /= 81.0;
    double ss = 0.0;
    for (double v : x.values()) ss += (v - m) * (v - m);
    const double sd = std::sqrt(ss / 81.0);
    const Tensor z = normalize_zscore(x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(z[i], (x[i] - m) / sd, 1e-13);
    EXPECT_LT(max_abs_diff(normalize_zscore(x * 3.5 + Tensor(x.shape(), -7.0)), z), 1e-12);
    EXPECT_LT(max_abs_diff(undo_zscore(z, zscore_stats(x)), x), 1e-14);
}

TEST(ZScore, ConstantImageThrows) { EXPECT_THROW(normalize_zscore(Tensor({3, 3}, 0.4)), NumericError); }

// ---------------------------------------------------------------------------
// histogram matching

TEST(HistogramMatch, SelfMatchIsIdentity) {
    Rng rng = make_rng(5, "t");
    const RawImage img = gaussian_raw(rng, 64, 64, 30000, 8000);
    const RawImage out = histogram_match(img, img);
    for (std::size_t i = 0; i < img.pixels.size(); ++i)
        EXPECT_LE(std::abs(int{out.pixels[i]} - int{img.pixels[i]}), 1);
}

TEST(HistogramMatch, HalfRangeUniformIsDoubled) {
    RawImage src(256, 256), tgt(256, 256);
    for (std::size_t i = 0; i < src.pixels.size(); ++i) {
        src.pixels[i] = static_cast<std::uint16_t>(i / 2);  // 0..32767, each level twice
        tgt.pixels[i] = static_cast<std::uint16_t>(i);      // 0..65535, each level once
    }
    const RawImage out = histogram_match(src, tgt);
    for (std::size_t i = 0; i < src.pixels.size(); ++i)
        EXPECT_LE(std::abs(int{out.pixels[i]} - 2 * int{src.pixels[i]}), 2) << src.pixels[i];
}

TEST(HistogramMatch, PreservesRankOrder) {
    Rng rng = make_rng(6, "t");
    const RawImage src = random_raw(rng, 40, 40), tgt = gaussian_raw(rng, 30, 50, 20000, 5000);
    const RawImage out = histogram_match(src, tgt);
    std::vector<std::size_t> order(src.pixels.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return src.pixels[a] < src.pixels[b]; });
    for (std::size_t i = 1; i < order.size(); ++i) EXPECT_LE(out.pixels[order[i - 1]], out.pixels[order[i]]);
}

TEST(HistogramMatch, CdfDistanceWithinOnePart256) {
    Rng rng = make_rng(7, "t");
    for (int trial = 0; trial < 10; ++trial) {
        const RawImage src = gaussian_raw(rng, 64, 64, uniform(rng, 15000, 45000), uniform(rng, 2000, 9000));
        const RawImage tgt = gaussian_raw(rng, 64, 64, uniform(rng, 15000, 45000), uniform(rng, 2000, 9000));
        EXPECT_LE(kolmogorov_distance(histogram_match(src, tgt), tgt), 1.0 / 256.0);
    }
    const PhantomPair a = generate_phantom(1, 64), b = generate_phantom(2, 64);
    EXPECT_LE(kolmogorov_distance(histogram_match(a.composite, b.clean), b.clean), 1.0 / 256.0);
}

TEST(HistogramMatch, IsIdempotent) {
    Rng rng = make_rng(8, "t");
    const RawImage src = gaussian_raw(rng, 48, 48, 25000, 6000), tgt = gaussian_raw(rng, 48, 48, 40000, 3000);
    const RawImage once = histogram_match(src, tgt), twice = histogram_match(once, tgt);
    for (std::size_t i = 0; i < once.pixels.size(); ++i)
        EXPECT_LE(std::abs(int{once.pixels[i]} - int{twice.pixels[i]}), 1);
}

TEST(HistogramMatch, OutputLevelsComeFromTarget) {
    Rng rng = make_rng(9, "t");
    const RawImage src = random_raw(rng, 20, 20), tgt = random_raw(rng, 10, 10, 1000);
    const RawImage out = histogram_match(src, tgt);
    const std::set<std::uint16_t> levels(tgt.pixels.begin(), tgt.pixels.end());
    EXPECT_EQ(out.maxval, 1000);
    for (auto p : out.pixels) EXPECT_TRUE(levels.contains(p));
}

TEST(Kolmogorov, Basics) {
    Rng rng = make_rng(10, "t");
    const RawImage a = random_raw(rng, 8, 8);
    EXPECT_EQ(kolmogorov_distance(a, a), 0.0);
    RawImage lo(2, 1), hi(2, 1);
    hi.pixels = {60000, 60000};
    EXPECT_EQ(kolmogorov_distance(lo, hi), 1.0);
}

// ---------------------------------------------------------------------------
// phantoms

TEST(Phantom, DeterministicAndAdditive) {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const PhantomPair a = generate_phantom(seed, 64), b = generate_phantom(seed, 64);
        ASSERT_EQ(a.composite, b.composite);
        ASSERT_EQ(a.clean, b.clean);
        ASSERT_EQ(a.mask, b.mask);
        for (std::size_t i = 0; i < a.clean.pixels.size(); ++i)
            ASSERT_EQ(a.composite.pixels[i] - a.bones.pixels[i], a.clean.pixels[i]);
    }
    EXPECT_NE(generate_phantom(1, 64).composite, generate_phantom(2, 64).composite);
}

TEST(Phantom, BandFractionWithinConfiguredRange) {
    const PhantomConfig cfg;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const double f = generate_phantom(seed, 64, cfg).band_fraction();
        EXPECT_GE(f, cfg.band_fraction_min) << seed;
        EXPECT_LE(f, cfg.band_fraction_max) << seed;
    }
}

TEST(Phantom, BonesCrossTheLungs) {
    const PhantomPair p = generate_phantom(5, 64);
    std::size_t inside = 0, mask_pixels = 0;
    for (std::size_t i = 0; i < p.mask.pixels.size(); ++i) {
        mask_pixels += p.mask_at(i);
        inside += p.mask_at(i) && p.bones.pixels[i] > 0;
    }
    EXPECT_GT(mask_pixels, 64u * 64u / 5);
    EXPECT_GT(inside, 0u);
}

TEST(Phantom, SizeErrors) {
    EXPECT_THROW(generate_phantom(1, 63), ConfigError);
    EXPECT_THROW(generate_phantom(1, 6), ConfigError);
    PhantomConfig bad;
    bad.bands_min = 5;
    bad.bands_max = 2;
    EXPECT_THROW(generate_phantom(1, 32, bad), ConfigError);
}

// ---------------------------------------------------------------------------
// split and dataset layout

TEST(Split, EightyTenTen) {
    const Split s = split_dataset(10, {});
    EXPECT_EQ(s.train.size(), 8u);
    EXPECT_EQ(s.val.size(), 1u);
    EXPECT_EQ(s.test.size(), 1u);
}

TEST(Split, DisjointExhaustiveAndSeeded) {
    for (std::size_t n : {1u, 7u, 10u, 200u}) {
        const Split s = split_dataset(n, {0.8, 0.1, 0.1, 4});
        std::set<std::size_t> all;
        for (const auto* part : {&s.train, &s.val, &s.test}) all.insert(part->begin(), part->end());
        EXPECT_EQ(all.size(), n);
        EXPECT_EQ(s.train.size() + s.val.size() + s.test.size(), n);
        const Split again = split_dataset(n, {0.8, 0.1, 0.1, 4});
        EXPECT_EQ(s.train, again.train);
        EXPECT_EQ(s.test, again.test);
    }
    EXPECT_THROW(split_dataset(10, {0.5, 0.1, 0.1, 0}), ConfigError);
}

TEST(Dataset, WriteLoadRoundTrip) {
    const fs::path root = scratch("ds");
    write_phantom_dataset(root, 10, 32, 5);
    const auto items = load_dataset(root);
    ASSERT_EQ(items.size(), 10u);
    EXPECT_EQ(items_in_split(items, "train").size(), 8u);
    EXPECT_EQ(items_in_split(items, "val").size(), 1u);
    EXPECT_EQ(items_in_split(items, "test").size(), 1u);
    for (const auto& it : items) {
        EXPECT_TRUE(fs::exists(root / it.split / (it.id + "_composite.pgm")));
        const PhantomPair p = generate_phantom(it.seed, 32);
        EXPECT_EQ(p.composite, it.composite);
        EXPECT_EQ(p.clean, it.clean);
    }
    EXPECT_EQ(slurp(root / "manifest.csv").substr(0, 13), "id,split,seed");
}

TEST(Dataset, RewriteIsByteIdentical) {
    const fs::path a = scratch("dsa"), b = scratch("dsb");
    write_phantom_dataset(a, 6, 16, 9);
    write_phantom_dataset(b, 6, 16, 9);
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) {
            EXPECT_EQ(slurp(e.path()), slurp(b / fs::relative(e.path(), a))) << e.path();
        }
}

TEST(Dataset, Errors) {
    EXPECT_THROW(load_dataset(scratch("empty")), DataError);
    EXPECT_THROW(write_phantom_dataset(scratch("odd"), 4, 63, 1), ConfigError);
    const fs::path root = scratch("badmanifest");
    std::ofstream(root / "manifest.csv") << "name,split\n";
    EXPECT_THROW(load_dataset(root), DataError);
}
