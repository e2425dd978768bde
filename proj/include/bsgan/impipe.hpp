#pragma once

// Image I/O, preprocessing, histogram matching and the synthetic paired-phantom dataset.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "bsgan/tensor.hpp"

namespace bsgan {

namespace fs = std::filesystem;

/// 16-bit grayscale raster.
struct RawImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::uint16_t maxval = 65535;
    std::vector<std::uint16_t> pixels;

    RawImage() = default;
    RawImage(std::size_t w, std::size_t h, std::uint16_t max = 65535)
        : width(w), height(h), maxval(max), pixels(w * h, 0) {}

    std::uint16_t& at(std::size_t y, std::size_t x) { return pixels[y * width + x]; }
    std::uint16_t at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }

    void validate() const {
        if (pixels.size() != width * height) throw DataError("RawImage: pixel count does not match extents");
        if (maxval == 0) throw DataError("RawImage: maxval must be positive");
        for (auto p : pixels)
            if (p > maxval) throw DataError("RawImage: pixel value exceeds declared maxval");
    }

    bool operator==(const RawImage&) const = default;
};

// ---------------------------------------------------------------------------
// PGM (P5)

inline RawImage read_pgm(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    auto fail = [&](const std::string& what) { return DataError(path.string() + ": " + what); };

    auto next_token = [&]() {
        std::string tok;
        int c = in.get();
        while (c != EOF) {
            if (c == '#') {
                while (c != EOF && c != '\n') c = in.get();
            } else if (!std::isspace(c)) {
                break;
            }
            c = in.get();
        }
        while (c != EOF && !std::isspace(c)) {
            tok.push_back(static_cast<char>(c));
            c = in.get();
        }
        return tok;  // the single whitespace after the token is consumed
    };

    if (next_token() != "P5") throw fail("not a binary PGM (magic P5 expected)");
    RawImage img;
    try {
        img.width = std::stoul(next_token());
        img.height = std::stoul(next_token());
        const unsigned long maxval = std::stoul(next_token());
        if (maxval == 0 || maxval > 65535) throw fail("maxval out of range");
        img.maxval = static_cast<std::uint16_t>(maxval);
    } catch (const std::logic_error&) {
        throw fail("malformed header");
    }
    if (img.width == 0 || img.height == 0) throw fail("empty image");
    const std::size_t n = img.width * img.height;
    img.pixels.resize(n);
    if (img.maxval < 256) {
        std::vector<unsigned char> buf(n);
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n))) throw fail("truncated data");
        for (std::size_t i = 0; i < n; ++i) img.pixels[i] = buf[i];
    } else {
        std::vector<unsigned char> buf(2 * n);
        if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(2 * n)))
            throw fail("truncated data");
        for (std::size_t i = 0; i < n; ++i)
            img.pixels[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    }
    for (auto p : img.pixels)
        if (p > img.maxval) throw fail("sample exceeds maxval");
    return img;
}

inline void write_pgm(const fs::path& path, const RawImage& img) {
    img.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << "P5\n" << img.width << ' ' << img.height << '\n' << img.maxval << '\n';
    if (img.maxval < 256) {
        std::vector<unsigned char> buf(img.pixels.begin(), img.pixels.end());
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    } else {
        std::vector<unsigned char> buf(2 * img.pixels.size());
        for (std::size_t i = 0; i < img.pixels.size(); ++i) {
            buf[2 * i] = static_cast<unsigned char>(img.pixels[i] >> 8);
            buf[2 * i + 1] = static_cast<unsigned char>(img.pixels[i] & 0xff);
        }
        out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    }
    if (!out) throw DataError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// conversions and preprocessing

/// Pixel / maxval as a [height, width] tensor.
inline Tensor to_unit(const RawImage& img) {
    Tensor t({img.height, img.width});
    const double scale = 1.0 / img.maxval;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) t[i] = img.pixels[i] * scale;
    return t;
}

/// Inverse of to_unit with rounding; values are clipped to [0, 1] first.
inline RawImage from_unit(const Tensor& t, std::uint16_t maxval = 65535) {
    require_rank(t, 2, "from_unit");
    RawImage img(t.dim(1), t.dim(0), maxval);
    for (std::size_t i = 0; i < t.size(); ++i)
        img.pixels[i] = static_cast<std::uint16_t>(std::lround(std::clamp(t[i], 0.0, 1.0) * maxval));
    return img;
}

/// clamp((p - (center - width/2)) / width, 0, 1)
inline Tensor linear_window(const RawImage& img, double center, double width) {
    if (!(width > 0.0)) throw ConfigError("linear_window: width must be positive");
    Tensor t({img.height, img.width});
    const double lo = center - width / 2.0;
    for (std::size_t i = 0; i < img.pixels.size(); ++i) t[i] = std::clamp((img.pixels[i] - lo) / width, 0.0, 1.0);
    return t;
}

struct ZScoreStats {
    double mean = 0.0;
    double stddev = 1.0;
};

inline ZScoreStats zscore_stats(const Tensor& img) {
    if (img.empty()) throw ShapeError("zscore: empty image");
    const double n = static_cast<double>(img.size());
    const double mean = img.sum() / n;
    const auto [lo, hi] = std::minmax_element(img.values().begin(), img.values().end());
    if (*lo == *hi) return {*lo, 0.0};  // the rounded mean of a constant image need not equal it
    double ss = 0.0;
    for (double v : img.values()) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / n)};
}

inline Tensor apply_zscore(const Tensor& img, const ZScoreStats& st) {
    if (!(st.stddev > 0.0)) throw NumericError("zscore: image has zero standard deviation");
    Tensor out(img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = (img[i] - st.mean) / st.stddev;
    return out;
}

inline Tensor undo_zscore(const Tensor& img, const ZScoreStats& st) {
    Tensor out(img.shape());
    for (std::size_t i = 0; i < img.size(); ++i) out[i] = img[i] * st.stddev + st.mean;
    return out;
}

/// Zero mean, unit (population) standard deviation. Throws on constant images.
inline Tensor normalize_zscore(const Tensor& img) { return apply_zscore(img, zscore_stats(img)); }

// ---------------------------------------------------------------------------
// histogram matching

/// Monotone gray-level map sending the source CDF onto the target CDF. Each source bin is
/// sent to the occupied target bin whose CDF value is nearest to the source bin's CDF value
/// (ties go to the darker bin), so output levels are always levels present in the target.
inline RawImage histogram_match(const RawImage& source, const RawImage& target, std::size_t n_bins = 65536) {
    source.validate();
    target.validate();
    if (n_bins == 0) throw ConfigError("histogram_match: n_bins must be positive");
    if (source.pixels.empty() || target.pixels.empty()) throw DataError("histogram_match: empty image");

    auto bin_of = [n_bins](std::uint16_t p, std::uint16_t maxval) {
        return std::min<std::size_t>(n_bins - 1, static_cast<std::size_t>(p) * n_bins / (std::size_t{maxval} + 1));
    };
    std::vector<std::size_t> src_hist(n_bins, 0), tgt_hist(n_bins, 0);
    for (auto p : source.pixels) ++src_hist[bin_of(p, source.maxval)];
    // representative level per target bin: the smallest target level that falls in it
    std::vector<std::uint16_t> tgt_level(n_bins, 0);
    std::vector<bool> seen(n_bins, false);
    for (auto p : target.pixels) {
        const std::size_t b = bin_of(p, target.maxval);
        ++tgt_hist[b];
        if (!seen[b] || p < tgt_level[b]) tgt_level[b] = p;
        seen[b] = true;
    }

    std::vector<double> occ_cdf;
    std::vector<std::uint16_t> occ_level;
    std::size_t acc = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        if (!tgt_hist[b]) continue;
        acc += tgt_hist[b];
        occ_cdf.push_back(static_cast<double>(acc) / static_cast<double>(target.pixels.size()));
        occ_level.push_back(tgt_level[b]);
    }

    std::vector<std::uint16_t> lut(n_bins, 0);
    acc = 0;
    for (std::size_t b = 0; b < n_bins; ++b) {
        acc += src_hist[b];
        if (!src_hist[b]) continue;
        const double c = static_cast<double>(acc) / static_cast<double>(source.pixels.size());
        auto it = std::lower_bound(occ_cdf.begin(), occ_cdf.end(), c);
        std::size_t k = it == occ_cdf.end() ? occ_cdf.size() - 1 : static_cast<std::size_t>(it - occ_cdf.begin());
        if (k > 0 && std::abs(occ_cdf[k - 1] - c) <= std::abs(occ_cdf[k] - c)) --k;
        lut[b] = occ_level[k];
    }

    RawImage out(source.width, source.height, target.maxval);
    for (std::size_t i = 0; i < source.pixels.size(); ++i) out.pixels[i] = lut[bin_of(source.pixels[i], source.maxval)];
    return out;
}

/// Empirical CDF over gray levels 0..maxval.
inline std::vector<double> gray_cdf(const RawImage& img, std::uint16_t maxval) {
    std::vector<double> cdf(std::size_t{maxval} + 1, 0.0);
    for (auto p : img.pixels) cdf[std::min<std::size_t>(p, maxval)] += 1.0;
    double acc = 0.0;
    for (double& c : cdf) {
        acc += c;
        c = acc / static_cast<double>(img.pixels.size());
    }
    return cdf;
}

/// sup |F_a - F_b| over gray levels.
inline double kolmogorov_distance(const RawImage& a, const RawImage& b) {
    const std::uint16_t m = std::max(a.maxval, b.maxval);
    const auto ca = gray_cdf(a, m), cb = gray_cdf(b, m);
    double d = 0.0;
    for (std::size_t i = 0; i < ca.size(); ++i) d = std::max(d, std::abs(ca[i] - cb[i]));
    return d;
}

// ---------------------------------------------------------------------------
// synthetic paired phantoms

struct PhantomConfig {
    std::size_t bands_min = 3;
    std::size_t bands_max = 6;
    double band_fraction_min = 0.05;  // fraction of pixels covered by bone bands
    double band_fraction_max = 0.30;
    double bone_amplitude_min = 0.12;
    double bone_amplitude_max = 0.25;
};

/// Gray levels on a 16-bit scale; composite == clean + bones exactly.
struct PhantomPair {
    RawImage clean;
    RawImage bones;
    RawImage composite;
    RawImage mask;  // 0 / maxval; the soft-tissue (lung) region

    double band_fraction() const {
        std::size_t n = 0;
        for (auto p : bones.pixels) n += p > 0;
        return static_cast<double>(n) / static_cast<double>(bones.pixels.size());
    }
    bool mask_at(std::size_t i) const { return mask.pixels[i] != 0; }
};

namespace detail {

inline double smoothstep(double e0, double e1, double x) {
    const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

inline double segment_distance(double px, double py, double ax, double ay, double bx, double by) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (ax + t * vx), dy = py - (ay + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

// Rounded-rectangle lung field: |du/rx|^4 + |dv/ry|^4 <= 1.
struct LungField {
    double cx, cy, rx, ry;
    double radius(double u, double v) const {
        const double a = (u - cx) / rx, b = (v - cy) / ry;
        return std::sqrt(std::sqrt(a * a * a * a + b * b * b * b));
    }
};

}  // namespace detail

inline PhantomPair generate_phantom(std::uint64_t seed, std::size_t size, const PhantomConfig& cfg = {}) {
    if (size == 0 || size % 2)
        throw ConfigError("generate_phantom: size " + std::to_string(size) + " must be even (wavelet constraint)");
    if (size < 8) throw ConfigError("generate_phantom: size must be at least 8");
    if (cfg.bands_min == 0 || cfg.bands_min > cfg.bands_max) throw ConfigError("generate_phantom: bad band count range");
    if (!(cfg.band_fraction_min < cfg.band_fraction_max)) throw ConfigError("generate_phantom: bad band fraction range");

    Rng rng = make_rng(seed, "phantom");
    const std::size_t n = size * size;
    const double px = 1.0 / static_cast<double>(size);
    auto coord = [&](std::size_t i) { return std::pair{((i % size) + 0.5) * px, ((i / size) + 0.5) * px}; };

    // lungs
    const std::array<detail::LungField, 2> lungs{
        detail::LungField{0.27 + uniform(rng, -0.01, 0.01), 0.50 + uniform(rng, -0.03, 0.03), uniform(rng, 0.20, 0.22),
                          uniform(rng, 0.36, 0.40)},
        detail::LungField{0.73 + uniform(rng, -0.01, 0.01), 0.50 + uniform(rng, -0.03, 0.03), uniform(rng, 0.20, 0.22),
                          uniform(rng, 0.36, 0.40)}};

    // low-frequency body field
    struct Wave {
        double a, fx, fy, ph;
    };
    std::vector<Wave> waves(3);
    for (auto& w : waves)
        w = {uniform(rng, 0.01, 0.03), uniform(rng, 0.5, 2.0), uniform(rng, 0.5, 2.0), uniform(rng, 0.0, 6.283185307179586)};

    struct Blob {
        double cx, cy, sigma, amp;
    };
    std::vector<Blob> blobs(3 + uniform_index(rng, 4));
    for (auto& b : blobs)
        b = {uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.03, 0.08),
             (uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0) * uniform(rng, 0.02, 0.06)};

    // vessels: polylines from each hilum outward
    struct Vessel {
        std::vector<std::pair<double, double>> pts;
        double amp;
    };
    std::vector<Vessel> vessels(4 + uniform_index(rng, 5));
    for (std::size_t k = 0; k < vessels.size(); ++k) {
        const auto& lung = lungs[k % 2];
        const double sx = lung.cx + (k % 2 ? -0.6 : 0.6) * lung.rx, sy = lung.cy + uniform(rng, -0.1, 0.1);
        const double ang = uniform(rng, 0.0, 6.283185307179586);
        const double ex = lung.cx + 0.8 * lung.rx * std::cos(ang), ey = lung.cy + 0.8 * lung.ry * std::sin(ang);
        const double mx = 0.5 * (sx + ex) + uniform(rng, -0.05, 0.05), my = 0.5 * (sy + ey) + uniform(rng, -0.05, 0.05);
        Vessel v{{}, uniform(rng, 0.02, 0.04)};
        for (int s = 0; s <= 16; ++s) {
            const double t = s / 16.0;
            v.pts.emplace_back((1 - t) * (1 - t) * sx + 2 * (1 - t) * t * mx + t * t * ex,
                               (1 - t) * (1 - t) * sy + 2 * (1 - t) * t * my + t * t * ey);
        }
        vessels[k] = std::move(v);
    }

    Tensor clean({size, size});
    RawImage mask(size, size);
    const double vessel_sigma = 0.6 * px;
    for (std::size_t i = 0; i < n; ++i) {
        const auto [u, v] = coord(i);
        double val = 0.50;
        for (const auto& w : waves) val += w.a * std::cos(6.283185307179586 * (w.fx * u + w.fy * v) + w.ph);
        double lung_w = 0.0;
        for (const auto& l : lungs) {
            const double r = l.radius(u, v);
            lung_w = std::max(lung_w, 1.0 - detail::smoothstep(0.85, 1.05, r));
            if (r <= 1.0) mask.pixels[i] = mask.maxval;
        }
        val -= 0.18 * lung_w;
        for (const auto& b : blobs) {
            const double d2 = (u - b.cx) * (u - b.cx) + (v - b.cy) * (v - b.cy);
            val += b.amp * std::exp(-d2 / (2.0 * b.sigma * b.sigma));
        }
        for (const auto& ves : vessels) {
            double d = 1e9;
            for (std::size_t s = 0; s + 1 < ves.pts.size(); ++s)
                d = std::min(d, detail::segment_distance(u, v, ves.pts[s].first, ves.pts[s].second, ves.pts[s + 1].first,
                                                         ves.pts[s + 1].second));
            val += lung_w * ves.amp * std::exp(-d * d / (2.0 * vessel_sigma * vessel_sigma));
        }
        clean[i] = std::clamp(val, 0.02, 0.62);
    }

    // rib-like bands, redrawn until their coverage lands in the configured range
    Tensor bones({size, size});
    for (int attempt = 0;; ++attempt) {
        if (attempt == 200) throw NumericError("generate_phantom: could not meet band fraction range");
        bones.fill(0.0);
        const std::size_t nb = cfg.bands_min + uniform_index(rng, cfg.bands_max - cfg.bands_min + 1);
        const double spacing = 0.70 / static_cast<double>(nb);
        for (std::size_t k = 0; k < nb; ++k) {
            const double y0 = 0.15 + (static_cast<double>(k) + 0.5) * spacing + uniform(rng, -0.2, 0.2) * spacing;
            const double curve = uniform(rng, 0.15, 0.45), tilt = uniform(rng, -0.15, 0.15);
            const double half = 0.5 * uniform(rng, 0.04, 0.08);
            const double amp = uniform(rng, cfg.bone_amplitude_min, cfg.bone_amplitude_max);
            const double u0 = uniform(rng, 0.05, 0.12), u1 = uniform(rng, 0.88, 0.95);
            for (std::size_t i = 0; i < n; ++i) {
                const auto [u, v] = coord(i);
                if (u < u0 || u > u1) continue;
                const double yc = y0 - curve * (u - 0.5) * (u - 0.5) + tilt * (u - 0.5);
                const double d = std::abs(v - yc);
                if (d < half) bones[i] += amp * 0.5 * (1.0 + std::cos(3.141592653589793 * d / half));
            }
        }
        std::size_t covered = 0;
        for (double b : bones.values()) covered += std::lround(std::min(b, 0.35) * 65535.0) > 0;
        const double frac = static_cast<double>(covered) / static_cast<double>(n);
        if (frac >= cfg.band_fraction_min && frac <= cfg.band_fraction_max) break;
    }

    PhantomPair pair;
    pair.clean = RawImage(size, size);
    pair.bones = RawImage(size, size);
    pair.composite = RawImage(size, size);
    pair.mask = std::move(mask);
    for (std::size_t i = 0; i < n; ++i) {
        const long c = std::lround(clean[i] * 65535.0);
        const long b = std::lround(std::min(bones[i], 0.35) * 65535.0);
        pair.clean.pixels[i] = static_cast<std::uint16_t>(c);
        pair.bones.pixels[i] = static_cast<std::uint16_t>(b);
        pair.composite.pixels[i] = static_cast<std::uint16_t>(c + b);
    }
    return pair;
}

// ---------------------------------------------------------------------------
// dataset split and on-disk layout

struct SplitSpec {
    double train = 0.8;
    double val = 0.1;
    double test = 0.1;
    std::uint64_t seed = 0;

    void validate() const {
        if (train < 0 || val < 0 || test < 0) throw ConfigError("split: fractions must be non-negative");
        if (std::abs(train + val + test - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");
    }
};

struct Split {
    std::vector<std::size_t> train, val, test;
};

/// Seeded shuffle of 0..n-1 cut into train/val/test; sizes round(n*train), round(n*val), rest.
inline Split split_dataset(std::size_t n, const SplitSpec& spec) {
    spec.validate();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng = make_rng(spec.seed, "split");
    std::shuffle(idx.begin(), idx.end(), rng);
    const std::size_t n_train = std::min(n, static_cast<std::size_t>(std::llround(spec.train * static_cast<double>(n))));
    const std::size_t n_val =
        std::min(n - n_train, static_cast<std::size_t>(std::llround(spec.val * static_cast<double>(n))));
    Split s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<long>(n_train));
    s.val.assign(idx.begin() + static_cast<long>(n_train), idx.begin() + static_cast<long>(n_train + n_val));
    s.test.assign(idx.begin() + static_cast<long>(n_train + n_val), idx.end());
    return s;
}

template <class T>
std::vector<T> select(const std::vector<T>& items, const std::vector<std::size_t>& idx) {
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(items.at(i));
    return out;
}

struct DatasetItem {
    std::string id;
    std::string split;
    std::uint64_t seed = 0;
    RawImage composite;
    RawImage clean;
    RawImage mask;
};

inline std::string item_id(std::size_t i) {
    std::ostringstream os;
    os.width(4);
    os.fill('0');
    os << i;
    return os.str();
}

/// <root>/<split>/<id>_{composite,clean,mask}.pgm plus <root>/manifest.csv (id,split,seed).
inline void write_phantom_dataset(const fs::path& root, std::size_t count, std::size_t size, std::uint64_t seed,
                                  const PhantomConfig& cfg = {}) {
    if (count == 0) throw ConfigError("phantom dataset: count must be positive");
    if (size == 0 || size % 2) throw ConfigError("phantom dataset: size " + std::to_string(size) + " must be even");
    const Split split = split_dataset(count, SplitSpec{0.8, 0.1, 0.1, seed});
    std::vector<std::string> split_of(count);
    for (auto i : split.train) split_of[i] = "train";
    for (auto i : split.val) split_of[i] = "val";
    for (auto i : split.test) split_of[i] = "test";

    for (const char* s : {"train", "val", "test"}) fs::create_directories(root / s);
    std::ofstream manifest(root / "manifest.csv");
    if (!manifest) throw DataError("cannot write " + (root / "manifest.csv").string());
    manifest << "id,split,seed\n";
    Rng seeds = make_rng(seed, "data");
    for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t item_seed = seeds();
        const PhantomPair p = generate_phantom(item_seed, size, cfg);
        const std::string id = item_id(i);
        const fs::path dir = root / split_of[i];
        write_pgm(dir / (id + "_composite.pgm"), p.composite);
        write_pgm(dir / (id + "_clean.pgm"), p.clean);
        write_pgm(dir / (id + "_mask.pgm"), p.mask);
        manifest << id << ',' << split_of[i] << ',' << item_seed << '\n';
    }
}

inline std::vector<DatasetItem> load_dataset(const fs::path& root) {
    const fs::path mpath = root / "manifest.csv";
    std::ifstream in(mpath);
    if (!in) throw DataError("dataset manifest not found: " + mpath.string());
    std::string line;
    std::getline(in, line);
    if (line != "id,split,seed") throw DataError(mpath.string() + ": unexpected header");
    std::vector<DatasetItem> items;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        DatasetItem it;
        std::string seed;
        if (!std::getline(ss, it.id, ',') || !std::getline(ss, it.split, ',') || !std::getline(ss, seed))
            throw DataError(mpath.string() + ": malformed row '" + line + "'");
        try {
            it.seed = std::stoull(seed);
        } catch (const std::logic_error&) {
            throw DataError(mpath.string() + ": malformed seed in row '" + line + "'");
        }
        const fs::path dir = root / it.split;
        it.composite = read_pgm(dir / (it.id + "_composite.pgm"));
        it.clean = read_pgm(dir / (it.id + "_clean.pgm"));
        it.mask = read_pgm(dir / (it.id + "_mask.pgm"));
        items.push_back(std::move(it));
    }
    if (items.empty()) throw DataError("dataset at " + root.string() + " is empty");
    return items;
}

inline std::vector<DatasetItem> items_in_split(const std::vector<DatasetItem>& items, const std::string& split) {
    std::vector<DatasetItem> out;
    for (const auto& it : items)
        if (it.split == split) out.push_back(it);
    return out;
}

}  // namespace bsgan
