#pragma once

// Full-reference image quality metrics: MSE, PSNR, SSIM and the ROI-based noise power
// spectrum with radial averaging.

#include <unsupported/Eigen/FFT>

#include <complex>
#include <limits>
#include <map>
#include <optional>
#include <vector>

#include "bsgan/tensor.hpp"

namespace bsgan {

/// Binary mask over an image; empty means "everything".
using Mask = std::vector<bool>;

namespace detail {

inline void require_same_image(const Tensor& a, const Tensor& b, const char* what) {
    require_rank(a, 2, what);
    a.require_same_shape(b, what);
}

inline void require_mask(const Tensor& a, const Mask& mask, const char* what) {
    if (!mask.empty() && mask.size() != a.size())
        throw ShapeError(std::string(what) + ": mask has " + std::to_string(mask.size()) + " entries, image has " +
                         std::to_string(a.size()));
}

}  // namespace detail

/// Mean squared difference, restricted to the mask when one is given.
inline double mse(const Tensor& a, const Tensor& b, const Mask& mask = {}) {
    detail::require_same_image(a, b, "mse");
    detail::require_mask(a, mask, "mse");
    double s = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!mask.empty() && !mask[i]) continue;
        s += (a[i] - b[i]) * (a[i] - b[i]);
        ++n;
    }
    if (n == 0) throw DataError("mse: mask selects no pixels");
    return s / static_cast<double>(n);
}

/// 20 log10(max / sqrt(MSE)); +inf for identical inputs.
inline double psnr(const Tensor& reference, const Tensor& approx, double max_value, const Mask& mask = {}) {
    if (!(max_value > 0.0)) throw ConfigError("psnr: dynamic range must be positive");
    const double m = mse(reference, approx, mask);
    if (m == 0.0) return std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(max_value / std::sqrt(m));
}

// ---------------------------------------------------------------------------
// SSIM

struct SsimOptions {
    double dynamic_range = 1.0;  // L
    std::size_t window = 8;
    bool global = false;  // one window covering the whole (masked) image
};

namespace detail {

struct SsimAcc {
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0, n = 0;
    void add(double a, double b) {
        sa += a;
        sb += b;
        saa += a * a;
        sbb += b * b;
        sab += a * b;
        n += 1;
    }
    double value(double c1, double c2) const {
        const double ma = sa / n, mb = sb / n;
        // population (co)variances, clamped against round-off
        const double va = std::max(0.0, saa / n - ma * ma), vb = std::max(0.0, sbb / n - mb * mb);
        const double cov = sab / n - ma * mb;
        return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
};

}  // namespace detail

/// Mean over 8x8 sliding windows (stride 1) of the luminance-contrast-structure product with
/// c1 = (0.01 L)^2, c2 = (0.03 L)^2. The mask restricts window centers.
inline double ssim(const Tensor& a, const Tensor& b, const SsimOptions& opt = {}, const Mask& mask = {}) {
    detail::require_same_image(a, b, "ssim");
    detail::require_mask(a, mask, "ssim");
    const double c1 = (0.01 * opt.dynamic_range) * (0.01 * opt.dynamic_range);
    const double c2 = (0.03 * opt.dynamic_range) * (0.03 * opt.dynamic_range);
    const std::size_t h = a.dim(0), w = a.dim(1);

    if (opt.global) {
        detail::SsimAcc acc;
        for (std::size_t i = 0; i < a.size(); ++i)
            if (mask.empty() || mask[i]) acc.add(a[i], b[i]);
        if (acc.n == 0) throw DataError("ssim: mask selects no pixels");
        return acc.value(c1, c2);
    }

    const std::size_t k = opt.window;
    if (k == 0 || k > h || k > w) throw ShapeError("ssim: window larger than image");
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t y = 0; y + k <= h; ++y)
        for (std::size_t x = 0; x + k <= w; ++x) {
            if (!mask.empty() && !mask[(y + k / 2) * w + x + k / 2]) continue;
            // identical windows score exactly 1; the variance clamp can break the cancellation
            bool same = true;
            detail::SsimAcc acc;
            for (std::size_t dy = 0; dy < k; ++dy)
                for (std::size_t dx = 0; dx < k; ++dx) {
                    const std::size_t i = (y + dy) * w + x + dx;
                    acc.add(a[i], b[i]);
                    same = same && a[i] == b[i];
                }
            total += same ? 1.0 : acc.value(c1, c2);
            ++count;
        }
    if (count == 0) throw DataError("ssim: no window center lies inside the mask");
    return total / static_cast<double>(count);
}

// ---------------------------------------------------------------------------
// Noise power spectrum

struct Roi {
    std::size_t y = 0, x = 0;  // top-left corner
};

struct NpsConfig {
    std::size_t roi_size = 24;  // L_x = L_y
    std::size_t n_roi = 8;
    std::uint64_t seed = 0;
    std::vector<Roi> explicit_rois;  // used instead of random placement when non-empty

    void validate() const {
        if (roi_size == 0 || roi_size % 2) throw ConfigError("nps: roi_size must be positive and even");
        if (explicit_rois.empty() && n_roi == 0) throw ConfigError("nps: n_roi must be positive");
    }
};

/// Candidate ROI corners whose full square lies inside the mask, in raster order.
inline std::vector<Roi> valid_roi_positions(std::size_t h, std::size_t w, std::size_t L, const Mask& mask) {
    std::vector<Roi> out;
    if (L > h || L > w) return out;
    if (mask.empty()) {
        for (std::size_t y = 0; y + L <= h; ++y)
            for (std::size_t x = 0; x + L <= w; ++x) out.push_back({y, x});
        return out;
    }
    // summed-area table of mask misses
    std::vector<std::size_t> sat((h + 1) * (w + 1), 0);
    for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
            sat[(y + 1) * (w + 1) + x + 1] = (mask[y * w + x] ? 0 : 1) + sat[y * (w + 1) + x + 1] +
                                             sat[(y + 1) * (w + 1) + x] - sat[y * (w + 1) + x];
    for (std::size_t y = 0; y + L <= h; ++y)
        for (std::size_t x = 0; x + L <= w; ++x) {
            const std::size_t miss = sat[(y + L) * (w + 1) + x + L] - sat[y * (w + 1) + x + L] -
                                     sat[(y + L) * (w + 1) + x] + sat[y * (w + 1) + x];
            if (miss == 0) out.push_back({y, x});
        }
    return out;
}

/// ROIs for one image: the explicit list when given, else n_roi distinct seeded picks among the
/// valid positions (all of them when fewer exist).
inline std::vector<Roi> place_rois(std::size_t h, std::size_t w, const NpsConfig& cfg, const Mask& mask) {
    cfg.validate();
    const std::size_t L = cfg.roi_size;
    if (!cfg.explicit_rois.empty()) {
        for (const auto& r : cfg.explicit_rois) {
            if (r.y + L > h || r.x + L > w)
                throw ShapeError("nps: ROI at (" + std::to_string(r.y) + "," + std::to_string(r.x) +
                                 ") extends outside the image");
            if (!mask.empty())
                for (std::size_t dy = 0; dy < L; ++dy)
                    for (std::size_t dx = 0; dx < L; ++dx)
                        if (!mask[(r.y + dy) * w + r.x + dx]) throw ShapeError("nps: ROI extends outside the mask");
        }
        return cfg.explicit_rois;
    }
    auto pos = valid_roi_positions(h, w, L, mask);
    if (pos.empty()) throw ShapeError("nps: no " + std::to_string(L) + "x" + std::to_string(L) + " ROI fits inside the mask");
    Rng rng = make_rng(cfg.seed, "roi");
    std::shuffle(pos.begin(), pos.end(), rng);
    pos.resize(std::min(pos.size(), cfg.n_roi));
    return pos;
}

/// Unnormalized forward 2D DFT of a real L_y x L_x array.
inline std::vector<std::complex<double>> dft2(const std::vector<double>& data, std::size_t ly, std::size_t lx) {
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> tmp(ly * lx), out(ly * lx);
    std::vector<double> row(lx);
    std::vector<std::complex<double>> crow(lx), col(ly), ccol(ly);
    for (std::size_t y = 0; y < ly; ++y) {
        std::copy_n(data.begin() + static_cast<long>(y * lx), lx, row.begin());
        fft.fwd(crow, row);
        std::copy(crow.begin(), crow.end(), tmp.begin() + static_cast<long>(y * lx));
    }
    for (std::size_t x = 0; x < lx; ++x) {
        for (std::size_t y = 0; y < ly; ++y) col[y] = tmp[y * lx + x];
        fft.fwd(ccol, col);
        for (std::size_t y = 0; y < ly; ++y) out[y * lx + x] = ccol[y];
    }
    return out;
}

/// (1/N_ROI) sum_i (1/(L_x L_y)) |DFT{ROI_i - mean(ROI_i)}|^2, DC at index [0,0].
inline Tensor nps2d(const Tensor& error_image, const std::vector<Roi>& rois, std::size_t L) {
    require_rank(error_image, 2, "nps2d");
    if (rois.empty()) throw ShapeError("nps2d: no ROIs");
    const std::size_t w = error_image.dim(1);
    Tensor nps({L, L});
    std::vector<double> patch(L * L);
    for (const auto& r : rois) {
        if (r.y + L > error_image.dim(0) || r.x + L > w) throw ShapeError("nps2d: ROI out of bounds");
        double mean = 0.0;
        for (std::size_t dy = 0; dy < L; ++dy)
            for (std::size_t dx = 0; dx < L; ++dx) mean += patch[dy * L + dx] = error_image.at(r.y + dy, r.x + dx);
        mean /= static_cast<double>(L * L);
        for (double& v : patch) v -= mean;
        const auto spec = dft2(patch, L, L);
        for (std::size_t k = 0; k < L * L; ++k) nps[k] += std::norm(spec[k]) / static_cast<double>(L * L);
    }
    nps *= 1.0 / static_cast<double>(rois.size());
    return nps;
}

inline Tensor nps2d(const Tensor& error_image, const NpsConfig& cfg, const Mask& mask = {}) {
    detail::require_mask(error_image, mask, "nps2d");
    const auto rois = place_rois(error_image.dim(0), error_image.dim(1), cfg, mask);
    return nps2d(error_image, rois, cfg.roi_size);
}

struct RadialBin {
    std::size_t radius = 0;  // rounded |(u, v)| in DFT index units
    double amplitude = 0.0;  // mean over the bin
    std::size_t count = 0;
};

/// Radial average around DC (bins by rounded radius of the centered frequency index);
/// the DC bin is excluded. Only non-empty bins are returned, in increasing radius.
inline std::vector<RadialBin> radial_average(const Tensor& nps) {
    require_rank(nps, 2, "radial_average");
    const std::size_t ly = nps.dim(0), lx = nps.dim(1);
    auto centered = [](std::size_t k, std::size_t L) {
        return k < (L + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(L);
    };
    std::map<std::size_t, std::pair<double, std::size_t>> acc;
    for (std::size_t v = 0; v < ly; ++v)
        for (std::size_t u = 0; u < lx; ++u) {
            const double fu = centered(u, lx), fv = centered(v, ly);
            const auto r = static_cast<std::size_t>(std::lround(std::sqrt(fu * fu + fv * fv)));
            if (r == 0) continue;
            auto& [sum, n] = acc[r];
            sum += nps.at(v, u);
            ++n;
        }
    std::vector<RadialBin> out;
    for (const auto& [r, sn] : acc) out.push_back({r, sn.first / static_cast<double>(sn.second), sn.second});
    return out;
}

// ---------------------------------------------------------------------------

struct MetricsReport {
    double psnr_full = 0.0;
    double psnr_roi = 0.0;
    double ssim_roi = 0.0;
    std::vector<RadialBin> nps_radial;
};

struct EvalOptions {
    double dynamic_range = 1.0;
    SsimOptions ssim{};
    NpsConfig nps{};
};

/// PSNR over the whole frame, PSNR and SSIM inside the ROI mask, and radial NPS of
/// (prediction - ground truth) from ROIs inside the mask.
inline MetricsReport evaluate_pair(const Tensor& pred, const Tensor& gt, const Mask& roi_mask, const EvalOptions& opt = {}) {
    detail::require_same_image(pred, gt, "evaluate_pair");
    MetricsReport r;
    r.psnr_full = psnr(gt, pred, opt.dynamic_range);
    r.psnr_roi = psnr(gt, pred, opt.dynamic_range, roi_mask);
    SsimOptions so = opt.ssim;
    so.dynamic_range = opt.dynamic_range;
    r.ssim_roi = ssim(gt, pred, so, roi_mask);
    r.nps_radial = radial_average(nps2d(pred - gt, opt.nps, roi_mask));
    return r;
}

}  // namespace bsgan
