#pragma once

// One-level orthonormal Haar 2D decomposition.
//
// For each 2x2 block [[a, b], [c, d]]:
//   ll = (a + b + c + d) / 2    approximation
//   lh = (a - b + c - d) / 2    vertical detail   (differences along a row)
//   hl = (a + b - c - d) / 2    horizontal detail (differences along a column)
//   hh = (a - b - c + d) / 2    diagonal detail
// The 4x4 map is symmetric and orthogonal, so reconstruction applies the same formulas.

#include "bsgan/tensor.hpp"

namespace bsgan {

struct SubbandSet {
    Tensor ll, lh, hl, hh;

    std::size_t height() const { return ll.dim(0); }
    std::size_t width() const { return ll.dim(1); }

    double energy() const { return ll.sum_squares() + lh.sum_squares() + hl.sum_squares() + hh.sum_squares(); }

    void validate() const {
        require_rank(ll, 2, "SubbandSet");
        if (lh.shape() != ll.shape() || hl.shape() != ll.shape() || hh.shape() != ll.shape())
            throw ShapeError("SubbandSet: sub-bands disagree in shape");
    }
};

inline SubbandSet haar_decompose(const Tensor& image) {
    require_rank(image, 2, "haar_decompose");
    const std::size_t h = image.dim(0), w = image.dim(1);
    if (h % 2 || w % 2)
        throw ShapeError("haar_decompose: image is " + std::to_string(h) + "x" + std::to_string(w) +
                         "; both extents must be even, pad the image by one row/column first");
    const std::size_t hh = h / 2, hw = w / 2;
    SubbandSet s{Tensor({hh, hw}), Tensor({hh, hw}), Tensor({hh, hw}), Tensor({hh, hw})};
    for (std::size_t y = 0; y < hh; ++y)
        for (std::size_t x = 0; x < hw; ++x) {
            const double a = image.at(2 * y, 2 * x), b = image.at(2 * y, 2 * x + 1);
            const double c = image.at(2 * y + 1, 2 * x), d = image.at(2 * y + 1, 2 * x + 1);
            s.ll.at(y, x) = 0.5 * (a + b + c + d);
            s.lh.at(y, x) = 0.5 * (a - b + c - d);
            s.hl.at(y, x) = 0.5 * (a + b - c - d);
            s.hh.at(y, x) = 0.5 * (a - b - c + d);
        }
    return s;
}

inline Tensor haar_reconstruct(const SubbandSet& s) {
    s.validate();
    const std::size_t hh = s.height(), hw = s.width();
    Tensor image({2 * hh, 2 * hw});
    for (std::size_t y = 0; y < hh; ++y)
        for (std::size_t x = 0; x < hw; ++x) {
            const double ll = s.ll.at(y, x), lh = s.lh.at(y, x), hl = s.hl.at(y, x), dd = s.hh.at(y, x);
            image.at(2 * y, 2 * x) = 0.5 * (ll + lh + hl + dd);
            image.at(2 * y, 2 * x + 1) = 0.5 * (ll - lh + hl - dd);
            image.at(2 * y + 1, 2 * x) = 0.5 * (ll + lh - hl - dd);
            image.at(2 * y + 1, 2 * x + 1) = 0.5 * (ll - lh - hl + dd);
        }
    return image;
}

/// Channel order is fixed: ll, lh, hl, hh.
inline Tensor pack_subbands(const SubbandSet& s) {
    s.validate();
    const std::size_t n = s.ll.size();
    Tensor out({4, s.height(), s.width()});
    std::copy_n(s.ll.data(), n, out.data());
    std::copy_n(s.lh.data(), n, out.data() + n);
    std::copy_n(s.hl.data(), n, out.data() + 2 * n);
    std::copy_n(s.hh.data(), n, out.data() + 3 * n);
    return out;
}

inline SubbandSet unpack_subbands(const Tensor& packed) {
    require_rank(packed, 3, "unpack_subbands");
    if (packed.dim(0) != 4)
        throw ShapeError("unpack_subbands: expected 4 channels, got " + std::to_string(packed.dim(0)));
    const std::size_t h = packed.dim(1), w = packed.dim(2), n = h * w;
    auto band = [&](std::size_t k) {
        return Tensor({h, w}, std::vector<double>(packed.data() + k * n, packed.data() + (k + 1) * n));
    };
    return SubbandSet{band(0), band(1), band(2), band(3)};
}

// Batched helpers over [n, 1, h, w] <-> [n, 4, h/2, w/2]. Because the transform is
// orthonormal, each one is also the adjoint of the other, which the trainer uses to
// push gradients across the domain change.
inline Tensor haar_forward_batch(const Tensor& images) {
    require_rank(images, 4, "haar_forward_batch");
    if (images.dim(1) != 1) throw ShapeError("haar_forward_batch: expected a single channel");
    const std::size_t n = images.dim(0), h = images.dim(2), w = images.dim(3);
    Tensor out({n, 4, h / 2, w / 2});
    const std::size_t per = 4 * (h / 2) * (w / 2);
    for (std::size_t i = 0; i < n; ++i) {
        Tensor img({h, w}, std::vector<double>(images.data() + i * h * w, images.data() + (i + 1) * h * w));
        const Tensor p = pack_subbands(haar_decompose(img));
        std::copy_n(p.data(), per, out.data() + i * per);
    }
    return out;
}

inline Tensor haar_inverse_batch(const Tensor& bands) {
    require_rank(bands, 4, "haar_inverse_batch");
    if (bands.dim(1) != 4) throw ShapeError("haar_inverse_batch: expected 4 sub-band channels");
    const std::size_t n = bands.dim(0), h = bands.dim(2), w = bands.dim(3);
    Tensor out({n, 1, 2 * h, 2 * w});
    const std::size_t per = 4 * h * w;
    for (std::size_t i = 0; i < n; ++i) {
        Tensor p({4, h, w}, std::vector<double>(bands.data() + i * per, bands.data() + (i + 1) * per));
        const Tensor img = haar_reconstruct(unpack_subbands(p));
        std::copy_n(img.data(), per, out.data() + i * per);
    }
    return out;
}

}  // namespace bsgan
