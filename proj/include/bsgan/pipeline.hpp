#pragma once

// Directory-level workflows shared by the command-line tool and the acceptance suite:
// training into an output directory, batch evaluation, and the four-way ablation.

#include <charconv>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "bsgan/checkpoint.hpp"
#include "bsgan/metrics.hpp"

namespace bsgan {

/// Shortest round-trip decimal; +inf is written as "inf".
inline std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, end);
}

inline Mask mask_from_image(const RawImage& img) {
    Mask m(img.pixels.size());
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = img.pixels[i] > 0;
    return m;
}

namespace detail {

inline std::ofstream open_csv(const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    return out;
}

}  // namespace detail

inline void write_loss_csv(const fs::path& path, const std::vector<LossRow>& log) {
    auto out = detail::open_csv(path);
    out << "step,j_d,j_g_adv,l1,val_l1\n";
    for (const auto& r : log)
        out << r.step << ',' << format_number(r.losses.j_d) << ',' << format_number(r.losses.j_g_adv) << ','
            << format_number(r.losses.l1) << ',' << (r.val_l1 ? format_number(*r.val_l1) : "") << '\n';
}

// ---------------------------------------------------------------------------
// training

inline TrainResult train_on_dataset(const RunConfig& cfg, const std::vector<DatasetItem>& items,
                                    const std::function<void(const LossRow&)>& on_row = {}) {
    cfg.validate();
    return train(cfg.train, prepare_dataset(items, cfg.train.haar_on), on_row);
}

/// Writes checkpoint.bin, loss.csv and config.txt (the effective configuration) into out_dir.
inline TrainResult train_to_directory(const RunConfig& cfg, const fs::path& data_dir, const fs::path& out_dir,
                                      const std::function<void(const LossRow&)>& on_row = {}) {
    if (!fs::is_directory(data_dir)) throw DataError("data directory not found: " + data_dir.string());
    const auto items = load_dataset(data_dir);
    TrainResult res = train_on_dataset(cfg, items, on_row);
    fs::create_directories(out_dir);
    save_checkpoint(out_dir / "checkpoint.bin", make_checkpoint(cfg, res));
    write_loss_csv(out_dir / "loss.csv", res.log);
    std::ofstream(out_dir / "config.txt") << format_config(cfg);
    return res;
}

// ---------------------------------------------------------------------------
// evaluation

struct ImageMetrics {
    std::string image;
    double psnr = 0.0;
    double psnr_roi = 0.0;
    double ssim_roi = 0.0;
    std::vector<RadialBin> nps;
};

inline ImageMetrics evaluate_images(std::string name, const Tensor& pred, const Tensor& gt, const Mask& mask,
                                    const EvalOptions& opt) {
    const MetricsReport r = evaluate_pair(pred, gt, mask, opt);
    return {std::move(name), r.psnr_full, r.psnr_roi, r.ssim_roi, r.nps_radial};
}

namespace detail {

/// "0003_pred" / "0003_suppressed" / "0003_composite" -> "0003".
inline std::string image_key(const std::string& stem) {
    for (std::string_view suffix : {"_pred", "_suppressed", "_composite", "_clean", "_mask"})
        if (stem.size() > suffix.size() && stem.ends_with(suffix)) return stem.substr(0, stem.size() - suffix.size());
    return stem;
}

inline fs::path find_partner(const fs::path& dir, const std::string& key, std::string_view suffix) {
    for (const fs::path& p : {dir / (key + std::string(suffix) + ".pgm"), dir / (key + ".pgm")})
        if (fs::exists(p)) return p;
    throw DataError("no match for image " + key + " in " + dir.string());
}

}  // namespace detail

/// Pairs every *.pgm in pred_dir (sorted by name) with <key>_clean.pgm or <key>.pgm in gt_dir
/// and the same for masks. Pixel values are compared as value / maxval.
inline std::vector<ImageMetrics> evaluate_directories(const fs::path& pred_dir, const fs::path& gt_dir,
                                                      const fs::path& mask_dir, const EvalOptions& opt) {
    for (const auto& d : {pred_dir, gt_dir, mask_dir})
        if (!fs::is_directory(d)) throw DataError("directory not found: " + d.string());
    std::vector<fs::path> preds;
    for (const auto& e : fs::directory_iterator(pred_dir))
        if (e.is_regular_file() && e.path().extension() == ".pgm") preds.push_back(e.path());
    std::sort(preds.begin(), preds.end());
    if (preds.empty()) throw DataError("no .pgm images in " + pred_dir.string());
    std::vector<ImageMetrics> out;
    for (const auto& p : preds) {
        const std::string key = detail::image_key(p.stem().string());
        const RawImage pred = read_pgm(p);
        const RawImage gt = read_pgm(detail::find_partner(gt_dir, key, "_clean"));
        const RawImage mask = read_pgm(detail::find_partner(mask_dir, key, "_mask"));
        if (pred.width != gt.width || pred.height != gt.height || mask.width != gt.width || mask.height != gt.height)
            throw DataError("image " + key + ": prediction, ground truth and mask differ in size");
        out.push_back(evaluate_images(key, to_unit(pred), to_unit(gt), mask_from_image(mask), opt));
    }
    return out;
}

inline void write_metrics_csv(const fs::path& path, const std::vector<ImageMetrics>& rows) {
    auto out = detail::open_csv(path);
    out << "image,psnr,psnr_roi,ssim_roi\n";
    for (const auto& r : rows)
        out << r.image << ',' << format_number(r.psnr) << ',' << format_number(r.psnr_roi) << ','
            << format_number(r.ssim_roi) << '\n';
}

/// Per-radius mean of the radial NPS curves over all images.
inline std::vector<std::pair<std::size_t, double>> mean_nps_curve(const std::vector<ImageMetrics>& rows) {
    std::map<std::size_t, std::pair<double, std::size_t>> acc;
    for (const auto& r : rows)
        for (const auto& b : r.nps) {
            auto& [s, n] = acc[b.radius];
            s += b.amplitude;
            ++n;
        }
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& [radius, sn] : acc) out.emplace_back(radius, sn.first / static_cast<double>(sn.second));
    return out;
}

inline void write_nps_csv(const fs::path& path, const std::vector<ImageMetrics>& rows) {
    auto out = detail::open_csv(path);
    out << "radial_bin,amplitude\n";
    for (const auto& [r, a] : mean_nps_curve(rows)) out << r << ',' << format_number(a) << '\n';
}

// ---------------------------------------------------------------------------
// ablation

struct AblationRow {
    std::string model;
    double psnr = 0.0;
    double psnr_roi = 0.0;
    double ssim_roi = 0.0;
    TrainResult result;
};

/// The four legs in table order; everything except the two switches comes from `base`.
inline std::vector<std::pair<std::string, TrainConfig>> ablation_configs(const TrainConfig& base) {
    std::vector<std::pair<std::string, TrainConfig>> out;
    for (auto [name, gan, haar] : {std::tuple{"CNN", false, false}, std::tuple{"CNN+Haar", false, true},
                                   std::tuple{"CNN+GAN", true, false}, std::tuple{"CNN+GAN+Haar", true, true}}) {
        TrainConfig c = base;
        c.gan_on = gan;
        c.haar_on = haar;
        out.emplace_back(name, c);
    }
    return out;
}

/// Mean test-split metrics of a trained generator against the clean targets.
inline ImageMetrics evaluate_generator(const Generator& g, const std::vector<DatasetItem>& test, const EvalOptions& opt) {
    if (test.empty()) throw DataError("test split is empty");
    ImageMetrics mean;
    mean.image = "mean";
    for (const auto& it : test) {
        const ImageMetrics m =
            evaluate_images(it.id, suppress_image(g, it.composite), to_unit(it.clean), mask_from_image(it.mask), opt);
        mean.psnr += m.psnr;
        mean.psnr_roi += m.psnr_roi;
        mean.ssim_roi += m.ssim_roi;
    }
    const double n = static_cast<double>(test.size());
    mean.psnr /= n;
    mean.psnr_roi /= n;
    mean.ssim_roi /= n;
    return mean;
}

/// Trains every leg on the same data and seed. If out_dir is non-empty each leg's loss log
/// and checkpoint land in out_dir/<model>/.
inline std::vector<AblationRow> run_ablation(const RunConfig& base, const std::vector<DatasetItem>& items,
                                             const fs::path& out_dir = {},
                                             const std::function<void(const std::string&, const LossRow&)>& on_row = {}) {
    const auto test = items_in_split(items, "test");
    if (test.empty()) throw DataError("ablation needs a non-empty test split");
    EvalOptions opt;
    opt.nps = base.nps;
    std::vector<AblationRow> rows;
    for (const auto& [name, tc] : ablation_configs(base.train)) {
        RunConfig rc = base;
        rc.train = tc;
        std::function<void(const LossRow&)> cb;
        if (on_row) cb = [&, n = name](const LossRow& r) { on_row(n, r); };
        TrainResult res = train_on_dataset(rc, items, cb);
        const Checkpoint ck = make_checkpoint(rc, res);
        const ImageMetrics m = evaluate_generator(generator_from(ck), test, opt);
        if (!out_dir.empty()) {
            fs::create_directories(out_dir / name);
            write_loss_csv(out_dir / name / "loss.csv", res.log);
            save_checkpoint(out_dir / name / "checkpoint.bin", ck);
        }
        rows.push_back({name, m.psnr, m.psnr_roi, m.ssim_roi, std::move(res)});
    }
    return rows;
}

inline void write_ablation_csv(const fs::path& path, const std::vector<AblationRow>& rows) {
    auto out = detail::open_csv(path);
    out << "model,psnr,psnr_roi,ssim_roi\n";
    for (const auto& r : rows)
        out << r.model << ',' << format_number(r.psnr) << ',' << format_number(r.psnr_roi) << ','
            << format_number(r.ssim_roi) << '\n';
}

}  // namespace bsgan
