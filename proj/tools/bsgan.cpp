// bsgan: command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data error, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdio>
#include <optional>
#include <iostream>

#include "bsgan.hpp"

namespace {

using namespace bsgan;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

void print_row(const std::string& prefix, const LossRow& r) {
    if (!r.val_l1) return;
    std::printf("%sstep %5zu  j_d %.5f  j_g_adv %.5f  l1 %.5f  val_l1 %.5f\n", prefix.c_str(), r.step, r.losses.j_d,
                r.losses.j_g_adv, r.losses.l1, *r.val_l1);
    std::fflush(stdout);
}

int cmd_phantom_gen(const fs::path& out, std::size_t count, std::size_t size, std::uint64_t seed) {
    write_phantom_dataset(out, count, size, seed);
    const auto items = load_dataset(out);
    std::printf("wrote %zu phantoms (%zu train / %zu val / %zu test) to %s\n", items.size(),
                items_in_split(items, "train").size(), items_in_split(items, "val").size(),
                items_in_split(items, "test").size(), out.string().c_str());
    return kOk;
}

int cmd_train(const std::string& config, const fs::path& data, const fs::path& out, bool quiet) {
    const RunConfig cfg = config_or_default(config);
    std::function<void(const LossRow&)> cb;
    if (!quiet) cb = [](const LossRow& r) { print_row("", r); };
    const TrainResult res = train_to_directory(cfg, data, out, cb);
    std::printf("best validation L1 %s at step %zu; checkpoint in %s\n",
                res.best_val_l1 ? format_number(*res.best_val_l1).c_str() : "n/a", res.best_step,
                (out / "checkpoint.bin").string().c_str());
    return kOk;
}

struct Window {
    std::optional<double> center, width;
};

/// Optional linear window (raw pixel units) applied to the input before suppression;
/// the windowed image is requantized to the input's maxval.
RawImage suppress_one(const Generator& g, RawImage in, bool match, const Window& win) {
    if (win.center) in = from_unit(linear_window(in, *win.center, *win.width), in.maxval);
    RawImage out = from_unit(suppress_image(g, in), in.maxval);
    return match ? histogram_match(out, in) : out;
}

int cmd_suppress(const fs::path& ckpt, const fs::path& in, const fs::path& out, bool match, const Window& win) {
    if (win.center.has_value() != win.width.has_value())
        throw ConfigError("--window-center and --window-width go together");
    const Generator g = generator_from(load_checkpoint(ckpt));
    if (!fs::is_directory(in)) {
        if (!fs::exists(in)) throw DataError("input not found: " + in.string());
        write_pgm(out, suppress_one(g, read_pgm(in), match, win));
        return kOk;
    }
    // directory mode: every composite (or, failing that, every .pgm) -> <key>_pred.pgm
    std::vector<fs::path> inputs, composites;
    for (const auto& e : fs::directory_iterator(in))
        if (e.is_regular_file() && e.path().extension() == ".pgm") {
            inputs.push_back(e.path());
            if (e.path().stem().string().ends_with("_composite")) composites.push_back(e.path());
        }
    if (!composites.empty()) inputs = composites;
    if (inputs.empty()) throw DataError("no .pgm images in " + in.string());
    std::sort(inputs.begin(), inputs.end());
    fs::create_directories(out);
    for (const auto& p : inputs)
        write_pgm(out / (detail::image_key(p.stem().string()) + "_pred.pgm"), suppress_one(g, read_pgm(p), match, win));
    std::printf("suppressed %zu images into %s\n", inputs.size(), out.string().c_str());
    return kOk;
}

int cmd_evaluate(const fs::path& pred, const fs::path& gt, const fs::path& mask, const fs::path& out,
                 fs::path nps_out, const std::string& config, std::size_t roi_size, std::size_t n_roi) {
    EvalOptions opt;
    opt.nps = config_or_default(config).nps;
    if (roi_size) opt.nps.roi_size = roi_size;
    if (n_roi) opt.nps.n_roi = n_roi;
    const auto rows = evaluate_directories(pred, gt, mask, opt);
    if (nps_out.empty()) nps_out = out.parent_path() / (out.stem().string() + "_nps.csv");
    write_metrics_csv(out, rows);
    write_nps_csv(nps_out, rows);
    double p = 0, pr = 0, s = 0;
    for (const auto& r : rows) p += r.psnr, pr += r.psnr_roi, s += r.ssim_roi;
    const double n = static_cast<double>(rows.size());
    std::printf("%zu images  mean psnr %s  psnr_roi %s  ssim_roi %s\n", rows.size(), format_number(p / n).c_str(),
                format_number(pr / n).c_str(), format_number(s / n).c_str());
    return kOk;
}

int cmd_ablate(const fs::path& data, const fs::path& out, const std::string& config, std::size_t steps, bool quiet) {
    RunConfig cfg = config_or_default(config);
    if (steps) cfg.train.steps = steps;
    if (!fs::is_directory(data)) throw DataError("data directory not found: " + data.string());
    const auto items = load_dataset(data);
    std::function<void(const std::string&, const LossRow&)> cb;
    if (!quiet) cb = [](const std::string& m, const LossRow& r) { print_row(m + ": ", r); };
    const auto rows = run_ablation(cfg, items, out, cb);
    write_ablation_csv(out / "ablation.csv", rows);
    std::printf("%-14s %10s %10s %10s\n", "model", "psnr", "psnr_roi", "ssim_roi");
    for (const auto& r : rows) std::printf("%-14s %10.4f %10.4f %10.4f\n", r.model.c_str(), r.psnr, r.psnr_roi, r.ssim_roi);
    return kOk;
}

int cmd_theory_check(std::uint64_t seed, std::size_t pairs, std::size_t bins) {
    using namespace bsgan::theory;
    constexpr double kTol = 1e-12;
    bool ok = true;
    std::printf("%-22s %12s %12s %10s\n", "case", "value", "predicted", "residual");
    auto report = [&](const std::string& name, const EquilibriumCheck& r) {
        const bool pass = r.residual < kTol;
        ok = ok && pass;
        std::printf("%-22s %12.6f %12.6f %10.3g %s\n", name.c_str(), r.value, r.predicted, r.residual,
                    pass ? "ok" : "FAIL");
    };
    const auto uniform_dist = DiscreteDistribution::from_weights(std::vector<double>(bins, 1.0));
    report("p = q", check_equilibrium(uniform_dist, uniform_dist));
    report("disjoint supports", check_equilibrium(DiscreteDistribution({1.0, 0.0}), DiscreteDistribution({0.0, 1.0})));
    Rng rng = make_rng(seed, "theory");
    double worst = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) {
        const auto r = check_equilibrium(random_histogram(rng, bins, 0.2), random_histogram(rng, bins, 0.2));
        worst = std::max(worst, r.residual);
    }
    const bool pass = worst < kTol;
    ok = ok && pass;
    std::printf("%-22s %12s %12s %10.3g %s\n", ("random pairs x" + std::to_string(pairs)).c_str(), "-", "-", worst,
                pass ? "ok" : "FAIL");
    return ok ? kOk : kNumeric;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wavelet-domain adversarial bone suppression on synthetic radiograph phantoms"};
    app.require_subcommand(1);

    std::string out, data, config, ckpt, in, pred, gt, mask, nps_out;
    std::size_t count = 200, size = 64, steps = 0, roi_size = 0, n_roi = 0, pairs = 100, bins = 16;
    std::uint64_t seed = 1;
    bool match = false, quiet = false;

    auto* gen = app.add_subcommand("phantom-gen", "Write a synthetic paired-phantom dataset");
    gen->add_option("--out", out, "Dataset directory")->required();
    gen->add_option("--count", count, "Number of phantom pairs")->capture_default_str()->check(CLI::PositiveNumber);
    gen->add_option("--size", size, "Image extent in pixels (even)")->capture_default_str();
    gen->add_option("--seed", seed, "Dataset seed")->capture_default_str();

    auto* tr = app.add_subcommand("train", "Train a generator/discriminator pair");
    tr->add_option("--config", config, "RunConfig file (defaults when omitted)");
    tr->add_option("--data", data, "Dataset directory")->required();
    tr->add_option("--out", out, "Output directory for checkpoint.bin, loss.csv, config.txt")->required();
    tr->add_flag("--quiet", quiet, "Suppress progress lines");

    auto* sup = app.add_subcommand("suppress", "Run a trained generator on an image or a directory of images");
    sup->add_option("--ckpt", ckpt, "Checkpoint file")->required();
    sup->add_option("--in", in, "Input PGM, or a directory of them")->required();
    sup->add_option("--out", out, "Output PGM, or a directory in directory mode")->required();
    sup->add_flag("--match-histogram", match, "Match the output histogram to the input image");
    Window window;
    sup->add_option("--window-center", window.center, "Linear window center, raw pixel units");
    sup->add_option("--window-width", window.width, "Linear window width, raw pixel units");

    auto* ev = app.add_subcommand("evaluate", "PSNR / SSIM / NPS of predictions against ground truth");
    ev->add_option("--pred", pred, "Directory of predicted PGMs")->required();
    ev->add_option("--gt", gt, "Directory of ground-truth PGMs")->required();
    ev->add_option("--mask", mask, "Directory of ROI masks")->required();
    ev->add_option("--out", out, "Per-image metrics CSV")->required();
    ev->add_option("--nps-out", nps_out, "Radial NPS CSV (default: <out>_nps.csv)");
    ev->add_option("--config", config, "RunConfig file supplying the nps.* settings");
    ev->add_option("--roi-size", roi_size, "NPS ROI extent (overrides the config)");
    ev->add_option("--n-roi", n_roi, "NPS ROIs per image (overrides the config)");

    auto* ab = app.add_subcommand("ablate", "Train and evaluate the four ablation configurations");
    ab->add_option("--data", data, "Dataset directory")->required();
    ab->add_option("--out", out, "Output directory (ablation.csv plus one folder per model)")->required();
    ab->add_option("--config", config, "Base RunConfig file");
    ab->add_option("--steps", steps, "Override the number of training steps");
    ab->add_flag("--quiet", quiet, "Suppress progress lines");

    auto* th = app.add_subcommand("theory-check", "Verify the GAN equilibrium identity on discrete distributions");
    th->add_option("--seed", seed, "Seed for the random histogram sweep")->capture_default_str();
    th->add_option("--pairs", pairs, "Number of random histogram pairs")->capture_default_str();
    th->add_option("--bins", bins, "Support size")->capture_default_str()->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*gen) return cmd_phantom_gen(out, count, size, seed);
        if (*tr) return cmd_train(config, data, out, quiet);
        if (*sup) return cmd_suppress(ckpt, in, out, match, window);
        if (*ev) return cmd_evaluate(pred, gt, mask, out, nps_out, config, roi_size, n_roi);
        if (*ab) return cmd_ablate(data, out, config, steps, quiet);
        if (*th) return cmd_theory_check(seed, pairs, bins);
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    }
    return kUsage;
}
