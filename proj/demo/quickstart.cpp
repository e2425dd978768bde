// Generates a small phantom set, trains briefly, and reports test PSNR before and after.
//
//   demo_quickstart [steps]

#include <cstdio>
#include <cstdlib>

#include "bsgan.hpp"

int main(int argc, char** argv) {
    using namespace bsgan;
    const std::size_t steps = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 200;

    const fs::path root = fs::temp_directory_path() / "bsgan_quickstart";
    fs::remove_all(root);
    write_phantom_dataset(root, 60, 64, 3);
    const auto items = load_dataset(root);

    RunConfig cfg;
    cfg.train.steps = steps;
    std::printf("training %zu steps on %zu images\n", steps, items_in_split(items, "train").size());
    const TrainResult res = train_on_dataset(cfg, items, [](const LossRow& r) {
        if (r.val_l1) std::printf("  step %4zu  l1 %.4f  val_l1 %.4f\n", r.step, r.losses.l1, *r.val_l1);
    });

    const Generator g = generator_from(make_checkpoint(cfg, res));
    double before = 0, after = 0;
    const auto test = items_in_split(items, "test");
    for (const auto& it : test) {
        const Tensor gt = to_unit(it.clean);
        before += psnr(gt, to_unit(it.composite), 1.0);
        after += psnr(gt, suppress_image(g, it.composite), 1.0);
    }
    const double n = static_cast<double>(test.size());
    std::printf("test PSNR vs clean: composite %.2f dB, suppressed %.2f dB\n", before / n, after / n);
    fs::remove_all(root);
}
