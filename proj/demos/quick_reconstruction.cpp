// Trains a small generator on a handful of in-memory scenes and writes
// input | reconstruction | truth strips for the held-out ones.
//
//   quick_reconstruction [out_dir] [epochs]

#include <iostream>
#include <string>

#include "ogan/ogan.hpp"

int main(int argc, char** argv) {
    const std::filesystem::path out = argc > 1 ? argv[1] : "quick_reconstruction";
    const std::size_t epochs = argc > 2 ? std::stoul(argv[2]) : 10;

    ogan::SceneParams scene;
    scene.size = 32;
    const auto pairs = ogan::make_pairs(16, 0, scene, {});

    std::vector<ogan::TrainingSample<float>> train;
    std::vector<ogan::LabeledPair> held_out;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (i < 12) train.push_back(ogan::to_sample<float>(pairs[i].pair));
        else held_out.push_back(pairs[i]);
    }

    ogan::TrainingConfig cfg;
    cfg.epochs = epochs;
    cfg.seed = 42;
    auto result = ogan::train(train, cfg);
    for (const auto& row : result.report.rows)
        std::cout << "epoch " << row.epoch << "  d " << row.discriminator_loss << "  g_l1 " << row.generator_l1 << "\n";

    const auto& gen = result.trainer.generator();
    const auto report = ogan::evaluate(
        held_out, [&](const ogan::Tensor<float>& x) { return ogan::reconstruct(gen, x); }, out);
    std::cout << "masked L1 " << report.mean_masked_l1() << " vs identity baseline " << report.mean_baseline_l1()
              << "\nstrips written to " << out.string() << "\n";
}
