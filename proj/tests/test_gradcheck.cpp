#include <gtest/gtest.h>

#include <set>

#include "ogan/ogan.hpp"
#include "oracles.hpp"

using namespace ogan;
using T64 = Tensor<double>;

TEST(GradCheck, EveryOperationPasses) {
    const auto results = run_gradcheck_suite(0);
    std::set<std::string> names;
    for (const auto& r : results) {
        names.insert(r.name.substr(0, r.name.find_first_of(" (")));
        EXPECT_GE(r.probes, 20u) << r.name;
        EXPECT_LE(r.max_relative_error, 1e-5) << r.name;
        EXPECT_TRUE(r.passed) << r.name;
    }
    for (const char* op : {"conv2d", "conv_transpose2d", "relu", "leaky_relu", "tanh", "sigmoid", "dropout",
                           "instance_norm", "concat_channels", "add", "sub", "mul", "sum", "mean", "abs",
                           "global_avg_pool", "discriminator_loss", "generator_loss"})
        EXPECT_TRUE(names.count(op)) << op << " missing from the suite";
}

TEST(GradCheck, SuiteIsSeedIndependent) {
    for (std::uint64_t seed : {1u, 2u})
        for (const auto& r : run_gradcheck_suite(seed)) EXPECT_TRUE(r.passed) << r.name << " seed " << seed;
}

TEST(GradCheck, ComposedConvNormActivationPipeline) {
    Rng rng(12);
    auto rand = [&](const Shape& s) {
        std::vector<double> v(s.numel());
        for (auto& x : v) x = rng.uniform(-1.0, 1.0);
        return T64::from(s, std::move(v), true);
    };
    const std::vector<T64> inputs{rand({1, 2, 6, 6}), rand({3, 2, 3, 3}), rand({3}), rand({3}), rand({3})};
    const auto r = check_gradients(
        "pipeline", inputs,
        [](Tape<double>& t, const std::vector<T64>& in) {
            auto h = conv2d(t, in[0], in[1], in[2], 1, 1);
            h = instance_norm(t, h, in[3], in[4], 1e-5);
            return mean(t, leaky_relu(t, h, 0.2));
        },
        99, {40, 1e-5, 1e-5, 1e-4});
    EXPECT_EQ(r.probes, 40u);
    EXPECT_LE(r.max_relative_error, 1e-5);
}

TEST(GradCheck, DetectsAWrongGradient) {
    // A function whose recorded backward is deliberately off by a factor.
    const std::vector<T64> inputs{T64::from(Shape{3}, {0.3, -0.2, 0.5}, true)};
    const auto r = check_gradients("scaled", inputs, [](Tape<double>& t, const std::vector<T64>& in) {
        auto y = affine(t, in[0], 2.0, 0.0);
        auto out = sum(t, y);
        // The detached copy contributes value but no gradient.
        return add(t, out, affine(t, sum(t, in[0].detach()), 1.0, 0.0));
    }, 5);
    // d/dx = 3 numerically, 2 analytically.
    EXPECT_FALSE(r.passed);
    EXPECT_NEAR(r.max_relative_error, 1.0 / 3.0, 1e-6);
}

TEST(GradCheck, UNetEndToEndDepthTwo) {
    UNetSpec spec;
    spec.depth = 2;
    spec.base_width = 4;
    auto gen = build_unet<double>(spec, 17);
    Rng rng(4);
    std::vector<double> xv(3 * 8 * 8);
    for (auto& v : xv) v = rng.uniform(-1.0, 1.0);
    const auto x = T64::from(Shape{1, 3, 8, 8}, xv);
    std::vector<T64> params;
    for (auto& [name, p] : gen.params()) params.push_back(p);
    GradCheckSettings s;
    s.probes = 60;
    const auto r = check_gradients("unet_mean", params, [&](Tape<double>& t, const std::vector<T64>&) {
        return mean(t, gen.forward(t, x, {Mode::infer, 0, {}}));
    }, 3, s);
    EXPECT_LE(r.max_relative_error, 1e-5);
}
