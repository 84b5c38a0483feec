#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "losses.hpp"
#include "networks.hpp"
#include "ops.hpp"
#include "rng.hpp"

namespace ogan {

/// Central finite differences against reverse-mode gradients, in f64.
struct GradCheckSettings {
    std::size_t probes = 20;
    double step = 1e-5;
    double tolerance = 1e-5;
    /// Denominator floor of the relative error, so gradients that are
    /// numerically zero are compared absolutely.
    double magnitude_floor = 1e-4;
    /// A probe whose one-sided differences disagree by more than this
    /// (relative) straddles a kink and is redrawn.
    double kink_tolerance = 1e-3;
};

struct GradCheckResult {
    std::string name;
    double max_relative_error = 0.0;
    std::size_t probes = 0;
    std::size_t kinks_skipped = 0;
    bool passed = false;
};

inline double relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

using ScalarFunction = std::function<Tensor<double>(Tape<double>&, const std::vector<Tensor<double>>&)>;

/// Probes random elements of `inputs` (those with requires_grad) and
/// compares d f / d input against (f(v+h) - f(v-h)) / 2h.
inline GradCheckResult check_gradients(const std::string& name, const std::vector<Tensor<double>>& inputs,
                                       const ScalarFunction& f, std::uint64_t seed,
                                       const GradCheckSettings& settings = {}) {
    GradCheckResult result{name};
    for (auto t : inputs)
        if (t.requires_grad()) t.zero_grad();
    {
        Tape<double> tape;
        backward(f(tape, inputs), tape);
    }

    std::vector<std::size_t> candidates;
    std::size_t total = 0;
    for (std::size_t i = 0; i < inputs.size(); ++i)
        if (inputs[i].requires_grad()) {
            candidates.push_back(i);
            total += inputs[i].numel();
        }
    if (total == 0) throw ArgumentError("gradcheck '" + name + "': nothing to probe");

    Rng rng(seed);
    auto evaluate = [&] {
        auto tape = Tape<double>::inference();
        return f(tape, inputs).item();
    };
    const std::size_t max_draws = 20 * settings.probes;
    for (std::size_t draw = 0; result.probes < settings.probes && draw < max_draws; ++draw) {
        std::size_t flat = rng.below(total);
        std::size_t which = 0;
        while (flat >= inputs[candidates[which]].numel()) flat -= inputs[candidates[which++]].numel();
        Tensor<double> target = inputs[candidates[which]];
        auto values = target.mutable_data();
        const double saved = values[flat];
        const double centre = evaluate();
        values[flat] = saved + settings.step;
        const double plus = evaluate();
        values[flat] = saved - settings.step;
        const double minus = evaluate();
        values[flat] = saved;
        const double forward = (plus - centre) / settings.step;
        const double backward_diff = (centre - minus) / settings.step;
        if (relative_error(forward, backward_diff, settings.magnitude_floor) > settings.kink_tolerance) {
            ++result.kinks_skipped;
            continue;
        }
        const double numeric = (plus - minus) / (2.0 * settings.step);
        const double analytic = target.grad()[flat];
        result.max_relative_error =
            std::max(result.max_relative_error, relative_error(analytic, numeric, settings.magnitude_floor));
        ++result.probes;
    }
    if (result.probes < settings.probes)
        throw NumericError("gradcheck '" + name + "': too many probes landed on kinks");
    result.passed = result.max_relative_error <= settings.tolerance;
    return result;
}

namespace detail {

inline Tensor<double> random_tensor(Rng& rng, const Shape& shape, double lo, double hi, bool requires_grad = true) {
    std::vector<double> v(shape.numel());
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Tensor<double>::from(shape, std::move(v), requires_grad);
}

/// Values with magnitude in [0.05, 1] and random sign, away from kinks at 0.
inline Tensor<double> kink_free_tensor(Rng& rng, const Shape& shape) {
    std::vector<double> v(shape.numel());
    for (auto& x : v) x = rng.uniform(0.05, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    return Tensor<double>::from(shape, std::move(v), true);
}

/// sum(out * weights) with fixed random weights, so every output element matters.
inline Tensor<double> project(Tape<double>& tape, const Tensor<double>& out, std::uint64_t seed) {
    Rng rng(seed);
    auto w = random_tensor(rng, out.shape(), -1.0, 1.0, false);
    return sum(tape, mul(tape, out, w));
}

}  // namespace detail

/// Finite-difference check of every differentiable operation and of both
/// networks end to end.
inline std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed = 0, const GradCheckSettings& settings = {}) {
    using detail::kink_free_tensor;
    using detail::project;
    using detail::random_tensor;
    using Inputs = std::vector<Tensor<double>>;
    std::vector<GradCheckResult> results;
    Rng rng(seed);
    std::uint64_t k = 0;
    auto next = [&] { return derive_seed(seed, ++k); };
    auto run = [&](const std::string& name, Inputs inputs, const ScalarFunction& f) {
        results.push_back(check_gradients(name, inputs, f, next(), settings));
    };
    auto unary_case = [&](const std::string& name, Tensor<double> x,
                          std::function<Tensor<double>(Tape<double>&, const Tensor<double>&)> op) {
        const auto proj = next();
        run(name, {x}, [op, proj](Tape<double>& t, const Inputs& in) { return project(t, op(t, in[0]), proj); });
    };

    {
        const auto proj = next();
        run("conv2d(stride 1, pad 1)",
            {random_tensor(rng, {2, 2, 5, 5}, -1, 1), random_tensor(rng, {3, 2, 3, 3}, -1, 1),
             random_tensor(rng, {3}, -1, 1)},
            [proj](Tape<double>& t, const Inputs& in) { return project(t, conv2d(t, in[0], in[1], in[2], 1, 1), proj); });
    }
    {
        const auto proj = next();
        run("conv2d(stride 2, pad 1)",
            {random_tensor(rng, {1, 3, 8, 8}, -1, 1), random_tensor(rng, {2, 3, 4, 4}, -1, 1),
             random_tensor(rng, {2}, -1, 1)},
            [proj](Tape<double>& t, const Inputs& in) { return project(t, conv2d(t, in[0], in[1], in[2], 2, 1), proj); });
    }
    {
        const auto proj = next();
        run("conv_transpose2d(stride 2, pad 1)",
            {random_tensor(rng, {2, 3, 3, 3}, -1, 1), random_tensor(rng, {3, 2, 4, 4}, -1, 1),
             random_tensor(rng, {2}, -1, 1)},
            [proj](Tape<double>& t, const Inputs& in) {
                return project(t, conv_transpose2d(t, in[0], in[1], in[2], 2, 1), proj);
            });
    }
    {
        const auto proj = next();
        run("conv_transpose2d(stride 1, pad 0)",
            {random_tensor(rng, {1, 2, 4, 4}, -1, 1), random_tensor(rng, {2, 3, 3, 3}, -1, 1),
             random_tensor(rng, {3}, -1, 1)},
            [proj](Tape<double>& t, const Inputs& in) {
                return project(t, conv_transpose2d(t, in[0], in[1], in[2], 1, 0), proj);
            });
    }
    unary_case("relu", kink_free_tensor(rng, {1, 2, 4, 4}), [](Tape<double>& t, const Tensor<double>& x) { return relu(t, x); });
    unary_case("leaky_relu", kink_free_tensor(rng, {1, 2, 4, 4}),
               [](Tape<double>& t, const Tensor<double>& x) { return leaky_relu(t, x, 0.2); });
    unary_case("tanh", random_tensor(rng, {1, 2, 4, 4}, -2, 2), [](Tape<double>& t, const Tensor<double>& x) { return tanh(t, x); });
    unary_case("sigmoid", random_tensor(rng, {1, 2, 4, 4}, -3, 3),
               [](Tape<double>& t, const Tensor<double>& x) { return sigmoid(t, x); });
    unary_case("dropout", random_tensor(rng, {1, 2, 4, 4}, -1, 1),
               [](Tape<double>& t, const Tensor<double>& x) { return dropout(t, x, 0.3, 17); });
    unary_case("abs", kink_free_tensor(rng, {1, 2, 4, 4}), [](Tape<double>& t, const Tensor<double>& x) { return abs(t, x); });
    unary_case("affine", random_tensor(rng, {1, 2, 4, 4}, -1, 1),
               [](Tape<double>& t, const Tensor<double>& x) { return affine(t, x, -0.7, 0.3); });
    unary_case("log_clamped", random_tensor(rng, {1, 2, 4, 4}, 0.05, 0.95),
               [](Tape<double>& t, const Tensor<double>& x) { return log_clamped(t, x, 1e-7, 1.0 - 1e-7); });
    unary_case("global_avg_pool", random_tensor(rng, {2, 3, 3, 4}, -1, 1),
               [](Tape<double>& t, const Tensor<double>& x) { return global_avg_pool(t, x); });
    unary_case("slice_channels", random_tensor(rng, {2, 4, 3, 3}, -1, 1),
               [](Tape<double>& t, const Tensor<double>& x) { return slice_channels(t, x, 1, 2); });
    {
        const auto proj = next();
        run("instance_norm",
            {random_tensor(rng, {2, 3, 4, 4}, -2, 2), random_tensor(rng, {3}, 0.5, 1.5), random_tensor(rng, {3}, -1, 1)},
            [proj](Tape<double>& t, const Inputs& in) {
                return project(t, instance_norm(t, in[0], in[1], in[2], 1e-5), proj);
            });
    }
    {
        const auto proj = next();
        run("concat_channels", {random_tensor(rng, {2, 1, 3, 3}, -1, 1), random_tensor(rng, {2, 2, 3, 3}, -1, 1)},
            [proj](Tape<double>& t, const Inputs& in) { return project(t, concat_channels(t, in[0], in[1]), proj); });
    }
    for (const char* name : {"add", "sub", "mul"}) {
        const std::string op = name;
        const auto proj = next();
        run(op, {random_tensor(rng, {1, 2, 3, 3}, -1, 1), random_tensor(rng, {1, 2, 3, 3}, -1, 1)},
            [op, proj](Tape<double>& t, const Inputs& in) {
                if (op == "add") return project(t, add(t, in[0], in[1]), proj);
                if (op == "sub") return project(t, sub(t, in[0], in[1]), proj);
                return project(t, mul(t, in[0], in[1]), proj);
            });
    }
    run("sum", {random_tensor(rng, {2, 3}, -1, 1)}, [](Tape<double>& t, const Inputs& in) { return sum(t, in[0]); });
    run("mean", {random_tensor(rng, {2, 3}, -1, 1)}, [](Tape<double>& t, const Inputs& in) { return mean(t, in[0]); });
    run("discriminator_loss", {random_tensor(rng, {4, 1, 1, 1}, 0.05, 0.95), random_tensor(rng, {4, 1, 1, 1}, 0.05, 0.95)},
        [](Tape<double>& t, const Inputs& in) { return discriminator_loss(t, in[0], in[1]); });
    {
        auto g_out = random_tensor(rng, {1, 3, 4, 4}, -1, 1);
        auto y = g_out.clone();
        // keep |g_out - y| away from the kink of |.|
        for (auto& v : y.mutable_data()) v += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.05, 0.5);
        run("generator_loss", {random_tensor(rng, {1, 1, 1, 1}, 0.05, 0.95), g_out, y},
            [](Tape<double>& t, const Inputs& in) { return generator_loss(t, in[0], in[1], in[2], 100.0).total; });
    }
    {
        UNetSpec spec;
        spec.depth = 2;
        spec.base_width = 4;
        auto gen = build_unet<double>(spec, next());
        Inputs inputs;
        for (auto& [name, p] : gen.params()) inputs.push_back(p);
        auto x = random_tensor(rng, {1, 3, 8, 8}, -1, 1, false);
        const auto dropout_seed = next();
        GradCheckSettings per_net = settings;
        per_net.probes = std::max<std::size_t>(settings.probes, 3 * inputs.size());
        results.push_back(check_gradients(
            "unet_generator(depth 2, 8x8)", inputs,
            [&gen, x, dropout_seed](Tape<double>& t, const Inputs&) {
                return mean(t, gen.forward(t, x, {Mode::train, dropout_seed, {}}));
            },
            next(), per_net));
    }
    {
        DiscriminatorSpec spec;
        spec.widths = {4, 8};
        Discriminator<double> disc(spec, next());
        Inputs inputs;
        for (auto& [name, p] : disc.params()) inputs.push_back(p);
        auto y = random_tensor(rng, {2, 3, 8, 8}, -1, 1, false);
        auto x = random_tensor(rng, {2, 3, 8, 8}, -1, 1, false);
        GradCheckSettings per_net = settings;
        per_net.probes = std::max<std::size_t>(settings.probes, 3 * inputs.size());
        results.push_back(check_gradients(
            "discriminator(widths 4/8, 8x8)", inputs,
            [&disc, x, y](Tape<double>& t, const Inputs&) { return mean(t, disc.forward(t, y, x)); }, next(),
            per_net));
    }
    return results;
}

}  // namespace ogan
