#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "config.hpp"
#include "corpus.hpp"
#include "errors.hpp"
#include "image.hpp"
#include "ops.hpp"
#include "tensor.hpp"

namespace ogan {

/// Default correctness threshold on masked L1, in normalized [-1, 1] units.
inline constexpr double kDefaultErrorThreshold = 0.25;

namespace detail {

template <typename T, typename Accumulate>
double masked_mean(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& mask, Accumulate f) {
    require_same_shape(a.shape(), b.shape(), "masked metric");
    require_rank4(a.shape(), "masked metric");
    if (mask.shape() != Shape{a.dim(0), 1, a.dim(2), a.dim(3)})
        throw ShapeError("mask " + mask.shape().str() + " does not match image " + a.shape().str());
    const std::size_t channels = a.dim(1);
    const std::size_t plane = a.dim(2) * a.dim(3);
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < a.dim(0); ++n)
        for (std::size_t i = 0; i < plane; ++i) {
            if (mask[n * plane + i] == T(0)) continue;
            for (std::size_t c = 0; c < channels; ++c) {
                const std::size_t k = (n * channels + c) * plane + i;
                acc += f(static_cast<double>(a[k]) - static_cast<double>(b[k]));
            }
            count += channels;
        }
    if (count == 0) throw ArgumentError("masked metric over an empty mask is undefined");
    return acc / static_cast<double>(count);
}

}  // namespace detail

/// Mean |a - b| over the masked pixels (all channels).
template <typename T>
double masked_l1(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& mask) {
    return detail::masked_mean(a, b, mask, [](double d) { return std::abs(d); });
}

/// Mean squared difference over the masked pixels.
template <typename T>
double masked_l2(const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& mask) {
    return detail::masked_mean(a, b, mask, [](double d) { return d * d; });
}

template <typename T>
double full_frame_l1(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a.shape(), b.shape(), "full_frame_l1");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.numel(); ++i) acc += std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i]));
    return acc / static_cast<double>(a.numel());
}

/// Error of leaving the occluded input as it is.
template <typename T>
double identity_baseline(const Tensor<T>& x, const Tensor<T>& truth, const Tensor<T>& mask) {
    return masked_l1(x, truth, mask);
}

struct EvalRow {
    std::string id;
    double masked_l1 = 0.0;
    double masked_l2 = 0.0;
    double full_l1 = 0.0;
    double baseline_l1 = 0.0;

    friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

struct EvalReport {
    std::vector<EvalRow> rows;

    double mean_masked_l1() const { return mean_of(&EvalRow::masked_l1); }
    double median_masked_l1() const { return median_of(&EvalRow::masked_l1); }
    double mean_baseline_l1() const { return mean_of(&EvalRow::baseline_l1); }
    double median_baseline_l1() const { return median_of(&EvalRow::baseline_l1); }

    std::string to_tsv() const {
        std::ostringstream os;
        os << "pair_id\tmasked_l1\tmasked_l2\tfull_l1\tbaseline_masked_l1\n";
        const auto d = KeyValueConfig::format_double;
        for (const auto& r : rows)
            os << r.id << '\t' << d(r.masked_l1) << '\t' << d(r.masked_l2) << '\t' << d(r.full_l1) << '\t'
               << d(r.baseline_l1) << '\n';
        return os.str();
    }

    friend bool operator==(const EvalReport&, const EvalReport&) = default;

private:
    double mean_of(double EvalRow::*field) const {
        if (rows.empty()) throw ArgumentError("empty evaluation report");
        double acc = 0.0;
        for (const auto& r : rows) acc += r.*field;
        return acc / static_cast<double>(rows.size());
    }

    double median_of(double EvalRow::*field) const {
        if (rows.empty()) throw ArgumentError("empty evaluation report");
        std::vector<double> v;
        for (const auto& r : rows) v.push_back(r.*field);
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    }
};

/// Fraction of pairs whose masked L1 exceeds `threshold`. A pair exactly at
/// the threshold counts as correct.
inline double error_rate(const EvalReport& report, double threshold = kDefaultErrorThreshold) {
    if (report.rows.empty()) throw ArgumentError("error_rate of an empty report");
    if (!(threshold > 0.0)) throw ArgumentError("error_rate threshold must be positive");
    std::size_t wrong = 0;
    for (const auto& r : report.rows) wrong += r.masked_l1 > threshold;
    return static_cast<double>(wrong) / static_cast<double>(report.rows.size());
}

using Reconstructor = std::function<Tensor<float>(const Tensor<float>& x)>;

/// Scores every pair; with `grid_dir`, also writes input | reconstruction | truth strips.
inline EvalReport evaluate(const std::vector<LabeledPair>& pairs, const Reconstructor& reconstruct,
                           const std::optional<std::filesystem::path>& grid_dir = {}) {
    if (pairs.empty()) throw ArgumentError("evaluate: empty test split");
    EvalReport report;
    for (const auto& lp : pairs) {
        const auto x = image_to_tensor<float>(lp.pair.x);
        const auto y = image_to_tensor<float>(lp.pair.y);
        const auto m = mask_to_tensor<float>(lp.pair.mask);
        const auto r = reconstruct(x);
        report.rows.push_back({lp.id, masked_l1(r, y, m), masked_l2(r, y, m), full_frame_l1(r, y),
                               identity_baseline(x, y, m)});
        if (grid_dir) save_image(*grid_dir / (lp.id + "_grid.ppm"), hstack({lp.pair.x, tensor_to_image(r), lp.pair.y}));
    }
    return report;
}

}  // namespace ogan
