#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "image.hpp"
#include "networks.hpp"

namespace ogan {

enum class BlendRegion { masked, full_frame };

/// Infer-mode generator pass; dropout off, nothing recorded.
template <typename T>
Tensor<T> reconstruct(const UNetGenerator<T>& gen, const Tensor<T>& x) {
    auto out = gen.infer(x);
    if (out.shape() != x.shape()) throw ShapeError("reconstruct: output " + out.shape().str() + " vs input " + x.shape().str());
    return out;
}

/// alpha * reconstructed + (1 - alpha) * input inside the mask (or
/// everywhere with full_frame); input untouched elsewhere.
template <typename T>
Tensor<T> composite_overlay(const Tensor<T>& input, const Tensor<T>& reconstructed, const Tensor<T>& mask, double alpha,
                            BlendRegion region = BlendRegion::masked) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("overlay alpha must lie in [0, 1]");
    detail::require_same_shape(input.shape(), reconstructed.shape(), "composite_overlay");
    detail::require_rank4(input.shape(), "composite_overlay");
    if (mask.shape() != Shape{input.dim(0), 1, input.dim(2), input.dim(3)})
        throw ShapeError("composite_overlay: mask " + mask.shape().str() + " vs image " + input.shape().str());
    const T a = static_cast<T>(alpha);
    const std::size_t channels = input.dim(1);
    const std::size_t plane = input.dim(2) * input.dim(3);
    auto out = input.detach();
    auto o = out.mutable_data();
    for (std::size_t n = 0; n < input.dim(0); ++n)
        for (std::size_t i = 0; i < plane; ++i) {
            if (region == BlendRegion::masked && mask[n * plane + i] == T(0)) continue;
            for (std::size_t c = 0; c < channels; ++c) {
                const std::size_t k = (n * channels + c) * plane + i;
                o[k] = a * reconstructed[k] + (T(1) - a) * input[k];
            }
        }
    return out;
}

/// Same blend on 8-bit images, rounded to nearest.
inline Image composite_overlay(const Image& input, const Image& reconstructed, const Image& mask, double alpha,
                               BlendRegion region = BlendRegion::masked) {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("overlay alpha must lie in [0, 1]");
    if (!input.same_extent(reconstructed) || input.channels != reconstructed.channels || !input.same_extent(mask) ||
        mask.channels != 1)
        throw ShapeError("composite_overlay: input, reconstruction and mask are not aligned");
    Image out = input;
    for (std::size_t i = 0; i < input.area(); ++i) {
        if (region == BlendRegion::masked && mask.pixels[i] == 0) continue;
        for (std::size_t c = 0; c < input.channels; ++c) {
            const std::size_t k = i * input.channels + c;
            const double v = alpha * reconstructed.pixels[k] + (1.0 - alpha) * input.pixels[k];
            out.pixels[k] = static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 255.0) + 0.5));
        }
    }
    return out;
}

struct OverlayResult {
    Tensor<float> reconstructed;
    Tensor<float> composite;
    double forward_ms = 0.0;
    double composite_ms = 0.0;
    double total_ms = 0.0;
};

inline OverlayResult run_overlay(const UNetGenerator<float>& gen, const Tensor<float>& x, const Tensor<float>& mask,
                                 double alpha, BlendRegion region = BlendRegion::masked) {
    using clock = std::chrono::steady_clock;
    const auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
    OverlayResult r;
    const auto t0 = clock::now();
    r.reconstructed = reconstruct(gen, x);
    const auto t1 = clock::now();
    r.composite = composite_overlay(x, r.reconstructed, mask, alpha, region);
    const auto t2 = clock::now();
    r.forward_ms = ms(t1 - t0);
    r.composite_ms = ms(t2 - t1);
    r.total_ms = ms(t2 - t0);
    return r;
}

struct StageLatency {
    double median_ms = 0.0;
    double p95_ms = 0.0;
};

/// Median (mean of the middle pair for even counts) and nearest-rank p95.
inline StageLatency summarize_latency(std::vector<double> samples) {
    if (samples.empty()) throw ArgumentError("no latency samples");
    std::sort(samples.begin(), samples.end());
    const std::size_t n = samples.size();
    const double median = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
    const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    return {median, samples[std::max<std::size_t>(rank, 1) - 1]};
}

struct LatencySummary {
    StageLatency forward;
    StageLatency composite;
    StageLatency total;
    std::size_t repetitions = 0;

    /// `stage<TAB>median_ms<TAB>p95_ms` lines.
    std::string to_text() const {
        std::ostringstream os;
        os << "forward\t" << forward.median_ms << '\t' << forward.p95_ms << '\n'
           << "composite\t" << composite.median_ms << '\t' << composite.p95_ms << '\n'
           << "total\t" << total.median_ms << '\t' << total.p95_ms << '\n';
        return os.str();
    }
};

/// Times `repetitions` overlay passes after one untimed warm-up pass.
inline LatencySummary measure_latency(const UNetGenerator<float>& gen, const Tensor<float>& x, const Tensor<float>& mask,
                                      std::size_t repetitions, double alpha = 1.0) {
    if (repetitions == 0) throw ArgumentError("measure_latency: repetitions must be at least 1");
    run_overlay(gen, x, mask, alpha);
    std::vector<double> forward, composite, total;
    for (std::size_t i = 0; i < repetitions; ++i) {
        const auto r = run_overlay(gen, x, mask, alpha);
        forward.push_back(r.forward_ms);
        composite.push_back(r.composite_ms);
        total.push_back(r.total_ms);
    }
    return {summarize_latency(forward), summarize_latency(composite), summarize_latency(total), repetitions};
}

}  // namespace ogan
