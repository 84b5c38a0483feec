#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>

#include "errors.hpp"
#include "image.hpp"
#include "rng.hpp"

namespace ogan {

struct OcclusionConfig {
    bool rectangles = true;
    bool ellipses = true;
    std::size_t count_lo = 1;
    std::size_t count_hi = 3;
    double coverage_lo = 0.1;
    double coverage_hi = 0.4;
    std::uint8_t fill = 128;
    std::size_t max_attempts = 1000;

    void validate() const {
        if (!rectangles && !ellipses) throw ArgumentError("OcclusionConfig: empty shape set");
        if (count_lo == 0 || count_lo > count_hi) throw ArgumentError("OcclusionConfig: bad occluder count range");
        if (!(coverage_lo >= 0.0 && coverage_lo <= coverage_hi && coverage_hi < 1.0))
            throw ArgumentError("OcclusionConfig: coverage range must satisfy 0 <= lo <= hi < 1");
        if (max_attempts == 0) throw ArgumentError("OcclusionConfig: max_attempts must be positive");
    }

    std::string describe() const {
        std::ostringstream os;
        os << "shapes=" << (rectangles ? "rectangle" : "") << (rectangles && ellipses ? "," : "")
           << (ellipses ? "ellipse" : "") << " count=[" << count_lo << "," << count_hi << "] coverage=["
           << coverage_lo << "," << coverage_hi << "] fill=" << int(fill);
        return os.str();
    }
};

/// Occluded input x, ground truth y and the binary mask (255 = occluded).
struct ImagePair {
    Image x;
    Image y;
    Image mask;
    std::uint64_t scene_seed = 0;
    std::uint64_t occlusion_seed = 0;
};

inline double mask_coverage(const Image& mask) {
    std::size_t set = 0;
    for (auto v : mask.pixels) set += v != 0;
    return static_cast<double>(set) / static_cast<double>(mask.pixels.size());
}

/// x = y outside the mask and the fill value inside it.
inline Image apply_occlusion(const Image& y, const Image& mask, std::uint8_t fill) {
    if (!y.same_extent(mask) || mask.channels != 1) throw ShapeError("apply_occlusion: mask does not match image");
    Image x = y;
    for (std::size_t i = 0; i < mask.area(); ++i)
        if (mask.pixels[i])
            for (std::size_t c = 0; c < y.channels; ++c) x.pixels[i * y.channels + c] = fill;
    return x;
}

/// Rejection-samples 1..n axis-aligned rectangles/ellipses until the realized
/// coverage lies in [coverage_lo, coverage_hi].
inline ImagePair synthesize_occlusion(const Image& y, const OcclusionConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    ImagePair pair{y, y, Image(y.width, y.height, 1, 0), 0, seed};
    if (cfg.coverage_hi == 0.0) return pair;

    Rng rng(seed);
    const double W = static_cast<double>(y.width);
    const double H = static_cast<double>(y.height);
    for (std::size_t attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        Image mask(y.width, y.height, 1, 0);
        const auto count = static_cast<std::size_t>(
            rng.between(static_cast<std::int64_t>(cfg.count_lo), static_cast<std::int64_t>(cfg.count_hi)));
        const double target = rng.uniform(cfg.coverage_lo, cfg.coverage_hi);
        for (std::size_t k = 0; k < count; ++k) {
            const bool ellipse = cfg.ellipses && (!cfg.rectangles || rng.uniform() < 0.5);
            double area = target * W * H / static_cast<double>(count);
            if (ellipse) area *= 4.0 / 3.14159265358979323846;  // bounding box of an ellipse of that area
            const double aspect = rng.uniform(0.5, 2.0);
            const double w = std::clamp(std::floor(std::sqrt(area * aspect) + 0.5), 1.0, W);
            const double h = std::clamp(std::floor(area / w + 0.5), 1.0, H);
            const auto bw = static_cast<std::size_t>(w);
            const auto bh = static_cast<std::size_t>(h);
            const auto x0 = static_cast<std::size_t>(rng.below(y.width - bw + 1));
            const auto y0 = static_cast<std::size_t>(rng.below(y.height - bh + 1));
            const double rx = w / 2.0, ry = h / 2.0;
            for (std::size_t py = y0; py < y0 + bh; ++py)
                for (std::size_t px = x0; px < x0 + bw; ++px) {
                    if (ellipse) {
                        const double u = (static_cast<double>(px - x0) + 0.5 - rx) / rx;
                        const double v = (static_cast<double>(py - y0) + 0.5 - ry) / ry;
                        if (u * u + v * v > 1.0) continue;
                    }
                    mask.at(px, py) = 255;
                }
        }
        const double coverage = mask_coverage(mask);
        if (coverage >= cfg.coverage_lo && coverage <= cfg.coverage_hi) {
            pair.x = apply_occlusion(y, mask, cfg.fill);
            pair.mask = std::move(mask);
            return pair;
        }
    }
    throw ArgumentError("synthesize_occlusion: no placement within " + std::to_string(cfg.max_attempts) +
                        " attempts for " + cfg.describe());
}

}  // namespace ogan
