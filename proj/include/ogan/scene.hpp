#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "image.hpp"
#include "rng.hpp"

// Procedural night scenes of a horizontal gas tank with a flame plume.
//
// Rendering uses only + - * / and sqrt, which IEEE-754 rounds exactly, so a
// (params, seed) pair yields the same bytes on every conforming platform.

namespace ogan {

struct Range {
    double lo = 0.0;
    double hi = 0.0;

    double sample(Rng& rng) const { return rng.uniform(lo, hi); }
};

using Rgb = std::array<double, 3>;

struct SceneParams {
    std::size_t size = 64;
    // Geometry as fractions of the image size.
    Range tank_center_x{0.35, 0.65};
    Range tank_center_y{0.58, 0.72};
    Range tank_radius{0.10, 0.16};
    Range tank_aspect{1.6, 2.4};  // body half-length / radius
    Range flame_height{0.28, 0.50};
    Range flame_width{0.14, 0.28};
    Range flame_hue{0.0, 0.12};  // fraction of the colour wheel, red to orange-yellow
    Range horizon{0.74, 0.86};
    // Night sky (top, bottom) and ground colours; one triple is picked per scene.
    std::vector<std::array<Rgb, 3>> palettes{
        {Rgb{8, 10, 30}, Rgb{30, 30, 60}, Rgb{22, 18, 14}},
        {Rgb{20, 8, 30}, Rgb{55, 25, 45}, Rgb{15, 15, 18}},
        {Rgb{12, 12, 12}, Rgb{45, 40, 38}, Rgb{28, 22, 16}},
        {Rgb{4, 18, 26}, Rgb{20, 44, 52}, Rgb{12, 20, 12}},
    };
    std::vector<Rgb> tank_colors{Rgb{235, 235, 230}, Rgb{205, 35, 30}, Rgb{230, 200, 45}, Rgb{40, 110, 200}};

    void validate() const {
        if (size < 4) throw ArgumentError("SceneParams: size must be at least 4");
        auto check = [](const Range& r, const char* name) {
            if (!(r.lo <= r.hi)) throw ArgumentError(std::string("SceneParams: degenerate range ") + name + " (lo > hi)");
        };
        check(tank_center_x, "tank_center_x");
        check(tank_center_y, "tank_center_y");
        check(tank_radius, "tank_radius");
        check(tank_aspect, "tank_aspect");
        check(flame_height, "flame_height");
        check(flame_width, "flame_width");
        check(flame_hue, "flame_hue");
        check(horizon, "horizon");
        if (palettes.empty() || tank_colors.empty()) throw ArgumentError("SceneParams: empty palette");
    }
};

namespace detail {

inline Rgb lerp(const Rgb& a, const Rgb& b, double t) {
    return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

inline std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 255.0) + 0.5)); }

/// Fully saturated hue in [0, 1/6]: red through yellow.
inline Rgb warm_hue(double h) { return {255.0, 255.0 * std::clamp(6.0 * h, 0.0, 1.0), 0.0}; }

}  // namespace detail

inline Image generate_scene(const SceneParams& params, std::uint64_t seed) {
    params.validate();
    Rng rng(seed);
    const double s = static_cast<double>(params.size);
    const auto& palette = params.palettes[rng.below(params.palettes.size())];
    const Rgb tank_color = params.tank_colors[rng.below(params.tank_colors.size())];
    const double horizon = params.horizon.sample(rng) * s;
    const double cx = params.tank_center_x.sample(rng) * s;
    const double cy = params.tank_center_y.sample(rng) * s;
    const double radius = params.tank_radius.sample(rng) * s;
    const double half_len = params.tank_aspect.sample(rng) * radius;
    const double flame_x = cx + rng.uniform(-0.5, 0.5) * (half_len - radius);
    const double flame_h = params.flame_height.sample(rng) * s;
    const double flame_w = params.flame_width.sample(rng) * s;
    const double sway = rng.uniform(-0.25, 0.25) * flame_w;
    const Rgb flame_color = detail::warm_hue(params.flame_hue.sample(rng));
    const Rgb flame_core{255.0, 245.0, 200.0};
    const double flame_base = cy - radius * 0.6;

    Image img(params.size, params.size, 3);
    for (std::size_t py = 0; py < params.size; ++py) {
        for (std::size_t px = 0; px < params.size; ++px) {
            const double x = static_cast<double>(px) + 0.5;
            const double y = static_cast<double>(py) + 0.5;

            Rgb c = y < horizon ? detail::lerp(palette[0], palette[1], y / horizon) : palette[2];

            // Capsule-shaped tank body, lit from above.
            const double dx = std::max(std::abs(x - cx) - (half_len - radius), 0.0);
            const double dy = y - cy;
            if (dx * dx + dy * dy <= radius * radius) {
                const double shade = 1.0 - 0.1 * (dy / radius + 1.0);
                c = {tank_color[0] * shade, tank_color[1] * shade, tank_color[2] * shade};
            }

            // Teardrop plume rising from the tank's upper surface.
            const double t = (flame_base - y) / flame_h;
            if (t >= 0.0 && t <= 1.0) {
                const double half_width = 0.5 * flame_w * (1.0 - t) * std::min(1.0, 3.0 * t + 0.35);
                const double offset = x - flame_x - sway * t * t;
                if (half_width > 0.0 && std::abs(offset) <= half_width) {
                    const double core = 1.0 - std::abs(offset) / half_width;
                    const Rgb f = detail::lerp(flame_color, flame_core, 0.7 * core * (1.0 - t));
                    const double glow = 0.85 + 0.15 * core;
                    c = {f[0] * glow, f[1] * glow, f[2] * glow};
                }
            }

            for (std::size_t ch = 0; ch < 3; ++ch) img.at(px, py, ch) = detail::to_byte(c[ch]);
        }
    }
    return img;
}

}  // namespace ogan
