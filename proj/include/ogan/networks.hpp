#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "errors.hpp"
#include "ops.hpp"
#include "params.hpp"
#include "rng.hpp"

namespace ogan {

inline constexpr std::size_t kSampleKernel = 4;  // every stride-2 layer uses 4x4 taps

/// U-Net generator layout.
///
/// Encoder level i (1-based) halves the resolution and has
/// `base_width * 2^(i-1)` channels. Going back up, the decoder stage at the
/// resolution of encoder level i upsamples to the width of level i+1 and
/// concatenates encoder level i's output. For depth 3, base 16 the decoder
/// consumes 64+32 and then 32+16 channels before the output layer.
///
/// Parameter count, with w_i the level widths, K = 16 taps, c the input and
/// o the output channels:
///
///     enc1            c*w1*K + w1
///     enc_i, i >= 2   w_{i-1}*w_i*K + 3*w_i          (conv + norm gain/shift)
///     dec_{D-1}       w_D*w_D*K + 3*w_D
///     dec_i, i < D-1  (w_{i+2}+w_{i+1})*w_{i+1}*K + 3*w_{i+1}
///     out             (w_2+w_1)*o*K + o               (w_1*o*K + o when D = 1)
struct UNetSpec {
    std::size_t input_channels = 3;
    std::size_t output_channels = 3;
    std::size_t base_width = 16;
    std::size_t depth = 3;
    double dropout_rate = 0.5;
    double leaky_slope = 0.2;
    double norm_epsilon = 1e-5;

    std::size_t width(std::size_t level) const { return base_width << (level - 1); }

    void validate() const {
        if (input_channels == 0 || output_channels == 0 || base_width == 0)
            throw ArgumentError("UNetSpec: channel counts must be positive");
        if (depth == 0 || depth > 8) throw ArgumentError("UNetSpec: depth must lie in [1, 8]");
        if (!(dropout_rate >= 0.0 && dropout_rate < 1.0))
            throw ArgumentError("UNetSpec: dropout_rate must lie in [0, 1)");
    }
};

inline std::size_t unet_parameter_count(const UNetSpec& s) {
    s.validate();
    constexpr std::size_t K = kSampleKernel * kSampleKernel;
    const std::size_t D = s.depth;
    std::size_t total = s.input_channels * s.width(1) * K + s.width(1);
    for (std::size_t i = 2; i <= D; ++i) total += s.width(i - 1) * s.width(i) * K + 3 * s.width(i);
    if (D >= 2) total += s.width(D) * s.width(D) * K + 3 * s.width(D);
    for (std::size_t i = D >= 2 ? D - 2 : 0; i >= 1; --i)
        total += (s.width(i + 2) + s.width(i + 1)) * s.width(i + 1) * K + 3 * s.width(i + 1);
    const std::size_t last_in = D >= 2 ? s.width(2) + s.width(1) : s.width(1);
    total += last_in * s.output_channels * K + s.output_channels;
    return total;
}

enum class Mode { train, infer };

struct GeneratorOptions {
    Mode mode = Mode::infer;
    std::uint64_t dropout_seed = 0;
    /// Zero the skip tensor of this encoder level (1-based); diagnostics only.
    std::optional<std::size_t> ablate_skip;
};

namespace detail {

template <typename T>
Tensor<T> init_weight(Rng& rng, const Shape& shape, std::size_t fan_in) {
    const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::vector<T> values(shape.numel());
    for (auto& v : values) v = static_cast<T>(stddev * rng.normal());
    return Tensor<T>::from(shape, std::move(values), true);
}

}  // namespace detail

/// Image-conditioned U-Net generator. Train mode applies dropout in the
/// inner decoder stages; that dropout is the only source of stochasticity.
template <typename T>
class UNetGenerator {
public:
    UNetGenerator(const UNetSpec& spec, std::uint64_t seed) : spec_(spec) {
        spec_.validate();
        Rng rng(seed);
        const std::size_t K = kSampleKernel;
        auto conv = [&](const std::string& name, std::size_t cin, std::size_t cout) {
            params_.add(name + ".weight", detail::init_weight<T>(rng, Shape{cout, cin, K, K}, cin * K * K));
            params_.add(name + ".bias", Tensor<T>::zeros(Shape{cout}, true));
        };
        auto deconv = [&](const std::string& name, std::size_t cin, std::size_t cout) {
            params_.add(name + ".weight", detail::init_weight<T>(rng, Shape{cin, cout, K, K}, cin * K * K));
            params_.add(name + ".bias", Tensor<T>::zeros(Shape{cout}, true));
        };
        auto norm = [&](const std::string& name, std::size_t channels) {
            params_.add(name + ".gain", Tensor<T>::filled(Shape{channels}, T(1), true));
            params_.add(name + ".shift", Tensor<T>::zeros(Shape{channels}, true));
        };

        const std::size_t D = spec_.depth;
        conv("enc1.conv", spec_.input_channels, spec_.width(1));
        for (std::size_t i = 2; i <= D; ++i) {
            conv(level_name("enc", i) + ".conv", spec_.width(i - 1), spec_.width(i));
            norm(level_name("enc", i) + ".norm", spec_.width(i));
        }
        std::size_t in = spec_.width(D);
        for (std::size_t i = D - 1; i >= 1; --i) {
            const std::size_t out = spec_.width(i + 1);
            deconv(level_name("dec", i) + ".deconv", in, out);
            norm(level_name("dec", i) + ".norm", out);
            in = out + spec_.width(i);
        }
        deconv("out.deconv", in, spec_.output_channels);
    }

    const UNetSpec& spec() const noexcept { return spec_; }
    ModelParams<T>& params() noexcept { return params_; }
    const ModelParams<T>& params() const noexcept { return params_; }

    /// [N, input_channels, H, W] -> [N, output_channels, H, W], values in (-1, 1).
    Tensor<T> forward(Tape<T>& tape, const Tensor<T>& x, const GeneratorOptions& opt = {}) const {
        check_input(x.shape());
        const std::size_t D = spec_.depth;
        const T slope = static_cast<T>(spec_.leaky_slope);
        const T eps = static_cast<T>(spec_.norm_epsilon);

        std::vector<Tensor<T>> skips;
        Tensor<T> h = x;
        for (std::size_t i = 1; i <= D; ++i) {
            const std::string name = level_name("enc", i);
            h = conv2d(tape, h, p(name + ".conv.weight"), p(name + ".conv.bias"), 2, 1);
            if (i > 1) h = instance_norm(tape, h, p(name + ".norm.gain"), p(name + ".norm.shift"), eps);
            h = leaky_relu(tape, h, slope);
            skips.push_back(h);
        }

        for (std::size_t i = D - 1; i >= 1; --i) {
            const std::string name = level_name("dec", i);
            Tensor<T> u = conv_transpose2d(tape, h, p(name + ".deconv.weight"), p(name + ".deconv.bias"), 2, 1);
            u = instance_norm(tape, u, p(name + ".norm.gain"), p(name + ".norm.shift"), eps);
            u = relu(tape, u);
            if (opt.mode == Mode::train && spec_.dropout_rate > 0.0)
                u = dropout(tape, u, spec_.dropout_rate, derive_seed(opt.dropout_seed, i));
            Tensor<T> skip = skips[i - 1];
            if (opt.ablate_skip && *opt.ablate_skip == i) skip = Tensor<T>::zeros(skip.shape());
            h = concat_channels(tape, u, skip);
        }

        h = conv_transpose2d(tape, h, p("out.deconv.weight"), p("out.deconv.bias"), 2, 1);
        return tanh(tape, h);
    }

    /// Infer-mode forward without recording.
    Tensor<T> infer(const Tensor<T>& x) const {
        auto tape = Tape<T>::inference();
        return forward(tape, x, GeneratorOptions{});
    }

private:
    static std::string level_name(const char* prefix, std::size_t level) {
        return prefix + std::to_string(level);
    }

    const Tensor<T>& p(const std::string& name) const { return params_.at(name); }

    void check_input(const Shape& s) const {
        if (s.rank() != 4 || s[1] != spec_.input_channels)
            throw ShapeError("generator expects [N," + std::to_string(spec_.input_channels) + ",H,W], got " + s.str());
        const std::size_t unit = std::size_t{1} << spec_.depth;
        if (s[2] % unit != 0 || s[3] % unit != 0)
            throw ShapeError("generator input " + s.str() + ": H and W must be divisible by " + std::to_string(unit) +
                             " for depth " + std::to_string(spec_.depth));
    }

    UNetSpec spec_;
    ModelParams<T> params_;
};

template <typename T>
UNetGenerator<T> build_unet(const UNetSpec& spec, std::uint64_t seed) {
    return UNetGenerator<T>(spec, seed);
}

/// Conditional discriminator: scores (candidate y, condition x) stacked along channels.
struct DiscriminatorSpec {
    std::size_t image_channels = 3;  // input is 2 * image_channels
    std::vector<std::size_t> widths{16, 32, 64};
    double leaky_slope = 0.2;
    double norm_epsilon = 1e-5;
    /// Per-location probabilities instead of one per sample. Off by default.
    bool patch_output = false;

    std::size_t input_channels() const { return 2 * image_channels; }

    void validate() const {
        if (image_channels == 0 || widths.empty()) throw ArgumentError("DiscriminatorSpec: empty layout");
        for (auto w : widths)
            if (w == 0) throw ArgumentError("DiscriminatorSpec: widths must be positive");
    }
};

template <typename T>
class Discriminator {
public:
    Discriminator(const DiscriminatorSpec& spec, std::uint64_t seed) : spec_(spec) {
        spec_.validate();
        Rng rng(seed);
        const std::size_t K = kSampleKernel;
        std::size_t in = spec_.input_channels();
        for (std::size_t i = 0; i < spec_.widths.size(); ++i) {
            const std::string name = "layer" + std::to_string(i + 1);
            const std::size_t out = spec_.widths[i];
            params_.add(name + ".conv.weight", detail::init_weight<T>(rng, Shape{out, in, K, K}, in * K * K));
            params_.add(name + ".conv.bias", Tensor<T>::zeros(Shape{out}, true));
            if (i > 0) {
                params_.add(name + ".norm.gain", Tensor<T>::filled(Shape{out}, T(1), true));
                params_.add(name + ".norm.shift", Tensor<T>::zeros(Shape{out}, true));
            }
            in = out;
        }
        params_.add("head.conv.weight", detail::init_weight<T>(rng, Shape{1, in, 3, 3}, in * 9));
        params_.add("head.conv.bias", Tensor<T>::zeros(Shape{1}, true));
    }

    const DiscriminatorSpec& spec() const noexcept { return spec_; }
    ModelParams<T>& params() noexcept { return params_; }
    const ModelParams<T>& params() const noexcept { return params_; }

    /// Probability that y is the real counterpart of condition x.
    /// Returns [N,1,1,1], or [N,1,h,w] with patch_output.
    Tensor<T> forward(Tape<T>& tape, const Tensor<T>& y, const Tensor<T>& x) const {
        if (y.shape() != x.shape())
            throw ShapeError("discriminator: candidate " + y.shape().str() + " and condition " + x.shape().str() +
                             " differ");
        if (y.shape().rank() != 4 || y.dim(1) != spec_.image_channels)
            throw ShapeError("discriminator expects [N," + std::to_string(spec_.image_channels) + ",H,W], got " +
                             y.shape().str());
        const T slope = static_cast<T>(spec_.leaky_slope);
        const T eps = static_cast<T>(spec_.norm_epsilon);
        Tensor<T> h = concat_channels(tape, y, x);
        for (std::size_t i = 0; i < spec_.widths.size(); ++i) {
            const std::string name = "layer" + std::to_string(i + 1);
            h = conv2d(tape, h, params_.at(name + ".conv.weight"), params_.at(name + ".conv.bias"), 2, 1);
            if (i > 0) h = instance_norm(tape, h, params_.at(name + ".norm.gain"), params_.at(name + ".norm.shift"), eps);
            h = leaky_relu(tape, h, slope);
        }
        h = conv2d(tape, h, params_.at("head.conv.weight"), params_.at("head.conv.bias"), 1, 1);
        if (!spec_.patch_output) h = global_avg_pool(tape, h);
        return sigmoid(tape, h);
    }

    Tensor<T> score(const Tensor<T>& y, const Tensor<T>& x) const {
        auto tape = Tape<T>::inference();
        return forward(tape, y, x);
    }

private:
    DiscriminatorSpec spec_;
    ModelParams<T> params_;
};

}  // namespace ogan
