#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>

#include "errors.hpp"
#include "rng.hpp"
#include "tensor.hpp"

// Differentiable operations. Every op takes the tape it records on first;
// nothing is recorded when the tape is an inference tape or no operand
// requires a gradient.

namespace ogan {

namespace detail {

inline void require_rank4(const Shape& s, const char* what) {
    if (s.rank() != 4) throw ShapeError(std::string(what) + " expects an NxCxHxW tensor, got " + s.str());
}

inline void require_same_shape(const Shape& a, const Shape& b, const char* what) {
    if (a != b) throw ShapeError(std::string(what) + ": shape mismatch " + a.str() + " vs " + b.str());
}

/// Output positions o in [lo, hi) for which o*stride - pad + tap lands inside [0, extent).
inline std::pair<std::size_t, std::size_t> tap_range(std::size_t out_extent, std::size_t extent,
                                                     std::size_t stride, std::size_t pad,
                                                     std::size_t tap) {
    std::size_t lo = 0;
    if (pad > tap) lo = (pad - tap + stride - 1) / stride;
    if (extent + pad <= tap) return {0, 0};
    std::size_t hi = std::min(out_extent, (extent + pad - tap - 1) / stride + 1);
    if (hi < lo) hi = lo;
    return {lo, hi};
}

struct ConvGeometry {
    std::size_t batch, in_channels, in_h, in_w;
    std::size_t out_channels, kernel_h, kernel_w;
    std::size_t stride, pad;
    std::size_t out_h, out_w;
};

// Cross-correlation. Each output element sums taps in kernel-major order
// (kh, kw), then input channel.
template <typename T>
void conv_forward_raw(const T* in, const T* weight, T* out, const ConvGeometry& g) {
    const std::size_t in_plane = g.in_h * g.in_w;
    const std::size_t out_plane = g.out_h * g.out_w;
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t co = 0; co < g.out_channels; ++co) {
            T* o = out + (n * g.out_channels + co) * out_plane;
            for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
                const auto [oh_lo, oh_hi] = tap_range(g.out_h, g.in_h, g.stride, g.pad, kh);
                for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
                    const auto [ow_lo, ow_hi] = tap_range(g.out_w, g.in_w, g.stride, g.pad, kw);
                    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
                        const T wv = weight[((co * g.in_channels + ci) * g.kernel_h + kh) * g.kernel_w + kw];
                        const T* src = in + (n * g.in_channels + ci) * in_plane;
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            const std::size_t ih = oh * g.stride + kh - g.pad;
                            const T* row = src + ih * g.in_w;
                            T* orow = o + oh * g.out_w;
                            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                                orow[ow] += wv * row[ow * g.stride + kw - g.pad];
                        }
                    }
                }
            }
        }
    }
}

// Adjoint of conv_forward_raw w.r.t. its input: scatters out_grad back.
template <typename T>
void conv_backward_input_raw(const T* out_grad, const T* weight, T* in_grad, const ConvGeometry& g) {
    const std::size_t in_plane = g.in_h * g.in_w;
    const std::size_t out_plane = g.out_h * g.out_w;
    for (std::size_t n = 0; n < g.batch; ++n) {
        for (std::size_t co = 0; co < g.out_channels; ++co) {
            const T* go = out_grad + (n * g.out_channels + co) * out_plane;
            for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
                const auto [oh_lo, oh_hi] = tap_range(g.out_h, g.in_h, g.stride, g.pad, kh);
                for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
                    const auto [ow_lo, ow_hi] = tap_range(g.out_w, g.in_w, g.stride, g.pad, kw);
                    for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
                        const T wv = weight[((co * g.in_channels + ci) * g.kernel_h + kh) * g.kernel_w + kw];
                        T* dst = in_grad + (n * g.in_channels + ci) * in_plane;
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            T* row = dst + (oh * g.stride + kh - g.pad) * g.in_w;
                            const T* grow = go + oh * g.out_w;
                            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                                row[ow * g.stride + kw - g.pad] += wv * grow[ow];
                        }
                    }
                }
            }
        }
    }
}

template <typename T>
void conv_backward_weight_raw(const T* in, const T* out_grad, T* weight_grad, const ConvGeometry& g) {
    const std::size_t in_plane = g.in_h * g.in_w;
    const std::size_t out_plane = g.out_h * g.out_w;
    for (std::size_t co = 0; co < g.out_channels; ++co) {
        for (std::size_t ci = 0; ci < g.in_channels; ++ci) {
            for (std::size_t kh = 0; kh < g.kernel_h; ++kh) {
                const auto [oh_lo, oh_hi] = tap_range(g.out_h, g.in_h, g.stride, g.pad, kh);
                for (std::size_t kw = 0; kw < g.kernel_w; ++kw) {
                    const auto [ow_lo, ow_hi] = tap_range(g.out_w, g.in_w, g.stride, g.pad, kw);
                    T acc = T(0);
                    for (std::size_t n = 0; n < g.batch; ++n) {
                        const T* src = in + (n * g.in_channels + ci) * in_plane;
                        const T* go = out_grad + (n * g.out_channels + co) * out_plane;
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            const T* row = src + (oh * g.stride + kh - g.pad) * g.in_w;
                            const T* grow = go + oh * g.out_w;
                            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow)
                                acc += grow[ow] * row[ow * g.stride + kw - g.pad];
                        }
                    }
                    weight_grad[((co * g.in_channels + ci) * g.kernel_h + kh) * g.kernel_w + kw] += acc;
                }
            }
        }
    }
}

template <typename T>
void add_bias(T* out, const T* bias, std::size_t batch, std::size_t channels, std::size_t plane) {
    for (std::size_t n = 0; n < batch; ++n)
        for (std::size_t c = 0; c < channels; ++c) {
            T* o = out + (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) o[i] += bias[c];
        }
}

template <typename T>
void accumulate_bias_grad(const T* out_grad, T* bias_grad, std::size_t batch, std::size_t channels,
                          std::size_t plane) {
    for (std::size_t c = 0; c < channels; ++c) {
        T acc = T(0);
        for (std::size_t n = 0; n < batch; ++n) {
            const T* g = out_grad + (n * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) acc += g[i];
        }
        bias_grad[c] += acc;
    }
}

template <typename T, typename Forward, typename Derivative>
Tensor<T> unary(Tape<T>& tape, const Tensor<T>& x, Forward f, Derivative df) {
    auto out = Tensor<T>::zeros(x.shape());
    auto xs = x.data();
    auto ys = out.mutable_data();
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = f(xs[i]);
    if (tape.wants({&x})) {
        auto* xi = x.storage();
        auto* yo = out.storage();
        tape.record({&x}, out, [xi, yo, df] {
            if (!xi->requires_grad) return;
            for (std::size_t i = 0; i < xi->data.size(); ++i)
                xi->grad[i] += yo->grad[i] * df(xi->data[i], yo->data[i]);
        });
    }
    return out;
}

}  // namespace detail

/// out[n,co,oh,ow] = bias[co] + sum over (kh, kw, ci) of kernel[co,ci,kh,kw] * input[n,ci,oh*s-p+kh,ow*s-p+kw]
template <typename T>
Tensor<T> conv2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias,
                 std::size_t stride, std::size_t padding) {
    detail::require_rank4(input.shape(), "conv2d input");
    detail::require_rank4(kernel.shape(), "conv2d kernel");
    if (stride == 0) throw ArgumentError("conv2d: stride must be positive");
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    if (is[1] != ks[1])
        throw ShapeError("conv2d: input " + is.str() + " has " + std::to_string(is[1]) +
                         " channels but kernel " + ks.str() + " expects " + std::to_string(ks[1]));
    if (is[2] + 2 * padding < ks[2] || is[3] + 2 * padding < ks[3])
        throw ShapeError("conv2d: kernel " + ks.str() + " larger than padded input " + is.str());
    if (bias.defined() && bias.shape() != Shape{ks[0]})
        throw ShapeError("conv2d: bias " + bias.shape().str() + " does not match kernel " + ks.str());

    detail::ConvGeometry g{is[0], is[1], is[2], is[3], ks[0], ks[2], ks[3], stride, padding,
                           (is[2] + 2 * padding - ks[2]) / stride + 1, (is[3] + 2 * padding - ks[3]) / stride + 1};
    auto out = Tensor<T>::zeros(Shape{g.batch, g.out_channels, g.out_h, g.out_w});
    detail::conv_forward_raw(input.data().data(), kernel.data().data(), out.mutable_data().data(), g);
    if (bias.defined())
        detail::add_bias(out.mutable_data().data(), bias.data().data(), g.batch, g.out_channels, g.out_h * g.out_w);

    if (tape.wants({&input, &kernel, &bias})) {
        auto* xi = input.storage();
        auto* ki = kernel.storage();
        auto* bi = bias.defined() ? bias.storage() : nullptr;
        auto* yo = out.storage();
        tape.record({&input, &kernel, &bias}, out, [xi, ki, bi, yo, g] {
            const T* gy = yo->grad.data();
            if (xi->requires_grad) detail::conv_backward_input_raw(gy, ki->data.data(), xi->grad.data(), g);
            if (ki->requires_grad) detail::conv_backward_weight_raw(xi->data.data(), gy, ki->grad.data(), g);
            if (bi && bi->requires_grad)
                detail::accumulate_bias_grad(gy, bi->grad.data(), g.batch, g.out_channels, g.out_h * g.out_w);
        });
    }
    return out;
}

/// Transposed convolution with kernel laid out [Cin, Cout, kH, kW]; the
/// adjoint of conv2d for the same stride and padding.
template <typename T>
Tensor<T> conv_transpose2d(Tape<T>& tape, const Tensor<T>& input, const Tensor<T>& kernel,
                           const Tensor<T>& bias, std::size_t stride, std::size_t padding) {
    detail::require_rank4(input.shape(), "conv_transpose2d input");
    detail::require_rank4(kernel.shape(), "conv_transpose2d kernel");
    if (stride == 0) throw ArgumentError("conv_transpose2d: stride must be positive");
    const auto& is = input.shape();
    const auto& ks = kernel.shape();
    if (is[1] != ks[0])
        throw ShapeError("conv_transpose2d: input " + is.str() + " has " + std::to_string(is[1]) +
                         " channels but kernel " + ks.str() + " expects " + std::to_string(ks[0]));
    const std::size_t full_h = (is[2] - 1) * stride + ks[2];
    const std::size_t full_w = (is[3] - 1) * stride + ks[3];
    if (full_h <= 2 * padding || full_w <= 2 * padding)
        throw ShapeError("conv_transpose2d: padding " + std::to_string(padding) + " leaves no output for input " +
                         is.str() + " and kernel " + ks.str());
    if (bias.defined() && bias.shape() != Shape{ks[1]})
        throw ShapeError("conv_transpose2d: bias " + bias.shape().str() + " does not match kernel " + ks.str());

    // Seen as the conv2d it is the adjoint of: that conv maps the output
    // extent back to the input extent with ks[0] output channels.
    detail::ConvGeometry g{is[0], ks[1], full_h - 2 * padding, full_w - 2 * padding, ks[0], ks[2], ks[3],
                           stride, padding, is[2], is[3]};
    auto out = Tensor<T>::zeros(Shape{g.batch, g.in_channels, g.in_h, g.in_w});
    detail::conv_backward_input_raw(input.data().data(), kernel.data().data(), out.mutable_data().data(), g);
    if (bias.defined())
        detail::add_bias(out.mutable_data().data(), bias.data().data(), g.batch, g.in_channels, g.in_h * g.in_w);

    if (tape.wants({&input, &kernel, &bias})) {
        auto* xi = input.storage();
        auto* ki = kernel.storage();
        auto* bi = bias.defined() ? bias.storage() : nullptr;
        auto* yo = out.storage();
        tape.record({&input, &kernel, &bias}, out, [xi, ki, bi, yo, g] {
            const T* gy = yo->grad.data();
            if (xi->requires_grad) detail::conv_forward_raw(gy, ki->data.data(), xi->grad.data(), g);
            if (ki->requires_grad) detail::conv_backward_weight_raw(gy, xi->data.data(), ki->grad.data(), g);
            if (bi && bi->requires_grad)
                detail::accumulate_bias_grad(gy, bi->grad.data(), g.batch, g.in_channels, g.in_h * g.in_w);
        });
    }
    return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
    return detail::unary(
        tape, x, [](T v) { return v > T(0) ? v : T(0); }, [](T v, T) { return v > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> leaky_relu(Tape<T>& tape, const Tensor<T>& x, T slope) {
    return detail::unary(
        tape, x, [slope](T v) { return v > T(0) ? v : slope * v; },
        [slope](T v, T) { return v > T(0) ? T(1) : slope; });
}

template <typename T>
Tensor<T> tanh(Tape<T>& tape, const Tensor<T>& x) {
    return detail::unary(
        tape, x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(Tape<T>& tape, const Tensor<T>& x) {
    return detail::unary(
        tape, x,
        [](T v) {
            if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
            const T e = std::exp(v);
            return e / (T(1) + e);
        },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> abs(Tape<T>& tape, const Tensor<T>& x) {
    return detail::unary(
        tape, x, [](T v) { return std::abs(v); },
        [](T v, T) { return v > T(0) ? T(1) : (v < T(0) ? T(-1) : T(0)); });
}

/// a * x + b elementwise.
template <typename T>
Tensor<T> affine(Tape<T>& tape, const Tensor<T>& x, T a, T b) {
    return detail::unary(
        tape, x, [a, b](T v) { return a * v + b; }, [a](T, T) { return a; });
}

/// log(clamp(x, lo, hi)); zero gradient where the clamp is active.
template <typename T>
Tensor<T> log_clamped(Tape<T>& tape, const Tensor<T>& x, T lo, T hi) {
    return detail::unary(
        tape, x, [lo, hi](T v) { return std::log(std::clamp(v, lo, hi)); },
        [lo, hi](T v, T) { return (v < lo || v > hi) ? T(0) : T(1) / v; });
}

/// Inverted dropout. Element i survives iff a hash of (seed, i) lands at or
/// above `rate`; survivors are scaled by 1/(1-rate).
template <typename T>
Tensor<T> dropout(Tape<T>& tape, const Tensor<T>& x, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout rate must lie in [0, 1)");
    const T scale = T(1.0 / (1.0 - rate));
    auto out = Tensor<T>::zeros(x.shape());
    std::vector<T> factor(x.numel());
    const std::uint64_t key = mix64(seed);
    for (std::size_t i = 0; i < factor.size(); ++i)
        factor[i] = unit_double(mix64(key ^ (0xd1b54a32d192ed03ULL * (i + 1)))) >= rate ? scale : T(0);
    auto xs = x.data();
    auto ys = out.mutable_data();
    for (std::size_t i = 0; i < xs.size(); ++i) ys[i] = xs[i] * factor[i];
    if (tape.wants({&x})) {
        auto* xi = x.storage();
        auto* yo = out.storage();
        tape.record({&x}, out, [xi, yo, factor = std::move(factor)] {
            if (!xi->requires_grad) return;
            for (std::size_t i = 0; i < factor.size(); ++i) xi->grad[i] += yo->grad[i] * factor[i];
        });
    }
    return out;
}

namespace detail {

template <typename T, typename Combine, typename GradA, typename GradB>
Tensor<T> binary(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, const char* what, Combine f, GradA da,
                 GradB db) {
    require_same_shape(a.shape(), b.shape(), what);
    auto out = Tensor<T>::zeros(a.shape());
    auto as = a.data();
    auto bs = b.data();
    auto ys = out.mutable_data();
    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = f(as[i], bs[i]);
    if (tape.wants({&a, &b})) {
        auto* ai = a.storage();
        auto* bi = b.storage();
        auto* yo = out.storage();
        tape.record({&a, &b}, out, [ai, bi, yo, da, db] {
            const std::size_t n = yo->data.size();
            if (ai->requires_grad)
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += yo->grad[i] * da(ai->data[i], bi->data[i]);
            if (bi->requires_grad)
                for (std::size_t i = 0; i < n; ++i) bi->grad[i] += yo->grad[i] * db(ai->data[i], bi->data[i]);
        });
    }
    return out;
}

}  // namespace detail

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(
        tape, a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(
        tape, a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary(
        tape, a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.data()) acc += v;
    auto out = Tensor<T>::scalar(acc);
    if (tape.wants({&x})) {
        auto* xi = x.storage();
        auto* yo = out.storage();
        tape.record({&x}, out, [xi, yo] {
            if (!xi->requires_grad) return;
            const T g = yo->grad[0];
            for (auto& v : xi->grad) v += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
    T acc = T(0);
    for (T v : x.data()) acc += v;
    const T inv = T(1) / static_cast<T>(x.numel());
    auto out = Tensor<T>::scalar(acc * inv);
    if (tape.wants({&x})) {
        auto* xi = x.storage();
        auto* yo = out.storage();
        tape.record({&x}, out, [xi, yo, inv] {
            if (!xi->requires_grad) return;
            const T g = yo->grad[0] * inv;
            for (auto& v : xi->grad) v += g;
        });
    }
    return out;
}

/// [N,C,H,W] -> [N,C,1,1] spatial mean.
template <typename T>
Tensor<T> global_avg_pool(Tape<T>& tape, const Tensor<T>& x) {
    detail::require_rank4(x.shape(), "global_avg_pool");
    const std::size_t planes = x.dim(0) * x.dim(1);
    const std::size_t plane = x.dim(2) * x.dim(3);
    const T inv = T(1) / static_cast<T>(plane);
    auto out = Tensor<T>::zeros(Shape{x.dim(0), x.dim(1), 1, 1});
    auto xs = x.data();
    auto ys = out.mutable_data();
    for (std::size_t p = 0; p < planes; ++p) {
        T acc = T(0);
        for (std::size_t i = 0; i < plane; ++i) acc += xs[p * plane + i];
        ys[p] = acc * inv;
    }
    if (tape.wants({&x})) {
        auto* xi = x.storage();
        auto* yo = out.storage();
        tape.record({&x}, out, [xi, yo, planes, plane, inv] {
            if (!xi->requires_grad) return;
            for (std::size_t p = 0; p < planes; ++p) {
                const T g = yo->grad[p] * inv;
                for (std::size_t i = 0; i < plane; ++i) xi->grad[p * plane + i] += g;
            }
        });
    }
    return out;
}

/// Per-(sample, channel) standardization followed by a per-channel gain and shift.
template <typename T>
Tensor<T> instance_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& shift,
                        T epsilon) {
    detail::require_rank4(x.shape(), "instance_norm");
    const std::size_t batch = x.dim(0);
    const std::size_t channels = x.dim(1);
    const std::size_t plane = x.dim(2) * x.dim(3);
    if (gain.shape() != Shape{channels} || shift.shape() != Shape{channels})
        throw ShapeError("instance_norm: gain " + gain.shape().str() + " / shift " + shift.shape().str() +
                         " must both be [" + std::to_string(channels) + "]");

    auto out = Tensor<T>::zeros(x.shape());
    std::vector<T> normalized(x.numel());
    std::vector<T> inv_std(batch * channels);
    auto xs = x.data();
    auto ys = out.mutable_data();
    const T inv_plane = T(1) / static_cast<T>(plane);
    for (std::size_t n = 0; n < batch; ++n) {
        for (std::size_t c = 0; c < channels; ++c) {
            const std::size_t base = (n * channels + c) * plane;
            T mu = T(0);
            for (std::size_t i = 0; i < plane; ++i) mu += xs[base + i];
            mu *= inv_plane;
            T var = T(0);
            for (std::size_t i = 0; i < plane; ++i) {
                const T d = xs[base + i] - mu;
                var += d * d;
            }
            var *= inv_plane;
            const T is = T(1) / std::sqrt(var + epsilon);
            inv_std[n * channels + c] = is;
            const T gv = gain[c];
            const T sv = shift[c];
            for (std::size_t i = 0; i < plane; ++i) {
                const T h = (xs[base + i] - mu) * is;
                normalized[base + i] = h;
                ys[base + i] = gv * h + sv;
            }
        }
    }

    if (tape.wants({&x, &gain, &shift})) {
        auto* xi = x.storage();
        auto* gi = gain.storage();
        auto* si = shift.storage();
        auto* yo = out.storage();
        tape.record({&x, &gain, &shift}, out,
                    [xi, gi, si, yo, batch, channels, plane, inv_plane, normalized = std::move(normalized),
                     inv_std = std::move(inv_std)] {
                        const auto& gy = yo->grad;
                        for (std::size_t n = 0; n < batch; ++n) {
                            for (std::size_t c = 0; c < channels; ++c) {
                                const std::size_t base = (n * channels + c) * plane;
                                T sum_g = T(0);
                                T sum_gh = T(0);
                                for (std::size_t i = 0; i < plane; ++i) {
                                    sum_g += gy[base + i];
                                    sum_gh += gy[base + i] * normalized[base + i];
                                }
                                if (gi->requires_grad) gi->grad[c] += sum_gh;
                                if (si->requires_grad) si->grad[c] += sum_g;
                                if (!xi->requires_grad) continue;
                                const T gv = gi->data[c];
                                const T is = inv_std[n * channels + c];
                                // dx = inv_std * (dh - mean(dh) - h * mean(dh * h)), dh = gain * dy
                                const T mean_dh = gv * sum_g * inv_plane;
                                const T mean_dhh = gv * sum_gh * inv_plane;
                                for (std::size_t i = 0; i < plane; ++i) {
                                    const T dh = gv * gy[base + i];
                                    xi->grad[base + i] += is * (dh - mean_dh - normalized[base + i] * mean_dhh);
                                }
                            }
                        }
                    });
    }
    return out;
}

/// Channel-wise concatenation; channels of `a` come first.
template <typename T>
Tensor<T> concat_channels(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_rank4(a.shape(), "concat_channels");
    detail::require_rank4(b.shape(), "concat_channels");
    if (a.dim(0) != b.dim(0) || a.dim(2) != b.dim(2) || a.dim(3) != b.dim(3))
        throw ShapeError("concat_channels: incompatible shapes " + a.shape().str() + " and " + b.shape().str());
    const std::size_t batch = a.dim(0);
    const std::size_t block_a = a.dim(1) * a.dim(2) * a.dim(3);
    const std::size_t block_b = b.dim(1) * b.dim(2) * b.dim(3);
    auto out = Tensor<T>::zeros(Shape{batch, a.dim(1) + b.dim(1), a.dim(2), a.dim(3)});
    auto ys = out.mutable_data();
    for (std::size_t n = 0; n < batch; ++n) {
        std::copy_n(a.data().begin() + n * block_a, block_a, ys.begin() + n * (block_a + block_b));
        std::copy_n(b.data().begin() + n * block_b, block_b, ys.begin() + n * (block_a + block_b) + block_a);
    }
    if (tape.wants({&a, &b})) {
        auto* ai = a.storage();
        auto* bi = b.storage();
        auto* yo = out.storage();
        tape.record({&a, &b}, out, [ai, bi, yo, batch, block_a, block_b] {
            for (std::size_t n = 0; n < batch; ++n) {
                const T* g = yo->grad.data() + n * (block_a + block_b);
                if (ai->requires_grad)
                    for (std::size_t i = 0; i < block_a; ++i) ai->grad[n * block_a + i] += g[i];
                if (bi->requires_grad)
                    for (std::size_t i = 0; i < block_b; ++i) bi->grad[n * block_b + i] += g[block_a + i];
            }
        });
    }
    return out;
}

/// Channels [begin, begin + count) of an NCHW tensor.
template <typename T>
Tensor<T> slice_channels(Tape<T>& tape, const Tensor<T>& x, std::size_t begin, std::size_t count) {
    detail::require_rank4(x.shape(), "slice_channels");
    if (count == 0 || begin + count > x.dim(1))
        throw ShapeError("slice_channels: range [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + x.shape().str());
    const std::size_t batch = x.dim(0);
    const std::size_t plane = x.dim(2) * x.dim(3);
    const std::size_t in_block = x.dim(1) * plane;
    const std::size_t out_block = count * plane;
    auto out = Tensor<T>::zeros(Shape{batch, count, x.dim(2), x.dim(3)});
    for (std::size_t n = 0; n < batch; ++n)
        std::copy_n(x.data().begin() + n * in_block + begin * plane, out_block,
                    out.mutable_data().begin() + n * out_block);
    if (tape.wants({&x})) {
        auto* xi = x.storage();
        auto* yo = out.storage();
        tape.record({&x}, out, [xi, yo, batch, plane, in_block, out_block, begin] {
            if (!xi->requires_grad) return;
            for (std::size_t n = 0; n < batch; ++n)
                for (std::size_t i = 0; i < out_block; ++i)
                    xi->grad[n * in_block + begin * plane + i] += yo->grad[n * out_block + i];
        });
    }
    return out;
}

}  // namespace ogan
