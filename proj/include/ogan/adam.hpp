#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "errors.hpp"
#include "params.hpp"

namespace ogan {

struct AdamHyperParams {
    double learning_rate = 2e-4;
    double beta1 = 0.5;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// Moment estimates for one parameter set.
template <typename T>
struct AdamState {
    AdamHyperParams hyper;
    std::uint64_t step_count = 0;
    std::vector<Tensor<T>> first_moment;
    std::vector<Tensor<T>> second_moment;

    AdamState() = default;

    AdamState(const ModelParams<T>& params, AdamHyperParams hp) : hyper(hp) {
        for (const auto& [name, p] : params) {
            first_moment.push_back(Tensor<T>::zeros(p.shape()));
            second_moment.push_back(Tensor<T>::zeros(p.shape()));
        }
    }
};

/// Bias-corrected Adam update from the parameters' grad slots.
/// Gradients are left in place; the caller zeroes them.
template <typename T>
void adam_step(ModelParams<T>& params, AdamState<T>& state) {
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size())
        throw ShapeError("adam_step: optimizer state tracks " + std::to_string(state.first_moment.size()) +
                         " tensors, parameter set has " + std::to_string(params.size()));
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& [name, p] = params[i];
        if (state.first_moment[i].shape() != p.shape() || state.second_moment[i].shape() != p.shape())
            throw ShapeError("adam_step: state for '" + name + "' has shape " + state.first_moment[i].shape().str() +
                             ", parameter is " + p.shape().str());
        if (!p.has_grad()) throw ArgumentError("adam_step: parameter '" + name + "' has no gradient");
    }

    ++state.step_count;
    const auto& h = state.hyper;
    const double t = static_cast<double>(state.step_count);
    const T b1 = static_cast<T>(h.beta1);
    const T b2 = static_cast<T>(h.beta2);
    const T correction1 = static_cast<T>(1.0 - std::pow(h.beta1, t));
    const T correction2 = static_cast<T>(1.0 - std::pow(h.beta2, t));
    const T lr = static_cast<T>(h.learning_rate);
    const T eps = static_cast<T>(h.epsilon);

    for (std::size_t i = 0; i < params.size(); ++i) {
        auto& p = params[i].second;
        auto values = p.mutable_data();
        auto g = p.grad();
        auto m = state.first_moment[i].mutable_data();
        auto v = state.second_moment[i].mutable_data();
        for (std::size_t j = 0; j < values.size(); ++j) {
            m[j] = b1 * m[j] + (T(1) - b1) * g[j];
            v[j] = b2 * v[j] + (T(1) - b2) * g[j] * g[j];
            const T m_hat = m[j] / correction1;
            const T v_hat = v[j] / correction2;
            values[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
        }
    }
}

}  // namespace ogan
