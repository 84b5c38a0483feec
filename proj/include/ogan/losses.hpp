#pragma once

#include <algorithm>
#include <cmath>

#include "errors.hpp"
#include "ops.hpp"

namespace ogan {

/// Probabilities are clamped to [kProbabilityFloor, 1 - kProbabilityFloor] before any log.
inline constexpr double kProbabilityFloor = 1e-7;

inline double clamp_probability(double p) {
    return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

/// log D(y,x) + log(1 - D(G(x),x)) on one sample: the min-max game value.
/// The discriminator maximizes it (supremum 0), the generator minimizes it.
inline double objective_value(double d_real, double d_fake) {
    return std::log(clamp_probability(d_real)) + std::log(1.0 - clamp_probability(d_fake));
}

/// Binary cross-entropy of the discriminator; equals -objective_value.
inline double discriminator_loss(double d_real, double d_fake) {
    return -objective_value(d_real, d_fake);
}

/// Non-saturating adversarial term plus weighted L1 reconstruction error.
inline double generator_loss(double d_fake, double mean_abs_error, double l1_weight) {
    return -std::log(clamp_probability(d_fake)) + l1_weight * mean_abs_error;
}

template <typename T>
Tensor<T> log_probability(Tape<T>& tape, const Tensor<T>& p) {
    const T lo = static_cast<T>(kProbabilityFloor);
    return log_clamped(tape, p, lo, T(1) - lo);
}

template <typename T>
Tensor<T> log_complement(Tape<T>& tape, const Tensor<T>& p) {
    return log_probability(tape, affine(tape, p, T(-1), T(1)));
}

/// -(mean log d_real + mean log(1 - d_fake)) over the batch.
template <typename T>
Tensor<T> discriminator_loss(Tape<T>& tape, const Tensor<T>& d_real, const Tensor<T>& d_fake) {
    auto real_term = mean(tape, log_probability(tape, d_real));
    auto fake_term = mean(tape, log_complement(tape, d_fake));
    return affine(tape, add(tape, real_term, fake_term), T(-1), T(0));
}

template <typename T>
struct GeneratorLossTerms {
    Tensor<T> total;
    Tensor<T> adversarial;
    Tensor<T> l1;
};

/// total = adversarial + l1_weight * mean|g_out - y|.
///
/// The adversarial term is -mean log d_fake by default. With `saturating`
/// it is the literal mean log(1 - d_fake), which the generator minimizes.
template <typename T>
GeneratorLossTerms<T> generator_loss(Tape<T>& tape, const Tensor<T>& d_fake, const Tensor<T>& g_out,
                                     const Tensor<T>& y, double l1_weight, bool saturating = false) {
    if (l1_weight < 0.0) throw ArgumentError("l1 weight must be non-negative");
    GeneratorLossTerms<T> terms;
    if (saturating)
        terms.adversarial = mean(tape, log_complement(tape, d_fake));
    else
        terms.adversarial = affine(tape, mean(tape, log_probability(tape, d_fake)), T(-1), T(0));
    terms.l1 = mean(tape, abs(tape, sub(tape, g_out, y)));
    terms.total = add(tape, terms.adversarial, affine(tape, terms.l1, static_cast<T>(l1_weight), T(0)));
    return terms;
}

}  // namespace ogan
