#include <gtest/gtest.h>

#include <cmath>

#include "ogan/ogan.hpp"
#include "oracles.hpp"

using namespace ogan;
using T64 = Tensor<double>;

namespace {

std::vector<double> random_values(Rng& rng, std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double inner(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

struct ConvCase {
    std::size_t n, cin, cout, h, w, kh, kw, stride, pad;
};

ConvCase random_case(Rng& rng) {
    ConvCase c;
    c.n = rng.between(1, 2);
    c.cin = rng.between(1, 3);
    c.cout = rng.between(1, 3);
    c.kh = rng.between(1, 4);
    c.kw = rng.between(1, 4);
    c.stride = rng.between(1, 3);
    c.pad = rng.between(0, std::min(c.kh, c.kw) - 1);
    c.h = rng.between(std::max<std::int64_t>(1, static_cast<std::int64_t>(c.kh) - 2 * c.pad), 7);
    c.w = rng.between(std::max<std::int64_t>(1, static_cast<std::int64_t>(c.kw) - 2 * c.pad), 7);
    return c;
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
    Rng rng(1);
    auto x = T64::from(Shape{1, 1, 4, 4}, random_values(rng, 16));
    std::vector<double> k(9, 0.0);
    k[4] = 1.0;
    auto tape = Tape<double>::inference();
    auto y = conv2d(tape, x, T64::from(Shape{1, 1, 3, 3}, k), T64::zeros(Shape{1}), 1, 1);
    ASSERT_EQ(y.shape(), x.shape());
    for (std::size_t i = 0; i < 16; ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv2d, OutputShapeFormula) {
    auto tape = Tape<double>::inference();
    auto y = conv2d(tape, T64::zeros(Shape{1, 1, 4, 4}), T64::zeros(Shape{1, 1, 3, 3}), T64{}, 2, 1);
    EXPECT_EQ(y.shape(), Shape({1, 1, 2, 2}));
}

TEST(Conv2d, MatchesBruteForceOnSpecExample) {
    Rng rng(21);
    const auto xv = random_values(rng, 1 * 2 * 5 * 5);
    const auto kv = random_values(rng, 3 * 2 * 3 * 3);
    const auto bv = random_values(rng, 3);
    auto tape = Tape<double>::inference();
    auto y = conv2d(tape, T64::from(Shape{1, 2, 5, 5}, xv), T64::from(Shape{3, 2, 3, 3}, kv),
                    T64::from(Shape{3}, bv), 1, 0);
    oracle::Dims od;
    const auto ref = oracle::conv2d(xv, {1, 2, 5, 5}, kv, 3, 3, 3, bv, 1, 0, od);
    ASSERT_EQ(y.shape(), Shape({od.n, od.c, od.h, od.w}));
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_LE(oracle::relative_error(y[i], ref[i]), 1e-6);
}

TEST(Conv2d, ShapeErrorsNameBothShapes) {
    auto tape = Tape<double>::inference();
    try {
        conv2d(tape, T64::zeros(Shape{1, 2, 4, 4}), T64::zeros(Shape{1, 3, 3, 3}), T64{}, 1, 0);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[1x2x4x4]"), std::string::npos);
        EXPECT_NE(msg.find("[1x3x3x3]"), std::string::npos);
    }
    EXPECT_THROW(conv2d(tape, T64::zeros(Shape{1, 1, 2, 2}), T64::zeros(Shape{1, 1, 5, 5}), T64{}, 1, 1), ShapeError);
    EXPECT_THROW(conv2d(tape, T64::zeros(Shape{1, 1, 4, 4}), T64::zeros(Shape{2, 1, 3, 3}), T64::zeros(Shape{3}), 1, 1),
                 ShapeError);
}

TEST(ConvTranspose2d, OutputShapeFormula) {
    auto tape = Tape<double>::inference();
    auto y = conv_transpose2d(tape, T64::zeros(Shape{1, 1, 2, 2}), T64::zeros(Shape{1, 1, 2, 2}), T64{}, 2, 0);
    EXPECT_EQ(y.shape(), Shape({1, 1, 4, 4}));
    auto z = conv_transpose2d(tape, T64::zeros(Shape{1, 4, 8, 8}), T64::zeros(Shape{4, 2, 4, 4}), T64{}, 2, 1);
    EXPECT_EQ(z.shape(), Shape({1, 2, 16, 16}));
}

TEST(ConvTranspose2d, ZeroInputGivesBias) {
    Rng rng(3);
    auto k = T64::from(Shape{2, 3, 3, 3}, random_values(rng, 54));
    auto b = T64::from(Shape{3}, {0.5, -1.25, 2.0});
    auto tape = Tape<double>::inference();
    auto y = conv_transpose2d(tape, T64::zeros(Shape{1, 2, 3, 3}), k, b, 2, 1);
    const std::size_t plane = y.dim(2) * y.dim(3);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i) EXPECT_EQ(y[c * plane + i], b[c]);
}

TEST(ConvTranspose2d, RejectsChannelMismatch) {
    auto tape = Tape<double>::inference();
    EXPECT_THROW(conv_transpose2d(tape, T64::zeros(Shape{1, 2, 3, 3}), T64::zeros(Shape{3, 1, 2, 2}), T64{}, 2, 0),
                 ShapeError);
}

// Both kernels against their oracles, and the adjoint identity
// sum(conv2d(a, k) * b) == sum(a * conv_transpose2d(b, k)), on 50 random configurations.
TEST(ConvOracles, FiftyRandomConfigurations) {
    Rng rng(2024);
    for (int trial = 0; trial < 50; ++trial) {
        const auto c = random_case(rng);
        SCOPED_TRACE("trial " + std::to_string(trial));
        const auto av = random_values(rng, c.n * c.cin * c.h * c.w);
        const auto kv = random_values(rng, c.cout * c.cin * c.kh * c.kw);
        const auto biasv = random_values(rng, c.cout);
        auto tape = Tape<double>::inference();
        const auto a = T64::from(Shape{c.n, c.cin, c.h, c.w}, av);
        const auto k = T64::from(Shape{c.cout, c.cin, c.kh, c.kw}, kv);

        auto y = conv2d(tape, a, k, T64::from(Shape{c.cout}, biasv), c.stride, c.pad);
        oracle::Dims od;
        const auto ref = oracle::conv2d(av, {c.n, c.cin, c.h, c.w}, kv, c.cout, c.kh, c.kw, biasv, c.stride, c.pad, od);
        ASSERT_EQ(y.shape(), Shape({od.n, od.c, od.h, od.w}));
        for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_LE(oracle::relative_error(y[i], ref[i]), 1e-6);

        // Transposed conv: the same kernel read as [Cin', Cout'] = [cout, cin].
        if ((od.h - 1) * c.stride + c.kh <= 2 * c.pad || (od.w - 1) * c.stride + c.kw <= 2 * c.pad) continue;
        const auto bv = random_values(rng, od.size());
        const auto b = T64::from(Shape{od.n, od.c, od.h, od.w}, bv);
        auto t = conv_transpose2d(tape, b, k, T64{}, c.stride, c.pad);
        oracle::Dims td;
        const auto tref =
            oracle::conv_transpose2d(bv, {od.n, od.c, od.h, od.w}, kv, c.cin, c.kh, c.kw, {}, c.stride, c.pad, td);
        ASSERT_EQ(t.shape(), Shape({td.n, td.c, td.h, td.w}));
        for (std::size_t i = 0; i < tref.size(); ++i) ASSERT_LE(oracle::relative_error(t[i], tref[i]), 1e-6);

        // The adjoint needs the transposed output to cover the input extent,
        // which holds when (h + 2p - k) is a multiple of the stride.
        if (t.shape() == a.shape()) {
            auto y0 = conv2d(tape, a, k, T64{}, c.stride, c.pad);
            const double lhs = inner(y0.data(), b.data());
            const double rhs = inner(a.data(), t.data());
            EXPECT_LE(oracle::relative_error(lhs, rhs), 1e-6);
        }
    }
}

TEST(ConvOracles, AdjointIdentityOnFiftyAlignedConfigurations) {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        auto c = random_case(rng);
        // Extents for which the transposed conv reproduces the input extent.
        c.pad = rng.between(0, (std::min(c.kh, c.kw) - 1) / 2);
        c.h = (rng.between(1, 4) - 1) * c.stride + c.kh - 2 * c.pad;
        c.w = (rng.between(1, 4) - 1) * c.stride + c.kw - 2 * c.pad;
        SCOPED_TRACE("trial " + std::to_string(trial));
        const auto a = T64::from(Shape{c.n, c.cin, c.h, c.w}, random_values(rng, c.n * c.cin * c.h * c.w));
        const auto k = T64::from(Shape{c.cout, c.cin, c.kh, c.kw}, random_values(rng, c.cout * c.cin * c.kh * c.kw));
        auto tape = Tape<double>::inference();
        auto y = conv2d(tape, a, k, T64{}, c.stride, c.pad);
        const auto b = T64::from(y.shape(), random_values(rng, y.numel()));
        auto t = conv_transpose2d(tape, b, k, T64{}, c.stride, c.pad);
        ASSERT_EQ(t.shape(), a.shape());
        EXPECT_LE(oracle::relative_error(inner(y.data(), b.data()), inner(a.data(), t.data())), 1e-6);
    }
}

TEST(Conv2d, BackwardMatchesFiniteDifferences) {
    Rng rng(5);
    auto x = T64::from(Shape{1, 2, 5, 5}, random_values(rng, 50), true);
    auto k = T64::from(Shape{2, 2, 3, 3}, random_values(rng, 36), true);
    const auto w = random_values(rng, 2 * 3 * 3);
    auto weighted = [&](const T64& y) {
        double s = 0.0;
        for (std::size_t i = 0; i < y.numel(); ++i) s += w[i] * y[i];
        return s;
    };
    Tape<double> tape;
    auto y = conv2d(tape, x, k, T64{}, 2, 1);
    auto loss = sum(tape, mul(tape, y, T64::from(y.shape(), w)));
    backward(loss, tape);
    auto f = [&](const std::vector<double>& kv) {
        auto tt = Tape<double>::inference();
        return weighted(conv2d(tt, x.detach(), T64::from(k.shape(), kv), T64{}, 2, 1));
    };
    const std::vector<double> kv(k.data().begin(), k.data().end());
    for (std::size_t i = 0; i < kv.size(); ++i)
        EXPECT_LE(oracle::relative_error(k.grad()[i], oracle::central_difference(f, kv, i)), 1e-7);
}
