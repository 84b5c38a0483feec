#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "ogan/ogan.hpp"

using namespace ogan;
using TF = Tensor<float>;
using T64 = Tensor<double>;

namespace {

T64 random_image(Rng& rng, std::size_t size) {
    std::vector<double> v(3 * size * size);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return T64::from(Shape{1, 3, size, size}, std::move(v));
}

T64 random_mask(Rng& rng, std::size_t size) {
    std::vector<double> v(size * size);
    for (auto& x : v) x = rng.uniform() < 0.3 ? 1.0 : 0.0;
    v[0] = 1.0;
    return T64::from(Shape{1, 1, size, size}, std::move(v));
}

EvalReport report_of(const std::vector<double>& l1) {
    EvalReport r;
    for (std::size_t i = 0; i < l1.size(); ++i) r.rows.push_back({pair_id(i), l1[i], l1[i] * l1[i], l1[i] / 2, 1.0});
    return r;
}

}  // namespace

TEST(MaskedL1, IdentityAndConstantOffset) {
    Rng rng(1);
    const auto a = random_image(rng, 4);
    const auto m = random_mask(rng, 4);
    EXPECT_EQ(masked_l1(a, a, m), 0.0);
    std::vector<double> shifted(a.data().begin(), a.data().end());
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < 16; ++i)
            if (m[i] != 0.0) shifted[c * 16 + i] += 0.5;
    EXPECT_NEAR(masked_l1(T64::from(a.shape(), shifted), a, m), 0.5, 1e-12);
}

TEST(MaskedL1, MatchesDirectLoop) {
    Rng rng(2);
    const auto a = random_image(rng, 4);
    const auto b = random_image(rng, 4);
    const auto m = random_mask(rng, 4);
    double s = 0.0;
    int n = 0;
    for (std::size_t y = 0; y < 4; ++y)
        for (std::size_t x = 0; x < 4; ++x) {
            if (m[y * 4 + x] == 0.0) continue;
            for (std::size_t c = 0; c < 3; ++c) {
                const std::size_t k = c * 16 + y * 4 + x;
                s += std::abs(a[k] - b[k]);
                ++n;
            }
        }
    EXPECT_NEAR(masked_l1(a, b, m), s / n, 1e-12);
}

TEST(MaskedL1, RejectsEmptyMaskAndMisalignment) {
    Rng rng(3);
    const auto a = random_image(rng, 4);
    EXPECT_THROW(masked_l1(a, a, T64::zeros(Shape{1, 1, 4, 4})), ArgumentError);
    EXPECT_THROW(masked_l1(a, random_image(rng, 8), random_mask(rng, 4)), ShapeError);
    EXPECT_THROW(masked_l1(a, a, random_mask(rng, 8)), ShapeError);
}

TEST(MaskedL1, MetricProperties) {
    Rng rng(4);
    for (int i = 0; i < 100; ++i) {
        const auto a = random_image(rng, 4), b = random_image(rng, 4), c = random_image(rng, 4);
        const auto m = random_mask(rng, 4);
        EXPECT_EQ(masked_l1(a, b, m), masked_l1(b, a, m));
        EXPECT_LE(masked_l1(a, c, m), masked_l1(a, b, m) + masked_l1(b, c, m) + 1e-12);
        EXPECT_GE(masked_l2(a, b, m), 0.0);
    }
}

TEST(MaskedL1, FullFrameNotAboveMaskedWhenOutsideAgrees) {
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        const auto truth = random_image(rng, 4);
        const auto m = random_mask(rng, 4);
        std::vector<double> v(truth.data().begin(), truth.data().end());
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t k = 0; k < 16; ++k)
                if (m[k] != 0.0) v[c * 16 + k] = rng.uniform(-1.0, 1.0);
        const auto recon = T64::from(truth.shape(), v);
        EXPECT_LE(full_frame_l1(recon, truth), masked_l1(recon, truth, m));
    }
}

TEST(IdentityBaseline, ConstantCases) {
    const auto truth_gray = T64::zeros(Shape{1, 3, 2, 2});
    const auto mask = T64::from(Shape{1, 1, 2, 2}, {1, 0, 0, 1});
    EXPECT_EQ(identity_baseline(truth_gray, truth_gray, mask), 0.0);
    const auto truth_white = T64::filled(Shape{1, 3, 2, 2}, 1.0);
    EXPECT_EQ(identity_baseline(truth_gray, truth_white, mask), 1.0);
}

TEST(ErrorRate, ConstructedTwentyPairReport) {
    std::vector<double> l1(20, 0.1);
    for (int i : {0, 4, 9, 13, 19}) l1[static_cast<std::size_t>(i)] = 0.4;
    EXPECT_EQ(error_rate(report_of(l1), 0.25), 0.25);
    EXPECT_EQ(error_rate(report_of(std::vector<double>(20, 0.1)), 0.25), 0.0);
}

TEST(ErrorRate, TiesCountAsCorrect) {
    EXPECT_EQ(error_rate(report_of({0.25, 0.25, 0.3, 0.2}), 0.25), 0.25);
}

TEST(ErrorRate, MonotoneUnderThresholdSweep) {
    Rng rng(6);
    std::vector<double> l1(50);
    for (auto& v : l1) v = rng.uniform(0.0, 1.0);
    const auto r = report_of(l1);
    double prev = 1.0;
    for (double t = 0.001; t <= 1.2; t += 0.01) {
        const double e = error_rate(r, t);
        EXPECT_LE(e, prev);
        EXPECT_GE(e, 0.0);
        prev = e;
    }
    EXPECT_EQ(prev, 0.0);
}

TEST(ErrorRate, RejectsBadInput) {
    EXPECT_THROW(error_rate(EvalReport{}, 0.25), ArgumentError);
    EXPECT_THROW(error_rate(report_of({0.1}), 0.0), ArgumentError);
}

TEST(EvalReport, AggregatesAndTsv) {
    const auto r = report_of({0.1, 0.4, 0.2, 0.3});
    EXPECT_NEAR(r.mean_masked_l1(), 0.25, 1e-12);
    EXPECT_NEAR(r.median_masked_l1(), 0.25, 1e-12);
    const auto tsv = r.to_tsv();
    EXPECT_EQ(tsv.substr(0, tsv.find('\n')), "pair_id\tmasked_l1\tmasked_l2\tfull_l1\tbaseline_masked_l1");
    EXPECT_EQ(std::count(tsv.begin(), tsv.end(), '\n'), 5);
}

TEST(Evaluate, OracleGeneratorScoresZeroBaselineScoresAll) {
    // The default threshold separates the two endpoints on the default corpus.
    const auto pairs = make_pairs(100, 0, SceneParams{}, OcclusionConfig{});
    std::map<std::string, TF> truth;
    for (const auto& p : pairs) truth.emplace(p.id, image_to_tensor<float>(p.pair.y));
    std::size_t next = 0;
    const auto oracle = evaluate(pairs, [&](const TF&) { return truth.at(pairs[next++].id); });
    ASSERT_EQ(oracle.rows.size(), 100u);
    for (const auto& row : oracle.rows) EXPECT_EQ(row.masked_l1, 0.0);
    EXPECT_EQ(error_rate(oracle, kDefaultErrorThreshold), 0.0);

    const auto identity = evaluate(pairs, [](const TF& x) { return x; });
    for (const auto& row : identity.rows) {
        EXPECT_EQ(row.masked_l1, row.baseline_l1);
        EXPECT_GT(row.masked_l1, kDefaultErrorThreshold) << row.id;
    }
    EXPECT_EQ(error_rate(identity, kDefaultErrorThreshold), 1.0);
}

TEST(Evaluate, DeterministicWithGrids) {
    SceneParams sp;
    sp.size = 32;
    const auto pairs = make_pairs(3, 5, sp, {});
    const auto gen = build_unet<float>(UNetSpec{}, 1);
    const auto dir = std::filesystem::temp_directory_path() / "ogan_test_grids";
    std::filesystem::remove_all(dir);
    const auto recon = [&](const TF& x) { return reconstruct(gen, x); };
    const auto a = evaluate(pairs, recon, dir);
    const auto b = evaluate(pairs, recon);
    EXPECT_EQ(a, b);
    const auto grid = load_image(dir / "pair_0000_grid.ppm");
    EXPECT_EQ(grid.width, 96u);
    EXPECT_EQ(grid.height, 32u);
    for (std::size_t y = 0; y < 32; ++y)
        for (std::size_t x = 0; x < 32; ++x) {
            EXPECT_EQ(grid.at(x, y, 0), pairs[0].pair.x.at(x, y, 0));
            EXPECT_EQ(grid.at(x + 64, y, 1), pairs[0].pair.y.at(x, y, 1));
        }
    std::filesystem::remove_all(dir);
}

TEST(Reconstruct, DeterministicAndShapePreserving) {
    const auto gen = build_unet<float>(UNetSpec{}, 2);
    Rng rng(1);
    std::vector<float> v(3 * 32 * 32);
    for (auto& e : v) e = static_cast<float>(rng.uniform(-1.0, 1.0));
    const auto x = TF::from(Shape{1, 3, 32, 32}, v);
    const auto a = reconstruct(gen, x);
    const auto b = reconstruct(gen, x);
    EXPECT_EQ(a.shape(), x.shape());
    for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_EQ(a[i], b[i]);
    EXPECT_THROW(reconstruct(gen, TF::zeros(Shape{1, 3, 20, 20})), ShapeError);
}

TEST(Composite, FormulaAndExtremes) {
    const auto input = TF::filled(Shape{1, 1, 1, 2}, 0.2f);
    const auto recon = TF::filled(Shape{1, 1, 1, 2}, 0.6f);
    const auto mask = TF::from(Shape{1, 1, 1, 2}, {1.f, 0.f});
    const auto half = composite_overlay(input, recon, mask, 0.5);
    EXPECT_NEAR(half[0], 0.4f, 1e-7);
    EXPECT_EQ(half[1], 0.2f);
    const auto zero = composite_overlay(input, recon, mask, 0.0);
    EXPECT_EQ(zero[0], 0.2f);
    EXPECT_EQ(zero[1], 0.2f);
    const auto one = composite_overlay(input, recon, mask, 1.0);
    EXPECT_EQ(one[0], 0.6f);
    EXPECT_EQ(one[1], 0.2f);
    const auto full = composite_overlay(input, recon, mask, 1.0, BlendRegion::full_frame);
    EXPECT_EQ(full[1], 0.6f);
    EXPECT_THROW(composite_overlay(input, recon, mask, 1.5), ArgumentError);
    EXPECT_THROW(composite_overlay(input, TF::zeros(Shape{1, 1, 2, 2}), mask, 0.5), ShapeError);
}

TEST(Composite, ByteDomainProperties) {
    const auto pairs = make_pairs(5, 3, SceneParams{}, {});
    Rng rng(8);
    for (const auto& p : pairs) {
        Image recon = p.pair.y;
        for (auto& v : recon.pixels) v = static_cast<std::uint8_t>(rng.below(256));
        EXPECT_EQ(composite_overlay(p.pair.x, recon, p.pair.mask, 0.0), p.pair.x);
        const auto once = composite_overlay(p.pair.x, recon, p.pair.mask, 1.0);
        EXPECT_EQ(composite_overlay(once, recon, p.pair.mask, 1.0), once);
        for (double alpha : {0.0, 0.3, 0.5, 1.0}) {
            const auto c = composite_overlay(p.pair.x, recon, p.pair.mask, alpha);
            for (std::size_t i = 0; i < c.area(); ++i)
                for (std::size_t ch = 0; ch < 3; ++ch) {
                    const std::size_t k = i * 3 + ch;
                    if (!p.pair.mask.pixels[i]) ASSERT_EQ(c.pixels[k], p.pair.x.pixels[k]);
                    else if (alpha == 1.0) ASSERT_EQ(c.pixels[k], recon.pixels[k]);
                }
        }
    }
}

TEST(Latency, OrderStatistics) {
    const auto one = summarize_latency({3.5});
    EXPECT_EQ(one.median_ms, 3.5);
    EXPECT_EQ(one.p95_ms, 3.5);
    std::vector<double> v;
    for (int i = 20; i >= 1; --i) v.push_back(i);
    const auto s = summarize_latency(v);
    EXPECT_EQ(s.median_ms, 10.5);
    EXPECT_EQ(s.p95_ms, 19.0);
    Rng rng(1);
    for (int t = 0; t < 50; ++t) {
        std::vector<double> w(1 + rng.below(40));
        for (auto& x : w) x = rng.uniform(0.0, 10.0);
        const auto r = summarize_latency(w);
        EXPECT_LE(r.median_ms, r.p95_ms);
    }
    EXPECT_THROW(summarize_latency({}), ArgumentError);
}

TEST(Latency, MeasuresEveryStage) {
    UNetSpec spec;
    const auto gen = build_unet<float>(spec, 0);
    const auto x = TF::zeros(Shape{1, 3, 16, 16});
    const auto m = TF::filled(Shape{1, 1, 16, 16}, 1.f);
    const auto s = measure_latency(gen, x, m, 3);
    EXPECT_EQ(s.repetitions, 3u);
    EXPECT_GT(s.forward.median_ms, 0.0);
    EXPECT_LE(s.total.median_ms, s.total.p95_ms);
    const auto text = s.to_text();
    EXPECT_EQ(text.substr(0, 8), "forward\t");
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
    EXPECT_THROW(measure_latency(gen, x, m, 0), ArgumentError);
}
