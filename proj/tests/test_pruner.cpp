#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "stc/pruner.hpp"
#include "stc/stream.hpp"

namespace stc {
namespace {

TEST(EstablishAnchors, ColdStartUsesSpatialAnchor) {
    std::mt19937_64 rng(1);
    const Matrix z = oracle::random_matrix(10, 6, rng);
    const auto a = establish_anchors(HistoryBuffer(8), z);
    EXPECT_EQ(a.temporal, a.spatial);
}

TEST(EstablishAnchors, ConstantTokensGiveThatVector) {
    Matrix z(5, 3);
    for (std::size_t r = 0; r < 5; ++r) z.row(r)[0] = 1.5f, z.row(r)[1] = -2.0f, z.row(r)[2] = 0.25f;
    const auto a = establish_anchors(HistoryBuffer(8), z);
    EXPECT_EQ(a.spatial, (std::vector<double>{1.5, -2.0, 0.25}));
}

TEST(EstablishAnchors, TemporalIsHistoryMean) {
    HistoryBuffer h(8);
    h.push({1.0, 2.0});
    h.push({3.0, -4.0});
    h.push({0.5, 0.5});
    const auto a = establish_anchors(h, Matrix{{1.0f, 1.0f}});
    EXPECT_NEAR(a.temporal[0], (1.0 + 3.0 + 0.5) / 3, 1e-6);
    EXPECT_NEAR(a.temporal[1], (2.0 - 4.0 + 0.5) / 3, 1e-6);
}

TEST(EstablishAnchors, EmptyTokensThrow) {
    EXPECT_THROW(establish_anchors(HistoryBuffer(2), Matrix(0, 4)), ArgumentError);
}

TEST(ScoreTokens, TokenOnBothAnchorsScoresZero) {
    const Matrix z{{1.0f, 2.0f, 3.0f}};
    const std::vector<double> a{1.0, 2.0, 3.0};
    EXPECT_NEAR(score_tokens(z, a, a, 0.3)[0], 0.0, 1e-12);
}

TEST(ScoreTokens, OrthogonalTokenScoresOne) {
    const Matrix z{{0.0f, 0.0f, 5.0f}};
    const std::vector<double> t{1.0, 0.0, 0.0}, s{0.0, 2.0, 0.0};
    for (double alpha : {0.0, 0.25, 0.5, 1.0}) EXPECT_NEAR(score_tokens(z, t, s, alpha)[0], 1.0, 1e-12);
}

TEST(ScoreTokens, WeightedSumOfDistances) {
    // cos to temporal = 0.6 (d = 0.4), cos to spatial = 0.8 (d = 0.2).
    const Matrix z{{1.0f, 0.0f}};
    const std::vector<double> t{0.6, 0.8}, s{0.8, 0.6};
    EXPECT_NEAR(score_tokens(z, t, s, 0.5)[0], 0.3, 1e-7);
}

TEST(ScoreTokens, BoundedByTwo) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix z = oracle::random_matrix(20, 5, rng);
        std::vector<double> t(5), s(5);
        std::normal_distribution<double> n;
        for (auto& v : t) v = n(rng);
        for (auto& v : s) v = n(rng);
        for (double v : score_tokens(z, t, s, 0.4)) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 2.0);
        }
    }
}

TEST(Prune, RetainsQuarter) {
    std::mt19937_64 rng(3);
    const Matrix z = oracle::random_matrix(100, 4, rng);
    std::vector<double> s(100);
    for (auto& v : s) v = std::uniform_real_distribution<double>()(rng);
    EXPECT_EQ(prune(z, s, 0.75).retained_indices.size(), 25u);
}

TEST(Prune, ZeroRatioKeepsEverythingInOrder) {
    std::mt19937_64 rng(4);
    const Matrix z = oracle::random_matrix(12, 4, rng);
    std::vector<double> s(12);
    for (auto& v : s) v = std::uniform_real_distribution<double>()(rng);
    const auto r = prune(z, s, 0.0);
    EXPECT_EQ(r.retained_indices, IndexSet::all(12));
    EXPECT_EQ(r.retained_tokens, z);
}

TEST(Prune, MatchesStableSortOracle) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng() % 256;
        const Matrix z = oracle::random_matrix(n, 4, rng);
        std::vector<double> s(n);
        for (auto& v : s) v = static_cast<double>(rng() % 11);
        const double ratio = std::uniform_real_distribution<double>(0.0, 0.99)(rng);
        const auto r = prune(z, s, ratio);
        EXPECT_EQ(r.retained_indices.values(), oracle::stable_top_k(s, kept_count(n, ratio), true));
        for (std::size_t i = 0; i < r.retained_indices.size(); ++i) {
            EXPECT_EQ(r.retained_tokens.row(i)[0], z(r.retained_indices[i], 0));
        }
    }
}

TEST(Prune, RejectsMismatchedScores) {
    EXPECT_THROW(prune(Matrix(3, 2), std::vector<double>(2), 0.5), ShapeError);
}

TEST(UpdateHistory, GrowsThenSlides) {
    HistoryBuffer h(8);
    update_history(h, std::vector<double>{1.0});
    EXPECT_EQ(h.size(), 1u);
    for (int i = 2; i <= 12; ++i) update_history(h, std::vector<double>{static_cast<double>(i)});
    ASSERT_EQ(h.size(), 8u);
    for (std::size_t i = 0; i < 8; ++i) EXPECT_EQ(h.entries()[i][0], 5.0 + static_cast<double>(i));
}

TEST(PrunerState, HistoryReplaysSpatialMeans) {
    StreamConfig sc;
    sc.num_frames = 12;
    sc.token_count = 32;
    sc.dim = 8;
    sc.redundancy = 0.5;
    const auto frames = generate_stream(sc).frames;
    PrunerState p(PrunerConfig{0.5, 0.5, 8});
    for (const auto& f : frames) p.process_frame(f);
    ASSERT_EQ(p.history().size(), 8u);
    for (std::size_t i = 0; i < 8; ++i) {
        const auto expected = column_mean(frames[4 + i]);
        for (std::size_t c = 0; c < 8; ++c) EXPECT_NEAR(p.history().entries()[i][c], expected[c], 1e-12);
    }
}

TEST(PrunerState, RepeatedFramesConverge) {
    std::mt19937_64 rng(6);
    const Matrix z = oracle::random_matrix(20, 6, rng);
    PrunerState p(PrunerConfig{0.5, 0.5, 4});
    p.process_frame(z);
    const auto second = p.process_frame(z).scores;
    for (int t = 0; t < 4; ++t) {
        const auto s = p.process_frame(z).scores;
        for (std::size_t i = 0; i < s.size(); ++i) EXPECT_NEAR(s[i], second[i], 1e-12);
    }
}

TEST(PrunerState, UniqueEventTokenRetained) {
    Matrix z(16, 4);
    for (std::size_t r = 0; r < 16; ++r) z.row(r)[0] = 1.0f;
    z(9, 0) = 0.0f;
    z(9, 3) = 1.0f;
    PrunerState p(PrunerConfig{15.0 / 16.0, 0.5, 8});
    const auto r = p.process_frame(z);
    EXPECT_EQ(r.retained_indices.values(), (std::vector<std::size_t>{9}));
}

TEST(PrunerState, ScoresMatchExhaustiveOracle) {
    StreamConfig sc;
    sc.num_frames = 10;
    sc.token_count = 48;
    sc.dim = 16;
    sc.redundancy = 0.6;
    sc.event_period = 3;
    const auto frames = generate_stream(sc).frames;
    PrunerState p(PrunerConfig{0.75, 0.5, 4});
    std::vector<std::vector<double>> history;
    for (const auto& f : frames) {
        const auto expected = oracle::pruner_scores(f, history, 0.5);
        const auto got = p.process_frame(f);
        for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(got.scores[i], expected[i], 1e-9);
        std::vector<double> mean(f.cols(), 0.0);
        for (std::size_t r = 0; r < f.rows(); ++r)
            for (std::size_t c = 0; c < f.cols(); ++c) mean[c] += f(r, c) / static_cast<double>(f.rows());
        history.push_back(mean);
        if (history.size() > 4) history.erase(history.begin());
    }
}

TEST(PrunerState, AlphaExtremesSelectSingleAnchor) {
    std::mt19937_64 rng(7);
    const Matrix z = oracle::random_matrix(20, 6, rng);
    HistoryBuffer h(4);
    h.push(std::vector<double>{1, 0, 0, 0, 0, 0});
    const auto a = establish_anchors(h, z);
    const auto only_t = score_tokens(z, a.temporal, a.spatial, 1.0);
    const auto only_s = score_tokens(z, a.temporal, a.spatial, 0.0);
    for (std::size_t j = 0; j < 20; ++j) {
        EXPECT_NEAR(only_t[j], 1.0 - cosine_similarity(z.row(j), std::span<const double>(a.temporal)), 1e-12);
        EXPECT_NEAR(only_s[j], 1.0 - cosine_similarity(z.row(j), std::span<const double>(a.spatial)), 1e-12);
    }
}

TEST(PrunerConfig, Validation) {
    EXPECT_THROW(PrunerState(PrunerConfig{1.0, 0.5, 8}), ConfigError);
    EXPECT_THROW(PrunerState(PrunerConfig{0.5, 1.5, 8}), ConfigError);
    EXPECT_THROW(PrunerState(PrunerConfig{0.5, 0.5, 0}), ConfigError);
}

TEST(PrefillCost, Quadratic) {
    EXPECT_EQ(prefill_cost_model(0), 0.0);
    EXPECT_EQ(prefill_cost_model(50) / prefill_cost_model(100), 0.25);
    EXPECT_EQ(prefill_cost_model(kept_count(256, 0.75)) / prefill_cost_model(256), 0.0625);
}

}  // namespace
}  // namespace stc
