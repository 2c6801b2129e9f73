#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "stc/vit.hpp"

namespace stc {
namespace {

EncoderConfig desk_config() {
    EncoderConfig c;
    c.num_layers = 6;
    c.token_count = 64;
    c.model_dim = 64;
    c.num_heads = 4;
    c.mlp_ratio = 4.0;
    c.seed = 17;
    return c;
}

TEST(InitEncoder, SameSeedSameWeights) {
    const auto a = init_encoder(desk_config());
    const auto b = init_encoder(desk_config());
    EXPECT_EQ(a.checksum(0), b.checksum(0));
}

TEST(InitEncoder, DifferentSeedDifferentWeights) {
    auto cfg = desk_config();
    const auto a = init_encoder(cfg);
    cfg.seed += 1;
    EXPECT_NE(a.checksum(0), init_encoder(cfg).checksum(0));
}

TEST(InitEncoder, HeadDimension) {
    EXPECT_EQ(desk_config().head_dim(), 16u);
}

TEST(InitEncoder, WeightsWithinFanInBound) {
    const auto enc = init_encoder(desk_config());
    const float bound_d = 1.0f / 8.0f;    // 1/sqrt(64)
    const float bound_h = 1.0f / 16.0f;   // 1/sqrt(256)
    for (const auto& w : enc.layers()) {
        for (float v : w.wq.data()) EXPECT_LE(std::abs(v), bound_d);
        for (float v : w.w2.data()) EXPECT_LE(std::abs(v), bound_h);
    }
}

TEST(InitEncoder, InvalidConfigsRejected) {
    auto c = desk_config();
    c.num_heads = 3;
    EXPECT_THROW(init_encoder(c), ConfigError);
    c = desk_config();
    c.num_layers = 0;
    EXPECT_THROW(init_encoder(c), ConfigError);
    c = desk_config();
    c.mlp_ratio = 0.0;
    EXPECT_THROW(init_encoder(c), ConfigError);
}

TEST(FullForward, ZeroProjectionsGiveIdentity) {
    auto enc = init_encoder(desk_config());
    for (auto& w : enc.mutable_layers()) {
        for (Matrix* m : {&w.wq, &w.wk, &w.wv, &w.wo, &w.w1, &w.w2}) {
            std::fill(m->data().begin(), m->data().end(), 0.0f);
        }
    }
    std::mt19937_64 rng(1);
    const Matrix x = oracle::random_matrix(64, 64, rng);
    EXPECT_EQ(full_forward(enc, x).output, x);
}

TEST(FullForward, TinyConfigMatchesDenseOracle) {
    EncoderConfig c;
    c.num_layers = 1;
    c.token_count = 5;
    c.model_dim = 8;
    c.num_heads = 1;
    c.mlp_ratio = 2.0;
    c.seed = 3;
    const auto enc = init_encoder(c);
    std::mt19937_64 rng(2);
    const Matrix x = oracle::random_matrix(5, 8, rng);
    const auto expected = oracle::forward(enc, x);
    const Matrix got = full_forward(enc, x).output;
    for (std::size_t r = 0; r < 5; ++r)
        for (std::size_t d = 0; d < 8; ++d) EXPECT_NEAR(got(r, d), expected[r][d], 1e-5);
}

TEST(FullForward, MultiHeadMultiLayerMatchesDenseOracle) {
    EncoderConfig c;
    c.num_layers = 2;
    c.token_count = 7;
    c.model_dim = 12;
    c.num_heads = 3;
    c.mlp_ratio = 1.5;
    c.seed = 4;
    const auto enc = init_encoder(c);
    std::mt19937_64 rng(5);
    const Matrix x = oracle::random_matrix(7, 12, rng);
    const auto expected = oracle::forward(enc, x);
    const Matrix got = full_forward(enc, x).output;
    for (std::size_t r = 0; r < 7; ++r)
        for (std::size_t d = 0; d < 12; ++d) EXPECT_NEAR(got(r, d), expected[r][d], 1e-5);
}

TEST(FullForward, OutputIsLastTraceAndDeterministic) {
    const auto enc = init_encoder(desk_config());
    std::mt19937_64 rng(6);
    const Matrix x = oracle::random_matrix(64, 64, rng);
    const auto a = full_forward(enc, x);
    const auto b = full_forward(enc, x);
    EXPECT_EQ(a.traces.size(), 6u);
    EXPECT_EQ(a.output, a.traces.back().block);
    EXPECT_EQ(a.output, b.output);
}

TEST(FullForward, TracesChain) {
    const auto enc = init_encoder(desk_config());
    std::mt19937_64 rng(7);
    const Matrix x = oracle::random_matrix(64, 64, rng);
    const auto res = full_forward(enc, x);
    for (std::size_t l = 0; l + 1 < res.traces.size(); ++l) {
        FlopCounter c;
        const auto next = forward_layer(enc.layers()[l + 1], enc.config(), res.traces[l].block, c);
        EXPECT_EQ(next.block, res.traces[l + 1].block);
    }
}

TEST(FullForward, ShapeMismatchThrows) {
    const auto enc = init_encoder(desk_config());
    EXPECT_THROW(full_forward(enc, Matrix(63, 64)), ShapeError);
}

TEST(FlopCount, LinearInLayers) {
    auto c = desk_config();
    const auto base = flop_count_full(c);
    c.num_layers *= 2;
    EXPECT_EQ(flop_count_full(c), 2 * base);
}

TEST(FlopCount, TokenScaling) {
    // Attention term 4·T²·D grows ×4, projection and MLP terms ×2.
    auto c = desk_config();
    c.num_layers = 1;
    const std::uint64_t t = 64, d = 64, h = 256;
    const std::uint64_t attention = 4 * t * t * d;
    const std::uint64_t linear = 8 * t * d * d + 4 * t * d * h;
    EXPECT_EQ(flop_count_full(c), attention + linear);
    c.token_count = 128;
    EXPECT_EQ(flop_count_full(c), 4 * attention + 2 * linear);
}

TEST(FlopCount, MatchesInstrumentedCounter) {
    for (auto cfg : {desk_config(), EncoderConfig{2, 10, 12, 3, 2.5, 1e-5, 1}, EncoderConfig{1, 1, 4, 1, 1.0, 1e-5, 2}}) {
        const auto enc = init_encoder(cfg);
        std::mt19937_64 rng(8);
        const Matrix x = oracle::random_matrix(cfg.token_count, cfg.model_dim, rng);
        EXPECT_EQ(full_forward(enc, x).flops, flop_count_full(cfg));
    }
}

}  // namespace
}  // namespace stc
