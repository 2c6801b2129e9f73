#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "stc/numerics.hpp"

namespace stc {

/// One frame's patch-token embeddings, T tokens × D dims.
using FrameTokens = Matrix;

struct EncoderConfig {
    std::size_t num_layers = 6;
    std::size_t token_count = 64;
    std::size_t model_dim = 64;
    std::size_t num_heads = 4;
    double mlp_ratio = 4.0;
    double ln_eps = 1e-5;
    std::uint64_t seed = 0;

    std::size_t head_dim() const noexcept { return model_dim / num_heads; }
    /// MLP hidden width, round(mlp_ratio · D).
    std::size_t hidden_dim() const noexcept;
    /// Throws ConfigError on a non-positive count, D not divisible by the
    /// head count, or a non-positive mlp_ratio / ln_eps.
    void validate() const;
};

/// Projection matrices are stored out × in so a projection is `matmul_transposed(x, w)`.
struct LayerWeights {
    std::vector<float> ln1_gamma, ln1_beta;
    std::vector<float> ln2_gamma, ln2_beta;
    Matrix wq, wk, wv, wo;  // D × D
    Matrix w1;              // H × D
    Matrix w2;              // D × H
};

/// Pre-norm ViT encoder. Immutable after construction except through
/// `mutable_layers()`, which exists so tests can install special weights.
class Encoder {
public:
    Encoder(EncoderConfig config, std::vector<LayerWeights> layers);

    const EncoderConfig& config() const noexcept { return config_; }
    std::span<const LayerWeights> layers() const noexcept { return layers_; }
    std::vector<LayerWeights>& mutable_layers() noexcept { return layers_; }

    /// FNV-1a over the bit patterns of every parameter of one layer.
    std::uint64_t checksum(std::size_t layer) const;

private:
    EncoderConfig config_;
    std::vector<LayerWeights> layers_;
};

/// Weights drawn from uniform(−1/√fan_in, 1/√fan_in) with a seeded
/// mt19937_64; LayerNorm starts at gamma = 1, beta = 0.
Encoder init_encoder(const EncoderConfig& config);

/// Per-layer activations recorded by a full pass. `attn` and `block` include
/// their residual connections.
struct LayerTrace {
    Matrix keys;
    Matrix values;
    Matrix attn;
    Matrix block;
};

struct ForwardResult {
    Matrix output;
    std::vector<LayerTrace> traces;
    std::uint64_t flops = 0;
};

ForwardResult full_forward(const Encoder& encoder, const FrameTokens& frame);

/// Closed-form FLOPs of `full_forward` (multiply-add = 2 FLOPs, matmuls only):
/// per layer 8·T·D² + 4·T²·D + 4·T·D·H.
std::uint64_t flop_count_full(const EncoderConfig& config);

// Layer building blocks shared by the full and the selective paths. Each
// output row depends only on the matching input row(s), so computing a
// subset of rows gives bit-identical values to the full computation.

Matrix pre_attention_norm(const LayerWeights& w, const EncoderConfig& config, const Matrix& x);
Matrix pre_mlp_norm(const LayerWeights& w, const EncoderConfig& config, const Matrix& x);

/// Multi-head scaled dot-product attention for an arbitrary subset of query
/// rows against full key/value matrices. Heads are contiguous column slices.
Matrix attend(const Matrix& queries, const Matrix& keys, const Matrix& values, std::size_t num_heads,
              FlopCounter& counter);

/// GELU MLP on already-normalized rows (without residual).
Matrix mlp(const LayerWeights& w, const Matrix& normed, FlopCounter& counter);

/// x + delta, row by row.
Matrix add_residual(const Matrix& x, const Matrix& delta);

/// One full encoder block on `x`.
LayerTrace forward_layer(const LayerWeights& w, const EncoderConfig& config, const Matrix& x, FlopCounter& counter);

}  // namespace stc
