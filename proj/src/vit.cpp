#include "stc/vit.hpp"

#include <bit>
#include <cmath>
#include <random>
#include <string>

namespace stc {

std::size_t EncoderConfig::hidden_dim() const noexcept {
    return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(model_dim)));
}

void EncoderConfig::validate() const {
    if (num_layers == 0 || token_count == 0 || model_dim == 0 || num_heads == 0) {
        throw ConfigError("encoder: num_layers, token_count, model_dim and num_heads must all be >= 1");
    }
    if (model_dim % num_heads != 0) {
        throw ConfigError("encoder: model_dim " + std::to_string(model_dim) + " is not divisible by num_heads " +
                          std::to_string(num_heads));
    }
    if (!(mlp_ratio > 0.0) || hidden_dim() == 0) {
        throw ConfigError("encoder: mlp_ratio must give a hidden width >= 1");
    }
    if (!(ln_eps > 0.0)) {
        throw ConfigError("encoder: ln_eps must be positive");
    }
}

Encoder::Encoder(EncoderConfig config, std::vector<LayerWeights> layers)
    : config_(config), layers_(std::move(layers)) {
    config_.validate();
    if (layers_.size() != config_.num_layers) {
        throw ConfigError("encoder: expected " + std::to_string(config_.num_layers) + " layers, got " +
                          std::to_string(layers_.size()));
    }
}

std::uint64_t Encoder::checksum(std::size_t layer) const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::span<const float> values) {
        for (float v : values) {
            h ^= std::bit_cast<std::uint32_t>(v);
            h *= 0x100000001b3ULL;
        }
    };
    const auto& w = layers_.at(layer);
    mix(w.ln1_gamma);
    mix(w.ln1_beta);
    mix(w.ln2_gamma);
    mix(w.ln2_beta);
    for (const Matrix* m : {&w.wq, &w.wk, &w.wv, &w.wo, &w.w1, &w.w2}) {
        mix(m->data());
    }
    return h;
}

namespace {

Matrix uniform_matrix(std::size_t out, std::size_t in, std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix m(out, in);
    for (float& v : m.data()) {
        v = static_cast<float>(dist(rng));
    }
    return m;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

}  // namespace

Encoder init_encoder(const EncoderConfig& config) {
    config.validate();
    const std::size_t d = config.model_dim;
    const std::size_t h = config.hidden_dim();
    std::mt19937_64 rng(config.seed);
    std::vector<LayerWeights> layers;
    layers.reserve(config.num_layers);
    for (std::size_t l = 0; l < config.num_layers; ++l) {
        LayerWeights w;
        w.ln1_gamma.assign(d, 1.0f);
        w.ln1_beta.assign(d, 0.0f);
        w.ln2_gamma.assign(d, 1.0f);
        w.ln2_beta.assign(d, 0.0f);
        w.wq = uniform_matrix(d, d, rng);
        w.wk = uniform_matrix(d, d, rng);
        w.wv = uniform_matrix(d, d, rng);
        w.wo = uniform_matrix(d, d, rng);
        w.w1 = uniform_matrix(h, d, rng);
        w.w2 = uniform_matrix(d, h, rng);
        layers.push_back(std::move(w));
    }
    return Encoder(config, std::move(layers));
}

Matrix pre_attention_norm(const LayerWeights& w, const EncoderConfig& config, const Matrix& x) {
    return layer_norm(x, w.ln1_gamma, w.ln1_beta, config.ln_eps);
}

Matrix pre_mlp_norm(const LayerWeights& w, const EncoderConfig& config, const Matrix& x) {
    return layer_norm(x, w.ln2_gamma, w.ln2_beta, config.ln_eps);
}

Matrix attend(const Matrix& queries, const Matrix& keys, const Matrix& values, std::size_t num_heads,
              FlopCounter& counter) {
    if (keys.rows() != values.rows() || keys.cols() != values.cols() || queries.cols() != keys.cols()) {
        throw ShapeError("attend: query/key/value shapes are inconsistent");
    }
    const std::size_t d = keys.cols();
    const std::size_t tokens = keys.rows();
    if (num_heads == 0 || d % num_heads != 0) {
        throw ShapeError("attend: model dim not divisible by head count");
    }
    const std::size_t hd = d / num_heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    Matrix out(queries.rows(), d);
    Matrix head_keys(tokens, hd);
    Matrix head_values_t(hd, tokens);
    std::vector<double> probs(tokens);
    for (std::size_t h = 0; h < num_heads; ++h) {
        const std::size_t off = h * hd;
        for (std::size_t j = 0; j < tokens; ++j) {
            for (std::size_t c = 0; c < hd; ++c) {
                head_keys(j, c) = keys(j, off + c);
                head_values_t(c, j) = values(j, off + c);
            }
        }
        for (std::size_t i = 0; i < queries.rows(); ++i) {
            const auto q = queries.row(i).subspan(off, hd);
            double mx = -INFINITY;
            for (std::size_t j = 0; j < tokens; ++j) {
                probs[j] = dot(q, head_keys.row(j)) * scale;
                mx = std::max(mx, probs[j]);
            }
            double sum = 0.0;
            for (double& p : probs) {
                p = std::exp(p - mx);
                sum += p;
            }
            for (double& p : probs) {
                p /= sum;
            }
            for (std::size_t c = 0; c < hd; ++c) {
                out(i, off + c) = static_cast<float>(dot(std::span<const double>(probs), head_values_t.row(c)));
            }
        }
    }
    // Scores and weighted sum: two T·D multiply-adds per query row.
    counter.add_macs(2ULL * queries.rows() * tokens * d);
    return out;
}

Matrix mlp(const LayerWeights& w, const Matrix& normed, FlopCounter& counter) {
    Matrix hidden = matmul_transposed(normed, w.w1, &counter);
    for (float& v : hidden.data()) {
        v = static_cast<float>(gelu(v));
    }
    return matmul_transposed(hidden, w.w2, &counter);
}

Matrix add_residual(const Matrix& x, const Matrix& delta) {
    if (x.rows() != delta.rows() || x.cols() != delta.cols()) {
        throw ShapeError("add_residual: shape mismatch");
    }
    Matrix out = x;
    auto dst = out.data();
    const auto src = delta.data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        dst[i] += src[i];
    }
    return out;
}

LayerTrace forward_layer(const LayerWeights& w, const EncoderConfig& config, const Matrix& x, FlopCounter& counter) {
    const Matrix normed = pre_attention_norm(w, config, x);
    LayerTrace t;
    t.keys = matmul_transposed(normed, w.wk, &counter);
    const Matrix queries = matmul_transposed(normed, w.wq, &counter);
    t.values = matmul_transposed(normed, w.wv, &counter);
    const Matrix mixed = attend(queries, t.keys, t.values, config.num_heads, counter);
    t.attn = add_residual(x, matmul_transposed(mixed, w.wo, &counter));
    t.block = add_residual(t.attn, mlp(w, pre_mlp_norm(w, config, t.attn), counter));
    return t;
}

ForwardResult full_forward(const Encoder& encoder, const FrameTokens& frame) {
    const auto& cfg = encoder.config();
    if (frame.rows() != cfg.token_count || frame.cols() != cfg.model_dim) {
        throw ShapeError("full_forward: frame is " + std::to_string(frame.rows()) + "x" + std::to_string(frame.cols()) +
                         ", encoder expects " + std::to_string(cfg.token_count) + "x" +
                         std::to_string(cfg.model_dim));
    }
    ForwardResult result;
    result.traces.reserve(cfg.num_layers);
    FlopCounter counter;
    const Matrix* x = &frame;
    for (const auto& layer : encoder.layers()) {
        result.traces.push_back(forward_layer(layer, cfg, *x, counter));
        x = &result.traces.back().block;
    }
    result.output = result.traces.back().block;
    result.flops = counter.flops;
    return result;
}

std::uint64_t flop_count_full(const EncoderConfig& config) {
    const std::uint64_t t = config.token_count;
    const std::uint64_t d = config.model_dim;
    const std::uint64_t h = config.hidden_dim();
    const std::uint64_t per_layer = 8 * t * d * d + 4 * t * t * d + 4 * t * d * h;
    return per_layer * config.num_layers;
}

}  // namespace stc
