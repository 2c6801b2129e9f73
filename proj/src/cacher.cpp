#include "stc/cacher.hpp"

#include <string>

namespace stc {

void CacherConfig::validate() const {
    if (cache_interval && *cache_interval == 0) {
        throw ConfigError("cacher: cache_interval must be >= 1 or infinite");
    }
    if (!(reuse_ratio >= 0.0 && reuse_ratio < 1.0)) {
        throw ConfigError("cacher: reuse_ratio must lie in [0, 1)");
    }
}

bool CacherConfig::is_reference_frame(std::size_t t) const noexcept {
    if (t == 1) {
        return true;
    }
    return cache_interval && (t - 1) % *cache_interval == 0;
}

LayerProbe probe_layer(const LayerWeights& w, const EncoderConfig& enc, const Matrix& x, const CacherConfig& config,
                       FlopCounter& counter) {
    LayerProbe probe;
    probe.normed = pre_attention_norm(w, enc, x);
    probe.keys = matmul_transposed(probe.normed, w.wk, &counter);
    if (config.basis == SimilarityBasis::value) {
        probe.values = matmul_transposed(probe.normed, w.wv, &counter);
    }
    return probe;
}

const Matrix& probe_basis(const LayerProbe& probe, const CacherConfig& config) {
    switch (config.basis) {
        case SimilarityBasis::value:
            if (!probe.values) {
                throw StateError("probe has no value projection; it was built for a different basis");
            }
            return *probe.values;
        case SimilarityBasis::feature:
            return probe.normed;
        case SimilarityBasis::key:
            break;
    }
    return probe.keys;
}

IndexSet identify_dynamic_tokens(const Matrix& current_basis, const Matrix& reference_basis,
                                 const CacherConfig& config) {
    const auto similarity = rowwise_similarity(current_basis, reference_basis, config.metric);
    return top_k_indices(similarity, config.dynamic_count(current_basis.rows()), TopKDirection::smallest);
}

namespace {

void require_cache(const LayerTrace& cache, const Matrix& x) {
    const auto fits = [&x](const Matrix& m) { return m.rows() == x.rows() && m.cols() == x.cols(); };
    if (!fits(cache.keys) || !fits(cache.values) || !fits(cache.attn) || !fits(cache.block)) {
        throw StateError("selective_layer_forward: reference cache is missing or does not match the input shape");
    }
}

}  // namespace

LayerStep selective_layer_forward(const LayerWeights& w, const EncoderConfig& enc, const Matrix& x,
                                  const LayerProbe& probe, const LayerTrace& cache, const IndexSet& dynamic,
                                  const CacherConfig& config) {
    require_cache(cache, x);
    FlopCounter counter;
    const bool value_basis = config.basis == SimilarityBasis::value;

    Matrix attn;
    if (config.reuse_scope == ReuseScope::mlp_only) {
        const Matrix queries = matmul_transposed(probe.normed, w.wq, &counter);
        const Matrix values = value_basis ? *probe.values : matmul_transposed(probe.normed, w.wv, &counter);
        const Matrix mixed = attend(queries, probe.keys, values, enc.num_heads, counter);
        attn = add_residual(x, matmul_transposed(mixed, w.wo, &counter));
    } else {
        const Matrix normed_sel = gather_rows(probe.normed, dynamic);
        const Matrix queries = matmul_transposed(normed_sel, w.wq, &counter);
        const Matrix values_sel =
            value_basis ? gather_rows(*probe.values, dynamic) : matmul_transposed(normed_sel, w.wv, &counter);
        Matrix values = cache.values;
        scatter_rows(values, dynamic, values_sel);
        const Matrix mixed = attend(queries, probe.keys, values, enc.num_heads, counter);
        const Matrix attn_sel =
            add_residual(gather_rows(x, dynamic), matmul_transposed(mixed, w.wo, &counter));
        attn = cache.attn;
        scatter_rows(attn, dynamic, attn_sel);
    }

    LayerStep step;
    if (config.reuse_scope == ReuseScope::attn_only) {
        step.next = add_residual(attn, mlp(w, pre_mlp_norm(w, enc, attn), counter));
    } else {
        const Matrix attn_sel = gather_rows(attn, dynamic);
        const Matrix block_sel = add_residual(attn_sel, mlp(w, pre_mlp_norm(w, enc, attn_sel), counter));
        step.next = cache.block;
        scatter_rows(step.next, dynamic, block_sel);
    }
    step.flops = counter.flops;
    return step;
}

LayerStep selective_layer_forward(const LayerWeights& w, const EncoderConfig& enc, const Matrix& x,
                                  const LayerTrace& cache, const IndexSet& dynamic, const CacherConfig& config) {
    FlopCounter counter;
    const LayerProbe probe = probe_layer(w, enc, x, config, counter);
    LayerStep step = selective_layer_forward(w, enc, x, probe, cache, dynamic, config);
    step.flops += counter.flops;
    return step;
}

std::uint64_t flop_count_selective(const EncoderConfig& enc, const CacherConfig& config) {
    const std::uint64_t t = enc.token_count;
    const std::uint64_t d = enc.model_dim;
    const std::uint64_t h = enc.hidden_dim();
    const std::uint64_t k = config.dynamic_count(enc.token_count);
    const bool value_basis = config.basis == SimilarityBasis::value;

    std::uint64_t macs = t * d * d;  // keys on every row
    if (value_basis) {
        macs += t * d * d;
    }
    // Attention block: queries, values (unless already projected), scores +
    // weighted sum, output projection.
    const std::uint64_t attn_rows = config.reuse_scope == ReuseScope::mlp_only ? t : k;
    macs += attn_rows * d * d + (value_basis ? 0 : attn_rows * d * d) + 2 * attn_rows * t * d + attn_rows * d * d;
    const std::uint64_t mlp_rows = config.reuse_scope == ReuseScope::attn_only ? t : k;
    macs += 2 * mlp_rows * d * h;
    return 2 * macs * enc.num_layers;
}

Cacher::Cacher(const Encoder& encoder, CacherConfig config) : encoder_(&encoder), config_(config) {
    config_.validate();
}

Cacher new_cacher(const Encoder& encoder, const CacherConfig& config) { return Cacher(encoder, config); }

CachedFrame Cacher::process_frame(const FrameTokens& frame) {
    const auto& enc = encoder_->config();
    if (frame.rows() != enc.token_count || frame.cols() != enc.model_dim) {
        throw ShapeError("cacher: frame is " + std::to_string(frame.rows()) + "x" + std::to_string(frame.cols()) +
                         ", encoder expects " + std::to_string(enc.token_count) + "x" +
                         std::to_string(enc.model_dim));
    }
    const std::size_t t = frame_counter_ + 1;
    CachedFrame out = config_.is_reference_frame(t) || cache_.empty() ? reference_pass(frame) : selective_pass(frame);
    frame_counter_ = t;
    if (out.stats.is_reference) {
        cache_.reference_frame_index = t;
    }
    return out;
}

CachedFrame Cacher::reference_pass(const FrameTokens& frame) {
    const auto& enc = encoder_->config();
    ForwardResult full = full_forward(*encoder_, frame);

    LayerCacheBank bank;
    if (config_.basis == SimilarityBasis::feature) {
        bank.features.reserve(enc.num_layers);
        for (std::size_t l = 0; l < enc.num_layers; ++l) {
            const Matrix& input = l == 0 ? frame : full.traces[l - 1].block;
            bank.features.push_back(pre_attention_norm(encoder_->layers()[l], enc, input));
        }
    }
    bank.layers = std::move(full.traces);
    cache_ = std::move(bank);

    CachedFrame out;
    out.output = std::move(full.output);
    out.stats.is_reference = true;
    out.stats.dynamic_count = enc.token_count;
    out.stats.flops = full.flops;
    return out;
}

CachedFrame Cacher::selective_pass(const FrameTokens& frame) {
    const auto& enc = encoder_->config();
    CachedFrame out;
    out.stats.dynamic_count = config_.dynamic_count(enc.token_count);
    out.stats.dynamic_sets.reserve(enc.num_layers);

    Matrix x = frame;
    for (std::size_t l = 0; l < enc.num_layers; ++l) {
        const auto& w = encoder_->layers()[l];
        const auto& ref = cache_.layers[l];
        FlopCounter counter;
        const LayerProbe probe = probe_layer(w, enc, x, config_, counter);
        const Matrix& reference_basis = config_.basis == SimilarityBasis::key     ? ref.keys
                                        : config_.basis == SimilarityBasis::value ? ref.values
                                                                                  : cache_.features[l];
        IndexSet dynamic = identify_dynamic_tokens(probe_basis(probe, config_), reference_basis, config_);
        LayerStep step = selective_layer_forward(w, enc, x, probe, ref, dynamic, config_);
        out.stats.flops += counter.flops + step.flops;
        out.stats.dynamic_sets.push_back(std::move(dynamic));
        x = std::move(step.next);
    }
    out.output = std::move(x);
    return out;
}

std::string_view to_string(SimilarityBasis basis) noexcept {
    switch (basis) {
        case SimilarityBasis::key: return "key";
        case SimilarityBasis::value: return "value";
        case SimilarityBasis::feature: return "feature";
    }
    return "?";
}

std::string_view to_string(ReuseScope scope) noexcept {
    switch (scope) {
        case ReuseScope::attn_only: return "attn_only";
        case ReuseScope::mlp_only: return "mlp_only";
        case ReuseScope::both: return "both";
    }
    return "?";
}

std::string_view to_string(SimilarityMetric metric) noexcept {
    switch (metric) {
        case SimilarityMetric::cosine: return "cosine";
        case SimilarityMetric::l1: return "l1";
        case SimilarityMetric::l2: return "l2";
        case SimilarityMetric::dot: return "dot";
    }
    return "?";
}

SimilarityBasis parse_basis(std::string_view text) {
    for (auto b : {SimilarityBasis::key, SimilarityBasis::value, SimilarityBasis::feature}) {
        if (text == to_string(b)) return b;
    }
    throw ConfigError("unknown similarity basis '" + std::string(text) + "' (expected key, value or feature)");
}

ReuseScope parse_reuse_scope(std::string_view text) {
    for (auto s : {ReuseScope::attn_only, ReuseScope::mlp_only, ReuseScope::both}) {
        if (text == to_string(s)) return s;
    }
    throw ConfigError("unknown reuse scope '" + std::string(text) + "' (expected attn_only, mlp_only or both)");
}

SimilarityMetric parse_metric(std::string_view text) {
    for (auto m : {SimilarityMetric::cosine, SimilarityMetric::l1, SimilarityMetric::l2, SimilarityMetric::dot}) {
        if (text == to_string(m)) return m;
    }
    throw ConfigError("unknown similarity metric '" + std::string(text) + "' (expected cosine, l1, l2 or dot)");
}

}  // namespace stc
