#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "stc/numerics.hpp"
#include "stc/vit.hpp"

namespace stc {

/// Which per-token representation is compared against the reference frame.
enum class SimilarityBasis { key, value, feature };

/// Which sub-blocks reuse cached rows. `attn_only` recomputes the MLP on
/// every row; `mlp_only` recomputes attention on every row.
enum class ReuseScope { attn_only, mlp_only, both };

struct CacherConfig {
    /// Frames between reference refreshes; nullopt means never refresh after frame 1.
    std::optional<std::size_t> cache_interval = 4;
    /// Fraction of tokens reused from the cache, in [0, 1).
    double reuse_ratio = 0.75;
    SimilarityBasis basis = SimilarityBasis::key;
    SimilarityMetric metric = SimilarityMetric::cosine;
    ReuseScope reuse_scope = ReuseScope::both;

    void validate() const;
    /// ⌊T·(1 − reuse_ratio)⌋
    std::size_t dynamic_count(std::size_t token_count) const { return kept_count(token_count, reuse_ratio); }
    /// 1-based frame index t is a reference iff t == 1 or (t − 1) is a multiple of the interval.
    bool is_reference_frame(std::size_t t) const noexcept;
};

/// Reference activations for every layer.
struct LayerCacheBank {
    std::vector<LayerTrace> layers;
    /// LN1 output of the reference frame per layer; filled only for the feature basis.
    std::vector<Matrix> features;
    /// 1-based index of the frame the bank was built from; 0 while empty.
    std::size_t reference_frame_index = 0;

    bool empty() const noexcept { return layers.empty(); }
};

struct FrameStats {
    bool is_reference = false;
    std::size_t dynamic_count = 0;
    std::uint64_t flops = 0;
    /// One set per layer on non-reference frames; empty on reference frames.
    std::vector<IndexSet> dynamic_sets;
};

struct CachedFrame {
    Matrix output;
    FrameStats stats;
};

/// Per-layer quantities computed on every row before the dynamic set is known.
struct LayerProbe {
    Matrix normed;                     // LN1(x)
    Matrix keys;                       // full key projection
    std::optional<Matrix> values;      // full value projection, value basis only
};

LayerProbe probe_layer(const LayerWeights& w, const EncoderConfig& enc, const Matrix& x, const CacherConfig& config,
                       FlopCounter& counter);

/// The basis matrix the probe exposes for `config.basis`.
const Matrix& probe_basis(const LayerProbe& probe, const CacherConfig& config);

/// The k = ⌊T·(1 − reuse_ratio)⌋ rows least similar to the reference, ascending.
IndexSet identify_dynamic_tokens(const Matrix& current_basis, const Matrix& reference_basis,
                                 const CacherConfig& config);

struct LayerStep {
    Matrix next;
    std::uint64_t flops = 0;
};

/// One encoder block where only `dynamic` rows are recomputed and every other
/// row of the value, attention and block outputs is taken from `cache`.
/// Queries and values are computed for dynamic rows only; keys come fresh
/// from `probe` for every row; fresh values are scattered into the cached
/// value matrix before attention.
LayerStep selective_layer_forward(const LayerWeights& w, const EncoderConfig& enc, const Matrix& x,
                                  const LayerProbe& probe, const LayerTrace& cache, const IndexSet& dynamic,
                                  const CacherConfig& config);

/// Convenience overload that probes `x` itself. The probe's FLOPs are included.
LayerStep selective_layer_forward(const LayerWeights& w, const EncoderConfig& enc, const Matrix& x,
                                  const LayerTrace& cache, const IndexSet& dynamic, const CacherConfig& config);

/// Closed-form FLOPs of one non-reference frame (same accounting as `flop_count_full`).
std::uint64_t flop_count_selective(const EncoderConfig& enc, const CacherConfig& config);

/// Streaming state for one video stream. Holds a non-owning reference to the
/// encoder, which must outlive it. Frames must be fed in order.
class Cacher {
public:
    Cacher(const Encoder& encoder, CacherConfig config);

    CachedFrame process_frame(const FrameTokens& frame);

    std::size_t frame_counter() const noexcept { return frame_counter_; }
    const LayerCacheBank& cache() const noexcept { return cache_; }
    const CacherConfig& config() const noexcept { return config_; }

private:
    CachedFrame reference_pass(const FrameTokens& frame);
    CachedFrame selective_pass(const FrameTokens& frame);

    const Encoder* encoder_;
    CacherConfig config_;
    LayerCacheBank cache_;
    std::size_t frame_counter_ = 0;
};

Cacher new_cacher(const Encoder& encoder, const CacherConfig& config);

std::string_view to_string(SimilarityBasis basis) noexcept;
std::string_view to_string(ReuseScope scope) noexcept;
std::string_view to_string(SimilarityMetric metric) noexcept;
SimilarityBasis parse_basis(std::string_view text);
ReuseScope parse_reuse_scope(std::string_view text);
SimilarityMetric parse_metric(std::string_view text);

}  // namespace stc
