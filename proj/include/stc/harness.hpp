#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "stc/cacher.hpp"
#include "stc/pruner.hpp"
#include "stc/stream.hpp"
#include "stc/vit.hpp"

namespace stc {

enum class ReportFormat { json, csv };

/// Everything one `stc run` needs. The synthetic stream takes its token count
/// and width from the encoder.
struct RunConfig {
    EncoderConfig encoder;
    std::optional<CacherConfig> cacher = CacherConfig{};
    std::optional<PrunerConfig> pruner = PrunerConfig{};
    StreamConfig stream;
    std::optional<std::filesystem::path> stream_file;
    std::size_t chunk_length = 4;
    ReportFormat format = ReportFormat::json;
    std::optional<std::filesystem::path> output_path;
    bool fidelity = true;
    std::size_t timing_repeats = 5;

    /// Throws ConfigError; `require_compressor` demands cacher or pruner.
    void validate(bool require_compressor = true) const;
};

/// Flat JSON object, keys as listed in the README. Unknown keys are rejected.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
/// Every field with defaults resolved, in a fixed order.
nlohmann::ordered_json config_echo(const RunConfig& config);

/// Frames of the configured source plus planted events (empty for files).
SyntheticStream materialize_stream(const RunConfig& config);

struct FrameMetrics {
    std::size_t frame = 0;  // 1-based
    bool is_reference = true;
    std::size_t dynamic_k = 0;
    std::size_t retained_k = 0;
    std::uint64_t flops_vit = 0;
    std::optional<double> fidelity_cosine;
    std::optional<double> fidelity_max_abs_err;
};

struct AggregateMetrics {
    double vit_flop_ratio = 1.0;
    std::optional<double> vit_wall_time_full_ms;
    std::optional<double> vit_wall_time_selective_ms;
    double prefill_cost_ratio = 1.0;
    std::optional<double> mean_fidelity;
    std::optional<double> max_abs_err;
    std::optional<double> event_recall;
};

struct MetricsReport {
    nlohmann::ordered_json config;
    std::vector<FrameMetrics> frames;
    AggregateMetrics aggregate;
};

/// Per-frame products of the compression pipeline, before any reporting.
struct StreamOutputs {
    std::vector<Matrix> vit_outputs;
    std::vector<FrameStats> cacher_stats;        // empty when the cacher is disabled
    std::vector<PruneResult> pruned;             // empty when the pruner is disabled
};

/// Runs cacher then pruner causally over `frames`.
StreamOutputs process_stream(const Encoder& encoder, const RunConfig& config, std::span<const FrameTokens> frames);

MetricsReport run_pipeline(const RunConfig& config);

struct LayerRedundancy {
    std::size_t layer_index = 0;
    double mean_adjacent_cosine = 0.0;
    double std = 0.0;
};

struct RedundancyProfile {
    std::size_t stride = 1;
    std::vector<LayerRedundancy> layers;
};

/// For each layer, the mean over frame pairs (t, t + stride) of the mean
/// token-wise cosine between their block outputs.
RedundancyProfile analyze_redundancy(std::span<const FrameTokens> frames, const Encoder& encoder, std::size_t stride);
nlohmann::ordered_json to_json(const RedundancyProfile& profile);

struct Timing {
    double full_ms = 0.0;
    std::optional<double> selective_ms;
};

/// Median wall time of encoding the whole stream with full passes and with
/// the cacher, over `repeats` runs after one warm-up each.
Timing time_stream(const Encoder& encoder, const std::optional<CacherConfig>& cacher,
                   std::span<const FrameTokens> frames, std::size_t repeats);

/// Cosine of the flattened matrices and the largest absolute elementwise difference.
std::pair<double, double> fidelity(const Matrix& compressed, const Matrix& reference);

std::string render_report(const MetricsReport& report, ReportFormat format);
void emit_report(const MetricsReport& report, ReportFormat format, const std::filesystem::path& path);

ReportFormat parse_report_format(std::string_view text);
double median(std::vector<double> values);

}  // namespace stc
