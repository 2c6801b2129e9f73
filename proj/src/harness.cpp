#include "stc/harness.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace stc {

namespace {

using nlohmann::json;
using ordered = nlohmann::ordered_json;

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "num_layers",   "token_count",    "model_dim",  "num_heads",     "mlp_ratio",   "ln_eps",
        "encoder_seed", "cacher_enabled", "cache_interval", "reuse_ratio", "basis",     "metric",
        "reuse_scope",  "pruner_enabled", "prune_ratio", "alpha",        "window",      "stream_file",
        "num_frames",   "rho",            "sigma",      "event_period",  "stream_seed", "chunk_length",
        "output_format", "output_path",   "fidelity",   "timing_repeats"};
    return keys;
}

std::size_t get_count(const json& doc, const char* key, std::size_t fallback) {
    if (!doc.contains(key)) return fallback;
    const auto& v = doc.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

double get_real(const json& doc, const char* key, double fallback) {
    if (!doc.contains(key)) return fallback;
    const auto& v = doc.at(key);
    if (!v.is_number()) {
        throw ConfigError(std::string("config key '") + key + "' must be a number");
    }
    return v.get<double>();
}

bool get_flag(const json& doc, const char* key, bool fallback) {
    if (!doc.contains(key)) return fallback;
    const auto& v = doc.at(key);
    if (!v.is_boolean()) {
        throw ConfigError(std::string("config key '") + key + "' must be true or false");
    }
    return v.get<bool>();
}

std::optional<std::string> get_text(const json& doc, const char* key) {
    if (!doc.contains(key)) return std::nullopt;
    const auto& v = doc.at(key);
    if (!v.is_string()) {
        throw ConfigError(std::string("config key '") + key + "' must be a string");
    }
    return v.get<std::string>();
}

std::uint64_t get_seed(const json& doc, const char* key, std::uint64_t fallback) {
    if (!doc.contains(key)) return fallback;
    const auto& v = doc.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError(std::string("config key '") + key + "' must be a non-negative integer");
    }
    return v.get<std::uint64_t>();
}

template <typename T>
ordered optional_number(const std::optional<T>& v) {
    return v ? ordered(*v) : ordered(nullptr);
}

std::string csv_number(const std::optional<double>& v) {
    if (!v) return "";
    // Shortest representation that round-trips.
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), *v);
    return std::string(buf.data(), res.ptr);
}

}  // namespace

void RunConfig::validate(bool require_compressor) const {
    encoder.validate();
    if (cacher) cacher->validate();
    if (pruner) pruner->validate();
    if (!stream_file) stream.validate();
    if (chunk_length == 0) {
        throw ConfigError("chunk_length must be >= 1");
    }
    if (require_compressor && !cacher && !pruner) {
        throw ConfigError("at least one of cacher_enabled / pruner_enabled must be true");
    }
}

RunConfig parse_run_config(const nlohmann::json& doc) {
    if (!doc.is_object()) {
        throw ConfigError("config must be a flat JSON object");
    }
    for (const auto& [key, value] : doc.items()) {
        if (!known_keys().contains(key)) {
            throw ConfigError("unknown config key '" + key + "'");
        }
        if (value.is_object() || value.is_array()) {
            throw ConfigError("config key '" + key + "' must be a scalar");
        }
    }

    RunConfig c;
    c.encoder.num_layers = get_count(doc, "num_layers", c.encoder.num_layers);
    c.encoder.token_count = get_count(doc, "token_count", c.encoder.token_count);
    c.encoder.model_dim = get_count(doc, "model_dim", c.encoder.model_dim);
    c.encoder.num_heads = get_count(doc, "num_heads", c.encoder.num_heads);
    c.encoder.mlp_ratio = get_real(doc, "mlp_ratio", c.encoder.mlp_ratio);
    c.encoder.ln_eps = get_real(doc, "ln_eps", c.encoder.ln_eps);
    c.encoder.seed = get_seed(doc, "encoder_seed", c.encoder.seed);

    CacherConfig cacher;
    if (doc.contains("cache_interval")) {
        const auto& v = doc.at("cache_interval");
        if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinite")) {
            cacher.cache_interval = std::nullopt;
        } else if (v.is_number_integer() && v.get<std::int64_t>() >= 1) {
            cacher.cache_interval = v.get<std::size_t>();
        } else {
            throw ConfigError("config key 'cache_interval' must be an integer >= 1 or \"inf\"");
        }
    }
    cacher.reuse_ratio = get_real(doc, "reuse_ratio", cacher.reuse_ratio);
    if (auto s = get_text(doc, "basis")) cacher.basis = parse_basis(*s);
    if (auto s = get_text(doc, "metric")) cacher.metric = parse_metric(*s);
    if (auto s = get_text(doc, "reuse_scope")) cacher.reuse_scope = parse_reuse_scope(*s);
    c.cacher = get_flag(doc, "cacher_enabled", true) ? std::optional(cacher) : std::nullopt;

    PrunerConfig pruner;
    pruner.prune_ratio = get_real(doc, "prune_ratio", pruner.prune_ratio);
    pruner.alpha = get_real(doc, "alpha", pruner.alpha);
    pruner.window = get_count(doc, "window", pruner.window);
    c.pruner = get_flag(doc, "pruner_enabled", true) ? std::optional(pruner) : std::nullopt;

    if (auto s = get_text(doc, "stream_file")) c.stream_file = *s;
    c.stream.num_frames = get_count(doc, "num_frames", c.stream.num_frames);
    c.stream.redundancy = get_real(doc, "rho", c.stream.redundancy);
    c.stream.drift = get_real(doc, "sigma", c.stream.drift);
    c.stream.event_period = get_count(doc, "event_period", c.stream.event_period);
    c.stream.seed = get_seed(doc, "stream_seed", c.stream.seed);
    c.stream.token_count = c.encoder.token_count;
    c.stream.dim = c.encoder.model_dim;

    c.chunk_length = get_count(doc, "chunk_length", c.chunk_length);
    if (auto s = get_text(doc, "output_format")) c.format = parse_report_format(*s);
    if (auto s = get_text(doc, "output_path")) c.output_path = *s;
    c.fidelity = get_flag(doc, "fidelity", c.fidelity);
    c.timing_repeats = get_count(doc, "timing_repeats", c.timing_repeats);

    c.validate(false);
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open config '" + path.string() + "'");
    }
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
    }
    return parse_run_config(doc);
}

ordered config_echo(const RunConfig& c) {
    const CacherConfig cacher = c.cacher.value_or(CacherConfig{});
    const PrunerConfig pruner = c.pruner.value_or(PrunerConfig{});
    ordered o;
    o["num_layers"] = c.encoder.num_layers;
    o["token_count"] = c.encoder.token_count;
    o["model_dim"] = c.encoder.model_dim;
    o["num_heads"] = c.encoder.num_heads;
    o["mlp_ratio"] = c.encoder.mlp_ratio;
    o["ln_eps"] = c.encoder.ln_eps;
    o["encoder_seed"] = c.encoder.seed;
    o["cacher_enabled"] = c.cacher.has_value();
    o["cache_interval"] = cacher.cache_interval ? ordered(*cacher.cache_interval) : ordered("inf");
    o["reuse_ratio"] = cacher.reuse_ratio;
    o["basis"] = to_string(cacher.basis);
    o["metric"] = to_string(cacher.metric);
    o["reuse_scope"] = to_string(cacher.reuse_scope);
    o["pruner_enabled"] = c.pruner.has_value();
    o["prune_ratio"] = pruner.prune_ratio;
    o["alpha"] = pruner.alpha;
    o["window"] = pruner.window;
    o["stream_file"] = c.stream_file ? ordered(c.stream_file->string()) : ordered(nullptr);
    o["num_frames"] = c.stream.num_frames;
    o["rho"] = c.stream.redundancy;
    o["sigma"] = c.stream.drift;
    o["event_period"] = c.stream.event_period;
    o["stream_seed"] = c.stream.seed;
    o["chunk_length"] = c.chunk_length;
    o["output_format"] = c.format == ReportFormat::json ? "json" : "csv";
    o["output_path"] = c.output_path ? ordered(c.output_path->string()) : ordered(nullptr);
    o["fidelity"] = c.fidelity;
    o["timing_repeats"] = c.timing_repeats;
    return o;
}

SyntheticStream materialize_stream(const RunConfig& config) {
    if (!config.stream_file) {
        StreamConfig s = config.stream;
        s.token_count = config.encoder.token_count;
        s.dim = config.encoder.model_dim;
        return generate_stream(s);
    }
    SyntheticStream s;
    s.frames = load_tensor_file(*config.stream_file);
    const auto& f = s.frames.front();
    if (f.rows() != config.encoder.token_count || f.cols() != config.encoder.model_dim) {
        throw ConfigError("stream file frames are " + std::to_string(f.rows()) + "x" + std::to_string(f.cols()) +
                          " but the encoder expects " + std::to_string(config.encoder.token_count) + "x" +
                          std::to_string(config.encoder.model_dim));
    }
    s.planted_event_indices.assign(s.frames.size(), IndexSet{});
    return s;
}

StreamOutputs process_stream(const Encoder& encoder, const RunConfig& config, std::span<const FrameTokens> frames) {
    StreamOutputs out;
    std::optional<Cacher> cacher;
    if (config.cacher) cacher.emplace(encoder, *config.cacher);
    std::optional<PrunerState> pruner;
    if (config.pruner) pruner.emplace(*config.pruner);

    for (const auto& frame : frames) {
        Matrix tokens;
        if (cacher) {
            CachedFrame cf = cacher->process_frame(frame);
            tokens = std::move(cf.output);
            out.cacher_stats.push_back(std::move(cf.stats));
        } else {
            tokens = full_forward(encoder, frame).output;
        }
        if (pruner) {
            out.pruned.push_back(pruner->process_frame(tokens));
        }
        out.vit_outputs.push_back(std::move(tokens));
    }
    return out;
}

std::pair<double, double> fidelity(const Matrix& compressed, const Matrix& reference) {
    if (compressed.rows() != reference.rows() || compressed.cols() != reference.cols()) {
        throw ShapeError("fidelity: shape mismatch");
    }
    const double cosine = cosine_similarity(compressed.data(), reference.data());
    double max_err = 0.0;
    const auto a = compressed.data();
    const auto b = reference.data();
    for (std::size_t i = 0; i < a.size(); ++i) {
        max_err = std::max(max_err, std::abs(static_cast<double>(a[i]) - b[i]));
    }
    return {cosine, max_err};
}

double median(std::vector<double> values) {
    if (values.empty()) {
        throw ArgumentError("median of an empty sample");
    }
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

Timing time_stream(const Encoder& encoder, const std::optional<CacherConfig>& cacher,
                   std::span<const FrameTokens> frames, std::size_t repeats) {
    if (repeats == 0) {
        throw ArgumentError("time_stream: repeats must be >= 1");
    }
    using clock = std::chrono::steady_clock;
    auto run_full = [&] {
        std::uint64_t sink = 0;
        for (const auto& f : frames) sink += full_forward(encoder, f).flops;
        return sink;
    };
    auto run_cached = [&] {
        Cacher c(encoder, *cacher);
        std::uint64_t sink = 0;
        for (const auto& f : frames) sink += c.process_frame(f).stats.flops;
        return sink;
    };
    auto measure = [&](auto&& fn) {
        fn();
        std::vector<double> ms;
        for (std::size_t r = 0; r < repeats; ++r) {
            const auto t0 = clock::now();
            fn();
            ms.push_back(std::chrono::duration<double, std::milli>(clock::now() - t0).count());
        }
        return median(std::move(ms));
    };
    Timing t;
    t.full_ms = measure(run_full);
    if (cacher) t.selective_ms = measure(run_cached);
    return t;
}

MetricsReport run_pipeline(const RunConfig& config) {
    config.validate(true);
    const Encoder encoder = init_encoder(config.encoder);
    const SyntheticStream stream = materialize_stream(config);
    const std::size_t tokens = config.encoder.token_count;

    const StreamOutputs outputs = process_stream(encoder, config, stream.frames);

    MetricsReport report;
    report.config = config_echo(config);
    const std::uint64_t full_flops = flop_count_full(config.encoder);
    std::uint64_t total_flops = 0;
    double fidelity_sum = 0.0;
    double worst_err = 0.0;
    std::size_t planted_total = 0, planted_hit = 0;

    for (std::size_t i = 0; i < stream.frames.size(); ++i) {
        FrameMetrics m;
        m.frame = i + 1;
        if (config.cacher) {
            const auto& st = outputs.cacher_stats[i];
            m.is_reference = st.is_reference;
            m.dynamic_k = st.dynamic_count;
            m.flops_vit = st.flops;
        } else {
            m.is_reference = true;
            m.dynamic_k = tokens;
            m.flops_vit = full_flops;
        }
        m.retained_k = config.pruner ? outputs.pruned[i].retained_indices.size() : tokens;
        if (config.fidelity) {
            const Matrix reference = full_forward(encoder, stream.frames[i]).output;
            const auto [cosine, err] = fidelity(outputs.vit_outputs[i], reference);
            m.fidelity_cosine = cosine;
            m.fidelity_max_abs_err = err;
            fidelity_sum += cosine;
            worst_err = std::max(worst_err, err);
        }
        if (config.pruner) {
            for (std::size_t idx : stream.planted_event_indices[i]) {
                ++planted_total;
                planted_hit += outputs.pruned[i].retained_indices.contains(idx) ? 1 : 0;
            }
        }
        total_flops += m.flops_vit;
        report.frames.push_back(m);
    }

    auto& agg = report.aggregate;
    const double n = static_cast<double>(stream.frames.size());
    agg.vit_flop_ratio = static_cast<double>(total_flops) / (static_cast<double>(full_flops) * n);
    if (config.fidelity) {
        agg.mean_fidelity = fidelity_sum / n;
        agg.max_abs_err = worst_err;
    }
    if (planted_total > 0) {
        agg.event_recall = static_cast<double>(planted_hit) / static_cast<double>(planted_total);
    }

    // Prefill proxy: each chunk's visual tokens form one prefill sequence.
    double cost_pruned = 0.0, cost_full = 0.0;
    for (const auto& chunk : chunk_stream(stream.frames, config.chunk_length)) {
        std::size_t kept = 0;
        for (std::size_t j = 0; j < chunk.frames.size(); ++j) {
            kept += report.frames[chunk.first_frame + j].retained_k;
        }
        cost_pruned += prefill_cost_model(kept);
        cost_full += prefill_cost_model(tokens * chunk.frames.size());
    }
    agg.prefill_cost_ratio = cost_pruned / cost_full;

    if (config.timing_repeats > 0) {
        const Timing t = time_stream(encoder, config.cacher, stream.frames, config.timing_repeats);
        agg.vit_wall_time_full_ms = t.full_ms;
        agg.vit_wall_time_selective_ms = t.selective_ms;
    }
    return report;
}

RedundancyProfile analyze_redundancy(std::span<const FrameTokens> frames, const Encoder& encoder, std::size_t stride) {
    if (stride == 0) {
        throw ArgumentError("analyze_redundancy: stride must be >= 1");
    }
    if (frames.size() < stride + 1) {
        throw ArgumentError("analyze_redundancy: need at least stride + 1 frames");
    }
    std::vector<ForwardResult> passes;
    passes.reserve(frames.size());
    for (const auto& f : frames) {
        passes.push_back(full_forward(encoder, f));
    }
    RedundancyProfile profile;
    profile.stride = stride;
    const std::size_t layers = encoder.config().num_layers;
    for (std::size_t l = 0; l < layers; ++l) {
        std::vector<double> pair_means;
        for (std::size_t t = 0; t + stride < frames.size(); ++t) {
            const auto sims = rowwise_similarity(passes[t].traces[l].block, passes[t + stride].traces[l].block,
                                                 SimilarityMetric::cosine);
            double s = 0.0;
            for (double v : sims) s += v;
            pair_means.push_back(s / static_cast<double>(sims.size()));
        }
        double mean = 0.0;
        for (double v : pair_means) mean += v;
        mean /= static_cast<double>(pair_means.size());
        double var = 0.0;
        for (double v : pair_means) var += (v - mean) * (v - mean);
        var /= static_cast<double>(pair_means.size());
        profile.layers.push_back(LayerRedundancy{l, mean, std::sqrt(var)});
    }
    return profile;
}

ordered to_json(const RedundancyProfile& profile) {
    ordered o;
    o["stride"] = profile.stride;
    ordered layers = ordered::array();
    for (const auto& l : profile.layers) {
        ordered e;
        e["layer_index"] = l.layer_index;
        e["mean_adjacent_cosine"] = l.mean_adjacent_cosine;
        e["std"] = l.std;
        layers.push_back(std::move(e));
    }
    o["layers"] = std::move(layers);
    return o;
}

std::string render_report(const MetricsReport& report, ReportFormat format) {
    const auto& a = report.aggregate;
    if (format == ReportFormat::json) {
        ordered doc;
        doc["config"] = report.config;
        ordered frames = ordered::array();
        for (const auto& f : report.frames) {
            ordered e;
            e["frame"] = f.frame;
            e["is_reference"] = f.is_reference;
            e["dynamic_k"] = f.dynamic_k;
            e["retained_k"] = f.retained_k;
            e["flops_vit"] = f.flops_vit;
            e["fidelity_cosine"] = optional_number(f.fidelity_cosine);
            e["fidelity_max_abs_err"] = optional_number(f.fidelity_max_abs_err);
            frames.push_back(std::move(e));
        }
        doc["frames"] = std::move(frames);
        ordered agg;
        agg["vit_flop_ratio"] = a.vit_flop_ratio;
        agg["vit_wall_time_full_ms"] = optional_number(a.vit_wall_time_full_ms);
        agg["vit_wall_time_selective_ms"] = optional_number(a.vit_wall_time_selective_ms);
        agg["prefill_cost_ratio"] = a.prefill_cost_ratio;
        agg["mean_fidelity"] = optional_number(a.mean_fidelity);
        agg["max_abs_err"] = optional_number(a.max_abs_err);
        agg["event_recall"] = optional_number(a.event_recall);
        doc["aggregate"] = std::move(agg);
        return doc.dump(2) + "\n";
    }

    std::ostringstream os;
    os << "frame,is_reference,dynamic_k,retained_k,flops_vit,fidelity_cosine,fidelity_max_abs_err\n";
    for (const auto& f : report.frames) {
        os << f.frame << ',' << (f.is_reference ? 1 : 0) << ',' << f.dynamic_k << ',' << f.retained_k << ','
           << f.flops_vit << ',' << csv_number(f.fidelity_cosine) << ',' << csv_number(f.fidelity_max_abs_err)
           << '\n';
    }
    os << "#agg,vit_flop_ratio," << csv_number(a.vit_flop_ratio) << '\n';
    os << "#agg,vit_wall_time_full_ms," << csv_number(a.vit_wall_time_full_ms) << '\n';
    os << "#agg,vit_wall_time_selective_ms," << csv_number(a.vit_wall_time_selective_ms) << '\n';
    os << "#agg,prefill_cost_ratio," << csv_number(a.prefill_cost_ratio) << '\n';
    os << "#agg,mean_fidelity," << csv_number(a.mean_fidelity) << '\n';
    os << "#agg,max_abs_err," << csv_number(a.max_abs_err) << '\n';
    os << "#agg,event_recall," << csv_number(a.event_recall) << '\n';
    return os.str();
}

void emit_report(const MetricsReport& report, ReportFormat format, const std::filesystem::path& path) {
    const std::string text = render_report(report, format);
    std::ofstream out(path, std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << text;
    if (!out.flush()) {
        throw IoError("failed writing '" + path.string() + "'");
    }
}

ReportFormat parse_report_format(std::string_view text) {
    if (text == "json") return ReportFormat::json;
    if (text == "csv") return ReportFormat::csv;
    throw ConfigError("unknown output format '" + std::string(text) + "' (expected json or csv)");
}

}  // namespace stc
