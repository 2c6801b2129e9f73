#include "stc/pruner.hpp"

#include <string>

namespace stc {

void PrunerConfig::validate() const {
    if (!(prune_ratio >= 0.0 && prune_ratio < 1.0)) {
        throw ConfigError("pruner: prune_ratio must lie in [0, 1)");
    }
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("pruner: alpha must lie in [0, 1]");
    }
    if (window == 0) {
        throw ConfigError("pruner: window must be >= 1");
    }
}

HistoryBuffer::HistoryBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) {
        throw ArgumentError("history buffer capacity must be >= 1");
    }
}

void HistoryBuffer::push(std::vector<double> mean) {
    entries_.push_back(std::move(mean));
    while (entries_.size() > capacity_) {
        entries_.pop_front();
    }
}

Anchors establish_anchors(const HistoryBuffer& history, const Matrix& tokens) {
    if (tokens.rows() == 0) {
        throw ArgumentError("establish_anchors: empty token set");
    }
    Anchors a;
    a.spatial = column_mean(tokens);
    if (history.empty()) {
        a.temporal = a.spatial;
        return a;
    }
    a.temporal.assign(tokens.cols(), 0.0);
    for (const auto& h : history.entries()) {
        if (h.size() != tokens.cols()) {
            throw ShapeError("establish_anchors: history entry width differs from token width");
        }
        for (std::size_t c = 0; c < h.size(); ++c) {
            a.temporal[c] += h[c];
        }
    }
    for (double& v : a.temporal) {
        v /= static_cast<double>(history.size());
    }
    return a;
}

std::vector<double> score_tokens(const Matrix& tokens, std::span<const double> temporal,
                                 std::span<const double> spatial, double alpha) {
    if (temporal.size() != tokens.cols() || spatial.size() != tokens.cols()) {
        throw ShapeError("score_tokens: anchor width differs from token width");
    }
    std::vector<double> scores(tokens.rows());
    for (std::size_t j = 0; j < tokens.rows(); ++j) {
        const auto z = tokens.row(j);
        const double d_temporal = 1.0 - cosine_similarity(z, temporal);
        const double d_spatial = 1.0 - cosine_similarity(z, spatial);
        scores[j] = alpha * d_temporal + (1.0 - alpha) * d_spatial;
    }
    return scores;
}

PruneResult prune(const Matrix& tokens, std::span<const double> scores, double prune_ratio) {
    if (scores.size() != tokens.rows()) {
        throw ShapeError("prune: " + std::to_string(scores.size()) + " scores for " + std::to_string(tokens.rows()) +
                         " tokens");
    }
    if (!(prune_ratio >= 0.0 && prune_ratio < 1.0)) {
        throw ArgumentError("prune: prune_ratio must lie in [0, 1)");
    }
    PruneResult r;
    r.retained_indices = top_k_indices(scores, kept_count(tokens.rows(), prune_ratio), TopKDirection::largest);
    r.retained_tokens = gather_rows(tokens, r.retained_indices);
    r.scores.assign(scores.begin(), scores.end());
    return r;
}

void update_history(HistoryBuffer& history, std::span<const double> spatial) {
    history.push(std::vector<double>(spatial.begin(), spatial.end()));
}

PrunerState::PrunerState(PrunerConfig config) : config_(config), history_((config.validate(), config.window)) {}

PruneResult PrunerState::process_frame(const Matrix& tokens) {
    const Anchors anchors = establish_anchors(history_, tokens);
    const auto scores = score_tokens(tokens, anchors.temporal, anchors.spatial, config_.alpha);
    PruneResult result = prune(tokens, scores, config_.prune_ratio);
    update_history(history_, anchors.spatial);
    return result;
}

double prefill_cost_model(std::size_t n_tokens) noexcept {
    const double n = static_cast<double>(n_tokens);
    return n * n;
}

}  // namespace stc
