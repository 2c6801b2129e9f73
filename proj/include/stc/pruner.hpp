#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <utility>
#include <vector>

#include "stc/numerics.hpp"

namespace stc {

struct PrunerConfig {
    /// Fraction of tokens dropped, in [0, 1).
    double prune_ratio = 0.75;
    /// Weight of the temporal anchor; 1 − alpha goes to the spatial anchor.
    double alpha = 0.5;
    /// History capacity in frames.
    std::size_t window = 8;

    void validate() const;
};

/// FIFO of per-frame mean token vectors, oldest first.
class HistoryBuffer {
public:
    explicit HistoryBuffer(std::size_t capacity);

    void push(std::vector<double> mean);
    std::size_t size() const noexcept { return entries_.size(); }
    std::size_t capacity() const noexcept { return capacity_; }
    bool empty() const noexcept { return entries_.empty(); }
    const std::deque<std::vector<double>>& entries() const noexcept { return entries_; }

private:
    std::size_t capacity_;
    std::deque<std::vector<double>> entries_;
};

struct Anchors {
    std::vector<double> temporal;
    std::vector<double> spatial;
};

struct PruneResult {
    Matrix retained_tokens;
    IndexSet retained_indices;
    std::vector<double> scores;
};

/// Spatial anchor = mean token of the frame. Temporal anchor = mean of the
/// history entries, falling back to the spatial anchor while history is empty.
Anchors establish_anchors(const HistoryBuffer& history, const Matrix& tokens);

/// alpha · d_cos(z, temporal) + (1 − alpha) · d_cos(z, spatial), d_cos = 1 − cos.
std::vector<double> score_tokens(const Matrix& tokens, std::span<const double> temporal,
                                 std::span<const double> spatial, double alpha);

/// Keeps the ⌊N·(1 − prune_ratio)⌋ highest scores (lower index wins ties),
/// in original token order.
PruneResult prune(const Matrix& tokens, std::span<const double> scores, double prune_ratio);

/// Appends `spatial`, evicting the oldest entry once over capacity.
void update_history(HistoryBuffer& history, std::span<const double> spatial);

/// Dual-anchor pruner for one stream; frames must arrive in order.
class PrunerState {
public:
    explicit PrunerState(PrunerConfig config);

    /// Anchors → scores → top-k → history update with this frame's spatial anchor.
    PruneResult process_frame(const Matrix& tokens);

    const PrunerConfig& config() const noexcept { return config_; }
    const HistoryBuffer& history() const noexcept { return history_; }

private:
    PrunerConfig config_;
    HistoryBuffer history_;
};

/// Unitless quadratic prefill cost proxy, n².
double prefill_cost_model(std::size_t n_tokens) noexcept;

}  // namespace stc
