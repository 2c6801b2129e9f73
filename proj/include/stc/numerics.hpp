#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <vector>

#include "stc/error.hpp"

namespace stc {

/// Dense row-major matrix of 32-bit floats.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, float fill = 0.0f);
    Matrix(std::size_t rows, std::size_t cols, std::vector<float> data);
    Matrix(std::initializer_list<std::initializer_list<float>> rows);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    float& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    float operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<float> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const float> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

    std::span<float> data() noexcept { return data_; }
    std::span<const float> data() const noexcept { return data_; }

    Matrix transposed() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

/// Strictly ascending set of token positions.
class IndexSet {
public:
    IndexSet() = default;
    /// Throws ArgumentError unless `indices` is strictly ascending.
    explicit IndexSet(std::vector<std::size_t> indices);

    static IndexSet all(std::size_t n);

    std::size_t size() const noexcept { return indices_.size(); }
    bool empty() const noexcept { return indices_.empty(); }
    std::size_t operator[](std::size_t i) const noexcept { return indices_[i]; }
    auto begin() const noexcept { return indices_.begin(); }
    auto end() const noexcept { return indices_.end(); }
    const std::vector<std::size_t>& values() const noexcept { return indices_; }
    bool contains(std::size_t index) const;

    friend bool operator==(const IndexSet&, const IndexSet&) = default;

private:
    std::vector<std::size_t> indices_;
};

/// Multiply-add instrumentation. Every multiply-add performed by a counted
/// kernel adds 2 to `flops`.
struct FlopCounter {
    std::uint64_t flops = 0;
    void add_macs(std::uint64_t macs) noexcept { flops += 2 * macs; }
};

enum class SimilarityMetric { cosine, l1, l2, dot };
enum class TopKDirection { largest, smallest };

/// Dot product with 64-bit accumulation. The accumulation order depends only
/// on the length, so equal inputs always give bit-identical results.
double dot(std::span<const float> a, std::span<const float> b) noexcept;
double dot(std::span<const double> a, std::span<const float> b) noexcept;

double squared_norm(std::span<const float> a) noexcept;
double squared_norm(std::span<const double> a) noexcept;

/// Cosine similarity; 0 when either side has zero norm.
double cosine_similarity(std::span<const float> a, std::span<const float> b) noexcept;
double cosine_similarity(std::span<const float> a, std::span<const double> b) noexcept;

Matrix matmul(const Matrix& a, const Matrix& b, FlopCounter* counter = nullptr);

/// a · btᵀ, where `bt` holds the right operand transposed (out × in).
Matrix matmul_transposed(const Matrix& a, const Matrix& bt, FlopCounter* counter = nullptr);

Matrix layer_norm(const Matrix& x, std::span<const float> gamma, std::span<const float> beta, double eps);

Matrix softmax_rows(const Matrix& x);

/// Per-row similarity; l1/l2 return the negated distance so larger always
/// means more similar.
std::vector<double> rowwise_similarity(const Matrix& a, const Matrix& b, SimilarityMetric metric);

/// k extremal positions, ties resolved towards the lower index, returned ascending.
IndexSet top_k_indices(std::span<const double> scores, std::size_t k, TopKDirection direction);

Matrix gather_rows(const Matrix& x, const IndexSet& rows);

/// Overwrites `target[rows[i]]` with `source[i]`.
void scatter_rows(Matrix& target, const IndexSet& rows, const Matrix& source);

/// ⌊n·(1 − ratio)⌋ with a small guard against binary rounding of the ratio
/// (so 10·(1 − 0.9) yields 1, not 0).
std::size_t kept_count(std::size_t n, double drop_ratio);

/// Mean over rows, accumulated in 64 bits.
std::vector<double> column_mean(const Matrix& x);

}  // namespace stc
