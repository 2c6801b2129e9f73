#include "stc/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace stc {

Matrix::Matrix(std::size_t rows, std::size_t cols, float fill) : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("matrix data length " + std::to_string(data_.size()) + " does not match " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<float>> rows) : rows_(rows.size()) {
    cols_ = rows_ == 0 ? 0 : rows.begin()->size();
    data_.reserve(rows_ * cols_);
    for (const auto& r : rows) {
        if (r.size() != cols_) {
            throw ShapeError("ragged matrix literal");
        }
        data_.insert(data_.end(), r.begin(), r.end());
    }
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0f;
    }
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r) {
        for (std::size_t c = 0; c < cols_; ++c) {
            t(c, r) = (*this)(r, c);
        }
    }
    return t;
}

IndexSet::IndexSet(std::vector<std::size_t> indices) : indices_(std::move(indices)) {
    for (std::size_t i = 1; i < indices_.size(); ++i) {
        if (indices_[i - 1] >= indices_[i]) {
            throw ArgumentError("index set must be strictly ascending");
        }
    }
}

IndexSet IndexSet::all(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    IndexSet s;
    s.indices_ = std::move(v);
    return s;
}

bool IndexSet::contains(std::size_t index) const {
    return std::binary_search(indices_.begin(), indices_.end(), index);
}

namespace {

// Four independent accumulators combined in a fixed order.
template <typename A>
double dot_impl(const A* a, const float* b, std::size_t n) noexcept {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
        s1 += static_cast<double>(a[i + 1]) * static_cast<double>(b[i + 1]);
        s2 += static_cast<double>(a[i + 2]) * static_cast<double>(b[i + 2]);
        s3 += static_cast<double>(a[i + 3]) * static_cast<double>(b[i + 3]);
    }
    for (; i < n; ++i) {
        s0 += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    }
    return (s0 + s1) + (s2 + s3);
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
    }
}

double cosine_from(double dot_ab, double na, double nb) noexcept {
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return std::clamp(dot_ab / std::sqrt(na * nb), -1.0, 1.0);
}

}  // namespace

double dot(std::span<const float> a, std::span<const float> b) noexcept { return dot_impl(a.data(), b.data(), a.size()); }

double dot(std::span<const double> a, std::span<const float> b) noexcept { return dot_impl(a.data(), b.data(), a.size()); }

double squared_norm(std::span<const float> a) noexcept { return dot(a, a); }

double squared_norm(std::span<const double> a) noexcept {
    double s = 0.0;
    for (double v : a) {
        s += v * v;
    }
    return s;
}

double cosine_similarity(std::span<const float> a, std::span<const float> b) noexcept {
    return cosine_from(dot(a, b), squared_norm(a), squared_norm(b));
}

double cosine_similarity(std::span<const float> a, std::span<const double> b) noexcept {
    return cosine_from(dot(b, a), squared_norm(a), squared_norm(b));
}

Matrix matmul(const Matrix& a, const Matrix& b, FlopCounter* counter) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + ")");
    }
    return matmul_transposed(a, b.transposed(), counter);
}

Matrix matmul_transposed(const Matrix& a, const Matrix& bt, FlopCounter* counter) {
    if (a.cols() != bt.cols()) {
        throw ShapeError("matmul: inner dimensions differ (" + std::to_string(a.cols()) + " vs " +
                         std::to_string(bt.cols()) + ")");
    }
    Matrix out(a.rows(), bt.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto lhs = a.row(i);
        auto dst = out.row(i);
        for (std::size_t j = 0; j < bt.rows(); ++j) {
            dst[j] = static_cast<float>(dot(lhs, bt.row(j)));
        }
    }
    if (counter != nullptr) {
        counter->add_macs(static_cast<std::uint64_t>(a.rows()) * a.cols() * bt.rows());
    }
    return out;
}

Matrix layer_norm(const Matrix& x, std::span<const float> gamma, std::span<const float> beta, double eps) {
    if (gamma.size() != x.cols() || beta.size() != x.cols()) {
        throw ShapeError("layer_norm: affine parameters must have length " + std::to_string(x.cols()));
    }
    if (!(eps > 0.0)) {
        throw ArgumentError("layer_norm: eps must be positive");
    }
    Matrix out(x.rows(), x.cols());
    const double n = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        double mean = 0.0;
        for (float v : row) {
            mean += v;
        }
        mean /= n;
        double var = 0.0;
        for (float v : row) {
            const double d = v - mean;
            var += d * d;
        }
        var /= n;
        const double inv = 1.0 / std::sqrt(var + eps);
        auto dst = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            dst[c] = static_cast<float>((row[c] - mean) * inv * gamma[c] + beta[c]);
        }
    }
    return out;
}

Matrix softmax_rows(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    std::vector<double> e(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        if (row.empty()) {
            continue;
        }
        const float mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < row.size(); ++c) {
            e[c] = std::exp(static_cast<double>(row[c]) - mx);
            sum += e[c];
        }
        auto dst = out.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            dst[c] = static_cast<float>(e[c] / sum);
        }
    }
    return out;
}

std::vector<double> rowwise_similarity(const Matrix& a, const Matrix& b, SimilarityMetric metric) {
    require_same_shape(a, b, "rowwise_similarity");
    std::vector<double> out(a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto x = a.row(r);
        const auto y = b.row(r);
        switch (metric) {
            case SimilarityMetric::cosine:
                out[r] = cosine_similarity(x, y);
                break;
            case SimilarityMetric::dot:
                out[r] = dot(x, y);
                break;
            case SimilarityMetric::l1: {
                double s = 0.0;
                for (std::size_t c = 0; c < x.size(); ++c) {
                    s += std::abs(static_cast<double>(x[c]) - y[c]);
                }
                out[r] = -s;
                break;
            }
            case SimilarityMetric::l2: {
                double s = 0.0;
                for (std::size_t c = 0; c < x.size(); ++c) {
                    const double d = static_cast<double>(x[c]) - y[c];
                    s += d * d;
                }
                out[r] = -std::sqrt(s);
                break;
            }
        }
    }
    return out;
}

IndexSet top_k_indices(std::span<const double> scores, std::size_t k, TopKDirection direction) {
    if (k > scores.size()) {
        throw ArgumentError("top_k_indices: k=" + std::to_string(k) + " exceeds " + std::to_string(scores.size()) +
                            " scores");
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const bool largest = direction == TopKDirection::largest;
    auto before = [&](std::size_t i, std::size_t j) {
        if (scores[i] != scores[j]) {
            return largest ? scores[i] > scores[j] : scores[i] < scores[j];
        }
        return i < j;
    };
    if (k < order.size()) {
        std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(), before);
    }
    order.resize(k);
    std::sort(order.begin(), order.end());
    return IndexSet(std::move(order));
}

Matrix gather_rows(const Matrix& x, const IndexSet& rows) {
    Matrix out(rows.size(), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= x.rows()) {
            throw ArgumentError("gather_rows: index " + std::to_string(rows[i]) + " out of range");
        }
        std::copy_n(x.row(rows[i]).begin(), x.cols(), out.row(i).begin());
    }
    return out;
}

void scatter_rows(Matrix& target, const IndexSet& rows, const Matrix& source) {
    if (source.rows() != rows.size() || source.cols() != target.cols()) {
        throw ShapeError("scatter_rows: source shape does not match index set");
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= target.rows()) {
            throw ArgumentError("scatter_rows: index " + std::to_string(rows[i]) + " out of range");
        }
        std::copy_n(source.row(i).begin(), source.cols(), target.row(rows[i]).begin());
    }
}

std::size_t kept_count(std::size_t n, double drop_ratio) {
    const double kept = static_cast<double>(n) * (1.0 - drop_ratio);
    const double guarded = std::floor(kept + 1e-9);
    return static_cast<std::size_t>(std::clamp(guarded, 0.0, static_cast<double>(n)));
}

std::vector<double> column_mean(const Matrix& x) {
    std::vector<double> mean(x.cols(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto row = x.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            mean[c] += row[c];
        }
    }
    if (x.rows() > 0) {
        for (double& m : mean) {
            m /= static_cast<double>(x.rows());
        }
    }
    return mean;
}

}  // namespace stc
