// Independent reference implementations used only by tests. Everything here
// is written straight from the definitions in double precision and shares no
// code path with the library kernels.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <vector>

#include "stc/numerics.hpp"
#include "stc/vit.hpp"

namespace stc::oracle {

using Dense = std::vector<std::vector<double>>;

inline Dense to_dense(const Matrix& m) {
    Dense d(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) d[r][c] = m(r, c);
    return d;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    Matrix m(rows, cols);
    for (float& v : m.data()) v = static_cast<float>(n(rng));
    return m;
}

/// Naive i-j-p triple loop.
inline Dense matmul(const Dense& a, const Dense& b) {
    Dense out(a.size(), std::vector<double>(b.empty() ? 0 : b[0].size(), 0.0));
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < out[i].size(); ++j)
            for (std::size_t p = 0; p < b.size(); ++p) out[i][j] += a[i][p] * b[p][j];
    return out;
}

/// x · Wᵀ for W stored out × in.
inline std::vector<double> project(const std::vector<double>& x, const Matrix& w) {
    std::vector<double> y(w.rows(), 0.0);
    for (std::size_t o = 0; o < w.rows(); ++o)
        for (std::size_t i = 0; i < w.cols(); ++i) y[o] += x[i] * w(o, i);
    return y;
}

/// Two-pass mean / variance.
inline std::vector<double> layer_norm(const std::vector<double>& x, const std::vector<float>& gamma,
                                      const std::vector<float>& beta, double eps) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : x) var += (v - mean) * (v - mean);
    var /= n;
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = (x[i] - mean) / std::sqrt(var + eps) * gamma[i] + beta[i];
    return y;
}

inline std::vector<long double> softmax(const std::vector<long double>& x) {
    const long double mx = *std::max_element(x.begin(), x.end());
    std::vector<long double> e(x.size());
    long double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (e[i] = std::exp(x[i] - mx));
    for (auto& v : e) v /= s;
    return e;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

/// Multi-head attention output for one query row against dense K and V.
inline std::vector<double> attention_row(const std::vector<double>& q, const Dense& k, const Dense& v,
                                         std::size_t heads) {
    const std::size_t d = q.size();
    const std::size_t hd = d / heads;
    std::vector<double> out(d, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
        std::vector<long double> s(k.size());
        for (std::size_t j = 0; j < k.size(); ++j) {
            long double acc = 0;
            for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) acc += q[c] * k[j][c];
            s[j] = acc / std::sqrt(static_cast<long double>(hd));
        }
        const auto p = softmax(s);
        for (std::size_t c = h * hd; c < (h + 1) * hd; ++c) {
            long double acc = 0;
            for (std::size_t j = 0; j < k.size(); ++j) acc += p[j] * v[j][c];
            out[c] = static_cast<double>(acc);
        }
    }
    return out;
}

inline std::vector<double> mlp_row(const LayerWeights& w, const EncoderConfig& cfg, const std::vector<double>& a) {
    auto h = project(layer_norm(a, w.ln2_gamma, w.ln2_beta, cfg.ln_eps), w.w1);
    for (double& v : h) v = gelu(v);
    auto out = project(h, w.w2);
    for (std::size_t c = 0; c < out.size(); ++c) out[c] += a[c];
    return out;
}

/// One pre-norm block with values taken from `values_override` where given
/// (rows with an empty vector use the fresh value projection). Returns the
/// block output rows for `query_rows`.
inline Dense layer_rows(const LayerWeights& w, const EncoderConfig& cfg, const Dense& x,
                        const std::vector<std::size_t>& query_rows, const Dense* value_rows_from_cache = nullptr,
                        const std::vector<bool>* use_fresh_value = nullptr) {
    Dense normed(x.size()), k(x.size()), v(x.size());
    for (std::size_t r = 0; r < x.size(); ++r) {
        normed[r] = layer_norm(x[r], w.ln1_gamma, w.ln1_beta, cfg.ln_eps);
        k[r] = project(normed[r], w.wk);
        const bool fresh = use_fresh_value == nullptr || (*use_fresh_value)[r];
        v[r] = fresh ? project(normed[r], w.wv) : (*value_rows_from_cache)[r];
    }
    Dense out;
    for (std::size_t r : query_rows) {
        const auto q = project(normed[r], w.wq);
        auto attn = project(attention_row(q, k, v, cfg.num_heads), w.wo);
        for (std::size_t c = 0; c < attn.size(); ++c) attn[c] += x[r][c];
        out.push_back(mlp_row(w, cfg, attn));
    }
    return out;
}

inline Dense forward(const Encoder& enc, const Matrix& frame) {
    Dense x = to_dense(frame);
    std::vector<std::size_t> all(x.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    for (const auto& w : enc.layers()) x = layer_rows(w, enc.config(), x, all);
    return x;
}

/// First k of a stable sort by (score desc/asc, index asc), returned ascending.
inline std::vector<std::size_t> stable_top_k(const std::vector<double>& scores, std::size_t k, bool largest) {
    std::vector<std::size_t> idx(scores.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return largest ? scores[a] > scores[b] : scores[a] < scores[b];
    });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return d / std::sqrt(na * nb);
}

/// Dual-anchor scores straight from the definition.
inline std::vector<double> pruner_scores(const Matrix& tokens, const std::vector<std::vector<double>>& history,
                                         double alpha) {
    const Dense z = to_dense(tokens);
    std::vector<double> spatial(tokens.cols(), 0.0);
    for (const auto& row : z)
        for (std::size_t c = 0; c < row.size(); ++c) spatial[c] += row[c] / static_cast<double>(z.size());
    std::vector<double> temporal = spatial;
    if (!history.empty()) {
        std::fill(temporal.begin(), temporal.end(), 0.0);
        for (const auto& h : history)
            for (std::size_t c = 0; c < h.size(); ++c) temporal[c] += h[c] / static_cast<double>(history.size());
    }
    std::vector<double> s;
    for (const auto& row : z) s.push_back(alpha * (1 - cosine(row, temporal)) + (1 - alpha) * (1 - cosine(row, spatial)));
    return s;
}

/// Relative Frobenius error ‖a − b‖ / ‖b‖.
inline double relative_error(const Matrix& a, const Matrix& b) {
    double num = 0, den = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.data()[i]) - b.data()[i];
        num += d * d;
        den += static_cast<double>(b.data()[i]) * b.data()[i];
    }
    return den == 0 ? std::sqrt(num) : std::sqrt(num / den);
}

}  // namespace stc::oracle
