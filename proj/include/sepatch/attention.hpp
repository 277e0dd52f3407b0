#pragma once

// Projection-free scaled dot-product attention, softmax(Q K^T / sqrt(C)) V,
// and its reverse-mode gradient.

#include <cmath>

#include "sepatch/numerics.hpp"

namespace sepatch {

struct AttentionGrads {
    Matrix queries;
    Matrix keys;
    Matrix values;
};

/// `scale_dim` is the C in 1/sqrt(C); it defaults to the key width.
inline Matrix attention_weights(const Matrix& queries, const Matrix& keys, std::size_t scale_dim = 0) {
    detail::check(queries.cols() == keys.cols(), "attention: query width ", queries.cols(),
                  " does not match key width ", keys.cols());
    const double dim = static_cast<double>(scale_dim ? scale_dim : keys.cols());
    return softmax_rows(scale(matmul_bt(queries, keys), 1.0 / std::sqrt(dim)));
}

inline Matrix attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                        std::size_t scale_dim = 0) {
    detail::check(keys.rows() == values.rows(), "attention: ", keys.rows(), " keys but ",
                  values.rows(), " values");
    return matmul(attention_weights(queries, keys, scale_dim), values);
}

/// Gradients of <upstream, attention(Q, K, V)> with respect to Q, K and V.
inline AttentionGrads attention_backward(const Matrix& queries, const Matrix& keys,
                                         const Matrix& values, const Matrix& upstream,
                                         std::size_t scale_dim = 0) {
    detail::check(upstream.rows() == queries.rows() && upstream.cols() == values.cols(),
                  "attention_backward: upstream shape ", upstream.rows(), "x", upstream.cols(),
                  " does not match output ", queries.rows(), "x", values.cols());
    const double inv = 1.0 / std::sqrt(static_cast<double>(scale_dim ? scale_dim : keys.cols()));
    const Matrix w = attention_weights(queries, keys, scale_dim);

    AttentionGrads g;
    g.values = matmul(transpose(w), upstream);
    const Matrix dw = matmul_bt(upstream, values);

    // Softmax Jacobian per row: ds_ij = w_ij (dw_ij - sum_k w_ik dw_ik).
    Matrix ds(w.rows(), w.cols());
    for (std::size_t i = 0; i < w.rows(); ++i) {
        double dot = 0.0;
        for (std::size_t k = 0; k < w.cols(); ++k) dot += w(i, k) * dw(i, k);
        for (std::size_t j = 0; j < w.cols(); ++j) ds(i, j) = w(i, j) * (dw(i, j) - dot) * inv;
    }
    g.queries = matmul(ds, keys);
    g.keys = matmul(transpose(ds), queries);
    return g;
}

}  // namespace sepatch
