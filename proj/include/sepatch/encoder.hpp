#pragma once

// Toy ViT encoder with seeded weights. Each block is pre-norm:
//
//   y = x + MHA(LN(x))
//   z = y + W2 GELU(W1 LN(y) + b1) + b2
//
// LN has no affine parameters (eps 1e-6); MHA uses per-head scaled dot-product
// attention with input projections Wq, Wk, Wv and output projection Wo.

#include <cmath>
#include <cstdint>
#include <vector>

#include "sepatch/attention.hpp"
#include "sepatch/embedding.hpp"
#include "sepatch/numerics.hpp"

namespace sepatch {

struct EncoderConfig {
    int depth = 2;
    std::size_t dim = 256;
    int heads = 8;
    double mlp_ratio = 4.0;

    std::size_t hidden() const { return static_cast<std::size_t>(std::lround(mlp_ratio * static_cast<double>(dim))); }

    void validate() const {
        detail::check(depth >= 0, "encoder: depth must be >= 0, got ", depth);
        detail::check(heads >= 1, "encoder: heads must be >= 1, got ", heads);
        detail::check(dim > 0 && dim % static_cast<std::size_t>(heads) == 0, "encoder: C=", dim,
                      " is not divisible by heads=", heads);
        detail::check(dim % 4 == 0, "encoder: C=", dim, " must be divisible by 4");
        detail::check(mlp_ratio > 0.0, "encoder: mlp_ratio must be positive");
    }
};

struct BlockWeights {
    Matrix wq, wk, wv, wo;  // C x C
    std::vector<double> bq, bk, bv, bo;
    Matrix w1;  // C x hidden
    std::vector<double> b1;
    Matrix w2;  // hidden x C
    std::vector<double> b2;
};

struct EncoderWeights {
    std::vector<BlockWeights> blocks;
};

inline EncoderWeights make_encoder_weights(const EncoderConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const std::size_t c = cfg.dim;
    const std::size_t h = cfg.hidden();
    auto mat = [&](std::size_t r, std::size_t k) {
        const double b = 1.0 / std::sqrt(static_cast<double>(r));
        return rng.matrix(r, k, -b, b);
    };
    auto vec = [&](std::size_t n, std::size_t fan_in) {
        const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::vector<double> v(n);
        for (auto& x : v) x = rng.uniform(-b, b);
        return v;
    };
    EncoderWeights w;
    for (int i = 0; i < cfg.depth; ++i) {
        BlockWeights bw;
        bw.wq = mat(c, c);
        bw.wk = mat(c, c);
        bw.wv = mat(c, c);
        bw.wo = mat(c, c);
        bw.bq = vec(c, c);
        bw.bk = vec(c, c);
        bw.bv = vec(c, c);
        bw.bo = vec(c, c);
        bw.w1 = mat(c, h);
        bw.b1 = vec(h, c);
        bw.w2 = mat(h, c);
        bw.b2 = vec(c, h);
        w.blocks.push_back(std::move(bw));
    }
    return w;
}

/// All-zero weights with the shapes implied by `cfg`.
inline EncoderWeights zero_encoder_weights(const EncoderConfig& cfg) {
    cfg.validate();
    const std::size_t c = cfg.dim, h = cfg.hidden();
    EncoderWeights w;
    for (int i = 0; i < cfg.depth; ++i)
        w.blocks.push_back({Matrix(c, c), Matrix(c, c), Matrix(c, c), Matrix(c, c), std::vector<double>(c),
                            std::vector<double>(c), std::vector<double>(c), std::vector<double>(c), Matrix(c, h),
                            std::vector<double>(h), Matrix(h, c), std::vector<double>(c)});
    return w;
}

inline constexpr double kLayerNormEps = 1e-6;

inline Matrix layer_norm(const Matrix& x) {
    Matrix out(x.rows(), x.cols());
    const double n = static_cast<double>(x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const auto in = x.row(r);
        double mean = 0.0;
        for (double v : in) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : in) var += (v - mean) * (v - mean);
        var /= n;
        const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
        auto dst = out.row(r);
        for (std::size_t c = 0; c < in.size(); ++c) dst[c] = (in[c] - mean) * inv;
    }
    return out;
}

inline double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

inline Matrix affine(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
    Matrix y = matmul(x, w);
    for (std::size_t r = 0; r < y.rows(); ++r) {
        auto row = y.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) row[c] += b[c];
    }
    return y;
}

inline Matrix column_slice(const Matrix& m, std::size_t begin, std::size_t width) {
    Matrix out(m.rows(), width);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < width; ++c) out(r, c) = m(r, begin + c);
    return out;
}

inline Matrix multi_head_attention(const Matrix& x, const BlockWeights& w, int heads) {
    const Matrix q = affine(x, w.wq, w.bq);
    const Matrix k = affine(x, w.wk, w.bk);
    const Matrix v = affine(x, w.wv, w.bv);
    const std::size_t dh = x.cols() / static_cast<std::size_t>(heads);
    Matrix concat(x.rows(), x.cols());
    for (int h = 0; h < heads; ++h) {
        const std::size_t off = static_cast<std::size_t>(h) * dh;
        const Matrix o = attention(column_slice(q, off, dh), column_slice(k, off, dh), column_slice(v, off, dh));
        for (std::size_t r = 0; r < o.rows(); ++r)
            for (std::size_t c = 0; c < dh; ++c) concat(r, off + c) = o(r, c);
    }
    return affine(concat, w.wo, w.bo);
}

inline Matrix encoder_block(const Matrix& x, const BlockWeights& w, int heads) {
    const Matrix y = add(x, multi_head_attention(layer_norm(x), w, heads));
    Matrix hidden = affine(layer_norm(y), w.w1, w.b1);
    for (auto& v : hidden.data()) v = gelu(v);
    return add(y, affine(hidden, w.w2, w.b2));
}

inline TokenSet encoder_forward(const TokenSet& tokens, const EncoderConfig& cfg, const EncoderWeights& weights) {
    cfg.validate();
    detail::check(tokens.features.cols() == cfg.dim, "encoder_forward: token width ", tokens.features.cols(),
                  " does not match C=", cfg.dim);
    detail::check(weights.blocks.size() == static_cast<std::size_t>(cfg.depth), "encoder_forward: ",
                  weights.blocks.size(), " weight blocks for depth ", cfg.depth);
    TokenSet out = tokens;
    if (out.features.rows() == 0) return out;
    for (const auto& block : weights.blocks) out.features = encoder_block(out.features, block, cfg.heads);
    return out;
}

}  // namespace sepatch
