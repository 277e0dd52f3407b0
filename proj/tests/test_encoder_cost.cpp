#include <cmath>

#include <gtest/gtest.h>

#include "sepatch/cost.hpp"
#include "sepatch/encoder.hpp"

using namespace sepatch;

namespace {

// One pre-norm block written out token by token.
Matrix naive_block(const Matrix& x, const BlockWeights& w, int heads) {
    const std::size_t n = x.rows(), c = x.cols(), dh = c / static_cast<std::size_t>(heads);
    auto ln = [&](const Matrix& in) {
        Matrix o(n, c);
        for (std::size_t i = 0; i < n; ++i) {
            double mu = 0, var = 0;
            for (std::size_t k = 0; k < c; ++k) mu += in(i, k) / static_cast<double>(c);
            for (std::size_t k = 0; k < c; ++k) var += (in(i, k) - mu) * (in(i, k) - mu) / static_cast<double>(c);
            for (std::size_t k = 0; k < c; ++k) o(i, k) = (in(i, k) - mu) / std::sqrt(var + 1e-6);
        }
        return o;
    };
    auto lin = [&](const Matrix& in, const Matrix& wm, const std::vector<double>& b) {
        Matrix o(in.rows(), wm.cols());
        for (std::size_t i = 0; i < in.rows(); ++i)
            for (std::size_t j = 0; j < wm.cols(); ++j) {
                double s = b[j];
                for (std::size_t k = 0; k < in.cols(); ++k) s += in(i, k) * wm(k, j);
                o(i, j) = s;
            }
        return o;
    };
    const Matrix a = ln(x);
    const Matrix q = lin(a, w.wq, w.bq), k = lin(a, w.wk, w.bk), v = lin(a, w.wv, w.bv);
    Matrix cat(n, c);
    for (int h = 0; h < heads; ++h) {
        const std::size_t off = static_cast<std::size_t>(h) * dh;
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> s(n);
            double mx = -INFINITY, z = 0;
            for (std::size_t j = 0; j < n; ++j) {
                double d = 0;
                for (std::size_t t = 0; t < dh; ++t) d += q(i, off + t) * k(j, off + t);
                s[j] = d / std::sqrt(static_cast<double>(dh));
                mx = std::max(mx, s[j]);
            }
            for (auto& e : s) z += (e = std::exp(e - mx));
            for (std::size_t j = 0; j < n; ++j)
                for (std::size_t t = 0; t < dh; ++t) cat(i, off + t) += s[j] / z * v(j, off + t);
        }
    }
    const Matrix y = add(x, lin(cat, w.wo, w.bo));
    Matrix hid = lin(ln(y), w.w1, w.b1);
    for (auto& e : hid.data()) e = 0.5 * e * (1 + std::erf(e / std::sqrt(2.0)));
    return add(y, lin(hid, w.w2, w.b2));
}

}  // namespace

TEST(Encoder, BlockMatchesNaiveImplementation) {
    for (int heads : {1, 2, 4}) {
        const EncoderConfig cfg{1, 16, heads, 2.0};
        const auto w = make_encoder_weights(cfg, 7);
        Rng rng(30);
        const Matrix x = rng.matrix(9, 16, -2, 2);
        const TokenSet out = encoder_forward({x, grid_for(48, 48, 16)}, cfg, w);
        const Matrix ref = naive_block(x, w.blocks[0], heads);
        for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(out.features.data()[i], ref.data()[i], 1e-10);
    }
}

TEST(Encoder, ZeroWeightsAreIdentity) {
    const EncoderConfig cfg{3, 8, 2, 4.0};
    Rng rng(31);
    const TokenSet t{rng.matrix(5, 8), grid_for(16, 80, 16)};
    EXPECT_EQ(encoder_forward(t, cfg, zero_encoder_weights(cfg)).features, t.features);
}

TEST(Encoder, DepthZeroAndEmptyTokens) {
    const EncoderConfig cfg{0, 8, 2, 4.0};
    Rng rng(32);
    const TokenSet t{rng.matrix(5, 8), grid_for(16, 80, 16)};
    EXPECT_EQ(encoder_forward(t, cfg, make_encoder_weights(cfg, 1)).features, t.features);
    const EncoderConfig one{1, 8, 2, 4.0};
    const TokenSet empty{Matrix(0, 8), {}};
    EXPECT_EQ(encoder_forward(empty, one, make_encoder_weights(one, 1)).features.rows(), 0u);
}

TEST(Encoder, PermutationEquivariant) {
    const EncoderConfig cfg{2, 8, 2, 2.0};
    const auto w = make_encoder_weights(cfg, 3);
    Rng rng(33);
    const Matrix x = rng.matrix(6, 8);
    const std::vector<std::size_t> perm{3, 0, 5, 1, 4, 2};
    const Matrix y = encoder_forward({x, {}}, cfg, w).features;
    const Matrix yp = encoder_forward({gather_rows(x, perm), {}}, cfg, w).features;
    const Matrix expect = gather_rows(y, perm);
    for (std::size_t i = 0; i < yp.size(); ++i) EXPECT_NEAR(yp.data()[i], expect.data()[i], 1e-12);
}

TEST(Encoder, ConfigErrors) {
    EXPECT_THROW((EncoderConfig{1, 10, 3, 4.0}.validate()), Error);
    EXPECT_THROW((EncoderConfig{1, 6, 2, 4.0}.validate()), Error);
    EXPECT_THROW((EncoderConfig{1, 8, 2, 0.0}.validate()), Error);
    const EncoderConfig cfg{1, 8, 2, 4.0};
    EXPECT_THROW(encoder_forward({Matrix(2, 4), {}}, cfg, make_encoder_weights(cfg, 0)), Error);
    EXPECT_THROW(encoder_forward({Matrix(2, 8), {}}, cfg, EncoderWeights{}), Error);
}

TEST(LayerNorm, ZeroMeanUnitVariance) {
    Rng rng(34);
    const Matrix y = layer_norm(rng.matrix(10, 32, -5, 5));
    for (std::size_t r = 0; r < 10; ++r) {
        double mu = 0, var = 0;
        for (double v : y.row(r)) mu += v / 32;
        for (double v : y.row(r)) var += (v - mu) * (v - mu) / 32;
        EXPECT_NEAR(mu, 0.0, 1e-12);
        EXPECT_NEAR(var, 1.0, 1e-5);
    }
    EXPECT_EQ(gelu(0.0), 0.0);
    EXPECT_NEAR(gelu(1.0), 0.8413447460685429, 1e-15);
}

TEST(Flops, HandComputedSmallCase) {
    // N=4, C=8, H=16, depth 2, M=3, K_f=2, K_c=1, no embedding term.
    SelectionMask m;
    m.fine_indices = {0, 1};
    m.coarse_indices = {0};
    const auto r = flops_estimate(4, EncoderConfig{2, 8, 2, 2.0}, m, 3);
    EXPECT_EQ(r.attention_flops, 2u * (4 * 4 * 64 + 2 * 16 * 8));
    EXPECT_EQ(r.attention_quadratic_flops, 2u * 2 * 16 * 8);
    EXPECT_EQ(r.mlp_flops, 2u * 2 * 4 * 8 * 16 * 2);
    EXPECT_EQ(r.enhancement_flops, 2u * 4 * 3 * 8 + 4 * 1 * 2 * 8);
    EXPECT_EQ(r.embedding_flops, 0u);
    EXPECT_EQ(r.total, r.attention_flops + r.mlp_flops + r.enhancement_flops);
}

TEST(Flops, EmbeddingTerm) {
    const auto r = flops_estimate(640, EncoderConfig{0, 256, 8, 4.0}, {}, 0, {1000, 20, 3});
    EXPECT_EQ(r.embedding_flops, 1000ull * 256 * 3 * 256 + 640ull * 400 * 3 * 256);
    EXPECT_EQ(r.encoder_flops(), 0u);
}

TEST(Flops, FullScaleRatios) {
    const EncoderConfig cfg{24, 256, 8, 4.0};
    const auto p16 = flops_estimate(grid_for(320, 800, 16).token_count(), cfg, {}, 0);
    const auto p20 = flops_estimate(grid_for(320, 800, 20).token_count(), cfg, {}, 0);
    // Exact integer closed forms.
    const unsigned long long c = 256, h = 1024, d = 24;
    auto enc = [&](unsigned long long n) { return d * (4 * n * c * c + 2 * n * n * c + 4 * n * c * h); };
    EXPECT_EQ(p16.encoder_flops(), enc(1000));
    EXPECT_EQ(p20.encoder_flops(), enc(640));
    EXPECT_EQ(p20.attention_quadratic_flops * 1000 * 1000, p16.attention_quadratic_flops * 640 * 640);
    EXPECT_EQ(p20.mlp_flops * 1000, p16.mlp_flops * 640);
    EXPECT_EQ((p20.attention_flops - p20.attention_quadratic_flops) * 1000,
              (p16.attention_flops - p16.attention_quadratic_flops) * 640);
}

TEST(Flops, MonotoneInTokensAndSelections) {
    const EncoderConfig cfg{2, 32, 4, 4.0};
    std::uint64_t prev = 0;
    for (std::uint64_t n = 1; n < 200; n += 7) {
        const auto t = flops_estimate(n, cfg, {}, 8).total;
        EXPECT_GT(t, prev);
        prev = t;
    }
    SelectionMask small, big;
    small.fine_indices = {1};
    small.coarse_indices = {1};
    big.fine_indices = {1, 2, 3};
    big.coarse_indices = {1, 2};
    EXPECT_LT(flops_estimate(50, cfg, small, 8).total, flops_estimate(50, cfg, big, 8).total);
}

TEST(Flops, AccumulatesFieldwise) {
    const EncoderConfig cfg{1, 8, 2, 4.0};
    FlopReport a = flops_estimate(10, cfg, {}, 2);
    const FlopReport b = flops_estimate(20, cfg, {}, 2);
    const auto total = a.total + b.total;
    a += b;
    EXPECT_EQ(a.total, total);
    EXPECT_EQ(a.mlp_flops, flops_estimate(10, cfg, {}, 2).mlp_flops + b.mlp_flops);
}

TEST(Flops, FullModelSavesComputeAtFullScale) {
    // 320x800 RGB, depth 24, C = 256, 900 queries, a typical selection size.
    const EncoderConfig cfg{24, 256, 8, 4.0};
    SelectionMask m;
    m.fine_indices.resize(500);
    m.coarse_indices.resize(300);
    const auto base = flops_estimate(1000, cfg, {}, 0, {0, 16, 3});
    const auto ours = flops_estimate(640, cfg, m, 900, {1000, 20, 3});
    EXPECT_EQ(base.embedding_flops, 1000ull * 256 * 3 * 256);
    EXPECT_LT(ours.total, base.total);
    EXPECT_LT(static_cast<double>(ours.total) / static_cast<double>(base.total), 0.65);
}
