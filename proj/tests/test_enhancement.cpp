#include <cmath>
#include <sstream>

#include <gtest/gtest.h>

#include "sepatch/enhancement.hpp"
#include "sepatch/gradcheck.hpp"

using namespace sepatch;

namespace {

// Explicit loops for softmax(q k^T / sqrt(C)) v.
Matrix naive_attention(const Matrix& q, const Matrix& k, const Matrix& v) {
    Matrix out(q.rows(), v.cols());
    const double inv = 1.0 / std::sqrt(static_cast<double>(k.cols()));
    for (std::size_t i = 0; i < q.rows(); ++i) {
        std::vector<double> s(k.rows());
        double mx = -INFINITY;
        for (std::size_t j = 0; j < k.rows(); ++j) {
            double d = 0.0;
            for (std::size_t c = 0; c < q.cols(); ++c) d += q(i, c) * k(j, c);
            s[j] = d * inv;
            mx = std::max(mx, s[j]);
        }
        double z = 0.0;
        for (auto& x : s) z += (x = std::exp(x - mx));
        for (std::size_t j = 0; j < k.rows(); ++j)
            for (std::size_t c = 0; c < v.cols(); ++c) out(i, c) += s[j] / z * v(j, c);
    }
    return out;
}

double direct_entropy(std::span<const double> row) {
    double n2 = 0.0;
    for (double v : row) n2 += v * v;
    if (n2 == 0.0) return 0.0;
    double h = 0.0;
    for (double v : row) {
        const double p = std::max(v * v / n2, 1e-12);
        h -= p * std::log(p);
    }
    return h;
}

Vec3 homogeneous_apply(const RigidTransform& t, Vec3 p) {
    // Builds the 4x4 world-from-current matrix and inverts it by Gauss-Jordan.
    double m[4][8] = {};
    for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) m[r][c] = t.rotation[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
    m[0][3] = t.translation.x;
    m[1][3] = t.translation.y;
    m[2][3] = t.translation.z;
    m[3][3] = 1.0;
    for (int r = 0; r < 4; ++r) m[r][4 + r] = 1.0;
    for (int col = 0; col < 4; ++col) {
        int piv = col;
        for (int r = col + 1; r < 4; ++r)
            if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
        for (int c = 0; c < 8; ++c) std::swap(m[col][c], m[piv][c]);
        const double d = m[col][col];
        for (int c = 0; c < 8; ++c) m[col][c] /= d;
        for (int r = 0; r < 4; ++r)
            if (r != col) {
                const double f = m[r][col];
                for (int c = 0; c < 8; ++c) m[r][c] -= f * m[col][c];
            }
    }
    const double h[4] = {p.x, p.y, p.z, 1.0};
    double o[4] = {};
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) o[r] += m[r][4 + c] * h[c];
    return {o[0] / o[3], o[1] / o[3], o[2] / o[3]};
}

}  // namespace

TEST(Attention, MatchesNaiveLoops) {
    Rng rng(20);
    for (int t = 0; t < 50; ++t) {
        const auto n = static_cast<std::size_t>(rng.integer(1, 9));
        const auto m = static_cast<std::size_t>(rng.integer(1, 9));
        const auto c = static_cast<std::size_t>(rng.integer(1, 12));
        const Matrix q = rng.matrix(n, c, -3, 3), k = rng.matrix(m, c, -3, 3), v = rng.matrix(m, 5);
        const Matrix a = attention(q, k, v), b = naive_attention(q, k, v);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], 1e-12);
    }
}

TEST(Attention, ShapeErrors) {
    EXPECT_THROW(attention(Matrix(2, 3), Matrix(2, 4), Matrix(2, 4)), Error);
    EXPECT_THROW(attention(Matrix(2, 3), Matrix(2, 3), Matrix(3, 3)), Error);
    EXPECT_THROW(temporal_enhance(Matrix(2, 3), Matrix(0, 3)), Error);
}

TEST(Temporal, OutputsLieInQueryHull) {
    Rng rng(21);
    for (int t = 0; t < 300; ++t) {
        const auto c = static_cast<std::size_t>(rng.integer(1, 16));
        const Matrix p = rng.matrix(static_cast<std::size_t>(rng.integer(1, 10)), c, -4, 4);
        const Matrix q = rng.matrix(static_cast<std::size_t>(rng.integer(1, 10)), c, -4, 4);
        const Matrix f = temporal_enhance(p, q);
        for (std::size_t col = 0; col < c; ++col) {
            double lo = INFINITY, hi = -INFINITY;
            for (std::size_t j = 0; j < q.rows(); ++j) {
                lo = std::min(lo, q(j, col));
                hi = std::max(hi, q(j, col));
            }
            for (std::size_t i = 0; i < f.rows(); ++i) {
                EXPECT_GE(f(i, col), lo - 1e-12);
                EXPECT_LE(f(i, col), hi + 1e-12);
            }
        }
    }
}

TEST(Temporal, SingleQueryIsCopied) {
    Rng rng(22);
    const Matrix q = rng.matrix(1, 6);
    const Matrix f = temporal_enhance(rng.matrix(4, 6), q);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(f(i, c), q(0, c), 1e-15);
}

TEST(Entropy, ExamplesAndBounds) {
    const auto h = entropy_scores(Matrix{{1, 0, 0, 0}, {1, 1, 1, 1}, {0, 0, 0, 0}, {-2, 2, 0, 0}});
    // One-hot: only the eps-clamped zeros contribute.
    EXPECT_NEAR(h[0], 3 * 1e-12 * std::log(1e12), 1e-20);
    EXPECT_NEAR(h[1], std::log(4.0), 1e-14);
    EXPECT_EQ(h[2], 0.0);
    EXPECT_NEAR(h[3], std::log(2.0), 1e-10);
    Rng rng(23);
    const Matrix m = rng.matrix(100, 9, -5, 5);
    for (double v : entropy_scores(m)) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, std::log(9.0) + 1e-12);
    }
}

TEST(Entropy, ScaleInvariantAndMatchesDirectFormula) {
    Rng rng(24);
    for (int t = 0; t < 200; ++t) {
        const Matrix m = rng.matrix(static_cast<std::size_t>(rng.integer(1, 64)),
                                    static_cast<std::size_t>(rng.integer(1, 32)), -2, 2);
        const auto h = entropy_scores(m);
        const auto h2 = entropy_scores(scale(m, rng.uniform(0.01, 100)));
        for (std::size_t j = 0; j < m.rows(); ++j) {
            EXPECT_NEAR(h[j], direct_entropy(m.row(j)), 1e-10);
            EXPECT_NEAR(h[j], h2[j], 1e-10);
        }
    }
}

TEST(Select, StrictlyAboveMean) {
    const std::vector<double> e{1.0, 2.0, 3.0, 2.0};
    const auto m = adaptive_select(e);
    EXPECT_EQ(m.fine_indices, (std::vector<std::size_t>{2}));
    EXPECT_DOUBLE_EQ(m.mean_entropy, 2.0);
    const std::vector<double> flat(7, 0.4);
    EXPECT_TRUE(adaptive_select(flat).empty());
    EXPECT_THROW(adaptive_select(std::vector<double>{}), Error);
}

TEST(Select, BruteForceAgreementAndNonEmptyOnVariedInput) {
    Rng rng(25);
    for (int t = 0; t < 500; ++t) {
        std::vector<double> e(static_cast<std::size_t>(rng.integer(1, 64)));
        for (auto& v : e) v = rng.uniform(0, 3);
        double sum = 0.0;
        for (double v : e) sum += v;
        const double mean = sum / static_cast<double>(e.size());
        std::vector<std::size_t> expect;
        for (std::size_t j = 0; j < e.size(); ++j)
            if (e[j] > mean) expect.push_back(j);
        const auto m = adaptive_select(e);
        EXPECT_EQ(m.fine_indices, expect);
        const bool all_equal = std::all_of(e.begin(), e.end(), [&](double v) { return v == e[0]; });
        if (!all_equal) EXPECT_FALSE(m.empty());
    }
}

TEST(Select, ProjectionSortsAndDeduplicates) {
    const auto fine = grid_for(64, 64, 16), coarse = grid_for(64, 64, 32);
    SelectionMask m;
    m.fine_indices = {0, 1, 4, 5, 15};
    project_selection(m, fine, coarse);
    EXPECT_EQ(m.coarse_indices, (std::vector<std::size_t>{0, 3}));
}

TEST(Cgfe, ZeroFineValuesIsIdentity) {
    Rng rng(26);
    for (int t = 0; t < 50; ++t) {
        const auto c = static_cast<std::size_t>(rng.integer(1, 16));
        const Matrix fl = rng.matrix(static_cast<std::size_t>(rng.integer(1, 8)), c);
        const auto kf = static_cast<std::size_t>(rng.integer(1, 8));
        const Matrix out = cgfe(fl, Matrix(kf, c), rng.matrix(fl.rows(), c), rng.matrix(kf, c));
        EXPECT_EQ(out, fl);
    }
}

TEST(Cgfe, MatchesNaiveFormula) {
    Rng rng(27);
    const Matrix fl = rng.matrix(3, 8), fn = rng.matrix(5, 8), pl = rng.matrix(3, 8), pn = rng.matrix(5, 8);
    const Matrix ref = add(fl, naive_attention(add(fl, pl), add(fn, pn), fn));
    const Matrix out = cgfe(fl, fn, pl, pn);
    for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.data()[i], ref.data()[i], 1e-12);
}

TEST(Cgfe, EmptySelectionsAndShapeErrors) {
    EXPECT_THROW(cgfe(Matrix(0, 4), Matrix(2, 4), Matrix(0, 4), Matrix(2, 4)), Error);
    EXPECT_THROW(cgfe(Matrix(2, 4), Matrix(0, 4), Matrix(2, 4), Matrix(0, 4)), Error);
    EXPECT_THROW(cgfe(Matrix(2, 4), Matrix(2, 3), Matrix(2, 4), Matrix(2, 3)), Error);
    EXPECT_THROW(cgfe_grad(Matrix(2, 4), Matrix(2, 4), Matrix(2, 4), Matrix(2, 4), Matrix(3, 4)), Error);
}

TEST(Gradients, FiniteDifferencesAgree) {
    const auto rep = run_gradcheck({});
    EXPECT_EQ(rep.cases.size(), 80u);
    EXPECT_TRUE(rep.passed()) << "worst " << rep.worst();
}

TEST(Gradients, ZeroUpstreamGivesZeroGradients) {
    Rng rng(28);
    const Matrix p = rng.matrix(3, 4), q = rng.matrix(5, 4);
    const auto g = temporal_enhance_grad(p, q, Matrix(3, 4));
    for (double v : g.patches.data()) EXPECT_EQ(v, 0.0);
    for (double v : g.queries.data()) EXPECT_EQ(v, 0.0);
    GradcheckOptions o;
    o.zero_upstream = true;
    o.instances = 3;
    EXPECT_TRUE(run_gradcheck(o).passed());
}

TEST(Gradients, CorruptedGradientIsCaught) {
    GradcheckOptions o;
    o.corrupt = true;
    o.instances = 3;
    EXPECT_FALSE(run_gradcheck(o).passed());
}

TEST(Align, MatchesHomogeneousInverse) {
    Rng rng(29);
    for (int t = 0; t < 100; ++t) {
        const auto tr = RigidTransform::from_yaw(rng.uniform(-3.1, 3.1),
                                                 {rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-0.2, 0.2)});
        QuerySet prev{rng.matrix(4, 8), {}, {}};
        for (int i = 0; i < 4; ++i) {
            prev.positions.push_back({rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(0, 2)});
            prev.depths.push_back(horizontal_norm(prev.positions.back()));
        }
        const QuerySet cur = align_queries(prev, tr);
        EXPECT_EQ(cur.embeddings, prev.embeddings);
        cur.validate();
        for (std::size_t i = 0; i < 4; ++i) {
            const Vec3 ref = homogeneous_apply(tr, prev.positions[i]);
            EXPECT_NEAR(cur.positions[i].x, ref.x, 1e-9);
            EXPECT_NEAR(cur.positions[i].y, ref.y, 1e-9);
            EXPECT_NEAR(cur.positions[i].z, ref.z, 1e-9);
            const Vec3 back = tr.to_previous(cur.positions[i]);
            EXPECT_NEAR(back.x, prev.positions[i].x, 1e-9);
        }
    }
}

TEST(Align, PureForwardMotionShortensDepth) {
    QuerySet prev{Matrix(1, 4), {{10, 0, 0}}, {10}};
    const QuerySet cur = align_queries(prev, RigidTransform::from_yaw(0.0, {2, 0, 0}));
    EXPECT_DOUBLE_EQ(cur.depths[0], 8.0);
}

TEST(QuerySet, ValidationCatchesInconsistency) {
    QuerySet q{Matrix(2, 4), {{1, 0, 0}, {0, 3, 0}}, {1, 3}};
    EXPECT_NO_THROW(q.validate());
    q.depths[1] = 4;
    EXPECT_THROW(q.validate(), Error);
    q.depths.pop_back();
    EXPECT_THROW(q.validate(), Error);
}

TEST(MaskText, RoundTripAndErrors) {
    std::stringstream ss;
    write_mask_header(ss);
    const std::vector<MaskRecord> recs{{0, 0, {1, 2, 9}, {0, 3}}, {0, 1, {}, {}}, {4, 5, {7}, {7}}};
    for (const auto& r : recs) write_mask_record(ss, r);
    EXPECT_EQ(read_mask_records(ss), recs);
    std::stringstream bad("frame=0 view=0 fine=1\n");
    EXPECT_THROW(read_mask_records(bad), Error);
    std::stringstream bad2("frame=0 view=0 fine=a coarse=\n");
    EXPECT_THROW(read_mask_records(bad2), Error);
}
