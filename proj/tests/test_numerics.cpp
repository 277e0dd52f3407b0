#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "sepatch/numerics.hpp"

using namespace sepatch;

namespace {

// Reference product with an explicit (i, j, k) triple loop.
Matrix naive_matmul(const Matrix& a, const Matrix& b) {
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.cols(); ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
            c(i, j) = s;
        }
    return c;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

// Textbook OLS slope, n*Sxy - Sx*Sy over n*Sxx - Sx^2.
double textbook_slope(const std::vector<double>& y) {
    const double n = static_cast<double>(y.size());
    double sx = 0, sy = 0, sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        sx += i;
        sy += y[i];
        sxy += i * y[i];
        sxx += static_cast<double>(i * i);
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TEST(Matmul, IdentityAndHandArithmetic) {
    Rng rng(1);
    const Matrix m = rng.matrix(3, 4);
    EXPECT_EQ(matmul(Matrix::identity(3), m), m);
    const Matrix r = matmul(Matrix{{1, 2}, {3, 4}}, Matrix{{0}, {1}});
    EXPECT_EQ(r, (Matrix{{2}, {4}}));
}

TEST(Matmul, MatchesTripleLoop) {
    Rng rng(2);
    const Matrix a = rng.matrix(5, 7), b = rng.matrix(7, 3);
    // Same accumulation order, so the match is exact.
    EXPECT_EQ(matmul(a, b), naive_matmul(a, b));
    EXPECT_EQ(matmul_bt(a, transpose(b)), naive_matmul(a, b));
}

TEST(Matmul, RejectsShapeMismatchNamingBothShapes) {
    try {
        matmul(Matrix(2, 3), Matrix(4, 2));
        FAIL();
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos);
        EXPECT_NE(msg.find("4x2"), std::string::npos);
    }
}

TEST(Matmul, AssociativeOnRandomTriples) {
    Rng rng(3);
    for (int t = 0; t < 50; ++t) {
        const auto n = static_cast<std::size_t>(rng.integer(1, 6));
        const auto k = static_cast<std::size_t>(rng.integer(1, 6));
        const auto l = static_cast<std::size_t>(rng.integer(1, 6));
        const auto m = static_cast<std::size_t>(rng.integer(1, 6));
        const Matrix a = rng.matrix(n, k), b = rng.matrix(k, l), c = rng.matrix(l, m);
        const Matrix left = matmul(matmul(a, b), c), right = matmul(a, matmul(b, c));
        for (std::size_t i = 0; i < left.size(); ++i)
            EXPECT_LE(std::abs(left.data()[i] - right.data()[i]), 1e-9 * std::max(1.0, std::abs(right.data()[i])));
    }
}

TEST(Softmax, Examples) {
    EXPECT_EQ(softmax_rows(Matrix{{0, 0}}), (Matrix{{0.5, 0.5}}));
    for (double x : {-1e6, -3.5, 0.0, 42.0, 1e6}) {
        const Matrix s = softmax_rows(Matrix{{x, x, x}});
        for (double v : s.data()) EXPECT_NEAR(v, 1.0 / 3.0, 1e-15);
    }
    const Matrix big = softmax_rows(Matrix{{1000, 1001}});
    const Matrix small = softmax_rows(Matrix{{0, 1}});
    ASSERT_TRUE(big.all_finite());
    EXPECT_NEAR(big(0, 0), small(0, 0), 1e-15);
    EXPECT_NEAR(big(0, 1), small(0, 1), 1e-15);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
    Rng rng(4);
    for (int t = 0; t < 200; ++t) {
        const Matrix m = rng.matrix(static_cast<std::size_t>(rng.integer(1, 6)),
                                    static_cast<std::size_t>(rng.integer(1, 9)), -50, 50);
        Matrix shifted = m;
        for (std::size_t r = 0; r < m.rows(); ++r) {
            const double c = rng.uniform(-100, 100);
            for (auto& v : shifted.row(r)) v += c;
        }
        const Matrix s = softmax_rows(m), s2 = softmax_rows(shifted);
        for (std::size_t r = 0; r < m.rows(); ++r) {
            double sum = 0.0;
            for (double v : s.row(r)) sum += v;
            EXPECT_NEAR(sum, 1.0, 1e-12);
            const auto a = std::max_element(m.row(r).begin(), m.row(r).end()) - m.row(r).begin();
            const auto b = std::max_element(s2.row(r).begin(), s2.row(r).end()) - s2.row(r).begin();
            EXPECT_EQ(a, b);
        }
        EXPECT_LE(max_abs_diff(s, s2), 1e-12);
    }
}

TEST(L2Normalize, ExamplesAndIdempotence) {
    const Matrix n = l2_normalize_rows(Matrix{{3, 4}, {0, 0}});
    EXPECT_NEAR(n(0, 0), 0.6, 1e-15);
    EXPECT_NEAR(n(0, 1), 0.8, 1e-15);
    EXPECT_EQ(n(1, 0), 0.0);
    EXPECT_EQ(n(1, 1), 0.0);

    Rng rng(5);
    const Matrix m = rng.matrix(20, 7, -10, 10);
    const Matrix once = l2_normalize_rows(m);
    for (std::size_t r = 0; r < once.rows(); ++r) {
        double sq = 0.0;
        for (double v : once.row(r)) sq += v * v;
        EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-12);
    }
    EXPECT_LE(max_abs_diff(once, l2_normalize_rows(once)), 1e-12);
}

TEST(TrendSlope, Examples) {
    const std::vector<double> flat{5, 5, 5}, line{1, 2, 3, 4}, noisy{0.2, 0.5, 0.3, 0.8};
    EXPECT_EQ(trend_slope(flat), 0.0);
    EXPECT_NEAR(trend_slope(line), 1.0, 1e-15);
    // Hand computation: xbar = 1.5, Sxx = 5, Sxy = 0.8.
    EXPECT_NEAR(trend_slope(noisy), 0.16, 1e-15);
    EXPECT_THROW(trend_slope(std::vector<double>{1.0}), Error);
}

TEST(TrendSlope, MatchesTextbookFormulaAndIsAffineEquivariant) {
    Rng rng(6);
    for (int t = 0; t < 200; ++t) {
        std::vector<double> y(static_cast<std::size_t>(rng.integer(2, 12)));
        for (auto& v : y) v = rng.uniform(-5, 5);
        const double s = trend_slope(y);
        EXPECT_NEAR(s, textbook_slope(y), 1e-12);
        const double c = rng.uniform(-10, 10), k = rng.uniform(0.1, 4);
        std::vector<double> shifted = y, scaled = y;
        for (auto& v : shifted) v += c;
        for (auto& v : scaled) v *= k;
        EXPECT_NEAR(trend_slope(shifted), s, 1e-12);
        EXPECT_NEAR(trend_slope(scaled), k * s, 1e-12);
    }
}

TEST(Eigen, SymmetricEigenvaluesOfKnownMatrix) {
    // [[2,1],[1,2]] has eigenvalues 1 and 3.
    const auto e = symmetric_eigenvalues(Matrix{{2, 1}, {1, 2}});
    EXPECT_NEAR(e[0], 1.0, 1e-14);
    EXPECT_NEAR(e[1], 3.0, 1e-14);
}

TEST(Cholesky, SolvesSpdSystem) {
    Rng rng(7);
    const Matrix a = rng.matrix(6, 6);
    Matrix g = matmul(transpose(a), a);
    for (std::size_t i = 0; i < 6; ++i) g(i, i) += 1.0;
    const Matrix x = rng.matrix(6, 2);
    EXPECT_LE(max_abs_diff(cholesky_solve(g, matmul(g, x)), x), 1e-10);
    EXPECT_THROW(cholesky_solve(Matrix{{1, 2}, {2, 1}}, Matrix(2, 1)), Error);
}

TEST(Poly, EvalBasics) {
    PolyCoeffs2D zero(2);
    EXPECT_EQ(poly_eval_2d(zero, 3.0, -2.0), 0.0);
    PolyCoeffs2D c(3);
    c.at(0, 0) = 7.0;
    EXPECT_EQ(poly_eval_2d(c, 11.0, -4.5), 7.0);
    EXPECT_EQ(c.coeffs.size(), 10u);
    PolyCoeffs2D q(2);
    q.at(1, 1) = 2.0;
    q.at(0, 2) = -1.0;
    EXPECT_DOUBLE_EQ(poly_eval_2d(q, 3.0, 2.0), 2.0 * 3 * 2 - 4.0);
}

TEST(Poly, FitInterpolatesExactPolynomials) {
    // Six non-degenerate points on z = x + 2y.
    const std::vector<Sample3> lin{{0, 0, 0}, {1, 0, 1}, {0, 1, 2}, {2, 1, 4}, {1, 3, 7}, {3, 2, 7}};
    const auto f = polyfit_2d(lin, 2);
    EXPECT_LT(f.residual_norm, 1e-9);
    for (const auto& s : lin) EXPECT_NEAR(poly_eval_2d(f.coeffs, s.x, s.y), s.z, 1e-8);

    std::vector<Sample3> sq;
    for (int x = -2; x <= 2; ++x)
        for (int y = 0; y <= 2; ++y) sq.push_back({double(x), double(y), double(x * x)});
    const auto g = polyfit_2d(sq, 2);
    EXPECT_NEAR(g.coeffs.at(2, 0), 1.0, 1e-9);
    EXPECT_NEAR(g.coeffs.at(0, 0), 0.0, 1e-9);
}

TEST(Poly, FitOnRandomMinimalSetsInterpolates) {
    Rng rng(8);
    for (int d = 0; d <= 3; ++d)
        for (int t = 0; t < 20; ++t) {
            std::vector<Sample3> s(PolyCoeffs2D::count_for(d));
            for (auto& p : s) p = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-5, 5)};
            const auto f = polyfit_2d(s, d);
            for (const auto& p : s) EXPECT_NEAR(poly_eval_2d(f.coeffs, p.x, p.y), p.z, 1e-8);
        }
}

TEST(Poly, NoisyFitIsLocallyOptimal) {
    Rng rng(9);
    std::vector<Sample3> s;
    for (int i = 0; i < 30; ++i) {
        const double x = rng.uniform(0, 4), y = rng.uniform(0, 4);
        s.push_back({x, y, 1.0 + 0.5 * x - y + 0.25 * x * y + rng.normal() * 0.1});
    }
    const auto f = polyfit_2d(s, 2);
    auto residual = [&](const PolyCoeffs2D& c) {
        double r = 0.0;
        for (const auto& p : s) r += std::pow(poly_eval_2d(c, p.x, p.y) - p.z, 2);
        return std::sqrt(r);
    };
    EXPECT_NEAR(residual(f.coeffs), f.residual_norm, 1e-12);
    for (std::size_t k = 0; k < f.coeffs.coeffs.size(); ++k)
        for (double delta : {-1e-3, 1e-3}) {
            PolyCoeffs2D p = f.coeffs;
            p.coeffs[k] += delta;
            EXPECT_GE(residual(p), f.residual_norm);
        }
}

TEST(Poly, RejectsUnderdeterminedAndDegenerate) {
    const std::vector<Sample3> five{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}, {2, 0, 0}};
    EXPECT_THROW(polyfit_2d(five, 2), Error);
    // All samples on the line y = x: rank deficient for degree 1.
    const std::vector<Sample3> line{{0, 0, 1}, {1, 1, 2}, {2, 2, 3}, {3, 3, 4}};
    try {
        polyfit_2d(line, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("condition"), std::string::npos);
    }
}

TEST(FiniteDiff, HarnessExamples) {
    Rng rng(10);
    const Matrix at = rng.matrix(3, 4);
    auto sum = [](const Matrix& m) {
        double s = 0.0;
        for (double v : m.data()) s += v;
        return s;
    };
    EXPECT_LT(finite_diff_check(sum, Matrix(3, 4, 1.0), at), 1e-10);
    auto half_sq = [](const Matrix& m) {
        double s = 0.0;
        for (double v : m.data()) s += 0.5 * v * v;
        return s;
    };
    EXPECT_LT(finite_diff_check(half_sq, at, at), 1e-8);
    EXPECT_GT(finite_diff_check(half_sq, scale(at, 2.0), at), 0.1);
    EXPECT_THROW(finite_diff_check([](const Matrix&) { return NAN; }, at, at), Error);
    EXPECT_THROW(finite_diff_check(sum, at, at, 0.0), Error);
}
