#pragma once

// Dense double-precision linear algebra, small statistics helpers and the
// finite-difference harness. Every routine here has a fixed summation order
// so results are reproducible bit-for-bit across runs on one platform.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "sepatch/error.hpp"

namespace sepatch {

/// Row-major dense matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        detail::check(data_.size() == rows_ * cols_, "Matrix: data length ", data_.size(),
                      " does not match shape ", rows_, "x", cols_);
    }
    Matrix(std::initializer_list<std::initializer_list<double>> rows) {
        rows_ = rows.size();
        cols_ = rows_ == 0 ? 0 : rows.begin()->size();
        data_.reserve(rows_ * cols_);
        for (const auto& r : rows) {
            detail::check(r.size() == cols_, "Matrix: ragged initializer");
            data_.insert(data_.end(), r.begin(), r.end());
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {
inline void require_finite(const Matrix& m, const char* op) {
    check(m.all_finite(), op, ": produced a non-finite value");
}
}  // namespace detail

/// Seeded generator. Uses mt19937_64 (whose output sequence is fixed by the
/// standard) with our own real conversion, since std distributions are
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    std::uint64_t next_u64() { return engine_(); }
    /// Uniform integer in [lo, hi].
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(engine_() % span);
    }
    /// Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    Matrix matrix(std::size_t rows, std::size_t cols, double lo = -1.0, double hi = 1.0) {
        Matrix m(rows, cols);
        for (auto& v : m.data()) v = uniform(lo, hi);
        return m;
    }

private:
    std::mt19937_64 engine_;
};

inline Matrix transpose(const Matrix& m) {
    Matrix t(m.cols(), m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
    return t;
}

/// C = A * B. Each entry accumulates over k in increasing order.
inline Matrix matmul(const Matrix& a, const Matrix& b) {
    detail::check(a.cols() == b.rows(), "matmul: shape mismatch ", a.rows(), "x", a.cols(), " * ",
                  b.rows(), "x", b.cols());
    Matrix c(a.rows(), b.cols());
    const std::size_t n = b.cols();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double* out = c.data().data() + i * n;
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            const double* brow = b.data().data() + k * n;
            for (std::size_t j = 0; j < n; ++j) out[j] += aik * brow[j];
        }
    }
    detail::require_finite(c, "matmul");
    return c;
}

/// A * B^T without materializing the transpose.
inline Matrix matmul_bt(const Matrix& a, const Matrix& b) {
    detail::check(a.cols() == b.cols(), "matmul_bt: shape mismatch ", a.rows(), "x", a.cols(),
                  " * (", b.rows(), "x", b.cols(), ")^T");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto ai = a.row(i);
        for (std::size_t j = 0; j < b.rows(); ++j) {
            const auto bj = b.row(j);
            double s = 0.0;
            for (std::size_t k = 0; k < ai.size(); ++k) s += ai[k] * bj[k];
            c(i, j) = s;
        }
    }
    detail::require_finite(c, "matmul_bt");
    return c;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
    detail::check(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch ", a.rows(),
                  "x", a.cols(), " vs ", b.rows(), "x", b.cols());
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data()[i] += b.data()[i];
    return c;
}

inline Matrix scale(Matrix m, double s) {
    for (auto& v : m.data()) v *= s;
    return m;
}

/// Row-wise softmax with per-row max subtraction.
inline Matrix softmax_rows(const Matrix& m) {
    detail::check(!m.empty(), "softmax_rows: empty matrix");
    Matrix out(m.rows(), m.cols());
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto in = m.row(r);
        auto dst = out.row(r);
        const double mx = *std::max_element(in.begin(), in.end());
        double sum = 0.0;
        for (std::size_t c = 0; c < in.size(); ++c) {
            dst[c] = std::exp(in[c] - mx);
            sum += dst[c];
        }
        for (auto& v : dst) v /= sum;
    }
    detail::require_finite(out, "softmax_rows");
    return out;
}

/// Scales each row to unit Euclidean norm. All-zero rows are left as zeros.
inline Matrix l2_normalize_rows(const Matrix& m) {
    Matrix out = m;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        auto row = out.row(r);
        double sq = 0.0;
        for (double v : row) sq += v * v;
        if (sq == 0.0) continue;
        const double inv = 1.0 / std::sqrt(sq);
        for (auto& v : row) v *= inv;
    }
    return out;
}

/// Ordinary least-squares slope of `values` against the indices 0..n-1.
///
/// The numerator is accumulated over mirrored index pairs, sum over i < n/2 of
/// (x_{n-1-i} - xbar) * (y_{n-1-i} - y_i), which equals the usual
/// sum (x_i - xbar) * y_i but is exactly zero for a constant series.
inline double trend_slope(std::span<const double> values) {
    const std::size_t n = values.size();
    detail::check(n >= 2, "trend_slope: need at least 2 values, got ", n);
    const double xbar = 0.5 * static_cast<double>(n - 1);
    double num = 0.0;
    double sxx = 0.0;
    for (std::size_t i = 0; i < n / 2; ++i) {
        const double dx = static_cast<double>(n - 1 - i) - xbar;
        num += dx * (values[n - 1 - i] - values[i]);
        sxx += 2.0 * dx * dx;
    }
    return num / sxx;
}

// ---------------------------------------------------------------------------
// Symmetric solvers

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
inline std::vector<double> symmetric_eigenvalues(Matrix a, int max_sweeps = 100) {
    detail::check(a.rows() == a.cols(), "symmetric_eigenvalues: matrix is not square");
    const std::size_t n = a.rows();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                total += a(i, j) * a(i, j);
                if (i != j) off += a(i, j) * a(i, j);
            }
        if (off <= 1e-30 * total || off == 0.0) break;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(n);
    for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

/// Solves G X = B for symmetric positive definite G by Cholesky. Throws if G
/// is not numerically positive definite.
inline Matrix cholesky_solve(const Matrix& g, const Matrix& b) {
    detail::check(g.rows() == g.cols() && g.rows() == b.rows(), "cholesky_solve: shape mismatch ",
                  g.rows(), "x", g.cols(), " vs rhs ", b.rows(), "x", b.cols());
    const std::size_t n = g.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = g(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        detail::check(d > 0.0 && std::isfinite(d), "cholesky_solve: matrix is not positive definite");
        l(j, j) = std::sqrt(d);
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = g(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / l(j, j);
        }
    }
    Matrix x = b;
    for (std::size_t c = 0; c < b.cols(); ++c) {
        for (std::size_t i = 0; i < n; ++i) {
            double s = x(i, c);
            for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x(i, c);
            for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

// ---------------------------------------------------------------------------
// Bivariate polynomials

/// Coefficients c_ij of sum_{i+j<=d} c_ij x^i y^j, stored for i = 0..d and,
/// within each i, j = 0..d-i.
struct PolyCoeffs2D {
    int degree = 0;
    std::vector<double> coeffs;

    static std::size_t count_for(int degree) {
        return static_cast<std::size_t>((degree + 1) * (degree + 2) / 2);
    }

    explicit PolyCoeffs2D(int d = 0) : degree(d), coeffs(count_for(d), 0.0) {
        detail::check(d >= 0, "PolyCoeffs2D: negative degree");
    }

    std::size_t index(int i, int j) const {
        detail::check(i >= 0 && j >= 0 && i + j <= degree, "PolyCoeffs2D: exponent (", i, ", ", j,
                      ") outside degree ", degree);
        // Entries before block i: sum_{k<i} (d - k + 1).
        const int before = i * (degree + 1) - i * (i - 1) / 2;
        return static_cast<std::size_t>(before + j);
    }
    double& at(int i, int j) { return coeffs[index(i, j)]; }
    double at(int i, int j) const { return coeffs[index(i, j)]; }
};

inline double poly_eval_2d(const PolyCoeffs2D& c, double x, double y) {
    double sum = 0.0;
    double xi = 1.0;
    for (int i = 0; i <= c.degree; ++i) {
        double yj = 1.0;
        for (int j = 0; j <= c.degree - i; ++j) {
            sum += c.at(i, j) * xi * yj;
            yj *= y;
        }
        xi *= x;
    }
    return sum;
}

struct Sample3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

struct PolyFit {
    PolyCoeffs2D coeffs;
    /// Euclidean norm of the residual vector at the samples.
    double residual_norm = 0.0;
    /// Condition number of the (normalized) normal-equation matrix.
    double condition = 0.0;
};

inline constexpr double kMaxNormalCondition = 1e12;

/// Least-squares fit of a total-degree-d bivariate polynomial.
///
/// Inputs are centred and scaled before forming the normal equations, and the
/// solution is expanded back to raw monomials. The guard applies to the
/// condition number of the scaled normal matrix.
inline PolyFit polyfit_2d(std::span<const Sample3> samples, int degree) {
    detail::check(degree >= 0, "polyfit_2d: negative degree");
    const std::size_t m = PolyCoeffs2D::count_for(degree);
    detail::check(samples.size() >= m, "polyfit_2d: degree ", degree, " needs at least ", m,
                  " samples, got ", samples.size());

    auto centre = [&](auto field) {
        double lo = field(samples[0]), hi = lo;
        for (const auto& s : samples) {
            lo = std::min(lo, field(s));
            hi = std::max(hi, field(s));
        }
        const double mid = 0.5 * (lo + hi);
        const double half = 0.5 * (hi - lo);
        return std::pair{mid, half > 0.0 ? half : 1.0};
    };
    const auto [cx, sx] = centre([](const Sample3& s) { return s.x; });
    const auto [cy, sy] = centre([](const Sample3& s) { return s.y; });

    Matrix design(samples.size(), m);
    Matrix rhs(samples.size(), 1);
    for (std::size_t r = 0; r < samples.size(); ++r) {
        const double u = (samples[r].x - cx) / sx;
        const double v = (samples[r].y - cy) / sy;
        std::size_t col = 0;
        double ui = 1.0;
        for (int i = 0; i <= degree; ++i) {
            double vj = 1.0;
            for (int j = 0; j <= degree - i; ++j) {
                design(r, col++) = ui * vj;
                vj *= v;
            }
            ui *= u;
        }
        rhs(r, 0) = samples[r].z;
    }
    const Matrix at = transpose(design);
    const Matrix gram = matmul(at, design);
    const auto eig = symmetric_eigenvalues(gram);
    const double cond = eig.front() > 0.0 ? eig.back() / eig.front()
                                          : std::numeric_limits<double>::infinity();
    detail::check(cond <= kMaxNormalCondition,
                  "polyfit_2d: design matrix is rank deficient (normal-matrix condition ", cond,
                  " exceeds ", kMaxNormalCondition, ")");
    const Matrix scaled = cholesky_solve(gram, matmul(at, rhs));

    // Expand sum a_ij ((x-cx)/sx)^i ((y-cy)/sy)^j into raw monomials.
    auto binom = [](int n, int k) {
        double r = 1.0;
        for (int t = 1; t <= k; ++t) r = r * (n - k + t) / t;
        return r;
    };
    PolyCoeffs2D raw(degree);
    std::size_t col = 0;
    for (int i = 0; i <= degree; ++i) {
        for (int j = 0; j <= degree - i; ++j) {
            const double a = scaled(col++, 0) / (std::pow(sx, i) * std::pow(sy, j));
            for (int p = 0; p <= i; ++p)
                for (int q = 0; q <= j; ++q)
                    raw.at(p, q) += a * binom(i, p) * std::pow(-cx, i - p) * binom(j, q) *
                                    std::pow(-cy, j - q);
        }
    }

    double res = 0.0;
    for (const auto& s : samples) {
        const double e = poly_eval_2d(raw, s.x, s.y) - s.z;
        res += e * e;
    }
    return {std::move(raw), std::sqrt(res), cond};
}

// ---------------------------------------------------------------------------
// Gradient verification

inline constexpr double kDefaultFdStep = 1e-5;

/// Central-difference check of `analytic_grad` for the scalar function `f`
/// at `at`. Returns the max entrywise relative error, using the denominator
/// max(|analytic|, |numeric|, 1e-8).
inline double finite_diff_check(const std::function<double(const Matrix&)>& f,
                                const Matrix& analytic_grad, const Matrix& at,
                                double step = kDefaultFdStep) {
    detail::check(step > 0.0, "finite_diff_check: step must be positive");
    detail::check(analytic_grad.rows() == at.rows() && analytic_grad.cols() == at.cols(),
                  "finite_diff_check: gradient shape ", analytic_grad.rows(), "x",
                  analytic_grad.cols(), " does not match point ", at.rows(), "x", at.cols());
    Matrix probe = at;
    double worst = 0.0;
    for (std::size_t i = 0; i < probe.size(); ++i) {
        const double orig = probe.data()[i];
        probe.data()[i] = orig + step;
        const double fp = f(probe);
        probe.data()[i] = orig - step;
        const double fm = f(probe);
        probe.data()[i] = orig;
        detail::check(std::isfinite(fp) && std::isfinite(fm),
                      "finite_diff_check: non-finite function value at entry ", i);
        const double numeric = (fp - fm) / (2.0 * step);
        const double analytic = analytic_grad.data()[i];
        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return worst;
}

}  // namespace sepatch
