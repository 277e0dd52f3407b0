#pragma once

// Finite-difference verification of the temporal and cross-granularity
// attention gradients on seeded random instances.

#include <cstdint>
#include <string>
#include <vector>

#include "sepatch/enhancement.hpp"
#include "sepatch/numerics.hpp"

namespace sepatch {

inline constexpr double kGradTolerance = 1e-4;

struct GradCase {
    std::string name;
    std::uint64_t instance = 0;
    double max_rel_error = 0.0;
};

struct GradcheckReport {
    std::vector<GradCase> cases;

    double worst() const {
        double w = 0.0;
        for (const auto& c : cases) w = std::max(w, c.max_rel_error);
        return w;
    }
    bool passed(double tol = kGradTolerance) const { return worst() <= tol; }
};

struct GradcheckOptions {
    std::uint64_t seed = 2024;
    int instances = 20;
    /// Perturbs one analytic gradient entry; used to prove the harness bites.
    bool corrupt = false;
    bool zero_upstream = false;
};

inline double frobenius_dot(const Matrix& a, const Matrix& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
    return s;
}

inline GradcheckReport run_gradcheck(const GradcheckOptions& opt = {}) {
    GradcheckReport rep;
    Rng rng(opt.seed);
    auto corrupt = [&](Matrix g) {
        if (opt.corrupt && !g.empty()) g.data()[0] += 0.5 + std::abs(g.data()[0]);
        return g;
    };
    for (int k = 0; k < opt.instances; ++k) {
        const auto inst = static_cast<std::uint64_t>(k);
        const auto c = static_cast<std::size_t>(rng.integer(2, 16));

        {  // temporal cross-attention
            const auto n = static_cast<std::size_t>(rng.integer(1, 8));
            const auto m = static_cast<std::size_t>(rng.integer(1, 8));
            const Matrix fp = rng.matrix(n, c), q = rng.matrix(m, c);
            const Matrix up = opt.zero_upstream ? Matrix(n, c) : rng.matrix(n, c);
            const auto g = temporal_enhance_grad(fp, q, up);
            rep.cases.push_back(
                {"temporal/patches", inst,
                 finite_diff_check([&](const Matrix& x) { return frobenius_dot(up, temporal_enhance(x, q)); },
                                   corrupt(g.patches), fp)});
            rep.cases.push_back(
                {"temporal/queries", inst,
                 finite_diff_check([&](const Matrix& x) { return frobenius_dot(up, temporal_enhance(fp, x)); },
                                   g.queries, q)});
        }
        {  // cross-granularity enhancement
            const auto kc = static_cast<std::size_t>(rng.integer(1, 8));
            const auto kf = static_cast<std::size_t>(rng.integer(1, 8));
            const Matrix fl = rng.matrix(kc, c), fn = rng.matrix(kf, c);
            const Matrix pl = rng.matrix(kc, c), pn = rng.matrix(kf, c);
            const Matrix up = opt.zero_upstream ? Matrix(kc, c) : rng.matrix(kc, c);
            const auto g = cgfe_grad(fl, fn, pl, pn, up);
            rep.cases.push_back(
                {"cgfe/coarse", inst,
                 finite_diff_check([&](const Matrix& x) { return frobenius_dot(up, cgfe(x, fn, pl, pn)); },
                                   corrupt(g.coarse), fl)});
            rep.cases.push_back(
                {"cgfe/fine", inst,
                 finite_diff_check([&](const Matrix& x) { return frobenius_dot(up, cgfe(fl, x, pl, pn)); }, g.fine,
                                   fn)});
        }
    }
    return rep;
}

}  // namespace sepatch
