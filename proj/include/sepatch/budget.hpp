#pragma once

// Budget-aware patch size search: fit accuracy and cost as total-degree-d
// polynomials of (P_s, P_l), then scan the integer grid P_s < P_l for the
// configuration minimizing
//
//   w_time * (f_time - B_time)^2 + w_acc * (f_acc - B_acc)^2.

#include <istream>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sepatch/numerics.hpp"
#include "sepatch/text.hpp"

namespace sepatch {

struct BudgetSample {
    int p_small = 0;
    int p_large = 0;
    double accuracy = 0.0;
    double cost = 0.0;
};

struct BudgetSurface {
    PolyFit accuracy_fit;
    PolyFit time_fit;
    /// Both patch sizes range over [domain_lo, domain_hi].
    int domain_lo = 0;
    int domain_hi = 0;
};

struct BudgetWeights {
    double time = 1.0;
    double accuracy = 1.0;
};

struct BudgetChoice {
    int p_small = 0;
    int p_large = 0;
    double objective = 0.0;
    double predicted_time = 0.0;
    double predicted_accuracy = 0.0;
};

/// Fixed-size configurations (P_s == P_l) are accepted as samples; the search
/// grid itself is restricted to P_s < P_l.
inline BudgetSurface fit_surfaces(const std::vector<BudgetSample>& samples, int degree = 2) {
    detail::check(!samples.empty(), "fit_surfaces: no samples");
    std::vector<Sample3> acc, time;
    int lo = std::numeric_limits<int>::max(), hi = std::numeric_limits<int>::min();
    for (const auto& s : samples) {
        detail::check(s.p_small >= 1 && s.p_small <= s.p_large, "fit_surfaces: sample (", s.p_small, ", ", s.p_large,
                      ") needs 1 <= p_small <= p_large");
        acc.push_back({static_cast<double>(s.p_small), static_cast<double>(s.p_large), s.accuracy});
        time.push_back({static_cast<double>(s.p_small), static_cast<double>(s.p_large), s.cost});
        lo = std::min({lo, s.p_small, s.p_large});
        hi = std::max({hi, s.p_small, s.p_large});
    }
    return {polyfit_2d(acc, degree), polyfit_2d(time, degree), lo, hi};
}

inline double budget_objective(const BudgetSurface& s, int p_small, int p_large, double budget_time,
                               double budget_accuracy, const BudgetWeights& w = {}) {
    const double t = poly_eval_2d(s.time_fit.coeffs, p_small, p_large) - budget_time;
    const double a = poly_eval_2d(s.accuracy_fit.coeffs, p_small, p_large) - budget_accuracy;
    return w.time * t * t + w.accuracy * a * a;
}

/// Exhaustive scan, P_s ascending then P_l ascending; the first minimum wins.
inline BudgetChoice search(const BudgetSurface& s, double budget_time, double budget_accuracy,
                           const BudgetWeights& w = {}) {
    detail::check(s.accuracy_fit.coeffs.degree == s.time_fit.coeffs.degree, "search: fits have different degrees");
    BudgetChoice best;
    best.objective = std::numeric_limits<double>::infinity();
    bool found = false;
    for (int ps = s.domain_lo; ps <= s.domain_hi; ++ps)
        for (int pl = ps + 1; pl <= s.domain_hi; ++pl) {
            const double obj = budget_objective(s, ps, pl, budget_time, budget_accuracy, w);
            if (!found || obj < best.objective) {
                best = {ps, pl, obj, poly_eval_2d(s.time_fit.coeffs, ps, pl),
                        poly_eval_2d(s.accuracy_fit.coeffs, ps, pl)};
                found = true;
            }
        }
    detail::check(found, "search: empty grid for domain [", s.domain_lo, ", ", s.domain_hi, "]");
    return best;
}

// CSV with header "p_small,p_large,accuracy,cost".
inline std::vector<BudgetSample> read_budget_csv(std::istream& is, std::string_view source = "samples") {
    std::string line;
    int lineno = 0;
    std::vector<BudgetSample> out;
    bool header = false;
    while (std::getline(is, line)) {
        ++lineno;
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto cols = text::split(t, ',');
        if (!header) {
            detail::check(cols.size() == 4 && text::trim(cols[0]) == "p_small" && text::trim(cols[1]) == "p_large" &&
                              text::trim(cols[2]) == "accuracy" && text::trim(cols[3]) == "cost",
                          source, ":", lineno, ": expected header 'p_small,p_large,accuracy,cost'");
            header = true;
            continue;
        }
        detail::check(cols.size() == 4, source, ":", lineno, ": expected 4 columns, got ", cols.size());
        out.push_back({text::parse_int<int>(cols[0], "p_small"), text::parse_int<int>(cols[1], "p_large"),
                       text::parse_double(cols[2], "accuracy"), text::parse_double(cols[3], "cost")});
    }
    detail::check(header, source, ": empty file");
    return out;
}

inline nlohmann::json fit_to_json(const PolyFit& f) {
    nlohmann::json coeffs = nlohmann::json::array();
    for (int i = 0; i <= f.coeffs.degree; ++i)
        for (int j = 0; j <= f.coeffs.degree - i; ++j) coeffs.push_back({{"i", i}, {"j", j}, {"value", f.coeffs.at(i, j)}});
    return {{"coeffs", coeffs}, {"residual_norm", f.residual_norm}, {"condition", f.condition}};
}

inline PolyFit fit_from_json(const nlohmann::json& j, int degree) {
    PolyFit f{PolyCoeffs2D(degree), j.at("residual_norm").get<double>(), j.at("condition").get<double>()};
    for (const auto& c : j.at("coeffs")) f.coeffs.at(c.at("i").get<int>(), c.at("j").get<int>()) = c.at("value").get<double>();
    return f;
}

/// Schema "sepatch-budget-surface/1".
inline nlohmann::json surface_to_json(const BudgetSurface& s) {
    return {{"schema", "sepatch-budget-surface/1"},
            {"degree", s.time_fit.coeffs.degree},
            {"domain", {s.domain_lo, s.domain_hi}},
            {"accuracy", fit_to_json(s.accuracy_fit)},
            {"time", fit_to_json(s.time_fit)}};
}

inline BudgetSurface surface_from_json(const nlohmann::json& j) {
    detail::check(j.value("schema", "") == "sepatch-budget-surface/1", "budget surface: unsupported schema");
    const int d = j.at("degree").get<int>();
    return {fit_from_json(j.at("accuracy"), d), fit_from_json(j.at("time"), d), j.at("domain").at(0).get<int>(),
            j.at("domain").at(1).get<int>()};
}

/// Dense dump for plotting: p_small,p_large,accuracy,time,objective.
inline void write_budget_grid(std::ostream& os, const BudgetSurface& s, double budget_time, double budget_accuracy,
                              const BudgetWeights& w = {}) {
    os << "p_small,p_large,accuracy,time,objective\n";
    for (int ps = s.domain_lo; ps <= s.domain_hi; ++ps)
        for (int pl = ps + 1; pl <= s.domain_hi; ++pl)
            os << ps << ',' << pl << ',' << text::format_double(poly_eval_2d(s.accuracy_fit.coeffs, ps, pl)) << ','
               << text::format_double(poly_eval_2d(s.time_fit.coeffs, ps, pl)) << ','
               << text::format_double(budget_objective(s, ps, pl, budget_time, budget_accuracy, w)) << '\n';
}

}  // namespace sepatch
