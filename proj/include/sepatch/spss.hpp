#pragma once

// Spatiotemporal-aware patch size selection.
//
// Each call to step() consumes the pooled, normalized mean query depth of the
// previous frame and returns the patch size for the current frame:
//
//   S     = OLS slope of the last h mean depths
//   dS    = S - S_prev
//   P_l   if depth > theta and dS > 0
//   P_s   if depth < theta and dS < 0
//   keep  otherwise
//
// Until dS exists (the first two calls) the small patch size is returned.

#include <cmath>
#include <cstdint>
#include <deque>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sepatch/numerics.hpp"
#include "sepatch/text.hpp"

namespace sepatch {

struct SpssConfig {
    int p_small = 17;
    int p_large = 18;
    double theta = 0.6;
    int history_len = 8;
    /// Normalization divisor for query depths, in metres.
    double depth_max = 61.2;
    /// |dS| at or below this counts as zero (falls to "keep").
    double slope_tolerance = 1e-9;

    void validate() const {
        detail::check(p_small >= 1 && p_small < p_large, "spss: need 1 <= p_small < p_large, got (", p_small,
                      ", ", p_large, ")");
        detail::check(theta > 0.0 && theta < 1.0, "spss: theta must lie in (0, 1), got ", theta);
        detail::check(history_len >= 2, "spss: history_len must be >= 2, got ", history_len);
        detail::check(depth_max > 0.0, "spss: depth_max must be positive, got ", depth_max);
        detail::check(slope_tolerance >= 0.0, "spss: slope_tolerance must be non-negative");
    }
};

struct SpssState {
    std::deque<double> depth_history;
    std::optional<double> prev_slope;
    int active_patch = 0;
    std::uint64_t frame_index = 0;

    friend bool operator==(const SpssState&, const SpssState&) = default;
};

inline SpssState initial_state(const SpssConfig& cfg) {
    cfg.validate();
    return {{}, std::nullopt, cfg.p_small, 0};
}

/// Mean of the query depths divided by depth_max, clamped to [0, 1].
inline double mean_query_depth(std::span<const double> depths, double depth_max) {
    detail::check(!depths.empty(), "mean_query_depth: no query depths");
    detail::check(depth_max > 0.0, "mean_query_depth: depth_max must be positive");
    double sum = 0.0;
    for (double d : depths) {
        detail::check(d >= 0.0, "mean_query_depth: negative depth ", d);
        sum += d;
    }
    return std::clamp(sum / static_cast<double>(depths.size()) / depth_max, 0.0, 1.0);
}

inline int step(SpssState& state, const SpssConfig& cfg, double mean_depth) {
    state.depth_history.push_back(mean_depth);
    while (state.depth_history.size() > static_cast<std::size_t>(cfg.history_len))
        state.depth_history.pop_front();

    if (state.depth_history.size() >= 2) {
        const std::vector<double> window(state.depth_history.begin(), state.depth_history.end());
        const double slope = trend_slope(window);
        if (state.prev_slope) {
            double delta = slope - *state.prev_slope;
            if (std::abs(delta) <= cfg.slope_tolerance) delta = 0.0;
            if (mean_depth > cfg.theta && delta > 0.0)
                state.active_patch = cfg.p_large;
            else if (mean_depth < cfg.theta && delta < 0.0)
                state.active_patch = cfg.p_small;
        } else {
            state.active_patch = cfg.p_small;
        }
        state.prev_slope = slope;
    } else {
        state.active_patch = cfg.p_small;
    }
    ++state.frame_index;
    return state.active_patch;
}

// Snapshot format, one "key=value" per line:
//
//   # sepatch spss-state v1
//   frame_index=<uint>
//   active_patch=<int>
//   prev_slope=<double>|none
//   history=<double>,<double>,...      (oldest first, may be empty)

inline void write_state(std::ostream& os, const SpssState& s) {
    os << "# sepatch spss-state v1\n";
    os << "frame_index=" << s.frame_index << '\n';
    os << "active_patch=" << s.active_patch << '\n';
    os << "prev_slope=" << (s.prev_slope ? text::format_double(*s.prev_slope) : std::string("none")) << '\n';
    os << "history=";
    for (std::size_t i = 0; i < s.depth_history.size(); ++i)
        os << (i ? "," : "") << text::format_double(s.depth_history[i]);
    os << '\n';
}

inline SpssState read_state(std::istream& is) {
    SpssState s;
    bool seen[4] = {};
    for (const auto& kv : text::read_key_values(is, "spss-state")) {
        if (kv.key == "frame_index") {
            s.frame_index = text::parse_int<std::uint64_t>(kv.value, "frame_index");
            seen[0] = true;
        } else if (kv.key == "active_patch") {
            s.active_patch = text::parse_int<int>(kv.value, "active_patch");
            seen[1] = true;
        } else if (kv.key == "prev_slope") {
            if (kv.value != "none") s.prev_slope = text::parse_double(kv.value, "prev_slope");
            seen[2] = true;
        } else if (kv.key == "history") {
            if (!kv.value.empty())
                for (auto part : text::split(kv.value, ','))
                    s.depth_history.push_back(text::parse_double(part, "history"));
            seen[3] = true;
        } else {
            detail::fail("spss-state: unknown key '", kv.key, "'");
        }
    }
    detail::check(seen[0] && seen[1] && seen[2] && seen[3], "spss-state: missing field");
    return s;
}

/// Checks that a restored snapshot is consistent with `cfg`.
inline void validate_state(const SpssState& s, const SpssConfig& cfg) {
    detail::check(s.depth_history.size() <= static_cast<std::size_t>(cfg.history_len),
                  "spss-state: history longer than history_len");
    detail::check(s.active_patch == cfg.p_small || s.active_patch == cfg.p_large, "spss-state: active_patch ",
                  s.active_patch, " is neither p_small nor p_large");
}

}  // namespace sepatch
