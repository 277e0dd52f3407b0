#pragma once

// Run artifacts.
//
// JSON, schema "sepatch-run-report/1":
//   {
//     "schema": "sepatch-run-report/1",
//     "config": { ...echo of the run configuration... },
//     "frames": [ { "frame", "patch_size", "tokens_per_view", "total_flops",
//                   "baseline_flops", "selected_fine", "selected_coarse",
//                   "mean_depth" (number or null) }, ... ],
//     "summary": { "frames", "p_small", "p_large", "count_small",
//                  "count_large", "fraction_small", "fraction_large",
//                  "switches", "total_flops", "baseline_flops", "reduction" }
//   }
//
// CSV, one row per frame, header
//   frame,patch_size,N,total_flops,selected_fine,selected_coarse

#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sepatch/pipeline.hpp"
#include "sepatch/text.hpp"

namespace sepatch {

inline constexpr const char* kReportSchema = "sepatch-run-report/1";
inline constexpr const char* kFrameCsvHeader = "frame,patch_size,N,total_flops,selected_fine,selected_coarse";

inline nlohmann::ordered_json report_to_json(const AggregateReport& rep,
                                             const nlohmann::ordered_json& config = nlohmann::ordered_json::object()) {
    nlohmann::ordered_json frames = nlohmann::ordered_json::array();
    for (const auto& f : rep.frames) {
        nlohmann::ordered_json j;
        j["frame"] = f.frame;
        j["patch_size"] = f.patch_size;
        j["tokens_per_view"] = f.tokens_per_view;
        j["total_flops"] = f.total_flops;
        j["baseline_flops"] = f.baseline_flops;
        j["selected_fine"] = f.selected_fine;
        j["selected_coarse"] = f.selected_coarse;
        j["mean_depth"] = f.mean_depth ? nlohmann::ordered_json(*f.mean_depth) : nlohmann::ordered_json(nullptr);
        frames.push_back(std::move(j));
    }
    nlohmann::ordered_json summary;
    summary["frames"] = rep.frames.size();
    summary["p_small"] = rep.p_small;
    summary["p_large"] = rep.p_large;
    summary["count_small"] = rep.count_small;
    summary["count_large"] = rep.count_large;
    summary["fraction_small"] = rep.fraction_small();
    summary["fraction_large"] = rep.fraction_large();
    summary["switches"] = rep.switches;
    summary["total_flops"] = rep.total_flops;
    summary["baseline_flops"] = rep.baseline_flops;
    summary["reduction"] = rep.reduction();

    nlohmann::ordered_json out;
    out["schema"] = kReportSchema;
    out["config"] = config;
    out["frames"] = std::move(frames);
    out["summary"] = std::move(summary);
    return out;
}

inline AggregateReport report_from_json(const nlohmann::json& j) {
    detail::check(j.value("schema", "") == kReportSchema, "run report: unsupported schema");
    AggregateReport rep;
    for (const auto& f : j.at("frames")) {
        FrameRecord r;
        r.frame = f.at("frame").get<std::uint64_t>();
        r.patch_size = f.at("patch_size").get<int>();
        r.tokens_per_view = f.at("tokens_per_view").get<std::uint64_t>();
        r.total_flops = f.at("total_flops").get<std::uint64_t>();
        r.baseline_flops = f.at("baseline_flops").get<std::uint64_t>();
        r.selected_fine = f.at("selected_fine").get<std::uint64_t>();
        r.selected_coarse = f.at("selected_coarse").get<std::uint64_t>();
        if (!f.at("mean_depth").is_null()) r.mean_depth = f.at("mean_depth").get<double>();
        rep.frames.push_back(r);
    }
    const auto& s = j.at("summary");
    rep.p_small = s.at("p_small").get<int>();
    rep.p_large = s.at("p_large").get<int>();
    rep.count_small = s.at("count_small").get<std::uint64_t>();
    rep.count_large = s.at("count_large").get<std::uint64_t>();
    rep.switches = s.at("switches").get<std::uint64_t>();
    rep.total_flops = s.at("total_flops").get<std::uint64_t>();
    rep.baseline_flops = s.at("baseline_flops").get<std::uint64_t>();
    detail::check(s.at("frames").get<std::size_t>() == rep.frames.size(), "run report: frame count mismatch");
    return rep;
}

inline void write_frames_csv(std::ostream& os, const AggregateReport& rep) {
    os << kFrameCsvHeader << '\n';
    for (const auto& f : rep.frames)
        os << f.frame << ',' << f.patch_size << ',' << f.tokens_per_view << ',' << f.total_flops << ','
           << f.selected_fine << ',' << f.selected_coarse << '\n';
}

/// Reads the per-frame CSV back; baseline and depth columns are not part of
/// the CSV and stay empty.
inline std::vector<FrameRecord> read_frames_csv(std::istream& is) {
    std::string line;
    detail::check(static_cast<bool>(std::getline(is, line)) && text::trim(line) == kFrameCsvHeader,
                  "frames csv: bad header");
    std::vector<FrameRecord> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const auto c = text::split(text::trim(line), ',');
        detail::check(c.size() == 6, "frames csv:", lineno, ": expected 6 columns, got ", c.size());
        FrameRecord r;
        r.frame = text::parse_int<std::uint64_t>(c[0], "frame");
        r.patch_size = text::parse_int<int>(c[1], "patch_size");
        r.tokens_per_view = text::parse_int<std::uint64_t>(c[2], "N");
        r.total_flops = text::parse_int<std::uint64_t>(c[3], "total_flops");
        r.selected_fine = text::parse_int<std::uint64_t>(c[4], "selected_fine");
        r.selected_coarse = text::parse_int<std::uint64_t>(c[5], "selected_coarse");
        out.push_back(r);
    }
    return out;
}

inline std::vector<MaskRecord> mask_records(std::span<const FrameResult> results) {
    std::vector<MaskRecord> out;
    for (std::size_t f = 0; f < results.size(); ++f)
        for (std::size_t v = 0; v < results[f].selections.size(); ++v) {
            const auto& s = results[f].selections[v];
            out.push_back({f, v, s.fine_indices, s.coarse_indices});
        }
    return out;
}

}  // namespace sepatch
