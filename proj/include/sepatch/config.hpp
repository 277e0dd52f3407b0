#pragma once

// Run configuration: a flat "key = value" file ('#' starts a comment line).
//
//   scenario      library name (receding, approaching, turn-in, static, mixed)
//                 or a path to a scenario script, relative to the config file
//   height width  per-view resolution; 0 keeps the scenario's own
//   frames views  overrides; 0 keeps the scenario's own
//   channels      image channels (default 1)
//   p_small p_large theta history depth_max
//   dim encoder_depth heads mlp_ratio queries
//   seed          the only source of randomness (overrides the script seed)
//   output_dir    where artifacts are written (default "out")
//   query_mode    oracle | learned-stub
//
// Unknown keys and invalid values are rejected with one line per field.

#include <filesystem>
#include <fstream>
#include <istream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sepatch/pipeline.hpp"
#include "sepatch/simulator.hpp"
#include "sepatch/text.hpp"

namespace sepatch {

struct RunConfig {
    std::string scenario = "receding";
    int height = 0;
    int width = 0;
    int frames = 0;
    int views = 0;
    int channels = 1;
    int p_small = 18;
    int p_large = 20;
    double theta = 0.6;
    int history = 8;
    double depth_max = 61.2;
    std::size_t dim = 256;
    int encoder_depth = 1;
    int heads = 8;
    double mlp_ratio = 4.0;
    std::size_t queries = 64;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    QueryMode query_mode = QueryMode::oracle;
    /// Directory relative scenario paths resolve against.
    std::filesystem::path base_dir = ".";

    PipelineConfig pipeline_config() const {
        PipelineConfig p;
        p.spss = {p_small, p_large, theta, history, depth_max};
        p.encoder = {encoder_depth, dim, heads, mlp_ratio};
        p.channels = channels;
        p.queries = queries;
        p.mode = query_mode;
        p.seed = seed;
        return p;
    }

    /// Field-level validation; throws one Error listing every problem.
    void validate() const {
        std::vector<std::string> errs;
        auto need = [&](bool ok, const std::string& msg) {
            if (!ok) errs.push_back(msg);
        };
        need(!scenario.empty(), "scenario: must not be empty");
        need(height >= 0 && width >= 0, "height/width: must be >= 0");
        need(frames >= 0, "frames: must be >= 0");
        need(views >= 0, "views: must be >= 0");
        need(channels >= 1, "channels: must be >= 1");
        need(p_small >= 2, "p_small: must be >= 2");
        need(p_small < p_large, "p_large: must exceed p_small");
        need(theta > 0.0 && theta < 1.0, "theta: must lie in (0, 1)");
        need(history >= 2, "history: must be >= 2");
        need(depth_max > 0.0, "depth_max: must be positive");
        need(dim > 0 && dim % 4 == 0, "dim: must be a positive multiple of 4");
        need(heads >= 1 && dim % static_cast<std::size_t>(std::max(heads, 1)) == 0, "heads: must divide dim");
        need(encoder_depth >= 0, "encoder_depth: must be >= 0");
        need(mlp_ratio > 0.0, "mlp_ratio: must be positive");
        need(queries >= 1, "queries: must be >= 1");
        need(!output_dir.empty(), "output_dir: must not be empty");
        if (!errs.empty()) {
            std::ostringstream os;
            os << "invalid config:";
            for (const auto& e : errs) os << "\n  " << e;
            throw Error(os.str());
        }
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json j;
        j["scenario"] = scenario;
        j["height"] = height;
        j["width"] = width;
        j["frames"] = frames;
        j["views"] = views;
        j["channels"] = channels;
        j["p_small"] = p_small;
        j["p_large"] = p_large;
        j["theta"] = theta;
        j["history"] = history;
        j["depth_max"] = depth_max;
        j["dim"] = dim;
        j["encoder_depth"] = encoder_depth;
        j["heads"] = heads;
        j["mlp_ratio"] = mlp_ratio;
        j["queries"] = queries;
        j["seed"] = seed;
        j["query_mode"] = to_string(query_mode);
        return j;
    }
};

inline RunConfig parse_run_config(std::istream& is, std::string_view source = "config") {
    RunConfig c;
    std::vector<std::string> errs;
    std::set<std::string> seen;
    for (const auto& kv : text::read_key_values(is, source)) {
        const auto& k = kv.key;
        const auto& v = kv.value;
        if (!seen.insert(k).second) {
            errs.push_back(k + ": duplicate key (line " + std::to_string(kv.line) + ")");
            continue;
        }
        try {
            if (k == "scenario") c.scenario = v;
            else if (k == "height") c.height = text::parse_int<int>(v, k);
            else if (k == "width") c.width = text::parse_int<int>(v, k);
            else if (k == "frames") c.frames = text::parse_int<int>(v, k);
            else if (k == "views") c.views = text::parse_int<int>(v, k);
            else if (k == "channels") c.channels = text::parse_int<int>(v, k);
            else if (k == "p_small") c.p_small = text::parse_int<int>(v, k);
            else if (k == "p_large") c.p_large = text::parse_int<int>(v, k);
            else if (k == "theta") c.theta = text::parse_double(v, k);
            else if (k == "history") c.history = text::parse_int<int>(v, k);
            else if (k == "depth_max") c.depth_max = text::parse_double(v, k);
            else if (k == "dim") c.dim = text::parse_int<std::size_t>(v, k);
            else if (k == "encoder_depth") c.encoder_depth = text::parse_int<int>(v, k);
            else if (k == "heads") c.heads = text::parse_int<int>(v, k);
            else if (k == "mlp_ratio") c.mlp_ratio = text::parse_double(v, k);
            else if (k == "queries") c.queries = text::parse_int<std::size_t>(v, k);
            else if (k == "seed") c.seed = text::parse_int<std::uint64_t>(v, k);
            else if (k == "output_dir") c.output_dir = v;
            else if (k == "query_mode") {
                if (v == "oracle") c.query_mode = QueryMode::oracle;
                else if (v == "learned-stub") c.query_mode = QueryMode::learned_stub;
                else errs.push_back("query_mode: expected 'oracle' or 'learned-stub', got '" + v + "'");
            } else {
                errs.push_back(k + ": unknown key (line " + std::to_string(kv.line) + ")");
            }
        } catch (const Error& e) {
            errs.push_back(e.what());
        }
    }
    if (!errs.empty()) {
        std::ostringstream os;
        os << "invalid config " << source << ":";
        for (const auto& e : errs) os << "\n  " << e;
        throw Error(os.str());
    }
    c.validate();
    return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    detail::check(in.good(), "cannot read config '", path.string(), "'");
    RunConfig c = parse_run_config(in, path.string());
    c.base_dir = path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path();
    return c;
}

/// Resolves the scenario and applies the config's overrides.
inline ScenarioScript resolve_scenario(const RunConfig& c) {
    ScenarioScript s;
    const auto lib = scripted_scenarios();
    if (auto it = lib.find(c.scenario); it != lib.end()) {
        s = it->second;
    } else {
        const auto path = c.base_dir / c.scenario;
        std::ifstream in(path);
        detail::check(in.good(), "scenario '", c.scenario, "' is neither a library scenario nor a readable file (",
                      path.string(), ")");
        s = read_script(in, path.string());
    }
    if (c.height) s.height = c.height;
    if (c.width) s.width = c.width;
    if (c.frames) s.num_frames = c.frames;
    if (c.views) s.num_views = c.views;
    s.channels = c.channels;
    s.depth_max = c.depth_max;
    s.seed = c.seed;
    s.validate();
    return s;
}

}  // namespace sepatch
