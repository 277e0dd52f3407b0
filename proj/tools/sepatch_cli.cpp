// sepatch: run scenarios, fit budget surfaces, check gradients, render frames.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "sepatch/sepatch.hpp"

namespace fs = std::filesystem;
using namespace sepatch;

namespace {

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    detail::check(out.good(), "cannot write '", p.string(), "'");
    return out;
}

int cmd_run(const std::string& config_path, const std::string& output_override) {
    RunConfig cfg = load_run_config(config_path);
    if (!output_override.empty()) cfg.output_dir = output_override;
    const ScenarioScript script = resolve_scenario(cfg);
    Pipeline pipeline(cfg.pipeline_config());
    const SequenceOutput run = run_scenario(pipeline, script);

    const fs::path dir = cfg.output_dir;
    fs::create_directories(dir);

    auto config_json = cfg.to_json();
    config_json["scenario_resolved"] = script.name;
    config_json["resolution"] = {script.height, script.width};
    config_json["num_views"] = script.num_views;
    config_json["num_frames"] = script.num_frames;
    {
        auto out = open_out(dir / "report.json");
        out << report_to_json(run.report, config_json).dump(2) << '\n';
    }
    {
        auto out = open_out(dir / "frames.csv");
        write_frames_csv(out, run.report);
    }
    {
        auto out = open_out(dir / "masks.txt");
        write_mask_header(out);
        for (const auto& r : mask_records(run.results)) write_mask_record(out, r);
    }
    {
        auto out = open_out(dir / "spss_state.txt");
        write_state(out, run.final_state);
    }

    const auto& rep = run.report;
    std::printf("frames=%zu P_s=%d:%llu (%.1f%%) P_l=%d:%llu (%.1f%%) switches=%llu total_flops=%llu "
                "baseline_flops=%llu reduction=%.2f%%\n",
                rep.frames.size(), rep.p_small, static_cast<unsigned long long>(rep.count_small),
                100.0 * rep.fraction_small(), rep.p_large, static_cast<unsigned long long>(rep.count_large),
                100.0 * rep.fraction_large(), static_cast<unsigned long long>(rep.switches),
                static_cast<unsigned long long>(rep.total_flops), static_cast<unsigned long long>(rep.baseline_flops),
                100.0 * rep.reduction());
    return 0;
}

struct BudgetArgs {
    std::string samples;
    int degree = 2;
    double budget_time = 0.0;
    double budget_nds = 0.0;
    double weight_time = 1.0;
    double weight_nds = 1.0;
    int min_patch = 0;
    int max_patch = 0;
    std::string out;
    std::string grid;
};

int cmd_budget(const BudgetArgs& a) {
    std::ifstream in(a.samples);
    detail::check(in.good(), "cannot read samples '", a.samples, "'");
    BudgetSurface surface = fit_surfaces(read_budget_csv(in, a.samples), a.degree);
    if (a.min_patch) surface.domain_lo = a.min_patch;
    if (a.max_patch) surface.domain_hi = a.max_patch;
    const BudgetWeights w{a.weight_time, a.weight_nds};
    const BudgetChoice best = search(surface, a.budget_time, a.budget_nds, w);

    if (!a.out.empty()) {
        auto out = open_out(a.out);
        out << surface_to_json(surface).dump(2) << '\n';
    }
    if (!a.grid.empty()) {
        auto out = open_out(a.grid);
        write_budget_grid(out, surface, a.budget_time, a.budget_nds, w);
    }
    std::printf("p_small=%d p_large=%d objective=%s predicted_time=%s predicted_accuracy=%s time_residual=%s "
                "accuracy_residual=%s\n",
                best.p_small, best.p_large, text::format_double(best.objective).c_str(),
                text::format_double(best.predicted_time).c_str(), text::format_double(best.predicted_accuracy).c_str(),
                text::format_double(surface.time_fit.residual_norm).c_str(),
                text::format_double(surface.accuracy_fit.residual_norm).c_str());
    return 0;
}

int cmd_gradcheck(const GradcheckOptions& opt) {
    const GradcheckReport rep = run_gradcheck(opt);
    std::size_t failures = 0;
    for (const auto& c : rep.cases)
        if (c.max_rel_error > kGradTolerance) {
            ++failures;
            std::printf("FAIL %s instance=%llu max_rel_error=%.3e\n", c.name.c_str(),
                        static_cast<unsigned long long>(c.instance), c.max_rel_error);
        }
    std::printf("gradcheck: %zu cases, worst max_rel_error=%.3e, tolerance=%.0e, %s\n", rep.cases.size(), rep.worst(),
                kGradTolerance, failures ? "FAILED" : "ok");
    return failures ? 1 : 0;
}

int cmd_render(const std::string& scenario, int frame, const std::string& out_dir, int height, int width,
               std::uint64_t seed) {
    RunConfig cfg;
    cfg.scenario = scenario;
    cfg.height = height;
    cfg.width = width;
    cfg.seed = seed;
    const ScenarioScript script = resolve_scenario(cfg);
    const FrameTruth t = render(script, frame);
    fs::create_directories(out_dir);
    for (std::size_t v = 0; v < t.images.size(); ++v) {
        const std::string ext = script.channels == 3 ? ".ppm" : (script.channels == 1 ? ".pgm" : ".spimg");
        save_image((fs::path(out_dir) / ("frame" + std::to_string(frame) + "_view" + std::to_string(v) + ext)).string(),
                   t.images[v]);
    }
    auto out = open_out(fs::path(out_dir) / ("frame" + std::to_string(frame) + "_truth.csv"));
    out << "object,x,y,z,depth\n";
    for (std::size_t i = 0; i < t.object_ids.size(); ++i) {
        const auto& p = t.object_positions[i];
        out << t.object_ids[i] << ',' << text::format_double(p.x) << ',' << text::format_double(p.y) << ','
            << text::format_double(p.z) << ',' << text::format_double(t.object_depths[i]) << '\n';
    }
    std::printf("rendered %s frame %d: %zu views, %zu objects\n", script.name.c_str(), frame, t.images.size(),
                t.object_ids.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sepatch: dynamic patch sizing and informative patch enhancement for multi-view ViT tokens"};
    app.require_subcommand(1);

    std::string config_path, output_override;
    auto* run = app.add_subcommand("run", "Run a scenario and write report.json, frames.csv, masks.txt");
    run->add_option("config", config_path, "Run configuration file")->required();
    run->add_option("-o,--output-dir", output_override, "Override output_dir from the config");

    BudgetArgs budget_args;
    auto* budget = app.add_subcommand("budget", "Fit accuracy/cost surfaces and search for a patch-size pair");
    budget->add_option("samples", budget_args.samples, "CSV with p_small,p_large,accuracy,cost")->required();
    budget->add_option("-d,--degree", budget_args.degree, "Polynomial degree")->capture_default_str();
    budget->add_option("--budget-time", budget_args.budget_time, "Cost budget")->required();
    budget->add_option("--budget-nds", budget_args.budget_nds, "Accuracy budget")->required();
    budget->add_option("--weight-time", budget_args.weight_time, "Weight of the cost term")->capture_default_str();
    budget->add_option("--weight-nds", budget_args.weight_nds, "Weight of the accuracy term")->capture_default_str();
    budget->add_option("--min-patch", budget_args.min_patch, "Search domain lower bound (default: from samples)");
    budget->add_option("--max-patch", budget_args.max_patch, "Search domain upper bound (default: from samples)");
    budget->add_option("--out", budget_args.out, "Write the fitted surface as JSON");
    budget->add_option("--grid", budget_args.grid, "Write a dense grid dump as CSV");

    GradcheckOptions grad_opts;
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the attention gradients");
    grad->add_option("--seed", grad_opts.seed, "Seed")->capture_default_str();
    grad->add_option("--instances", grad_opts.instances, "Random instances per operator")->capture_default_str();
    grad->add_flag("--corrupt", grad_opts.corrupt, "Perturb the analytic gradient (harness self-test)");
    grad->add_flag("--zero-upstream", grad_opts.zero_upstream, "Use an all-zero upstream gradient");

    std::string scenario = "receding", render_dir = "frames";
    int frame = 0, height = 0, width = 0;
    std::uint64_t seed = 0;
    auto* rend = app.add_subcommand("render", "Render one simulator frame to PGM/PPM plus a ground-truth CSV");
    rend->add_option("-s,--scenario", scenario, "Library scenario name or script path")->capture_default_str();
    rend->add_option("-f,--frame", frame, "Frame index")->capture_default_str();
    rend->add_option("-o,--out", render_dir, "Output directory")->capture_default_str();
    rend->add_option("--height", height, "Override image height");
    rend->add_option("--width", width, "Override image width");
    rend->add_option("--seed", seed, "Seed")->capture_default_str();

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config_path, output_override);
        if (*budget) return cmd_budget(budget_args);
        if (*grad) return cmd_gradcheck(grad_opts);
        if (*rend) return cmd_render(scenario, frame, render_dir, height, width, seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 0;
}
