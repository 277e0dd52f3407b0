#pragma once

// Per-frame orchestration over a camera rig:
//
//   1. patch size: SPSS step on the previous frame's pooled query depths
//      (cold start -> P_s when there are no previous queries)
//   2. per view: fine embedding (16 px) and coarse embedding (active size)
//   3. per view: informative patch selection on fine tokens, enhanced by the
//      motion-aligned previous queries when available
//   4. per view: selected indices projected to the coarse grid, coarse
//      tokens refined by cross-granularity attention
//   5. per view: coarse tokens through the encoder; fine tokens dropped
//   6. query readout by attention of the query embeddings over all encoded
//      tokens; positions and depths come from ground truth (oracle mode) or
//      a seeded linear depth head (learned-stub mode)

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sepatch/cost.hpp"
#include "sepatch/embedding.hpp"
#include "sepatch/encoder.hpp"
#include "sepatch/enhancement.hpp"
#include "sepatch/simulator.hpp"
#include "sepatch/spss.hpp"

namespace sepatch {

enum class QueryMode { oracle, learned_stub };

inline std::string to_string(QueryMode m) { return m == QueryMode::oracle ? "oracle" : "learned-stub"; }

struct PipelineConfig {
    SpssConfig spss;
    EncoderConfig encoder;
    int channels = 1;
    std::size_t queries = 64;
    QueryMode mode = QueryMode::oracle;
    std::uint64_t seed = 0;

    void validate() const {
        spss.validate();
        encoder.validate();
        detail::check(channels >= 1, "pipeline: channels must be >= 1");
        detail::check(queries >= 1, "pipeline: queries must be >= 1");
    }
};

/// Independent sub-seeds derived from the run seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return detail::splitmix64(detail::splitmix64(seed) ^ (stream * 0xD1B54A32D192ED03ull));
}

struct FrameInput {
    std::vector<Image> views;
    RigidTransform ego_motion;
    /// Ground-truth object positions in the current ego frame (oracle mode).
    std::vector<Vec3> object_positions;
};

inline FrameInput frame_input_from_truth(FrameTruth&& t) {
    return {std::move(t.images), t.ego_motion, std::move(t.object_positions)};
}

struct FrameResult {
    int active_patch = 0;
    PatchGridSpec coarse_grid;
    PatchGridSpec fine_grid;
    std::vector<SelectionMask> selections;  // one per view
    FlopReport flops;                       // summed over views
    FlopReport baseline_flops;              // 16 px encoder, no enhancement
    std::optional<double> mean_depth;       // normalized depth fed to SPSS
    QuerySet query_readout;
    std::vector<TokenSet> encoded;  // one per view

    std::size_t selected_fine() const {
        std::size_t n = 0;
        for (const auto& s : selections) n += s.fine_indices.size();
        return n;
    }
    std::size_t selected_coarse() const {
        std::size_t n = 0;
        for (const auto& s : selections) n += s.coarse_indices.size();
        return n;
    }
};

class Pipeline {
public:
    explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {
        cfg_.validate();
        base_kernel_ = make_base_kernel(cfg_.channels, cfg_.encoder.dim, derive_seed(cfg_.seed, 1));
        weights_ = make_encoder_weights(cfg_.encoder, derive_seed(cfg_.seed, 2));
        Rng rng(derive_seed(cfg_.seed, 3));
        query_embeddings_ = rng.matrix(cfg_.queries, cfg_.encoder.dim);
        depth_head_ = rng.matrix(cfg_.encoder.dim, 1, -0.1, 0.1);
    }

    const PipelineConfig& config() const noexcept { return cfg_; }
    SpssState initial_state() const { return sepatch::initial_state(cfg_.spss); }

    const EmbedKernel& kernel_for(int patch) {
        if (patch == kFinePatch) return base_kernel_;
        auto it = kernels_.find(patch);
        if (it == kernels_.end()) it = kernels_.emplace(patch, pi_resize_kernel(base_kernel_, patch)).first;
        return it->second;
    }

    FrameResult run_frame(const FrameInput& in, SpssState& state, const std::optional<QuerySet>& prev_queries) {
        detail::check(!in.views.empty(), "run_frame: no views");
        const Image& first = in.views.front();
        for (const auto& v : in.views)
            detail::check(v.height == first.height && v.width == first.width && v.channels == first.channels,
                          "run_frame: mixed view resolutions (", first.height, "x", first.width, "x", first.channels,
                          " vs ", v.height, "x", v.width, "x", v.channels, ")");
        detail::check(first.channels == cfg_.channels, "run_frame: views have ", first.channels,
                      " channels, pipeline expects ", cfg_.channels);

        FrameResult out;
        const bool has_prev = prev_queries && prev_queries->size() > 0;
        if (has_prev) {
            out.mean_depth = mean_query_depth(prev_queries->depths, cfg_.spss.depth_max);
            out.active_patch = step(state, cfg_.spss, *out.mean_depth);
        } else {
            state.active_patch = cfg_.spss.p_small;
            ++state.frame_index;
            out.active_patch = state.active_patch;
        }

        std::optional<QuerySet> aligned;
        if (has_prev) aligned = align_queries(*prev_queries, in.ego_motion);

        const std::size_t dim = cfg_.encoder.dim;
        out.fine_grid = grid_for(first.height, first.width, kFinePatch);
        out.coarse_grid = grid_for(first.height, first.width, out.active_patch);
        const Matrix pe_fine = positional_encoding(out.fine_grid, dim);
        const Matrix pe_coarse = positional_encoding(out.coarse_grid, dim);
        const EmbedKernel& coarse_kernel = kernel_for(out.active_patch);

        for (const auto& view : in.views) {
            const TokenSet fine = embed(view, base_kernel_);
            TokenSet coarse = embed(view, coarse_kernel);
            const Matrix scored = aligned ? temporal_enhance(fine.features, aligned->embeddings) : fine.features;
            SelectionMask mask = adaptive_select(entropy_scores(scored));
            project_selection(mask, fine.grid, coarse.grid);
            if (!mask.empty()) {
                const Matrix enhanced =
                    cgfe(gather_rows(coarse.features, mask.coarse_indices), gather_rows(fine.features, mask.fine_indices),
                         gather_rows(pe_coarse, mask.coarse_indices), gather_rows(pe_fine, mask.fine_indices));
                scatter_rows(coarse.features, mask.coarse_indices, enhanced);
            }
            out.encoded.push_back(encoder_forward(coarse, cfg_.encoder, weights_));

            const std::uint64_t m = aligned ? aligned->size() : 0;
            out.flops += flops_estimate(coarse.grid.token_count(), cfg_.encoder, mask, m,
                                        {fine.grid.token_count(), static_cast<std::uint64_t>(out.active_patch),
                                         static_cast<std::uint64_t>(cfg_.channels)});
            out.baseline_flops += flops_estimate(fine.grid.token_count(), cfg_.encoder, SelectionMask{}, 0,
                                                 {0, kFinePatch, static_cast<std::uint64_t>(cfg_.channels)});
            out.selections.push_back(std::move(mask));
        }
        out.flops.tokens_per_view = out.coarse_grid.token_count();
        out.baseline_flops.tokens_per_view = out.fine_grid.token_count();
        out.query_readout = readout(out.encoded, in.object_positions);
        return out;
    }

private:
    QuerySet readout(const std::vector<TokenSet>& encoded, const std::vector<Vec3>& truth) const {
        const std::size_t dim = cfg_.encoder.dim;
        std::size_t total = 0;
        for (const auto& t : encoded) total += t.features.rows();
        Matrix memory(total, dim);
        std::size_t r = 0;
        for (const auto& t : encoded)
            for (std::size_t i = 0; i < t.features.rows(); ++i, ++r)
                std::copy(t.features.row(i).begin(), t.features.row(i).end(), memory.row(r).begin());

        QuerySet q;
        const std::size_t count =
            cfg_.mode == QueryMode::oracle ? std::min(truth.size(), cfg_.queries) : cfg_.queries;
        if (count == 0 || total == 0) return q;
        Matrix slots(count, dim);
        for (std::size_t i = 0; i < count; ++i)
            std::copy(query_embeddings_.row(i).begin(), query_embeddings_.row(i).end(), slots.row(i).begin());
        q.embeddings = attention(slots, memory, memory);

        if (cfg_.mode == QueryMode::oracle) {
            q.positions.assign(truth.begin(), truth.begin() + static_cast<std::ptrdiff_t>(count));
        } else {
            const Matrix logits = matmul(q.embeddings, depth_head_);
            for (std::size_t i = 0; i < count; ++i) {
                const double d = cfg_.spss.depth_max / (1.0 + std::exp(-logits(i, 0)));
                const double bearing = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(count);
                q.positions.push_back({d * std::cos(bearing), d * std::sin(bearing), 0.0});
            }
        }
        for (const auto& p : q.positions) q.depths.push_back(horizontal_norm(p));
        return q;
    }

    PipelineConfig cfg_;
    EmbedKernel base_kernel_;
    std::map<int, EmbedKernel> kernels_;
    EncoderWeights weights_;
    Matrix query_embeddings_;
    Matrix depth_head_;
};

// ---------------------------------------------------------------------------
// Sequences

struct FrameRecord {
    std::uint64_t frame = 0;
    int patch_size = 0;
    std::uint64_t tokens_per_view = 0;
    std::uint64_t total_flops = 0;
    std::uint64_t baseline_flops = 0;
    std::uint64_t selected_fine = 0;
    std::uint64_t selected_coarse = 0;
    std::optional<double> mean_depth;

    friend bool operator==(const FrameRecord&, const FrameRecord&) = default;
};

struct AggregateReport {
    std::vector<FrameRecord> frames;
    int p_small = 0;
    int p_large = 0;
    std::uint64_t count_small = 0;
    std::uint64_t count_large = 0;
    std::uint64_t switches = 0;  // frames whose size differs from the previous frame
    std::uint64_t total_flops = 0;
    std::uint64_t baseline_flops = 0;

    double fraction_small() const { return frames.empty() ? 0.0 : double(count_small) / double(frames.size()); }
    double fraction_large() const { return frames.empty() ? 0.0 : double(count_large) / double(frames.size()); }
    double reduction() const { return baseline_flops ? 1.0 - double(total_flops) / double(baseline_flops) : 0.0; }
};

struct SequenceOutput {
    std::vector<FrameResult> results;
    AggregateReport report;
    SpssState final_state;
};

inline AggregateReport aggregate(std::span<const FrameResult> results, const SpssConfig& spss) {
    AggregateReport rep;
    rep.p_small = spss.p_small;
    rep.p_large = spss.p_large;
    for (std::size_t f = 0; f < results.size(); ++f) {
        const auto& r = results[f];
        rep.frames.push_back({f, r.active_patch, r.flops.tokens_per_view, r.flops.total, r.baseline_flops.total,
                              r.selected_fine(), r.selected_coarse(), r.mean_depth});
        (r.active_patch == spss.p_small ? rep.count_small : rep.count_large) += 1;
        if (f > 0 && r.active_patch != results[f - 1].active_patch) ++rep.switches;
        rep.total_flops += r.flops.total;
        rep.baseline_flops += r.baseline_flops.total;
    }
    return rep;
}

/// Threads SPSS state and queries through `num_frames` frames produced by
/// `source`. Encoded tokens are dropped from the stored results unless
/// `keep_tokens` is set.
inline SequenceOutput run_sequence(Pipeline& pipeline, std::size_t num_frames,
                                   const std::function<FrameInput(std::size_t)>& source, bool keep_tokens = false) {
    detail::check(num_frames >= 1, "run_sequence: no frames");
    SequenceOutput out;
    out.final_state = pipeline.initial_state();
    std::optional<QuerySet> queries;
    for (std::size_t f = 0; f < num_frames; ++f) {
        FrameResult r = pipeline.run_frame(source(f), out.final_state, queries);
        queries = r.query_readout;
        if (!keep_tokens) r.encoded.clear();
        out.results.push_back(std::move(r));
    }
    out.report = aggregate(out.results, pipeline.config().spss);
    return out;
}

inline SequenceOutput run_sequence(Pipeline& pipeline, std::span<const FrameInput> frames, bool keep_tokens = false) {
    return run_sequence(
        pipeline, frames.size(), [&](std::size_t f) { return frames[f]; }, keep_tokens);
}

/// Renders `script` frame by frame and runs it.
inline SequenceOutput run_scenario(Pipeline& pipeline, const ScenarioScript& script, bool keep_tokens = false) {
    return run_sequence(
        pipeline, static_cast<std::size_t>(script.num_frames),
        [&](std::size_t f) { return frame_input_from_truth(render(script, static_cast<int>(f))); }, keep_tokens);
}

}  // namespace sepatch
