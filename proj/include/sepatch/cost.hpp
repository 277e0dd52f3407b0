#pragma once

// Closed-form compute model standing in for wall-clock latency. With N
// encoder tokens, width C, MLP hidden width H = round(mlp_ratio * C) and
// `depth` blocks:
//
//   attention   = depth * (4 N C^2 + 2 N^2 C)
//   mlp         = depth * (2 N C H * 2)
//   enhancement = 2 N_f M C                  (temporal cross-attention)
//               + 2 K_c K_f C + 2 K_c K_f C  (cross-granularity attention)
//   embedding   = N_f * 16^2 * ch * C + N * P^2 * ch * C
//   total       = attention + mlp + enhancement + embedding
//
// N_f is the fine (16 px) token count, M the query count and K_f, K_c the
// selected fine and coarse token counts.

#include <cstdint>

#include "sepatch/encoder.hpp"
#include "sepatch/enhancement.hpp"

namespace sepatch {

struct FlopReport {
    std::uint64_t tokens_per_view = 0;
    std::uint64_t attention_flops = 0;
    /// The 2 N^2 C part of attention_flops, summed over blocks.
    std::uint64_t attention_quadratic_flops = 0;
    std::uint64_t mlp_flops = 0;
    std::uint64_t embedding_flops = 0;
    std::uint64_t enhancement_flops = 0;
    std::uint64_t total = 0;

    std::uint64_t encoder_flops() const noexcept { return attention_flops + mlp_flops; }

    FlopReport& operator+=(const FlopReport& o) {
        attention_flops += o.attention_flops;
        attention_quadratic_flops += o.attention_quadratic_flops;
        mlp_flops += o.mlp_flops;
        embedding_flops += o.embedding_flops;
        enhancement_flops += o.enhancement_flops;
        total += o.total;
        return *this;
    }
    friend bool operator==(const FlopReport&, const FlopReport&) = default;
};

/// Optional embedding-side inputs. Leave `channels` at 0 to omit embedding
/// cost. `fine_tokens` at 0 means there is no fine branch: no 16 px
/// embedding term, and N stands in for N_f in the temporal term.
struct EmbeddingCost {
    std::uint64_t fine_tokens = 0;
    std::uint64_t coarse_patch = 0;
    std::uint64_t channels = 0;
};

inline FlopReport flops_estimate(std::uint64_t tokens, const EncoderConfig& cfg, const SelectionMask& selection,
                                 std::uint64_t queries, const EmbeddingCost& embed = {}) {
    const std::uint64_t n = tokens;
    const std::uint64_t c = cfg.dim;
    const std::uint64_t h = cfg.hidden();
    const auto depth = static_cast<std::uint64_t>(cfg.depth);

    FlopReport r;
    r.tokens_per_view = n;
    r.attention_quadratic_flops = depth * (2 * n * n * c);
    r.attention_flops = depth * (4 * n * c * c) + r.attention_quadratic_flops;
    r.mlp_flops = depth * (2 * n * c * h * 2);

    const std::uint64_t fine = embed.fine_tokens ? embed.fine_tokens : n;
    const std::uint64_t kf = selection.fine_indices.size();
    const std::uint64_t kc = selection.coarse_indices.size();
    r.enhancement_flops = 2 * fine * queries * c + 2 * kc * kf * c + 2 * kc * kf * c;

    if (embed.channels) {
        const std::uint64_t fine_px = static_cast<std::uint64_t>(kFinePatch) * kFinePatch;
        r.embedding_flops = embed.fine_tokens * fine_px * embed.channels * c +
                            n * embed.coarse_patch * embed.coarse_patch * embed.channels * c;
    }
    r.total = r.attention_flops + r.mlp_flops + r.embedding_flops + r.enhancement_flops;
    return r;
}

}  // namespace sepatch
