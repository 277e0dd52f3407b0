#pragma once

// Informative patch selection and cross-granularity feature enhancement.
//
//   F_q  = softmax(F_p Q^T / sqrt(C)) Q                      (temporal cues)
//   H_j  = -sum_c p_jc log p_jc,  p_jc = (F_q[j,c] / |F_q[j]|)^2
//   keep j  iff  H_j > mean(H)                              (fine tokens)
//   F_l' = F_l + softmax((F_l+PE_l)(F_n+PE_n)^T / sqrt(C)) F_n
//
// None of the attentions carry learned projections.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "sepatch/attention.hpp"
#include "sepatch/embedding.hpp"
#include "sepatch/geometry.hpp"
#include "sepatch/numerics.hpp"
#include "sepatch/text.hpp"

namespace sepatch {

struct QuerySet {
    Matrix embeddings;            // M x C
    std::vector<Vec3> positions;  // ego frame, metres
    std::vector<double> depths;   // horizontal distance, metres

    std::size_t size() const noexcept { return embeddings.rows(); }

    void validate() const {
        detail::check(embeddings.rows() > 0, "QuerySet: no queries");
        detail::check(positions.size() == embeddings.rows() && depths.size() == embeddings.rows(),
                      "QuerySet: ", embeddings.rows(), " embeddings, ", positions.size(), " positions, ",
                      depths.size(), " depths");
        for (std::size_t i = 0; i < depths.size(); ++i) {
            detail::check(depths[i] >= 0.0, "QuerySet: negative depth at query ", i);
            detail::check(std::abs(depths[i] - horizontal_norm(positions[i])) <= 1e-6,
                          "QuerySet: depth of query ", i, " disagrees with its position");
        }
    }
};

/// Moves historical queries into the current ego frame; embeddings unchanged.
inline QuerySet align_queries(const QuerySet& prev, const RigidTransform& ego_motion) {
    QuerySet out{prev.embeddings, {}, {}};
    out.positions.reserve(prev.positions.size());
    out.depths.reserve(prev.positions.size());
    for (const auto& p : prev.positions) {
        const Vec3 q = ego_motion.to_current(p);
        out.positions.push_back(q);
        out.depths.push_back(horizontal_norm(q));
    }
    return out;
}

inline Matrix temporal_enhance(const Matrix& patches, const Matrix& queries) {
    detail::check(patches.cols() == queries.cols(), "temporal_enhance: patch width ", patches.cols(),
                  " does not match query width ", queries.cols());
    detail::check(queries.rows() > 0, "temporal_enhance: no queries");
    return attention(patches, queries, queries);
}

struct TemporalGrads {
    Matrix patches;
    Matrix queries;
};

/// Gradients of <upstream, temporal_enhance(patches, queries)>.
inline TemporalGrads temporal_enhance_grad(const Matrix& patches, const Matrix& queries, const Matrix& upstream) {
    detail::check(patches.cols() == queries.cols(), "temporal_enhance_grad: width mismatch");
    auto g = attention_backward(patches, queries, queries, upstream);
    return {std::move(g.queries), add(g.keys, g.values)};
}

inline constexpr double kEntropyEps = 1e-12;

/// Entropy of each row's squared L2-normalized components. All-zero rows
/// score 0.
inline std::vector<double> entropy_scores(const Matrix& features) {
    const Matrix unit = l2_normalize_rows(features);
    std::vector<double> h(features.rows(), 0.0);
    for (std::size_t j = 0; j < unit.rows(); ++j) {
        const auto row = unit.row(j);
        if (std::all_of(row.begin(), row.end(), [](double v) { return v == 0.0; })) continue;
        double s = 0.0;
        for (double v : row) {
            const double p = std::max(v * v, kEntropyEps);
            s -= p * std::log(p);
        }
        h[j] = s;
    }
    return h;
}

struct SelectionMask {
    std::vector<std::size_t> fine_indices;    // ascending
    std::vector<std::size_t> coarse_indices;  // ascending, deduplicated
    std::vector<double> entropies;
    double mean_entropy = 0.0;

    bool empty() const noexcept { return fine_indices.empty(); }
};

/// Selects tokens whose entropy strictly exceeds the mean. Fills the fine
/// side only.
inline SelectionMask adaptive_select(std::span<const double> entropies) {
    detail::check(!entropies.empty(), "adaptive_select: no entropies");
    SelectionMask mask;
    mask.entropies.assign(entropies.begin(), entropies.end());
    double sum = 0.0;
    for (double h : entropies) sum += h;
    const auto [lo, hi] = std::minmax_element(entropies.begin(), entropies.end());
    mask.mean_entropy = std::clamp(sum / static_cast<double>(entropies.size()), *lo, *hi);
    for (std::size_t j = 0; j < entropies.size(); ++j)
        if (entropies[j] > mask.mean_entropy) mask.fine_indices.push_back(j);
    return mask;
}

/// Fills `coarse_indices` from the selected fine tokens.
inline void project_selection(SelectionMask& mask, const PatchGridSpec& fine, const PatchGridSpec& coarse) {
    mask.coarse_indices.clear();
    for (auto idx : mask.fine_indices) mask.coarse_indices.push_back(project_fine_to_coarse(idx, fine, coarse));
    std::sort(mask.coarse_indices.begin(), mask.coarse_indices.end());
    mask.coarse_indices.erase(std::unique(mask.coarse_indices.begin(), mask.coarse_indices.end()),
                              mask.coarse_indices.end());
}

inline Matrix gather_rows(const Matrix& m, std::span<const std::size_t> idx) {
    Matrix out(idx.size(), m.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        detail::check(idx[i] < m.rows(), "gather_rows: index ", idx[i], " out of range ", m.rows());
        std::copy(m.row(idx[i]).begin(), m.row(idx[i]).end(), out.row(i).begin());
    }
    return out;
}

inline void scatter_rows(Matrix& m, std::span<const std::size_t> idx, const Matrix& rows) {
    detail::check(rows.rows() == idx.size() && rows.cols() == m.cols(), "scatter_rows: shape mismatch");
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(rows.row(i).begin(), rows.row(i).end(), m.row(idx[i]).begin());
}

namespace detail {
inline void check_cgfe_shapes(const Matrix& coarse, const Matrix& fine, const Matrix& pe_coarse,
                              const Matrix& pe_fine) {
    const auto c = coarse.cols();
    check(fine.cols() == c && pe_coarse.cols() == c && pe_fine.cols() == c, "cgfe: feature widths differ (",
          coarse.cols(), ", ", fine.cols(), ", ", pe_coarse.cols(), ", ", pe_fine.cols(), ")");
    check(coarse.rows() >= 1 && fine.rows() >= 1, "cgfe: empty selection (", coarse.rows(), " coarse, ",
          fine.rows(), " fine); skip enhancement instead");
    check(pe_coarse.rows() == coarse.rows() && pe_fine.rows() == fine.rows(),
          "cgfe: positional encodings do not match selections");
}
}  // namespace detail

/// Enhanced coarse features F_l + F_e for the selected tokens.
inline Matrix cgfe(const Matrix& coarse, const Matrix& fine, const Matrix& pe_coarse, const Matrix& pe_fine) {
    detail::check_cgfe_shapes(coarse, fine, pe_coarse, pe_fine);
    return add(coarse, attention(add(coarse, pe_coarse), add(fine, pe_fine), fine));
}

struct CgfeGrads {
    Matrix coarse;
    Matrix fine;
};

/// Gradients of <upstream, cgfe(...)> with respect to the selected coarse and
/// fine features (positional encodings are constants).
inline CgfeGrads cgfe_grad(const Matrix& coarse, const Matrix& fine, const Matrix& pe_coarse,
                           const Matrix& pe_fine, const Matrix& upstream) {
    detail::check_cgfe_shapes(coarse, fine, pe_coarse, pe_fine);
    detail::check(upstream.rows() == coarse.rows() && upstream.cols() == coarse.cols(),
                  "cgfe_grad: upstream shape ", upstream.rows(), "x", upstream.cols(), " does not match ",
                  coarse.rows(), "x", coarse.cols());
    auto g = attention_backward(add(coarse, pe_coarse), add(fine, pe_fine), fine, upstream);
    return {add(upstream, g.queries), add(g.keys, g.values)};
}

// Selection mask dump, one record per line after a header:
//
//   # sepatch selection-mask v1
//   frame=<uint> view=<uint> fine=<i>,<i>,... coarse=<j>,<j>,...
//
// Empty index lists are written as "fine=" / "coarse=".

struct MaskRecord {
    std::uint64_t frame = 0;
    std::uint64_t view = 0;
    std::vector<std::size_t> fine;
    std::vector<std::size_t> coarse;

    friend bool operator==(const MaskRecord&, const MaskRecord&) = default;
};

inline void write_mask_header(std::ostream& os) { os << "# sepatch selection-mask v1\n"; }

inline void write_mask_record(std::ostream& os, const MaskRecord& r) {
    auto list = [&](const std::vector<std::size_t>& v) {
        for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
    };
    os << "frame=" << r.frame << " view=" << r.view << " fine=";
    list(r.fine);
    os << " coarse=";
    list(r.coarse);
    os << '\n';
}

inline std::vector<MaskRecord> read_mask_records(std::istream& is) {
    std::vector<MaskRecord> out;
    std::string line;
    int lineno = 0;
    auto indices = [&](std::string_view v) {
        std::vector<std::size_t> idx;
        if (v.empty()) return idx;
        for (auto p : text::split(v, ',')) idx.push_back(text::parse_int<std::size_t>(p, "mask index"));
        return idx;
    };
    while (std::getline(is, line)) {
        ++lineno;
        const auto t = text::trim(line);
        if (t.empty() || t.front() == '#') continue;
        MaskRecord r;
        int seen = 0;
        for (auto field : text::split(t, ' ')) {
            if (field.empty()) continue;
            const auto eq = field.find('=');
            detail::check(eq != std::string_view::npos, "selection-mask:", lineno, ": bad field '", field, "'");
            const auto key = field.substr(0, eq);
            const auto val = field.substr(eq + 1);
            if (key == "frame") r.frame = text::parse_int<std::uint64_t>(val, "frame");
            else if (key == "view") r.view = text::parse_int<std::uint64_t>(val, "view");
            else if (key == "fine") r.fine = indices(val);
            else if (key == "coarse") r.coarse = indices(val);
            else detail::fail("selection-mask:", lineno, ": unknown field '", key, "'");
            ++seen;
        }
        detail::check(seen == 4, "selection-mask:", lineno, ": expected 4 fields");
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace sepatch
