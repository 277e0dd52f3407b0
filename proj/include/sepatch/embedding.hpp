#pragma once

// Patch grids, vanilla and flexible (pseudo-inverse resized) patch embedding,
// normalized 2D sinusoidal positional encodings, and fine-to-coarse token
// index projection.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "sepatch/image.hpp"
#include "sepatch/numerics.hpp"

namespace sepatch {

inline constexpr int kFinePatch = 16;

struct PatchGridSpec {
    int image_h = 0;
    int image_w = 0;
    int patch_size = 0;
    int rows = 0;
    int cols = 0;

    std::size_t token_count() const noexcept {
        return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
    }
    friend bool operator==(const PatchGridSpec&, const PatchGridSpec&) = default;
};

/// Ceil-divided grid; the image is conceptually zero-padded on the bottom and
/// right edges to rows*P x cols*P.
inline PatchGridSpec grid_for(int image_h, int image_w, int patch_size) {
    detail::check(patch_size >= 1, "grid_for: patch size must be >= 1, got ", patch_size);
    detail::check(image_h >= 1 && image_w >= 1, "grid_for: image must be non-empty, got ", image_h,
                  "x", image_w);
    return {image_h, image_w, patch_size, (image_h + patch_size - 1) / patch_size,
            (image_w + patch_size - 1) / patch_size};
}

struct EmbedKernel {
    int patch_size = 0;
    int channels = 0;
    /// (patch_size^2 * channels) x C, rows ordered (row, col, channel).
    Matrix proj;
    std::vector<double> bias;

    std::size_t dim() const noexcept { return proj.cols(); }
};

struct TokenSet {
    Matrix features;
    PatchGridSpec grid;

    int patch_size() const noexcept { return grid.patch_size; }
};

/// Seeded base kernel at 16 px, entries uniform in +-1/sqrt(fan_in).
inline EmbedKernel make_base_kernel(int channels, std::size_t dim, std::uint64_t seed) {
    detail::check(channels >= 1 && dim >= 1, "make_base_kernel: channels and dim must be positive");
    Rng rng(seed);
    const std::size_t fan_in = static_cast<std::size_t>(kFinePatch * kFinePatch * channels);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    EmbedKernel k{kFinePatch, channels, rng.matrix(fan_in, dim, -bound, bound), {}};
    k.bias.resize(dim);
    for (auto& b : k.bias) b = rng.uniform(-bound, bound);
    return k;
}

/// 1D bilinear resampling matrix (dst x src) with half-pixel centres and
/// edge clamping, no antialiasing.
inline Matrix bilinear_resize_1d(int src, int dst) {
    detail::check(src >= 1 && dst >= 1, "bilinear_resize_1d: sizes must be positive");
    Matrix l(static_cast<std::size_t>(dst), static_cast<std::size_t>(src));
    const double ratio = static_cast<double>(src) / static_cast<double>(dst);
    for (int i = 0; i < dst; ++i) {
        double s = (i + 0.5) * ratio - 0.5;
        s = std::clamp(s, 0.0, static_cast<double>(src - 1));
        const int i0 = static_cast<int>(std::floor(s));
        const int i1 = std::min(i0 + 1, src - 1);
        const double frac = s - i0;
        l(i, i0) += 1.0 - frac;
        l(i, i1) += frac;
    }
    return l;
}

/// Bilinear resize of a src x src patch to dst x dst, as a (dst^2 x src^2)
/// matrix acting on row-major flattened pixels.
inline Matrix bilinear_resize_2d(int src, int dst) {
    const Matrix l = bilinear_resize_1d(src, dst);
    const auto s = static_cast<std::size_t>(src);
    const auto d = static_cast<std::size_t>(dst);
    Matrix r(d * d, s * s);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j)
            for (std::size_t a = 0; a < s; ++a) {
                const double lia = l(i, a);
                if (lia == 0.0) continue;
                for (std::size_t b = 0; b < s; ++b) r(i * d + j, a * s + b) = lia * l(j, b);
            }
    return r;
}

/// Flexible patch embedding: resizes the base projection so that
/// <resize(x), proj_new> best matches <x, proj_base> in least squares,
/// i.e. proj_new = pinv(R^T) proj_base applied per channel.
inline EmbedKernel pi_resize_kernel(const EmbedKernel& base, int target_p) {
    detail::check(target_p >= 2, "pi_resize_kernel: target patch size must be >= 2, got ", target_p);
    const int src = base.patch_size;
    const Matrix r = bilinear_resize_2d(src, target_p);
    detail::check(std::any_of(r.data().begin(), r.data().end(), [](double v) { return v != 0.0; }),
                  "pi_resize_kernel: degenerate resize map");

    const std::size_t src_px = static_cast<std::size_t>(src * src);
    const std::size_t dst_px = static_cast<std::size_t>(target_p * target_p);
    const std::size_t ch = static_cast<std::size_t>(base.channels);
    const std::size_t dim = base.dim();

    const bool upsample = dst_px >= src_px;
    const Matrix rt = transpose(r);
    const Matrix gram = upsample ? matmul(rt, r) : matmul(r, rt);

    EmbedKernel out{target_p, base.channels, Matrix(dst_px * ch, dim), base.bias};
    for (std::size_t c = 0; c < ch; ++c) {
        Matrix w(src_px, dim);
        for (std::size_t p = 0; p < src_px; ++p)
            for (std::size_t k = 0; k < dim; ++k) w(p, k) = base.proj(p * ch + c, k);
        Matrix w_new;
        try {
            w_new = upsample ? matmul(r, cholesky_solve(gram, w)) : cholesky_solve(gram, matmul(r, w));
        } catch (const Error&) {
            detail::fail("pi_resize_kernel: resize map ", src, " -> ", target_p, " is rank deficient");
        }
        for (std::size_t p = 0; p < dst_px; ++p)
            for (std::size_t k = 0; k < dim; ++k) out.proj(p * ch + c, k) = w_new(p, k);
    }
    return out;
}

/// Flattened patches (N x P^2*channels), row-major over the grid; pixels past
/// the image edge read as zero.
inline Matrix extract_patches(const Image& image, const PatchGridSpec& grid) {
    const int p = grid.patch_size;
    const auto ch = static_cast<std::size_t>(image.channels);
    Matrix patches(grid.token_count(), static_cast<std::size_t>(p * p) * ch);
    for (int gr = 0; gr < grid.rows; ++gr)
        for (int gc = 0; gc < grid.cols; ++gc) {
            auto dst = patches.row(static_cast<std::size_t>(gr * grid.cols + gc));
            std::size_t k = 0;
            for (int r = 0; r < p; ++r)
                for (int c = 0; c < p; ++c) {
                    const int y = gr * p + r;
                    const int x = gc * p + c;
                    const bool inside = y < image.height && x < image.width;
                    for (std::size_t i = 0; i < ch; ++i, ++k)
                        dst[k] = inside ? image.at(y, x, static_cast<int>(i)) : 0.0;
                }
        }
    return patches;
}

inline TokenSet embed(const Image& image, const EmbedKernel& kernel) {
    detail::check(image.channels == kernel.channels, "embed: image has ", image.channels,
                  " channels, kernel expects ", kernel.channels);
    detail::check(kernel.proj.rows() ==
                      static_cast<std::size_t>(kernel.patch_size * kernel.patch_size * kernel.channels),
                  "embed: kernel projection has ", kernel.proj.rows(), " rows for patch size ",
                  kernel.patch_size);
    const PatchGridSpec grid = grid_for(image.height, image.width, kernel.patch_size);
    Matrix features = matmul(extract_patches(image, grid), kernel.proj);
    for (std::size_t t = 0; t < features.rows(); ++t) {
        auto row = features.row(t);
        for (std::size_t k = 0; k < row.size(); ++k) row[k] += kernel.bias[k];
    }
    return {std::move(features), grid};
}

/// Angular scale applied to normalized coordinates before the frequency
/// progression.
inline constexpr double kPeScale = 100.0;

/// Fixed 2D sinusoidal encoding on normalized grid coordinates (row/rows,
/// col/cols). Channel layout: [sin(row), cos(row), sin(col), cos(col)], each
/// block C/4 wide with frequencies 10000^(-k/(C/4)).
inline Matrix positional_encoding(const PatchGridSpec& grid, std::size_t dim) {
    detail::check(dim > 0 && dim % 4 == 0, "positional_encoding: C must be a positive multiple of 4, got ",
                  dim);
    const std::size_t quarter = dim / 4;
    std::vector<double> freq(quarter);
    for (std::size_t k = 0; k < quarter; ++k)
        freq[k] = std::pow(10000.0, -static_cast<double>(k) / static_cast<double>(quarter));

    Matrix pe(grid.token_count(), dim);
    for (int r = 0; r < grid.rows; ++r)
        for (int c = 0; c < grid.cols; ++c) {
            auto row = pe.row(static_cast<std::size_t>(r * grid.cols + c));
            const double ny = kPeScale * r / grid.rows;
            const double nx = kPeScale * c / grid.cols;
            for (std::size_t k = 0; k < quarter; ++k) {
                row[k] = std::sin(ny * freq[k]);
                row[quarter + k] = std::cos(ny * freq[k]);
                row[2 * quarter + k] = std::sin(nx * freq[k]);
                row[3 * quarter + k] = std::cos(nx * freq[k]);
            }
        }
    return pe;
}

/// Coarse token containing the pixel centre of a fine token.
inline std::size_t project_fine_to_coarse(std::size_t fine_idx, const PatchGridSpec& fine,
                                          const PatchGridSpec& coarse) {
    detail::check(fine.image_h == coarse.image_h && fine.image_w == coarse.image_w,
                  "project_fine_to_coarse: grids describe different images (", fine.image_h, "x",
                  fine.image_w, " vs ", coarse.image_h, "x", coarse.image_w, ")");
    detail::check(fine_idx < fine.token_count(), "project_fine_to_coarse: fine index ", fine_idx,
                  " out of range for ", fine.token_count(), " tokens");
    const auto r = static_cast<double>(fine_idx / static_cast<std::size_t>(fine.cols));
    const auto c = static_cast<double>(fine_idx % static_cast<std::size_t>(fine.cols));
    const double cy = (r + 0.5) * fine.patch_size;
    const double cx = (c + 0.5) * fine.patch_size;
    const int cr = std::min(static_cast<int>(std::floor(cy / coarse.patch_size)), coarse.rows - 1);
    const int cc = std::min(static_cast<int>(std::floor(cx / coarse.patch_size)), coarse.cols - 1);
    return static_cast<std::size_t>(cr * coarse.cols + cc);
}

}  // namespace sepatch
