#pragma once

// Pixel arrays and their on-disk forms.
//
// Raw binary layout (".spimg"): three little-endian uint32 values (height,
// width, channels) followed by height*width*channels little-endian IEEE-754
// doubles in row-major (row, col, channel) order.
//
// Netpbm: binary PGM (P5, 1 channel) and PPM (P6, 3 channels) with maxval 255.
// Values map to [0, 1] on read; on write they are clamped and rounded.

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "sepatch/error.hpp"

namespace sepatch {

struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w) * static_cast<std::size_t>(c), fill) {
        detail::check(h >= 1 && w >= 1 && c >= 1, "Image: dimensions must be positive, got ", h, "x", w,
                      "x", c);
    }

    std::size_t offset(int r, int c, int ch) const noexcept {
        return (static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)) *
                   static_cast<std::size_t>(channels) +
               static_cast<std::size_t>(ch);
    }
    double& at(int r, int c, int ch = 0) noexcept { return pixels[offset(r, c, ch)]; }
    double at(int r, int c, int ch = 0) const noexcept { return pixels[offset(r, c, ch)]; }

    friend bool operator==(const Image&, const Image&) = default;
};

namespace detail {

inline void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    check(is.good(), "raw image: truncated header");
    return static_cast<std::uint32_t>(b[0]) | static_cast<std::uint32_t>(b[1]) << 8 |
           static_cast<std::uint32_t>(b[2]) << 16 | static_cast<std::uint32_t>(b[3]) << 24;
}

inline std::string netpbm_token(std::istream& is) {
    std::string tok;
    char ch;
    while (is.get(ch)) {
        if (ch == '#') {
            std::string skip;
            std::getline(is, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!tok.empty()) break;
            continue;
        }
        tok.push_back(ch);
    }
    check(!tok.empty(), "netpbm: truncated header");
    return tok;
}

}  // namespace detail

inline void write_raw_image(std::ostream& os, const Image& img) {
    detail::put_u32(os, static_cast<std::uint32_t>(img.height));
    detail::put_u32(os, static_cast<std::uint32_t>(img.width));
    detail::put_u32(os, static_cast<std::uint32_t>(img.channels));
    for (double v : img.pixels) {
        auto bits = std::bit_cast<std::uint64_t>(v);
        unsigned char b[8];
        for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
        os.write(reinterpret_cast<const char*>(b), 8);
    }
}

inline Image read_raw_image(std::istream& is) {
    const auto h = detail::get_u32(is);
    const auto w = detail::get_u32(is);
    const auto c = detail::get_u32(is);
    Image img(static_cast<int>(h), static_cast<int>(w), static_cast<int>(c));
    for (auto& v : img.pixels) {
        unsigned char b[8];
        is.read(reinterpret_cast<char*>(b), 8);
        detail::check(is.good(), "raw image: truncated pixel data");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        v = std::bit_cast<double>(bits);
    }
    return img;
}

inline void write_netpbm(std::ostream& os, const Image& img) {
    detail::check(img.channels == 1 || img.channels == 3, "netpbm: only 1 or 3 channels supported, got ",
                  img.channels);
    os << (img.channels == 1 ? "P5" : "P6") << '\n' << img.width << ' ' << img.height << "\n255\n";
    std::vector<char> bytes(img.pixels.size());
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        const double v = std::clamp(img.pixels[i], 0.0, 1.0);
        bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
    }
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline Image read_netpbm(std::istream& is) {
    const std::string magic = detail::netpbm_token(is);
    detail::check(magic == "P5" || magic == "P6", "netpbm: unsupported magic '", magic, "'");
    const int w = std::stoi(detail::netpbm_token(is));
    const int h = std::stoi(detail::netpbm_token(is));
    const int maxval = std::stoi(detail::netpbm_token(is));
    detail::check(maxval > 0 && maxval < 256, "netpbm: only 8-bit maxval supported, got ", maxval);
    Image img(h, w, magic == "P5" ? 1 : 3);
    std::vector<char> bytes(img.pixels.size());
    is.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    detail::check(static_cast<std::size_t>(is.gcount()) == bytes.size(), "netpbm: truncated pixel data");
    for (std::size_t i = 0; i < bytes.size(); ++i)
        img.pixels[i] = static_cast<unsigned char>(bytes[i]) / static_cast<double>(maxval);
    return img;
}

inline Image load_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    detail::check(in.good(), "cannot open image '", path, "'");
    const bool netpbm = path.ends_with(".pgm") || path.ends_with(".ppm");
    return netpbm ? read_netpbm(in) : read_raw_image(in);
}

inline void save_image(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    detail::check(out.good(), "cannot write image '", path, "'");
    const bool netpbm = path.ends_with(".pgm") || path.ends_with(".ppm");
    netpbm ? write_netpbm(out, img) : write_raw_image(out, img);
}

}  // namespace sepatch
