#pragma once

// Small helpers shared by the text formats: shortest round-trip number
// formatting, strict number parsing and "key = value" records.

#include <charconv>
#include <cstdint>
#include <istream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "sepatch/error.hpp"

namespace sepatch::text {

/// Shortest decimal that parses back to exactly `v`.
inline std::string format_double(double v) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    detail::check(ec == std::errc{}, "format_double: conversion failed");
    return {buf, end};
}

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline double parse_double(std::string_view s, std::string_view what) {
    s = trim(s);
    double v = 0.0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    detail::check(ec == std::errc{} && end == s.data() + s.size() && !s.empty(), what,
                  ": expected a number, got '", s, "'");
    return v;
}

template <typename Int = long long>
inline Int parse_int(std::string_view s, std::string_view what) {
    s = trim(s);
    Int v = 0;
    auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    detail::check(ec == std::errc{} && end == s.data() + s.size() && !s.empty(), what,
                  ": expected an integer, got '", s, "'");
    return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

struct KeyValue {
    std::string key;
    std::string value;
    int line = 0;
};

/// Reads "key = value" lines. Blank lines and lines starting with '#' are
/// skipped; anything else without '=' is an error.
inline std::vector<KeyValue> read_key_values(std::istream& is, std::string_view source) {
    std::vector<KeyValue> out;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        detail::check(eq != std::string_view::npos, source, ":", lineno, ": expected 'key = value', got '",
                      t, "'");
        out.push_back({std::string(trim(t.substr(0, eq))), std::string(trim(t.substr(eq + 1))), lineno});
    }
    return out;
}

}  // namespace sepatch::text
