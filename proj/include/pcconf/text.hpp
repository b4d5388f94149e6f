#pragma once

// Number <-> text helpers. All doubles serialize via std::to_chars in the
// shortest form that round-trips, so equal values always produce equal
// bytes.

#include <charconv>
#include <string>
#include <string_view>
#include <system_error>

#include "pcconf/errors.hpp"

namespace pcconf {

inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
    double v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("bad number '" + std::string(s) + "' in " + what);
    return v;
}

inline std::uint64_t parse_u64(std::string_view s, const std::string& what) {
    std::uint64_t v{};
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw ConfigError("bad integer '" + std::string(s) + "' in " + what);
    return v;
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

} // namespace pcconf
