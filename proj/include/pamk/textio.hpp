#pragma once

#include <charconv>
#include <cmath>
#include <string>
#include <string_view>

#include "pamk/errors.hpp"

namespace pamk {

/// Shortest decimal form that round-trips the exact double. Infinities map
/// to "inf"/"-inf".
inline std::string format_double(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    if (std::isnan(v)) return "nan";
    char buf[32];
    const std::to_chars_result r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
    // Leading whitespace tolerated for CSV fields.
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    if (s == "inf") return HUGE_VAL;
    if (s == "-inf") return -HUGE_VAL;
    double v = 0.0;
    const std::from_chars_result r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc()) throw IoError("cannot parse number: " + std::string(s));
    return v;
}

} // namespace pamk
