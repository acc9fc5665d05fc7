#pragma once

#include <charconv>
#include <cstdio>
#include <string>

namespace prge {

// Shortest decimal text that parses back to the same value.
template <typename Real>
std::string shortest(Real v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

}  // namespace prge
