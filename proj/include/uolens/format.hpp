#pragma once

#include <charconv>
#include <string>

namespace uolens {

// Locale-independent decimal formatting at 17 significant digits, enough to
// round-trip any double bit-exactly.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

}  // namespace uolens
