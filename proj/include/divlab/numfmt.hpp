#pragma once

#include <cmath>
#include <string>

#include <fmt/format.h>

namespace divlab {

/// Fixed 17-significant-digit round-trip rendering used by every emitted table.
inline std::string format_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return fmt::format("{:.17g}", v);
}

}  // namespace divlab
