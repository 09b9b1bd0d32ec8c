#pragma once

#include <cmath>

#include "json.hpp"

namespace plumescout {

// Rounds to `digits` significant decimal digits so serialized JSON numbers
// print identically across runs and platforms.
inline double round_sig(double v, int digits = 6) {
    if (v == 0.0 || !std::isfinite(v)) return v;
    double mag = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::fabs(v)))));
    return std::round(v * mag) / mag;
}

inline nlohmann::json json_num(double v, int digits = 6) {
    if (!std::isfinite(v)) return nullptr;
    return round_sig(v, digits);
}

}  // namespace plumescout
