#pragma once

// Internal JSON helpers shared by the snapshot and message codecs.

#include <cmath>
#include <limits>
#include <string>

#include <json.hpp>

#include "epicsim/error.hpp"

namespace epicsim::detail {

// JSON has no infinities; they travel as strings.
inline nlohmann::json encode_double(double x) {
    if (std::isfinite(x)) return x;
    if (std::isnan(x)) return "nan";
    return x > 0 ? "inf" : "-inf";
}

inline double decode_double(const nlohmann::json& j, const std::string& path) {
    if (j.is_number()) return j.get<double>();
    if (j.is_string()) {
        const auto& s = j.get_ref<const std::string&>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    }
    fail(ErrorKind::Validation, path + ": expected a number");
}

} // namespace epicsim::detail
