#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

namespace mlaudit {

// Full-precision serialization: shortest decimal form that parses back to
// the same double (never more than 17 significant digits). NaN serializes
// as the literal string "NaN" in both CSV and JSON.
inline std::string format_real(double v) {
    if (std::isnan(v)) return "NaN";
    if (!std::isfinite(v)) {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }
    return nlohmann::json(v).dump();
}

// Fixed-point with the platform's correctly-rounded binary-to-decimal
// conversion, which resolves representable ties to even (0.125 -> "0.12").
inline std::string format_fixed(double v, int decimals) {
    if (std::isnan(v)) return "NaN";
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

// JSON value for a possibly-NaN real: numbers stay numbers, NaN becomes
// the string "NaN" (JSON itself has no NaN literal).
inline nlohmann::ordered_json json_real(double v) {
    if (std::isnan(v)) return "NaN";
    return v;
}

}  // namespace mlaudit
