#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mlaudit/shorty.hpp"

namespace mlaudit {

// One decoded argument or return value. The kind picks the active variant:
// Void -> unit, Bool -> bool, Byte/Short/Int/Long -> i64 (value fits the
// declared width), Char -> u16 code point, Float/Double -> f32/f64,
// Pointer -> opaque byte blob (4-byte handle, or <= 500 captured bytes
// when the pointer is the final argument of its record).
class TypedValue {
public:
    using Blob = std::vector<std::uint8_t>;

    TypedValue() = default;

    static TypedValue unit() { return TypedValue(TypeKind::Void, std::monostate{}); }
    static TypedValue of_bool(bool b) { return TypedValue(TypeKind::Bool, b); }
    static TypedValue of_int(TypeKind k, std::int64_t v) { return TypedValue(k, v); }
    static TypedValue of_char(std::uint16_t cp) { return TypedValue(TypeKind::Char, cp); }
    static TypedValue of_float(float f) { return TypedValue(TypeKind::Float, f); }
    static TypedValue of_double(double d) { return TypedValue(TypeKind::Double, d); }
    static TypedValue of_blob(Blob b) { return TypedValue(TypeKind::Pointer, std::move(b)); }

    TypeKind kind() const { return kind_; }

    bool as_bool() const { return std::get<bool>(v_); }
    std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
    std::uint16_t as_char() const { return std::get<std::uint16_t>(v_); }
    float as_float() const { return std::get<float>(v_); }
    double as_double() const { return std::get<double>(v_); }
    const Blob& as_blob() const { return std::get<Blob>(v_); }

    bool operator==(const TypedValue&) const = default;

private:
    using Storage = std::variant<std::monostate, bool, std::int64_t,
                                 std::uint16_t, float, double, Blob>;

    TypedValue(TypeKind k, Storage v) : kind_(k), v_(std::move(v)) {}

    TypeKind kind_ = TypeKind::Void;
    Storage v_;
};

inline std::string to_string(const TypedValue& v) {
    switch (v.kind()) {
        case TypeKind::Void:   return "()";
        case TypeKind::Bool:   return v.as_bool() ? "true" : "false";
        case TypeKind::Byte:
        case TypeKind::Short:
        case TypeKind::Int:
        case TypeKind::Long:   return std::to_string(v.as_int());
        case TypeKind::Char:   return "u+" + std::to_string(v.as_char());
        case TypeKind::Float:  return std::to_string(v.as_float());
        case TypeKind::Double: return std::to_string(v.as_double());
        case TypeKind::Pointer:
            return "blob[" + std::to_string(v.as_blob().size()) + "]";
    }
    return "?";
}

}  // namespace mlaudit
