#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "mlaudit/errors.hpp"

namespace mlaudit {

// Value categories carried by a shorty signature. One character per slot:
// the first character is the return type, the rest are arguments in order.
enum class TypeKind : std::uint8_t {
    Void,     // V
    Bool,     // Z
    Byte,     // B
    Short,    // S
    Char,     // C
    Int,      // I
    Long,     // J
    Float,    // F
    Double,   // D
    Pointer,  // L — object/array reference; contents are opaque bytes
};

inline char type_kind_char(TypeKind k) {
    switch (k) {
        case TypeKind::Void:    return 'V';
        case TypeKind::Bool:    return 'Z';
        case TypeKind::Byte:    return 'B';
        case TypeKind::Short:   return 'S';
        case TypeKind::Char:    return 'C';
        case TypeKind::Int:     return 'I';
        case TypeKind::Long:    return 'J';
        case TypeKind::Float:   return 'F';
        case TypeKind::Double:  return 'D';
        case TypeKind::Pointer: return 'L';
    }
    return '?';
}

// Wire size of one argument slot. Everything is a 4-byte slot except
// Long and Double. Pointer slots hold a 4-byte handle unless the pointer
// is the final argument, in which case a blob (<= 500 bytes) is captured
// instead; that special case lives in the codec, not here.
inline constexpr std::size_t type_wire_size(TypeKind k) {
    return (k == TypeKind::Long || k == TypeKind::Double) ? 8 : 4;
}

struct ShortySignature {
    TypeKind return_kind = TypeKind::Void;
    std::vector<TypeKind> arg_kinds;
    std::string text;  // original shorty string

    bool operator==(const ShortySignature&) const = default;
};

inline TypeKind type_kind_from_char(char c) {
    switch (c) {
        case 'V': return TypeKind::Void;
        case 'Z': return TypeKind::Bool;
        case 'B': return TypeKind::Byte;
        case 'S': return TypeKind::Short;
        case 'C': return TypeKind::Char;
        case 'I': return TypeKind::Int;
        case 'J': return TypeKind::Long;
        case 'F': return TypeKind::Float;
        case 'D': return TypeKind::Double;
        case 'L': return TypeKind::Pointer;
        default:
            fail(errc::unknown_shorty_char,
                 std::string("shorty character '") + c + "' is not in VZBSCIJFDL");
    }
}

// Parse a shorty string: first character is the return kind, the rest are
// argument kinds. Void is only legal in the return slot.
inline ShortySignature parse_shorty(std::string_view s) {
    if (s.empty()) fail(errc::unknown_shorty_char, "empty shorty string");
    ShortySignature sig;
    sig.text.assign(s);
    sig.return_kind = type_kind_from_char(s[0]);
    sig.arg_kinds.reserve(s.size() - 1);
    for (std::size_t i = 1; i < s.size(); ++i) {
        TypeKind k = type_kind_from_char(s[i]);
        if (k == TypeKind::Void)
            fail(errc::void_argument,
                 "'V' at position " + std::to_string(i) + " of shorty \"" +
                     std::string(s) + "\"");
        sig.arg_kinds.push_back(k);
    }
    return sig;
}

}  // namespace mlaudit
