#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <vector>

#include "mlaudit/errors.hpp"
#include "mlaudit/shorty.hpp"
#include "mlaudit/typed_value.hpp"

namespace mlaudit {

// Wire layout for raw argument/return bytes.
//
//   - little-endian, contiguous, no alignment padding
//   - non-static invocations carry a 4-byte receiver handle first
//   - Bool/Byte/Short/Char occupy a 4-byte slot, value in the low bytes
//   - Pointer arguments are 4-byte handles, except the final argument:
//     there the producer captures the referenced bytes directly, capped
//     at kPointerBlobCap (anything past the cap is ignored on decode)
//
// Object sizes are unknown to the producer, so only the final-position
// pointer can carry a variable-length blob without making the layout
// ambiguous; everything before it must be fixed-width.
inline constexpr std::size_t kPointerBlobCap = 500;
inline constexpr std::size_t kReceiverHandleBytes = 4;

namespace detail {

inline std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint32_t v;
    std::memcpy(&v, b.data() + at, 4);
    return v;  // host is little-endian on every supported target
}

inline std::uint64_t read_u64(std::span<const std::uint8_t> b, std::size_t at) {
    std::uint64_t v;
    std::memcpy(&v, b.data() + at, 8);
    return v;
}

inline void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    const std::size_t at = out.size();
    out.resize(at + 4);
    std::memcpy(out.data() + at, &v, 4);
}

inline void write_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    const std::size_t at = out.size();
    out.resize(at + 8);
    std::memcpy(out.data() + at, &v, 8);
}

inline TypedValue decode_scalar(TypeKind k, std::span<const std::uint8_t> raw,
                                std::size_t at) {
    switch (k) {
        case TypeKind::Bool:
            return TypedValue::of_bool(read_u32(raw, at) != 0);
        case TypeKind::Byte:
            return TypedValue::of_int(k, std::int64_t(std::int8_t(read_u32(raw, at) & 0xff)));
        case TypeKind::Short:
            return TypedValue::of_int(k, std::int64_t(std::int16_t(read_u32(raw, at) & 0xffff)));
        case TypeKind::Char:
            return TypedValue::of_char(std::uint16_t(read_u32(raw, at) & 0xffff));
        case TypeKind::Int:
            return TypedValue::of_int(k, std::int64_t(std::int32_t(read_u32(raw, at))));
        case TypeKind::Long:
            return TypedValue::of_int(k, std::int64_t(read_u64(raw, at)));
        case TypeKind::Float:
            return TypedValue::of_float(std::bit_cast<float>(read_u32(raw, at)));
        case TypeKind::Double:
            return TypedValue::of_double(std::bit_cast<double>(read_u64(raw, at)));
        default:
            fail(errc::unknown_shorty_char, "not a scalar kind");
    }
}

inline void encode_scalar(std::vector<std::uint8_t>& out, const TypedValue& v) {
    switch (v.kind()) {
        case TypeKind::Bool:
            write_u32(out, v.as_bool() ? 1u : 0u);
            return;
        case TypeKind::Byte:
            write_u32(out, std::uint32_t(std::int32_t(std::int8_t(v.as_int()))));
            return;
        case TypeKind::Short:
            write_u32(out, std::uint32_t(std::int32_t(std::int16_t(v.as_int()))));
            return;
        case TypeKind::Char:
            write_u32(out, std::uint32_t(v.as_char()));
            return;
        case TypeKind::Int:
            write_u32(out, std::uint32_t(std::int32_t(v.as_int())));
            return;
        case TypeKind::Long:
            write_u64(out, std::uint64_t(v.as_int()));
            return;
        case TypeKind::Float:
            write_u32(out, std::bit_cast<std::uint32_t>(v.as_float()));
            return;
        case TypeKind::Double:
            write_u64(out, std::bit_cast<std::uint64_t>(v.as_double()));
            return;
        default:
            fail(errc::void_argument, "cannot encode a Void/Pointer slot as scalar");
    }
}

}  // namespace detail

// Decode the raw argument bytes of one invocation. Non-static invocations
// skip the leading receiver handle. Throws length_mismatch when raw is
// shorter than the signature requires, or when trailing bytes remain after
// a non-pointer final argument.
inline std::vector<TypedValue> decode_args(const ShortySignature& sig,
                                           std::span<const std::uint8_t> raw,
                                           bool is_static) {
    std::size_t pos = is_static ? 0 : kReceiverHandleBytes;
    if (raw.size() < pos)
        fail(errc::length_mismatch, "raw shorter than the receiver handle");

    std::vector<TypedValue> out;
    out.reserve(sig.arg_kinds.size());
    const std::size_t n = sig.arg_kinds.size();
    for (std::size_t i = 0; i < n; ++i) {
        const TypeKind k = sig.arg_kinds[i];
        const bool final_arg = (i + 1 == n);
        if (k == TypeKind::Pointer && final_arg) {
            const std::size_t remaining = raw.size() - pos;
            const std::size_t take = std::min(kPointerBlobCap, remaining);
            out.push_back(TypedValue::of_blob(
                {raw.begin() + long(pos), raw.begin() + long(pos + take)}));
            pos = raw.size();  // bytes past the cap are producer overrun; ignore
            continue;
        }
        const std::size_t sz = (k == TypeKind::Pointer) ? 4 : type_wire_size(k);
        if (raw.size() - pos < sz)
            fail(errc::length_mismatch,
                 "raw ends inside argument " + std::to_string(i) + " of \"" +
                     sig.text + "\"");
        if (k == TypeKind::Pointer) {
            out.push_back(TypedValue::of_blob(
                {raw.begin() + long(pos), raw.begin() + long(pos + 4)}));
        } else {
            out.push_back(detail::decode_scalar(k, raw, pos));
        }
        pos += sz;
    }
    if (pos != raw.size())
        fail(errc::length_mismatch,
             std::to_string(raw.size() - pos) + " unconsumed trailing bytes");
    return out;
}

// Decode a raw return value. Void requires empty raw; Pointer captures up
// to kPointerBlobCap bytes; scalars require their exact wire size.
inline TypedValue decode_return(const ShortySignature& sig,
                                std::span<const std::uint8_t> raw) {
    const TypeKind k = sig.return_kind;
    if (k == TypeKind::Void) {
        if (!raw.empty())
            fail(errc::length_mismatch, "void return carries bytes");
        return TypedValue::unit();
    }
    if (k == TypeKind::Pointer) {
        const std::size_t take = std::min(kPointerBlobCap, raw.size());
        return TypedValue::of_blob({raw.begin(), raw.begin() + long(take)});
    }
    if (raw.size() != type_wire_size(k))
        fail(errc::length_mismatch,
             "return of kind '" + std::string(1, type_kind_char(k)) +
                 "' needs " + std::to_string(type_wire_size(k)) + " bytes, got " +
                 std::to_string(raw.size()));
    return detail::decode_scalar(k, raw, 0);
}

// Exact inverse of decode_args on codec-producible values: every
// non-final Pointer value must be a 4-byte handle, the final Pointer may
// carry up to kPointerBlobCap bytes. Non-static output leads with a
// zeroed receiver handle.
inline std::vector<std::uint8_t> encode_args(const std::vector<TypedValue>& values,
                                             bool is_static) {
    std::vector<std::uint8_t> out;
    if (!is_static) out.resize(kReceiverHandleBytes, 0);

    const std::size_t n = values.size();
    for (std::size_t i = 0; i < n; ++i) {
        const TypedValue& v = values[i];
        if (v.kind() == TypeKind::Void)
            fail(errc::void_argument, "Void cannot be an argument value");
        if (v.kind() == TypeKind::Pointer) {
            const auto& blob = v.as_blob();
            const bool final_arg = (i + 1 == n);
            if (final_arg) {
                if (blob.size() > kPointerBlobCap)
                    fail(errc::blob_too_large,
                         std::to_string(blob.size()) + " > " +
                             std::to_string(kPointerBlobCap));
            } else if (blob.size() != 4) {
                fail(errc::handle_size_mismatch,
                     "non-final pointer argument " + std::to_string(i) +
                         " must be a 4-byte handle, got " +
                         std::to_string(blob.size()) + " bytes");
            }
            out.insert(out.end(), blob.begin(), blob.end());
            continue;
        }
        detail::encode_scalar(out, v);
    }
    return out;
}

// Shorty of a value list (return kind prepended), mainly for synthesis.
inline std::string shorty_of(TypeKind return_kind,
                             const std::vector<TypedValue>& values) {
    std::string s(1, type_kind_char(return_kind));
    for (const auto& v : values) s.push_back(type_kind_char(v.kind()));
    return s;
}

}  // namespace mlaudit
