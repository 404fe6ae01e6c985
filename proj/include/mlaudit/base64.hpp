#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mlaudit::base64 {

inline constexpr char kAlphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

inline std::string encode(const std::uint8_t* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    std::size_t i = 0;
    for (; i + 3 <= len; i += 3) {
        std::uint32_t v = (std::uint32_t(data[i]) << 16) |
                          (std::uint32_t(data[i + 1]) << 8) | data[i + 2];
        out.push_back(kAlphabet[(v >> 18) & 0x3f]);
        out.push_back(kAlphabet[(v >> 12) & 0x3f]);
        out.push_back(kAlphabet[(v >> 6) & 0x3f]);
        out.push_back(kAlphabet[v & 0x3f]);
    }
    const std::size_t rem = len - i;
    if (rem == 1) {
        std::uint32_t v = std::uint32_t(data[i]) << 16;
        out.push_back(kAlphabet[(v >> 18) & 0x3f]);
        out.push_back(kAlphabet[(v >> 12) & 0x3f]);
        out.push_back('=');
        out.push_back('=');
    } else if (rem == 2) {
        std::uint32_t v = (std::uint32_t(data[i]) << 16) |
                          (std::uint32_t(data[i + 1]) << 8);
        out.push_back(kAlphabet[(v >> 18) & 0x3f]);
        out.push_back(kAlphabet[(v >> 12) & 0x3f]);
        out.push_back(kAlphabet[(v >> 6) & 0x3f]);
        out.push_back('=');
    }
    return out;
}

inline std::string encode(const std::vector<std::uint8_t>& data) {
    return encode(data.data(), data.size());
}

// Strict decode: canonical padding required, no whitespace. Returns nullopt
// on any malformed input so trace ingestion can count it as a reject.
inline std::optional<std::vector<std::uint8_t>> decode(std::string_view s) {
    static constexpr auto make_table = [] {
        std::array<std::int8_t, 256> t{};
        t.fill(-1);
        for (int i = 0; i < 64; ++i) t[std::uint8_t(kAlphabet[i])] = std::int8_t(i);
        return t;
    };
    static const std::array<std::int8_t, 256> table = make_table();

    if (s.size() % 4 != 0) return std::nullopt;
    std::vector<std::uint8_t> out;
    out.reserve(s.size() / 4 * 3);
    for (std::size_t i = 0; i < s.size(); i += 4) {
        const bool last = (i + 4 == s.size());
        int pad = 0;
        std::uint32_t v = 0;
        for (int j = 0; j < 4; ++j) {
            char c = s[i + j];
            if (c == '=') {
                if (!last || j < 2) return std::nullopt;
                ++pad;
                v <<= 6;
                continue;
            }
            if (pad > 0) return std::nullopt;  // '=' only at the very end
            std::int8_t d = table[std::uint8_t(c)];
            if (d < 0) return std::nullopt;
            v = (v << 6) | std::uint32_t(d);
        }
        out.push_back(std::uint8_t((v >> 16) & 0xff));
        if (pad < 2) out.push_back(std::uint8_t((v >> 8) & 0xff));
        if (pad < 1) out.push_back(std::uint8_t(v & 0xff));
    }
    return out;
}

}  // namespace mlaudit::base64
