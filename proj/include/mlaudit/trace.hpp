#pragma once

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlaudit/base64.hpp"
#include "mlaudit/errors.hpp"

namespace mlaudit {

enum class RecordKind : std::uint8_t { QuickCode, JniTrampoline, Callback };

inline const char* record_kind_tag(RecordKind k) {
    switch (k) {
        case RecordKind::QuickCode:     return "quick";
        case RecordKind::JniTrampoline: return "jni";
        case RecordKind::Callback:      return "cb";
    }
    return "?";
}

// One logged function invocation. QuickCode/JniTrampoline records carry a
// shorty plus raw argument/return bytes; Callback records carry a
// serialized payload (e.g. the body of an async native->managed message).
struct TraceRecord {
    int schema_version = 1;
    std::uint64_t timestamp_ns = 0;
    std::int32_t pid = 0;
    std::int32_t tid = 0;
    RecordKind kind = RecordKind::QuickCode;
    std::string function_name;
    std::optional<std::string> library;
    std::optional<std::uint64_t> offset;  // entry offset within library
    bool is_static = true;
    std::optional<std::string> shorty;
    std::vector<std::uint8_t> raw_args;
    std::vector<std::uint8_t> raw_return;
    std::optional<std::string> payload;
    std::optional<std::vector<std::string>> stack;  // innermost first

    bool operator==(const TraceRecord&) const = default;
};

struct ParseCounters {
    std::uint64_t read = 0;
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    std::map<std::string, std::uint64_t> reject_reasons;
};

struct TraceLog {
    std::vector<TraceRecord> records;
    ParseCounters counters;
};

namespace detail {

inline void json_escape_into(std::string& out, std::string_view s) {
    static constexpr char hex[] = "0123456789abcdef";
    for (unsigned char c : s) {
        switch (c) {
            case '"':  out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (c < 0x20) {
                    out += "\\u00";
                    out.push_back(hex[c >> 4]);
                    out.push_back(hex[c & 0xf]);
                } else {
                    out.push_back(char(c));
                }
        }
    }
}

inline void append_key(std::string& out, const char* key) {
    out.push_back(',');
    out.push_back('"');
    out += key;
    out += "\":";
}

inline std::optional<std::uint64_t> parse_hex_offset(std::string_view s) {
    if (s.size() < 3 || s[0] != '0' || (s[1] != 'x' && s[1] != 'X'))
        return std::nullopt;
    std::uint64_t v = 0;
    for (std::size_t i = 2; i < s.size(); ++i) {
        char c = s[i];
        int d;
        if (c >= '0' && c <= '9') d = c - '0';
        else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
        else return std::nullopt;
        if (v > (~std::uint64_t(0)) >> 4) return std::nullopt;
        v = (v << 4) | std::uint64_t(d);
    }
    return v;
}

}  // namespace detail

// Serialize one record as a single JSON line (no trailing newline).
// Hand-rolled so a million-record synthesis stays cheap and key order is
// fixed for byte-stable fixtures.
inline std::string to_json_line(const TraceRecord& r) {
    std::string out;
    out.reserve(128 + r.raw_args.size() * 4 / 3 +
                (r.payload ? r.payload->size() : 0));
    out += "{\"v\":";
    out += std::to_string(r.schema_version);
    out += ",\"ts\":";
    out += std::to_string(r.timestamp_ns);
    out += ",\"pid\":";
    out += std::to_string(r.pid);
    out += ",\"tid\":";
    out += std::to_string(r.tid);
    out += ",\"kind\":\"";
    out += record_kind_tag(r.kind);
    out += "\",\"fn\":\"";
    detail::json_escape_into(out, r.function_name);
    out.push_back('"');
    if (r.library) {
        detail::append_key(out, "lib");
        out.push_back('"');
        detail::json_escape_into(out, *r.library);
        out.push_back('"');
    }
    if (r.offset) {
        detail::append_key(out, "off");
        char buf[24];
        std::snprintf(buf, sizeof buf, "\"0x%llx\"",
                      static_cast<unsigned long long>(*r.offset));
        out += buf;
    }
    if (!r.is_static) {
        detail::append_key(out, "static");
        out += "false";
    }
    if (r.shorty) {
        detail::append_key(out, "shorty");
        out.push_back('"');
        detail::json_escape_into(out, *r.shorty);
        out.push_back('"');
    }
    if (!r.raw_args.empty()) {
        detail::append_key(out, "args");
        out.push_back('"');
        out += base64::encode(r.raw_args);
        out.push_back('"');
    }
    if (!r.raw_return.empty()) {
        detail::append_key(out, "ret");
        out.push_back('"');
        out += base64::encode(r.raw_return);
        out.push_back('"');
    }
    if (r.payload) {
        detail::append_key(out, "payload");
        out.push_back('"');
        detail::json_escape_into(out, *r.payload);
        out.push_back('"');
    }
    if (r.stack) {
        detail::append_key(out, "stack");
        out.push_back('[');
        for (std::size_t i = 0; i < r.stack->size(); ++i) {
            if (i) out.push_back(',');
            out.push_back('"');
            detail::json_escape_into(out, (*r.stack)[i]);
            out.push_back('"');
        }
        out.push_back(']');
    }
    out.push_back('}');
    return out;
}

// Parse one JSON line into a record. On failure returns nullopt and sets
// *reason to a stable reject-reason tag. Unknown keys are ignored.
inline std::optional<TraceRecord> parse_record(std::string_view line,
                                               std::string* reason) {
    auto bad = [&](const char* why) -> std::optional<TraceRecord> {
        if (reason) *reason = why;
        return std::nullopt;
    };

    nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) return bad("bad_json");

    TraceRecord r;
    auto v = j.find("v");
    if (v == j.end() || !v->is_number_integer()) return bad("missing_version");
    r.schema_version = v->get<int>();
    if (r.schema_version != 1) return bad("bad_version");

    auto ts = j.find("ts");
    if (ts == j.end() || !ts->is_number_unsigned()) return bad("bad_timestamp");
    r.timestamp_ns = ts->get<std::uint64_t>();

    auto pid = j.find("pid");
    auto tid = j.find("tid");
    if (pid == j.end() || !pid->is_number_integer()) return bad("bad_pid");
    if (tid == j.end() || !tid->is_number_integer()) return bad("bad_tid");
    r.pid = pid->get<std::int32_t>();
    r.tid = tid->get<std::int32_t>();

    auto kind = j.find("kind");
    if (kind == j.end() || !kind->is_string()) return bad("bad_kind");
    const std::string& ktag = kind->get_ref<const std::string&>();
    if (ktag == "quick") r.kind = RecordKind::QuickCode;
    else if (ktag == "jni") r.kind = RecordKind::JniTrampoline;
    else if (ktag == "cb") r.kind = RecordKind::Callback;
    else return bad("bad_kind");

    auto fn = j.find("fn");
    if (fn == j.end() || !fn->is_string()) return bad("missing_fn");
    r.function_name = fn->get<std::string>();

    if (auto it = j.find("lib"); it != j.end()) {
        if (!it->is_string()) return bad("bad_lib");
        r.library = it->get<std::string>();
    }
    if (auto it = j.find("off"); it != j.end()) {
        if (!it->is_string()) return bad("bad_offset");
        auto off = detail::parse_hex_offset(it->get_ref<const std::string&>());
        if (!off) return bad("bad_offset");
        r.offset = *off;
    }
    if (auto it = j.find("static"); it != j.end()) {
        if (!it->is_boolean()) return bad("bad_static");
        r.is_static = it->get<bool>();
    }
    if (auto it = j.find("shorty"); it != j.end()) {
        if (!it->is_string()) return bad("bad_shorty");
        r.shorty = it->get<std::string>();
    }
    if (auto it = j.find("args"); it != j.end()) {
        if (!it->is_string()) return bad("bad_base64");
        auto bytes = base64::decode(it->get_ref<const std::string&>());
        if (!bytes) return bad("bad_base64");
        r.raw_args = std::move(*bytes);
    }
    if (auto it = j.find("ret"); it != j.end()) {
        if (!it->is_string()) return bad("bad_base64");
        auto bytes = base64::decode(it->get_ref<const std::string&>());
        if (!bytes) return bad("bad_base64");
        r.raw_return = std::move(*bytes);
    }
    if (auto it = j.find("payload"); it != j.end()) {
        if (!it->is_string()) return bad("bad_payload");
        r.payload = it->get<std::string>();
    }
    if (auto it = j.find("stack"); it != j.end()) {
        if (!it->is_array()) return bad("bad_stack");
        std::vector<std::string> frames;
        frames.reserve(it->size());
        for (const auto& f : *it) {
            if (!f.is_string()) return bad("bad_stack");
            frames.push_back(f.get<std::string>());
        }
        r.stack = std::move(frames);
    }

    // Kind-specific requirements.
    if (r.kind == RecordKind::Callback) {
        if (!r.payload) return bad("missing_payload");
    } else {
        if (!r.shorty) return bad("missing_shorty");
    }
    return r;
}

}  // namespace mlaudit
