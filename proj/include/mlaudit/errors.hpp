#pragma once

#include <stdexcept>
#include <string>

namespace mlaudit {

// Stable error codes so callers (and tests) can dispatch without
// string-matching exception messages.
enum class errc {
    unknown_shorty_char,
    void_argument,
    length_mismatch,
    blob_too_large,
    handle_size_mismatch,
    excessive_corruption,
    anchor_not_found,
    degenerate_input,
    schema_error,
    join_error,
    missing_field,
    scorer_timeout,
    scorer_parse_error,
    spec_error,
    io_error,
};

inline const char* errc_name(errc c) {
    switch (c) {
        case errc::unknown_shorty_char:  return "unknown_shorty_char";
        case errc::void_argument:        return "void_argument";
        case errc::length_mismatch:      return "length_mismatch";
        case errc::blob_too_large:       return "blob_too_large";
        case errc::handle_size_mismatch: return "handle_size_mismatch";
        case errc::excessive_corruption: return "excessive_corruption";
        case errc::anchor_not_found:     return "anchor_not_found";
        case errc::degenerate_input:     return "degenerate_input";
        case errc::schema_error:         return "schema_error";
        case errc::join_error:           return "join_error";
        case errc::missing_field:        return "missing_field";
        case errc::scorer_timeout:       return "scorer_timeout";
        case errc::scorer_parse_error:   return "scorer_parse_error";
        case errc::spec_error:           return "spec_error";
        case errc::io_error:             return "io_error";
    }
    return "unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& msg)
        : std::runtime_error(std::string(errc_name(code)) + ": " + msg), code_(code) {}

    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) {
    throw error(code, msg);
}

}  // namespace mlaudit
