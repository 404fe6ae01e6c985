#pragma once

#include <algorithm>
#include <cctype>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlaudit/codec.hpp"
#include "mlaudit/errors.hpp"
#include "mlaudit/trace.hpp"

namespace mlaudit {

enum class MatchMode : std::uint8_t { Substring, Token };

struct KeywordSet {
    std::set<std::string> keywords;  // lowercase
    MatchMode mode = MatchMode::Substring;
};

// Keyword config: one keyword per line, '#' starts a comment, entries are
// lowercased on load.
inline KeywordSet load_keywords(std::istream& in,
                                MatchMode mode = MatchMode::Substring) {
    KeywordSet set;
    set.mode = mode;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::size_t b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos) continue;
        std::size_t e = line.find_last_not_of(" \t\r");
        std::string kw = line.substr(b, e - b + 1);
        for (auto& c : kw) c = char(std::tolower(static_cast<unsigned char>(c)));
        set.keywords.insert(std::move(kw));
    }
    if (set.keywords.empty())
        fail(errc::degenerate_input, "keyword set is empty");
    return set;
}

// Where inside a record a rule matched. Order matters: scans emit evidence
// sorted by (record index, field, arg index, rule detail).
enum class EvidenceField : std::uint8_t {
    FunctionName,
    Payload,
    DecodedArg,
    DecodedReturn,
};

inline const char* evidence_field_tag(EvidenceField f) {
    switch (f) {
        case EvidenceField::FunctionName:  return "function_name";
        case EvidenceField::Payload:       return "payload";
        case EvidenceField::DecodedArg:    return "decoded_arg";
        case EvidenceField::DecodedReturn: return "decoded_return";
    }
    return "?";
}

enum class EvidenceRule : std::uint8_t { Keyword, ProbabilityVector };

struct Evidence {
    std::size_t record_index = 0;
    std::uint64_t record_ts = 0;
    std::string function_name;
    std::optional<std::string> library;
    EvidenceField field = EvidenceField::FunctionName;
    int arg_index = -1;  // only for DecodedArg
    EvidenceRule rule = EvidenceRule::Keyword;
    // Keyword rule
    std::string keyword;
    // ProbabilityVector rule
    std::size_t vec_length = 0;
    double vec_min = 0.0;
    double vec_max = 0.0;

    bool operator==(const Evidence&) const = default;
};

namespace detail {

// True when the bytes are valid UTF-8 with no raw control characters
// except tab/newline/carriage return. That is what "string-decodable"
// means here; binary handles and image bytes almost never pass.
inline bool printable_utf8(const std::uint8_t* p, std::size_t n) {
    std::size_t i = 0;
    while (i < n) {
        const std::uint8_t c = p[i];
        if (c < 0x80) {
            if (c < 0x20 && c != '\t' && c != '\n' && c != '\r') return false;
            ++i;
            continue;
        }
        int extra;
        std::uint32_t cp;
        if ((c & 0xe0) == 0xc0) { extra = 1; cp = c & 0x1f; }
        else if ((c & 0xf0) == 0xe0) { extra = 2; cp = c & 0x0f; }
        else if ((c & 0xf8) == 0xf0) { extra = 3; cp = c & 0x07; }
        else return false;
        if (i + std::size_t(extra) >= n) return false;
        for (int k = 1; k <= extra; ++k) {
            if ((p[i + std::size_t(k)] & 0xc0) != 0x80) return false;
            cp = (cp << 6) | (p[i + std::size_t(k)] & 0x3f);
        }
        // Overlong / surrogate / out-of-range forms are not valid text.
        if (extra == 1 && cp < 0x80) return false;
        if (extra == 2 && (cp < 0x800 || (cp >= 0xd800 && cp <= 0xdfff))) return false;
        if (extra == 3 && (cp < 0x10000 || cp > 0x10ffff)) return false;
        i += std::size_t(extra) + 1;
    }
    return true;
}

inline std::string lowercase(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = char(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

inline bool token_match(const std::string& haystack_lower, const std::string& kw) {
    std::size_t i = 0;
    const std::size_t n = haystack_lower.size();
    // '_' separates tokens so snake_case identifiers split into words.
    auto is_word = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    };
    while (i < n) {
        while (i < n && !is_word(haystack_lower[i])) ++i;
        std::size_t j = i;
        while (j < n && is_word(haystack_lower[j])) ++j;
        if (j - i == kw.size() && haystack_lower.compare(i, kw.size(), kw) == 0)
            return true;
        i = j;
    }
    return false;
}

inline bool keyword_hit(const std::string& haystack_lower, const std::string& kw,
                        MatchMode mode) {
    if (mode == MatchMode::Substring)
        return haystack_lower.find(kw) != std::string::npos;
    return token_match(haystack_lower, kw);
}

// Decoded text fields of a record, in scan order.
struct TextField {
    EvidenceField field;
    int arg_index;
    std::string text;
};

inline std::vector<TextField> text_fields(const TraceRecord& r) {
    std::vector<TextField> out;
    if (r.payload) out.push_back({EvidenceField::Payload, -1, *r.payload});
    if (!r.shorty) return out;

    ShortySignature sig;
    try {
        sig = parse_shorty(*r.shorty);
    } catch (const error&) {
        return out;  // unparseable shorty: nothing further to decode
    }
    if (!r.raw_args.empty() || !sig.arg_kinds.empty()) {
        try {
            auto vals = decode_args(sig, r.raw_args, r.is_static);
            for (std::size_t i = 0; i < vals.size(); ++i) {
                if (vals[i].kind() != TypeKind::Pointer) continue;
                const auto& blob = vals[i].as_blob();
                if (blob.size() >= 2 && printable_utf8(blob.data(), blob.size()))
                    out.push_back({EvidenceField::DecodedArg, int(i),
                                   std::string(blob.begin(), blob.end())});
            }
        } catch (const error&) {
            // corrupt arg bytes: skip decoded-arg fields, keep the rest
        }
    }
    if (!r.raw_return.empty()) {
        try {
            auto ret = decode_return(sig, r.raw_return);
            if (ret.kind() == TypeKind::Pointer) {
                const auto& blob = ret.as_blob();
                if (blob.size() >= 2 && printable_utf8(blob.data(), blob.size()))
                    out.push_back({EvidenceField::DecodedReturn, -1,
                                   std::string(blob.begin(), blob.end())});
            }
        } catch (const error&) {
        }
    }
    return out;
}

}  // namespace detail

// Case-insensitive keyword scan over function names, payloads, and
// string-decodable argument/return blobs. One Evidence per
// (record, field, keyword) hit, emitted in that order.
inline std::vector<Evidence> scan_keywords(const TraceLog& log, const KeywordSet& kw) {
    if (kw.keywords.empty()) fail(errc::degenerate_input, "keyword set is empty");
    std::vector<Evidence> out;
    for (std::size_t idx = 0; idx < log.records.size(); ++idx) {
        const TraceRecord& r = log.records[idx];
        auto emit = [&](EvidenceField field, int arg_index, const std::string& text) {
            const std::string hay = detail::lowercase(text);
            for (const auto& k : kw.keywords) {
                if (!detail::keyword_hit(hay, k, kw.mode)) continue;
                Evidence e;
                e.record_index = idx;
                e.record_ts = r.timestamp_ns;
                e.function_name = r.function_name;
                e.library = r.library;
                e.field = field;
                e.arg_index = arg_index;
                e.rule = EvidenceRule::Keyword;
                e.keyword = k;
                out.push_back(std::move(e));
            }
        };
        emit(EvidenceField::FunctionName, -1, r.function_name);
        for (const auto& tf : detail::text_fields(r))
            emit(tf.field, tf.arg_index, tf.text);
    }
    return out;
}

struct ProbeOptions {
    std::size_t min_len = 2;
    bool require_interior = true;  // at least one value strictly inside (0,1)
};

namespace detail {

inline void collect_probability_vectors(const nlohmann::json& node,
                                        const ProbeOptions& opt,
                                        const TraceRecord& r, std::size_t idx,
                                        EvidenceField field, int arg_index,
                                        std::vector<Evidence>& out) {
    if (node.is_array()) {
        bool all_numbers = !node.empty();
        for (const auto& el : node)
            if (!el.is_number()) {
                all_numbers = false;
                break;
            }
        if (all_numbers && node.size() >= opt.min_len) {
            double lo = 1e300, hi = -1e300;
            bool in_range = true, interior = false;
            for (const auto& el : node) {
                const double v = el.get<double>();
                if (v < 0.0 || v > 1.0) {
                    in_range = false;
                    break;
                }
                if (v > 0.0 && v < 1.0) interior = true;
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
            if (in_range && (interior || !opt.require_interior)) {
                Evidence e;
                e.record_index = idx;
                e.record_ts = r.timestamp_ns;
                e.function_name = r.function_name;
                e.library = r.library;
                e.field = field;
                e.arg_index = arg_index;
                e.rule = EvidenceRule::ProbabilityVector;
                e.vec_length = node.size();
                e.vec_min = lo;
                e.vec_max = hi;
                out.push_back(std::move(e));
            }
        }
        if (!all_numbers)
            for (const auto& el : node)
                collect_probability_vectors(el, opt, r, idx, field, arg_index, out);
        return;
    }
    if (node.is_object())
        for (const auto& [key, value] : node.items()) {
            (void)key;
            collect_probability_vectors(value, opt, r, idx, field, arg_index, out);
        }
}

}  // namespace detail

// Flag every maximal numeric array with values in [0,1] found in
// well-formed JSON payloads or string-decodable blobs. Raw binary is never
// reinterpreted as floats.
inline std::vector<Evidence> scan_probability_vectors(const TraceLog& log,
                                                      const ProbeOptions& opt = {}) {
    if (opt.min_len < 2)
        fail(errc::degenerate_input, "min_len must be >= 2");
    std::vector<Evidence> out;
    for (std::size_t idx = 0; idx < log.records.size(); ++idx) {
        const TraceRecord& r = log.records[idx];
        for (const auto& tf : detail::text_fields(r)) {
            nlohmann::json j = nlohmann::json::parse(tf.text, nullptr, false);
            if (j.is_discarded()) continue;
            detail::collect_probability_vectors(j, opt, r, idx, tf.field,
                                                tf.arg_index, out);
        }
    }
    return out;
}

struct CandidateFunction {
    std::string function_name;
    std::optional<std::string> library;
    std::size_t evidence_count = 0;
    std::set<EvidenceRule> rule_kinds;
    std::uint64_t first_seen_ts = 0;
    // Rank key: more distinct rule kinds beat more raw hits.
    std::pair<std::size_t, std::size_t> score() const {
        return {rule_kinds.size(), evidence_count};
    }
};

// Group evidence by function and order candidates by
// (distinct rule kinds desc, evidence count desc, name asc, library asc).
inline std::vector<CandidateFunction> rank_candidates(
    const std::vector<Evidence>& evidence) {
    std::map<std::pair<std::string, std::string>, CandidateFunction> grouped;
    for (const auto& e : evidence) {
        auto key = std::make_pair(e.function_name, e.library.value_or(""));
        auto [it, fresh] = grouped.try_emplace(key);
        CandidateFunction& c = it->second;
        if (fresh) {
            c.function_name = e.function_name;
            c.library = e.library;
            c.first_seen_ts = e.record_ts;
        }
        c.first_seen_ts = std::min(c.first_seen_ts, e.record_ts);
        ++c.evidence_count;
        c.rule_kinds.insert(e.rule);
    }
    std::vector<CandidateFunction> out;
    out.reserve(grouped.size());
    for (auto& [key, c] : grouped) out.push_back(std::move(c));
    std::stable_sort(out.begin(), out.end(),
                     [](const CandidateFunction& a, const CandidateFunction& b) {
                         if (a.rule_kinds.size() != b.rule_kinds.size())
                             return a.rule_kinds.size() > b.rule_kinds.size();
                         if (a.evidence_count != b.evidence_count)
                             return a.evidence_count > b.evidence_count;
                         if (a.function_name != b.function_name)
                             return a.function_name < b.function_name;
                         return a.library.value_or("") < b.library.value_or("");
                     });
    return out;
}

// JSON forms used by the CLI report and the determinism tests.
inline nlohmann::ordered_json evidence_to_json(const Evidence& e) {
    nlohmann::ordered_json j;
    j["record"] = e.record_index;
    j["ts"] = e.record_ts;
    j["fn"] = e.function_name;
    if (e.library) j["lib"] = *e.library;
    j["field"] = evidence_field_tag(e.field);
    if (e.field == EvidenceField::DecodedArg) j["arg"] = e.arg_index;
    if (e.rule == EvidenceRule::Keyword) {
        j["rule"] = "keyword";
        j["keyword"] = e.keyword;
    } else {
        j["rule"] = "probability_vector";
        j["length"] = e.vec_length;
        j["min"] = e.vec_min;
        j["max"] = e.vec_max;
    }
    return j;
}

inline nlohmann::ordered_json evidence_report(const std::vector<Evidence>& evidence) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : evidence) arr.push_back(evidence_to_json(e));
    return arr;
}

inline nlohmann::ordered_json candidates_to_json(
    const std::vector<CandidateFunction>& candidates) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& c : candidates) {
        nlohmann::ordered_json j;
        j["fn"] = c.function_name;
        if (c.library) j["lib"] = *c.library;
        j["evidence_count"] = c.evidence_count;
        j["rule_kinds"] = c.rule_kinds.size();
        j["first_seen_ts"] = c.first_seen_ts;
        arr.push_back(std::move(j));
    }
    return arr;
}

}  // namespace mlaudit
