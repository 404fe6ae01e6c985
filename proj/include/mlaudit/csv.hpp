#pragma once

#include <istream>
#include <map>
#include <string>
#include <vector>

#include "mlaudit/errors.hpp"

namespace mlaudit::csv {

// Minimal RFC-4180 reader: quoted fields, "" escapes, tolerant of CRLF.
// Good enough for the fixture formats; not a general CSV library.
inline bool read_row(std::istream& in, std::vector<std::string>& out) {
    out.clear();
    std::string field;
    bool in_quotes = false;
    bool any = false;
    int c;
    while ((c = in.get()) != EOF) {
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    in_quotes = false;
                }
            } else {
                field.push_back(char(c));
            }
            continue;
        }
        if (c == '"' && field.empty()) {
            in_quotes = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (c == '\n') {
            if (!field.empty() && field.back() == '\r') field.pop_back();
            out.push_back(std::move(field));
            return true;
        } else {
            field.push_back(char(c));
        }
    }
    if (!any) return false;
    if (!field.empty() && field.back() == '\r') field.pop_back();
    out.push_back(std::move(field));
    return true;
}

inline std::string escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

// Header-indexed table access.
class Header {
public:
    explicit Header(const std::vector<std::string>& cols) {
        for (std::size_t i = 0; i < cols.size(); ++i) index_[cols[i]] = i;
    }

    std::size_t require(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end())
            fail(errc::schema_error, "missing required column \"" + name + "\"");
        return it->second;
    }

    // npos when the column is absent.
    std::size_t optional(const std::string& name) const {
        auto it = index_.find(name);
        return it == index_.end() ? npos : it->second;
    }

    static constexpr std::size_t npos = ~std::size_t(0);

private:
    std::map<std::string, std::size_t> index_;
};

inline const std::string& cell(const std::vector<std::string>& row, std::size_t i) {
    static const std::string empty;
    return i == Header::npos || i >= row.size() ? empty : row[i];
}

}  // namespace mlaudit::csv
