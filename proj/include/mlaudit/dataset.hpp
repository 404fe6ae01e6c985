#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mlaudit/csv.hpp"
#include "mlaudit/errors.hpp"

namespace mlaudit {

enum class Sex : std::uint8_t { Male, Female };

inline const char* sex_tag(Sex s) { return s == Sex::Male ? "Male" : "Female"; }

inline std::optional<Sex> sex_from_tag(const std::string& s) {
    if (s == "Male") return Sex::Male;
    if (s == "Female") return Sex::Female;
    return std::nullopt;
}

// The closed 9-bin age vocabulary. Ranges are inclusive on both ends.
inline constexpr std::array<const char*, 9> kAgeBins = {
    "0-2", "3-9", "10-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70-100"};

struct AgeBinRange {
    double lo;
    double hi;
};

inline std::optional<AgeBinRange> age_bin_range(const std::string& bin) {
    static const std::map<std::string, AgeBinRange> ranges = {
        {"0-2", {0, 2}},     {"3-9", {3, 9}},     {"10-19", {10, 19}},
        {"20-29", {20, 29}}, {"30-39", {30, 39}}, {"40-49", {40, 49}},
        {"50-59", {50, 59}}, {"60-69", {60, 69}}, {"70-100", {70, 100}}};
    auto it = ranges.find(bin);
    if (it == ranges.end()) return std::nullopt;
    return it->second;
}

struct SampleRow {
    std::string sample_id;
    Sex sex = Sex::Male;
    std::string ethnicity;
    std::string age_bin;
    std::optional<std::string> variant;
    std::map<std::string, bool> annotations;  // concept -> positive?

    std::string demographic() const {
        return ethnicity + " " + sex_tag(sex);
    }
};

struct ScoreRow {
    std::string sample_id;
    std::string concept_name;
    double score = 0.0;
    std::optional<int> face_count;
    std::optional<double> predicted_age;
    std::optional<double> predicted_sex_score;
};

struct ConceptCatalog {
    std::vector<std::string> concepts;
    std::set<std::string> lookup;

    bool contains(const std::string& c) const { return lookup.count(c) != 0; }

    std::size_t index_of(const std::string& c) const {
        for (std::size_t i = 0; i < concepts.size(); ++i)
            if (concepts[i] == c) return i;
        return ~std::size_t(0);
    }
};

// One concept per line, '#' comments. Duplicate entries are a schema error.
inline ConceptCatalog load_catalog(std::istream& in) {
    ConceptCatalog cat;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
        std::size_t b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        std::string c = line.substr(b);
        if (!cat.lookup.insert(c).second)
            fail(errc::schema_error, "duplicate concept \"" + c + "\"");
        cat.concepts.push_back(std::move(c));
    }
    if (cat.concepts.empty()) fail(errc::schema_error, "empty concept catalog");
    return cat;
}

struct DatasetCounters {
    std::uint64_t sample_rows_read = 0;
    std::uint64_t sample_rows_rejected = 0;
    std::uint64_t score_rows_read = 0;
    std::uint64_t score_rows_rejected = 0;
    std::uint64_t orphan_scores = 0;  // score rows without a matching sample
    std::map<std::string, std::uint64_t> reject_reasons;
};

struct ScoreDataset {
    std::vector<SampleRow> samples;
    std::map<std::string, std::size_t> sample_index;  // by sample_id
    std::vector<ScoreRow> scores;                     // joined rows only
    DatasetCounters counters;

    const SampleRow& sample_of(const ScoreRow& s) const {
        return samples[sample_index.at(s.sample_id)];
    }
};

struct LoadOptions {
    // join_error above this orphan ratio (orphans / score rows read)
    double max_orphan_ratio = 0.25;
};

namespace detail {

inline std::optional<double> parse_double(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) return std::nullopt;
    return v;
}

inline std::optional<int> parse_int(const std::string& s) {
    if (s.empty()) return std::nullopt;
    int v = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) return std::nullopt;
    return v;
}

// annotations cell: "concept:pos;other:neg" (empty allowed)
inline bool parse_annotations(const std::string& cell,
                              std::map<std::string, bool>& out) {
    std::size_t i = 0;
    while (i < cell.size()) {
        std::size_t j = cell.find(';', i);
        if (j == std::string::npos) j = cell.size();
        const std::string pair = cell.substr(i, j - i);
        if (!pair.empty()) {
            const auto colon = pair.rfind(':');
            if (colon == std::string::npos || colon == 0) return false;
            const std::string concept_name = pair.substr(0, colon);
            const std::string label = pair.substr(colon + 1);
            if (label == "pos") out[concept_name] = true;
            else if (label == "neg") out[concept_name] = false;
            else return false;
        }
        i = j + 1;
    }
    return true;
}

}  // namespace detail

// samples.csv: sample_id,sex,ethnicity,age_bin,variant,annotations
// scores.csv:  sample_id,concept,score,face_count,predicted_age,predicted_sex_score
//
// Scores join to samples by sample_id; orphans are counted and dropped,
// bad rows are counted per reason. Missing columns are schema errors; an
// orphan ratio above options.max_orphan_ratio is a join error.
inline ScoreDataset load_dataset(std::istream& samples_csv, std::istream& scores_csv,
                                 const ConceptCatalog* catalog = nullptr,
                                 const LoadOptions& options = {}) {
    ScoreDataset ds;
    std::vector<std::string> row;

    if (!csv::read_row(samples_csv, row))
        fail(errc::schema_error, "samples.csv is empty");
    const csv::Header sh(row);
    const std::size_t c_id = sh.require("sample_id");
    const std::size_t c_sex = sh.require("sex");
    const std::size_t c_eth = sh.require("ethnicity");
    const std::size_t c_bin = sh.require("age_bin");
    const std::size_t c_var = sh.optional("variant");
    const std::size_t c_ann = sh.optional("annotations");

    auto reject_sample = [&](const char* reason) {
        ++ds.counters.sample_rows_rejected;
        ++ds.counters.reject_reasons[reason];
    };

    while (csv::read_row(samples_csv, row)) {
        if (row.size() == 1 && row[0].empty()) continue;
        ++ds.counters.sample_rows_read;
        SampleRow s;
        s.sample_id = csv::cell(row, c_id);
        if (s.sample_id.empty()) {
            reject_sample("empty_sample_id");
            continue;
        }
        auto sex = sex_from_tag(csv::cell(row, c_sex));
        if (!sex) {
            reject_sample("bad_sex");
            continue;
        }
        s.sex = *sex;
        s.ethnicity = csv::cell(row, c_eth);
        s.age_bin = csv::cell(row, c_bin);
        if (!age_bin_range(s.age_bin)) {
            reject_sample("bad_age_bin");
            continue;
        }
        const std::string& variant = csv::cell(row, c_var);
        if (!variant.empty()) s.variant = variant;
        if (!detail::parse_annotations(csv::cell(row, c_ann), s.annotations)) {
            reject_sample("bad_annotations");
            continue;
        }
        if (ds.sample_index.count(s.sample_id)) {
            reject_sample("duplicate_sample_id");
            continue;
        }
        ds.sample_index[s.sample_id] = ds.samples.size();
        ds.samples.push_back(std::move(s));
    }

    if (!csv::read_row(scores_csv, row))
        fail(errc::schema_error, "scores.csv is empty");
    const csv::Header vh(row);
    const std::size_t v_id = vh.require("sample_id");
    const std::size_t v_concept = vh.require("concept");
    const std::size_t v_score = vh.require("score");
    const std::size_t v_faces = vh.optional("face_count");
    const std::size_t v_age = vh.optional("predicted_age");
    const std::size_t v_sexscore = vh.optional("predicted_sex_score");

    auto reject_score = [&](const char* reason) {
        ++ds.counters.score_rows_rejected;
        ++ds.counters.reject_reasons[reason];
    };

    while (csv::read_row(scores_csv, row)) {
        if (row.size() == 1 && row[0].empty()) continue;
        ++ds.counters.score_rows_read;
        ScoreRow s;
        s.sample_id = csv::cell(row, v_id);
        s.concept_name = csv::cell(row, v_concept);
        auto score = detail::parse_double(csv::cell(row, v_score));
        if (!score || *score < 0.0 || *score > 1.0) {
            reject_score("bad_score");
            continue;
        }
        s.score = *score;
        if (catalog && !catalog->contains(s.concept_name)) {
            reject_score("unknown_concept");
            continue;
        }
        const std::string& faces = csv::cell(row, v_faces);
        if (!faces.empty()) {
            auto n = detail::parse_int(faces);
            if (!n || *n < 0) {
                reject_score("bad_face_count");
                continue;
            }
            s.face_count = *n;
        }
        const std::string& age = csv::cell(row, v_age);
        if (!age.empty()) {
            auto a = detail::parse_double(age);
            if (!a) {
                reject_score("bad_predicted_age");
                continue;
            }
            s.predicted_age = *a;
        }
        const std::string& sexscore = csv::cell(row, v_sexscore);
        if (!sexscore.empty()) {
            auto p = detail::parse_double(sexscore);
            if (!p || *p < 0.0 || *p > 1.0) {
                reject_score("bad_predicted_sex_score");
                continue;
            }
            s.predicted_sex_score = *p;
        }
        if (!ds.sample_index.count(s.sample_id)) {
            ++ds.counters.orphan_scores;
            continue;
        }
        ds.scores.push_back(std::move(s));
    }

    if (ds.counters.score_rows_read > 0) {
        const double ratio = double(ds.counters.orphan_scores) /
                             double(ds.counters.score_rows_read);
        if (ratio > options.max_orphan_ratio)
            fail(errc::join_error,
                 std::to_string(ds.counters.orphan_scores) + " of " +
                     std::to_string(ds.counters.score_rows_read) +
                     " score rows have no matching sample");
    }
    return ds;
}

struct FaceFilterResult {
    std::vector<ScoreRow> kept;
    std::uint64_t discarded_zero = 0;   // no face detected
    std::uint64_t discarded_multi = 0;  // more than one face
};

// Keep exactly the rows where one face was detected. Rows lacking a
// face_count make the request ill-posed, hence missing_field.
inline FaceFilterResult filter_single_face(const std::vector<ScoreRow>& rows) {
    FaceFilterResult out;
    for (const auto& r : rows) {
        if (!r.face_count)
            fail(errc::missing_field,
                 "face_count absent on sample \"" + r.sample_id + "\"");
        if (*r.face_count == 1) out.kept.push_back(r);
        else if (*r.face_count == 0) ++out.discarded_zero;
        else ++out.discarded_multi;
    }
    return out;
}

}  // namespace mlaudit
