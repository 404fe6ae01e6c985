#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlaudit/auc.hpp"
#include "mlaudit/dataset.hpp"
#include "mlaudit/errors.hpp"
#include "mlaudit/stats.hpp"

namespace mlaudit {

// One testable claim about the dataset: values of value_field are
// identically distributed across group_field, per stratum.
//
// value_field: "predicted_sex_score" | "predicted_age" | "sex_accuracy"
//              | "concept:<name>" | "concept:*" (one stratum per concept,
//              requires stratify_by == "concept")
// group_field / stratify_by: "sex" | "ethnicity" | "age_bin" |
//              "demographic" | "variant" | "concept" (stratify only)
//
// family_size absent means "auto": the number of tests launched by the
// whole suite invocation. kind "median_in_bin" runs the descriptive
// per-age-bin report instead of an omnibus test.
struct HypothesisSpec {
    std::string id;
    std::string kind = "kruskal";  // or "median_in_bin"
    std::string value_field;
    std::string group_field;
    std::optional<std::string> stratify_by;
    double alpha = 0.05;
    std::optional<int> family_size;
    bool with_power = false;
    int power_n = 100;
    int power_sims = 1000;
};

struct HypothesisOutcome {
    std::string hypothesis_id;
    std::string stratum;  // "all" when unstratified
    std::vector<std::string> group_labels;
    std::vector<std::size_t> group_sizes;
    std::optional<TestResult> test;  // absent when skipped
    std::string skip_reason;
};

struct MedianBinRow {
    std::string age_bin;
    std::size_t n = 0;
    double median = 0.0;
    double q1 = 0.0;
    double q3 = 0.0;
    double iqr = 0.0;
    double fraction_in_bin = 0.0;
    bool median_in_bin = false;
};

namespace detail {

// Deterministic group ordering: age bins in vocabulary order, Male before
// Female, demographics by (ethnicity, Male-first), otherwise lexicographic.
inline int age_bin_order(const std::string& bin) {
    for (std::size_t i = 0; i < kAgeBins.size(); ++i)
        if (bin == kAgeBins[i]) return int(i);
    return int(kAgeBins.size());
}

inline bool group_label_less(const std::string& field, const std::string& a,
                             const std::string& b) {
    if (field == "age_bin") {
        const int ia = age_bin_order(a), ib = age_bin_order(b);
        if (ia != ib) return ia < ib;
        return a < b;
    }
    if (field == "sex") return a == "Male" && b == "Female";
    if (field == "demographic") {
        auto split = [](const std::string& s) {
            const auto sp = s.rfind(' ');
            return std::make_pair(s.substr(0, sp == std::string::npos ? s.size() : sp),
                                  sp == std::string::npos ? "" : s.substr(sp + 1));
        };
        auto [ea, sa] = split(a);
        auto [eb, sb] = split(b);
        if (ea != eb) return ea < eb;
        if (sa != sb) return sa == "Male";
        return false;
    }
    return a < b;
}

inline std::string field_of_sample(const SampleRow& s, const std::string& field) {
    if (field == "sex") return sex_tag(s.sex);
    if (field == "ethnicity") return s.ethnicity;
    if (field == "age_bin") return s.age_bin;
    if (field == "demographic") return s.demographic();
    if (field == "variant") return s.variant.value_or("");
    fail(errc::spec_error, "unknown field \"" + field + "\"");
}

// (stratum, group, value) triples for one hypothesis.
struct ValueTriples {
    // stratum -> group -> values
    std::map<std::string, std::map<std::string, std::vector<double>>> data;
};

inline ValueTriples collect_values(const ScoreDataset& ds, const HypothesisSpec& h) {
    const bool per_concept = h.value_field == "concept:*";
    if (per_concept && h.stratify_by.value_or("") != "concept")
        fail(errc::spec_error, "concept:* requires stratify_by == \"concept\"");

    std::string wanted_concept;
    if (h.value_field.rfind("concept:", 0) == 0 && !per_concept)
        wanted_concept = h.value_field.substr(8);

    const bool needs_sex_score = h.value_field == "predicted_sex_score" ||
                                 h.value_field == "sex_accuracy";
    const bool needs_age = h.value_field == "predicted_age";

    ValueTriples out;
    std::set<std::string> seen_sample;  // dedupe per-sample predicted fields
    for (const auto& row : ds.scores) {
        const SampleRow& sample = ds.sample_of(row);
        double value;
        if (!wanted_concept.empty() || per_concept) {
            if (!wanted_concept.empty() && row.concept_name != wanted_concept)
                continue;
            value = row.score;
        } else if (needs_sex_score) {
            if (!row.predicted_sex_score) continue;
            if (!seen_sample.insert(row.sample_id).second) continue;
            value = h.value_field == "sex_accuracy"
                        ? (((*row.predicted_sex_score > 0.5) ==
                            (sample.sex == Sex::Male))
                               ? 1.0
                               : 0.0)
                        : *row.predicted_sex_score;
        } else if (needs_age) {
            if (!row.predicted_age) continue;
            if (!seen_sample.insert(row.sample_id).second) continue;
            value = *row.predicted_age;
        } else {
            fail(errc::spec_error, "unknown value_field \"" + h.value_field + "\"");
        }

        std::string stratum = "all";
        if (h.stratify_by) {
            stratum = per_concept ? row.concept_name
                                  : field_of_sample(sample, *h.stratify_by);
        }
        const std::string group = field_of_sample(sample, h.group_field);
        out.data[stratum][group].push_back(value);
    }
    return out;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t seed) {
    std::uint64_t h = 1469598103934665603ull ^ seed;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace detail

// Count the tests one hypothesis would launch (strata with >= 2 non-empty
// groups). Used to resolve family_size == auto per suite invocation.
inline int count_testable_strata(const ScoreDataset& ds, const HypothesisSpec& h) {
    if (h.kind != "kruskal") return 0;
    const auto triples = detail::collect_values(ds, h);
    int n = 0;
    for (const auto& [stratum, groups] : triples.data)
        if (groups.size() >= 2) ++n;
    return n;
}

// Run one hypothesis across its strata at bonferroni(alpha, family_size).
// Strata that cannot be tested are reported with a skip reason instead of
// being silently dropped.
inline std::vector<HypothesisOutcome> run_hypothesis(const ScoreDataset& ds,
                                                     const HypothesisSpec& h,
                                                     int family_size,
                                                     std::uint64_t seed = 0) {
    if (h.kind != "kruskal")
        fail(errc::spec_error, "run_hypothesis only runs kruskal specs");
    if (family_size < 1) fail(errc::spec_error, "family size must be >= 1");
    const double alpha_corrected = bonferroni(h.alpha, family_size);

    const auto triples = detail::collect_values(ds, h);
    std::vector<HypothesisOutcome> out;
    for (const auto& [stratum, groups] : triples.data) {
        HypothesisOutcome o;
        o.hypothesis_id = h.id;
        o.stratum = stratum;

        std::vector<std::string> labels;
        labels.reserve(groups.size());
        for (const auto& [label, values] : groups) labels.push_back(label);
        std::sort(labels.begin(), labels.end(),
                  [&](const std::string& a, const std::string& b) {
                      return detail::group_label_less(h.group_field, a, b);
                  });
        o.group_labels = labels;
        for (const auto& l : labels) o.group_sizes.push_back(groups.at(l).size());

        if (groups.size() < 2) {
            o.skip_reason = "fewer_than_two_groups";
            out.push_back(std::move(o));
            continue;
        }
        SampleGroups sg;
        std::size_t total = 0;
        for (const auto& l : labels) {
            sg.groups.push_back({l, groups.at(l)});
            total += groups.at(l).size();
        }
        if (total < 3) {
            o.skip_reason = "too_few_values";
            out.push_back(std::move(o));
            continue;
        }
        TestResult res = kruskal_wallis(sg, alpha_corrected);
        if (h.with_power) {
            const std::uint64_t stratum_seed =
                detail::fnv1a(h.id + "/" + stratum, seed);
            res.power = estimate_power(sg, h.power_n, h.power_sims,
                                       alpha_corrected, stratum_seed);
        }
        o.test = res;
        out.push_back(std::move(o));
    }
    std::sort(out.begin(), out.end(),
              [&](const HypothesisOutcome& a, const HypothesisOutcome& b) {
                  const std::string strat_field =
                      h.value_field == "concept:*" ? std::string("concept")
                                                   : h.stratify_by.value_or("");
                  if (a.stratum != b.stratum)
                      return detail::group_label_less(strat_field, a.stratum,
                                                      b.stratum);
                  return false;
              });
    return out;
}

// Descriptive per-age-bin check of predicted ages: medians, quartiles
// (linear interpolation), and the fraction of predictions falling inside
// the bin's numeric range (bounds inclusive).
inline std::vector<MedianBinRow> median_in_bin(const ScoreDataset& ds) {
    std::map<std::string, std::vector<double>> per_bin;
    std::set<std::string> seen_sample;
    for (const auto& row : ds.scores) {
        if (!row.predicted_age) continue;
        if (!seen_sample.insert(row.sample_id).second) continue;
        per_bin[ds.sample_of(row).age_bin].push_back(*row.predicted_age);
    }
    if (per_bin.empty())
        fail(errc::missing_field, "no rows carry predicted_age");

    auto quantile = [](const std::vector<double>& sorted, double p) {
        const double idx = p * double(sorted.size() - 1);
        const std::size_t lo = std::size_t(idx);
        if (lo + 1 >= sorted.size()) return sorted.back();
        const double frac = idx - double(lo);
        return sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac;
    };

    std::vector<MedianBinRow> rows;
    for (const char* bin : kAgeBins) {
        auto it = per_bin.find(bin);
        if (it == per_bin.end()) continue;
        auto values = it->second;
        std::sort(values.begin(), values.end());
        const auto range = age_bin_range(bin);

        MedianBinRow r;
        r.age_bin = bin;
        r.n = values.size();
        r.median = quantile(values, 0.5);
        r.q1 = quantile(values, 0.25);
        r.q3 = quantile(values, 0.75);
        r.iqr = r.q3 - r.q1;
        std::size_t inside = 0;
        for (double v : values)
            if (v >= range->lo && v <= range->hi) ++inside;
        r.fraction_in_bin = double(inside) / double(values.size());
        r.median_in_bin = r.median >= range->lo && r.median <= range->hi;
        rows.push_back(std::move(r));
    }
    return rows;
}

// The k highest-scoring concepts of one sample, score ties broken by
// catalog order. k defaults to 10 at the call sites that follow the
// output-selection behavior.
inline std::vector<std::string> top_k(const std::vector<ScoreRow>& sample_rows,
                                      const ConceptCatalog& catalog, int k = 10) {
    if (k < 1) fail(errc::degenerate_input, "k must be >= 1");
    struct Entry {
        double score;
        std::size_t catalog_index;
        const std::string* concept_name;
    };
    std::vector<Entry> entries;
    entries.reserve(sample_rows.size());
    for (const auto& r : sample_rows) {
        std::size_t ci = catalog.index_of(r.concept_name);
        entries.push_back({r.score, ci, &r.concept_name});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.catalog_index < b.catalog_index;
    });
    std::vector<std::string> out;
    const std::size_t take = std::min(std::size_t(k), entries.size());
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) out.push_back(*entries[i].concept_name);
    return out;
}

// ---------------------------------------------------------------------
// AUC table (concept x demographic group), with per-concept hypothesis
// marks appended.
// ---------------------------------------------------------------------

struct AucTable {
    std::vector<std::string> concepts;
    std::vector<std::string> groups;         // demographic labels, ordered
    std::vector<std::vector<AucCell>> cells; // [concept][group]
    std::vector<std::string> mark_ids;       // hypothesis ids, column order
    // marks[concept][mark] -> reject flag (empty optional = not testable)
    std::vector<std::vector<std::optional<bool>>> marks;
    std::map<std::string, double> mark_alpha;  // corrected alpha per mark id
};

inline AucTable auc_table(const ScoreDataset& ds,
                          const std::vector<std::string>& concepts,
                          const std::vector<HypothesisSpec>& mark_specs,
                          const std::map<std::string, int>& mark_family) {
    AucTable table;
    table.concepts = concepts;

    std::set<std::string> group_set;
    for (const auto& s : ds.samples) group_set.insert(s.demographic());
    table.groups.assign(group_set.begin(), group_set.end());
    std::sort(table.groups.begin(), table.groups.end(),
              [](const std::string& a, const std::string& b) {
                  return detail::group_label_less("demographic", a, b);
              });

    // scores keyed by (concept, sample)
    std::map<std::pair<std::string, std::string>, std::vector<double>> score_of;
    for (const auto& row : ds.scores)
        score_of[{row.concept_name, row.sample_id}].push_back(row.score);

    for (const auto& concept_name : concepts) {
        std::vector<AucCell> row;
        for (const auto& group : table.groups) {
            std::vector<double> pos, neg;
            for (const auto& sample : ds.samples) {
                if (sample.demographic() != group) continue;
                auto ann = sample.annotations.find(concept_name);
                if (ann == sample.annotations.end()) continue;
                auto sc = score_of.find({concept_name, sample.sample_id});
                if (sc == score_of.end()) continue;
                auto& dst = ann->second ? pos : neg;
                dst.insert(dst.end(), sc->second.begin(), sc->second.end());
            }
            row.push_back(make_auc_cell(concept_name, group, pos, neg));
        }
        table.cells.push_back(std::move(row));
    }

    // Hypothesis marks: each spec is run per concept (stratified by
    // concept); the mark is that concept-stratum's reject flag.
    for (const auto& spec : mark_specs) {
        table.mark_ids.push_back(spec.id);
        auto fam_it = mark_family.find(spec.id);
        const int family = fam_it != mark_family.end() && fam_it->second > 0
                               ? fam_it->second
                               : int(concepts.size());
        table.mark_alpha[spec.id] = bonferroni(spec.alpha, family);

        HypothesisSpec per_concept = spec;
        per_concept.value_field = "concept:*";
        per_concept.stratify_by = "concept";
        auto outcomes = run_hypothesis(ds, per_concept, family);
        std::map<std::string, std::optional<bool>> by_concept;
        for (const auto& o : outcomes)
            by_concept[o.stratum] =
                o.test ? std::optional<bool>(o.test->reject) : std::nullopt;

        for (std::size_t ci = 0; ci < concepts.size(); ++ci) {
            if (table.marks.size() <= ci) table.marks.emplace_back();
            auto it = by_concept.find(concepts[ci]);
            table.marks[ci].push_back(it == by_concept.end() ? std::nullopt
                                                             : it->second);
        }
    }
    if (table.marks.empty())
        table.marks.resize(concepts.size());
    return table;
}

}  // namespace mlaudit
