#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <vector>

#include "mlaudit/errors.hpp"
#include "mlaudit/stats.hpp"

namespace mlaudit {

// Scores for one concept split by demographic group. Group order is the
// map's (lexicographic) order, which keeps every downstream listing
// deterministic.
using GroupedScores = std::map<std::string, std::map<std::string, std::vector<double>>>;

struct SpuriousFinding {
    std::string concept_name;
    std::string top_group;
    double top_mean = 0.0;
    double p_value = 1.0;
    bool reject = false;
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / double(v.size());
}

}  // namespace detail

// Spurious-correlation mining: keep concepts whose mean score exceeds the
// threshold in at least one group, take the group with the highest mean,
// and test whether that concept's scores differ across all groups at the
// Bonferroni level for the number of concepts actually tested. Output is
// sorted by (top_group, concept).
inline std::vector<SpuriousFinding> mine_spurious(const GroupedScores& scores,
                                                  double threshold, double alpha) {
    struct Candidate {
        const std::string* concept_name;
        const std::map<std::string, std::vector<double>>* groups;
        std::string top_group;
        double top_mean;
    };

    std::vector<Candidate> tested;
    for (const auto& [concept_name, groups] : scores) {
        if (groups.size() < 2)
            fail(errc::degenerate_input,
                 "concept \"" + concept_name + "\" has fewer than 2 groups");
        std::string top;
        double top_mean = -1.0;
        for (const auto& [group, values] : groups) {
            const double m = detail::mean_of(values);
            if (m > top_mean) {
                top_mean = m;
                top = group;
            }
        }
        if (top_mean > threshold)
            tested.push_back({&concept_name, &groups, top, top_mean});
    }
    if (tested.empty()) return {};

    const double alpha_corrected = bonferroni(alpha, int(tested.size()));

    std::vector<SpuriousFinding> findings;
    findings.reserve(tested.size());
    for (const auto& cand : tested) {
        SampleGroups sg;
        sg.groups.reserve(cand.groups->size());
        for (const auto& [group, values] : *cand.groups)
            sg.groups.push_back({group, values});
        const TestResult res = kruskal_wallis(sg, alpha_corrected);

        SpuriousFinding f;
        f.concept_name = *cand.concept_name;
        f.top_group = cand.top_group;
        f.top_mean = cand.top_mean;
        f.p_value = res.p_value;
        f.reject = res.reject;
        findings.push_back(std::move(f));
    }
    std::sort(findings.begin(), findings.end(),
              [](const SpuriousFinding& a, const SpuriousFinding& b) {
                  if (a.top_group != b.top_group) return a.top_group < b.top_group;
                  return a.concept_name < b.concept_name;
              });
    return findings;
}

struct ConceptValidation {
    double mean_matched = 0.0;
    double mean_unmatched = 0.0;
    double gap = 0.0;  // matched minus unmatched; > 0 means the concept tracks its label
};

inline ConceptValidation concept_validation(const std::vector<double>& matched,
                                            const std::vector<double>& unmatched) {
    if (matched.empty() || unmatched.empty())
        fail(errc::degenerate_input, "both sample lists must be non-empty");
    ConceptValidation v;
    v.mean_matched = detail::mean_of(matched);
    v.mean_unmatched = detail::mean_of(unmatched);
    v.gap = v.mean_matched - v.mean_unmatched;
    return v;
}

}  // namespace mlaudit
