#pragma once

#include <istream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlaudit/dataset.hpp"
#include "mlaudit/errors.hpp"
#include "mlaudit/hypotheses.hpp"
#include "mlaudit/report.hpp"

namespace mlaudit {

// An audit suite is data: the hypotheses to run, whether to pre-filter to
// single-face rows, and optionally an AUC table with hypothesis marks.
struct SuiteSpec {
    std::string id;
    bool filter_single_face = false;
    std::vector<HypothesisSpec> hypotheses;
    bool want_auc_table = false;
    std::vector<std::string> auc_concepts;  // empty: every annotated concept
    std::vector<std::string> auc_marks;     // hypothesis ids
};

inline SuiteSpec load_suite(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::spec_error, std::string("suite: ") + e.what());
    }
    SuiteSpec s;
    s.id = j.value("id", "suite");
    s.filter_single_face = j.value("filter_single_face", false);
    if (!j.contains("hypotheses") || !j.at("hypotheses").is_array())
        fail(errc::spec_error, "suite needs a hypotheses array");
    for (const auto& h : j.at("hypotheses")) {
        HypothesisSpec spec;
        spec.id = h.value("id", "");
        if (spec.id.empty()) fail(errc::spec_error, "hypothesis without id");
        spec.kind = h.value("kind", "kruskal");
        if (spec.kind != "kruskal" && spec.kind != "median_in_bin")
            fail(errc::spec_error, "unknown hypothesis kind \"" + spec.kind + "\"");
        if (spec.kind == "kruskal") {
            if (!h.contains("value_field") || !h.contains("group_field"))
                fail(errc::spec_error,
                     "hypothesis \"" + spec.id + "\" needs value_field/group_field");
            spec.value_field = h.at("value_field").get<std::string>();
            spec.group_field = h.at("group_field").get<std::string>();
        }
        if (h.contains("stratify_by"))
            spec.stratify_by = h.at("stratify_by").get<std::string>();
        spec.alpha = h.value("alpha", 0.05);
        if (h.contains("family_size") && h.at("family_size").is_number_integer())
            spec.family_size = h.at("family_size").get<int>();
        spec.with_power = h.value("with_power", false);
        spec.power_n = h.value("power_n", 100);
        spec.power_sims = h.value("power_sims", 1000);
        s.hypotheses.push_back(std::move(spec));
    }
    if (j.contains("auc_table")) {
        s.want_auc_table = true;
        const auto& t = j.at("auc_table");
        if (t.contains("concepts") && t.at("concepts").is_array())
            s.auc_concepts = t.at("concepts").get<std::vector<std::string>>();
        if (t.contains("marks"))
            s.auc_marks = t.at("marks").get<std::vector<std::string>>();
    }
    return s;
}

struct SuiteReport {
    std::string suite_id;
    std::uint64_t seed = 0;
    std::optional<FaceFilterResult> face_filter;  // kept rows live here too
    std::vector<HypothesisOutcome> outcomes;
    std::vector<MedianBinRow> median_rows;
    std::optional<AucTable> auc;
};

// Run every hypothesis of the suite. family_size "auto" resolves to the
// number of tests the whole invocation launches, so one suite is one
// Bonferroni family unless a spec pins its own.
inline SuiteReport run_suite(const ScoreDataset& input, const SuiteSpec& suite,
                             std::uint64_t seed) {
    SuiteReport report;
    report.suite_id = suite.id;
    report.seed = seed;

    ScoreDataset ds = input;
    if (suite.filter_single_face) {
        auto filtered = filter_single_face(ds.scores);
        ds.scores = filtered.kept;
        report.face_filter = std::move(filtered);
    }

    int auto_family = 0;
    for (const auto& h : suite.hypotheses)
        if (h.kind == "kruskal" && !h.family_size)
            auto_family += count_testable_strata(ds, h);

    for (const auto& h : suite.hypotheses) {
        if (h.kind == "median_in_bin") {
            report.median_rows = median_in_bin(ds);
            continue;
        }
        const int family = h.family_size ? *h.family_size : std::max(auto_family, 1);
        auto outcomes = run_hypothesis(ds, h, family, seed);
        report.outcomes.insert(report.outcomes.end(), outcomes.begin(),
                               outcomes.end());
    }

    if (suite.want_auc_table) {
        std::vector<std::string> concepts = suite.auc_concepts;
        if (concepts.empty()) {
            std::set<std::string> seen;
            for (const auto& s : ds.samples)
                for (const auto& [c, positive] : s.annotations) seen.insert(c);
            concepts.assign(seen.begin(), seen.end());
        }
        std::vector<HypothesisSpec> mark_specs;
        std::map<std::string, int> mark_family;
        for (const auto& id : suite.auc_marks) {
            bool found = false;
            for (const auto& h : suite.hypotheses)
                if (h.id == id) {
                    mark_specs.push_back(h);
                    if (h.family_size) mark_family[id] = *h.family_size;
                    found = true;
                }
            if (!found)
                fail(errc::spec_error, "auc_table mark \"" + id + "\" is not a hypothesis");
        }
        report.auc = auc_table(ds, concepts, mark_specs, mark_family);
    }
    return report;
}

// ---------------------------------------------------------------------
// Report rendering. Everything below is deterministic: fixed key order,
// fixed row order, no timestamps.
// ---------------------------------------------------------------------

inline nlohmann::ordered_json suite_report_to_json(const SuiteReport& report,
                                                   const DatasetCounters& counters) {
    nlohmann::ordered_json j;
    j["suite"] = report.suite_id;
    j["seed"] = report.seed;
    j["dataset"] = {{"samples", counters.sample_rows_read -
                                    counters.sample_rows_rejected},
                    {"sample_rows_rejected", counters.sample_rows_rejected},
                    {"score_rows_read", counters.score_rows_read},
                    {"score_rows_rejected", counters.score_rows_rejected},
                    {"orphan_scores", counters.orphan_scores}};
    if (report.face_filter) {
        j["face_filter"] = {{"kept", report.face_filter->kept.size()},
                            {"discarded_zero", report.face_filter->discarded_zero},
                            {"discarded_multi", report.face_filter->discarded_multi}};
    }
    nlohmann::ordered_json hyps = nlohmann::ordered_json::array();
    for (const auto& o : report.outcomes) {
        nlohmann::ordered_json h;
        h["hypothesis"] = o.hypothesis_id;
        h["stratum"] = o.stratum;
        nlohmann::ordered_json groups = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < o.group_labels.size(); ++i)
            groups.push_back({{"label", o.group_labels[i]}, {"n", o.group_sizes[i]}});
        h["groups"] = std::move(groups);
        if (o.test) {
            h["h_statistic"] = json_real(o.test->h_statistic);
            h["df"] = o.test->degrees_freedom;
            h["p_value"] = json_real(o.test->p_value);
            h["alpha_corrected"] = json_real(o.test->alpha_corrected);
            h["reject"] = o.test->reject;
            if (o.test->power) h["power"] = json_real(*o.test->power);
        } else {
            h["skipped"] = o.skip_reason;
        }
        hyps.push_back(std::move(h));
    }
    j["hypotheses"] = std::move(hyps);
    if (!report.median_rows.empty()) {
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (const auto& r : report.median_rows) {
            rows.push_back({{"age_bin", r.age_bin},
                            {"n", r.n},
                            {"median", json_real(r.median)},
                            {"q1", json_real(r.q1)},
                            {"q3", json_real(r.q3)},
                            {"iqr", json_real(r.iqr)},
                            {"fraction_in_bin", json_real(r.fraction_in_bin)},
                            {"median_in_bin", r.median_in_bin}});
        }
        j["median_in_bin"] = std::move(rows);
    }
    if (report.auc) {
        const AucTable& t = *report.auc;
        nlohmann::ordered_json tbl;
        tbl["groups"] = t.groups;
        nlohmann::ordered_json alpha;
        for (const auto& id : t.mark_ids) alpha[id] = json_real(t.mark_alpha.at(id));
        tbl["corrected_alpha"] = std::move(alpha);
        nlohmann::ordered_json rows = nlohmann::ordered_json::array();
        for (std::size_t ci = 0; ci < t.concepts.size(); ++ci) {
            nlohmann::ordered_json row;
            row["concept"] = t.concepts[ci];
            nlohmann::ordered_json cells = nlohmann::ordered_json::array();
            for (const auto& cell : t.cells[ci]) {
                cells.push_back({{"group", cell.group},
                                 {"auc", json_real(cell.auc * 100.0)},
                                 {"n_pos", cell.n_pos},
                                 {"n_neg", cell.n_neg}});
            }
            row["cells"] = std::move(cells);
            nlohmann::ordered_json marks;
            for (std::size_t mi = 0; mi < t.mark_ids.size(); ++mi) {
                const auto& m = t.marks[ci][mi];
                marks[t.mark_ids[mi]] = m ? nlohmann::ordered_json(*m)
                                          : nlohmann::ordered_json(nullptr);
            }
            row["marks"] = std::move(marks);
            rows.push_back(std::move(row));
        }
        tbl["rows"] = std::move(rows);
        j["auc_table"] = std::move(tbl);
    }
    return j;
}

inline std::string hypotheses_csv(const SuiteReport& report) {
    std::string out =
        "hypothesis,stratum,groups,n_total,h_statistic,df,p_value,alpha_corrected,"
        "reject,power,skipped\n";
    for (const auto& o : report.outcomes) {
        std::size_t n_total = 0;
        for (auto n : o.group_sizes) n_total += n;
        out += o.hypothesis_id;
        out += ",";
        out += csv::escape(o.stratum);
        out += "," + std::to_string(o.group_labels.size());
        out += "," + std::to_string(n_total);
        if (o.test) {
            out += "," + format_real(o.test->h_statistic);
            out += "," + std::to_string(o.test->degrees_freedom);
            out += "," + format_real(o.test->p_value);
            out += "," + format_real(o.test->alpha_corrected);
            out += o.test->reject ? ",yes" : ",no";
            out += o.test->power ? "," + format_real(*o.test->power) : ",";
            out += ",";
        } else {
            out += ",,,,,,";
            out += csv::escape(o.skip_reason);
        }
        out += "\n";
    }
    return out;
}

// Concept x group table, AUC scaled to 0-100 at two decimals, NaN cells
// spelled "NaN", hypothesis marks appended as yes/no columns.
inline std::string auc_table_csv(const AucTable& t) {
    std::string out = "concept";
    for (const auto& g : t.groups) out += "," + csv::escape(g);
    for (const auto& id : t.mark_ids) {
        std::string upper = id;
        for (auto& c : upper) c = char(std::toupper(static_cast<unsigned char>(c)));
        out += "," + upper;
    }
    out += "\n";
    for (std::size_t ci = 0; ci < t.concepts.size(); ++ci) {
        out += csv::escape(t.concepts[ci]);
        for (const auto& cell : t.cells[ci])
            out += "," + format_fixed(cell.auc * 100.0, 2);
        for (std::size_t mi = 0; mi < t.mark_ids.size(); ++mi) {
            const auto& m = t.marks[ci][mi];
            out += ",";
            out += !m ? "" : (*m ? "yes" : "no");
        }
        out += "\n";
    }
    return out;
}

inline std::string median_in_bin_csv(const std::vector<MedianBinRow>& rows) {
    std::string out = "age_bin,n,median,q1,q3,iqr,fraction_in_bin,median_in_bin\n";
    for (const auto& r : rows) {
        out += r.age_bin;
        out += "," + std::to_string(r.n);
        out += "," + format_real(r.median);
        out += "," + format_real(r.q1);
        out += "," + format_real(r.q3);
        out += "," + format_real(r.iqr);
        out += "," + format_real(r.fraction_in_bin);
        out += r.median_in_bin ? ",yes" : ",no";
        out += "\n";
    }
    return out;
}

}  // namespace mlaudit
