// mlaudit command line: synthesize traces and score datasets, detect ML
// evidence in traces, reconstruct pipeline slices, and run statistical
// audit suites over score datasets.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mlaudit/callgraph.hpp"
#include "mlaudit/dataset.hpp"
#include "mlaudit/detector.hpp"
#include "mlaudit/report.hpp"
#include "mlaudit/scorer.hpp"
#include "mlaudit/slice.hpp"
#include "mlaudit/spurious.hpp"
#include "mlaudit/suite.hpp"
#include "mlaudit/synth.hpp"
#include "mlaudit/trace_io.hpp"

namespace fs = std::filesystem;
using namespace mlaudit;

namespace {

int exit_code_for(const error& e) {
    switch (e.code()) {
        case errc::schema_error:
        case errc::join_error:
        case errc::spec_error:
            return 2;
        default:
            return 1;
    }
}

std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(errc::io_error, "cannot open " + path);
    return in;
}

void write_file(const fs::path& path, const std::string& content) {
    if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(errc::io_error, "cannot write " + path.string());
    out << content;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
    write_file(path, j.dump(2) + "\n");
}

TraceLog load_trace(const std::string& path) {
    auto in = open_input(path);
    return parse_trace(in);
}

// ---------------------------------------------------------------------

int cmd_synth_trace(const std::string& plan_path, const std::string& out_dir) {
    nlohmann::json plan_json;
    open_input(plan_path) >> plan_json;
    const SyntheticAppPlan plan = trace_plan_from_json(plan_json);

    fs::create_directories(out_dir);
    std::ofstream trace(fs::path(out_dir) / "trace.jsonl", std::ios::binary);
    if (!trace) fail(errc::io_error, "cannot write trace.jsonl");
    const SynthTrace result = generate_trace(plan, trace);
    trace.close();

    write_json(fs::path(out_dir) / "jumps.json", jumps_to_json(result.jumps));
    write_json(fs::path(out_dir) / "static_edges.json",
               static_edges_to_json(result.static_edges));
    write_json(fs::path(out_dir) / "roles.json", role_map_to_json(result.roles));
    write_json(fs::path(out_dir) / "ground_truth.json",
               trace_truth_to_json(result.truth));
    std::cout << "wrote " << result.truth.total_records << " records to " << out_dir
              << "/trace.jsonl\n";
    return 0;
}

int cmd_synth_scores(const std::string& plan_path, const std::string& out_dir) {
    nlohmann::json plan_json;
    open_input(plan_path) >> plan_json;
    const DisparityPlan plan = scores_plan_from_json(plan_json);

    const SynthScores result = generate_scores(plan);
    write_file(fs::path(out_dir) / "samples.csv", result.samples_csv);
    write_file(fs::path(out_dir) / "scores.csv", result.scores_csv);
    write_json(fs::path(out_dir) / "ground_truth.json",
               scores_truth_to_json(result.truth));
    std::cout << "wrote " << result.truth.n_samples << " samples to " << out_dir
              << "\n";
    return 0;
}

int cmd_detect(const std::string& trace_path, const std::string& keywords_path,
               bool token_mode, std::size_t min_len, bool allow_boundary,
               const std::string& out_path, const std::string& candidates_path) {
    const TraceLog log = load_trace(trace_path);

    KeywordSet keywords;
    if (keywords_path.empty()) {
        for (const auto& w : default_keywords()) keywords.keywords.insert(w);
    } else {
        auto in = open_input(keywords_path);
        keywords = load_keywords(in);
    }
    keywords.mode = token_mode ? MatchMode::Token : MatchMode::Substring;

    auto evidence = scan_keywords(log, keywords);
    ProbeOptions probe;
    probe.min_len = min_len;
    probe.require_interior = !allow_boundary;
    auto vectors = scan_probability_vectors(log, probe);
    evidence.insert(evidence.end(), vectors.begin(), vectors.end());

    write_json(out_path, evidence_report(evidence));
    if (!candidates_path.empty())
        write_json(candidates_path, candidates_to_json(rank_candidates(evidence)));

    std::cout << "records: " << log.records.size()
              << " accepted, " << log.counters.rejected << " rejected\n"
              << "evidence: " << evidence.size() << " (" << vectors.size()
              << " probability vectors)\n";
    return 0;
}

int cmd_reconstruct(const std::string& trace_path, const std::string& static_path,
                    const std::string& jumps_path, const std::string& roles_path,
                    const std::string& anchor_str, const std::string& keywords_path,
                    const std::string& out_path) {
    const TraceLog log = load_trace(trace_path);

    std::vector<CallEdge> static_edges;
    if (!static_path.empty()) {
        auto in = open_input(static_path);
        static_edges = load_static_edges(in);
    }
    std::vector<JumpRecord> jumps;
    if (!jumps_path.empty()) {
        auto in = open_input(jumps_path);
        jumps = load_jump_records(in);
    }
    RoleMap roles;
    if (!roles_path.empty()) {
        auto in = open_input(roles_path);
        roles = load_role_map(in);
    }

    // Detector evidence assigns ML roles; the anchor defaults to the top
    // candidate when none is given.
    KeywordSet keywords;
    if (keywords_path.empty()) {
        for (const auto& w : default_keywords()) keywords.keywords.insert(w);
    } else {
        auto in = open_input(keywords_path);
        keywords = load_keywords(in);
    }
    auto evidence = scan_keywords(log, keywords);
    auto vectors = scan_probability_vectors(log);
    evidence.insert(evidence.end(), vectors.begin(), vectors.end());

    const CallGraph graph = build_call_graph(log, static_edges, jumps, roles, evidence);

    NodeId anchor;
    if (!anchor_str.empty()) {
        anchor = NodeId::from_string(anchor_str);
    } else {
        auto ranked = rank_candidates(evidence);
        if (ranked.empty())
            fail(errc::anchor_not_found, "no ML evidence and no --anchor given");
        anchor = NodeId{ranked[0].function_name, ranked[0].library};
        std::cout << "anchor (top candidate): " << anchor.to_string() << "\n";
    }

    const PipelineSlice slice = slice_pipeline(graph, anchor);
    auto j = slice_to_json(graph, slice);

    std::set<NodeId> declared;
    for (const auto& [id, rs] : roles.roles)
        if (rs.count(Role::InputSource)) declared.insert(id);
    if (!declared.empty())
        j["completeness"] = completeness_to_json(
            completeness_check(graph, slice, declared));
    j["unresolved_jumps"] = graph.unresolved_jumps.size();

    write_json(out_path, j);
    std::cout << "slice: " << slice.nodes.size() << " nodes, "
              << (slice.complete ? "complete" : "incomplete") << "\n";
    return 0;
}

int cmd_assess(const std::string& samples_path, const std::string& scores_path,
               const std::string& scorer_cmd, int scorer_timeout_ms,
               double max_scorer_failure_ratio, const std::string& catalog_path,
               const std::string& suite_path, std::uint64_t seed,
               const std::string& out_dir) {
    ConceptCatalog catalog;
    const bool have_catalog = !catalog_path.empty();
    if (have_catalog) {
        auto in = open_input(catalog_path);
        catalog = load_catalog(in);
    }

    std::string scores_text;
    if (!scorer_cmd.empty()) {
        // Internal injection: drive the pipeline per sample, then feed the
        // captured rows through the same loader as precomputed scores.
        auto samples_in = open_input(samples_path);
        std::stringstream empty_scores("sample_id,concept,score\n");
        auto staged = load_dataset(samples_in, empty_scores,
                                   have_catalog ? &catalog : nullptr);
        ScorerAdapter adapter;
        adapter.mode = ScorerAdapter::Mode::Internal;
        adapter.command_template = scorer_cmd;
        adapter.timeout_ms = scorer_timeout_ms;
        auto outcome = run_scorer(adapter, staged.samples);
        if (!staged.samples.empty() &&
            double(outcome.failures.size()) >
                max_scorer_failure_ratio * double(staged.samples.size())) {
            std::cerr << "scorer failed on " << outcome.failures.size() << " of "
                      << staged.samples.size() << " samples\n";
            return 3;
        }
        for (const auto& f : outcome.failures)
            std::cerr << "scorer failure: " << f.sample_id << " (" << f.reason
                      << ")\n";
        std::string csv = "sample_id,concept,score,face_count,predicted_age,"
                          "predicted_sex_score\n";
        for (const auto& r : outcome.rows)
            csv += r.sample_id + "," + csv::escape(r.concept_name) + "," +
                   format_real(r.score) + ",,,\n";
        scores_text = std::move(csv);
    } else {
        std::stringstream buf;
        buf << open_input(scores_path).rdbuf();
        scores_text = buf.str();
    }

    auto samples_in = open_input(samples_path);
    std::stringstream scores_in(scores_text);
    const ScoreDataset ds =
        load_dataset(samples_in, scores_in, have_catalog ? &catalog : nullptr);

    auto suite_in = open_input(suite_path);
    const SuiteSpec suite = load_suite(suite_in);
    const SuiteReport report = run_suite(ds, suite, seed);

    write_json(fs::path(out_dir) / "results.json",
               suite_report_to_json(report, ds.counters));
    write_file(fs::path(out_dir) / "tables" / "hypotheses.csv",
               hypotheses_csv(report));
    if (!report.median_rows.empty())
        write_file(fs::path(out_dir) / "tables" / "median_in_bin.csv",
                   median_in_bin_csv(report.median_rows));
    if (report.auc)
        write_file(fs::path(out_dir) / "tables" / "auc_table.csv",
                   auc_table_csv(*report.auc));

    for (const auto& o : report.outcomes) {
        std::cout << o.hypothesis_id << " [" << o.stratum << "] ";
        if (o.test) {
            std::cout << "p=" << format_real(o.test->p_value)
                      << " alpha=" << format_real(o.test->alpha_corrected)
                      << (o.test->reject ? " reject" : " keep");
            if (o.test->power) std::cout << " power=" << format_real(*o.test->power);
        } else {
            std::cout << "skipped (" << o.skip_reason << ")";
        }
        std::cout << "\n";
    }
    if (report.auc)
        for (const auto& id : report.auc->mark_ids)
            std::cout << id << " corrected alpha = "
                      << format_real(report.auc->mark_alpha.at(id)) << "\n";
    std::cout << "reports in " << out_dir << "\n";
    return 0;
}

int cmd_mine(const std::string& samples_path, const std::string& scores_path,
             double threshold, double alpha, const std::string& out_path,
             const std::string& table_path) {
    auto samples_in = open_input(samples_path);
    auto scores_in = open_input(scores_path);
    const ScoreDataset ds = load_dataset(samples_in, scores_in);

    GroupedScores grouped;
    for (const auto& row : ds.scores)
        grouped[row.concept_name][ds.sample_of(row).demographic()].push_back(row.score);

    const auto findings = mine_spurious(grouped, threshold, alpha);

    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& f : findings) {
        arr.push_back({{"concept", f.concept_name},
                       {"top_group", f.top_group},
                       {"top_mean", json_real(f.top_mean)},
                       {"p_value", json_real(f.p_value)},
                       {"reject", f.reject}});
    }
    write_json(out_path, arr);

    if (!table_path.empty()) {
        // group -> spuriously associated concepts (significant ones only)
        std::string csv_text = "group,concepts\n";
        std::string current;
        std::string concepts;
        auto flush = [&] {
            if (!current.empty())
                csv_text += csv::escape(current) + "," + csv::escape(concepts) + "\n";
        };
        for (const auto& f : findings) {
            if (!f.reject) continue;
            if (f.top_group != current) {
                flush();
                current = f.top_group;
                concepts.clear();
            }
            if (!concepts.empty()) concepts += ";";
            concepts += f.concept_name;
        }
        flush();
        write_file(table_path, csv_text);
    }

    std::size_t significant = 0;
    for (const auto& f : findings) significant += f.reject;
    std::cout << findings.size() << " concepts above threshold, " << significant
              << " significant\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"trace-based on-device ML detection, reconstruction, and audit"};
    app.require_subcommand(1);

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate synthetic fixtures");
    synth->require_subcommand(1);
    std::string plan_path, out_dir = "out";
    auto* synth_trace = synth->add_subcommand("trace", "planted-pipeline trace");
    synth_trace->add_option("--plan", plan_path, "plan JSON")->required();
    synth_trace->add_option("--out-dir", out_dir, "output directory");
    auto* synth_scores = synth->add_subcommand("scores", "planted score dataset");
    synth_scores->add_option("--plan", plan_path, "plan JSON")->required();
    synth_scores->add_option("--out-dir", out_dir, "output directory");

    // --- detect ---
    auto* detect = app.add_subcommand("detect", "scan a trace for ML evidence");
    std::string trace_path, keywords_path, out_path = "evidence.json",
                candidates_path;
    bool token_mode = false, allow_boundary = false;
    std::size_t min_len = 2;
    detect->add_option("--trace", trace_path, "trace JSONL")->required();
    detect->add_option("--keywords", keywords_path, "keyword config (default: built-in)");
    detect->add_flag("--token", token_mode, "whole-token keyword matching");
    detect->add_option("--min-len", min_len, "minimum probability-vector length");
    detect->add_flag("--allow-boundary", allow_boundary,
                     "accept arrays with no value strictly inside (0,1)");
    detect->add_option("--out", out_path, "evidence report (JSON array)");
    detect->add_option("--candidates-out", candidates_path, "ranked candidates JSON");

    // --- reconstruct ---
    auto* rec = app.add_subcommand("reconstruct", "build call graph and slice");
    std::string static_path, jumps_path, roles_path, anchor, slice_out = "slice.json";
    rec->add_option("--trace", trace_path, "trace JSONL")->required();
    rec->add_option("--static-edges", static_path, "static edges JSON");
    rec->add_option("--jumps", jumps_path, "jump records JSON");
    rec->add_option("--roles", roles_path, "role map JSON");
    rec->add_option("--anchor", anchor, "anchor node (name or name@lib)");
    rec->add_option("--keywords", keywords_path, "keyword config for role evidence");
    rec->add_option("--out", slice_out, "slice JSON");

    // --- assess ---
    auto* assess = app.add_subcommand("assess", "run an audit suite");
    std::string samples_path, scores_path, scorer_cmd, catalog_path, suite_path;
    std::uint64_t seed = 1;
    int scorer_timeout_ms = 10000;
    double max_scorer_failure_ratio = 0.2;
    assess->add_option("--samples", samples_path, "samples CSV")->required();
    assess->add_option("--scores", scores_path, "precomputed scores CSV");
    assess->add_option("--scorer-cmd", scorer_cmd,
                       "internal-injection command; {sample_id} is substituted");
    assess->add_option("--scorer-timeout-ms", scorer_timeout_ms, "per-sample timeout");
    assess->add_option("--max-scorer-failure-ratio", max_scorer_failure_ratio,
                       "exit 3 above this failure ratio");
    assess->add_option("--catalog", catalog_path, "concept catalog");
    assess->add_option("--suite", suite_path, "suite spec JSON")->required();
    assess->add_option("--seed", seed, "seed for power estimation");
    assess->add_option("--out-dir", out_dir, "report directory");

    // --- mine ---
    auto* mine = app.add_subcommand("mine", "mine spurious correlations");
    double threshold = 0.15, alpha = 0.05;
    std::string findings_out = "findings.json", table_out;
    mine->add_option("--samples", samples_path, "samples CSV")->required();
    mine->add_option("--scores", scores_path, "scores CSV")->required();
    mine->add_option("--threshold", threshold, "mean-score threshold");
    mine->add_option("--alpha", alpha, "family alpha before correction");
    mine->add_option("--out", findings_out, "findings JSON");
    mine->add_option("--table", table_out, "group -> concepts CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth_trace->parsed()) return cmd_synth_trace(plan_path, out_dir);
        if (synth_scores->parsed()) return cmd_synth_scores(plan_path, out_dir);
        if (detect->parsed())
            return cmd_detect(trace_path, keywords_path, token_mode, min_len,
                              allow_boundary, out_path, candidates_path);
        if (rec->parsed())
            return cmd_reconstruct(trace_path, static_path, jumps_path, roles_path,
                                   anchor, keywords_path, slice_out);
        if (assess->parsed()) {
            if (scores_path.empty() == scorer_cmd.empty()) {
                std::cerr << "assess needs exactly one of --scores / --scorer-cmd\n";
                return 2;
            }
            return cmd_assess(samples_path, scores_path, scorer_cmd,
                              scorer_timeout_ms, max_scorer_failure_ratio,
                              catalog_path, suite_path, seed, out_dir);
        }
        if (mine->parsed())
            return cmd_mine(samples_path, scores_path, threshold, alpha,
                            findings_out, table_out);
    } catch (const error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
