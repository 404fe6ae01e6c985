#pragma once

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include "mlaudit/dataset.hpp"
#include "mlaudit/errors.hpp"

namespace mlaudit {

// How model scores are obtained.
//
// Internal: the pipeline is driven directly, one scorer-command run per
// sample; the command must print one "concept<TAB>score" line per concept.
// External: the system produced scores on its own; they arrive as a
// precomputed scores.csv.
struct ScorerAdapter {
    enum class Mode { Internal, External };
    Mode mode = Mode::External;
    std::string command_template;  // Internal; {sample_id} is substituted
    std::string scores_path;       // External
    int timeout_ms = 10000;        // per sample
    int retries = 0;               // extra attempts per sample
};

struct ScorerFailure {
    std::string sample_id;
    std::string reason;  // "timeout", "exit_<code>", "parse", "spawn"
};

struct ScorerOutcome {
    std::vector<ScoreRow> rows;
    std::vector<ScorerFailure> failures;
};

namespace detail {

inline std::string substitute_sample(const std::string& tmpl, const std::string& id) {
    std::string out;
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl.compare(i, 11, "{sample_id}") == 0) {
            out += id;
            i += 11;
        } else {
            out.push_back(tmpl[i++]);
        }
    }
    return out;
}

struct CommandResult {
    bool timed_out = false;
    bool spawn_failed = false;
    int exit_code = -1;
    std::string output;
};

// Run a shell command, capture stdout, enforce a wall-clock timeout.
inline CommandResult run_command(const std::string& command, int timeout_ms) {
    CommandResult result;
    int fds[2];
    if (pipe(fds) != 0) {
        result.spawn_failed = true;
        return result;
    }
    const pid_t pid = fork();
    if (pid < 0) {
        close(fds[0]);
        close(fds[1]);
        result.spawn_failed = true;
        return result;
    }
    if (pid == 0) {
        dup2(fds[1], STDOUT_FILENO);
        close(fds[0]);
        close(fds[1]);
        execl("/bin/sh", "sh", "-c", command.c_str(), (char*)nullptr);
        _exit(127);
    }
    close(fds[1]);

    pollfd pfd{fds[0], POLLIN, 0};
    char buf[4096];
    int remaining = timeout_ms;
    for (;;) {
        const int rc = poll(&pfd, 1, std::max(remaining, 0));
        if (rc == 0) {
            result.timed_out = true;
            kill(pid, SIGKILL);
            break;
        }
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        const ssize_t n = read(fds[0], buf, sizeof buf);
        if (n <= 0) break;  // EOF or error: child is done writing
        result.output.append(buf, std::size_t(n));
    }
    close(fds[0]);
    int status = 0;
    waitpid(pid, &status, 0);
    if (!result.timed_out && WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    return result;
}

// "concept<TAB>score" lines -> rows; false on any malformed line.
inline bool parse_scorer_output(const std::string& output, const std::string& sample_id,
                                std::vector<ScoreRow>& rows) {
    std::size_t i = 0;
    while (i < output.size()) {
        std::size_t j = output.find('\n', i);
        if (j == std::string::npos) j = output.size();
        std::string_view line(output.data() + i, j - i);
        i = j + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos || tab == 0) return false;
        auto score = parse_double(std::string(line.substr(tab + 1)));
        if (!score || *score < 0.0 || *score > 1.0) return false;
        ScoreRow r;
        r.sample_id = sample_id;
        r.concept_name = std::string(line.substr(0, tab));
        r.score = *score;
        rows.push_back(std::move(r));
    }
    return true;
}

}  // namespace detail

// Obtain scores for the given samples. Internal mode never aborts on a
// single bad sample: failures are collected and scoring continues. Output
// rows are ordered by sample_id.
inline ScorerOutcome run_scorer(const ScorerAdapter& adapter,
                                const std::vector<SampleRow>& samples) {
    ScorerOutcome outcome;
    if (adapter.mode == ScorerAdapter::Mode::External) {
        std::ifstream in(adapter.scores_path);
        if (!in) fail(errc::io_error, "cannot open " + adapter.scores_path);
        std::vector<std::string> row;
        if (!csv::read_row(in, row)) fail(errc::schema_error, "empty scores file");
        const csv::Header h(row);
        const std::size_t c_id = h.require("sample_id");
        const std::size_t c_concept = h.require("concept");
        const std::size_t c_score = h.require("score");
        while (csv::read_row(in, row)) {
            if (row.size() == 1 && row[0].empty()) continue;
            ScoreRow r;
            r.sample_id = csv::cell(row, c_id);
            r.concept_name = csv::cell(row, c_concept);
            auto score = detail::parse_double(csv::cell(row, c_score));
            if (!score) fail(errc::schema_error, "bad score for " + r.sample_id);
            r.score = *score;
            outcome.rows.push_back(std::move(r));
        }
        std::stable_sort(outcome.rows.begin(), outcome.rows.end(),
                         [](const ScoreRow& a, const ScoreRow& b) {
                             return a.sample_id < b.sample_id;
                         });
        return outcome;
    }

    if (adapter.command_template.empty())
        fail(errc::spec_error, "internal scorer needs a command template");

    std::vector<const SampleRow*> ordered;
    ordered.reserve(samples.size());
    for (const auto& s : samples) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const SampleRow* a, const SampleRow* b) {
                  return a->sample_id < b->sample_id;
              });

    for (const SampleRow* sample : ordered) {
        const std::string command =
            detail::substitute_sample(adapter.command_template, sample->sample_id);
        std::string reason;
        bool ok = false;
        for (int attempt = 0; attempt <= adapter.retries && !ok; ++attempt) {
            auto result = detail::run_command(command, adapter.timeout_ms);
            if (result.spawn_failed) {
                reason = "spawn";
                continue;
            }
            if (result.timed_out) {
                reason = "timeout";
                continue;
            }
            if (result.exit_code != 0) {
                reason = "exit_" + std::to_string(result.exit_code);
                continue;
            }
            std::vector<ScoreRow> rows;
            if (!detail::parse_scorer_output(result.output, sample->sample_id, rows)) {
                reason = "parse";
                continue;
            }
            outcome.rows.insert(outcome.rows.end(), rows.begin(), rows.end());
            ok = true;
        }
        if (!ok) outcome.failures.push_back({sample->sample_id, reason});
    }
    return outcome;
}

}  // namespace mlaudit
