#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <utility>

#include "mlaudit/errors.hpp"
#include "mlaudit/trace.hpp"

namespace mlaudit {

struct ParseOptions {
    // Reject-ratio ceiling. Crossing it (once enough lines have been seen
    // to make the ratio meaningful) raises excessive_corruption.
    double max_reject_ratio = 0.5;
    std::uint64_t min_lines_for_ratio = 100;
    // Enforce per-(pid,tid) timestamp monotonicity; violating records are
    // rejected, not fatal.
    bool enforce_monotonic_ts = true;
};

namespace detail {

class MonotonicityGuard {
public:
    bool admit(const TraceRecord& r) {
        const std::uint64_t key =
            (std::uint64_t(std::uint32_t(r.pid)) << 32) | std::uint32_t(r.tid);
        auto [it, fresh] = last_ts_.try_emplace(key, r.timestamp_ns);
        if (fresh) return true;
        if (r.timestamp_ns < it->second) return false;
        it->second = r.timestamp_ns;
        return true;
    }

private:
    std::map<std::uint64_t, std::uint64_t> last_ts_;
};

}  // namespace detail

// Streaming parse: one line in, at most one record out, memory bounded by
// the longest single line. The sink receives (record, line_index) for each
// accepted record, in input order. Malformed lines are counted and
// skipped; only a reject ratio above options.max_reject_ratio aborts.
template <typename Sink>
ParseCounters parse_trace_stream(std::istream& in, Sink&& sink,
                                 const ParseOptions& options = {}) {
    ParseCounters c;
    detail::MonotonicityGuard guard;
    std::string line;
    std::string reason;
    std::uint64_t index = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        ++c.read;
        auto rec = parse_record(line, &reason);
        if (rec && options.enforce_monotonic_ts && !guard.admit(*rec)) {
            rec.reset();
            reason = "nonmonotonic_ts";
        }
        if (rec) {
            ++c.accepted;
            sink(std::move(*rec), index++);
        } else {
            ++c.rejected;
            ++c.reject_reasons[reason];
            if (c.read >= options.min_lines_for_ratio &&
                double(c.rejected) > options.max_reject_ratio * double(c.read)) {
                fail(errc::excessive_corruption,
                     std::to_string(c.rejected) + " of " + std::to_string(c.read) +
                         " lines rejected");
            }
        }
    }
    return c;
}

// Materializing parse. Accepted records keep input order.
inline TraceLog parse_trace(std::istream& in, const ParseOptions& options = {}) {
    TraceLog log;
    log.counters = parse_trace_stream(
        in, [&](TraceRecord&& r, std::uint64_t) { log.records.push_back(std::move(r)); },
        options);
    return log;
}

inline void write_record(std::ostream& out, const TraceRecord& r) {
    out << to_json_line(r) << '\n';
}

inline void write_trace(std::ostream& out, const TraceLog& log) {
    for (const auto& r : log.records) write_record(out, r);
}

}  // namespace mlaudit
