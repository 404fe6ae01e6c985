#include "mlaudit/trace_io.hpp"

#include <sstream>

#include <gtest/gtest.h>

using namespace mlaudit;

namespace {

TraceRecord quick_record(std::uint64_t ts, const std::string& fn,
                         const std::string& shorty = "V") {
    TraceRecord r;
    r.timestamp_ns = ts;
    r.pid = 100;
    r.tid = 7;
    r.kind = RecordKind::QuickCode;
    r.function_name = fn;
    r.shorty = shorty;
    return r;
}

}  // namespace

TEST(TraceIo, ParsesWellFormedLines) {
    std::stringstream ss;
    write_record(ss, quick_record(1, "a"));
    write_record(ss, quick_record(2, "b"));
    write_record(ss, quick_record(3, "c"));
    auto log = parse_trace(ss);
    ASSERT_EQ(log.records.size(), 3u);
    EXPECT_EQ(log.counters.read, 3u);
    EXPECT_EQ(log.counters.accepted, 3u);
    EXPECT_EQ(log.counters.rejected, 0u);
    EXPECT_EQ(log.records[0].function_name, "a");
    EXPECT_EQ(log.records[2].function_name, "c");
}

TEST(TraceIo, CountsAndSkipsMalformedLine) {
    std::stringstream ss;
    write_record(ss, quick_record(1, "a"));
    ss << "{\"v\":1,\"ts\":2,\"pid\":100,\"tid\":7,\"kind\":\"qu"; // torn write
    ss << '\n';
    write_record(ss, quick_record(3, "c"));
    auto log = parse_trace(ss);
    EXPECT_EQ(log.records.size(), 2u);
    EXPECT_EQ(log.counters.read, 3u);
    EXPECT_EQ(log.counters.rejected, 1u);
    EXPECT_EQ(log.counters.reject_reasons.at("bad_json"), 1u);
    EXPECT_EQ(log.counters.read, log.counters.accepted + log.counters.rejected);
}

TEST(TraceIo, QuickRecordsNeedShorty) {
    std::stringstream ss;
    ss << R"({"v":1,"ts":1,"pid":1,"tid":1,"kind":"quick","fn":"x"})" << '\n';
    auto log = parse_trace(ss);
    EXPECT_TRUE(log.records.empty());
    EXPECT_EQ(log.counters.reject_reasons.at("missing_shorty"), 1u);
}

TEST(TraceIo, CallbackNeedsPayload) {
    std::stringstream ss;
    ss << R"({"v":1,"ts":1,"pid":1,"tid":1,"kind":"cb","fn":"x"})" << '\n';
    ss << R"({"v":1,"ts":2,"pid":1,"tid":1,"kind":"cb","fn":"y","payload":"{}"})" << '\n';
    auto log = parse_trace(ss);
    ASSERT_EQ(log.records.size(), 1u);
    EXPECT_EQ(log.records[0].function_name, "y");
    EXPECT_EQ(log.counters.reject_reasons.at("missing_payload"), 1u);
}

TEST(TraceIo, UnknownKeysIgnored) {
    std::stringstream ss;
    ss << R"({"v":1,"ts":1,"pid":1,"tid":1,"kind":"quick","fn":"x","shorty":"V","future_field":[1,2,3]})"
       << '\n';
    auto log = parse_trace(ss);
    ASSERT_EQ(log.records.size(), 1u);
}

TEST(TraceIo, RejectsNonMonotonicTimestampPerThread) {
    std::stringstream ss;
    write_record(ss, quick_record(10, "a"));
    write_record(ss, quick_record(5, "b"));  // goes backwards on same tid
    TraceRecord other = quick_record(1, "c");
    other.tid = 8;  // fresh thread: its own clock
    write_record(ss, other);
    auto log = parse_trace(ss);
    ASSERT_EQ(log.records.size(), 2u);
    EXPECT_EQ(log.records[1].function_name, "c");
    EXPECT_EQ(log.counters.reject_reasons.at("nonmonotonic_ts"), 1u);
}

TEST(TraceIo, ExcessiveCorruptionAborts) {
    std::stringstream ss;
    for (int i = 0; i < 200; ++i) ss << "not json at all\n";
    ParseOptions opt;
    opt.max_reject_ratio = 0.5;
    opt.min_lines_for_ratio = 100;
    try {
        parse_trace(ss, opt);
        FAIL() << "expected error";
    } catch (const error& e) {
        EXPECT_EQ(e.code(), errc::excessive_corruption);
    }
}

// Round trip: serialize accepted records, parse again, records compare equal.
TEST(TraceIo, ReparseIsIdempotent) {
    std::stringstream ss;
    TraceRecord r = quick_record(5, "com.app.Widget.draw", "ZIJ");
    r.library = "libwidget.so";
    r.offset = 0x1f40;
    r.is_static = false;
    r.raw_args = {0, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0, 0, 0, 0, 0};
    r.raw_return = {1, 0, 0, 0};
    r.stack = {{"com.app.Widget.draw", "com.app.Main.loop"}};
    write_record(ss, r);
    TraceRecord cb = quick_record(6, "postMessage");
    cb.kind = RecordKind::Callback;
    cb.shorty.reset();
    cb.payload = R"({"face_count":1,"boy_prob":0.75,"text":"a\"b\\c\n"})";
    write_record(ss, cb);

    auto log1 = parse_trace(ss);
    ASSERT_EQ(log1.records.size(), 2u);
    EXPECT_EQ(log1.records[0], r);
    EXPECT_EQ(log1.records[1], cb);

    std::stringstream ss2;
    write_trace(ss2, log1);
    auto log2 = parse_trace(ss2);
    EXPECT_EQ(log1.records, log2.records);
}

TEST(TraceIo, StreamingSinkSeesInputOrder) {
    std::stringstream ss;
    for (int i = 0; i < 50; ++i) write_record(ss, quick_record(std::uint64_t(i), "f" + std::to_string(i)));
    std::vector<std::string> seen;
    auto counters = parse_trace_stream(ss, [&](TraceRecord&& r, std::uint64_t idx) {
        EXPECT_EQ(idx, seen.size());
        seen.push_back(r.function_name);
    });
    EXPECT_EQ(counters.accepted, 50u);
    for (int i = 0; i < 50; ++i) EXPECT_EQ(seen[std::size_t(i)], "f" + std::to_string(i));
}
