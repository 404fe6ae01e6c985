#include "mlaudit/callgraph.hpp"

#include <sstream>

#include <gtest/gtest.h>

#include "mlaudit/synth.hpp"
#include "mlaudit/trace_io.hpp"

using namespace mlaudit;

namespace {

TraceRecord with_stack(std::uint64_t ts, std::vector<std::string> frames) {
    TraceRecord r;
    r.timestamp_ns = ts;
    r.pid = 1;
    r.tid = 1;
    r.kind = RecordKind::QuickCode;
    r.function_name = NodeId::from_string(frames.front()).name;
    r.library = NodeId::from_string(frames.front()).library;
    r.shorty = "V";
    r.stack = std::move(frames);
    return r;
}

const CallEdge* find_edge(const CallGraph& g, const std::string& from,
                          const std::string& to) {
    for (const auto& e : g.edges)
        if (e.from == NodeId::from_string(from) && e.to == NodeId::from_string(to))
            return &e;
    return nullptr;
}

}  // namespace

TEST(CallGraph, StackAdjacencyIsCallerToCallee) {
    TraceLog log;
    log.records.push_back(with_stack(1, {"C", "B", "A"}));  // innermost first
    auto g = build_call_graph(log);
    ASSERT_EQ(g.nodes.size(), 3u);
    ASSERT_EQ(g.edges.size(), 2u);
    EXPECT_NE(find_edge(g, "A", "B"), nullptr);
    EXPECT_NE(find_edge(g, "B", "C"), nullptr);
    EXPECT_EQ(find_edge(g, "C", "B"), nullptr);
}

TEST(CallGraph, SupportAccumulatesAcrossRecords) {
    TraceLog log;
    for (int i = 0; i < 7; ++i)
        log.records.push_back(with_stack(std::uint64_t(i + 1), {"B", "A"}));
    auto g = build_call_graph(log);
    const CallEdge* e = find_edge(g, "A", "B");
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(e->support, 7u);
}

TEST(CallGraph, StackEdgeObservationsMatchFrameCount) {
    SyntheticAppPlan plan;
    plan.seed = 77;
    plan.n_background_functions = 60;
    plan.n_background_calls = 1500;
    plan.n_frames = 6;
    std::stringstream trace;
    generate_trace(plan, trace);
    auto log = parse_trace(trace);

    std::uint64_t expected = 0;
    for (const auto& r : log.records)
        if (r.stack && r.stack->size() > 1) expected += r.stack->size() - 1;

    auto g = build_call_graph(log);
    std::uint64_t got = 0;
    for (const auto& e : g.edges)
        if (e.kind == EdgeKind::StackObserved || e.kind == EdgeKind::Jni ||
            e.kind == EdgeKind::NativeCallback)
            got += e.support;
    EXPECT_EQ(got, expected);
}

TEST(CallGraph, MultiDestinationJumpYieldsTwoEdges) {
    TraceLog log;
    TraceRecord src = with_stack(1, {"branchy@lib.so"});
    src.offset = 0x100;
    TraceRecord d1 = with_stack(2, {"dest_a@lib.so"});
    d1.offset = 0x200;
    TraceRecord d2 = with_stack(3, {"dest_b@lib.so"});
    d2.offset = 0x300;
    log.records = {src, d1, d2};

    std::vector<JumpRecord> jumps = {{"lib.so", 0x140, 0x200, 3},
                                     {"lib.so", 0x140, 0x300, 1}};
    auto g = build_call_graph(log, {}, jumps);
    const CallEdge* a = find_edge(g, "branchy@lib.so", "dest_a@lib.so");
    const CallEdge* b = find_edge(g, "branchy@lib.so", "dest_b@lib.so");
    ASSERT_NE(a, nullptr);
    ASSERT_NE(b, nullptr);
    EXPECT_EQ(a->kind, EdgeKind::DynamicJump);
    EXPECT_EQ(a->support, 3u);
    EXPECT_EQ(b->support, 1u);
    EXPECT_TRUE(g.unresolved_jumps.empty());
}

TEST(CallGraph, UnresolvedJumpsCollectedNotFatal) {
    TraceLog log;
    TraceRecord src = with_stack(1, {"branchy@lib.so"});
    src.offset = 0x100;
    log.records = {src};
    std::vector<JumpRecord> jumps = {{"lib.so", 0x140, 0xdead, 1},
                                     {"other.so", 0x10, 0x20, 1}};
    auto g = build_call_graph(log, {}, jumps);
    EXPECT_EQ(g.unresolved_jumps.size(), 2u);
    for (const auto& e : g.edges) EXPECT_NE(e.kind, EdgeKind::DynamicJump);
}

TEST(CallGraph, StaticEdgesKeepZeroSupport) {
    TraceLog log;
    log.records.push_back(with_stack(1, {"A"}));
    std::vector<CallEdge> statics = {
        {NodeId{"A", {}}, NodeId{"Z", {}}, EdgeKind::Static, 0}};
    auto g = build_call_graph(log, statics);
    const CallEdge* e = find_edge(g, "A", "Z");
    ASSERT_NE(e, nullptr);
    EXPECT_EQ(e->kind, EdgeKind::Static);
    EXPECT_EQ(e->support, 0u);
}

TEST(CallGraph, JniAndCallbackEdgeKinds) {
    TraceLog log;
    TraceRecord jni = with_stack(1, {"native_fn@lib.so", "java.Caller.run"});
    jni.kind = RecordKind::JniTrampoline;
    TraceRecord cb = with_stack(2, {"java.Handler.on", "emitter@lib.so"});
    cb.kind = RecordKind::Callback;
    cb.shorty.reset();
    cb.payload = "{}";
    log.records = {jni, cb};
    auto g = build_call_graph(log);
    EXPECT_EQ(find_edge(g, "java.Caller.run", "native_fn@lib.so")->kind, EdgeKind::Jni);
    EXPECT_EQ(find_edge(g, "emitter@lib.so", "java.Handler.on")->kind,
              EdgeKind::NativeCallback);
}

TEST(ResolveJump, SortedDestinations) {
    std::vector<JumpRecord> jumps = {{"lib.so", 0x10, 0x40, 1},
                                     {"lib.so", 0x10, 0x10, 2},
                                     {"lib.so", 0x99, 0x50, 1}};
    auto dests = resolve_jump(jumps, "lib.so", 0x10);
    ASSERT_EQ(dests.size(), 2u);
    EXPECT_EQ(dests[0], 0x10u);
    EXPECT_EQ(dests[1], 0x40u);
    EXPECT_TRUE(resolve_jump(jumps, "lib.so", 0x7777).empty());
    ASSERT_EQ(resolve_jump(jumps, "lib.so", 0x99),
              (std::vector<std::uint64_t>{0x50}));
}

TEST(CallGraph, DeterministicAcrossRebuilds) {
    SyntheticAppPlan plan;
    plan.seed = 31;
    plan.n_background_functions = 80;
    plan.n_background_calls = 2000;
    plan.n_frames = 8;
    std::stringstream trace;
    auto synth = generate_trace(plan, trace);
    std::string text = trace.str();

    std::stringstream s1(text), s2(text);
    auto log1 = parse_trace(s1);
    auto log2 = parse_trace(s2);
    auto g1 = build_call_graph(log1, synth.static_edges, synth.jumps, synth.roles);
    auto g2 = build_call_graph(log2, synth.static_edges, synth.jumps, synth.roles);
    ASSERT_EQ(g1.nodes.size(), g2.nodes.size());
    ASSERT_EQ(g1.edges.size(), g2.edges.size());
    for (std::size_t i = 0; i < g1.edges.size(); ++i)
        EXPECT_EQ(g1.edges[i], g2.edges[i]);
}

TEST(CallGraph, RecoversPlantedPipelineEdges) {
    SyntheticAppPlan plan;
    plan.seed = 41;
    plan.n_background_functions = 50;
    plan.n_background_calls = 1000;
    plan.n_frames = 8;
    std::stringstream trace;
    auto synth = generate_trace(plan, trace);
    auto log = parse_trace(trace);
    auto g = build_call_graph(log, synth.static_edges, synth.jumps, synth.roles);

    // every planted node is present
    for (const auto& id : synth.truth.pipeline_nodes)
        EXPECT_NE(g.find(id), nullptr) << id.to_string();

    // the chain is connected: camera->pre->model->register->callback->dispatch->sink
    const auto& n = synth.truth.pipeline_nodes;
    for (std::size_t i = 0; i + 1 < 7; ++i) {
        bool found = false;
        for (const auto& e : g.edges)
            if (e.from == n[i] && e.to == n[i + 1]) found = true;
        EXPECT_TRUE(found) << n[i].to_string() << " -> " << n[i + 1].to_string();
    }
}

TEST(RoleMapIo, ParsesRolesAndNonExported) {
    std::stringstream ss(R"({
      "roles": {"input_source": ["cam@lib.so"], "sink": ["java.Writer.write"]},
      "non_exported": ["reg@lib.so"]
    })");
    auto map = load_role_map(ss);
    EXPECT_EQ(map.roles.at(NodeId{"cam", "lib.so"}).count(Role::InputSource), 1u);
    EXPECT_EQ(map.roles.at(NodeId{"java.Writer.write", {}}).count(Role::Sink), 1u);
    EXPECT_EQ(map.non_exported.count(NodeId{"reg", "lib.so"}), 1u);

    std::stringstream bad(R"({"roles": {"nonsense": []}})");
    EXPECT_THROW(load_role_map(bad), error);
}
