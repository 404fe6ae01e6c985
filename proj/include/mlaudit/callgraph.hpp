#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlaudit/detector.hpp"
#include "mlaudit/errors.hpp"
#include "mlaudit/trace.hpp"

namespace mlaudit {

// Node identity: function name plus (for native code) the library it lives
// in. Stack frames spell this as "name@library"; Java frames are bare names.
struct NodeId {
    std::string name;
    std::optional<std::string> library;

    auto operator<=>(const NodeId&) const = default;

    std::string to_string() const {
        return library ? name + "@" + *library : name;
    }

    static NodeId from_string(std::string_view s) {
        const auto at = s.rfind('@');
        if (at == std::string_view::npos || at + 1 == s.size())
            return {std::string(s), std::nullopt};
        return {std::string(s.substr(0, at)), std::string(s.substr(at + 1))};
    }
};

enum class NodeLayer : std::uint8_t { Java, Native };

enum class Role : std::uint8_t {
    InputSource,
    Preprocess,
    ModelEntry,
    OutputRegister,
    Callback,
    Sink,
};

inline const char* role_tag(Role r) {
    switch (r) {
        case Role::InputSource:    return "input_source";
        case Role::Preprocess:     return "preprocess";
        case Role::ModelEntry:     return "model_entry";
        case Role::OutputRegister: return "output_register";
        case Role::Callback:       return "callback";
        case Role::Sink:           return "sink";
    }
    return "?";
}

inline std::optional<Role> role_from_tag(std::string_view s) {
    if (s == "input_source") return Role::InputSource;
    if (s == "preprocess") return Role::Preprocess;
    if (s == "model_entry") return Role::ModelEntry;
    if (s == "output_register") return Role::OutputRegister;
    if (s == "callback") return Role::Callback;
    if (s == "sink") return Role::Sink;
    return std::nullopt;
}

struct FunctionNode {
    NodeId id;
    NodeLayer layer = NodeLayer::Java;
    bool exported = true;
    std::set<Role> roles;
    std::optional<std::uint64_t> entry_offset;
    std::uint64_t first_seen_ts = ~std::uint64_t(0);
};

enum class EdgeKind : std::uint8_t {
    Static,         // assumed from static analysis input; support may be 0
    StackObserved,  // adjacent frames in a recorded stack
    DynamicJump,    // resolved from (library, offset) jump records
    Jni,            // managed->native crossing observed at a jni record
    NativeCallback, // native->managed async hop observed at a cb record
};

inline const char* edge_kind_tag(EdgeKind k) {
    switch (k) {
        case EdgeKind::Static:         return "static";
        case EdgeKind::StackObserved:  return "stack";
        case EdgeKind::DynamicJump:    return "jump";
        case EdgeKind::Jni:            return "jni";
        case EdgeKind::NativeCallback: return "callback";
    }
    return "?";
}

struct CallEdge {
    NodeId from;
    NodeId to;
    EdgeKind kind = EdgeKind::StackObserved;
    std::uint64_t support = 0;  // observation count; 0 only for Static

    auto operator<=>(const CallEdge&) const = default;
};

struct JumpRecord {
    std::string library;
    std::uint64_t branch_offset = 0;  // offset of the jump instruction
    std::uint64_t dest_offset = 0;    // library-relative destination
    std::uint64_t observations = 1;
};

// Role map supplied by the analyst: which nodes count as data sources and
// sinks (and any other role assignments they can justify), plus symbols
// known to be non-exported.
struct RoleMap {
    std::map<NodeId, std::set<Role>> roles;
    std::set<NodeId> non_exported;
};

struct CallGraph {
    std::vector<FunctionNode> nodes;
    std::vector<CallEdge> edges;
    std::vector<JumpRecord> unresolved_jumps;

    std::map<NodeId, std::size_t> node_index;
    // adjacency over node indices, deduplicated
    std::vector<std::vector<std::size_t>> out_adj;
    std::vector<std::vector<std::size_t>> in_adj;

    const FunctionNode* find(const NodeId& id) const {
        auto it = node_index.find(id);
        return it == node_index.end() ? nullptr : &nodes[it->second];
    }
};

// All destinations recorded for one branch, ascending; empty if the branch
// was never observed.
inline std::vector<std::uint64_t> resolve_jump(const std::vector<JumpRecord>& jumps,
                                               const std::string& library,
                                               std::uint64_t branch_offset) {
    std::vector<std::uint64_t> dests;
    for (const auto& j : jumps)
        if (j.library == library && j.branch_offset == branch_offset)
            dests.push_back(j.dest_offset);
    std::sort(dests.begin(), dests.end());
    dests.erase(std::unique(dests.begin(), dests.end()), dests.end());
    return dests;
}

namespace detail {

class GraphBuilder {
public:
    std::size_t touch(const NodeId& id, std::uint64_t ts) {
        auto [it, fresh] = index_.try_emplace(id, nodes_.size());
        if (fresh) {
            FunctionNode n;
            n.id = id;
            n.layer = id.library ? NodeLayer::Native : NodeLayer::Java;
            nodes_.push_back(std::move(n));
        }
        FunctionNode& n = nodes_[it->second];
        n.first_seen_ts = std::min(n.first_seen_ts, ts);
        return it->second;
    }

    void add_edge(const NodeId& from, const NodeId& to, EdgeKind kind,
                  std::uint64_t support, std::uint64_t ts) {
        touch(from, ts);
        touch(to, ts);
        auto [it, fresh] = edge_support_.try_emplace({from, to, kind, 0}, 0);
        it->second += support;
    }

    CallGraph finish(std::vector<JumpRecord> unresolved) {
        CallGraph g;
        g.nodes = std::move(nodes_);
        g.node_index = std::move(index_);
        g.unresolved_jumps = std::move(unresolved);
        g.edges.reserve(edge_support_.size());
        for (auto& [edge, support] : edge_support_) {
            CallEdge e = edge;
            e.support = support;
            g.edges.push_back(std::move(e));
        }
        g.out_adj.resize(g.nodes.size());
        g.in_adj.resize(g.nodes.size());
        for (const auto& e : g.edges) {
            const std::size_t a = g.node_index.at(e.from);
            const std::size_t b = g.node_index.at(e.to);
            g.out_adj[a].push_back(b);
            g.in_adj[b].push_back(a);
        }
        for (auto& v : g.out_adj) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        for (auto& v : g.in_adj) {
            std::sort(v.begin(), v.end());
            v.erase(std::unique(v.begin(), v.end()), v.end());
        }
        return g;
    }

    std::vector<FunctionNode>& nodes() { return nodes_; }
    std::map<NodeId, std::size_t>& index() { return index_; }

private:
    std::vector<FunctionNode> nodes_;
    std::map<NodeId, std::size_t> index_;
    std::map<CallEdge, std::uint64_t> edge_support_;
};

}  // namespace detail

// Build the call graph from observed stacks, assumed static edges, and
// dynamically resolved jumps.
//
// Stacks are innermost-first, so frames [i+1] -> [i] are caller -> callee.
// The innermost pair of a JNI record is a Jni edge; of a callback record a
// NativeCallback edge; everything else from stacks is StackObserved.
//
// A jump record attaches to the function containing its branch offset (the
// node in that library with the greatest entry offset <= branch_offset);
// the destination must hit a node entry offset exactly, otherwise the
// record lands in unresolved_jumps.
inline CallGraph build_call_graph(const TraceLog& log,
                                  const std::vector<CallEdge>& static_edges = {},
                                  const std::vector<JumpRecord>& jumps = {},
                                  const RoleMap& role_map = {},
                                  const std::vector<Evidence>& evidence = {}) {
    detail::GraphBuilder b;

    for (const auto& r : log.records) {
        const NodeId self{r.function_name, r.library};
        const std::size_t self_idx = b.touch(self, r.timestamp_ns);
        if (r.offset && !b.nodes()[self_idx].entry_offset)
            b.nodes()[self_idx].entry_offset = r.offset;
        if (!r.stack) continue;
        const auto& frames = *r.stack;
        for (std::size_t i = 0; i + 1 < frames.size(); ++i) {
            const NodeId callee = NodeId::from_string(frames[i]);
            const NodeId caller = NodeId::from_string(frames[i + 1]);
            EdgeKind kind = EdgeKind::StackObserved;
            if (i == 0) {
                if (r.kind == RecordKind::JniTrampoline) kind = EdgeKind::Jni;
                else if (r.kind == RecordKind::Callback) kind = EdgeKind::NativeCallback;
            }
            b.add_edge(caller, callee, kind, 1, r.timestamp_ns);
        }
    }

    for (const auto& e : static_edges)
        b.add_edge(e.from, e.to, EdgeKind::Static, e.support, ~std::uint64_t(0));

    // Jump resolution needs entry offsets per library, sorted.
    std::map<std::string, std::vector<std::pair<std::uint64_t, NodeId>>> by_lib;
    for (const auto& n : b.nodes())
        if (n.id.library && n.entry_offset)
            by_lib[*n.id.library].emplace_back(*n.entry_offset, n.id);
    for (auto& [lib, entries] : by_lib) std::sort(entries.begin(), entries.end());

    std::vector<JumpRecord> unresolved;
    for (const auto& j : jumps) {
        auto lib_it = by_lib.find(j.library);
        if (lib_it == by_lib.end()) {
            unresolved.push_back(j);
            continue;
        }
        const auto& entries = lib_it->second;
        // containing function: greatest entry <= branch_offset
        auto src_it = std::upper_bound(
            entries.begin(), entries.end(), j.branch_offset,
            [](std::uint64_t v, const auto& e) { return v < e.first; });
        // destination: exact entry match
        auto dst_it = std::lower_bound(
            entries.begin(), entries.end(), j.dest_offset,
            [](const auto& e, std::uint64_t v) { return e.first < v; });
        const bool src_ok = src_it != entries.begin();
        const bool dst_ok = dst_it != entries.end() && dst_it->first == j.dest_offset;
        if (!src_ok || !dst_ok) {
            unresolved.push_back(j);
            continue;
        }
        b.add_edge(std::prev(src_it)->second, dst_it->second, EdgeKind::DynamicJump,
                   j.observations, ~std::uint64_t(0));
    }

    // Roles: analyst-supplied map first, then detector evidence. A node
    // whose record matched a probability vector registers model output; a
    // callback-kind evidence node is also a Callback.
    for (const auto& [id, roles] : role_map.roles) {
        const std::size_t idx = b.touch(id, ~std::uint64_t(0));
        b.nodes()[idx].roles.insert(roles.begin(), roles.end());
    }

    CallGraph g = b.finish(std::move(unresolved));

    for (const auto& id : role_map.non_exported) {
        auto it = g.node_index.find(id);
        if (it != g.node_index.end()) g.nodes[it->second].exported = false;
    }
    for (const auto& e : evidence) {
        auto it = g.node_index.find({e.function_name, e.library});
        if (it == g.node_index.end()) continue;
        FunctionNode& n = g.nodes[it->second];
        if (e.rule == EvidenceRule::ProbabilityVector)
            n.roles.insert(Role::OutputRegister);
        else
            n.roles.insert(Role::ModelEntry);
        if (e.field == EvidenceField::Payload) n.roles.insert(Role::Callback);
    }
    return g;
}

// ---------------------------------------------------------------------
// JSON input formats (offsets as hex strings, mirroring the trace format)
// ---------------------------------------------------------------------

inline std::vector<CallEdge> load_static_edges(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::schema_error, std::string("static edges: ") + e.what());
    }
    if (!j.is_array()) fail(errc::schema_error, "static edges: expected an array");
    std::vector<CallEdge> out;
    for (const auto& item : j) {
        if (!item.contains("from") || !item.contains("to"))
            fail(errc::schema_error, "static edge needs from/to");
        CallEdge e;
        e.from = NodeId::from_string(item.at("from").get<std::string>());
        e.to = NodeId::from_string(item.at("to").get<std::string>());
        e.kind = EdgeKind::Static;
        e.support = item.value("support", std::uint64_t(0));
        out.push_back(std::move(e));
    }
    return out;
}

inline std::vector<JumpRecord> load_jump_records(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::schema_error, std::string("jump records: ") + e.what());
    }
    if (!j.is_array()) fail(errc::schema_error, "jump records: expected an array");
    std::vector<JumpRecord> out;
    for (const auto& item : j) {
        JumpRecord r;
        if (!item.contains("lib") || !item.contains("branch") || !item.contains("dest"))
            fail(errc::schema_error, "jump record needs lib/branch/dest");
        r.library = item.at("lib").get<std::string>();
        auto branch = detail::parse_hex_offset(item.at("branch").get<std::string>());
        auto dest = detail::parse_hex_offset(item.at("dest").get<std::string>());
        if (!branch || !dest) fail(errc::schema_error, "jump offsets must be 0x hex");
        r.branch_offset = *branch;
        r.dest_offset = *dest;
        r.observations = item.value("count", std::uint64_t(1));
        out.push_back(std::move(r));
    }
    return out;
}

inline RoleMap load_role_map(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::schema_error, std::string("role map: ") + e.what());
    }
    RoleMap map;
    if (j.contains("roles")) {
        for (const auto& [tag, ids] : j.at("roles").items()) {
            auto role = role_from_tag(tag);
            if (!role) fail(errc::schema_error, "unknown role \"" + tag + "\"");
            for (const auto& id : ids)
                map.roles[NodeId::from_string(id.get<std::string>())].insert(*role);
        }
    }
    if (j.contains("non_exported"))
        for (const auto& id : j.at("non_exported"))
            map.non_exported.insert(NodeId::from_string(id.get<std::string>()));
    return map;
}

}  // namespace mlaudit
