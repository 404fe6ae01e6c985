#pragma once

#include <algorithm>
#include <deque>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlaudit/callgraph.hpp"
#include "mlaudit/errors.hpp"

namespace mlaudit {

// The program slice for one ML task: everything on a flow through the
// anchor (the detector's evidence-bearing function), from input sources to
// sinks. Nodes are ordered by first observation, ties by id.
struct PipelineSlice {
    NodeId anchor;
    std::vector<NodeId> nodes;
    std::vector<CallEdge> edges;
    bool complete = false;
    std::vector<NodeId> missing_inputs;
};

namespace detail {

inline std::set<std::size_t> reachable(std::size_t start,
                                       const std::vector<std::vector<std::size_t>>& adj) {
    std::set<std::size_t> seen{start};
    std::deque<std::size_t> frontier{start};
    while (!frontier.empty()) {
        const std::size_t v = frontier.front();
        frontier.pop_front();
        for (std::size_t w : adj[v])
            if (seen.insert(w).second) frontier.push_back(w);
    }
    return seen;
}

}  // namespace detail

// Backward reachability from the anchor toward input sources, forward
// toward sinks. Flows that never pass through the anchor are not part of
// this ML task and stay out of the slice. The slice is complete when every
// root of the backward closure carries the InputSource role.
inline PipelineSlice slice_pipeline(const CallGraph& g, const NodeId& anchor) {
    auto it = g.node_index.find(anchor);
    if (it == g.node_index.end())
        fail(errc::anchor_not_found, anchor.to_string());
    const std::size_t a = it->second;

    const auto ancestors = detail::reachable(a, g.in_adj);
    const auto descendants = detail::reachable(a, g.out_adj);
    std::set<std::size_t> members = ancestors;
    members.insert(descendants.begin(), descendants.end());

    PipelineSlice slice;
    slice.anchor = anchor;

    bool has_input_source = false;
    for (std::size_t v : ancestors) {
        const FunctionNode& n = g.nodes[v];
        const bool is_root = g.in_adj[v].empty();
        if (n.roles.count(Role::InputSource)) has_input_source = true;
        if (is_root && !n.roles.count(Role::InputSource))
            slice.missing_inputs.push_back(n.id);
    }
    std::sort(slice.missing_inputs.begin(), slice.missing_inputs.end());
    if (!has_input_source && slice.missing_inputs.empty())
        slice.missing_inputs.push_back(anchor);  // rootless (cyclic) closure
    slice.complete = slice.missing_inputs.empty();

    std::vector<std::size_t> ordered(members.begin(), members.end());
    std::sort(ordered.begin(), ordered.end(), [&](std::size_t x, std::size_t y) {
        const FunctionNode& nx = g.nodes[x];
        const FunctionNode& ny = g.nodes[y];
        if (nx.first_seen_ts != ny.first_seen_ts)
            return nx.first_seen_ts < ny.first_seen_ts;
        return nx.id < ny.id;
    });
    for (std::size_t v : ordered) slice.nodes.push_back(g.nodes[v].id);

    for (const auto& e : g.edges)
        if (members.count(g.node_index.at(e.from)) &&
            members.count(g.node_index.at(e.to)))
            slice.edges.push_back(e);
    return slice;
}

// Flow into the input side of a slice that does not come from a declared
// input: evidence that the model consumes more than the analyst thinks.
struct CompletenessReport {
    std::vector<CallEdge> extra_inflows;        // edges u->v with v on the
                                                // anchor's input side, u not
                                                // reachable from any declared input
    std::vector<NodeId> unknown_declared;       // declared ids absent from the graph
};

inline CompletenessReport completeness_check(const CallGraph& g,
                                             const PipelineSlice& slice,
                                             const std::set<NodeId>& declared_inputs) {
    CompletenessReport report;
    if (slice.nodes.empty()) return report;

    std::set<std::size_t> declared_reach;
    for (const auto& id : declared_inputs) {
        auto it = g.node_index.find(id);
        if (it == g.node_index.end()) {
            report.unknown_declared.push_back(id);
            continue;
        }
        auto r = detail::reachable(it->second, g.out_adj);
        declared_reach.insert(r.begin(), r.end());
    }

    auto anchor_it = g.node_index.find(slice.anchor);
    if (anchor_it == g.node_index.end()) return report;
    const auto input_side = detail::reachable(anchor_it->second, g.in_adj);

    for (const auto& e : g.edges) {
        const std::size_t u = g.node_index.at(e.from);
        const std::size_t v = g.node_index.at(e.to);
        if (input_side.count(v) && !declared_reach.count(u))
            report.extra_inflows.push_back(e);
    }
    std::sort(report.extra_inflows.begin(), report.extra_inflows.end());
    std::sort(report.unknown_declared.begin(), report.unknown_declared.end());
    return report;
}

// ---------------------------------------------------------------------
// JSON output
// ---------------------------------------------------------------------

inline nlohmann::ordered_json slice_to_json(const CallGraph& g,
                                            const PipelineSlice& slice) {
    nlohmann::ordered_json j;
    j["anchor"] = slice.anchor.to_string();
    j["complete"] = slice.complete;
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& id : slice.nodes) {
        nlohmann::ordered_json n;
        n["id"] = id.to_string();
        const FunctionNode* fn = g.find(id);
        if (fn) {
            n["layer"] = fn->layer == NodeLayer::Native ? "native" : "java";
            if (!fn->exported) n["exported"] = false;
            if (fn->entry_offset) {
                char buf[20];
                std::snprintf(buf, sizeof buf, "0x%llx",
                              static_cast<unsigned long long>(*fn->entry_offset));
                n["off"] = buf;
            }
            nlohmann::ordered_json roles = nlohmann::ordered_json::array();
            for (Role r : fn->roles) roles.push_back(role_tag(r));
            if (!roles.empty()) n["roles"] = std::move(roles);
        }
        nodes.push_back(std::move(n));
    }
    j["nodes"] = std::move(nodes);
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    for (const auto& e : slice.edges) {
        nlohmann::ordered_json ej;
        ej["from"] = e.from.to_string();
        ej["to"] = e.to.to_string();
        ej["kind"] = edge_kind_tag(e.kind);
        ej["support"] = e.support;
        edges.push_back(std::move(ej));
    }
    j["edges"] = std::move(edges);
    nlohmann::ordered_json missing = nlohmann::ordered_json::array();
    for (const auto& id : slice.missing_inputs) missing.push_back(id.to_string());
    j["missing_inputs"] = std::move(missing);
    return j;
}

inline nlohmann::ordered_json completeness_to_json(const CompletenessReport& r) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json inflows = nlohmann::ordered_json::array();
    for (const auto& e : r.extra_inflows) {
        nlohmann::ordered_json ej;
        ej["from"] = e.from.to_string();
        ej["to"] = e.to.to_string();
        ej["kind"] = edge_kind_tag(e.kind);
        inflows.push_back(std::move(ej));
    }
    j["extra_inflows"] = std::move(inflows);
    nlohmann::ordered_json unknown = nlohmann::ordered_json::array();
    for (const auto& id : r.unknown_declared) unknown.push_back(id.to_string());
    j["unknown_declared_inputs"] = std::move(unknown);
    return j;
}

}  // namespace mlaudit
