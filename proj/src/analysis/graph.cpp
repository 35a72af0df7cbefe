#include <algorithm>
#include <functional>
#include <set>

#include "cb/analysis/analysis.hpp"
#include "cb/core/error.hpp"
#include "default_graph.hpp"

namespace cb {

namespace {

bool pattern_matches(std::string_view pattern, std::string_view column) {
    if (!pattern.empty() && pattern.back() == '*') {
        pattern.remove_suffix(1);
        return column.substr(0, pattern.size()) == pattern;
    }
    return pattern == column;
}

}  // namespace

CausalGraph::CausalGraph(std::vector<GraphNode> nodes, std::vector<std::pair<std::string, std::string>> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    std::set<std::string> names;
    for (const auto& n : nodes_) {
        if (n.kind == ColumnKind::Meta) throw Error(ErrorCode::SchemaViolation, "node '" + n.name + "' must be factor or outcome");
        if (!names.insert(n.name).second) throw Error(ErrorCode::SchemaViolation, "duplicate node '" + n.name + "'");
    }
    for (const auto& [from, to] : edges_) {
        if (!names.contains(from) || !names.contains(to)) {
            throw Error(ErrorCode::SchemaViolation, "edge " + from + " -> " + to + " names an undeclared node");
        }
        if (node(from).kind == ColumnKind::Outcome && node(to).kind == ColumnKind::Factor) {
            throw Error(ErrorCode::SchemaViolation, "outcome '" + from + "' cannot cause factor '" + to + "'");
        }
    }
    // Kahn's algorithm; leftovers mean a cycle
    std::map<std::string, int> indegree;
    for (const auto& n : nodes_) indegree[n.name] = 0;
    for (const auto& e : edges_) ++indegree[e.second];
    std::vector<std::string> ready;
    for (const auto& [n, d] : indegree) {
        if (d == 0) ready.push_back(n);
    }
    std::size_t seen = 0;
    while (!ready.empty()) {
        auto n = ready.back();
        ready.pop_back();
        ++seen;
        for (const auto& e : edges_) {
            if (e.first == n && --indegree[e.second] == 0) ready.push_back(e.second);
        }
    }
    if (seen != nodes_.size()) throw Error(ErrorCode::SchemaViolation, "causal graph has a cycle");
}

CausalGraph CausalGraph::from_json(const Json& j) {
    try {
        std::vector<GraphNode> nodes;
        for (const auto& n : j.at("nodes")) {
            auto kind = n.at("kind").get<std::string>();
            if (kind != "factor" && kind != "outcome") throw Error(ErrorCode::SchemaViolation, "node kind must be factor or outcome");
            nodes.push_back({n.at("name").get<std::string>(), kind == "outcome" ? ColumnKind::Outcome : ColumnKind::Factor,
                             n.at("columns").get<std::vector<std::string>>()});
        }
        std::vector<std::pair<std::string, std::string>> edges;
        for (const auto& e : j.at("edges")) {
            if (!e.is_array() || e.size() != 2) throw Error(ErrorCode::SchemaViolation, "edge must be [from, to]");
            edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
        }
        return CausalGraph(std::move(nodes), std::move(edges));
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::SchemaViolation, std::string("malformed causal graph: ") + e.what());
    }
}

Json CausalGraph::to_json() const {
    Json nodes = Json::array();
    for (const auto& n : nodes_) nodes.push_back({{"name", n.name}, {"kind", cb::to_string(n.kind)}, {"columns", n.columns}});
    Json edges = Json::array();
    for (const auto& [a, b] : edges_) edges.push_back({a, b});
    return Json{{"nodes", nodes}, {"edges", edges}};
}

CausalGraph CausalGraph::default_graph() {
    static const CausalGraph g = from_json(parse_json(detail::kDefaultGraphJson));
    return g;
}

const GraphNode& CausalGraph::node(std::string_view name) const {
    for (const auto& n : nodes_) {
        if (n.name == name) return n;
    }
    throw Error(ErrorCode::UnknownNode, "no node '" + std::string(name) + "'");
}

std::vector<std::string> CausalGraph::parents(std::string_view name) const {
    node(name);
    std::vector<std::string> out;
    for (const auto& n : nodes_) {
        for (const auto& [a, b] : edges_) {
            if (a == n.name && b == name) {
                out.push_back(n.name);
                break;
            }
        }
    }
    return out;
}

std::vector<std::string> CausalGraph::ancestors(std::string_view name) const {
    std::set<std::string> found;
    std::function<void(std::string_view)> walk = [&](std::string_view n) {
        for (const auto& p : parents(n)) {
            if (found.insert(p).second) walk(p);
        }
    };
    walk(name);
    std::vector<std::string> out;
    for (const auto& n : nodes_) {
        if (found.contains(n.name)) out.push_back(n.name);
    }
    return out;
}

const GraphNode& CausalGraph::node_of_column(std::string_view column) const {
    for (const auto& n : nodes_) {
        for (const auto& p : n.columns) {
            if (pattern_matches(p, column)) return n;
        }
    }
    throw Error(ErrorCode::UnknownNode, "no node covers column '" + std::string(column) + "'");
}

std::vector<std::string> CausalGraph::columns_of(const GraphNode& node, const RunTable& table) const {
    std::vector<std::string> out;
    for (const auto& c : table.columns) {
        if (c.kind == ColumnKind::Meta) continue;
        if (std::any_of(node.columns.begin(), node.columns.end(), [&](const auto& p) { return pattern_matches(p, c.name); })) {
            out.push_back(c.name);
        }
    }
    return out;
}

}  // namespace cb
