#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <istream>
#include <optional>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "whatif/dataset.hpp"
#include "whatif/error.hpp"

namespace whatif {

/// Static DAG over the attributes. Nodes are addressed by index; parent and
/// child lists are sorted ascending.
class CausalGraph {
 public:
  CausalGraph() = default;

  const std::vector<std::string>& nodes() const { return nodes_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  const std::vector<std::size_t>& topo_order() const { return topo_; }
  const std::vector<std::size_t>& parents(std::size_t node) const { return parents_[node]; }
  const std::vector<std::size_t>& children(std::size_t node) const { return children_[node]; }
  std::optional<std::size_t> outcome() const { return outcome_; }
  std::size_t size() const { return nodes_.size(); }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i] == name) return i;
    }
    return std::nullopt;
  }

  std::size_t require(std::string_view name) const {
    auto i = index_of(name);
    if (!i) throw Error(errc::kUnknownNode, "unknown node '" + std::string(name) + "'");
    return *i;
  }

  std::size_t max_parent_count() const {
    std::size_t m = 0;
    for (const auto& p : parents_) m = std::max(m, p.size());
    return m;
  }

 private:
  friend CausalGraph validate_graph(std::vector<std::string>, const std::vector<std::pair<std::string, std::string>>&,
                                    std::optional<std::string>);

  std::vector<std::string> nodes_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::size_t> topo_;
  std::optional<std::size_t> outcome_;
};

namespace detail {

// Returns one directed cycle among `remaining` nodes as "a -> b -> a".
inline std::string describe_cycle(const std::vector<std::string>& names,
                                  const std::vector<std::vector<std::size_t>>& children,
                                  const std::vector<bool>& remaining) {
  const std::size_t n = names.size();
  std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<std::size_t> stack;
  std::vector<std::size_t> cycle;
  std::function<bool(std::size_t)> dfs = [&](std::size_t u) {
    state[u] = 1;
    stack.push_back(u);
    for (std::size_t v : children[u]) {
      if (!remaining[v]) continue;
      if (state[v] == 1) {
        auto it = std::find(stack.begin(), stack.end(), v);
        cycle.assign(it, stack.end());
        cycle.push_back(v);
        return true;
      }
      if (state[v] == 0 && dfs(v)) return true;
    }
    stack.pop_back();
    state[u] = 2;
    return false;
  };
  // Start from the alphabetically first remaining node for a stable message.
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < n; ++i) {
    if (remaining[i]) order.push_back(i);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return names[a] < names[b]; });
  for (std::size_t s : order) {
    if (state[s] == 0 && dfs(s)) break;
  }
  std::string out;
  for (std::size_t i = 0; i < cycle.size(); ++i) {
    if (i) out += " -> ";
    out += names[cycle[i]];
  }
  return out;
}

}  // namespace detail

/// Validates a DAG and computes a topological order (Kahn's algorithm, ready
/// nodes released in name order).
inline CausalGraph validate_graph(std::vector<std::string> nodes,
                                  const std::vector<std::pair<std::string, std::string>>& edges,
                                  std::optional<std::string> outcome = std::nullopt) {
  if (nodes.empty()) throw Error(errc::kInvalidGraph, "graph has no nodes");
  CausalGraph g;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i].empty()) throw Error(errc::kInvalidGraph, "graph has an empty node name");
    if (!index.emplace(nodes[i], i).second) throw Error(errc::kInvalidGraph, "duplicate node '" + nodes[i] + "'");
  }
  const std::size_t n = nodes.size();
  g.nodes_ = std::move(nodes);
  g.parents_.assign(n, {});
  g.children_.assign(n, {});

  auto lookup = [&](const std::string& name) {
    auto it = index.find(name);
    if (it == index.end()) throw Error(errc::kUnknownNode, "unknown node '" + name + "'");
    return it->second;
  };
  for (const auto& [from, to] : edges) {
    const std::size_t p = lookup(from);
    const std::size_t c = lookup(to);
    if (p == c) throw Error(errc::kCycleDetected, "cycle detected: " + from + " -> " + to);
    if (std::find(g.children_[p].begin(), g.children_[p].end(), c) != g.children_[p].end()) continue;
    g.edges_.emplace_back(p, c);
    g.children_[p].push_back(c);
    g.parents_[c].push_back(p);
  }
  for (auto& v : g.parents_) std::sort(v.begin(), v.end());
  for (auto& v : g.children_) std::sort(v.begin(), v.end());

  if (outcome) {
    g.outcome_ = lookup(*outcome);
    if (!g.children_[*g.outcome_].empty()) {
      throw Error(errc::kOutcomeHasChildren, "outcome '" + *outcome + "' has outgoing edges");
    }
  }

  std::vector<std::size_t> indegree(n);
  for (std::size_t i = 0; i < n; ++i) indegree[i] = g.parents_[i].size();
  auto by_name = [&](std::size_t a, std::size_t b) { return g.nodes_[a] > g.nodes_[b]; };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(by_name)> ready(by_name);
  for (std::size_t i = 0; i < n; ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    const std::size_t u = ready.top();
    ready.pop();
    g.topo_.push_back(u);
    for (std::size_t v : g.children_[u]) {
      if (--indegree[v] == 0) ready.push(v);
    }
  }
  if (g.topo_.size() != n) {
    std::vector<bool> remaining(n, false);
    for (std::size_t i = 0; i < n; ++i) remaining[i] = indegree[i] > 0;
    throw Error(errc::kCycleDetected, "cycle detected: " + detail::describe_cycle(g.nodes_, g.children_, remaining));
  }
  return g;
}

/// All nodes reachable from `node` along directed edges, excluding itself,
/// sorted ascending by index.
inline std::vector<std::size_t> descendants(const CausalGraph& g, std::size_t node) {
  if (node >= g.size()) throw Error(errc::kUnknownNode, "unknown node index " + std::to_string(node));
  std::vector<bool> seen(g.size(), false);
  std::vector<std::size_t> stack{node};
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : g.children(u)) {
      if (!seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
    }
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (seen[i] && i != node) out.push_back(i);
  }
  return out;
}

inline std::vector<std::string> descendants(const CausalGraph& g, std::string_view name) {
  std::vector<std::string> out;
  for (std::size_t i : descendants(g, g.require(name))) out.push_back(g.nodes()[i]);
  return out;
}

/// Contents of a graph file before validation.
struct GraphSpec {
  std::vector<std::string> nodes;
  std::vector<std::pair<std::string, std::string>> edges;
  std::string outcome;
};

inline GraphSpec graph_spec_from_json(const nlohmann::json& j) {
  GraphSpec spec;
  try {
    spec.nodes = j.at("nodes").get<std::vector<std::string>>();
    for (const auto& e : j.at("edges")) {
      if (!e.is_array() || e.size() != 2) throw Error(errc::kInvalidGraph, "graph: every edge must be [parent, child]");
      spec.edges.emplace_back(e[0].get<std::string>(), e[1].get<std::string>());
    }
    spec.outcome = j.at("outcome").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(errc::kInvalidGraph, std::string("graph: ") + e.what());
  }
  return spec;
}

inline GraphSpec parse_graph_spec(std::istream& in) {
  try {
    return graph_spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(errc::kInvalidGraph, std::string("graph: ") + e.what());
  }
}

inline nlohmann::json graph_to_json(const CausalGraph& g) {
  nlohmann::json j;
  j["nodes"] = g.nodes();
  j["edges"] = nlohmann::json::array();
  for (const auto& [p, c] : g.edges()) j["edges"].push_back({g.nodes()[p], g.nodes()[c]});
  j["outcome"] = g.outcome() ? nlohmann::json(g.nodes()[*g.outcome()]) : nlohmann::json(nullptr);
  return j;
}

/// Validates a graph file against a schema and returns a graph whose node
/// indices coincide with the schema's attribute order (treatments, outcome).
inline CausalGraph bind_graph(const GraphSpec& spec, const Schema& schema) {
  if (spec.outcome != schema.outcome) {
    throw Error(errc::kInvalidGraph, "graph outcome '" + spec.outcome + "' differs from schema outcome '" +
                                         schema.outcome + "'");
  }
  for (const auto& name : spec.nodes) {
    if (!schema.attribute_index(name)) {
      throw Error(errc::kUnknownNode, "unknown node '" + name + "' is not a schema attribute");
    }
  }
  auto attrs = schema.attributes();
  for (const auto& a : attrs) {
    if (std::find(spec.nodes.begin(), spec.nodes.end(), a) == spec.nodes.end()) {
      throw Error(errc::kMissingNode, "schema attribute '" + a + "' is missing from the graph");
    }
  }
  return validate_graph(std::move(attrs), spec.edges, schema.outcome);
}

}  // namespace whatif
