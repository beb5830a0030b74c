#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace pfair {

struct Edge {
  std::string tail;
  std::string head;

  auto operator<=>(const Edge&) const = default;
};

std::string to_string(const Edge& edge);

// Causal DAG over named nodes, with a distinguished subset of objectionable
// edges. Construction never throws: a graph may hold invariant breaches
// (cycles, dangling endpoints, duplicates) which validate() reports. Once
// built the graph is immutable.
class CausalGraph {
 public:
  CausalGraph() = default;
  CausalGraph(std::vector<std::string> nodes, std::vector<Edge> edges,
              std::vector<Edge> objectionable = {});

  const std::vector<std::string>& nodes() const noexcept { return nodes_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }
  const std::vector<Edge>& objectionable() const noexcept { return objectionable_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  bool has_node(const std::string& name) const;
  std::optional<std::size_t> index_of(const std::string& name) const;
  // Throws unknown-node.
  std::size_t require_index(const std::string& name) const;

  bool has_edge(const Edge& edge) const;
  bool is_objectionable(const Edge& edge) const;

  // Declaration-ordered; empty for roots. Throws unknown-node.
  std::vector<std::string> parents(const std::string& node) const;
  std::vector<std::string> children(const std::string& node) const;

  // Index views, declaration-ordered. Only edges between declared nodes appear.
  const std::vector<std::size_t>& parent_indices(std::size_t node) const { return parents_[node]; }
  const std::vector<std::size_t>& child_indices(std::size_t node) const { return children_[node]; }

  // Empty result means the graph satisfies every invariant.
  std::vector<std::string> validate() const;

  // Kahn's algorithm with ties broken by declaration order. Throws
  // cycle-detected.
  std::vector<std::string> topo_sort() const;
  std::vector<std::size_t> topo_order() const;

  // Structure hash: node order, edge set and objectionable set.
  std::uint64_t fingerprint() const;

 private:
  std::vector<std::string> nodes_;
  std::vector<Edge> edges_;
  std::vector<Edge> objectionable_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::vector<std::size_t>> parents_;
  std::vector<std::vector<std::size_t>> children_;
};

std::vector<std::string> validate(const CausalGraph& graph);
std::vector<std::string> topo_sort(const CausalGraph& graph);
std::vector<std::string> parents(const CausalGraph& graph, const std::string& node);

// Random DAG with the requested average (in+out) degree: nodes V0..V{n-1},
// a random permutation fixes the topological order and n*avg_degree/2
// distinct forward pairs are drawn uniformly. Throws infeasible-degree when
// the degree exceeds that of a complete DAG.
CausalGraph random_dag(std::size_t n_nodes, std::size_t avg_degree, std::uint64_t seed);

}  // namespace pfair
