#include "pfair/graph.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <queue>
#include <random>
#include <set>
#include <unordered_set>

#include "pfair/error.hpp"
#include "pfair/fingerprint.hpp"

namespace pfair {

std::string to_string(const Edge& edge) { return edge.tail + "->" + edge.head; }

CausalGraph::CausalGraph(std::vector<std::string> nodes, std::vector<Edge> edges,
                         std::vector<Edge> objectionable)
    : nodes_(std::move(nodes)), edges_(std::move(edges)), objectionable_(std::move(objectionable)) {
  index_.reserve(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) index_.emplace(nodes_[i], i);

  parents_.assign(nodes_.size(), {});
  children_.assign(nodes_.size(), {});
  for (const auto& e : edges_) {
    auto t = index_.find(e.tail);
    auto h = index_.find(e.head);
    if (t == index_.end() || h == index_.end()) continue;
    parents_[h->second].push_back(t->second);
    children_[t->second].push_back(h->second);
  }
  for (auto& p : parents_) {
    std::sort(p.begin(), p.end());
    p.erase(std::unique(p.begin(), p.end()), p.end());
  }
  for (auto& c : children_) {
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
  }
}

bool CausalGraph::has_node(const std::string& name) const { return index_.contains(name); }

std::optional<std::size_t> CausalGraph::index_of(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t CausalGraph::require_index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error(ErrorCode::unknown_node, "node '" + name + "' is not declared");
  return it->second;
}

bool CausalGraph::has_edge(const Edge& edge) const {
  auto t = index_of(edge.tail);
  auto h = index_of(edge.head);
  if (!t || !h) return false;
  const auto& p = parents_[*h];
  return std::binary_search(p.begin(), p.end(), *t);
}

bool CausalGraph::is_objectionable(const Edge& edge) const {
  return std::find(objectionable_.begin(), objectionable_.end(), edge) != objectionable_.end();
}

std::vector<std::string> CausalGraph::parents(const std::string& node) const {
  std::vector<std::string> out;
  for (auto i : parents_[require_index(node)]) out.push_back(nodes_[i]);
  return out;
}

std::vector<std::string> CausalGraph::children(const std::string& node) const {
  std::vector<std::string> out;
  for (auto i : children_[require_index(node)]) out.push_back(nodes_[i]);
  return out;
}

std::vector<std::string> CausalGraph::validate() const {
  std::vector<std::string> violations;

  std::unordered_set<std::string> seen;
  for (const auto& n : nodes_) {
    if (n.empty()) violations.push_back("empty node name");
    else if (!seen.insert(n).second) violations.push_back("duplicate node '" + n + "'");
  }

  std::set<Edge> edge_set;
  for (const auto& e : edges_) {
    if (e.tail == e.head) violations.push_back("self-loop on '" + e.tail + "'");
    for (const auto* end : {&e.tail, &e.head}) {
      if (!index_.contains(*end)) {
        violations.push_back("edge " + to_string(e) + " references undeclared node '" + *end + "'");
      }
    }
    if (!edge_set.insert(e).second) violations.push_back("duplicate edge " + to_string(e));
  }

  std::set<Edge> obj_set;
  for (const auto& e : objectionable_) {
    if (!edge_set.contains(e)) violations.push_back("unknown objectionable edge " + to_string(e));
    if (!obj_set.insert(e).second) violations.push_back("duplicate objectionable edge " + to_string(e));
  }

  // Self-loops are already reported; look for longer cycles.
  bool self_loop = std::any_of(edges_.begin(), edges_.end(),
                               [](const Edge& e) { return e.tail == e.head; });
  if (!self_loop) {
    try {
      (void)topo_order();
    } catch (const Error& err) {
      violations.push_back(err.detail());
    }
  }
  return violations;
}

std::vector<std::size_t> CausalGraph::topo_order() const {
  const std::size_t n = nodes_.size();
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t v = 0; v < n; ++v) indegree[v] = parents_[v].size();

  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indegree[v] == 0) ready.push(v);

  std::vector<std::size_t> order;
  order.reserve(n);
  while (!ready.empty()) {
    const auto v = ready.top();
    ready.pop();
    order.push_back(v);
    for (auto c : children_[v])
      if (--indegree[c] == 0) ready.push(c);
  }
  if (order.size() != n) {
    std::string stuck;
    for (std::size_t v = 0; v < n; ++v) {
      if (indegree[v] > 0) {
        stuck = nodes_[v];
        break;
      }
    }
    throw Error(ErrorCode::cycle_detected, "graph contains a cycle through '" + stuck + "'");
  }
  return order;
}

std::vector<std::string> CausalGraph::topo_sort() const {
  std::vector<std::string> out;
  for (auto i : topo_order()) out.push_back(nodes_[i]);
  return out;
}

std::uint64_t CausalGraph::fingerprint() const {
  Fnv1a h;
  h.u64(nodes_.size());
  for (const auto& n : nodes_) h.str(n);
  std::vector<Edge> e = edges_;
  std::sort(e.begin(), e.end());
  h.u64(e.size());
  for (const auto& x : e) h.str(x.tail).str(x.head);
  std::vector<Edge> o = objectionable_;
  std::sort(o.begin(), o.end());
  h.u64(o.size());
  for (const auto& x : o) h.str(x.tail).str(x.head);
  return h.digest();
}

std::vector<std::string> validate(const CausalGraph& graph) { return graph.validate(); }
std::vector<std::string> topo_sort(const CausalGraph& graph) { return graph.topo_sort(); }
std::vector<std::string> parents(const CausalGraph& graph, const std::string& node) {
  return graph.parents(node);
}

CausalGraph random_dag(std::size_t n_nodes, std::size_t avg_degree, std::uint64_t seed) {
  if (n_nodes < 2) throw Error(ErrorCode::invalid_argument, "random_dag needs at least 2 nodes");
  if (avg_degree > n_nodes - 1) {
    throw Error(ErrorCode::infeasible_degree,
                "average degree " + std::to_string(avg_degree) + " exceeds the maximum " +
                    std::to_string(n_nodes - 1) + " for " + std::to_string(n_nodes) + " nodes");
  }
  const std::uint64_t max_edges = static_cast<std::uint64_t>(n_nodes) * (n_nodes - 1) / 2;
  const auto target = std::min<std::uint64_t>(
      max_edges, static_cast<std::uint64_t>(std::llround(n_nodes * static_cast<double>(avg_degree) / 2.0)));

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> rank(n_nodes);
  std::iota(rank.begin(), rank.end(), 0);
  std::shuffle(rank.begin(), rank.end(), rng);
  // rank[pos] is the node placed at topological position pos.

  // Forward pairs are keyed by (lower position, higher position).
  std::uniform_int_distribution<std::size_t> pick(0, n_nodes - 1);
  auto key = [n_nodes](std::size_t lo, std::size_t hi) {
    return static_cast<std::uint64_t>(lo) * n_nodes + hi;
  };
  const bool dense = target * 2 > max_edges;
  const std::uint64_t to_draw = dense ? max_edges - target : target;
  std::unordered_set<std::uint64_t> drawn;
  drawn.reserve(static_cast<std::size_t>(to_draw * 2));
  while (drawn.size() < to_draw) {
    std::size_t a = pick(rng), b = pick(rng);
    if (a == b) continue;
    if (a > b) std::swap(a, b);
    drawn.insert(key(a, b));
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  pairs.reserve(static_cast<std::size_t>(target));
  if (dense) {
    for (std::size_t lo = 0; lo < n_nodes; ++lo)
      for (std::size_t hi = lo + 1; hi < n_nodes; ++hi)
        if (!drawn.contains(key(lo, hi))) pairs.emplace_back(rank[lo], rank[hi]);
  } else {
    for (auto k : drawn) pairs.emplace_back(rank[k / n_nodes], rank[k % n_nodes]);
  }
  std::sort(pairs.begin(), pairs.end());

  std::vector<std::string> names(n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) names[i] = "V" + std::to_string(i);
  std::vector<Edge> edges;
  edges.reserve(pairs.size());
  for (auto [t, h] : pairs) edges.push_back({names[t], names[h]});
  return CausalGraph(std::move(names), std::move(edges));
}

}  // namespace pfair
