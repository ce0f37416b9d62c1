#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

#include "club/rng.hpp"

namespace club {

struct GraphConfig {
  enum class Mode { kComplete, kErdosRenyi };
  Mode mode = Mode::kComplete;
  double p = 0.0;  // <= 0 means the default 3 ln(n) / n
  int max_retries = 100;

  double resolved_p(int n) const {
    if (p > 0.0) return std::min(p, 1.0);
    if (n <= 1) return 1.0;
    return std::min(3.0 * std::log(static_cast<double>(n)) / n, 1.0);
  }
};

struct SplitReport {
  bool split = false;
  // the two components created by the deletion, sorted member lists
  std::vector<std::vector<int>> new_components;
};

/// Undirected user graph supporting only edge deletion after construction.
/// Connected components are tracked eagerly; component ids are always the
/// smallest member index, which keeps cluster indexing reproducible.
///
/// Deletion uses a bidirectional search from the two endpoints, expanding
/// the sides in lockstep so the cost is bounded by the smaller piece when
/// the component actually splits.
class DynGraph {
 public:
  DynGraph() = default;

  static DynGraph complete(int n) {
    DynGraph g(n);
    for (int i = 0; i < n; ++i)
      for (int l = i + 1; l < n; ++l) g.add_edge_(i, l);
    g.init_components_();
    return g;
  }

  static DynGraph from_edges(int n, const std::vector<std::pair<int, int>>& edges) {
    DynGraph g(n);
    for (auto [i, l] : edges) g.add_edge_(i, l);
    g.init_components_();
    return g;
  }

  /// One Erdos-Renyi draw; may be disconnected.
  static DynGraph erdos_renyi(int n, double p, RngStream& rng) {
    DynGraph g(n);
    for (int i = 0; i < n; ++i)
      for (int l = i + 1; l < n; ++l)
        if (rng.bernoulli(p)) g.add_edge_(i, l);
    g.init_components_();
    return g;
  }

  int num_nodes() const { return n_; }
  std::size_t num_edges() const { return num_edges_; }
  int num_components() const { return static_cast<int>(components_.size()); }
  int component_id(int i) const { return component_id_[static_cast<std::size_t>(i)]; }
  const std::set<int>& neighbors(int i) const { return adj_[static_cast<std::size_t>(i)]; }
  bool has_edge(int i, int l) const { return adj_[static_cast<std::size_t>(i)].count(l) > 0; }
  bool connected(int i, int l) const { return component_id(i) == component_id(l); }

  const std::vector<int>& component_members(int i) const {
    return components_.at(component_id(i));
  }

  /// All component ids, ascending.
  std::vector<int> component_ids() const {
    std::vector<int> ids;
    ids.reserve(components_.size());
    for (const auto& [id, _] : components_) ids.push_back(id);
    return ids;
  }

  /// Removes edge (i,l). If the endpoints end up disconnected, the report
  /// carries the two new components; ids are reassigned to the smallest
  /// member of each side.
  SplitReport delete_edge(int i, int l) {
    if (i == l || !has_edge(i, l)) throw std::logic_error("delete_edge: edge does not exist");
    adj_[static_cast<std::size_t>(i)].erase(l);
    adj_[static_cast<std::size_t>(l)].erase(i);
    --num_edges_;

    SplitReport report;
    std::vector<int> side;
    if (!bidirectional_reach_(i, l, side)) {
      report.split = true;
      const int old_id = component_id(i);
      std::vector<int> old_members = std::move(components_.at(old_id));
      components_.erase(old_id);

      std::sort(side.begin(), side.end());
      std::vector<int> rest;
      rest.reserve(old_members.size() - side.size());
      std::set_difference(old_members.begin(), old_members.end(), side.begin(), side.end(),
                          std::back_inserter(rest));
      for (auto* part : {&side, &rest}) {
        const int id = (*part)[0];
        for (int v : *part) component_id_[static_cast<std::size_t>(v)] = id;
        report.new_components.push_back(*part);
        components_.emplace(id, std::move(*part));
      }
      std::sort(report.new_components.begin(), report.new_components.end(),
                [](const auto& a, const auto& b) { return a[0] < b[0]; });
    }
    return report;
  }

  /// Debug/golden-test dump: one "i l" pair per line, 0-based, i < l.
  void dump_edges(std::ostream& os) const {
    for (int i = 0; i < n_; ++i)
      for (int l : adj_[static_cast<std::size_t>(i)])
        if (i < l) os << i << ' ' << l << '\n';
  }

 private:
  explicit DynGraph(int n) : n_(n), adj_(static_cast<std::size_t>(n)), component_id_(n, -1) {
    if (n < 1) throw std::invalid_argument("DynGraph: n must be >= 1");
  }

  void add_edge_(int i, int l) {
    if (adj_[static_cast<std::size_t>(i)].insert(l).second) {
      adj_[static_cast<std::size_t>(l)].insert(i);
      ++num_edges_;
    }
  }

  void init_components_() {
    components_.clear();
    std::fill(component_id_.begin(), component_id_.end(), -1);
    std::vector<int> stack;
    for (int start = 0; start < n_; ++start) {
      if (component_id_[static_cast<std::size_t>(start)] >= 0) continue;
      std::vector<int> members;
      stack.assign(1, start);
      component_id_[static_cast<std::size_t>(start)] = start;  // provisional
      while (!stack.empty()) {
        const int v = stack.back();
        stack.pop_back();
        members.push_back(v);
        for (int u : adj_[static_cast<std::size_t>(v)]) {
          if (component_id_[static_cast<std::size_t>(u)] < 0) {
            component_id_[static_cast<std::size_t>(u)] = start;
            stack.push_back(u);
          }
        }
      }
      std::sort(members.begin(), members.end());
      const int id = members[0];  // == start, since lower ids were already visited
      for (int v : members) component_id_[static_cast<std::size_t>(v)] = id;
      components_.emplace(id, std::move(members));
    }
  }

  /// Lockstep BFS from a and from b after edge removal. Returns true if the
  /// searches meet (still connected). Otherwise fills `side` with the
  /// component of whichever endpoint exhausted first.
  bool bidirectional_reach_(int a, int b, std::vector<int>& side) {
    ++generation_;
    if (generation_stamp_.size() != static_cast<std::size_t>(n_))
      generation_stamp_.assign(static_cast<std::size_t>(n_), 0);

    struct Search {
      std::vector<int> queue;
      std::size_t head = 0;
      std::vector<int> seen;
      std::uint64_t mark;
    };
    Search sa{{a}, 0, {a}, 2 * generation_};
    Search sb{{b}, 0, {b}, 2 * generation_ + 1};
    generation_stamp_[static_cast<std::size_t>(a)] = sa.mark;
    generation_stamp_[static_cast<std::size_t>(b)] = sb.mark;

    Search* sides[2] = {&sa, &sb};
    while (true) {
      for (Search* s : sides) {
        if (s->head >= s->queue.size()) {
          side = std::move(s->seen);
          return false;
        }
        const int v = s->queue[s->head++];
        const std::uint64_t other = s == &sa ? sb.mark : sa.mark;
        for (int u : adj_[static_cast<std::size_t>(v)]) {
          auto& stamp = generation_stamp_[static_cast<std::size_t>(u)];
          if (stamp == other) return true;
          if (stamp != s->mark) {
            stamp = s->mark;
            s->queue.push_back(u);
            s->seen.push_back(u);
          }
        }
      }
    }
  }

  int n_ = 0;
  std::size_t num_edges_ = 0;
  std::vector<std::set<int>> adj_;
  std::vector<int> component_id_;
  std::map<int, std::vector<int>> components_;  // id -> sorted members
  std::vector<std::uint64_t> generation_stamp_;
  std::uint64_t generation_ = 0;
};

/// Builds the initial user graph: complete, or Erdos-Renyi redrawn until
/// connected (at most cfg.max_retries attempts).
inline DynGraph init_graph(int n, const GraphConfig& cfg, RngStream& rng) {
  if (n < 1) throw std::invalid_argument("init_graph: n must be >= 1");
  if (cfg.mode == GraphConfig::Mode::kComplete) return DynGraph::complete(n);
  const double p = cfg.resolved_p(n);
  for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
    DynGraph g = DynGraph::erdos_renyi(n, p, rng);
    if (g.num_components() == 1) return g;
  }
  throw std::runtime_error("init_graph: no connected Erdos-Renyi draw within max_retries");
}

/// Edge probability that keeps all true-cluster-induced subgraphs of an
/// Erdos-Renyi graph connected with probability at least 1 - delta, for
/// clusters of size at least s: min(1, 12 ln(6 n^2 / delta) / (s - 1)).
inline double karger_p(int n, int s, double delta) {
  if (s < 2) throw std::invalid_argument("karger_p: s must be >= 2");
  const double v = 12.0 * std::log(6.0 * static_cast<double>(n) * n / delta) / (s - 1);
  return std::min(1.0, v);
}

}  // namespace club
