#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "club/dyn_graph.hpp"
#include "club/estimators.hpp"

namespace club {

enum class ConfidenceMode { kPractical, kTheoretical };

struct ClubConfig {
  AlgoParams params;
  ConfidenceMode mode = ConfidenceMode::kPractical;
  TheoreticalParams theory;  // used when mode == kTheoretical
};

struct StepOutcome {
  int chosen = 0;
  double payoff = 0.0;
  double regret = 0.0;
  int deletions = 0;
  int cluster_id = 0;  // serving cluster, before any split this round
};

/// Online clustering of linear bandits: one least-squares estimator per
/// user, arm selection driven by the aggregate estimator of the user's
/// connected component, and edge deletion when two users' weight vectors
/// provably differ.
class ClubModel {
 public:
  ClubModel(int n, int d, DynGraph graph, ClubConfig cfg)
      : cfg_(cfg), graph_(std::move(graph)), node_cluster_(static_cast<std::size_t>(n)) {
    if (graph_.num_nodes() != n) throw std::invalid_argument("ClubModel: graph size mismatch");
    nodes_.assign(static_cast<std::size_t>(n), NodeState(d));
    for (int id : graph_.component_ids()) {
      const auto& members = graph_.component_members(id);
      clusters_.emplace(id, cluster_from_nodes(nodes_, members));
      for (int v : members) node_cluster_[static_cast<std::size_t>(v)] = id;
    }
  }

  int num_users() const { return graph_.num_nodes(); }
  int dim() const { return nodes_.front().dim(); }
  long round() const { return round_; }
  int num_components() const { return graph_.num_components(); }
  int cluster_of(int user) const { return node_cluster_[static_cast<std::size_t>(user)]; }
  const std::vector<NodeState>& nodes() const { return nodes_; }
  const std::map<int, ClusterState>& clusters() const { return clusters_; }
  const DynGraph& graph() const { return graph_; }
  const ClubConfig& config() const { return cfg_; }

  /// Deletion test: strict, so alpha2 = 0 means "delete on any difference"
  /// and the +inf sentinel never fires.
  static bool weights_separated(const Vec& w_a, double radius_a, const Vec& w_b,
                                double radius_b) {
    return (w_a - w_b).norm() > radius_a + radius_b;
  }

  /// Scores every context against the user's cluster aggregate and returns
  /// the argmax index (lowest index wins ties). Does not mutate state.
  int choose(int user, std::span<const Vec> contexts) const {
    if (contexts.empty()) throw std::invalid_argument("choose: empty context set");
    const ClusterState& cl = clusters_.at(cluster_of(user));
    const long t = round_ + 1;
    std::vector<double> cb(contexts.size());
    for (std::size_t k = 0; k < contexts.size(); ++k) {
      cb[k] = cfg_.mode == ConfidenceMode::kPractical
                  ? arm_confidence_width(cl, contexts[k], t, cfg_.params.alpha)
                  : theoretical_arm_width(cl, contexts[k], cfg_.theory);
    }
    return select_arm(cl.w, contexts, cb);
  }

  /// Applies the observed payoff to the served user's estimator and to the
  /// serving cluster's aggregate; all other users are untouched.
  void update(int user, const Vec& x, double payoff) {
    NodeState& node = nodes_[static_cast<std::size_t>(user)];
    pre_serve_ = {user, node.w, node.serve_count};
    node.observe(x, payoff);
    clusters_.at(cluster_of(user)).observe(x, payoff);
    ++round_;
  }

  /// Edge-deletion pass over the served user's current neighbors. The test
  /// compares weight vectors and serve counts as they stood at round start:
  /// the served user's side comes from the pre-update snapshot, neighbors
  /// were not updated this round. Returns the number of deleted edges; on a
  /// split, every new component's aggregate is rebuilt from node matrices.
  int prune(int user) {
    const bool snapshot = pre_serve_.user == user;
    const Vec& w_u = snapshot ? pre_serve_.w : nodes_[static_cast<std::size_t>(user)].w;
    const long serves_u =
        snapshot ? pre_serve_.serves : nodes_[static_cast<std::size_t>(user)].serve_count;
    const long t = snapshot ? round_ : round_ + 1;
    const double radius_u = deletion_radius_(serves_u, t);

    const auto& nb = graph_.neighbors(user);
    std::vector<int> targets(nb.begin(), nb.end());
    std::vector<int> old_members;
    int deletions = 0;
    bool any_split = false;
    for (int l : targets) {
      const NodeState& other = nodes_[static_cast<std::size_t>(l)];
      const double radius_l = deletion_radius_(other.serve_count, t);
      if (weights_separated(w_u, radius_u, other.w, radius_l)) {
        if (old_members.empty()) old_members = graph_.component_members(user);
        if (graph_.delete_edge(user, l).split) any_split = true;
        ++deletions;
      }
    }
    if (any_split) rebuild_split_clusters_(old_members);
    pre_serve_.user = -1;
    return deletions;
  }

  /// One full round: choose, observe payoff, update, prune.
  template <typename PayoffFn, typename RegretFn>
  StepOutcome step(int user, std::span<const Vec> contexts, PayoffFn&& payoff_fn,
                   RegretFn&& regret_fn) {
    StepOutcome out;
    out.cluster_id = cluster_of(user);
    out.chosen = choose(user, contexts);
    out.payoff = payoff_fn(out.chosen);
    out.regret = regret_fn(out.chosen);
    update(user, contexts[static_cast<std::size_t>(out.chosen)], out.payoff);
    out.deletions = prune(user);
    return out;
  }

 private:
  double deletion_radius_(long serves, long t) const {
    return cfg_.mode == ConfidenceMode::kPractical
               ? node_confidence_radius(serves, cfg_.params.alpha2)
               : theoretical_node_radius(serves, t, cfg_.theory, RadiusScope::kNode);
  }

  void rebuild_split_clusters_(const std::vector<int>& old_members) {
    std::map<int, std::vector<int>> parts;
    for (int v : old_members) parts[graph_.component_id(v)].push_back(v);
    clusters_.erase(node_cluster_[static_cast<std::size_t>(old_members[0])]);
    for (auto& [id, members] : parts) {
      for (int v : members) node_cluster_[static_cast<std::size_t>(v)] = id;
      clusters_.insert_or_assign(id, cluster_from_nodes(nodes_, members));
    }
  }

  struct PreServe {
    int user = -1;
    Vec w;
    long serves = 0;
  };

  ClubConfig cfg_;
  DynGraph graph_;
  std::vector<NodeState> nodes_;
  std::map<int, ClusterState> clusters_;
  std::vector<int> node_cluster_;
  long round_ = 0;
  PreServe pre_serve_;
};

}  // namespace club
