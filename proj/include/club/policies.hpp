#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "club/club.hpp"
#include "club/estimators.hpp"
#include "club/rng.hpp"
#include "club/round.hpp"

namespace club {

/// Common round interface for all policies. The runner owns the clock and
/// passes the 1-based round index t; in replay evaluation t advances only
/// on retained records. `observe` must be called exactly for the rounds
/// whose feedback the policy is allowed to learn from.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual std::string name() const = 0;
  virtual bool needs_features() const { return false; }
  virtual bool needs_item_ids() const { return false; }
  virtual int choose(const Round& r, long t) = 0;
  virtual void observe(const Round& r, int chosen, double payoff, long t) = 0;
};

/// One shared linear estimator across all users.
class LinUcbOne final : public Policy {
 public:
  LinUcbOne(int d, double alpha) : node_(d), alpha_(alpha) {}

  std::string name() const override { return "linucb_one"; }
  bool needs_features() const override { return true; }

  int choose(const Round& r, long t) override {
    std::vector<double> cb(r.contexts.size());
    for (std::size_t k = 0; k < r.contexts.size(); ++k)
      cb[k] = arm_confidence_width(node_.M_inv, r.contexts[k], t, alpha_);
    return select_arm(node_.w, r.contexts, cb);
  }

  void observe(const Round& r, int chosen, double payoff, long /*t*/) override {
    node_.observe(r.contexts[static_cast<std::size_t>(chosen)], payoff);
  }

  const NodeState& node() const { return node_; }

 private:
  NodeState node_;
  double alpha_;
};

/// One independent linear estimator per user. The confidence width uses
/// the shared global round clock, which makes a fully disconnected CLUB
/// coincide with this policy exactly.
class LinUcbInd final : public Policy {
 public:
  LinUcbInd(int n, int d, double alpha) : nodes_(static_cast<std::size_t>(n), NodeState(d)), alpha_(alpha) {}

  std::string name() const override { return "linucb_ind"; }
  bool needs_features() const override { return true; }

  int choose(const Round& r, long t) override {
    const NodeState& node = nodes_[static_cast<std::size_t>(r.user)];
    std::vector<double> cb(r.contexts.size());
    for (std::size_t k = 0; k < r.contexts.size(); ++k)
      cb[k] = arm_confidence_width(node.M_inv, r.contexts[k], t, alpha_);
    return select_arm(node.w, r.contexts, cb);
  }

  void observe(const Round& r, int chosen, double payoff, long /*t*/) override {
    nodes_[static_cast<std::size_t>(r.user)].observe(r.contexts[static_cast<std::size_t>(chosen)],
                                                     payoff);
  }

  std::vector<NodeState>& nodes() { return nodes_; }
  const std::vector<NodeState>& nodes() const { return nodes_; }

 private:
  std::vector<NodeState> nodes_;
  double alpha_;
};

/// One linear estimator per true cluster, routed by a ground-truth
/// partition the environment must supply.
class Clairvoyant final : public Policy {
 public:
  Clairvoyant(std::vector<int> node_to_cluster, int num_clusters, int d, double alpha)
      : routing_(std::move(node_to_cluster)),
        nodes_(static_cast<std::size_t>(num_clusters), NodeState(d)),
        alpha_(alpha) {
    if (routing_.empty())
      throw std::invalid_argument("clairvoyant: ground-truth partition required");
  }

  std::string name() const override { return "clairvoyant"; }
  bool needs_features() const override { return true; }

  int choose(const Round& r, long t) override {
    const NodeState& node = node_for_(r.user);
    std::vector<double> cb(r.contexts.size());
    for (std::size_t k = 0; k < r.contexts.size(); ++k)
      cb[k] = arm_confidence_width(node.M_inv, r.contexts[k], t, alpha_);
    return select_arm(node.w, r.contexts, cb);
  }

  void observe(const Round& r, int chosen, double payoff, long /*t*/) override {
    node_for_(r.user).observe(r.contexts[static_cast<std::size_t>(chosen)], payoff);
  }

 private:
  NodeState& node_for_(int user) {
    return nodes_[static_cast<std::size_t>(routing_[static_cast<std::size_t>(user)])];
  }

  std::vector<int> routing_;
  std::vector<NodeState> nodes_;
  double alpha_;
};

/// Running count/mean/variance for one item (Welford update).
struct ItemStats {
  long count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++count;
    const double delta = x - mean;
    mean += delta / static_cast<double>(count);
    m2 += delta * (x - mean);
  }

  double variance() const { return count > 0 ? m2 / static_cast<double>(count) : 0.0; }
};

/// UCB1 rule over the candidate-ordered stats: unseen items first (lowest
/// index), otherwise argmax of mean + alpha sqrt(2 ln t / count).
inline int ucb1_choose(std::span<const ItemStats> stats, long t, double alpha) {
  if (stats.empty()) throw std::invalid_argument("ucb1_choose: empty candidate set");
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < stats.size(); ++k) {
    if (stats[k].count == 0) return static_cast<int>(k);
    const double score =
        stats[k].mean + alpha * std::sqrt(2.0 * std::log(static_cast<double>(t)) /
                                          static_cast<double>(stats[k].count));
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(k);
    }
  }
  return best;
}

/// Variance-aware rule: mean + sqrt(2 Var ln t / count) + 3 ln t / count.
inline int ucbv_choose(std::span<const ItemStats> stats, long t) {
  if (stats.empty()) throw std::invalid_argument("ucbv_choose: empty candidate set");
  int best = -1;
  double best_score = -std::numeric_limits<double>::infinity();
  const double logt = std::log(static_cast<double>(t));
  for (std::size_t k = 0; k < stats.size(); ++k) {
    if (stats[k].count == 0) return static_cast<int>(k);
    const double n = static_cast<double>(stats[k].count);
    const double score =
        stats[k].mean + std::sqrt(2.0 * stats[k].variance() * logt / n) + 3.0 * logt / n;
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(k);
    }
  }
  return best;
}

namespace detail {

/// Shared machinery for the featureless UCB policies: per-scope item
/// statistics addressed by stable item id.
class ItemStatsTable {
 public:
  ItemStatsTable(int num_scopes, int num_items)
      : num_items_(num_items),
        stats_(static_cast<std::size_t>(num_scopes) * static_cast<std::size_t>(num_items)) {}

  ItemStats& at(int scope, int item) {
    return stats_[static_cast<std::size_t>(scope) * static_cast<std::size_t>(num_items_) +
                  static_cast<std::size_t>(item)];
  }

  std::vector<ItemStats> gather(int scope, const std::vector<int>& items) {
    std::vector<ItemStats> out;
    out.reserve(items.size());
    for (int id : items) out.push_back(at(scope, id));
    return out;
  }

 private:
  int num_items_;
  std::vector<ItemStats> stats_;
};

}  // namespace detail

/// UCB1 with one shared stats table (scope 0) or one per user.
class UcbPolicy final : public Policy {
 public:
  enum class Scope { kOne, kInd };

  UcbPolicy(Scope scope, int n_users, int num_items, double alpha)
      : scope_(scope), table_(scope == Scope::kOne ? 1 : n_users, num_items), alpha_(alpha) {}

  std::string name() const override { return scope_ == Scope::kOne ? "ucb_one" : "ucb_ind"; }
  bool needs_item_ids() const override { return true; }

  int choose(const Round& r, long t) override {
    const auto stats = table_.gather(scope_of_(r.user), r.item_ids);
    return ucb1_choose(stats, t, alpha_);
  }

  void observe(const Round& r, int chosen, double payoff, long /*t*/) override {
    table_.at(scope_of_(r.user), r.item_ids[static_cast<std::size_t>(chosen)]).add(payoff);
  }

 private:
  int scope_of_(int user) const { return scope_ == Scope::kOne ? 0 : user; }

  Scope scope_;
  detail::ItemStatsTable table_;
  double alpha_;
};

/// Single shared UCB-V instance.
class UcbVPolicy final : public Policy {
 public:
  explicit UcbVPolicy(int num_items) : table_(1, num_items) {}

  std::string name() const override { return "ucb_v"; }
  bool needs_item_ids() const override { return true; }

  int choose(const Round& r, long t) override {
    const auto stats = table_.gather(0, r.item_ids);
    return ucbv_choose(stats, t);
  }

  void observe(const Round& r, int chosen, double payoff, long /*t*/) override {
    table_.at(0, r.item_ids[static_cast<std::size_t>(chosen)]).add(payoff);
  }

 private:
  detail::ItemStatsTable table_;
};

/// Uniform-random choice from a dedicated stream.
class RanPolicy final : public Policy {
 public:
  explicit RanPolicy(RngStream stream) : rng_(stream) {}

  std::string name() const override { return "ran"; }

  int choose(const Round& r, long /*t*/) override {
    if (r.size() == 0) throw std::invalid_argument("ran: empty candidate set");
    return static_cast<int>(rng_.uniform_int(0, static_cast<std::int64_t>(r.size()) - 1));
  }

  void observe(const Round&, int, double, long) override {}

 private:
  RngStream rng_;
};

/// CLUB behind the shared policy interface. The model keeps its own round
/// counter, which coincides with the runner clock because `observe` is
/// called once per learnable round.
class ClubPolicy final : public Policy {
 public:
  explicit ClubPolicy(ClubModel model) : model_(std::move(model)) {}

  std::string name() const override { return "club"; }
  bool needs_features() const override { return true; }

  int choose(const Round& r, long /*t*/) override { return model_.choose(r.user, r.contexts); }

  void observe(const Round& r, int chosen, double payoff, long /*t*/) override {
    model_.update(r.user, r.contexts[static_cast<std::size_t>(chosen)], payoff);
    last_deletions_ = model_.prune(r.user);
  }

  const ClubModel& model() const { return model_; }
  ClubModel& model() { return model_; }
  int last_deletions() const { return last_deletions_; }

 private:
  ClubModel model_;
  int last_deletions_ = 0;
};

}  // namespace club
