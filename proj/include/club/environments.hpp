#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "club/linalg.hpp"
#include "club/rng.hpp"
#include "club/round.hpp"

namespace club {

// ---------------------------------------------------------------------------
// Synthetic clustered-linear worlds
// ---------------------------------------------------------------------------

struct SyntheticConfig {
  int n = 500;
  int d = 25;
  int m = 2;
  double z = 0.0;      // cluster-size imbalance exponent
  double sigma = 0.1;  // payoff noise half-width, Uniform[-sigma, sigma]
  int c = 10;          // candidate contexts per round
  long T = 55000;
};

struct TrueWorld {
  std::vector<Vec> models;          // unit parameter vector per cluster
  std::vector<int> sizes;
  std::vector<int> node_to_cluster;
  double separation = 0.0;          // min pairwise model distance; +inf for m = 1

  int num_clusters() const { return static_cast<int>(models.size()); }
  int num_users() const { return static_cast<int>(node_to_cluster.size()); }
};

/// Cluster sizes |V_j| proportional to j^-z: integer parts, with the
/// leftover users assigned to the first cluster. Throws if any cluster
/// would be empty.
inline std::vector<int> cluster_sizes(int n, int m, double z) {
  if (m < 1 || m > n) throw std::invalid_argument("cluster_sizes: need 1 <= m <= n");
  double denom = 0.0;
  for (int l = 1; l <= m; ++l) denom += std::pow(static_cast<double>(l), -z);
  std::vector<int> sizes(static_cast<std::size_t>(m));
  int assigned = 0;
  for (int j = 1; j <= m; ++j) {
    const int s = static_cast<int>(n * std::pow(static_cast<double>(j), -z) / denom);
    sizes[static_cast<std::size_t>(j - 1)] = s;
    assigned += s;
  }
  sizes[0] += n - assigned;
  for (int s : sizes)
    if (s < 1) throw std::invalid_argument("cluster_sizes: empty cluster; m too large for n, z");
  return sizes;
}

inline double min_pairwise_distance(const std::vector<Vec>& models) {
  double g = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < models.size(); ++a)
    for (std::size_t b = a + 1; b < models.size(); ++b)
      g = std::min(g, (models[a] - models[b]).norm());
  return g;
}

/// Draws the true world: one unit-norm model per cluster, contiguous user
/// blocks sized by cluster_sizes. Near-duplicate model sets are redrawn.
inline TrueWorld gen_world(const SyntheticConfig& cfg, RngStream& rng) {
  TrueWorld w;
  w.sizes = cluster_sizes(cfg.n, cfg.m, cfg.z);
  for (int attempt = 0; attempt < 100; ++attempt) {
    w.models.clear();
    for (int j = 0; j < cfg.m; ++j) w.models.push_back(sample_unit_sphere(cfg.d, rng));
    w.separation = min_pairwise_distance(w.models);
    if (w.separation >= 1e-6) break;
    if (attempt == 99) throw std::runtime_error("gen_world: could not separate cluster models");
  }
  w.node_to_cluster.clear();
  w.node_to_cluster.reserve(static_cast<std::size_t>(cfg.n));
  for (int j = 0; j < cfg.m; ++j)
    w.node_to_cluster.insert(w.node_to_cluster.end(), static_cast<std::size_t>(w.sizes[j]), j);
  return w;
}

/// Size-weighted sum of pairwise model distances: sum_j (v_j/n) sum_j'
/// ||u_j - u_j'||. Diagnostic for how hard the clustering is to learn.
inline double expected_sd(const TrueWorld& w) {
  const double n = static_cast<double>(w.num_users());
  double total = 0.0;
  for (int j = 0; j < w.num_clusters(); ++j) {
    double sd = 0.0;
    for (int l = 0; l < w.num_clusters(); ++l) sd += (w.models[j] - w.models[l]).norm();
    total += (w.sizes[j] / n) * sd;
  }
  return total;
}

/// Round generator and payoff/regret oracle for the synthetic world.
///
/// Every per-round draw comes from a stream derived from (seed, round), so
/// the (user, contexts) sequence is identical no matter which policy
/// consumes it, and payoff noise is keyed by (round, chosen arm) so that
/// policies picking the same arm in the same round observe the same value.
class SyntheticEnv {
 public:
  SyntheticEnv(SyntheticConfig cfg, std::uint64_t seed)
      : cfg_(cfg), users_root_(RngStream(seed).derive(0x5eedu)),
        noise_root_(RngStream(seed).derive(0x6015eu)) {
    RngStream world_rng = RngStream(seed).derive(0x0e1du);
    world_ = gen_world(cfg_, world_rng);
  }

  SyntheticEnv(SyntheticConfig cfg, TrueWorld world, std::uint64_t seed)
      : cfg_(cfg), world_(std::move(world)), users_root_(RngStream(seed).derive(0x5eedu)),
        noise_root_(RngStream(seed).derive(0x6015eu)) {
    if (world_.num_users() != cfg_.n) throw std::invalid_argument("world size mismatch");
  }

  Round round(long t) const {
    RngStream s = users_root_.derive(static_cast<std::uint64_t>(t));
    Round r;
    r.user = static_cast<int>(s.uniform_int(0, cfg_.n - 1));
    r.contexts.reserve(static_cast<std::size_t>(cfg_.c));
    for (int k = 0; k < cfg_.c; ++k) r.contexts.push_back(sample_unit_sphere(cfg_.d, s));
    return r;
  }

  double payoff(long t, const Round& r, int chosen) const {
    RngStream s = noise_root_.derive(static_cast<std::uint64_t>(t),
                                     static_cast<std::uint64_t>(chosen));
    const Vec& u = model_of_(r.user);
    const double noise = cfg_.sigma > 0.0 ? s.uniform(-cfg_.sigma, cfg_.sigma) : 0.0;
    return u.dot(r.contexts[static_cast<std::size_t>(chosen)]) + noise;
  }

  /// Noiseless regret oracle: best expected payoff in the set minus the
  /// expected payoff of the chosen context.
  double regret(const Round& r, int chosen) const {
    const Vec& u = model_of_(r.user);
    double best = -std::numeric_limits<double>::infinity();
    for (const Vec& x : r.contexts) best = std::max(best, u.dot(x));
    return best - u.dot(r.contexts[static_cast<std::size_t>(chosen)]);
  }

  const TrueWorld& world() const { return world_; }
  const SyntheticConfig& config() const { return cfg_; }
  int n_users() const { return cfg_.n; }
  int dim() const { return cfg_.d; }
  long horizon() const { return cfg_.T; }

 private:
  const Vec& model_of_(int user) const {
    return world_.models[static_cast<std::size_t>(
        world_.node_to_cluster[static_cast<std::size_t>(user)])];
  }

  SyntheticConfig cfg_;
  TrueWorld world_;
  RngStream users_root_;
  RngStream noise_root_;
};

// ---------------------------------------------------------------------------
// CSV ingestion
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) out.push_back(field);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("failed to parse " + what + ": '" + s + "'");
  }
}

/// Maps opaque string ids to dense ints in order of first appearance.
class IdMap {
 public:
  int intern(const std::string& key) {
    auto [it, inserted] = index_.emplace(key, static_cast<int>(keys_.size()));
    if (inserted) keys_.push_back(key);
    return it->second;
  }

  std::optional<int> find(const std::string& key) const {
    auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  int size() const { return static_cast<int>(keys_.size()); }
  const std::string& key(int id) const { return keys_[static_cast<std::size_t>(id)]; }

 private:
  std::unordered_map<std::string, int> index_;
  std::vector<std::string> keys_;
};

}  // namespace detail

/// Item feature catalog loaded from a "item_id,f1,...,fd" CSV.
struct ItemCatalog {
  detail::IdMap ids;
  std::vector<Vec> features;
  int dim = 0;

  int size() const { return ids.size(); }
};

inline ItemCatalog load_items_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open items file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty items file: " + path);
  const auto header = detail::split(line, ',');
  if (header.size() < 2 || header[0] != "item_id")
    throw std::runtime_error("items file must start with header item_id,f1,...");
  ItemCatalog cat;
  cat.dim = static_cast<int>(header.size()) - 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (static_cast<int>(fields.size()) != cat.dim + 1)
      throw std::runtime_error("items file: wrong field count in line '" + line + "'");
    const int id = cat.ids.intern(fields[0]);
    if (id != static_cast<int>(cat.features.size()))
      throw std::runtime_error("items file: duplicate item id " + fields[0]);
    Vec f(cat.dim);
    for (int k = 0; k < cat.dim; ++k)
      f[k] = detail::parse_double(fields[static_cast<std::size_t>(k) + 1], "item feature");
    cat.features.push_back(std::move(f));
  }
  return cat;
}

/// "user_id,item_id" pairs marking payoff-1 events.
inline std::vector<std::pair<std::string, std::string>> load_interactions_csv(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open interactions file: " + path);
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "user_id,item_id") continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 2)
      throw std::runtime_error("interactions file: expected 2 fields in '" + line + "'");
    out.emplace_back(fields[0], fields[1]);
  }
  return out;
}

/// One-positive sampling over a fixed item catalog: each round serves a
/// uniform user and a candidate set of c distinct items of which one is
/// drawn from the user's positives. Users without positives are dropped at
/// load time.
class DatasetEnv {
 public:
  DatasetEnv(ItemCatalog catalog,
             const std::vector<std::pair<std::string, std::string>>& interactions, int c,
             std::uint64_t seed)
      : catalog_(std::move(catalog)), c_(c), users_root_(RngStream(seed).derive(0xda7au)) {
    if (c_ < 1) throw std::invalid_argument("DatasetEnv: c must be >= 1");
    if (catalog_.size() < c_)
      throw std::invalid_argument("DatasetEnv: catalog smaller than candidate-set size");
    std::unordered_map<std::string, std::unordered_set<int>> by_user;
    for (const auto& [user_key, item_key] : interactions) {
      const auto item = catalog_.ids.find(item_key);
      if (!item) throw std::runtime_error("interactions reference unknown item: " + item_key);
      by_user[user_key].insert(*item);
    }
    std::vector<std::string> keys;
    keys.reserve(by_user.size());
    for (const auto& [k, _] : by_user) keys.push_back(k);
    std::sort(keys.begin(), keys.end());  // load order must not depend on hashing
    for (const auto& k : keys) {
      users_.intern(k);
      std::vector<int> items(by_user[k].begin(), by_user[k].end());
      std::sort(items.begin(), items.end());
      positives_list_.push_back(std::move(items));
      positives_set_.emplace_back(positives_list_.back().begin(), positives_list_.back().end());
    }
    if (users_.size() == 0) throw std::invalid_argument("DatasetEnv: no user has any positive");
  }

  Round round(long t) const {
    RngStream s = users_root_.derive(static_cast<std::uint64_t>(t));
    Round r;
    r.user = static_cast<int>(s.uniform_int(0, users_.size() - 1));
    const auto& pos = positives_list_[static_cast<std::size_t>(r.user)];
    const int positive =
        pos[static_cast<std::size_t>(s.uniform_int(0, static_cast<std::int64_t>(pos.size()) - 1))];
    r.item_ids.push_back(positive);
    std::unordered_set<int> taken{positive};
    while (static_cast<int>(r.item_ids.size()) < c_) {
      const int item = static_cast<int>(s.uniform_int(0, catalog_.size() - 1));
      if (taken.insert(item).second) r.item_ids.push_back(item);
    }
    s.shuffle(r.item_ids);
    r.contexts.reserve(r.item_ids.size());
    for (int id : r.item_ids) r.contexts.push_back(catalog_.features[static_cast<std::size_t>(id)]);
    return r;
  }

  bool is_positive(int user, int item) const {
    return positives_set_[static_cast<std::size_t>(user)].count(item) > 0;
  }

  double payoff(long /*t*/, const Round& r, int chosen) const {
    return is_positive(r.user, r.item_ids[static_cast<std::size_t>(chosen)]) ? 1.0 : 0.0;
  }

  /// Every candidate set contains a positive, so the best payoff is 1.
  double regret(const Round& r, int chosen) const { return 1.0 - payoff(0, r, chosen); }

  int n_users() const { return users_.size(); }
  int dim() const { return catalog_.dim; }
  int num_items() const { return catalog_.size(); }
  const ItemCatalog& catalog() const { return catalog_; }

 private:
  ItemCatalog catalog_;
  detail::IdMap users_;
  std::vector<std::vector<int>> positives_list_;
  std::vector<std::unordered_set<int>> positives_set_;
  int c_;
  RngStream users_root_;
};

// ---------------------------------------------------------------------------
// Offline replay
// ---------------------------------------------------------------------------

struct ReplayRecord {
  int user = 0;
  std::vector<int> candidates;  // dense item ids
  int logged_choice = 0;        // dense item id, must appear in candidates
  double payoff = 0.0;          // 0 or 1
};

/// Logged bandit interactions for replay evaluation: a record is retained
/// only when the evaluated policy picks the logged item, and only retained
/// records carry feedback.
class ReplayEnv {
 public:
  explicit ReplayEnv(std::vector<ReplayRecord> records, int n_users, int num_items)
      : records_(std::move(records)), n_users_(n_users), num_items_(num_items) {
    for (const auto& rec : records_) {
      if (std::find(rec.candidates.begin(), rec.candidates.end(), rec.logged_choice) ==
          rec.candidates.end())
        throw std::invalid_argument("replay record: logged choice not among candidates");
    }
  }

  /// Loads "user_key,chosen_item_id,payoff,cand_1|cand_2|..." lines.
  static ReplayEnv from_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open replay log: " + path);
    detail::IdMap users, items;
    std::vector<ReplayRecord> records;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto fields = detail::split(line, ',');
      if (fields.size() != 4)
        throw std::runtime_error("replay log: expected 4 fields in '" + line + "'");
      ReplayRecord rec;
      rec.user = users.intern(fields[0]);
      rec.payoff = detail::parse_double(fields[2], "replay payoff");
      for (const auto& c : detail::split(fields[3], '|')) rec.candidates.push_back(items.intern(c));
      rec.logged_choice = items.intern(fields[1]);
      records.push_back(std::move(rec));
    }
    return ReplayEnv(std::move(records), users.size(), items.size());
  }

  long size() const { return static_cast<long>(records_.size()); }
  int n_users() const { return n_users_; }
  int num_items() const { return num_items_; }
  const ReplayRecord& record(long t) const { return records_[static_cast<std::size_t>(t - 1)]; }

  Round round(long t) const {
    const ReplayRecord& rec = record(t);
    Round r;
    r.user = rec.user;
    r.item_ids = rec.candidates;
    return r;
  }

  struct StepResult {
    bool retained = false;
    double payoff = 0.0;
  };

  /// Record t is retained iff the policy chose the logged item; feedback is
  /// revealed only then.
  StepResult evaluate(long t, const Round& r, int chosen) const {
    const ReplayRecord& rec = record(t);
    if (r.item_ids[static_cast<std::size_t>(chosen)] != rec.logged_choice) return {false, 0.0};
    return {true, rec.payoff};
  }

 private:
  std::vector<ReplayRecord> records_;
  int n_users_ = 0;
  int num_items_ = 0;
};

}  // namespace club
