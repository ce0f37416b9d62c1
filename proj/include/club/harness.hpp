#pragma once

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "club/club.hpp"
#include "club/dyn_graph.hpp"
#include "club/environments.hpp"
#include "club/policies.hpp"

namespace club {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct ParamPoint {
  double alpha = 1.0;
  double alpha2 = AlgoParams::never_delete();
};

struct PolicySpec {
  std::string name;                 // club, linucb_one, linucb_ind, clairvoyant,
                                    // ucb_one, ucb_ind, ucb_v, ran
  std::vector<double> alpha_grid;   // empty -> default grid (when the policy uses alpha)
  std::vector<double> alpha2_grid;  // club only; empty -> default grid
};

inline const std::vector<double>& default_alpha_grid() {
  static const std::vector<double> g{0.1, 0.25, 0.5, 1.0, 1.5, 2.5};
  return g;
}

inline const std::vector<double>& default_alpha2_grid() {
  static const std::vector<double> g{0.1, 0.25, 0.5, 1.0, 2.0};
  return g;
}

inline bool policy_uses_alpha(const std::string& name) {
  return name == "club" || name == "linucb_one" || name == "linucb_ind" ||
         name == "clairvoyant" || name == "ucb_one" || name == "ucb_ind";
}

inline bool policy_uses_alpha2(const std::string& name) { return name == "club"; }

/// Tuning grid in declared order: alpha outer, alpha2 inner.
inline std::vector<ParamPoint> expand_grid(const PolicySpec& spec) {
  std::vector<double> alphas =
      policy_uses_alpha(spec.name)
          ? (spec.alpha_grid.empty() ? default_alpha_grid() : spec.alpha_grid)
          : std::vector<double>{1.0};
  std::vector<double> alpha2s =
      policy_uses_alpha2(spec.name)
          ? (spec.alpha2_grid.empty() ? default_alpha2_grid() : spec.alpha2_grid)
          : std::vector<double>{AlgoParams::never_delete()};
  std::vector<ParamPoint> grid;
  grid.reserve(alphas.size() * alpha2s.size());
  for (double a : alphas)
    for (double a2 : alpha2s) grid.push_back({a, a2});
  return grid;
}

struct EnvironmentSpec {
  std::string kind = "synthetic";  // synthetic | dataset | replay
  SyntheticConfig synthetic;
  std::string world_file;  // optional fixed world for synthetic runs
  std::string items_file;
  std::string interactions_file;
  int dataset_c = 25;
  std::string log_file;
};

struct ExperimentConfig {
  EnvironmentSpec env;
  std::vector<PolicySpec> policies;
  long T = 20000;
  long t0 = 2000;  // tuning horizon; 0 disables the tuning phase
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  GraphConfig graph;
  ConfidenceMode confidence_mode = ConfidenceMode::kPractical;
  TheoreticalParams theory;
  bool carry_tuning_state = false;
  std::string out_dir = "results";
  std::string club_event_log;  // path prefix; empty disables the event log
};

// ---------------------------------------------------------------------------
// World file IO (gen-synthetic)
// ---------------------------------------------------------------------------

inline void save_world_json(const TrueWorld& world, const SyntheticConfig& cfg,
                            std::uint64_t seed, const std::string& path) {
  nlohmann::json j;
  j["n"] = cfg.n;
  j["d"] = cfg.d;
  j["m"] = cfg.m;
  j["z"] = cfg.z;
  j["sigma"] = cfg.sigma;
  j["seed"] = seed;
  j["sizes"] = world.sizes;
  j["node_to_cluster"] = world.node_to_cluster;
  j["separation"] = world.separation;
  std::vector<std::vector<double>> models;
  for (const Vec& u : world.models) models.emplace_back(u.data(), u.data() + u.size());
  j["models"] = models;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write world file: " + path);
  out << j.dump(2) << '\n';
}

inline TrueWorld load_world_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open world file: " + path);
  nlohmann::json j;
  in >> j;
  TrueWorld w;
  w.sizes = j.at("sizes").get<std::vector<int>>();
  w.node_to_cluster = j.at("node_to_cluster").get<std::vector<int>>();
  w.separation = j.at("separation").get<double>();
  for (const auto& row : j.at("models")) {
    const auto vals = row.get<std::vector<double>>();
    w.models.push_back(Eigen::Map<const Vec>(vals.data(), static_cast<Eigen::Index>(vals.size())));
  }
  return w;
}

// ---------------------------------------------------------------------------
// Config file IO
// ---------------------------------------------------------------------------

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  nlohmann::json j;
  in >> j;

  ExperimentConfig cfg;
  const auto& je = j.at("environment");
  cfg.env.kind = je.at("kind").get<std::string>();
  if (cfg.env.kind == "synthetic") {
    auto& s = cfg.env.synthetic;
    s.n = je.value("n", s.n);
    s.d = je.value("d", s.d);
    s.m = je.value("m", s.m);
    s.z = je.value("z", s.z);
    s.sigma = je.value("sigma", s.sigma);
    s.c = je.value("c", s.c);
    cfg.env.world_file = je.value("world_file", std::string{});
  } else if (cfg.env.kind == "dataset") {
    cfg.env.items_file = je.at("items_file").get<std::string>();
    cfg.env.interactions_file = je.at("interactions_file").get<std::string>();
    cfg.env.dataset_c = je.value("c", cfg.env.dataset_c);
  } else if (cfg.env.kind == "replay") {
    cfg.env.log_file = je.at("log_file").get<std::string>();
  } else {
    throw std::runtime_error("unknown environment kind: " + cfg.env.kind);
  }

  cfg.T = j.value("T", cfg.T);
  cfg.t0 = j.value("t0", cfg.t0);
  cfg.env.synthetic.T = cfg.T;
  if (j.contains("seeds")) cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
  if (j.contains("graph")) {
    const auto& jg = j.at("graph");
    const std::string mode = jg.value("mode", std::string("complete"));
    if (mode == "complete") {
      cfg.graph.mode = GraphConfig::Mode::kComplete;
    } else if (mode == "erdos_renyi") {
      cfg.graph.mode = GraphConfig::Mode::kErdosRenyi;
    } else {
      throw std::runtime_error("unknown graph mode: " + mode);
    }
    cfg.graph.p = jg.value("p", 0.0);
    cfg.graph.max_retries = jg.value("max_retries", 100);
  }
  const std::string mode = j.value("confidence_mode", std::string("practical"));
  if (mode == "practical") {
    cfg.confidence_mode = ConfidenceMode::kPractical;
  } else if (mode == "theoretical") {
    cfg.confidence_mode = ConfidenceMode::kTheoretical;
    const auto& jt = j.at("theory");
    // theorem mode: the configured confidence level is rescaled here, once
    cfg.theory = TheoreticalParams::for_theorem(
        jt.at("sigma").get<double>(), jt.at("delta").get<double>(), jt.at("lambda").get<double>(),
        jt.value("gamma", 0.0), jt.value("m_true", 1), 1, 1, jt.value("c_max", 10));
  } else {
    throw std::runtime_error("unknown confidence mode: " + mode);
  }
  cfg.carry_tuning_state = j.value("carry_tuning_state", false);
  cfg.out_dir = j.value("out_dir", cfg.out_dir);
  cfg.club_event_log = j.value("club_event_log", std::string{});

  for (const auto& jp : j.at("policies")) {
    PolicySpec spec;
    spec.name = jp.at("name").get<std::string>();
    if (jp.contains("alpha_grid")) spec.alpha_grid = jp.at("alpha_grid").get<std::vector<double>>();
    if (jp.contains("alpha2_grid"))
      spec.alpha2_grid = jp.at("alpha2_grid").get<std::vector<double>>();
    cfg.policies.push_back(std::move(spec));
  }
  if (cfg.policies.empty()) throw std::runtime_error("config lists no policies");
  if (cfg.t0 >= cfg.T && cfg.t0 != 0)
    throw std::runtime_error("config requires t0 < T for two-phase runs");
  return cfg;
}

// ---------------------------------------------------------------------------
// Policy construction
// ---------------------------------------------------------------------------

struct EnvTraits {
  int n_users = 0;
  int dim = 0;
  int num_items = 0;          // 0 when the environment has no item catalog
  bool has_features = false;
  const std::vector<int>* ground_truth = nullptr;  // true partition, if known
  int true_m = 0;
};

inline EnvTraits env_traits(const SyntheticEnv& env) {
  return {env.n_users(), env.dim(), 0, true, &env.world().node_to_cluster,
          env.world().num_clusters()};
}

inline EnvTraits env_traits(const DatasetEnv& env) {
  return {env.n_users(), env.dim(), env.num_items(), true, nullptr, 0};
}

inline EnvTraits env_traits(const ReplayEnv& env) {
  return {env.n_users(), 0, env.num_items(), false, nullptr, 0};
}

/// Builds policies for one (seed, environment) run. CLUB instances share
/// the per-seed initial graph draw so tuning compares grid points on the
/// same starting topology.
class PolicyFactory {
 public:
  PolicyFactory(const ExperimentConfig& cfg, EnvTraits traits, std::uint64_t seed)
      : cfg_(&cfg), traits_(traits), seed_(seed) {}

  std::unique_ptr<Policy> make(const PolicySpec& spec, const ParamPoint& p) const {
    const std::string& name = spec.name;
    if (name == "club") {
      require_features_(name);
      ClubConfig cc;
      cc.params = AlgoParams{p.alpha, p.alpha2};
      cc.mode = cfg_->confidence_mode;
      cc.theory = cfg_->theory;
      cc.theory.n_users = traits_.n_users;
      cc.theory.dim = traits_.dim;
      return std::make_unique<ClubPolicy>(
          ClubModel(traits_.n_users, traits_.dim, initial_graph_(), cc));
    }
    if (name == "linucb_one") {
      require_features_(name);
      return std::make_unique<LinUcbOne>(traits_.dim, p.alpha);
    }
    if (name == "linucb_ind") {
      require_features_(name);
      return std::make_unique<LinUcbInd>(traits_.n_users, traits_.dim, p.alpha);
    }
    if (name == "clairvoyant") {
      require_features_(name);
      if (traits_.ground_truth == nullptr)
        throw std::invalid_argument("clairvoyant requires an environment with known clusters");
      return std::make_unique<Clairvoyant>(*traits_.ground_truth, traits_.true_m, traits_.dim,
                                           p.alpha);
    }
    if (name == "ucb_one" || name == "ucb_ind") {
      require_items_(name);
      return std::make_unique<UcbPolicy>(
          name == "ucb_one" ? UcbPolicy::Scope::kOne : UcbPolicy::Scope::kInd, traits_.n_users,
          traits_.num_items, p.alpha);
    }
    if (name == "ucb_v") {
      require_items_(name);
      return std::make_unique<UcbVPolicy>(traits_.num_items);
    }
    if (name == "ran") {
      return std::make_unique<RanPolicy>(RngStream(seed_).derive(0x4a4du));
    }
    throw std::invalid_argument("unknown policy: " + name);
  }

  const DynGraph& initial_graph_() const {
    if (!graph_) {
      RngStream rng = RngStream(seed_).derive(0x6a4fu);
      graph_ = init_graph(traits_.n_users, cfg_->graph, rng);
    }
    return *graph_;
  }

 private:
  void require_features_(const std::string& name) const {
    if (!traits_.has_features)
      throw std::invalid_argument(name + " requires a feature-based environment");
  }
  void require_items_(const std::string& name) const {
    if (traits_.num_items == 0)
      throw std::invalid_argument(name + " requires an environment with an item catalog");
  }

  const ExperimentConfig* cfg_;
  EnvTraits traits_;
  std::uint64_t seed_;
  mutable std::optional<DynGraph> graph_;
};

// ---------------------------------------------------------------------------
// Stream checksum
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline constexpr std::uint64_t kChecksumSeed = 0xcbf29ce484222325ULL;

/// Rolling hash of the policy-independent part of a round.
inline std::uint64_t hash_round(std::uint64_t h, const Round& r) {
  h = fnv1a(h, &r.user, sizeof(r.user));
  for (int id : r.item_ids) h = fnv1a(h, &id, sizeof(id));
  for (const Vec& x : r.contexts)
    h = fnv1a(h, x.data(), sizeof(double) * static_cast<std::size_t>(x.size()));
  return h;
}

// ---------------------------------------------------------------------------
// Phase runners
// ---------------------------------------------------------------------------

struct RegretTrace {
  std::vector<double> cum_regret;           // per round of the phase
  std::vector<int> components;              // CLUB only, else empty
  std::vector<std::uint64_t> checksums;     // rolling stream hash per round
};

struct ClubEventSink {
  std::ostream* os = nullptr;
};

/// Runs one policy over environment rounds [t_begin, t_end]. The policy
/// clock restarts at 1 for the phase (fresh-estimator protocol); pass
/// clock_offset to continue an earlier clock instead.
template <typename Env>
RegretTrace run_regret_phase(const Env& env, Policy& policy, long t_begin, long t_end,
                             long clock_offset = 0, ClubEventSink events = {}) {
  RegretTrace trace;
  const auto rounds = static_cast<std::size_t>(t_end - t_begin + 1);
  trace.cum_regret.reserve(rounds);
  trace.checksums.reserve(rounds);
  auto* as_club = dynamic_cast<ClubPolicy*>(&policy);
  if (as_club != nullptr) trace.components.reserve(rounds);

  double cum = 0.0;
  std::uint64_t h = kChecksumSeed;
  for (long t = t_begin; t <= t_end; ++t) {
    const Round r = env.round(t);
    h = hash_round(h, r);
    const long clock = t - t_begin + 1 + clock_offset;
    const int k = policy.choose(r, clock);
    const double payoff = env.payoff(t, r, k);
    cum += env.regret(r, k);
    const int cluster_id = as_club != nullptr ? as_club->model().cluster_of(r.user) : 0;
    policy.observe(r, k, payoff, clock);
    trace.cum_regret.push_back(cum);
    trace.checksums.push_back(h);
    if (as_club != nullptr) {
      trace.components.push_back(as_club->model().num_components());
      if (events.os != nullptr) {
        *events.os << clock << ',' << r.user << ',' << cluster_id << ',' << k << ','
                   << payoff << ',' << as_club->last_deletions() << ','
                   << as_club->model().num_components() << '\n';
      }
    }
  }
  return trace;
}

struct ReplayTrace {
  std::vector<long> retained;               // cumulative, per record
  std::vector<double> clicks;               // cumulative
  std::vector<std::uint64_t> checksums;
};

inline ReplayTrace run_replay_phase(const ReplayEnv& env, Policy& policy, long t_begin,
                                    long t_end) {
  ReplayTrace trace;
  long retained = 0;
  double clicks = 0.0;
  std::uint64_t h = kChecksumSeed;
  for (long t = t_begin; t <= t_end; ++t) {
    const Round r = env.round(t);
    h = hash_round(h, r);
    const int k = policy.choose(r, retained + 1);
    const auto res = env.evaluate(t, r, k);
    if (res.retained) {
      policy.observe(r, k, res.payoff, retained + 1);
      ++retained;
      clicks += res.payoff;
    }
    trace.retained.push_back(retained);
    trace.clicks.push_back(clicks);
    trace.checksums.push_back(h);
  }
  return trace;
}

// ---------------------------------------------------------------------------
// Tuning
// ---------------------------------------------------------------------------

struct TuneResult {
  ParamPoint best;
  std::size_t best_index = 0;
  std::vector<double> scores;               // per grid point: final cum regret, or -CTR
  std::unique_ptr<Policy> best_policy;      // end-of-tuning state, for carry mode
};

/// Runs every grid point over rounds 1..t0 of the paired stream and keeps
/// the cumulative-regret minimizer (ties: first point in declared order).
/// `need_state` skips the run for single-point grids whose end state will
/// be discarded anyway.
template <typename Env>
TuneResult tune_policy(const Env& env, const PolicySpec& spec, const PolicyFactory& factory,
                       long t0, bool need_state = true) {
  const auto grid = expand_grid(spec);
  TuneResult result;
  result.best = grid.front();
  if (t0 <= 0 || grid.size() == 1) {
    result.best_policy = factory.make(spec, result.best);
    if (t0 > 0 && need_state) run_regret_phase(env, *result.best_policy, 1, t0);
    return result;
  }
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto policy = factory.make(spec, grid[g]);
    const RegretTrace trace = run_regret_phase(env, *policy, 1, t0);
    const double score = trace.cum_regret.back();
    result.scores.push_back(score);
    if (score < best_score) {
      best_score = score;
      result.best = grid[g];
      result.best_index = g;
      result.best_policy = std::move(policy);
    }
  }
  return result;
}

/// Replay tuning maximizes CTR over retained records.
inline TuneResult tune_policy_replay(const ReplayEnv& env, const PolicySpec& spec,
                                     const PolicyFactory& factory, long t0,
                                     bool need_state = true) {
  const auto grid = expand_grid(spec);
  TuneResult result;
  result.best = grid.front();
  if (t0 <= 0 || grid.size() == 1) {
    result.best_policy = factory.make(spec, result.best);
    if (t0 > 0 && need_state) run_replay_phase(env, *result.best_policy, 1, t0);
    return result;
  }
  double best_score = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < grid.size(); ++g) {
    auto policy = factory.make(spec, grid[g]);
    const ReplayTrace trace = run_replay_phase(env, *policy, 1, t0);
    const double ctr =
        trace.retained.back() > 0
            ? trace.clicks.back() / static_cast<double>(trace.retained.back())
            : 0.0;
    const double score = -ctr;
    result.scores.push_back(score);
    if (score < best_score) {
      best_score = score;
      result.best = grid[g];
      result.best_index = g;
      result.best_policy = std::move(policy);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Metrics emission
// ---------------------------------------------------------------------------

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct MetricsTable {
  std::vector<std::string> columns;          // excluding round and env_checksum
  std::vector<std::uint64_t> checksums;      // per round
  std::vector<std::vector<double>> values;   // [round][column]
  long first_round = 1;

  void write_csv(const std::string& path, bool with_checksum = true) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write metrics file: " + path);
    out << "round";
    if (with_checksum) out << ",env_checksum";
    for (const auto& c : columns) out << ',' << c;
    out << '\n';
    for (std::size_t i = 0; i < values.size(); ++i) {
      out << (first_round + static_cast<long>(i));
      if (with_checksum) out << ',' << checksums[i];
      for (double v : values[i]) out << ',' << fmt_double(v);
      out << '\n';
    }
  }
};

// ---------------------------------------------------------------------------
// Full experiment pipeline
// ---------------------------------------------------------------------------

struct RunOutputs {
  std::vector<std::string> seed_csvs;
  std::string mean_csv;
};

namespace detail {

/// Ensures RAN participates whenever the regret-ratio metric is emitted.
inline std::vector<PolicySpec> with_ran(std::vector<PolicySpec> specs) {
  for (const auto& s : specs)
    if (s.name == "ran") return specs;
  specs.push_back(PolicySpec{"ran", {}, {}});
  return specs;
}

inline void check_paired(const std::vector<std::uint64_t>& reference,
                         const std::vector<std::uint64_t>& other) {
  if (reference != other)
    throw std::logic_error("paired-stream violation: policies saw different rounds");
}

template <typename Env>
MetricsTable regret_seed_table(const ExperimentConfig& cfg, const Env& env, std::uint64_t seed,
                               std::ostream* tune_report) {
  const auto specs = with_ran(cfg.policies);
  const PolicyFactory factory(cfg, env_traits(env), seed);

  std::vector<std::unique_ptr<Policy>> policies;
  long clock_offset = 0;
  for (const auto& spec : specs) {
    TuneResult tuned = tune_policy(env, spec, factory, cfg.t0, cfg.carry_tuning_state);
    if (tune_report != nullptr) {
      *tune_report << "seed " << seed << " " << spec.name << ": alpha=" << tuned.best.alpha;
      if (policy_uses_alpha2(spec.name)) *tune_report << " alpha2=" << tuned.best.alpha2;
      *tune_report << '\n';
    }
    if (cfg.carry_tuning_state) {
      policies.push_back(std::move(tuned.best_policy));
      clock_offset = cfg.t0;
    } else {
      policies.push_back(factory.make(spec, tuned.best));
    }
  }

  std::ofstream event_log;
  ClubEventSink sink;
  if (!cfg.club_event_log.empty()) {
    event_log.open(cfg.club_event_log + "_seed" + std::to_string(seed) + ".csv");
    sink.os = &event_log;
  }

  std::vector<RegretTrace> traces;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const bool is_club = specs[i].name == "club";
    traces.push_back(run_regret_phase(env, *policies[i], cfg.t0 + 1, cfg.T, clock_offset,
                                      is_club ? sink : ClubEventSink{}));
    if (i > 0) check_paired(traces.front().checksums, traces.back().checksums);
  }

  std::size_t ran_index = 0;
  for (std::size_t i = 0; i < specs.size(); ++i)
    if (specs[i].name == "ran") ran_index = i;

  MetricsTable table;
  table.first_round = cfg.t0 + 1;
  table.checksums = traces.front().checksums;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    table.columns.push_back(specs[i].name + "_cum_regret");
    table.columns.push_back(specs[i].name + "_ratio_vs_ran");
    if (specs[i].name == "club") table.columns.push_back("club_components");
  }
  const auto rounds = traces.front().cum_regret.size();
  table.values.assign(rounds, {});
  for (std::size_t r = 0; r < rounds; ++r) {
    auto& row = table.values[r];
    const double ran_cum = traces[ran_index].cum_regret[r];
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const double cum = traces[i].cum_regret[r];
      row.push_back(cum);
      if (i == ran_index) {
        row.push_back(1.0);  // self-ratio by definition
      } else {
        row.push_back(ran_cum > 0.0 ? cum / ran_cum
                                    : std::numeric_limits<double>::quiet_NaN());
      }
      if (specs[i].name == "club") row.push_back(static_cast<double>(traces[i].components[r]));
    }
  }
  return table;
}

inline MetricsTable replay_seed_table(const ExperimentConfig& cfg, const ReplayEnv& env,
                                      std::uint64_t seed, std::ostream* tune_report) {
  const long t_max = std::min<long>(cfg.T, env.size());
  if (cfg.t0 >= t_max) throw std::runtime_error("replay log shorter than tuning horizon");
  const PolicyFactory factory(cfg, env_traits(env), seed);

  std::vector<std::unique_ptr<Policy>> policies;
  for (const auto& spec : cfg.policies) {
    TuneResult tuned = tune_policy_replay(env, spec, factory, cfg.t0, cfg.carry_tuning_state);
    if (tune_report != nullptr) {
      *tune_report << "seed " << seed << " " << spec.name << ": alpha=" << tuned.best.alpha
                   << '\n';
    }
    policies.push_back(cfg.carry_tuning_state ? std::move(tuned.best_policy)
                                              : factory.make(spec, tuned.best));
  }

  std::vector<ReplayTrace> traces;
  for (std::size_t i = 0; i < policies.size(); ++i) {
    traces.push_back(run_replay_phase(env, *policies[i], cfg.t0 + 1, t_max));
    if (i > 0) check_paired(traces.front().checksums, traces.back().checksums);
  }

  MetricsTable table;
  table.first_round = cfg.t0 + 1;
  table.checksums = traces.front().checksums;
  for (const auto& spec : cfg.policies) {
    table.columns.push_back(spec.name + "_retained");
    table.columns.push_back(spec.name + "_clicks");
    table.columns.push_back(spec.name + "_ctr");
  }
  const auto rows = traces.front().retained.size();
  table.values.assign(rows, {});
  for (std::size_t r = 0; r < rows; ++r) {
    auto& row = table.values[r];
    for (const auto& trace : traces) {
      const double retained = static_cast<double>(trace.retained[r]);
      row.push_back(retained);
      row.push_back(trace.clicks[r]);
      row.push_back(retained > 0.0 ? trace.clicks[r] / retained
                                   : std::numeric_limits<double>::quiet_NaN());
    }
  }
  return table;
}

inline MetricsTable mean_table(const std::vector<MetricsTable>& tables) {
  MetricsTable mean;
  mean.columns = tables.front().columns;
  mean.first_round = tables.front().first_round;
  const auto rows = tables.front().values.size();
  const auto cols = mean.columns.size();
  mean.values.assign(rows, std::vector<double>(cols, 0.0));
  for (const auto& t : tables)
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) mean.values[r][c] += t.values[r][c];
  for (auto& row : mean.values)
    for (double& v : row) v /= static_cast<double>(tables.size());
  return mean;
}

}  // namespace detail

/// Runs the configured experiment: per seed, tune every policy on rounds
/// 1..t0 of the paired stream, then evaluate rounds t0+1..T, writing one
/// metrics CSV per seed plus a mean-over-seeds CSV (without the checksum
/// column, which is seed-specific).
inline RunOutputs run_experiment(const ExperimentConfig& cfg, std::ostream* tune_report = nullptr) {
  std::filesystem::create_directories(cfg.out_dir);
  std::vector<MetricsTable> tables;

  if (cfg.env.kind == "synthetic") {
    std::optional<TrueWorld> fixed_world;
    if (!cfg.env.world_file.empty()) fixed_world = load_world_json(cfg.env.world_file);
    SyntheticConfig scfg = cfg.env.synthetic;
    scfg.T = cfg.T;
    for (auto seed : cfg.seeds) {
      const SyntheticEnv env = fixed_world ? SyntheticEnv(scfg, *fixed_world, seed)
                                           : SyntheticEnv(scfg, seed);
      tables.push_back(detail::regret_seed_table(cfg, env, seed, tune_report));
    }
  } else if (cfg.env.kind == "dataset") {
    const ItemCatalog catalog = load_items_csv(cfg.env.items_file);
    const auto interactions = load_interactions_csv(cfg.env.interactions_file);
    for (auto seed : cfg.seeds) {
      const DatasetEnv env(catalog, interactions, cfg.env.dataset_c, seed);
      tables.push_back(detail::regret_seed_table(cfg, env, seed, tune_report));
    }
  } else if (cfg.env.kind == "replay") {
    const ReplayEnv env = ReplayEnv::from_csv(cfg.env.log_file);
    for (auto seed : cfg.seeds) {
      tables.push_back(detail::replay_seed_table(cfg, env, seed, tune_report));
    }
  } else {
    throw std::runtime_error("unknown environment kind: " + cfg.env.kind);
  }

  RunOutputs out;
  for (std::size_t i = 0; i < cfg.seeds.size(); ++i) {
    const std::string path =
        cfg.out_dir + "/metrics_seed" + std::to_string(cfg.seeds[i]) + ".csv";
    tables[i].write_csv(path);
    out.seed_csvs.push_back(path);
  }
  out.mean_csv = cfg.out_dir + "/metrics_mean.csv";
  detail::mean_table(tables).write_csv(out.mean_csv, /*with_checksum=*/false);
  return out;
}

/// Tuning phase only: prints the selected grid point per (seed, policy).
inline void tune_only(const ExperimentConfig& cfg, std::ostream& os) {
  auto report = [&](auto&& make_env) {
    for (auto seed : cfg.seeds) {
      const auto env = make_env(seed);
      const PolicyFactory factory(cfg, env_traits(env), seed);
      for (const auto& spec : cfg.policies) {
        TuneResult tuned;
        if constexpr (std::is_same_v<std::decay_t<decltype(env)>, ReplayEnv>) {
          tuned = tune_policy_replay(env, spec, factory, cfg.t0, false);
        } else {
          tuned = tune_policy(env, spec, factory, cfg.t0, false);
        }
        os << "seed " << seed << " " << spec.name << ": alpha=" << tuned.best.alpha;
        if (policy_uses_alpha2(spec.name)) os << " alpha2=" << tuned.best.alpha2;
        os << '\n';
      }
    }
  };

  if (cfg.env.kind == "synthetic") {
    std::optional<TrueWorld> fixed_world;
    if (!cfg.env.world_file.empty()) fixed_world = load_world_json(cfg.env.world_file);
    SyntheticConfig scfg = cfg.env.synthetic;
    scfg.T = cfg.T;
    report([&](std::uint64_t seed) {
      return fixed_world ? SyntheticEnv(scfg, *fixed_world, seed) : SyntheticEnv(scfg, seed);
    });
  } else if (cfg.env.kind == "dataset") {
    const ItemCatalog catalog = load_items_csv(cfg.env.items_file);
    const auto interactions = load_interactions_csv(cfg.env.interactions_file);
    report([&](std::uint64_t seed) {
      return DatasetEnv(catalog, interactions, cfg.env.dataset_c, seed);
    });
  } else if (cfg.env.kind == "replay") {
    const ReplayEnv env = ReplayEnv::from_csv(cfg.env.log_file);
    report([&](std::uint64_t) { return env; });
  } else {
    throw std::runtime_error("unknown environment kind: " + cfg.env.kind);
  }
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

struct Summary {
  std::vector<std::string> metrics;
  std::vector<double> mean;
  std::vector<double> stddev;
};

/// Final-round metrics per policy, mean and standard deviation over the
/// given per-seed CSV files.
inline Summary summarize_files(const std::vector<std::string>& paths, std::ostream& os,
                               const std::string& out_csv = "") {
  if (paths.empty()) throw std::invalid_argument("summarize: no input files");
  std::vector<std::string> columns;
  std::vector<std::vector<double>> finals;  // per file, per metric column
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metrics file: " + path);
    std::string header, line, last;
    if (!std::getline(in, header)) throw std::runtime_error("empty metrics file: " + path);
    while (std::getline(in, line))
      if (!line.empty()) last = line;
    if (last.empty()) throw std::runtime_error("metrics file has no data rows: " + path);
    auto cols = detail::split(header, ',');
    auto vals = detail::split(last, ',');
    if (cols.size() != vals.size())
      throw std::runtime_error("inconsistent metrics schema in " + path);
    std::vector<std::string> metric_cols;
    std::vector<double> metric_vals;
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] == "round" || cols[i] == "env_checksum") continue;
      metric_cols.push_back(cols[i]);
      metric_vals.push_back(detail::parse_double(vals[i], "metric value"));
    }
    if (columns.empty()) {
      columns = metric_cols;
    } else if (columns != metric_cols) {
      throw std::runtime_error("metrics files have inconsistent schemas");
    }
    finals.push_back(std::move(metric_vals));
  }

  Summary s;
  s.metrics = columns;
  const double n = static_cast<double>(finals.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    double m = 0.0;
    for (const auto& f : finals) m += f[c];
    m /= n;
    double var = 0.0;
    for (const auto& f : finals) var += (f[c] - m) * (f[c] - m);
    var /= n;
    s.mean.push_back(m);
    s.stddev.push_back(std::sqrt(var));
  }

  os << "metric,mean,std\n";
  for (std::size_t c = 0; c < columns.size(); ++c)
    os << columns[c] << ',' << fmt_double(s.mean[c]) << ',' << fmt_double(s.stddev[c]) << '\n';
  if (!out_csv.empty()) {
    std::ofstream out(out_csv, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write summary file: " + out_csv);
    out << "metric,mean,std\n";
    for (std::size_t c = 0; c < columns.size(); ++c)
      out << columns[c] << ',' << fmt_double(s.mean[c]) << ',' << fmt_double(s.stddev[c]) << '\n';
  }
  return s;
}

}  // namespace club
