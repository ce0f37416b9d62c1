#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "club/club.hpp"
#include "club/environments.hpp"
#include "club/policies.hpp"

using club::ItemStats;
using club::Round;
using club::RngStream;
using club::SyntheticConfig;
using club::SyntheticEnv;
using club::Vec;

namespace {

SyntheticEnv make_env(int n, int d, int m, double sigma, long T, std::uint64_t seed) {
  SyntheticConfig cfg;
  cfg.n = n;
  cfg.d = d;
  cfg.m = m;
  cfg.sigma = sigma;
  cfg.c = 6;
  cfg.T = T;
  return SyntheticEnv(cfg, seed);
}

void run_paired(const SyntheticEnv& env, club::Policy& a, club::Policy& b, long T) {
  for (long t = 1; t <= T; ++t) {
    const Round r = env.round(t);
    const int ka = a.choose(r, t);
    const int kb = b.choose(r, t);
    REQUIRE(ka == kb);
    const double payoff = env.payoff(t, r, ka);
    a.observe(r, ka, payoff, t);
    b.observe(r, kb, payoff, t);
  }
}

}  // namespace

TEST_CASE("single-user collapse: ONE, IND and CLAIRVOYANT coincide") {
  const SyntheticEnv env = make_env(1, 4, 1, 0.1, 200, 3);
  club::LinUcbOne one(4, 0.5);
  club::LinUcbInd ind(1, 4, 0.5);
  club::Clairvoyant clair(env.world().node_to_cluster, 1, 4, 0.5);
  run_paired(env, one, ind, 200);

  club::LinUcbOne one2(4, 0.5);
  run_paired(env, one2, clair, 200);
}

TEST_CASE("clairvoyant equals LinUCB-ONE on a single-cluster world") {
  const SyntheticEnv env = make_env(12, 4, 1, 0.1, 300, 7);
  club::LinUcbOne one(4, 1.0);
  club::Clairvoyant clair(env.world().node_to_cluster, 1, 4, 1.0);
  run_paired(env, one, clair, 300);
}

TEST_CASE("clairvoyant equals CLUB started from the true partition cliques") {
  const SyntheticEnv env = make_env(10, 3, 3, 0.1, 400, 11);
  const auto& truth = env.world().node_to_cluster;

  std::vector<std::pair<int, int>> edges;
  for (int i = 0; i < 10; ++i)
    for (int l = i + 1; l < 10; ++l)
      if (truth[static_cast<std::size_t>(i)] == truth[static_cast<std::size_t>(l)])
        edges.emplace_back(i, l);
  club::ClubConfig cc;
  cc.params = club::AlgoParams{0.8, club::AlgoParams::never_delete()};
  club::ClubPolicy club_policy(club::ClubModel(10, 3, club::DynGraph::from_edges(10, edges), cc));
  club::Clairvoyant clair(truth, 3, 3, 0.8);
  run_paired(env, club_policy, clair, 400);
}

TEST_CASE("ucb1 choice rule") {
  std::vector<ItemStats> fresh(3);
  CHECK(club::ucb1_choose(fresh, 1, 1.0) == 0);

  std::vector<ItemStats> two(2);
  for (int i = 0; i < 10; ++i) two[0].add(1.0);
  for (int i = 0; i < 10; ++i) two[1].add(0.0);
  CHECK(two[0].mean == Catch::Approx(1.0));
  CHECK(club::ucb1_choose(two, 20, 1.0) == 0);

  // greedy mode ignores counts entirely
  std::vector<ItemStats> greedy(2);
  for (int i = 0; i < 2; ++i) greedy[0].add(0.5);
  for (int i = 0; i < 100; ++i) greedy[1].add(0.4);
  CHECK(club::ucb1_choose(greedy, 1000, 0.0) == 0);

  // once every item is seen, scores are finite and the argmax deterministic
  std::vector<ItemStats> seen(4);
  for (std::size_t k = 0; k < seen.size(); ++k) seen[k].add(0.1 * static_cast<double>(k));
  const int pick = club::ucb1_choose(seen, 50, 1.0);
  CHECK(club::ucb1_choose(seen, 50, 1.0) == pick);
}

TEST_CASE("ucb-v choice rule") {
  std::vector<ItemStats> same(2);
  for (int i = 0; i < 5; ++i) {
    same[0].add(0.5);
    same[1].add(0.5);
  }
  CHECK(club::ucbv_choose(same, 10) == 0);  // identical stats, tie-break

  // equal means, one item with spread payoffs gets the larger bonus
  std::vector<ItemStats> spread(2);
  for (int i = 0; i < 20; ++i) spread[0].add(0.5);
  for (int i = 0; i < 10; ++i) {
    spread[1].add(0.0);
    spread[1].add(1.0);
  }
  CHECK(spread[0].variance() == 0.0);
  CHECK(club::ucbv_choose(spread, 100) == 1);
}

TEST_CASE("welford variance matches the two-pass oracle") {
  RngStream rng(91);
  for (int trial = 0; trial < 20; ++trial) {
    ItemStats stats;
    std::vector<double> xs;
    const int n = 3 + static_cast<int>(rng.uniform_int(0, 200));
    for (int i = 0; i < n; ++i) {
      const double x = rng.uniform(-2.0, 2.0);
      xs.push_back(x);
      stats.add(x);
    }
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= static_cast<double>(n);
    CHECK(stats.variance() == Catch::Approx(var).epsilon(0).margin(1e-10));
  }
}

TEST_CASE("ran policy is uniform and reproducible") {
  club::RanPolicy ran(RngStream(5).derive(0x4a4du));
  Round single;
  single.item_ids = {42};
  CHECK(ran.choose(single, 1) == 0);

  Round ten;
  ten.contexts.assign(10, Vec::Zero(2));
  std::vector<int> counts(10, 0);
  const int draws = 100000;
  club::RanPolicy sampler(RngStream(6).derive(0x4a4du));
  for (int i = 0; i < draws; ++i) ++counts[static_cast<std::size_t>(sampler.choose(ten, 1))];
  const double sigma = std::sqrt(0.1 * 0.9 / draws);
  for (int c : counts) CHECK(std::abs(c / static_cast<double>(draws) - 0.1) < 3.0 * sigma);

  club::RanPolicy a(RngStream(7).derive(0x4a4du));
  club::RanPolicy b(RngStream(7).derive(0x4a4du));
  for (int i = 0; i < 200; ++i) REQUIRE(a.choose(ten, 1) == b.choose(ten, 1));
}

TEST_CASE("IND over disjoint substreams equals independent ONE runs") {
  const int n = 3, d = 4;
  const SyntheticEnv env = make_env(n, d, 2, 0.2, 240, 17);
  club::LinUcbInd ind(n, d, 1.2);
  std::vector<club::LinUcbOne> ones(static_cast<std::size_t>(n), club::LinUcbOne(d, 1.2));
  for (long t = 1; t <= 240; ++t) {
    const Round r = env.round(t);
    const int ki = ind.choose(r, t);
    // the matching ONE run sees only this user's rounds, at the same clock
    const int ko = ones[static_cast<std::size_t>(r.user)].choose(r, t);
    REQUIRE(ki == ko);
    const double payoff = env.payoff(t, r, ki);
    ind.observe(r, ki, payoff, t);
    ones[static_cast<std::size_t>(r.user)].observe(r, ko, payoff, t);
  }
  for (int u = 0; u < n; ++u) {
    CHECK((ind.nodes()[static_cast<std::size_t>(u)].w -
           ones[static_cast<std::size_t>(u)].node().w)
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
  }
}
