#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "club/linalg.hpp"

namespace club {

/// Rank-one updates drift; re-invert from the accumulated matrix this often.
inline constexpr long kReinvertPeriod = 1000;

struct AlgoParams {
  double alpha = 1.0;   // exploration factor on the arm-selection bound
  double alpha2 = 1.0;  // edge-deletion factor; +inf means never delete

  static constexpr double never_delete() { return std::numeric_limits<double>::infinity(); }
};

/// Inputs to the theoretical confidence bounds. `gamma` and `m_true` are
/// analysis-side quantities (unknown to the algorithm in practice) exposed
/// for instrumentation and for the cluster-scope deletion radius.
struct TheoreticalParams {
  double sigma = 0.1;   // noise standard-deviation bound
  double delta = 0.1;   // confidence level, in (0,1)
  double lambda = 0.1;  // smallest eigenvalue of the context covariance
  double gamma = 0.0;   // cluster separation (analysis only)
  int m_true = 1;       // true number of clusters (analysis only)
  int n_users = 1;
  int dim = 1;
  int c_max = 10;       // bound on candidate-set size

  /// Theorem-mode construction: the confidence level is divided by 10.5
  /// once, here, so the bound formulas below always take the final delta.
  static TheoreticalParams for_theorem(double sigma, double delta, double lambda, double gamma,
                                       int m_true, int n_users, int dim, int c_max) {
    return TheoreticalParams{sigma, delta / 10.5, lambda, gamma, m_true, n_users, dim, c_max};
  }
};

namespace detail {

/// Shared least-squares update: M += x x^T, b += payoff * x, inverse and
/// log-determinant maintained incrementally and re-derived from M every
/// kReinvertPeriod updates (or immediately on numeric failure).
/// `update_count` is the count including this update.
inline void lsq_observe(Mat& M, Mat& M_inv, Vec& b, Vec& w, double& log_det, long update_count,
                        const Vec& x, double payoff) {
  M.noalias() += x * x.transpose();
  b += payoff * x;
  if (update_count % kReinvertPeriod == 0) {
    std::tie(M_inv, log_det) = invert_pd(M);
  } else {
    try {
      log_det = logdet_update(log_det, M_inv, x);
      M_inv = sm_update(M_inv, x);
    } catch (const NumericError&) {
      std::tie(M_inv, log_det) = invert_pd(M);
    }
  }
  w.noalias() = M_inv * b;
}

}  // namespace detail

/// Per-user least-squares estimator: correlation matrix (with maintained
/// inverse), payoff-weighted context sum, weight vector, and serve count.
struct NodeState {
  Mat M;
  Mat M_inv;
  Vec b;
  Vec w;
  double log_det = 0.0;
  long serve_count = 0;

  explicit NodeState(int d)
      : M(Mat::Identity(d, d)), M_inv(Mat::Identity(d, d)), b(Vec::Zero(d)), w(Vec::Zero(d)) {}

  int dim() const { return static_cast<int>(b.size()); }

  void observe(const Vec& x, double payoff) {
    ++serve_count;
    detail::lsq_observe(M, M_inv, b, w, log_det, serve_count, x, payoff);
  }
};

/// Aggregate estimator over one connected component, pooled as if all
/// member users were collapsed into a single one.
struct ClusterState {
  std::vector<int> members;  // sorted user indices
  Mat M;
  Mat M_inv;
  Vec b;
  Vec w;
  double log_det = 0.0;
  long total_serves = 0;

  explicit ClusterState(int d)
      : M(Mat::Identity(d, d)), M_inv(Mat::Identity(d, d)), b(Vec::Zero(d)), w(Vec::Zero(d)) {}

  int dim() const { return static_cast<int>(b.size()); }

  /// Incremental serve update; must equal a full rebuild from member nodes
  /// within numeric tolerance (the rebuild path is the oracle for this).
  void observe(const Vec& x, double payoff) {
    ++total_serves;
    detail::lsq_observe(M, M_inv, b, w, log_det, total_serves, x, payoff);
  }
};

/// Builds a cluster aggregate from scratch: M-bar = I + sum(M_i - I) over
/// the members, inverted directly rather than via the rank-one chain.
inline ClusterState cluster_from_nodes(std::span<const NodeState> nodes,
                                       std::span<const int> members) {
  if (members.empty()) throw std::invalid_argument("cluster_from_nodes: members must be nonempty");
  const int d = nodes[static_cast<std::size_t>(members[0])].dim();
  ClusterState out(d);
  out.members.assign(members.begin(), members.end());
  std::sort(out.members.begin(), out.members.end());
  Mat Mbar = Mat::Identity(d, d);
  for (int i : out.members) {
    const NodeState& n = nodes[static_cast<std::size_t>(i)];
    Mbar += n.M - Mat::Identity(d, d);
    out.b += n.b;
    out.total_serves += n.serve_count;
  }
  out.M = Mbar;
  std::tie(out.M_inv, out.log_det) = invert_pd(Mbar);
  // min eigenvalue >= 1, so the trace bounds the condition number from above
  if (Mbar.trace() > 1e12) {
    Eigen::SelfAdjointEigenSolver<Mat> es(Mbar);
    const double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
    if (cond > 1e12) throw NumericError("cluster aggregate is ill-conditioned");
  }
  out.w.noalias() = out.M_inv * out.b;
  return out;
}

/// Arm-selection confidence width: alpha * sqrt(x^T M_inv x * ln(t+1)),
/// with t the 1-based global round index.
inline double arm_confidence_width(const Mat& M_inv, const Vec& x, long t, double alpha) {
  return alpha * std::sqrt(x.dot(M_inv * x) * std::log(static_cast<double>(t) + 1.0));
}

inline double arm_confidence_width(const ClusterState& cluster, const Vec& x, long t,
                                   double alpha) {
  return arm_confidence_width(cluster.M_inv, x, t, alpha);
}

/// Per-node deletion radius: alpha2 * sqrt((1 + ln(1+T)) / (1+T)), where T
/// is the node's serve count. The +inf sentinel disables deletion.
inline double node_confidence_radius(long serve_count, double alpha2) {
  if (std::isinf(alpha2)) return alpha2;
  const double u = 1.0 + static_cast<double>(serve_count);
  return alpha2 * std::sqrt((1.0 + std::log(u)) / u);
}

inline double node_confidence_radius(const NodeState& node, double alpha2) {
  return node_confidence_radius(node.serve_count, alpha2);
}

/// Eigenvalue-growth floor: (lambda*T/4 - 8 ln((T+3)/delta)
/// - 2 sqrt(T ln((T+3)/delta)))_+ . Controls how fast the theoretical
/// deletion radius shrinks with serve count.
inline double eigenvalue_growth(long serves, double delta, double lambda) {
  const double T = static_cast<double>(serves);
  const double logterm = std::log((T + 3.0) / delta);
  const double v = lambda * T / 4.0 - 8.0 * logterm - 2.0 * std::sqrt(T * logterm);
  return v > 0.0 ? v : 0.0;
}

/// Theoretical arm-selection bound:
///   sqrt(x^T M_inv x) * (sigma * sqrt(2 ln(|M| / (delta/2))) + 1)
/// evaluated from the maintained log-determinant. Works for cluster
/// aggregates and, via the node overload, for single-user estimators
/// (a one-member cluster has exactly the node's matrices).
inline double theoretical_arm_width(const Mat& M_inv, double log_det, const Vec& x, double sigma,
                                    double delta) {
  const double radius = sigma * std::sqrt(2.0 * (log_det + std::log(2.0 / delta))) + 1.0;
  return std::sqrt(x.dot(M_inv * x)) * radius;
}

inline double theoretical_arm_width(const ClusterState& cluster, const Vec& x,
                                    const TheoreticalParams& p) {
  return theoretical_arm_width(cluster.M_inv, cluster.log_det, x, p.sigma, p.delta);
}

inline double theoretical_arm_width(const NodeState& node, const Vec& x,
                                    const TheoreticalParams& p) {
  return theoretical_arm_width(node.M_inv, node.log_det, x, p.sigma, p.delta);
}

enum class RadiusScope { kNode, kCluster };

/// Theoretical deletion radius:
///   (sigma sqrt(2 d ln t + 2 ln(2/delta)) + 1) / sqrt(1 + A(T, delta'))
/// where delta' = delta/(2 n d) at node scope and delta/(2^(m+1) d) at
/// cluster scope (the latter needs the true m, so it is analysis-only).
inline double theoretical_node_radius(long serves, long t, const TheoreticalParams& p,
                                      RadiusScope scope = RadiusScope::kNode) {
  const double d = static_cast<double>(p.dim);
  const double scoped_delta = scope == RadiusScope::kNode
                                  ? p.delta / (2.0 * p.n_users * d)
                                  : p.delta / (std::ldexp(1.0, p.m_true + 1) * d);
  const double growth = eigenvalue_growth(serves, scoped_delta, p.lambda);
  const double num = p.sigma * std::sqrt(2.0 * d * std::log(static_cast<double>(t)) +
                                         2.0 * std::log(2.0 / p.delta)) +
                     1.0;
  return num / std::sqrt(1.0 + growth);
}

/// Index of the maximum of w.x_k + cb_k; ties go to the lowest index.
inline int select_arm(const Vec& w, std::span<const Vec> contexts, std::span<const double> cb) {
  if (contexts.empty()) throw std::invalid_argument("select_arm: empty context set");
  if (cb.size() != contexts.size())
    throw std::invalid_argument("select_arm: cb_values size mismatch");
  int best = 0;
  double best_score = w.dot(contexts[0]) + cb[0];
  for (std::size_t k = 1; k < contexts.size(); ++k) {
    const double score = w.dot(contexts[k]) + cb[k];
    if (score > best_score) {
      best_score = score;
      best = static_cast<int>(k);
    }
  }
  return best;
}

}  // namespace club
