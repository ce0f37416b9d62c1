#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "club/rng.hpp"

namespace club {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Rank-one update of a maintained inverse: given Minv = M^-1 with M
/// positive definite, returns (M + x x^T)^-1 via
///   Minv - (Minv x)(Minv x)^T / (1 + x^T Minv x).
/// The result is symmetrized to keep roundoff from accumulating skew.
/// Throws NumericError if the result is non-finite, which signals drift;
/// callers recover by re-inverting from the accumulated matrix.
inline Mat sm_update(const Mat& Minv, const Vec& x) {
  const Vec mx = Minv * x;
  const double denom = 1.0 + x.dot(mx);
  Mat out = Minv - (mx * mx.transpose()) / denom;
  out = 0.5 * (out + out.transpose().eval());
  if (!out.allFinite()) throw NumericError("rank-one inverse update produced non-finite entries");
  return out;
}

/// Log-determinant companion to sm_update: given logdet = ln|M| and
/// Minv = M^-1, returns ln|M + x x^T| = logdet + ln(1 + x^T Minv x).
inline double logdet_update(double logdet, const Mat& Minv, const Vec& x) {
  return logdet + std::log(1.0 + x.dot(Minv * x));
}

/// Uniform draw from the unit sphere in R^d: normalized standard Gaussian
/// vector, redrawn in the (measure-zero) degenerate case.
inline Vec sample_unit_sphere(int d, RngStream& rng) {
  if (d < 1) throw std::invalid_argument("sample_unit_sphere: d must be >= 1");
  Vec v(d);
  double norm = 0.0;
  do {
    for (int i = 0; i < d; ++i) v[i] = rng.gaussian();
    norm = v.norm();
  } while (norm == 0.0);
  return v / norm;
}

/// Direct inverse and log-determinant of a positive-definite matrix, used
/// for aggregate rebuilds and for periodic re-inversion of maintained
/// inverses. Returns {inverse, logdet}.
inline std::pair<Mat, double> invert_pd(const Mat& M) {
  Eigen::LLT<Mat> llt(M);
  if (llt.info() != Eigen::Success)
    throw NumericError("matrix expected to be positive definite is not");
  Mat inv = llt.solve(Mat::Identity(M.rows(), M.cols()));
  inv = 0.5 * (inv + inv.transpose().eval());
  double logdet = 0.0;
  const auto& L = llt.matrixLLT();
  for (Eigen::Index i = 0; i < M.rows(); ++i) logdet += 2.0 * std::log(L(i, i));
  return {std::move(inv), logdet};
}

}  // namespace club
