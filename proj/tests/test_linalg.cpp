#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "club/linalg.hpp"
#include "club/rng.hpp"

using club::Mat;
using club::RngStream;
using club::Vec;

namespace {

// Independent determinant oracle: cofactor expansion, usable up to d ~ 6.
double cofactor_det(const Mat& a) {
  const int n = static_cast<int>(a.rows());
  if (n == 1) return a(0, 0);
  double det = 0.0;
  double sign = 1.0;
  for (int col = 0; col < n; ++col) {
    Mat minor(n - 1, n - 1);
    for (int r = 1; r < n; ++r) {
      int mc = 0;
      for (int c = 0; c < n; ++c) {
        if (c == col) continue;
        minor(r - 1, mc++) = a(r, c);
      }
    }
    det += sign * a(0, col) * cofactor_det(minor);
    sign = -sign;
  }
  return det;
}

}  // namespace

TEST_CASE("sm_update inflates a single axis") {
  Vec x(2);
  x << 1, 0;
  const Mat out = club::sm_update(Mat::Identity(2, 2), x);
  CHECK(out(0, 0) == Catch::Approx(0.5));
  CHECK(out(0, 1) == Catch::Approx(0.0).margin(1e-15));
  CHECK(out(1, 1) == Catch::Approx(1.0));
}

TEST_CASE("sm_update matches direct inversion on a diagonal direction") {
  Vec x(2);
  x << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const Mat out = club::sm_update(Mat::Identity(2, 2), x);
  CHECK(out(0, 0) == Catch::Approx(0.75));
  CHECK(out(0, 1) == Catch::Approx(-0.25));
  CHECK(out(1, 0) == Catch::Approx(-0.25));
  CHECK(out(1, 1) == Catch::Approx(0.75));
  // defining property: result * (I + x x^T) = I
  const Mat prod = out * (Mat::Identity(2, 2) + x * x.transpose());
  CHECK((prod - Mat::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sm_update chain stays the true inverse and symmetric") {
  RngStream rng(7);
  for (int d : {2, 5, 10}) {
    Mat M = Mat::Identity(d, d);
    Mat Minv = Mat::Identity(d, d);
    for (int k = 0; k < 50; ++k) {
      const Vec x = club::sample_unit_sphere(d, rng);
      M += x * x.transpose();
      Minv = club::sm_update(Minv, x);
      CHECK((Minv - Minv.transpose()).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK((Minv * M - Mat::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-8);
    }
  }
}

TEST_CASE("logdet_update on spot values") {
  Vec e1 = Vec::Zero(3);
  e1[0] = 1;
  CHECK(club::logdet_update(0.0, Mat::Identity(3, 3), e1) == Catch::Approx(std::log(2.0)));
  CHECK(club::logdet_update(0.0, Mat::Identity(3, 3), Vec::Zero(3)) == 0.0);

  // I3 updated with e1 then e2 has determinant diag(2,2,1) = 4
  Mat Minv = club::sm_update(Mat::Identity(3, 3), e1);
  double logdet = club::logdet_update(0.0, Mat::Identity(3, 3), e1);
  Vec e2 = Vec::Zero(3);
  e2[1] = 1;
  logdet = club::logdet_update(logdet, Minv, e2);
  CHECK(logdet == Catch::Approx(std::log(4.0)));
}

TEST_CASE("logdet_update tracks a cofactor-expansion determinant") {
  RngStream rng(11);
  for (int d : {2, 4, 6}) {
    Mat M = Mat::Identity(d, d);
    Mat Minv = Mat::Identity(d, d);
    double logdet = 0.0;
    for (int k = 0; k < 20; ++k) {
      const Vec x = club::sample_unit_sphere(d, rng);
      logdet = club::logdet_update(logdet, Minv, x);
      Minv = club::sm_update(Minv, x);
      M += x * x.transpose();
      REQUIRE(logdet == Catch::Approx(std::log(cofactor_det(M))).epsilon(0).margin(1e-8));
    }
  }
}

TEST_CASE("sample_unit_sphere contract") {
  RngStream rng(3);
  for (int i = 0; i < 20; ++i) {
    const Vec v = club::sample_unit_sphere(1, rng);
    CHECK((v[0] == 1.0 || v[0] == -1.0));
  }
  for (int i = 0; i < 50; ++i) {
    CHECK(std::abs(club::sample_unit_sphere(25, rng).norm() - 1.0) < 1e-12);
  }
}

TEST_CASE("sample_unit_sphere is coordinate-symmetric") {
  RngStream rng(5);
  Vec mean = Vec::Zero(3);
  const int samples = 100000;
  for (int i = 0; i < samples; ++i) mean += club::sample_unit_sphere(3, rng);
  mean /= samples;
  for (int k = 0; k < 3; ++k) CHECK(std::abs(mean[k]) < 0.02);
}

TEST_CASE("invert_pd recovers inverse and log-determinant") {
  RngStream rng(13);
  Mat M = Mat::Identity(4, 4);
  for (int k = 0; k < 30; ++k) {
    const Vec x = club::sample_unit_sphere(4, rng);
    M += x * x.transpose();
  }
  const auto [inv, logdet] = club::invert_pd(M);
  CHECK((inv * M - Mat::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(logdet == Catch::Approx(std::log(cofactor_det(M))).epsilon(0).margin(1e-9));
}
