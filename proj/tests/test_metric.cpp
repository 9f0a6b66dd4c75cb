#include <doctest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "vibrec/metric.hpp"

using namespace vibrec;

TEST_SUITE_BEGIN("metric");

TEST_CASE("distance basics: zero at identity, 3-4-5 triangle") {
  RowVectorXd a(2), b(2);
  a << 1.0, 2.0;
  CHECK(euclidean_distance(a, a, 0.0) == 0.0);

  a << 3.0, 0.0;
  b << 0.0, 4.0;
  CHECK(euclidean_distance(a, b, 0.0) == doctest::Approx(5.0).epsilon(1e-15));

  RowVectorXd c(3);
  c.setZero();
  CHECK_THROWS_AS(euclidean_distance(a, c, 0.0), std::invalid_argument);
}

TEST_CASE("distance matches an elementwise-loop oracle on random 150-dim pairs") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> dist(0.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    RowVectorXd a(150), b(150);
    for (int i = 0; i < 150; ++i) {
      a(i) = dist(rng);
      b(i) = dist(rng);
    }
    double ss = 0.0;
    for (int i = 0; i < 150; ++i) {
      const double d = a(i) - b(i);
      ss += d * d;
    }
    const double oracle = std::sqrt(ss);
    const double got = euclidean_distance(a, b, 0.0);
    CHECK(testsupport::close_rel(got, oracle, 1e-12, 0.0));
  }
}

TEST_CASE("property: symmetry and the triangle inequality at floor zero") {
  std::mt19937_64 rng(77);
  std::normal_distribution<double> dist(0.0, 1.5);
  std::uniform_int_distribution<int> dim(1, 40);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = dim(rng);
    RowVectorXd a(k), b(k), c(k);
    for (int i = 0; i < k; ++i) {
      a(i) = dist(rng);
      b(i) = dist(rng);
      c(i) = dist(rng);
    }
    CHECK(euclidean_distance(a, b, 0.0) == euclidean_distance(b, a, 0.0));
    CHECK(euclidean_distance(a, c, 0.0) <=
          euclidean_distance(a, b, 0.0) + euclidean_distance(b, c, 0.0) + 1e-9);
  }
}

TEST_CASE("positive floor keeps distance strictly positive") {
  RowVectorXd a(4);
  a.setConstant(2.5);
  CHECK(euclidean_distance(a, a, 1e-12) > 0.0);
  CHECK(euclidean_distance(a, a, 1e-12) == doctest::Approx(1e-6).epsilon(1e-9));
}

TEST_CASE("rating conversion and clamp") {
  CHECK(distance_to_rating(0.0, 0.0, 0.0, 0.0, 5.0) == 5.0);
  CHECK(distance_to_rating(4.0, 0.0, 0.0, 3.5, 5.0) == doctest::Approx(4.5));
  CHECK(distance_to_rating(1.5, 0.2, -0.1, 3.5, 5.0) == doctest::Approx(7.1));
  CHECK(clamp_rating(7.1, 1.0, 5.0) == 5.0);
  CHECK(clamp_rating(-2.0, 1.0, 5.0) == 1.0);
  CHECK(clamp_rating(3.3, 1.0, 5.0) == 3.3);
}

TEST_SUITE_END();
