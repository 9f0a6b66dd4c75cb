#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "vibrec/adagrad.hpp"

using namespace vibrec;

TEST_SUITE_BEGIN("adagrad");

TEST_CASE("init: accumulators start at zero and mirror the registered shape") {
  AdagradState opt(0.05);
  const int blk = opt.add_block(943, 150);
  CHECK(opt.accumulator(blk).rows() == 943);
  CHECK(opt.accumulator(blk).cols() == 150);
  CHECK(opt.accumulator(blk).isZero(0.0));
  CHECK(opt.epsilon() == 1e-8);

  CHECK_THROWS_AS(AdagradState(0.0), std::invalid_argument);
  CHECK_THROWS_AS(AdagradState(-0.1), std::invalid_argument);
}

TEST_CASE("hand-traced steps: acc 0 -> 4 -> 8") {
  AdagradState opt(0.05, 0.0);
  const int blk = opt.add_block(1, 1);
  MatrixRM theta = MatrixRM::Zero(1, 1);
  MatrixRM grad(1, 1);
  grad(0, 0) = 2.0;

  opt.step_dense(blk, theta, grad);
  CHECK(opt.accumulator(blk)(0, 0) == 4.0);
  CHECK(theta(0, 0) == doctest::Approx(-0.05).epsilon(1e-12));  // 0.05 * 2 / sqrt(4)

  opt.step_dense(blk, theta, grad);
  CHECK(opt.accumulator(blk)(0, 0) == 8.0);
  // second step magnitude 0.1 / sqrt(8)
  CHECK(theta(0, 0) == doctest::Approx(-0.05 - 0.035355339059327376).epsilon(1e-12));
}

TEST_CASE("zero gradient leaves parameters and accumulators unchanged") {
  AdagradState opt(0.05);
  const int blk = opt.add_block(2, 3);
  MatrixRM theta(2, 3);
  theta << 1, 2, 3, 4, 5, 6;
  MatrixRM before = theta;
  MatrixRM grad = MatrixRM::Zero(2, 3);
  grad(0, 1) = 1.0;  // only one coordinate moves

  opt.step_dense(blk, theta, grad);
  CHECK(theta(0, 0) == before(0, 0));
  CHECK(theta(0, 1) != before(0, 1));
  CHECK(theta(1, 2) == before(1, 2));
  CHECK(opt.accumulator(blk)(0, 0) == 0.0);
  CHECK(opt.accumulator(blk)(0, 1) == 1.0);
}

TEST_CASE("row-sparse steps leave unlisted rows fully untouched") {
  AdagradState opt(0.1);
  const int blk = opt.add_block(4, 2);
  MatrixRM theta = MatrixRM::Ones(4, 2);
  MatrixRM grad = MatrixRM::Ones(4, 2);  // nonzero everywhere, but only row 2 listed
  const std::int32_t rows[] = {2};
  opt.step_rows(blk, rows, theta, grad);
  for (int r = 0; r < 4; ++r) {
    if (r == 2) {
      CHECK(theta(r, 0) != 1.0);
      CHECK(opt.accumulator(blk)(r, 0) == 1.0);
    } else {
      CHECK(theta(r, 0) == 1.0);
      CHECK(opt.accumulator(blk)(r, 0) == 0.0);
    }
  }
}

TEST_CASE("property: step magnitude for a fixed gradient never increases") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> gdist(-3.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double g = gdist(rng);
    if (g == 0.0) continue;
    AdagradState opt(0.05);
    const int blk = opt.add_block(1, 1);
    MatrixRM theta = MatrixRM::Zero(1, 1);
    MatrixRM grad(1, 1);
    grad(0, 0) = g;
    double prev_step = 1e300;
    for (int s = 0; s < 10; ++s) {
      const double before = theta(0, 0);
      opt.step_dense(blk, theta, grad);
      const double step = std::abs(theta(0, 0) - before);
      CHECK(step <= prev_step + 1e-15);
      prev_step = step;
    }
  }
}

TEST_CASE("property: coordinate updates are permutation-equivariant") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> dist(0.0, 1.0);
  const Eigen::Index n = 6;
  VectorXd theta(n), grad(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    theta(i) = dist(rng);
    grad(i) = dist(rng);
  }
  std::vector<int> perm{3, 0, 5, 1, 4, 2};

  AdagradState opt_a(0.05);
  const int blk_a = opt_a.add_block(n, 1);
  VectorXd ta = theta;
  opt_a.step_dense(blk_a, ta, grad);

  VectorXd theta_p(n), grad_p(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    theta_p(i) = theta(perm[static_cast<std::size_t>(i)]);
    grad_p(i) = grad(perm[static_cast<std::size_t>(i)]);
  }
  AdagradState opt_b(0.05);
  const int blk_b = opt_b.add_block(n, 1);
  opt_b.step_dense(blk_b, theta_p, grad_p);

  for (Eigen::Index i = 0; i < n; ++i) {
    CHECK(theta_p(i) == ta(perm[static_cast<std::size_t>(i)]));
  }
}

TEST_CASE("non-finite gradients are rejected with the offending coordinate") {
  AdagradState opt(0.05);
  const int blk = opt.add_block(3, 2);
  MatrixRM theta = MatrixRM::Zero(3, 2);
  MatrixRM grad = MatrixRM::Zero(3, 2);
  grad(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(opt.step_dense(blk, theta, grad), doctest::Contains("row 1, col 1"),
                       std::runtime_error);

  MatrixRM wrong_shape = MatrixRM::Zero(2, 2);
  CHECK_THROWS_AS(opt.step_dense(blk, theta, wrong_shape), std::invalid_argument);
}

TEST_SUITE_END();
