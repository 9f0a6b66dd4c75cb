#include "vibrec/adagrad.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace vibrec {

namespace {

[[noreturn]] void throw_non_finite(int block, Eigen::Index row, Eigen::Index col) {
  throw std::runtime_error("adagrad: non-finite gradient at block " + std::to_string(block) + ", row " +
                           std::to_string(row) + ", col " + std::to_string(col));
}

}  // namespace

AdagradState::AdagradState(double learning_rate, double epsilon) : lr_(learning_rate), eps_(epsilon) {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("adagrad: learning rate must be positive");
  }
  if (!(epsilon >= 0.0)) {
    throw std::invalid_argument("adagrad: epsilon must be nonnegative");
  }
}

int AdagradState::add_block(Eigen::Index rows, Eigen::Index cols) {
  acc_.emplace_back(MatrixRM::Zero(rows, cols));
  return static_cast<int>(acc_.size()) - 1;
}

void AdagradState::check_block(int block, Eigen::Index rows, Eigen::Index cols) const {
  if (block < 0 || static_cast<std::size_t>(block) >= acc_.size()) {
    throw std::invalid_argument("adagrad: unknown block " + std::to_string(block));
  }
  const MatrixRM& a = acc_[static_cast<std::size_t>(block)];
  if (a.rows() != rows || a.cols() != cols) {
    throw std::invalid_argument("adagrad: shape mismatch for block " + std::to_string(block));
  }
}

void AdagradState::step_row_impl(MatrixRM& acc, Eigen::Index row, MatrixRM& params, const MatrixRM& grads,
                                 int block) {
  auto g = grads.row(row).array();
  if (!g.allFinite()) {
    for (Eigen::Index c = 0; c < grads.cols(); ++c) {
      if (!std::isfinite(grads(row, c))) throw_non_finite(block, row, c);
    }
  }
  acc.row(row).array() += g.square();
  params.row(row).array() -= lr_ * g / (acc.row(row).array().sqrt() + eps_);
}

void AdagradState::step_rows(int block, std::span<const std::int32_t> rows, MatrixRM& params,
                             const MatrixRM& grads) {
  check_block(block, params.rows(), params.cols());
  if (grads.rows() != params.rows() || grads.cols() != params.cols()) {
    throw std::invalid_argument("adagrad: gradient shape mismatch for block " + std::to_string(block));
  }
  MatrixRM& acc = acc_[static_cast<std::size_t>(block)];
  for (std::int32_t r : rows) {
    step_row_impl(acc, r, params, grads, block);
  }
}

void AdagradState::step_dense(int block, MatrixRM& params, const MatrixRM& grads) {
  check_block(block, params.rows(), params.cols());
  if (grads.rows() != params.rows() || grads.cols() != params.cols()) {
    throw std::invalid_argument("adagrad: gradient shape mismatch for block " + std::to_string(block));
  }
  MatrixRM& acc = acc_[static_cast<std::size_t>(block)];
  for (Eigen::Index r = 0; r < params.rows(); ++r) {
    step_row_impl(acc, r, params, grads, block);
  }
}

void AdagradState::step_rows(int block, std::span<const std::int32_t> rows, VectorXd& params,
                             const VectorXd& grads) {
  check_block(block, params.size(), 1);
  if (grads.size() != params.size()) {
    throw std::invalid_argument("adagrad: gradient shape mismatch for block " + std::to_string(block));
  }
  MatrixRM& acc = acc_[static_cast<std::size_t>(block)];
  for (std::int32_t r : rows) {
    const double g = grads(r);
    if (!std::isfinite(g)) throw_non_finite(block, r, 0);
    acc(r, 0) += g * g;
    params(r) -= lr_ * g / (std::sqrt(acc(r, 0)) + eps_);
  }
}

void AdagradState::step_dense(int block, VectorXd& params, const VectorXd& grads) {
  check_block(block, params.size(), 1);
  if (grads.size() != params.size()) {
    throw std::invalid_argument("adagrad: gradient shape mismatch for block " + std::to_string(block));
  }
  MatrixRM& acc = acc_[static_cast<std::size_t>(block)];
  for (Eigen::Index r = 0; r < params.size(); ++r) {
    const double g = grads(r);
    if (!std::isfinite(g)) throw_non_finite(block, r, 0);
    acc(r, 0) += g * g;
    params(r) -= lr_ * g / (std::sqrt(acc(r, 0)) + eps_);
  }
}

}  // namespace vibrec
