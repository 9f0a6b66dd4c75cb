#ifndef VIBREC_ADAGRAD_HPP_
#define VIBREC_ADAGRAD_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "vibrec/common.hpp"

namespace vibrec {

// Per-parameter squared-gradient accumulators. One block per parameter tensor;
// vectors register as n x 1 blocks. Update rule per coordinate with gradient g:
//   acc' = acc + g^2
//   theta' = theta - lr * g / (sqrt(acc') + eps)
// Coordinates with g = 0 keep both theta and acc unchanged. Accumulators are
// nondecreasing over the run. Single-writer: one state per training run.
class AdagradState {
 public:
  AdagradState(double learning_rate, double epsilon = 1e-8);

  int add_block(Eigen::Index rows, Eigen::Index cols);

  // Updates only the listed rows; unlisted rows stay untouched (accumulator
  // included). Rows may repeat in sparse batches only if the caller has
  // already merged their gradients; lists here must be unique.
  void step_rows(int block, std::span<const std::int32_t> rows, MatrixRM& params, const MatrixRM& grads);
  void step_rows(int block, std::span<const std::int32_t> rows, VectorXd& params, const VectorXd& grads);

  void step_dense(int block, MatrixRM& params, const MatrixRM& grads);
  void step_dense(int block, VectorXd& params, const VectorXd& grads);

  const MatrixRM& accumulator(int block) const { return acc_[static_cast<std::size_t>(block)]; }
  double learning_rate() const { return lr_; }
  double epsilon() const { return eps_; }

 private:
  void check_block(int block, Eigen::Index rows, Eigen::Index cols) const;
  void step_row_impl(MatrixRM& acc, Eigen::Index row, MatrixRM& params, const MatrixRM& grads, int block);

  std::vector<MatrixRM> acc_;
  double lr_;
  double eps_;
};

}  // namespace vibrec

#endif  // VIBREC_ADAGRAD_HPP_
