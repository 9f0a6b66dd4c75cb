#ifndef VIBREC_METRIC_HPP_
#define VIBREC_METRIC_HPP_

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "vibrec/common.hpp"

namespace vibrec {

// sqrt(sum_k (a_k - b_k)^2 + floor). A positive floor keeps the value (and the
// gradient of anything divided by it) finite at zero separation.
inline double euclidean_distance(const Eigen::Ref<const RowVectorXd>& a,
                                 const Eigen::Ref<const RowVectorXd>& b, double floor) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("euclidean_distance: length mismatch");
  }
  return std::sqrt((a - b).squaredNorm() + floor);
}

// r_hat = r_max - distance + b_user + b_item + r_global. Shared by VIB-DML and
// MetricF so both predict through the identical code path.
inline double distance_to_rating(double distance, double b_user, double b_item, double r_global,
                                 double r_max) {
  return r_max - distance + b_user + b_item + r_global;
}

inline double clamp_rating(double r, double r_min, double r_max) { return std::clamp(r, r_min, r_max); }

}  // namespace vibrec

#endif  // VIBREC_METRIC_HPP_
