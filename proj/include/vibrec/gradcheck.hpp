#ifndef VIBREC_GRADCHECK_HPP_
#define VIBREC_GRADCHECK_HPP_

#include <memory>
#include <string>
#include <vector>

#include "vibrec/baselines.hpp"
#include "vibrec/vibdml.hpp"

namespace vibrec {

// Flat view of a model's parameters for finite-difference verification.
// Implementations evaluate the batch loss with noise held fixed, so central
// differences see a smooth function of the parameters.
class GradCheckTarget {
 public:
  virtual ~GradCheckTarget() = default;
  virtual Eigen::Index coord_count() const = 0;
  virtual std::string describe(Eigen::Index j) const = 0;
  virtual double get_coord(Eigen::Index j) const = 0;
  virtual void set_coord(Eigen::Index j, double v) = 0;
  virtual double loss() const = 0;
  virtual std::vector<double> analytic_grad() const = 0;
};

struct GradCheckReport {
  bool pass = false;
  double max_rel_err = 0.0;   // |analytic - fd| / max(|analytic|, |fd|), over coords above the floor
  double max_abs_err = 0.0;
  std::string worst_coord;
  Eigen::Index coords_checked = 0;
};

// Central differences (loss(x+h) - loss(x-h)) / 2h against the analytic
// gradient, coordinate by coordinate. A coordinate passes when
// |diff| <= max(abs_floor, tol * max(|analytic|, |fd|)).
GradCheckReport gradient_check(GradCheckTarget& target, double h, double tol, double abs_floor = 1e-7);

std::unique_ptr<GradCheckTarget> make_vibdml_target(VibDmlModel& model, std::vector<Triple> batch,
                                                    MatrixRM eps_user, MatrixRM eps_item);
std::unique_ptr<GradCheckTarget> make_dot_target(DotProductModel& model, std::vector<Triple> batch);
std::unique_ptr<GradCheckTarget> make_metricf_target(MetricFModel& model, std::vector<Triple> batch);

struct GradCheckTrialSummary {
  ModelKind model;
  int trials = 0;
  int failures = 0;
  double max_rel_err = 0.0;
  std::string worst_coord;
};

// Random small instances (entities, latents, batch) per trial; every
// coordinate of every trial is compared against finite differences.
// Instances keep pair distances away from zero so the difference quotient
// stays well-conditioned.
GradCheckTrialSummary run_gradcheck_trials(ModelKind kind, int trials, double h, double tol,
                                           std::uint64_t seed);

}  // namespace vibrec

#endif  // VIBREC_GRADCHECK_HPP_
