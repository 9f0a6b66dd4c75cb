#ifndef VIBREC_BASELINES_HPP_
#define VIBREC_BASELINES_HPP_

#include <span>
#include <string>
#include <vector>

#include "vibrec/common.hpp"
#include "vibrec/dataset.hpp"
#include "vibrec/vibdml.hpp"

namespace vibrec {

enum class ModelKind { vibdml, biassvd, pmf, metricf };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

// BiasSVD and PMF share the dot-product predictor; the pmf variant keeps its
// biases at zero permanently (pure latent-factor model).
struct DotProductModel {
  ModelKind kind = ModelKind::biassvd;
  MatrixRM P;  // n_users x k
  MatrixRM Q;  // n_items x k
  VectorXd b_user, b_item;
  double r_global = 0.0;
  double r_min = 0.0;
  double r_max = 0.0;
  double l2 = 0.0;
  TrainConfig config;
};

struct MetricFModel {
  MatrixRM P;
  MatrixRM Q;
  VectorXd b_user, b_item;
  double r_global = 0.0;
  double r_min = 0.0;
  double r_max = 0.0;
  double distance_floor = 1e-12;
  TrainConfig config;
};

// Unclamped training-time scores.
double dot_predict_raw(const DotProductModel& m, int u, int i);
double metricf_predict_raw(const MetricFModel& m, int u, int i);

// Clamped to [r_min, r_max]; out-of-range ids fall back to the global mean.
double dot_predict_eval(const DotProductModel& m, int u, int i);
double metricf_predict_eval(const MetricFModel& m, int u, int i);

struct BaselineGrad {
  MatrixRM P, Q;
  VectorXd b_user, b_item;
  std::vector<std::int32_t> touched_users, touched_items;

  void resize(Eigen::Index n_users, Eigen::Index n_items, Eigen::Index k);
  void reset();

  std::vector<std::uint8_t> user_mark_, item_mark_;
};

// Squared error plus l2 * (||P_u||^2 + ||Q_i||^2 [+ b_u^2 + b_i^2]) per
// example; PMF carries no bias terms.
double dot_loss_batch(const DotProductModel& m, std::span<const Triple> batch);
double dot_grad_batch(const DotProductModel& m, std::span<const Triple> batch, BaselineGrad& out);

// Squared error only; distance and rating conversion shared with VIB-DML.
double metricf_loss_batch(const MetricFModel& m, std::span<const Triple> batch);
double metricf_grad_batch(const MetricFModel& m, std::span<const Triple> batch, BaselineGrad& out);

struct DotFitResult {
  DotProductModel model;
  std::vector<double> epoch_loss;
};
DotFitResult fit_dot_product(const DatasetView& train, const TrainConfig& cfg, ModelKind kind,
                             const ProgressSink& progress = {});

struct MetricFFitResult {
  MetricFModel model;
  std::vector<double> epoch_loss;
};
MetricFFitResult fit_metricf(const DatasetView& train, const TrainConfig& cfg,
                             const ProgressSink& progress = {});

// Constant predictor: the training-split mean rating. Floor baseline for the
// acceptance checks.
double global_mean_predict(const DatasetView& train);

}  // namespace vibrec

#endif  // VIBREC_BASELINES_HPP_
