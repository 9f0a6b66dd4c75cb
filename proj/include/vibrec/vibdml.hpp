#ifndef VIBREC_VIBDML_HPP_
#define VIBREC_VIBDML_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "vibrec/common.hpp"
#include "vibrec/dataset.hpp"

namespace vibrec {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Per-entity Gaussian posteriors: row r holds the mean and log-variance of the
// r-th entity's latent distribution.
struct GaussianEmbeddingTable {
  MatrixRM mu;       // n x k
  MatrixRM logvar;   // n x k, clamped to [-20, 20] after every update

  Eigen::Index rows() const { return mu.rows(); }
  Eigen::Index dim() const { return mu.cols(); }
};

struct BiasTerms {
  VectorXd user;
  VectorXd item;
  double r_global = 0.0;  // training-split mean rating
};

struct TrainConfig {
  int epochs = 50;
  double learning_rate = 0.05;
  int batch_size = 256;
  double beta = 0.2;           // KL weight (applied to both user and item sides)
  int k = 150;
  std::uint64_t seed = 0;
  double init_sd = 0.05;       // sd of the normal init for latent means
  double distance_floor = 1e-12;
  double l2 = 0.02;            // regularization weight for BiasSVD / PMF only
};

// One reparameterization draw: z = mu + exp(logvar/2) .* eps.
struct NoiseDraw {
  RowVectorXd user;
  RowVectorXd item;
};

struct VibDmlModel {
  GaussianEmbeddingTable users;
  GaussianEmbeddingTable items;
  BiasTerms biases;
  int k = 0;
  double beta_user = 0.0;
  double beta_item = 0.0;
  double r_min = 0.0;
  double r_max = 0.0;
  double distance_floor = 1e-12;
  // Observation counts from the training split; an entity with count 0 falls
  // back to the global-mean rule at evaluation.
  Eigen::VectorXi user_obs;
  Eigen::VectorXi item_obs;
  TrainConfig config;
};

// Means ~ N(0, init_sd^2) under cfg.seed, log-variances 0 (the prior),
// biases 0.
VibDmlModel init_model(int n_users, int n_items, const TrainConfig& cfg, double r_min, double r_max,
                       double r_global);

RowVectorXd sample_latent(const GaussianEmbeddingTable& table, int idx,
                          const Eigen::Ref<const RowVectorXd>& eps);

// KL(N(mu, exp(logvar)) || N(0, I)) = 1/2 sum_k (-logvar + mu^2 + exp(logvar) - 1).
double kl_term(const Eigen::Ref<const RowVectorXd>& mu, const Eigen::Ref<const RowVectorXd>& logvar);

struct PredictCache {
  double r_hat = 0.0;  // unclamped training-time score
  RowVectorXd z_user;
  RowVectorXd z_item;
  double distance = 0.0;
};

PredictCache predict_train(const VibDmlModel& m, int u, int i, const NoiseDraw& noise);

// Deterministic, total, clamped to [r_min, r_max]. Uses the posterior means;
// unseen entities fall back to r_global plus whichever bias is known.
double predict_eval(const VibDmlModel& m, int u, int i);

// Sum over the batch of squared error plus per-triple KL penalties
// (beta_user * KL of the user row + beta_item * KL of the item row).
// eps_user/eps_item row e holds the noise for batch example e.
double loss_batch(const VibDmlModel& m, std::span<const Triple> batch,
                  const Eigen::Ref<const MatrixRM>& eps_user, const Eigen::Ref<const MatrixRM>& eps_item);

// Dense gradient buffers with touched-row tracking; rows outside the touched
// lists are exactly zero. Reused across batches to avoid reallocation.
struct VibDmlGrad {
  MatrixRM user_mu, user_logvar;
  MatrixRM item_mu, item_logvar;
  VectorXd b_user, b_item;
  std::vector<std::int32_t> touched_users, touched_items;

  void resize(Eigen::Index n_users, Eigen::Index n_items, Eigen::Index k);
  void reset();  // zero touched rows only, clear the lists

 private:
  std::vector<std::uint8_t> user_mark_, item_mark_;
  friend double grad_batch(const VibDmlModel&, std::span<const Triple>, const Eigen::Ref<const MatrixRM>&,
                           const Eigen::Ref<const MatrixRM>&, VibDmlGrad&);
};

// Analytic gradients of loss_batch for every parameter touched by the batch.
// Returns the batch loss (same value loss_batch would compute).
double grad_batch(const VibDmlModel& m, std::span<const Triple> batch,
                  const Eigen::Ref<const MatrixRM>& eps_user, const Eigen::Ref<const MatrixRM>& eps_item,
                  VibDmlGrad& out);

using ProgressSink = std::function<void(int epoch, double mean_loss)>;

struct VibDmlFitResult {
  VibDmlModel model;
  std::vector<double> epoch_loss;  // mean per-example training loss
};

// Algorithm: init, then per epoch a seeded shuffle, minibatches of
// cfg.batch_size (last one may be short), one noise draw per example, analytic
// gradients, Adagrad step, logvar clamp. Fully deterministic given cfg.seed.
VibDmlFitResult fit_vibdml(const DatasetView& train, const TrainConfig& cfg,
                           const ProgressSink& progress = {});

void validate_config(const TrainConfig& cfg);

}  // namespace vibrec

#endif  // VIBREC_VIBDML_HPP_
