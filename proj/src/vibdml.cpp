#include "vibrec/vibdml.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vibrec/adagrad.hpp"
#include "vibrec/metric.hpp"

namespace vibrec {

namespace {

constexpr double kLogvarClamp = 20.0;

using ArrayRow = Eigen::Array<double, 1, Eigen::Dynamic>;

void check_index(int idx, Eigen::Index n, const char* what) {
  if (idx < 0 || idx >= n) {
    throw std::out_of_range(std::string(what) + " index " + std::to_string(idx) + " out of range [0, " +
                            std::to_string(n) + ")");
  }
}

// Forward pass for one example. Shared by loss_batch and grad_batch so both
// accumulate bitwise-identical loss values.
struct Forward {
  double r_hat;
  double distance;
  double residual;
};

inline Forward forward_example(const VibDmlModel& m, const Triple& t, const RowVectorXd& z_u,
                               const RowVectorXd& z_i) {
  Forward f;
  f.distance = euclidean_distance(z_u, z_i, m.distance_floor);
  f.r_hat = distance_to_rating(f.distance, m.biases.user(t.user), m.biases.item(t.item),
                               m.biases.r_global, m.r_max);
  f.residual = t.rating - f.r_hat;
  return f;
}

}  // namespace

void validate_config(const TrainConfig& cfg) {
  if (cfg.k < 1) throw std::invalid_argument("config: k must be >= 1");
  if (cfg.epochs < 1) throw std::invalid_argument("config: epochs must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("config: learning rate must be positive");
  if (cfg.batch_size < 1) throw std::invalid_argument("config: batch size must be >= 1");
  if (!(cfg.init_sd > 0.0)) throw std::invalid_argument("config: init_sd must be positive");
  if (cfg.beta < 0.0) throw std::invalid_argument("config: beta must be nonnegative");
  if (cfg.distance_floor < 0.0) throw std::invalid_argument("config: distance_floor must be nonnegative");
  if (cfg.l2 < 0.0) throw std::invalid_argument("config: l2 must be nonnegative");
}

VibDmlModel init_model(int n_users, int n_items, const TrainConfig& cfg, double r_min, double r_max,
                       double r_global) {
  validate_config(cfg);
  if (n_users <= 0 || n_items <= 0) {
    throw std::invalid_argument("init_model: entity counts must be positive");
  }
  VibDmlModel m;
  m.k = cfg.k;
  m.beta_user = cfg.beta;
  m.beta_item = cfg.beta;
  m.r_min = r_min;
  m.r_max = r_max;
  m.distance_floor = cfg.distance_floor;
  m.config = cfg;

  std::mt19937_64 rng(cfg.seed);
  m.users.mu.resize(n_users, cfg.k);
  m.items.mu.resize(n_items, cfg.k);
  fill_normal(m.users.mu, rng, 0.0, cfg.init_sd);
  fill_normal(m.items.mu, rng, 0.0, cfg.init_sd);
  m.users.logvar = MatrixRM::Zero(n_users, cfg.k);
  m.items.logvar = MatrixRM::Zero(n_items, cfg.k);
  m.biases.user = VectorXd::Zero(n_users);
  m.biases.item = VectorXd::Zero(n_items);
  m.biases.r_global = r_global;
  m.user_obs = Eigen::VectorXi::Zero(n_users);
  m.item_obs = Eigen::VectorXi::Zero(n_items);
  return m;
}

RowVectorXd sample_latent(const GaussianEmbeddingTable& table, int idx,
                          const Eigen::Ref<const RowVectorXd>& eps) {
  check_index(idx, table.rows(), "entity");
  if (eps.size() != table.dim()) {
    throw std::invalid_argument("sample_latent: noise length mismatch");
  }
  return (table.mu.row(idx).array() + (table.logvar.row(idx).array() * 0.5).exp() * eps.array()).matrix();
}

double kl_term(const Eigen::Ref<const RowVectorXd>& mu, const Eigen::Ref<const RowVectorXd>& logvar) {
  if (mu.size() != logvar.size()) {
    throw std::invalid_argument("kl_term: length mismatch");
  }
  return 0.5 * (-logvar.array() + mu.array().square() + logvar.array().exp() - 1.0).sum();
}

PredictCache predict_train(const VibDmlModel& m, int u, int i, const NoiseDraw& noise) {
  check_index(u, m.users.rows(), "user");
  check_index(i, m.items.rows(), "item");
  PredictCache cache;
  cache.z_user = sample_latent(m.users, u, noise.user);
  cache.z_item = sample_latent(m.items, i, noise.item);
  const Triple t{static_cast<std::int32_t>(u), static_cast<std::int32_t>(i), 0.0};
  const Forward f = forward_example(m, t, cache.z_user, cache.z_item);
  cache.distance = f.distance;
  cache.r_hat = f.r_hat;
  return cache;
}

double predict_eval(const VibDmlModel& m, int u, int i) {
  const bool user_known = u >= 0 && u < m.users.rows() && m.user_obs(u) > 0;
  const bool item_known = i >= 0 && i < m.items.rows() && m.item_obs(i) > 0;
  double raw;
  if (user_known && item_known) {
    const double d = euclidean_distance(m.users.mu.row(u), m.items.mu.row(i), m.distance_floor);
    raw = distance_to_rating(d, m.biases.user(u), m.biases.item(i), m.biases.r_global, m.r_max);
  } else if (user_known) {
    raw = m.biases.r_global + m.biases.user(u);
  } else if (item_known) {
    raw = m.biases.r_global + m.biases.item(i);
  } else {
    raw = m.biases.r_global;
  }
  return clamp_rating(raw, m.r_min, m.r_max);
}

double loss_batch(const VibDmlModel& m, std::span<const Triple> batch,
                  const Eigen::Ref<const MatrixRM>& eps_user, const Eigen::Ref<const MatrixRM>& eps_item) {
  if (batch.empty()) throw std::invalid_argument("loss_batch: empty batch");
  if (eps_user.rows() < static_cast<Eigen::Index>(batch.size()) ||
      eps_item.rows() < static_cast<Eigen::Index>(batch.size()) || eps_user.cols() != m.k ||
      eps_item.cols() != m.k) {
    throw std::invalid_argument("loss_batch: noise shape mismatch");
  }
  double loss = 0.0;
  RowVectorXd z_u(m.k), z_i(m.k);
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const Triple& t = batch[e];
    check_index(t.user, m.users.rows(), "user");
    check_index(t.item, m.items.rows(), "item");
    const auto row = static_cast<Eigen::Index>(e);
    z_u = (m.users.mu.row(t.user).array() +
           (m.users.logvar.row(t.user).array() * 0.5).exp() * eps_user.row(row).array())
              .matrix();
    z_i = (m.items.mu.row(t.item).array() +
           (m.items.logvar.row(t.item).array() * 0.5).exp() * eps_item.row(row).array())
              .matrix();
    const Forward f = forward_example(m, t, z_u, z_i);
    loss += f.residual * f.residual;
    loss += m.beta_user * kl_term(m.users.mu.row(t.user), m.users.logvar.row(t.user));
    loss += m.beta_item * kl_term(m.items.mu.row(t.item), m.items.logvar.row(t.item));
  }
  return loss;
}

void VibDmlGrad::resize(Eigen::Index n_users, Eigen::Index n_items, Eigen::Index k) {
  user_mu = MatrixRM::Zero(n_users, k);
  user_logvar = MatrixRM::Zero(n_users, k);
  item_mu = MatrixRM::Zero(n_items, k);
  item_logvar = MatrixRM::Zero(n_items, k);
  b_user = VectorXd::Zero(n_users);
  b_item = VectorXd::Zero(n_items);
  touched_users.clear();
  touched_items.clear();
  user_mark_.assign(static_cast<std::size_t>(n_users), 0);
  item_mark_.assign(static_cast<std::size_t>(n_items), 0);
}

void VibDmlGrad::reset() {
  for (std::int32_t u : touched_users) {
    user_mu.row(u).setZero();
    user_logvar.row(u).setZero();
    b_user(u) = 0.0;
    user_mark_[static_cast<std::size_t>(u)] = 0;
  }
  for (std::int32_t i : touched_items) {
    item_mu.row(i).setZero();
    item_logvar.row(i).setZero();
    b_item(i) = 0.0;
    item_mark_[static_cast<std::size_t>(i)] = 0;
  }
  touched_users.clear();
  touched_items.clear();
}

double grad_batch(const VibDmlModel& m, std::span<const Triple> batch,
                  const Eigen::Ref<const MatrixRM>& eps_user, const Eigen::Ref<const MatrixRM>& eps_item,
                  VibDmlGrad& out) {
  if (batch.empty()) throw std::invalid_argument("grad_batch: empty batch");
  if (out.user_mu.rows() != m.users.rows() || out.item_mu.rows() != m.items.rows() ||
      out.user_mu.cols() != m.k) {
    throw std::invalid_argument("grad_batch: gradient buffer shape mismatch");
  }
  if (eps_user.rows() < static_cast<Eigen::Index>(batch.size()) ||
      eps_item.rows() < static_cast<Eigen::Index>(batch.size()) || eps_user.cols() != m.k ||
      eps_item.cols() != m.k) {
    throw std::invalid_argument("grad_batch: noise shape mismatch");
  }

  double loss = 0.0;
  ArrayRow sigma_u(m.k), sigma_i(m.k), diff(m.k);
  RowVectorXd z_u(m.k), z_i(m.k);
  for (std::size_t e = 0; e < batch.size(); ++e) {
    const Triple& t = batch[e];
    check_index(t.user, m.users.rows(), "user");
    check_index(t.item, m.items.rows(), "item");
    const auto row = static_cast<Eigen::Index>(e);
    const auto u = t.user;
    const auto i = t.item;

    sigma_u = (m.users.logvar.row(u).array() * 0.5).exp();
    sigma_i = (m.items.logvar.row(i).array() * 0.5).exp();
    z_u = (m.users.mu.row(u).array() + sigma_u * eps_user.row(row).array()).matrix();
    z_i = (m.items.mu.row(i).array() + sigma_i * eps_item.row(row).array()).matrix();

    const Forward f = forward_example(m, t, z_u, z_i);
    loss += f.residual * f.residual;
    loss += m.beta_user * kl_term(m.users.mu.row(u), m.users.logvar.row(u));
    loss += m.beta_item * kl_term(m.items.mu.row(i), m.items.logvar.row(i));

    if (!out.user_mark_[static_cast<std::size_t>(u)]) {
      out.user_mark_[static_cast<std::size_t>(u)] = 1;
      out.touched_users.push_back(u);
    }
    if (!out.item_mark_[static_cast<std::size_t>(i)]) {
      out.item_mark_[static_cast<std::size_t>(i)] = 1;
      out.touched_items.push_back(i);
    }

    // dL/dD = 2*residual (loss falls as r_hat rises toward the rating);
    // dD/dz_u = (z_u - z_i) / D, dz/dlogvar = sigma*eps/2.
    const double coef = 2.0 * f.residual / f.distance;
    diff = (z_u - z_i).array();
    out.user_mu.row(u).array() += coef * diff;
    out.user_logvar.row(u).array() += coef * diff * 0.5 * sigma_u * eps_user.row(row).array();
    out.item_mu.row(i).array() -= coef * diff;
    out.item_logvar.row(i).array() -= coef * diff * 0.5 * sigma_i * eps_item.row(row).array();
    out.b_user(u) += -2.0 * f.residual;
    out.b_item(i) += -2.0 * f.residual;

    // KL penalty: d/dmu = beta*mu, d/dlogvar = (beta/2)(exp(logvar) - 1).
    out.user_mu.row(u).array() += m.beta_user * m.users.mu.row(u).array();
    out.user_logvar.row(u).array() += 0.5 * m.beta_user * (m.users.logvar.row(u).array().exp() - 1.0);
    out.item_mu.row(i).array() += m.beta_item * m.items.mu.row(i).array();
    out.item_logvar.row(i).array() += 0.5 * m.beta_item * (m.items.logvar.row(i).array().exp() - 1.0);
  }
  return loss;
}

VibDmlFitResult fit_vibdml(const DatasetView& train, const TrainConfig& cfg, const ProgressSink& progress) {
  validate_config(cfg);
  if (train.empty()) throw std::invalid_argument("fit_vibdml: empty training data");

  const double r_global = train.mean_rating();
  VibDmlFitResult result;
  result.model = init_model(train.n_users(), train.n_items(), cfg, train.r_min(), train.r_max(), r_global);
  VibDmlModel& m = result.model;
  for (std::size_t t = 0; t < train.size(); ++t) {
    m.user_obs(train[t].user) += 1;
    m.item_obs(train[t].item) += 1;
  }

  // Separate stream from the init draw so changing k or init_sd does not
  // shift the shuffle/noise sequence.
  std::mt19937_64 rng(mix_seed(cfg.seed));
  std::normal_distribution<double> unit_normal(0.0, 1.0);

  AdagradState opt(cfg.learning_rate);
  const int user_mu_blk = opt.add_block(m.users.rows(), m.k);
  const int user_lv_blk = opt.add_block(m.users.rows(), m.k);
  const int item_mu_blk = opt.add_block(m.items.rows(), m.k);
  const int item_lv_blk = opt.add_block(m.items.rows(), m.k);
  const int b_user_blk = opt.add_block(m.users.rows(), 1);
  const int b_item_blk = opt.add_block(m.items.rows(), 1);

  const std::size_t n = train.size();
  const std::size_t batch_size = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  std::vector<Triple> batch(batch_size);
  MatrixRM eps_user(batch_size, m.k), eps_item(batch_size, m.k);
  VibDmlGrad grad;
  grad.resize(m.users.rows(), m.items.rows(), m.k);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t count = std::min(batch_size, n - start);
      for (std::size_t e = 0; e < count; ++e) {
        batch[e] = train[order[start + e]];
      }
      for (std::size_t e = 0; e < count; ++e) {
        for (int c = 0; c < m.k; ++c) eps_user(static_cast<Eigen::Index>(e), c) = unit_normal(rng);
      }
      for (std::size_t e = 0; e < count; ++e) {
        for (int c = 0; c < m.k; ++c) eps_item(static_cast<Eigen::Index>(e), c) = unit_normal(rng);
      }
      loss_sum += grad_batch(m, std::span<const Triple>(batch.data(), count),
                             eps_user.topRows(static_cast<Eigen::Index>(count)),
                             eps_item.topRows(static_cast<Eigen::Index>(count)), grad);

      opt.step_rows(user_mu_blk, grad.touched_users, m.users.mu, grad.user_mu);
      opt.step_rows(user_lv_blk, grad.touched_users, m.users.logvar, grad.user_logvar);
      opt.step_rows(item_mu_blk, grad.touched_items, m.items.mu, grad.item_mu);
      opt.step_rows(item_lv_blk, grad.touched_items, m.items.logvar, grad.item_logvar);
      opt.step_rows(b_user_blk, grad.touched_users, m.biases.user, grad.b_user);
      opt.step_rows(b_item_blk, grad.touched_items, m.biases.item, grad.b_item);

      for (std::int32_t u : grad.touched_users) {
        m.users.logvar.row(u) = m.users.logvar.row(u).cwiseMax(-kLogvarClamp).cwiseMin(kLogvarClamp);
      }
      for (std::int32_t i : grad.touched_items) {
        m.items.logvar.row(i) = m.items.logvar.row(i).cwiseMax(-kLogvarClamp).cwiseMin(kLogvarClamp);
      }
      grad.reset();
    }
    const double mean_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(mean_loss)) {
      throw TrainingError("fit_vibdml: non-finite training loss at epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(mean_loss);
    if (progress) progress(epoch, mean_loss);
  }
  return result;
}

}  // namespace vibrec
