#include "vibrec/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vibrec/adagrad.hpp"
#include "vibrec/metric.hpp"

namespace vibrec {

namespace {

using ArrayRow = Eigen::Array<double, 1, Eigen::Dynamic>;

void check_index(int idx, Eigen::Index n, const char* what) {
  if (idx < 0 || idx >= n) {
    throw std::out_of_range(std::string(what) + " index " + std::to_string(idx) + " out of range [0, " +
                            std::to_string(n) + ")");
  }
}

void mark_touched(BaselineGrad& g, std::int32_t u, std::int32_t i) {
  if (!g.user_mark_[static_cast<std::size_t>(u)]) {
    g.user_mark_[static_cast<std::size_t>(u)] = 1;
    g.touched_users.push_back(u);
  }
  if (!g.item_mark_[static_cast<std::size_t>(i)]) {
    g.item_mark_[static_cast<std::size_t>(i)] = 1;
    g.touched_items.push_back(i);
  }
}

// Shared minibatch training loop: shuffle, gather, gradient, Adagrad row
// updates. GradFn fills `grad` and returns the batch loss.
template <typename Model, typename GradFn>
std::vector<double> run_epochs(Model& m, const DatasetView& train, const TrainConfig& cfg,
                               const ProgressSink& progress, GradFn&& grad_fn) {
  std::mt19937_64 rng(mix_seed(cfg.seed));
  AdagradState opt(cfg.learning_rate);
  const int p_blk = opt.add_block(m.P.rows(), m.P.cols());
  const int q_blk = opt.add_block(m.Q.rows(), m.Q.cols());
  const int bu_blk = opt.add_block(m.b_user.size(), 1);
  const int bi_blk = opt.add_block(m.b_item.size(), 1);

  const std::size_t n = train.size();
  const std::size_t batch_size = static_cast<std::size_t>(cfg.batch_size);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Triple> batch(batch_size);
  BaselineGrad grad;
  grad.resize(m.P.rows(), m.Q.rows(), m.P.cols());

  bool step_biases = true;
  if constexpr (std::is_same_v<Model, DotProductModel>) {
    step_biases = (m.kind == ModelKind::biassvd);
  }

  std::vector<double> epoch_loss;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += batch_size) {
      const std::size_t count = std::min(batch_size, n - start);
      for (std::size_t e = 0; e < count; ++e) batch[e] = train[order[start + e]];
      loss_sum += grad_fn(m, std::span<const Triple>(batch.data(), count), grad);
      opt.step_rows(p_blk, grad.touched_users, m.P, grad.P);
      opt.step_rows(q_blk, grad.touched_items, m.Q, grad.Q);
      if (step_biases) {
        opt.step_rows(bu_blk, grad.touched_users, m.b_user, grad.b_user);
        opt.step_rows(bi_blk, grad.touched_items, m.b_item, grad.b_item);
      }
      grad.reset();
    }
    const double mean_loss = loss_sum / static_cast<double>(n);
    if (!std::isfinite(mean_loss)) {
      throw TrainingError("baseline fit: non-finite training loss at epoch " + std::to_string(epoch));
    }
    epoch_loss.push_back(mean_loss);
    if (progress) progress(epoch, mean_loss);
  }
  return epoch_loss;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::vibdml: return "vibdml";
    case ModelKind::biassvd: return "biassvd";
    case ModelKind::pmf: return "pmf";
    case ModelKind::metricf: return "metricf";
  }
  return "unknown";
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "vibdml") return ModelKind::vibdml;
  if (name == "biassvd") return ModelKind::biassvd;
  if (name == "pmf") return ModelKind::pmf;
  if (name == "metricf") return ModelKind::metricf;
  throw std::invalid_argument("unknown model kind '" + name + "'");
}

double dot_predict_raw(const DotProductModel& m, int u, int i) {
  check_index(u, m.P.rows(), "user");
  check_index(i, m.Q.rows(), "item");
  double score = m.P.row(u).dot(m.Q.row(i));
  if (m.kind == ModelKind::biassvd) {
    score += m.r_global + m.b_user(u) + m.b_item(i);
  }
  return score;
}

double dot_predict_eval(const DotProductModel& m, int u, int i) {
  if (u < 0 || u >= m.P.rows() || i < 0 || i >= m.Q.rows()) {
    return clamp_rating(m.r_global, m.r_min, m.r_max);
  }
  return clamp_rating(dot_predict_raw(m, u, i), m.r_min, m.r_max);
}

double metricf_predict_raw(const MetricFModel& m, int u, int i) {
  check_index(u, m.P.rows(), "user");
  check_index(i, m.Q.rows(), "item");
  const double d = euclidean_distance(m.P.row(u), m.Q.row(i), m.distance_floor);
  return distance_to_rating(d, m.b_user(u), m.b_item(i), m.r_global, m.r_max);
}

double metricf_predict_eval(const MetricFModel& m, int u, int i) {
  if (u < 0 || u >= m.P.rows() || i < 0 || i >= m.Q.rows()) {
    return clamp_rating(m.r_global, m.r_min, m.r_max);
  }
  return clamp_rating(metricf_predict_raw(m, u, i), m.r_min, m.r_max);
}

void BaselineGrad::resize(Eigen::Index n_users, Eigen::Index n_items, Eigen::Index k) {
  P = MatrixRM::Zero(n_users, k);
  Q = MatrixRM::Zero(n_items, k);
  b_user = VectorXd::Zero(n_users);
  b_item = VectorXd::Zero(n_items);
  touched_users.clear();
  touched_items.clear();
  user_mark_.assign(static_cast<std::size_t>(n_users), 0);
  item_mark_.assign(static_cast<std::size_t>(n_items), 0);
}

void BaselineGrad::reset() {
  for (std::int32_t u : touched_users) {
    P.row(u).setZero();
    b_user(u) = 0.0;
    user_mark_[static_cast<std::size_t>(u)] = 0;
  }
  for (std::int32_t i : touched_items) {
    Q.row(i).setZero();
    b_item(i) = 0.0;
    item_mark_[static_cast<std::size_t>(i)] = 0;
  }
  touched_users.clear();
  touched_items.clear();
}

double dot_loss_batch(const DotProductModel& m, std::span<const Triple> batch) {
  if (batch.empty()) throw std::invalid_argument("dot_loss_batch: empty batch");
  const bool biased = m.kind == ModelKind::biassvd;
  double loss = 0.0;
  for (const Triple& t : batch) {
    const double res = t.rating - dot_predict_raw(m, t.user, t.item);
    loss += res * res;
    loss += m.l2 * (m.P.row(t.user).squaredNorm() + m.Q.row(t.item).squaredNorm());
    if (biased) {
      loss += m.l2 * (m.b_user(t.user) * m.b_user(t.user) + m.b_item(t.item) * m.b_item(t.item));
    }
  }
  return loss;
}

double dot_grad_batch(const DotProductModel& m, std::span<const Triple> batch, BaselineGrad& out) {
  if (batch.empty()) throw std::invalid_argument("dot_grad_batch: empty batch");
  const bool biased = m.kind == ModelKind::biassvd;
  double loss = 0.0;
  for (const Triple& t : batch) {
    const auto u = t.user;
    const auto i = t.item;
    const double res = t.rating - dot_predict_raw(m, u, i);
    loss += res * res;
    loss += m.l2 * (m.P.row(u).squaredNorm() + m.Q.row(i).squaredNorm());
    if (biased) {
      loss += m.l2 * (m.b_user(u) * m.b_user(u) + m.b_item(i) * m.b_item(i));
    }
    mark_touched(out, u, i);
    out.P.row(u) += -2.0 * res * m.Q.row(i) + 2.0 * m.l2 * m.P.row(u);
    out.Q.row(i) += -2.0 * res * m.P.row(u) + 2.0 * m.l2 * m.Q.row(i);
    if (biased) {
      out.b_user(u) += -2.0 * res + 2.0 * m.l2 * m.b_user(u);
      out.b_item(i) += -2.0 * res + 2.0 * m.l2 * m.b_item(i);
    }
  }
  return loss;
}

double metricf_loss_batch(const MetricFModel& m, std::span<const Triple> batch) {
  if (batch.empty()) throw std::invalid_argument("metricf_loss_batch: empty batch");
  double loss = 0.0;
  for (const Triple& t : batch) {
    const double res = t.rating - metricf_predict_raw(m, t.user, t.item);
    loss += res * res;
  }
  return loss;
}

double metricf_grad_batch(const MetricFModel& m, std::span<const Triple> batch, BaselineGrad& out) {
  if (batch.empty()) throw std::invalid_argument("metricf_grad_batch: empty batch");
  double loss = 0.0;
  ArrayRow diff(m.P.cols());
  for (const Triple& t : batch) {
    const auto u = t.user;
    const auto i = t.item;
    check_index(u, m.P.rows(), "user");
    check_index(i, m.Q.rows(), "item");
    const double d = euclidean_distance(m.P.row(u), m.Q.row(i), m.distance_floor);
    const double r_hat = distance_to_rating(d, m.b_user(u), m.b_item(i), m.r_global, m.r_max);
    const double res = t.rating - r_hat;
    loss += res * res;
    mark_touched(out, u, i);
    const double coef = 2.0 * res / d;
    diff = (m.P.row(u) - m.Q.row(i)).array();
    out.P.row(u).array() += coef * diff;
    out.Q.row(i).array() -= coef * diff;
    out.b_user(u) += -2.0 * res;
    out.b_item(i) += -2.0 * res;
  }
  return loss;
}

DotFitResult fit_dot_product(const DatasetView& train, const TrainConfig& cfg, ModelKind kind,
                             const ProgressSink& progress) {
  validate_config(cfg);
  if (train.empty()) throw std::invalid_argument("fit_dot_product: empty training data");
  if (kind != ModelKind::biassvd && kind != ModelKind::pmf) {
    throw std::invalid_argument("fit_dot_product: kind must be biassvd or pmf");
  }
  DotFitResult result;
  DotProductModel& m = result.model;
  m.kind = kind;
  m.r_min = train.r_min();
  m.r_max = train.r_max();
  m.r_global = train.mean_rating();
  m.l2 = cfg.l2;
  m.config = cfg;
  std::mt19937_64 rng(cfg.seed);
  m.P.resize(train.n_users(), cfg.k);
  m.Q.resize(train.n_items(), cfg.k);
  fill_normal(m.P, rng, 0.0, cfg.init_sd);
  fill_normal(m.Q, rng, 0.0, cfg.init_sd);
  m.b_user = VectorXd::Zero(train.n_users());
  m.b_item = VectorXd::Zero(train.n_items());

  result.epoch_loss = run_epochs(m, train, cfg, progress,
                                 [](const DotProductModel& model, std::span<const Triple> batch,
                                    BaselineGrad& grad) { return dot_grad_batch(model, batch, grad); });
  return result;
}

MetricFFitResult fit_metricf(const DatasetView& train, const TrainConfig& cfg,
                             const ProgressSink& progress) {
  validate_config(cfg);
  if (train.empty()) throw std::invalid_argument("fit_metricf: empty training data");
  MetricFFitResult result;
  MetricFModel& m = result.model;
  m.r_min = train.r_min();
  m.r_max = train.r_max();
  m.r_global = train.mean_rating();
  m.distance_floor = cfg.distance_floor;
  m.config = cfg;
  std::mt19937_64 rng(cfg.seed);
  m.P.resize(train.n_users(), cfg.k);
  m.Q.resize(train.n_items(), cfg.k);
  fill_normal(m.P, rng, 0.0, cfg.init_sd);
  fill_normal(m.Q, rng, 0.0, cfg.init_sd);
  m.b_user = VectorXd::Zero(train.n_users());
  m.b_item = VectorXd::Zero(train.n_items());

  result.epoch_loss = run_epochs(m, train, cfg, progress,
                                 [](const MetricFModel& model, std::span<const Triple> batch,
                                    BaselineGrad& grad) { return metricf_grad_batch(model, batch, grad); });
  return result;
}

double global_mean_predict(const DatasetView& train) {
  if (train.empty()) throw std::invalid_argument("global_mean_predict: empty train split");
  return train.mean_rating();
}

}  // namespace vibrec
