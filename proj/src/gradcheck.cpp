#include "vibrec/gradcheck.hpp"

#include <cmath>
#include <random>

#include "vibrec/metric.hpp"

namespace vibrec {

namespace {

// Coordinate layout helper: a named list of (matrix or vector) slots.
struct Slot {
  std::string name;
  MatrixRM* mat = nullptr;
  VectorXd* vec = nullptr;

  Eigen::Index size() const { return mat ? mat->size() : vec->size(); }
  double get(Eigen::Index j) const {
    if (mat) return (*mat)(j / mat->cols(), j % mat->cols());
    return (*vec)(j);
  }
  void set(Eigen::Index j, double v) {
    if (mat) {
      (*mat)(j / mat->cols(), j % mat->cols()) = v;
    } else {
      (*vec)(j) = v;
    }
  }
  std::string describe(Eigen::Index j) const {
    if (mat) {
      return name + "[" + std::to_string(j / mat->cols()) + "," + std::to_string(j % mat->cols()) + "]";
    }
    return name + "[" + std::to_string(j) + "]";
  }
};

class SlotTarget : public GradCheckTarget {
 public:
  Eigen::Index coord_count() const override {
    Eigen::Index n = 0;
    for (const Slot& s : slots_) n += s.size();
    return n;
  }
  std::string describe(Eigen::Index j) const override {
    const auto [s, off] = locate(j);
    return slots_[s].describe(off);
  }
  double get_coord(Eigen::Index j) const override {
    const auto [s, off] = locate(j);
    return slots_[s].get(off);
  }
  void set_coord(Eigen::Index j, double v) override {
    const auto [s, off] = locate(j);
    slots_[s].set(off, v);
  }

 protected:
  std::vector<Slot> slots_;

 private:
  std::pair<std::size_t, Eigen::Index> locate(Eigen::Index j) const {
    for (std::size_t s = 0; s < slots_.size(); ++s) {
      if (j < slots_[s].size()) return {s, j};
      j -= slots_[s].size();
    }
    throw std::out_of_range("gradcheck: coordinate out of range");
  }
};

// Gathers a gradient structure into the flat slot order.
template <typename GatherFn>
std::vector<double> flatten(const std::vector<Slot>& slots, GatherFn&& gather) {
  std::vector<double> flat;
  Eigen::Index total = 0;
  for (const Slot& s : slots) total += s.size();
  flat.reserve(static_cast<std::size_t>(total));
  gather(flat);
  return flat;
}

void append_matrix(std::vector<double>& flat, const MatrixRM& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  }
}

void append_vector(std::vector<double>& flat, const VectorXd& v) {
  for (Eigen::Index r = 0; r < v.size(); ++r) flat.push_back(v(r));
}

class VibDmlTarget final : public SlotTarget {
 public:
  VibDmlTarget(VibDmlModel& model, std::vector<Triple> batch, MatrixRM eps_user, MatrixRM eps_item)
      : model_(model), batch_(std::move(batch)), eps_user_(std::move(eps_user)),
        eps_item_(std::move(eps_item)) {
    slots_ = {Slot{"user_mu", &model_.users.mu, nullptr},
              Slot{"user_logvar", &model_.users.logvar, nullptr},
              Slot{"item_mu", &model_.items.mu, nullptr},
              Slot{"item_logvar", &model_.items.logvar, nullptr},
              Slot{"b_user", nullptr, &model_.biases.user},
              Slot{"b_item", nullptr, &model_.biases.item}};
  }

  double loss() const override { return loss_batch(model_, batch_, eps_user_, eps_item_); }

  std::vector<double> analytic_grad() const override {
    VibDmlGrad g;
    g.resize(model_.users.rows(), model_.items.rows(), model_.k);
    grad_batch(model_, batch_, eps_user_, eps_item_, g);
    return flatten(slots_, [&](std::vector<double>& flat) {
      append_matrix(flat, g.user_mu);
      append_matrix(flat, g.user_logvar);
      append_matrix(flat, g.item_mu);
      append_matrix(flat, g.item_logvar);
      append_vector(flat, g.b_user);
      append_vector(flat, g.b_item);
    });
  }

 private:
  VibDmlModel& model_;
  std::vector<Triple> batch_;
  MatrixRM eps_user_, eps_item_;
};

class DotTarget final : public SlotTarget {
 public:
  DotTarget(DotProductModel& model, std::vector<Triple> batch) : model_(model), batch_(std::move(batch)) {
    slots_ = {Slot{"P", &model_.P, nullptr}, Slot{"Q", &model_.Q, nullptr},
              Slot{"b_user", nullptr, &model_.b_user}, Slot{"b_item", nullptr, &model_.b_item}};
  }

  double loss() const override { return dot_loss_batch(model_, batch_); }

  std::vector<double> analytic_grad() const override {
    BaselineGrad g;
    g.resize(model_.P.rows(), model_.Q.rows(), model_.P.cols());
    dot_grad_batch(model_, batch_, g);
    return flatten(slots_, [&](std::vector<double>& flat) {
      append_matrix(flat, g.P);
      append_matrix(flat, g.Q);
      append_vector(flat, g.b_user);
      append_vector(flat, g.b_item);
    });
  }

 private:
  DotProductModel& model_;
  std::vector<Triple> batch_;
};

class MetricFTarget final : public SlotTarget {
 public:
  MetricFTarget(MetricFModel& model, std::vector<Triple> batch) : model_(model), batch_(std::move(batch)) {
    slots_ = {Slot{"P", &model_.P, nullptr}, Slot{"Q", &model_.Q, nullptr},
              Slot{"b_user", nullptr, &model_.b_user}, Slot{"b_item", nullptr, &model_.b_item}};
  }

  double loss() const override { return metricf_loss_batch(model_, batch_); }

  std::vector<double> analytic_grad() const override {
    BaselineGrad g;
    g.resize(model_.P.rows(), model_.Q.rows(), model_.P.cols());
    metricf_grad_batch(model_, batch_, g);
    return flatten(slots_, [&](std::vector<double>& flat) {
      append_matrix(flat, g.P);
      append_matrix(flat, g.Q);
      append_vector(flat, g.b_user);
      append_vector(flat, g.b_item);
    });
  }

 private:
  MetricFModel& model_;
  std::vector<Triple> batch_;
};

}  // namespace

GradCheckReport gradient_check(GradCheckTarget& target, double h, double tol, double abs_floor) {
  if (!(h > 0.0)) throw std::invalid_argument("gradient_check: h must be positive");
  if (!(tol > 0.0)) throw std::invalid_argument("gradient_check: tol must be positive");

  const std::vector<double> analytic = target.analytic_grad();
  GradCheckReport report;
  report.pass = true;
  report.coords_checked = target.coord_count();
  for (Eigen::Index j = 0; j < report.coords_checked; ++j) {
    const double orig = target.get_coord(j);
    target.set_coord(j, orig + h);
    const double plus = target.loss();
    target.set_coord(j, orig - h);
    const double minus = target.loss();
    target.set_coord(j, orig);
    const double fd = (plus - minus) / (2.0 * h);
    const double an = analytic[static_cast<std::size_t>(j)];
    const double abs_err = std::abs(an - fd);
    const double scale = std::max(std::abs(an), std::abs(fd));
    const double rel_err = scale > 0.0 ? abs_err / scale : 0.0;
    const bool ok = abs_err <= std::max(abs_floor, tol * scale);
    if (abs_err > report.max_abs_err) report.max_abs_err = abs_err;
    if (scale > abs_floor && rel_err > report.max_rel_err) {
      report.max_rel_err = rel_err;
      report.worst_coord = target.describe(j);
    }
    if (!ok) {
      report.pass = false;
      report.worst_coord = target.describe(j);
      report.max_rel_err = std::max(report.max_rel_err, rel_err);
    }
  }
  return report;
}

std::unique_ptr<GradCheckTarget> make_vibdml_target(VibDmlModel& model, std::vector<Triple> batch,
                                                    MatrixRM eps_user, MatrixRM eps_item) {
  return std::make_unique<VibDmlTarget>(model, std::move(batch), std::move(eps_user), std::move(eps_item));
}

std::unique_ptr<GradCheckTarget> make_dot_target(DotProductModel& model, std::vector<Triple> batch) {
  return std::make_unique<DotTarget>(model, std::move(batch));
}

std::unique_ptr<GradCheckTarget> make_metricf_target(MetricFModel& model, std::vector<Triple> batch) {
  return std::make_unique<MetricFTarget>(model, std::move(batch));
}

namespace {

struct TrialInstance {
  std::vector<Triple> batch;
  int n_users = 0, n_items = 0, k = 0;
  double r_min = 1.0, r_max = 5.0;
};

TrialInstance draw_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size_dist(2, 8);
  std::uniform_int_distribution<int> dim_dist(2, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  TrialInstance inst;
  inst.n_users = size_dist(rng);
  inst.n_items = size_dist(rng);
  inst.k = dim_dist(rng);
  const int batch_len = size_dist(rng);
  std::uniform_int_distribution<int> user_dist(0, inst.n_users - 1);
  std::uniform_int_distribution<int> item_dist(0, inst.n_items - 1);
  inst.batch.reserve(static_cast<std::size_t>(batch_len));
  for (int e = 0; e < batch_len; ++e) {
    inst.batch.push_back(Triple{static_cast<std::int32_t>(user_dist(rng)),
                                static_cast<std::int32_t>(item_dist(rng)),
                                inst.r_min + (inst.r_max - inst.r_min) * unit(rng)});
  }
  return inst;
}

// The difference quotient of sqrt degrades as the pair distance approaches
// zero; reject such draws and redraw under a new sub-seed.
constexpr double kMinTrialDistance = 0.05;

}  // namespace

GradCheckTrialSummary run_gradcheck_trials(ModelKind kind, int trials, double h, double tol,
                                           std::uint64_t seed) {
  GradCheckTrialSummary summary;
  summary.model = kind;
  summary.trials = trials;

  for (int trial = 0; trial < trials; ++trial) {
    GradCheckReport report;
    for (std::uint64_t attempt = 0;; ++attempt) {
      std::mt19937_64 rng(mix_seed(seed + 1000003ULL * static_cast<std::uint64_t>(trial) + attempt));
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      std::normal_distribution<double> normal(0.0, 1.0);
      TrialInstance inst = draw_instance(rng);

      auto fill = [&](MatrixRM& m, Eigen::Index rows, Eigen::Index cols, double sd) {
        m.resize(rows, cols);
        fill_normal(m, rng, 0.0, sd);
      };

      if (kind == ModelKind::vibdml) {
        TrainConfig cfg;
        cfg.k = inst.k;
        cfg.beta = 0.3 * unit(rng);
        cfg.seed = rng();
        VibDmlModel model = init_model(inst.n_users, inst.n_items, cfg, inst.r_min, inst.r_max,
                                       2.0 + 2.0 * unit(rng));
        fill(model.users.mu, inst.n_users, inst.k, 1.0);
        fill(model.items.mu, inst.n_items, inst.k, 1.0);
        fill(model.users.logvar, inst.n_users, inst.k, 0.5);
        fill(model.items.logvar, inst.n_items, inst.k, 0.5);
        for (Eigen::Index r = 0; r < model.biases.user.size(); ++r) model.biases.user(r) = 0.3 * normal(rng);
        for (Eigen::Index r = 0; r < model.biases.item.size(); ++r) model.biases.item(r) = 0.3 * normal(rng);
        MatrixRM eps_user(static_cast<Eigen::Index>(inst.batch.size()), inst.k);
        MatrixRM eps_item(static_cast<Eigen::Index>(inst.batch.size()), inst.k);
        fill_normal(eps_user, rng, 0.0, 1.0);
        fill_normal(eps_item, rng, 0.0, 1.0);
        bool degenerate = false;
        for (std::size_t e = 0; e < inst.batch.size(); ++e) {
          NoiseDraw noise{eps_user.row(static_cast<Eigen::Index>(e)),
                          eps_item.row(static_cast<Eigen::Index>(e))};
          if (predict_train(model, inst.batch[e].user, inst.batch[e].item, noise).distance <
              kMinTrialDistance) {
            degenerate = true;
            break;
          }
        }
        if (degenerate) continue;
        auto target = make_vibdml_target(model, inst.batch, std::move(eps_user), std::move(eps_item));
        report = gradient_check(*target, h, tol);
      } else if (kind == ModelKind::metricf) {
        MetricFModel model;
        model.r_min = inst.r_min;
        model.r_max = inst.r_max;
        model.r_global = 2.0 + 2.0 * unit(rng);
        fill(model.P, inst.n_users, inst.k, 1.0);
        fill(model.Q, inst.n_items, inst.k, 1.0);
        model.b_user = VectorXd::Zero(inst.n_users);
        model.b_item = VectorXd::Zero(inst.n_items);
        for (Eigen::Index r = 0; r < inst.n_users; ++r) model.b_user(r) = 0.3 * normal(rng);
        for (Eigen::Index r = 0; r < inst.n_items; ++r) model.b_item(r) = 0.3 * normal(rng);
        bool degenerate = false;
        for (const Triple& t : inst.batch) {
          if (euclidean_distance(model.P.row(t.user), model.Q.row(t.item), model.distance_floor) <
              kMinTrialDistance) {
            degenerate = true;
            break;
          }
        }
        if (degenerate) continue;
        auto target = make_metricf_target(model, inst.batch);
        report = gradient_check(*target, h, tol);
      } else {
        DotProductModel model;
        model.kind = kind;
        model.r_min = inst.r_min;
        model.r_max = inst.r_max;
        model.r_global = 2.0 + 2.0 * unit(rng);
        model.l2 = 0.05 * unit(rng);
        fill(model.P, inst.n_users, inst.k, 1.0);
        fill(model.Q, inst.n_items, inst.k, 1.0);
        model.b_user = VectorXd::Zero(inst.n_users);
        model.b_item = VectorXd::Zero(inst.n_items);
        if (kind == ModelKind::biassvd) {
          for (Eigen::Index r = 0; r < inst.n_users; ++r) model.b_user(r) = 0.3 * normal(rng);
          for (Eigen::Index r = 0; r < inst.n_items; ++r) model.b_item(r) = 0.3 * normal(rng);
        }
        auto target = make_dot_target(model, inst.batch);
        report = gradient_check(*target, h, tol);
      }
      break;
    }

    if (!report.pass) {
      ++summary.failures;
    }
    if (report.max_rel_err > summary.max_rel_err || (!report.pass && summary.worst_coord.empty())) {
      summary.max_rel_err = std::max(summary.max_rel_err, report.max_rel_err);
      summary.worst_coord = report.worst_coord;
    }
  }
  return summary;
}

}  // namespace vibrec
