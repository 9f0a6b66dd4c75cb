#include "vibrec/evaluate.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include "vibrec/metric.hpp"

namespace vibrec {

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

// FNV-1a over the test index list; cheap identity for paired-split assertions.
std::uint64_t fingerprint_indices(const std::vector<std::int64_t>& indices) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::int64_t v : indices) {
    for (int byte = 0; byte < 8; ++byte) {
      h ^= static_cast<std::uint64_t>((v >> (8 * byte)) & 0xff);
      h *= 1099511628211ULL;
    }
  }
  return h;
}

struct TrainedModel {
  ModelKind kind;
  VibDmlModel vib;
  DotProductModel dot;
  MetricFModel metricf;

  double predict(int u, int i) const {
    switch (kind) {
      case ModelKind::vibdml: return predict_eval(vib, u, i);
      case ModelKind::biassvd:
      case ModelKind::pmf: return dot_predict_eval(dot, u, i);
      case ModelKind::metricf: return metricf_predict_eval(metricf, u, i);
    }
    return 0.0;
  }
};

TrainedModel fit_kind(ModelKind kind, const DatasetView& train, const TrainConfig& cfg) {
  TrainedModel out;
  out.kind = kind;
  switch (kind) {
    case ModelKind::vibdml: out.vib = fit_vibdml(train, cfg).model; break;
    case ModelKind::biassvd:
    case ModelKind::pmf: out.dot = fit_dot_product(train, cfg, kind).model; break;
    case ModelKind::metricf: out.metricf = fit_metricf(train, cfg).model; break;
  }
  return out;
}

void finalize_stats(EvalReport& report) {
  const auto n = static_cast<double>(report.rmse_splits.size());
  report.rmse_mean = std::accumulate(report.rmse_splits.begin(), report.rmse_splits.end(), 0.0) / n;
  if (report.rmse_splits.size() > 1) {
    double ss = 0.0;
    for (double v : report.rmse_splits) ss += (v - report.rmse_mean) * (v - report.rmse_mean);
    report.rmse_std = std::sqrt(ss / (n - 1.0));
  } else {
    report.rmse_std = 0.0;
  }
}

nlohmann::json config_to_json(const TrainConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  nlohmann::json j;
  j["k"] = cfg.k;
  j["beta"] = cfg.beta;
  j["lr"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  j["batch"] = cfg.batch_size;
  j["l2"] = cfg.l2;
  j["seeds"] = seeds;
  return j;
}

}  // namespace

double rmse(std::span<const double> predictions, std::span<const double> truths) {
  if (predictions.size() != truths.size()) {
    throw std::invalid_argument("rmse: length mismatch");
  }
  if (predictions.empty()) {
    throw std::invalid_argument("rmse: empty input");
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double d = predictions[i] - truths[i];
    ss += d * d;
  }
  return std::sqrt(ss / static_cast<double>(predictions.size()));
}

EvalReport run_holdout_protocol(const Dataset& ds, const std::string& dataset_name, ModelKind kind,
                                TrainConfig cfg, int n_repeats, std::uint64_t base_seed, double ratio,
                                int jobs) {
  if (n_repeats < 1) throw std::invalid_argument("run_holdout_protocol: n_repeats must be >= 1");
  validate_config(cfg);

  EvalReport report;
  report.dataset = dataset_name;
  report.model = kind;
  report.config = cfg;
  report.seeds.resize(static_cast<std::size_t>(n_repeats));
  report.rmse_splits.resize(static_cast<std::size_t>(n_repeats));
  report.wall_time_s.resize(static_cast<std::size_t>(n_repeats));
  report.split_fingerprints.resize(static_cast<std::size_t>(n_repeats));

  parallel_for(n_repeats, jobs, [&](int j) {
    const std::uint64_t split_seed = base_seed + static_cast<std::uint64_t>(j);
    const auto t0 = std::chrono::steady_clock::now();
    HoldoutSplit split = holdout_split(ds, ratio, split_seed);
    TrainConfig cfg_j = cfg;
    cfg_j.seed = split_seed;
    TrainedModel model = fit_kind(kind, split.train, cfg_j);

    std::vector<double> preds(split.test.size()), truths(split.test.size());
    for (std::size_t t = 0; t < split.test.size(); ++t) {
      const Triple& triple = split.test[t];
      preds[t] = model.predict(triple.user, triple.item);
      truths[t] = triple.rating;
    }
    const auto t1 = std::chrono::steady_clock::now();
    const auto jj = static_cast<std::size_t>(j);
    report.seeds[jj] = split_seed;
    report.rmse_splits[jj] = rmse(preds, truths);
    report.wall_time_s[jj] = std::chrono::duration<double>(t1 - t0).count();
    report.split_fingerprints[jj] = fingerprint_indices(split.test.indices);
  });

  finalize_stats(report);
  return report;
}

SweepReport sweep(const Dataset& ds, const std::string& dataset_name, ModelKind kind,
                  TrainConfig cfg_template, SweepAxis axis, const std::vector<double>& grid,
                  int n_repeats, std::uint64_t base_seed, double ratio, int jobs) {
  if (grid.empty()) throw std::invalid_argument("sweep: empty grid");

  SweepReport report;
  report.dataset = dataset_name;
  report.model = kind;
  report.axis = axis;
  report.grid = grid;
  report.points.reserve(grid.size());
  for (double value : grid) {
    TrainConfig cfg = cfg_template;
    if (axis == SweepAxis::k) {
      const int k = static_cast<int>(std::llround(value));
      if (k < 1 || static_cast<double>(k) != value) {
        throw std::invalid_argument("sweep: k grid values must be positive integers");
      }
      cfg.k = k;
    } else {
      if (value < 0.0) throw std::invalid_argument("sweep: beta grid values must be nonnegative");
      cfg.beta = value;
    }
    // Shared base seed: every grid point sees identical splits.
    report.points.push_back(
        run_holdout_protocol(ds, dataset_name, kind, cfg, n_repeats, base_seed, ratio, jobs));
  }

  std::size_t best = 0;
  for (std::size_t p = 1; p < report.points.size(); ++p) {
    if (report.points[p].rmse_mean < report.points[best].rmse_mean) best = p;
  }
  report.argmin_value = grid[best];
  return report;
}

RobustnessReport robustness_experiment(const Dataset& ds, const std::string& dataset_name,
                                       const std::vector<ModelKind>& kinds, const std::vector<int>& best_k,
                                       TrainConfig cfg, int k_robust, int n_repeats,
                                       std::uint64_t base_seed, double ratio, int jobs) {
  if (kinds.size() != best_k.size()) {
    throw std::invalid_argument("robustness_experiment: kinds and best_k must align");
  }
  if (k_robust < 1) throw std::invalid_argument("robustness_experiment: k_robust must be >= 1");

  RobustnessReport report;
  report.dataset = dataset_name;
  report.k_robust = k_robust;
  report.config = cfg;
  for (std::size_t m = 0; m < kinds.size(); ++m) {
    TrainConfig cfg_best = cfg;
    cfg_best.k = best_k[m];
    TrainConfig cfg_robust = cfg;
    cfg_robust.k = k_robust;
    EvalReport at_best =
        run_holdout_protocol(ds, dataset_name, kinds[m], cfg_best, n_repeats, base_seed, ratio, jobs);
    EvalReport at_robust =
        run_holdout_protocol(ds, dataset_name, kinds[m], cfg_robust, n_repeats, base_seed, ratio, jobs);
    RobustnessEntry entry;
    entry.model = kinds[m];
    entry.best_k = best_k[m];
    entry.rmse_best = at_best.rmse_mean;
    entry.rmse_robust = at_robust.rmse_mean;
    entry.pct_increase = 100.0 * (at_robust.rmse_mean - at_best.rmse_mean) / at_best.rmse_mean;
    report.entries.push_back(entry);
  }
  return report;
}

LatentPositions latent_positions(const VibDmlModel& m) { return LatentPositions{m.users.mu, m.items.mu}; }

LatentPositions latent_positions(const MetricFModel& m) { return LatentPositions{m.P, m.Q}; }

std::optional<double> spearman_rank_correlation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("spearman: length mismatch");
  const std::size_t n = a.size();
  if (n < 2) return std::nullopt;

  auto ranks = [](std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<double> rank(n);
    std::size_t i = 0;
    while (i < n) {
      std::size_t j = i;
      while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
      const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
      for (std::size_t t = i; t <= j; ++t) rank[order[t]] = avg;
      i = j + 1;
    }
    return rank;
  };

  const std::vector<double> ra = ranks(a);
  const std::vector<double> rb = ranks(b);
  const double mean = (static_cast<double>(n) + 1.0) / 2.0;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double da = ra[i] - mean;
    const double db = rb[i] - mean;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  return cov / std::sqrt(va * vb);
}

NeighborReport neighbor_consistency(const LatentPositions& positions, const DatasetView& ratings,
                                    std::span<const std::int32_t> probe_users) {
  NeighborReport report;
  report.probes.reserve(probe_users.size());

  // Bucket the view's triples by user once.
  std::vector<std::vector<std::size_t>> by_user(static_cast<std::size_t>(positions.users.rows()));
  for (std::size_t t = 0; t < ratings.size(); ++t) {
    const Triple& triple = ratings[t];
    by_user[static_cast<std::size_t>(triple.user)].push_back(t);
  }

  double rho_sum = 0.0;
  int rho_count = 0;
  for (std::int32_t u : probe_users) {
    if (u < 0 || u >= positions.users.rows()) {
      throw std::invalid_argument("neighbor_consistency: probe user " + std::to_string(u) + " out of range");
    }
    const auto& rows = by_user[static_cast<std::size_t>(u)];
    if (rows.empty()) {
      throw std::invalid_argument("neighbor_consistency: probe user " + std::to_string(u) +
                                  " has no ratings in the given view");
    }
    ProbeResult probe;
    probe.user = u;
    std::vector<double> rating_vals, neg_distances;
    std::map<double, std::pair<double, int>> level_acc;
    for (std::size_t t : rows) {
      const Triple& triple = ratings[t];
      const double d =
          euclidean_distance(positions.users.row(u), positions.items.row(triple.item), 0.0);
      probe.items.push_back(ProbeItem{triple.item, triple.rating, d});
      rating_vals.push_back(triple.rating);
      neg_distances.push_back(-d);
      auto& acc = level_acc[triple.rating];
      acc.first += d;
      acc.second += 1;
    }
    for (const auto& [level, acc] : level_acc) {
      probe.mean_distance_by_rating[level] = acc.first / acc.second;
    }
    probe.spearman = spearman_rank_correlation(rating_vals, neg_distances);
    if (probe.spearman) {
      rho_sum += *probe.spearman;
      ++rho_count;
    }
    report.probes.push_back(std::move(probe));
  }
  if (rho_count > 0) report.mean_spearman = rho_sum / rho_count;
  return report;
}

namespace {

void export_positions(std::ofstream& out, const char* kind, const MatrixRM& mu, const MatrixRM* logvar) {
  for (Eigen::Index r = 0; r < mu.rows(); ++r) {
    out << kind << ' ' << r;
    for (Eigen::Index c = 0; c < mu.cols(); ++c) out << ' ' << format_double(mu(r, c));
    if (logvar) {
      for (Eigen::Index c = 0; c < logvar->cols(); ++c) out << ' ' << format_double(std::exp((*logvar)(r, c)));
    }
    out << '\n';
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("export_embeddings: cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void export_embeddings(const VibDmlModel& m, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  export_positions(out, "user", m.users.mu, &m.users.logvar);
  export_positions(out, "item", m.items.mu, &m.items.logvar);
  if (!out) throw std::runtime_error("export_embeddings: write failed for " + path.string());
}

void export_embeddings(const MetricFModel& m, const std::filesystem::path& path) {
  std::ofstream out = open_for_write(path);
  export_positions(out, "user", m.P, nullptr);
  export_positions(out, "item", m.Q, nullptr);
  if (!out) throw std::runtime_error("export_embeddings: write failed for " + path.string());
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["dataset"] = report.dataset;
  j["model"] = to_string(report.model);
  j["config"] = config_to_json(report.config, report.seeds);
  j["rmse_splits"] = report.rmse_splits;
  j["rmse_mean"] = report.rmse_mean;
  j["rmse_std"] = report.rmse_std;
  j["wall_time_s"] = report.wall_time_s;
  return j;
}

nlohmann::json sweep_to_json(const SweepReport& report) {
  nlohmann::json j;
  j["dataset"] = report.dataset;
  j["model"] = to_string(report.model);
  j["axis"] = report.axis == SweepAxis::k ? "k" : "beta";
  j["grid"] = report.grid;
  j["points"] = nlohmann::json::array();
  for (const EvalReport& point : report.points) j["points"].push_back(report_to_json(point));
  j["argmin"] = report.argmin_value;
  return j;
}

nlohmann::json robustness_to_json(const RobustnessReport& report) {
  nlohmann::json j;
  j["dataset"] = report.dataset;
  j["k_robust"] = report.k_robust;
  j["config"] = config_to_json(report.config, {});
  j["entries"] = nlohmann::json::array();
  for (const RobustnessEntry& e : report.entries) {
    j["entries"].push_back({{"model", to_string(e.model)},
                            {"best_k", e.best_k},
                            {"rmse_best", e.rmse_best},
                            {"rmse_robust", e.rmse_robust},
                            {"pct_increase", e.pct_increase}});
  }
  return j;
}

nlohmann::json neighbor_to_json(const NeighborReport& report) {
  nlohmann::json j;
  j["probes"] = nlohmann::json::array();
  for (const ProbeResult& p : report.probes) {
    nlohmann::json pj;
    pj["user"] = p.user;
    if (p.spearman) {
      pj["spearman"] = *p.spearman;
    } else {
      pj["spearman"] = nullptr;
    }
    pj["mean_distance_by_rating"] = nlohmann::json::object();
    for (const auto& [level, d] : p.mean_distance_by_rating) {
      pj["mean_distance_by_rating"][format_double(level)] = d;
    }
    pj["items"] = nlohmann::json::array();
    for (const ProbeItem& it : p.items) {
      pj["items"].push_back({it.item, it.rating, it.distance});
    }
    j["probes"].push_back(std::move(pj));
  }
  if (report.mean_spearman) {
    j["mean_spearman"] = *report.mean_spearman;
  } else {
    j["mean_spearman"] = nullptr;
  }
  return j;
}

nlohmann::json strip_nondeterministic_fields(nlohmann::json report) {
  report.erase("wall_time_s");
  if (report.contains("points")) {
    for (auto& point : report["points"]) point.erase("wall_time_s");
  }
  return report;
}

}  // namespace vibrec
