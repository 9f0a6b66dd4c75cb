#ifndef VIBREC_EVALUATE_HPP_
#define VIBREC_EVALUATE_HPP_

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "vibrec/baselines.hpp"
#include "vibrec/dataset.hpp"
#include "vibrec/vibdml.hpp"

namespace vibrec {

// sqrt(mean squared error), Eq.-style definition over aligned sequences.
double rmse(std::span<const double> predictions, std::span<const double> truths);

struct EvalReport {
  std::string dataset;
  ModelKind model = ModelKind::vibdml;
  TrainConfig config;
  std::vector<std::uint64_t> seeds;          // split seed per repeat (base + j)
  std::vector<double> rmse_splits;
  double rmse_mean = 0.0;
  double rmse_std = 0.0;                     // sample standard deviation
  std::vector<double> wall_time_s;
  std::vector<std::uint64_t> split_fingerprints;  // test-index hash; not serialized
};

// Repeated hold-out: split with seed base+j (ratio defaults to 0.9), fit on
// train, clamped eval predictions on test, RMSE per repeat. Splits depend only
// on (dataset, ratio, base seed), so different model kinds see paired splits.
EvalReport run_holdout_protocol(const Dataset& ds, const std::string& dataset_name, ModelKind kind,
                                TrainConfig cfg, int n_repeats, std::uint64_t base_seed,
                                double ratio = 0.9, int jobs = 1);

enum class SweepAxis { k, beta };

struct SweepReport {
  std::string dataset;
  ModelKind model = ModelKind::vibdml;
  SweepAxis axis = SweepAxis::k;
  std::vector<double> grid;
  std::vector<EvalReport> points;
  double argmin_value = 0.0;  // grid value with minimal mean RMSE; ties -> smaller value
};

SweepReport sweep(const Dataset& ds, const std::string& dataset_name, ModelKind kind,
                  TrainConfig cfg_template, SweepAxis axis, const std::vector<double>& grid,
                  int n_repeats, std::uint64_t base_seed, double ratio = 0.9, int jobs = 1);

struct RobustnessEntry {
  ModelKind model = ModelKind::vibdml;
  int best_k = 0;
  double rmse_best = 0.0;
  double rmse_robust = 0.0;
  double pct_increase = 0.0;  // 100 * (rmse_robust - rmse_best) / rmse_best
};

struct RobustnessReport {
  std::string dataset;
  int k_robust = 500;
  TrainConfig config;
  std::vector<RobustnessEntry> entries;
};

// Evaluates each model at its best k and at k_robust on identical paired
// splits. Computes the percent increases; asserts nothing itself.
RobustnessReport robustness_experiment(const Dataset& ds, const std::string& dataset_name,
                                       const std::vector<ModelKind>& kinds,
                                       const std::vector<int>& best_k, TrainConfig cfg, int k_robust,
                                       int n_repeats, std::uint64_t base_seed, double ratio = 0.9,
                                       int jobs = 1);

// Latent mean positions of a distance-based model.
struct LatentPositions {
  MatrixRM users;
  MatrixRM items;
};
LatentPositions latent_positions(const VibDmlModel& m);
LatentPositions latent_positions(const MetricFModel& m);

struct ProbeItem {
  std::int32_t item;
  double rating;
  double distance;
};

struct ProbeResult {
  std::int32_t user = 0;
  std::vector<ProbeItem> items;
  // Spearman rank correlation between rating and negative distance; absent
  // when undefined (fewer than 2 ratings or all ratings tied).
  std::optional<double> spearman;
  std::map<double, double> mean_distance_by_rating;
};

struct NeighborReport {
  std::vector<ProbeResult> probes;
  std::optional<double> mean_spearman;  // over probes with a defined correlation
};

// Distances from each probe user's latent mean to the latent means of the
// items the user rated in `ratings`.
NeighborReport neighbor_consistency(const LatentPositions& positions, const DatasetView& ratings,
                                    std::span<const std::int32_t> probe_users);

// Text export, one entity per line: "kind id mu_1 .. mu_k [var_1 .. var_k]".
// VIB-DML writes posterior variances; MetricF has none.
void export_embeddings(const VibDmlModel& m, const std::filesystem::path& path);
void export_embeddings(const MetricFModel& m, const std::filesystem::path& path);

nlohmann::json report_to_json(const EvalReport& report);
nlohmann::json sweep_to_json(const SweepReport& report);
nlohmann::json robustness_to_json(const RobustnessReport& report);
nlohmann::json neighbor_to_json(const NeighborReport& report);

// Report fields excluded from byte-identity comparisons (timings vary run to
// run; everything else must reproduce exactly).
nlohmann::json strip_nondeterministic_fields(nlohmann::json report);

// Spearman rank correlation with average ranks for ties; nullopt when either
// side has zero rank variance.
std::optional<double> spearman_rank_correlation(std::span<const double> a, std::span<const double> b);

}  // namespace vibrec

#endif  // VIBREC_EVALUATE_HPP_
