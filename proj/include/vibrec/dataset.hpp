#ifndef VIBREC_DATASET_HPP_
#define VIBREC_DATASET_HPP_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "vibrec/common.hpp"

namespace vibrec {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Triple {
  std::int32_t user;
  std::int32_t item;
  double rating;
};

// Indexed rating triples with dense entity ids. Immutable after loading and
// safe to share read-only across threads.
struct Dataset {
  std::vector<Triple> triples;
  std::int32_t n_users = 0;
  std::int32_t n_items = 0;
  double r_min = 0.0;
  double r_max = 0.0;
  std::vector<std::string> user_ids;  // dense index -> raw id
  std::vector<std::string> item_ids;
  std::unordered_map<std::string, std::int32_t> user_index;  // raw id -> dense index
  std::unordered_map<std::string, std::int32_t> item_index;
  // Duplicate (user,item) pairs in the source: the last occurrence's rating
  // wins (kept at the first occurrence's position) and the drop is counted.
  std::size_t duplicates_dropped = 0;

  double mean_rating() const;
};

// Read-only selection of triples from a parent dataset. Entity counts are the
// parent's, so split views share one id space.
struct DatasetView {
  const Dataset* parent = nullptr;
  std::vector<std::int64_t> indices;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  const Triple& operator[](std::size_t t) const { return parent->triples[static_cast<std::size_t>(indices[t])]; }
  std::int32_t n_users() const { return parent->n_users; }
  std::int32_t n_items() const { return parent->n_items; }
  double r_min() const { return parent->r_min; }
  double r_max() const { return parent->r_max; }
  double mean_rating() const;
};

DatasetView full_view(const Dataset& ds);

struct HoldoutSplit {
  DatasetView train;
  DatasetView test;
  std::uint64_t seed = 0;
  double ratio = 0.0;
};

// MovieLens 100K u.data: user<TAB>item<TAB>rating<TAB>timestamp, ratings 1..5.
Dataset load_movielens(const std::filesystem::path& path);

// FilmTrust: "user item rating" separated by spaces, ratings 0.5..4.0.
Dataset load_filmtrust(const std::filesystem::path& path);

// Epinions: whitespace-separated "user item rating ..."; columns beyond the
// third are ignored (file layout varies by distribution). Ratings 1..5.
Dataset load_epinions(const std::filesystem::path& path);

// Canonical format: "#vibrec-ratings v1 r_min=<x> r_max=<y>", a
// "user,item,rating" header line, then CSV rows with raw ids. Round-trips
// triples, ranges and index maps exactly.
Dataset read_canonical(const std::filesystem::path& path);
void write_canonical(const Dataset& ds, const std::filesystem::path& path);

// Uniform random permutation of triple indices under `seed`; the first
// round(ratio*N) go to train. Index lists are returned sorted ascending.
HoldoutSplit holdout_split(const Dataset& ds, double ratio, std::uint64_t seed);

struct SyntheticData {
  Dataset dataset;
  MatrixRM user_positions;  // n_users x k_true planted points
  MatrixRM item_positions;  // n_items x k_true
};

// Plants user/item points in a k_true-dimensional space and emits
// rating = clamp(r_max - ||p_u - q_i|| + N(0, noise_sd), r_min, r_max)
// snapped to the rating grid (0.5 steps when r_min = 0.5, integers otherwise).
// Ground truth for recoverability and geometry oracles.
SyntheticData synth_generate(int n_users, int n_items, int k_true, double noise_sd,
                             double density, double r_min, double r_max, std::uint64_t seed);

}  // namespace vibrec

#endif  // VIBREC_DATASET_HPP_
