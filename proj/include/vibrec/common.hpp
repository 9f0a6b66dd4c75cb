#ifndef VIBREC_COMMON_HPP_
#define VIBREC_COMMON_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <random>

namespace vibrec {

inline constexpr const char* kVersion = "1.0.0";

// Embedding tables are accessed row-wise almost exclusively; row-major keeps
// each entity's vector contiguous.
using MatrixRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

// splitmix64. Used to derive independent generator streams from one run seed
// (e.g. initialization vs. shuffling) without correlated state.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Fills row by row so the draw order is independent of Eigen storage order.
void fill_normal(MatrixRM& m, std::mt19937_64& rng, double mean, double sd);

// Runs body(0..n-1) on up to `jobs` worker threads. jobs <= 1 runs inline.
// Each body call must be independent; results keyed by index stay deterministic
// regardless of scheduling.
void parallel_for(int n, int jobs, const std::function<void(int)>& body);

}  // namespace vibrec

#endif  // VIBREC_COMMON_HPP_
