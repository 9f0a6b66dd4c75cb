#ifndef VIBREC_TEST_SUPPORT_HPP_
#define VIBREC_TEST_SUPPORT_HPP_

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    std::mt19937_64 rng(std::random_device{}());
    path_ = base / ("vibrec_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path file(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::filesystem::path write_file(const TempDir& dir, const std::string& name,
                                        const std::string& content) {
  auto p = dir.file(name);
  std::ofstream out(p);
  out << content;
  return p;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// Independent central-difference oracle: perturbs one scalar through the
// provided accessors and differentiates an arbitrary loss closure. Written
// against no production gradient code on purpose.
inline double central_difference(const std::function<double()>& loss, const std::function<double()>& get,
                                 const std::function<void(double)>& set, double h) {
  const double orig = get();
  set(orig + h);
  const double plus = loss();
  set(orig - h);
  const double minus = loss();
  set(orig);
  return (plus - minus) / (2.0 * h);
}

// |a - b| <= max(abs_floor, rel * max(|a|, |b|))
inline bool close_rel(double a, double b, double rel, double abs_floor) {
  const double diff = std::abs(a - b);
  return diff <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

}  // namespace testsupport

#endif  // VIBREC_TEST_SUPPORT_HPP_
