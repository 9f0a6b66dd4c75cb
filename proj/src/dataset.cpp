#include "vibrec/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace vibrec {

namespace {

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_rating(const std::string& token, const std::filesystem::path& path, std::size_t line_no) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto res = std::from_chars(begin, end, value);
  if (res.ec != std::errc{} || res.ptr != end) {
    throw ParseError(path.string() + ":" + std::to_string(line_no) + ": malformed rating '" + token + "'");
  }
  return value;
}

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string> split_whitespace(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream iss(line);
  std::string tok;
  while (iss >> tok) out.push_back(tok);
  return out;
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

struct DatasetBuilder {
  Dataset ds;
  std::unordered_map<std::int64_t, std::size_t> pair_pos;  // (user,item) -> triple position

  explicit DatasetBuilder(double r_min, double r_max) {
    ds.r_min = r_min;
    ds.r_max = r_max;
  }

  std::int32_t intern_user(const std::string& raw) {
    auto [it, inserted] = ds.user_index.try_emplace(raw, ds.n_users);
    if (inserted) {
      ds.user_ids.push_back(raw);
      ++ds.n_users;
    }
    return it->second;
  }

  std::int32_t intern_item(const std::string& raw) {
    auto [it, inserted] = ds.item_index.try_emplace(raw, ds.n_items);
    if (inserted) {
      ds.item_ids.push_back(raw);
      ++ds.n_items;
    }
    return it->second;
  }

  void add(const std::string& user_raw, const std::string& item_raw, double rating,
           const std::filesystem::path& path, std::size_t line_no) {
    if (!std::isfinite(rating) || rating < ds.r_min || rating > ds.r_max) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": rating " + format_double(rating) +
                       " outside [" + format_double(ds.r_min) + ", " + format_double(ds.r_max) + "]");
    }
    const std::int32_t u = intern_user(user_raw);
    const std::int32_t i = intern_item(item_raw);
    const std::int64_t key = (static_cast<std::int64_t>(u) << 32) | static_cast<std::uint32_t>(i);
    auto [it, inserted] = pair_pos.try_emplace(key, ds.triples.size());
    if (inserted) {
      ds.triples.push_back(Triple{u, i, rating});
    } else {
      ds.triples[it->second].rating = rating;  // last occurrence wins
      ++ds.duplicates_dropped;
    }
  }

  Dataset finish(const std::filesystem::path& path) {
    if (ds.triples.empty()) {
      throw ParseError(path.string() + ": no triples");
    }
    return std::move(ds);
  }
};

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ParseError(path.string() + ": cannot open file");
  }
  return in;
}

}  // namespace

double Dataset::mean_rating() const {
  if (triples.empty()) return 0.0;
  double sum = 0.0;
  for (const Triple& t : triples) sum += t.rating;
  return sum / static_cast<double>(triples.size());
}

double DatasetView::mean_rating() const {
  if (indices.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < indices.size(); ++t) sum += (*this)[t].rating;
  return sum / static_cast<double>(indices.size());
}

DatasetView full_view(const Dataset& ds) {
  DatasetView v;
  v.parent = &ds;
  v.indices.resize(ds.triples.size());
  std::iota(v.indices.begin(), v.indices.end(), std::int64_t{0});
  return v;
}

Dataset load_movielens(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  DatasetBuilder builder(1.0, 5.0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_on(line, '\t');
    if (fields.size() != 4 || fields[0].empty() || fields[1].empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected user<TAB>item<TAB>rating<TAB>timestamp");
    }
    builder.add(fields[0], fields[1], parse_rating(fields[2], path, line_no), path, line_no);
  }
  return builder.finish(path);
}

Dataset load_filmtrust(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  DatasetBuilder builder(0.5, 4.0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto fields = split_whitespace(line);
    if (fields.size() != 3) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 'user item rating', got " +
                       std::to_string(fields.size()) + " fields");
    }
    builder.add(fields[0], fields[1], parse_rating(fields[2], path, line_no), path, line_no);
  }
  return builder.finish(path);
}

Dataset load_epinions(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  DatasetBuilder builder(1.0, 5.0);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    auto fields = split_whitespace(line);
    if (fields.size() < 3) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected at least 'user item rating', got " + std::to_string(fields.size()) + " fields");
    }
    builder.add(fields[0], fields[1], parse_rating(fields[2], path, line_no), path, line_no);
  }
  return builder.finish(path);
}

Dataset read_canonical(const std::filesystem::path& path) {
  std::ifstream in = open_or_throw(path);
  std::string line;
  if (!std::getline(in, line)) {
    throw ParseError(path.string() + ": header mismatch (empty file)");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto head = split_whitespace(line);
  if (head.size() < 2 || head[0] != "#vibrec-ratings" || head[1] != "v1") {
    throw ParseError(path.string() + ": header mismatch (expected '#vibrec-ratings v1 ...')");
  }
  double r_min = 0.0, r_max = 0.0;
  bool have_min = false, have_max = false;
  for (std::size_t f = 2; f < head.size(); ++f) {
    if (head[f].rfind("r_min=", 0) == 0) {
      r_min = parse_rating(head[f].substr(6), path, 1);
      have_min = true;
    } else if (head[f].rfind("r_max=", 0) == 0) {
      r_max = parse_rating(head[f].substr(6), path, 1);
      have_max = true;
    }
  }
  if (!have_min || !have_max) {
    throw ParseError(path.string() + ": range metadata absent from header");
  }
  if (!(r_min < r_max)) {
    throw ParseError(path.string() + ": invalid range r_min >= r_max");
  }
  if (!std::getline(in, line)) {
    throw ParseError(path.string() + ": missing 'user,item,rating' header line");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "user,item,rating") {
    throw ParseError(path.string() + ":2: header mismatch (expected 'user,item,rating')");
  }
  DatasetBuilder builder(r_min, r_max);
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_on(line, ',');
    if (fields.size() != 3 || fields[0].empty() || fields[1].empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 'user,item,rating'");
    }
    builder.add(fields[0], fields[1], parse_rating(fields[2], path, line_no), path, line_no);
  }
  try {
    return builder.finish(path);
  } catch (const ParseError&) {
    throw ParseError(path.string() + ": empty dataset (header only)");
  }
}

void write_canonical(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw ParseError(path.string() + ": cannot open for writing");
  }
  out << "#vibrec-ratings v1 r_min=" << format_double(ds.r_min) << " r_max=" << format_double(ds.r_max) << "\n";
  out << "user,item,rating\n";
  for (const Triple& t : ds.triples) {
    const std::string& u = ds.user_ids[static_cast<std::size_t>(t.user)];
    const std::string& i = ds.item_ids[static_cast<std::size_t>(t.item)];
    if (u.find_first_of(",\n\r") != std::string::npos || i.find_first_of(",\n\r") != std::string::npos) {
      throw ParseError(path.string() + ": raw id contains a separator character");
    }
    out << u << ',' << i << ',' << format_double(t.rating) << '\n';
  }
  if (!out) {
    throw ParseError(path.string() + ": write failed");
  }
}

HoldoutSplit holdout_split(const Dataset& ds, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw std::invalid_argument("holdout_split: ratio must be in (0, 1)");
  }
  const std::int64_t n = static_cast<std::int64_t>(ds.triples.size());
  if (n == 0) {
    throw std::invalid_argument("holdout_split: empty dataset");
  }
  const std::int64_t n_train = std::llround(ratio * static_cast<double>(n));
  if (n_train <= 0 || n_train >= n) {
    throw std::invalid_argument("holdout_split: dataset too small for a non-empty train and test set");
  }
  std::vector<std::int64_t> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), std::int64_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  HoldoutSplit split;
  split.seed = seed;
  split.ratio = ratio;
  split.train.parent = &ds;
  split.test.parent = &ds;
  split.train.indices.assign(perm.begin(), perm.begin() + n_train);
  split.test.indices.assign(perm.begin() + n_train, perm.end());
  std::sort(split.train.indices.begin(), split.train.indices.end());
  std::sort(split.test.indices.begin(), split.test.indices.end());
  return split;
}

SyntheticData synth_generate(int n_users, int n_items, int k_true, double noise_sd,
                             double density, double r_min, double r_max, std::uint64_t seed) {
  if (n_users <= 0 || n_items <= 0 || k_true <= 0) {
    throw std::invalid_argument("synth_generate: counts must be positive");
  }
  if (!(density > 0.0 && density <= 1.0)) {
    throw std::invalid_argument("synth_generate: density must be in (0, 1]");
  }
  if (!(r_min < r_max) || noise_sd < 0.0) {
    throw std::invalid_argument("synth_generate: invalid rating range or noise");
  }

  SyntheticData out;
  std::mt19937_64 rng(seed);

  // Point scale chosen so typical pair distances sit mid-range: with
  // p,q ~ N(0, sigma^2 I), ||p-q|| concentrates near sigma*sqrt(2*k).
  const double sigma = (r_max - r_min) / (2.0 * std::sqrt(2.0 * static_cast<double>(k_true)));
  out.user_positions.resize(n_users, k_true);
  out.item_positions.resize(n_items, k_true);
  fill_normal(out.user_positions, rng, 0.0, sigma);
  fill_normal(out.item_positions, rng, 0.0, sigma);

  const std::int64_t total_pairs = static_cast<std::int64_t>(n_users) * n_items;
  const std::int64_t count = std::max<std::int64_t>(1, std::llround(density * static_cast<double>(total_pairs)));
  std::vector<std::int64_t> pair_ids(static_cast<std::size_t>(total_pairs));
  std::iota(pair_ids.begin(), pair_ids.end(), std::int64_t{0});
  std::shuffle(pair_ids.begin(), pair_ids.end(), rng);
  pair_ids.resize(static_cast<std::size_t>(count));
  std::sort(pair_ids.begin(), pair_ids.end());

  const double step = (r_min == 0.5) ? 0.5 : 1.0;
  std::normal_distribution<double> noise(0.0, noise_sd);

  Dataset& ds = out.dataset;
  ds.r_min = r_min;
  ds.r_max = r_max;
  ds.n_users = n_users;
  ds.n_items = n_items;
  ds.user_ids.reserve(static_cast<std::size_t>(n_users));
  ds.item_ids.reserve(static_cast<std::size_t>(n_items));
  for (int u = 0; u < n_users; ++u) {
    ds.user_ids.push_back("u" + std::to_string(u));
    ds.user_index.emplace(ds.user_ids.back(), u);
  }
  for (int i = 0; i < n_items; ++i) {
    ds.item_ids.push_back("i" + std::to_string(i));
    ds.item_index.emplace(ds.item_ids.back(), i);
  }
  ds.triples.reserve(pair_ids.size());
  for (std::int64_t pid : pair_ids) {
    const auto u = static_cast<std::int32_t>(pid / n_items);
    const auto i = static_cast<std::int32_t>(pid % n_items);
    const double d = (out.user_positions.row(u) - out.item_positions.row(i)).norm();
    double r = r_max - d;
    if (noise_sd > 0.0) r += noise(rng);
    r = std::clamp(r, r_min, r_max);
    r = r_min + std::round((r - r_min) / step) * step;
    r = std::clamp(r, r_min, r_max);
    ds.triples.push_back(Triple{u, i, r});
  }
  return out;
}

}  // namespace vibrec
