#include "vibrec/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace vibrec {

namespace {

constexpr char kMagic[8] = {'V', 'I', 'B', 'R', 'E', 'C', 'K', '1'};

struct Writer {
  std::ofstream out;

  explicit Writer(const std::filesystem::path& path) : out(path, std::ios::binary) {
    if (!out) throw std::runtime_error("checkpoint: cannot open " + path.string() + " for writing");
  }

  void raw(const void* data, std::size_t bytes) { out.write(static_cast<const char*>(data), bytes); }
  void u32(std::uint32_t v) { raw(&v, sizeof v); }
  void u64(std::uint64_t v) { raw(&v, sizeof v); }
  void i64(std::int64_t v) { raw(&v, sizeof v); }
  void f64(double v) { raw(&v, sizeof v); }

  void matrix(const MatrixRM& m) {
    i64(m.rows());
    i64(m.cols());
    raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  }
  void vector(const VectorXd& v) {
    i64(v.size());
    raw(v.data(), sizeof(double) * static_cast<std::size_t>(v.size()));
  }
  void ivector(const Eigen::VectorXi& v) {
    i64(v.size());
    raw(v.data(), sizeof(int) * static_cast<std::size_t>(v.size()));
  }
  void config(const TrainConfig& c) {
    i64(c.epochs);
    f64(c.learning_rate);
    i64(c.batch_size);
    f64(c.beta);
    i64(c.k);
    u64(c.seed);
    f64(c.init_sd);
    f64(c.distance_floor);
    f64(c.l2);
  }
};

struct Reader {
  std::ifstream in;
  std::filesystem::path path;

  explicit Reader(const std::filesystem::path& p) : in(p, std::ios::binary), path(p) {
    if (!in) throw std::runtime_error("checkpoint: cannot open " + p.string());
  }

  void raw(void* data, std::size_t bytes) {
    in.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) {
      throw std::runtime_error("checkpoint: truncated file " + path.string());
    }
  }
  std::uint32_t u32() { std::uint32_t v; raw(&v, sizeof v); return v; }
  std::uint64_t u64() { std::uint64_t v; raw(&v, sizeof v); return v; }
  std::int64_t i64() { std::int64_t v; raw(&v, sizeof v); return v; }
  double f64() { double v; raw(&v, sizeof v); return v; }

  MatrixRM matrix() {
    const std::int64_t rows = i64();
    const std::int64_t cols = i64();
    if (rows < 0 || cols < 0 || rows > (1 << 26) || cols > (1 << 20)) {
      throw std::runtime_error("checkpoint: implausible matrix shape in " + path.string());
    }
    MatrixRM m(rows, cols);
    raw(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
  }
  VectorXd vector() {
    const std::int64_t n = i64();
    if (n < 0 || n > (1 << 26)) throw std::runtime_error("checkpoint: implausible vector size");
    VectorXd v(n);
    raw(v.data(), sizeof(double) * static_cast<std::size_t>(n));
    return v;
  }
  Eigen::VectorXi ivector() {
    const std::int64_t n = i64();
    if (n < 0 || n > (1 << 26)) throw std::runtime_error("checkpoint: implausible vector size");
    Eigen::VectorXi v(n);
    raw(v.data(), sizeof(int) * static_cast<std::size_t>(n));
    return v;
  }
  TrainConfig config() {
    TrainConfig c;
    c.epochs = static_cast<int>(i64());
    c.learning_rate = f64();
    c.batch_size = static_cast<int>(i64());
    c.beta = f64();
    c.k = static_cast<int>(i64());
    c.seed = u64();
    c.init_sd = f64();
    c.distance_floor = f64();
    c.l2 = f64();
    return c;
  }
};

}  // namespace

ModelKind checkpoint_kind(const AnyModel& model) {
  if (std::holds_alternative<VibDmlModel>(model)) return ModelKind::vibdml;
  if (std::holds_alternative<MetricFModel>(model)) return ModelKind::metricf;
  return std::get<DotProductModel>(model).kind;
}

void save_checkpoint(const AnyModel& model, const std::filesystem::path& path) {
  Writer w(path);
  w.raw(kMagic, sizeof kMagic);
  const ModelKind kind = checkpoint_kind(model);
  w.u32(static_cast<std::uint32_t>(kind));

  if (const auto* vib = std::get_if<VibDmlModel>(&model)) {
    w.i64(vib->k);
    w.f64(vib->beta_user);
    w.f64(vib->beta_item);
    w.f64(vib->r_min);
    w.f64(vib->r_max);
    w.f64(vib->distance_floor);
    w.f64(vib->biases.r_global);
    w.config(vib->config);
    w.matrix(vib->users.mu);
    w.matrix(vib->users.logvar);
    w.matrix(vib->items.mu);
    w.matrix(vib->items.logvar);
    w.vector(vib->biases.user);
    w.vector(vib->biases.item);
    w.ivector(vib->user_obs);
    w.ivector(vib->item_obs);
  } else if (const auto* mf = std::get_if<MetricFModel>(&model)) {
    w.f64(mf->r_global);
    w.f64(mf->r_min);
    w.f64(mf->r_max);
    w.f64(mf->distance_floor);
    w.config(mf->config);
    w.matrix(mf->P);
    w.matrix(mf->Q);
    w.vector(mf->b_user);
    w.vector(mf->b_item);
  } else {
    const auto& dot = std::get<DotProductModel>(model);
    w.f64(dot.r_global);
    w.f64(dot.r_min);
    w.f64(dot.r_max);
    w.f64(dot.l2);
    w.config(dot.config);
    w.matrix(dot.P);
    w.matrix(dot.Q);
    w.vector(dot.b_user);
    w.vector(dot.b_item);
  }
  if (!w.out) throw std::runtime_error("checkpoint: write failed for " + path.string());
}

AnyModel load_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.raw(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("checkpoint: " + path.string() + " is not a vibrec checkpoint (bad magic)");
  }
  const auto kind = static_cast<ModelKind>(r.u32());
  switch (kind) {
    case ModelKind::vibdml: {
      VibDmlModel m;
      m.k = static_cast<int>(r.i64());
      m.beta_user = r.f64();
      m.beta_item = r.f64();
      m.r_min = r.f64();
      m.r_max = r.f64();
      m.distance_floor = r.f64();
      m.biases.r_global = r.f64();
      m.config = r.config();
      m.users.mu = r.matrix();
      m.users.logvar = r.matrix();
      m.items.mu = r.matrix();
      m.items.logvar = r.matrix();
      m.biases.user = r.vector();
      m.biases.item = r.vector();
      m.user_obs = r.ivector();
      m.item_obs = r.ivector();
      return m;
    }
    case ModelKind::metricf: {
      MetricFModel m;
      m.r_global = r.f64();
      m.r_min = r.f64();
      m.r_max = r.f64();
      m.distance_floor = r.f64();
      m.config = r.config();
      m.P = r.matrix();
      m.Q = r.matrix();
      m.b_user = r.vector();
      m.b_item = r.vector();
      return m;
    }
    case ModelKind::biassvd:
    case ModelKind::pmf: {
      DotProductModel m;
      m.kind = kind;
      m.r_global = r.f64();
      m.r_min = r.f64();
      m.r_max = r.f64();
      m.l2 = r.f64();
      m.config = r.config();
      m.P = r.matrix();
      m.Q = r.matrix();
      m.b_user = r.vector();
      m.b_item = r.vector();
      return m;
    }
  }
  throw std::runtime_error("checkpoint: unknown model kind tag in " + path.string());
}

}  // namespace vibrec
