#include "vibrec/cli.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "vibrec/checkpoint.hpp"
#include "vibrec/dataset.hpp"
#include "vibrec/evaluate.hpp"
#include "vibrec/gradcheck.hpp"

namespace vibrec {

namespace {

struct GradcheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CommonOpts {
  TrainConfig cfg;
  std::string model = "vibdml";
  std::string format = "canonical";
  std::string data;
  int jobs = 1;
};

void add_config_flags(CLI::App* cmd, CommonOpts& opts, CLI::Option** beta_opt = nullptr) {
  cmd->add_option("--k", opts.cfg.k, "Latent dimension")->capture_default_str();
  CLI::Option* beta = cmd->add_option("--beta", opts.cfg.beta, "KL penalty weight (VIB-DML only)")
                          ->capture_default_str();
  if (beta_opt) *beta_opt = beta;
  cmd->add_option("--lr", opts.cfg.learning_rate, "Adagrad learning rate")->capture_default_str();
  cmd->add_option("--epochs", opts.cfg.epochs, "Training epochs")->capture_default_str();
  cmd->add_option("--batch", opts.cfg.batch_size, "Minibatch size")->capture_default_str();
  cmd->add_option("--l2", opts.cfg.l2, "L2 weight for BiasSVD/PMF")->capture_default_str();
  cmd->add_option("--init-sd", opts.cfg.init_sd, "Stddev of the latent mean init")->capture_default_str();
  cmd->add_option("--distance-floor", opts.cfg.distance_floor, "Additive floor inside the distance sqrt")
      ->capture_default_str();
  cmd->add_option("--seed", opts.cfg.seed, "Base seed")->envname("VIBREC_SEED")->capture_default_str();
  cmd->set_config("--config", "", "Flat key=value config file; flags override it");
}

Dataset load_by_format(const std::string& format, const std::string& path) {
  if (format == "canonical") return read_canonical(path);
  if (format == "movielens") return load_movielens(path);
  if (format == "filmtrust") return load_filmtrust(path);
  if (format == "epinions") return load_epinions(path);
  throw CLI::ValidationError("--format", "unknown format '" + format + "'");
}

nlohmann::json config_json(const TrainConfig& cfg) {
  return {{"k", cfg.k},
          {"beta", cfg.beta},
          {"lr", cfg.learning_rate},
          {"epochs", cfg.epochs},
          {"batch", cfg.batch_size},
          {"l2", cfg.l2},
          {"init_sd", cfg.init_sd},
          {"distance_floor", cfg.distance_floor},
          {"seed", cfg.seed}};
}

// Every output gets a sibling manifest so the run is reproducible from the
// manifest alone.
void write_manifest(const std::string& subcommand, const nlohmann::json& config,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                    const std::vector<std::uint64_t>& seeds) {
  if (outputs.empty()) return;
  nlohmann::json manifest;
  manifest["tool"] = "vibrec";
  manifest["version"] = kVersion;
  manifest["subcommand"] = subcommand;
  manifest["config"] = config;
  manifest["inputs"] = inputs;
  manifest["outputs"] = outputs;
  manifest["seeds"] = seeds;
  const std::string path = outputs.front() + ".manifest.json";
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write manifest " + path);
  out << manifest.dump(2) << '\n';
}

void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::vector<std::string> split_csv(const std::string& csv) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t pos = csv.find(',', start);
    if (pos == std::string::npos) {
      out.push_back(csv.substr(start));
      break;
    }
    out.push_back(csv.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> grid;
  for (const std::string& tok : split_csv(csv)) {
    try {
      std::size_t used = 0;
      grid.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw CLI::ValidationError("--grid", "bad grid value '" + tok + "'");
    }
  }
  return grid;
}

void setup_prepare(CLI::App& app, std::ostream& out) {
  auto opts = std::make_shared<CommonOpts>();
  auto in_path = std::make_shared<std::string>();
  auto out_path = std::make_shared<std::string>();
  CLI::App* cmd = app.add_subcommand("prepare", "Convert a raw ratings file to the canonical format");
  cmd->add_option("--format", opts->format, "Input format")
      ->required()
      ->check(CLI::IsMember({"movielens", "filmtrust", "epinions", "canonical"}));
  cmd->add_option("--in", *in_path, "Input file")->required();
  cmd->add_option("--out", *out_path, "Canonical output file")->required();
  cmd->callback([opts, in_path, out_path, &out] {
    Dataset ds = load_by_format(opts->format, *in_path);
    write_canonical(ds, *out_path);
    out << ds.n_users << "/" << ds.n_items << "/" << ds.triples.size() << "\n";
    if (ds.duplicates_dropped > 0) {
      out << "duplicates dropped: " << ds.duplicates_dropped << "\n";
    }
    write_manifest("prepare", {{"format", opts->format}}, {*in_path}, {*out_path}, {});
  });
}

void setup_synth(CLI::App& app, std::ostream& out) {
  struct SynthOpts {
    int users = 500, items = 500, k_true = 8;
    double noise = 0.0, density = 0.1, r_min = 0.5, r_max = 4.0;
    std::uint64_t seed = 0;
    std::string out_path, positions_path;
  };
  auto opts = std::make_shared<SynthOpts>();
  CLI::App* cmd = app.add_subcommand("synth", "Generate a planted-structure synthetic dataset");
  cmd->add_option("--users", opts->users)->capture_default_str();
  cmd->add_option("--items", opts->items)->capture_default_str();
  cmd->add_option("--k-true", opts->k_true, "Planted latent dimension")->capture_default_str();
  cmd->add_option("--noise", opts->noise, "Rating noise stddev")->capture_default_str();
  cmd->add_option("--density", opts->density, "Fraction of pairs rated")->capture_default_str();
  cmd->add_option("--r-min", opts->r_min)->capture_default_str();
  cmd->add_option("--r-max", opts->r_max)->capture_default_str();
  cmd->add_option("--seed", opts->seed)->envname("VIBREC_SEED")->capture_default_str();
  cmd->add_option("--out", opts->out_path, "Canonical output file")->required();
  cmd->callback([opts, &out] {
    SyntheticData synth = synth_generate(opts->users, opts->items, opts->k_true, opts->noise,
                                         opts->density, opts->r_min, opts->r_max, opts->seed);
    write_canonical(synth.dataset, opts->out_path);
    out << synth.dataset.n_users << "/" << synth.dataset.n_items << "/" << synth.dataset.triples.size()
        << "\n";
    write_manifest("synth",
                   {{"users", opts->users},
                    {"items", opts->items},
                    {"k_true", opts->k_true},
                    {"noise", opts->noise},
                    {"density", opts->density},
                    {"r_min", opts->r_min},
                    {"r_max", opts->r_max}},
                   {}, {opts->out_path}, {opts->seed});
  });
}

void setup_train(CLI::App& app, std::ostream& out, std::ostream& err) {
  auto opts = std::make_shared<CommonOpts>();
  auto out_path = std::make_shared<std::string>();
  auto beta_opt = std::make_shared<CLI::Option*>(nullptr);
  CLI::App* cmd = app.add_subcommand("train", "Train one model on a full ratings file (no split)");
  cmd->add_option("--data", opts->data, "Ratings file")->required();
  cmd->add_option("--format", opts->format, "Input format")->capture_default_str();
  cmd->add_option("--model", opts->model, "Model kind")
      ->check(CLI::IsMember({"vibdml", "biassvd", "pmf", "metricf"}))
      ->capture_default_str();
  add_config_flags(cmd, *opts, beta_opt.get());
  cmd->add_option("--out", *out_path, "Checkpoint output path")->required();
  cmd->callback([opts, out_path, beta_opt, &out, &err] {
    const ModelKind kind = model_kind_from_string(opts->model);
    if (kind != ModelKind::vibdml && *beta_opt && (*beta_opt)->count() > 0) {
      err << "warning: --beta has no effect on model '" << opts->model << "'; ignored\n";
    }
    Dataset ds = load_by_format(opts->format, opts->data);
    DatasetView view = full_view(ds);
    ProgressSink progress = [&out](int epoch, double loss) {
      out << "epoch " << epoch << " loss " << loss << "\n";
    };
    AnyModel model;
    switch (kind) {
      case ModelKind::vibdml: model = fit_vibdml(view, opts->cfg, progress).model; break;
      case ModelKind::biassvd:
      case ModelKind::pmf: model = fit_dot_product(view, opts->cfg, kind, progress).model; break;
      case ModelKind::metricf: model = fit_metricf(view, opts->cfg, progress).model; break;
    }
    save_checkpoint(model, *out_path);
    nlohmann::json cfg_json = config_json(opts->cfg);
    cfg_json["model"] = opts->model;
    cfg_json["format"] = opts->format;
    write_manifest("train", cfg_json, {opts->data}, {*out_path}, {opts->cfg.seed});
    out << "checkpoint written to " << *out_path << "\n";
  });
}

void setup_evaluate(CLI::App& app, std::ostream& out) {
  auto opts = std::make_shared<CommonOpts>();
  auto repeats = std::make_shared<int>(5);
  auto ratio = std::make_shared<double>(0.9);
  auto report_path = std::make_shared<std::string>();
  auto name = std::make_shared<std::string>();
  CLI::App* cmd = app.add_subcommand("evaluate", "Repeated hold-out evaluation of one model");
  cmd->add_option("--data", opts->data, "Ratings file")->required();
  cmd->add_option("--format", opts->format)->capture_default_str();
  cmd->add_option("--model", opts->model)
      ->check(CLI::IsMember({"vibdml", "biassvd", "pmf", "metricf"}))
      ->capture_default_str();
  cmd->add_option("--repeats", *repeats, "Number of random partitions")->capture_default_str();
  cmd->add_option("--ratio", *ratio, "Training fraction")->capture_default_str();
  cmd->add_option("--jobs", opts->jobs, "Parallel fits")->capture_default_str();
  cmd->add_option("--name", *name, "Dataset name in the report (default: file stem)");
  add_config_flags(cmd, *opts);
  cmd->add_option("--report", *report_path, "JSON report output path")->required();
  cmd->callback([opts, repeats, ratio, report_path, name, &out] {
    Dataset ds = load_by_format(opts->format, opts->data);
    const std::string dataset_name =
        name->empty() ? std::filesystem::path(opts->data).stem().string() : *name;
    EvalReport report = run_holdout_protocol(ds, dataset_name, model_kind_from_string(opts->model),
                                             opts->cfg, *repeats, opts->cfg.seed, *ratio, opts->jobs);
    write_json_file(report_to_json(report), *report_path);
    nlohmann::json cfg_json = config_json(opts->cfg);
    cfg_json["model"] = opts->model;
    cfg_json["repeats"] = *repeats;
    cfg_json["ratio"] = *ratio;
    write_manifest("evaluate", cfg_json, {opts->data}, {*report_path}, report.seeds);
    out << "rmse_mean " << report.rmse_mean << " rmse_std " << report.rmse_std << "\n";
  });
}

void setup_sweep(CLI::App& app, std::ostream& out) {
  auto opts = std::make_shared<CommonOpts>();
  auto axis = std::make_shared<std::string>();
  auto grid_csv = std::make_shared<std::string>();
  auto repeats = std::make_shared<int>(5);
  auto ratio = std::make_shared<double>(0.9);
  auto report_path = std::make_shared<std::string>();
  auto name = std::make_shared<std::string>();
  CLI::App* cmd = app.add_subcommand("sweep", "Hold-out evaluation over a k or beta grid");
  cmd->add_option("--data", opts->data)->required();
  cmd->add_option("--format", opts->format)->capture_default_str();
  cmd->add_option("--model", opts->model)
      ->check(CLI::IsMember({"vibdml", "biassvd", "pmf", "metricf"}))
      ->capture_default_str();
  cmd->add_option("--axis", *axis, "Sweep axis")->required()->check(CLI::IsMember({"k", "beta"}));
  cmd->add_option("--grid", *grid_csv, "Comma-separated grid values")->required();
  cmd->add_option("--repeats", *repeats)->capture_default_str();
  cmd->add_option("--ratio", *ratio)->capture_default_str();
  cmd->add_option("--jobs", opts->jobs)->capture_default_str();
  cmd->add_option("--name", *name);
  add_config_flags(cmd, *opts);
  cmd->add_option("--report", *report_path)->required();
  cmd->callback([opts, axis, grid_csv, repeats, ratio, report_path, name, &out] {
    Dataset ds = load_by_format(opts->format, opts->data);
    const std::string dataset_name =
        name->empty() ? std::filesystem::path(opts->data).stem().string() : *name;
    SweepReport report =
        sweep(ds, dataset_name, model_kind_from_string(opts->model), opts->cfg,
              *axis == "k" ? SweepAxis::k : SweepAxis::beta, parse_grid(*grid_csv), *repeats,
              opts->cfg.seed, *ratio, opts->jobs);
    write_json_file(sweep_to_json(report), *report_path);
    nlohmann::json cfg_json = config_json(opts->cfg);
    cfg_json["model"] = opts->model;
    cfg_json["axis"] = *axis;
    cfg_json["grid"] = report.grid;
    write_manifest("sweep", cfg_json, {opts->data}, {*report_path}, {opts->cfg.seed});
    out << "argmin " << report.argmin_value << "\n";
  });
}

void setup_robustness(CLI::App& app, std::ostream& out) {
  auto opts = std::make_shared<CommonOpts>();
  auto models_csv = std::make_shared<std::string>("vibdml,metricf,biassvd");
  auto best_k_csv = std::make_shared<std::string>();
  auto k_robust = std::make_shared<int>(500);
  auto repeats = std::make_shared<int>(5);
  auto ratio = std::make_shared<double>(0.9);
  auto report_path = std::make_shared<std::string>();
  auto name = std::make_shared<std::string>();
  CLI::App* cmd =
      app.add_subcommand("robustness", "Compare each model at its best k against a large k");
  cmd->add_option("--data", opts->data)->required();
  cmd->add_option("--format", opts->format)->capture_default_str();
  cmd->add_option("--models", *models_csv, "Comma-separated model kinds")->capture_default_str();
  cmd->add_option("--best-k", *best_k_csv, "Comma-separated best k per model")->required();
  cmd->add_option("--k-robust", *k_robust, "Stress dimension")->capture_default_str();
  cmd->add_option("--repeats", *repeats)->capture_default_str();
  cmd->add_option("--ratio", *ratio)->capture_default_str();
  cmd->add_option("--jobs", opts->jobs)->capture_default_str();
  cmd->add_option("--name", *name);
  add_config_flags(cmd, *opts);
  cmd->add_option("--report", *report_path)->required();
  cmd->callback([opts, models_csv, best_k_csv, k_robust, repeats, ratio, report_path, name, &out] {
    Dataset ds = load_by_format(opts->format, opts->data);
    std::vector<ModelKind> kinds;
    for (const std::string& tok : split_csv(*models_csv)) kinds.push_back(model_kind_from_string(tok));
    std::vector<int> best_k;
    for (const std::string& tok : split_csv(*best_k_csv)) best_k.push_back(std::stoi(tok));
    const std::string dataset_name =
        name->empty() ? std::filesystem::path(opts->data).stem().string() : *name;
    RobustnessReport report = robustness_experiment(ds, dataset_name, kinds, best_k, opts->cfg,
                                                    *k_robust, *repeats, opts->cfg.seed, *ratio,
                                                    opts->jobs);
    write_json_file(robustness_to_json(report), *report_path);
    nlohmann::json cfg_json = config_json(opts->cfg);
    cfg_json["models"] = *models_csv;
    cfg_json["best_k"] = *best_k_csv;
    cfg_json["k_robust"] = *k_robust;
    write_manifest("robustness", cfg_json, {opts->data}, {*report_path}, {opts->cfg.seed});
    for (const RobustnessEntry& e : report.entries) {
      out << to_string(e.model) << " best_k=" << e.best_k << " rmse_best=" << e.rmse_best
          << " rmse_robust=" << e.rmse_robust << " pct_increase=" << e.pct_increase << "\n";
    }
  });
}

void setup_analyze(CLI::App& app, std::ostream& out) {
  auto opts = std::make_shared<CommonOpts>();
  auto checkpoint_path = std::make_shared<std::string>();
  auto probes_csv = std::make_shared<std::string>();
  auto min_ratings = std::make_shared<int>(20);
  auto max_probes = std::make_shared<int>(50);
  auto report_path = std::make_shared<std::string>();
  auto export_path = std::make_shared<std::string>();
  CLI::App* cmd = app.add_subcommand(
      "analyze", "Distance-vs-rating consistency of a trained distance model's latent space");
  cmd->add_option("--checkpoint", *checkpoint_path, "Trained model checkpoint")->required();
  cmd->add_option("--data", opts->data, "Ratings file the distances are checked against")->required();
  cmd->add_option("--format", opts->format)->capture_default_str();
  cmd->add_option("--probes", *probes_csv, "Comma-separated probe user indices (default: auto-pick)");
  cmd->add_option("--min-ratings", *min_ratings, "Auto-pick: minimum ratings per probe")
      ->capture_default_str();
  cmd->add_option("--max-probes", *max_probes, "Auto-pick: number of probes")->capture_default_str();
  cmd->add_option("--report", *report_path, "JSON report output path")->required();
  cmd->add_option("--export-embeddings", *export_path, "Also dump latent positions to this file");
  cmd->callback([opts, checkpoint_path, probes_csv, min_ratings, max_probes, report_path, export_path,
                 &out] {
    if (!std::filesystem::exists(*checkpoint_path)) {
      throw CLI::ValidationError("--checkpoint", "no such file: " + *checkpoint_path);
    }
    AnyModel model = load_checkpoint(*checkpoint_path);
    LatentPositions positions;
    if (const auto* vib = std::get_if<VibDmlModel>(&model)) {
      positions = latent_positions(*vib);
      if (!export_path->empty()) export_embeddings(*vib, *export_path);
    } else if (const auto* mf = std::get_if<MetricFModel>(&model)) {
      positions = latent_positions(*mf);
      if (!export_path->empty()) export_embeddings(*mf, *export_path);
    } else {
      throw std::invalid_argument("analyze: checkpoint is not a distance-based model");
    }
    Dataset ds = load_by_format(opts->format, opts->data);
    DatasetView view = full_view(ds);

    std::vector<std::int32_t> probes;
    if (!probes_csv->empty()) {
      for (const std::string& tok : split_csv(*probes_csv)) {
        probes.push_back(static_cast<std::int32_t>(std::stoi(tok)));
      }
    } else {
      std::vector<int> counts(static_cast<std::size_t>(ds.n_users), 0);
      for (const Triple& t : ds.triples) ++counts[static_cast<std::size_t>(t.user)];
      for (std::int32_t u = 0; u < ds.n_users && static_cast<int>(probes.size()) < *max_probes; ++u) {
        if (counts[static_cast<std::size_t>(u)] >= *min_ratings) probes.push_back(u);
      }
      if (probes.empty()) {
        throw std::invalid_argument("analyze: no users with at least " + std::to_string(*min_ratings) +
                                    " ratings");
      }
    }
    NeighborReport report = neighbor_consistency(positions, view, probes);
    write_json_file(neighbor_to_json(report), *report_path);
    write_manifest("analyze",
                   {{"probes", probes}, {"min_ratings", *min_ratings}, {"max_probes", *max_probes}},
                   {*checkpoint_path, opts->data}, {*report_path}, {});
    if (report.mean_spearman) {
      out << "probes " << report.probes.size() << " mean_spearman " << *report.mean_spearman << "\n";
    } else {
      out << "probes " << report.probes.size() << " mean_spearman undefined\n";
    }
  });
}

void setup_gradcheck(CLI::App& app, std::ostream& out) {
  auto trials = std::make_shared<int>(100);
  auto tol = std::make_shared<double>(1e-4);
  auto h = std::make_shared<double>(1e-5);
  auto seed = std::make_shared<std::uint64_t>(0);
  auto models_csv = std::make_shared<std::string>("vibdml,biassvd,pmf,metricf");
  CLI::App* cmd =
      app.add_subcommand("gradcheck", "Verify analytic gradients against central finite differences");
  cmd->add_option("--trials", *trials, "Random instances per model")->capture_default_str();
  cmd->add_option("--tol", *tol, "Relative tolerance")->capture_default_str();
  cmd->add_option("--h", *h, "Finite-difference step")->capture_default_str();
  cmd->add_option("--seed", *seed)->envname("VIBREC_SEED")->capture_default_str();
  cmd->add_option("--models", *models_csv)->capture_default_str();
  cmd->callback([trials, tol, h, seed, models_csv, &out] {
    bool all_pass = true;
    for (const std::string& tok : split_csv(*models_csv)) {
      const ModelKind kind = model_kind_from_string(tok);
      GradCheckTrialSummary summary = run_gradcheck_trials(kind, *trials, *h, *tol, *seed);
      out << "model=" << to_string(kind) << " trials=" << summary.trials
          << " failures=" << summary.failures << " max_rel_err=" << summary.max_rel_err;
      if (!summary.worst_coord.empty()) out << " worst=" << summary.worst_coord;
      out << "\n";
      if (summary.failures > 0) all_pass = false;
    }
    if (!all_pass) throw GradcheckFailure("gradient check failed");
    out << "gradcheck passed\n";
  });
}

}  // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
  CLI::App app{"vibrec: Gaussian-embedding metric learning for rating prediction"};
  app.set_version_flag("--version", std::string("vibrec ") + kVersion);
  app.require_subcommand(1);

  setup_prepare(app, out);
  setup_synth(app, out);
  setup_train(app, out, err);
  setup_evaluate(app, out);
  setup_sweep(app, out);
  setup_robustness(app, out);
  setup_analyze(app, out);
  setup_gradcheck(app, out);

  std::reverse(args.begin(), args.end());  // CLI11 consumes the vector back to front
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << app.version() << "\n";
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const GradcheckFailure& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const TrainingError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace vibrec
