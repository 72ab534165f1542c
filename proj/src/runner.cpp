#include "lesslab/runner.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "lesslab/diagnostics.hpp"

namespace fs = std::filesystem;

namespace lesslab {

std::string method_name(Method m) {
  switch (m) {
    case Method::fixmatch: return "fixmatch";
    case Method::composite: return "composite";
    case Method::composite_adaptive: return "composite_adaptive";
    case Method::less: return "less";
    case Method::ssl_then_fixmatch: return "ssl_then_fixmatch";
    case Method::ssl_only: return "ssl_only";
  }
  throw ContractError("method_name: bad enum value");
}

Method parse_method(const std::string& name) {
  if (name == "fixmatch") return Method::fixmatch;
  if (name == "composite") return Method::composite;
  if (name == "composite_adaptive") return Method::composite_adaptive;
  if (name == "less") return Method::less;
  if (name == "ssl_then_fixmatch") return Method::ssl_then_fixmatch;
  if (name == "ssl_only") return Method::ssl_only;
  throw ConfigError("unknown method: " + name);
}

bool ExperimentConfig::adaptive_enabled() const {
  if (adaptive == Toggle::on) return true;
  if (adaptive == Toggle::off) return false;
  return method == Method::composite_adaptive || method == Method::less;
}

bool ExperimentConfig::refine_enabled() const {
  if (refine == Toggle::on) return true;
  if (refine == Toggle::off) return false;
  return method == Method::less;
}

double ExperimentConfig::weak_sigma_effective() const {
  return weak_sigma > 0.0 ? weak_sigma : 0.05 * data.separation;
}

double ExperimentConfig::strong_sigma_effective() const {
  return strong_sigma > 0.0 ? strong_sigma : 0.15 * data.separation;
}

// ---------------------------------------------------------------- parsing

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

long long parse_int(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const long long v = std::stoll(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": '" + value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("bad boolean for " + key + ": '" + value + "' (use true/false)");
}

Toggle parse_toggle(const std::string& key, const std::string& value) {
  if (value == "auto") return Toggle::automatic;
  if (value == "on") return Toggle::on;
  if (value == "off") return Toggle::off;
  throw ConfigError("bad value for " + key + ": '" + value + "' (use auto/on/off)");
}

std::vector<double> parse_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_double(key, trim(tok)));
  if (out.empty()) throw ConfigError("empty list for " + key);
  return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::vector<std::string> seen;
  std::stringstream lines(text);
  std::string line;
  int lineno = 0;
  while (std::getline(lines, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      throw ConfigError("duplicate config key: " + key);
    seen.push_back(key);

    if (key == "method") cfg.method = parse_method(value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_int(key, value));
    else if (key == "out_dir") cfg.out_dir = value;
    else if (key == "num_classes") cfg.data.num_classes = static_cast<int>(parse_int(key, value));
    else if (key == "dim") cfg.data.dim = static_cast<int>(parse_int(key, value));
    else if (key == "separation") cfg.data.separation = parse_double(key, value);
    else if (key == "spread") cfg.data.spread = parse_double(key, value);
    else if (key == "per_class") cfg.data.per_class = static_cast<int>(parse_int(key, value));
    else if (key == "labels_per_class") cfg.labels_per_class = static_cast<int>(parse_int(key, value));
    else if (key == "test_per_class") cfg.test_per_class = static_cast<int>(parse_int(key, value));
    else if (key == "dataset_path") cfg.dataset_path = value;
    else if (key == "save_dataset") cfg.save_dataset = parse_bool(key, value);
    else if (key == "weak_sigma") cfg.weak_sigma = parse_double(key, value);
    else if (key == "strong_sigma") cfg.strong_sigma = parse_double(key, value);
    else if (key == "mask_prob") cfg.mask_prob = parse_double(key, value);
    else if (key == "scale_jitter") cfg.scale_jitter = parse_double(key, value);
    else if (key == "hidden_width") cfg.hidden_width = static_cast<int>(parse_int(key, value));
    else if (key == "hidden_layers") cfg.hidden_layers = static_cast<int>(parse_int(key, value));
    else if (key == "proj_dim") cfg.proj_dim = static_cast<int>(parse_int(key, value));
    else if (key == "num_prototypes") cfg.num_prototypes = static_cast<int>(parse_int(key, value));
    else if (key == "temp_proto") cfg.temp_proto = parse_double(key, value);
    else if (key == "lr") cfg.lr = parse_double(key, value);
    else if (key == "momentum") cfg.momentum = parse_double(key, value);
    else if (key == "weight_decay") cfg.weight_decay = parse_double(key, value);
    else if (key == "cosine_lr") cfg.cosine_lr = parse_bool(key, value);
    else if (key == "tau_init") cfg.tau_init = parse_double_list(key, value);
    else if (key == "lambda_u") cfg.lambda_u = parse_double(key, value);
    else if (key == "batch_size") cfg.batch_size = static_cast<int>(parse_int(key, value));
    else if (key == "mu_ratio") cfg.mu_ratio = static_cast<int>(parse_int(key, value));
    else if (key == "epochs") cfg.epochs = static_cast<int>(parse_int(key, value));
    else if (key == "steps_per_epoch") cfg.steps_per_epoch = static_cast<int>(parse_int(key, value));
    else if (key == "pretrain_epochs") cfg.pretrain_epochs = static_cast<int>(parse_int(key, value));
    else if (key == "sinkhorn_eps") cfg.sinkhorn.eps = parse_double(key, value);
    else if (key == "sinkhorn_iters") cfg.sinkhorn.iters = static_cast<int>(parse_int(key, value));
    else if (key == "adaptive") cfg.adaptive = parse_toggle(key, value);
    else if (key == "alpha") cfg.alpha = parse_double(key, value);
    else if (key == "epsilon") cfg.epsilon = parse_double(key, value);
    else if (key == "tau_min") cfg.tau_min = parse_double(key, value);
    else if (key == "tau_max") cfg.tau_max = parse_double(key, value);
    else if (key == "refine") cfg.refine = parse_toggle(key, value);
    else if (key == "n_min") cfg.refiner.n_min = static_cast<int>(parse_int(key, value));
    else if (key == "promote_lambda") cfg.refiner.lambda = parse_double(key, value);
    else if (key == "n_cap") cfg.refiner.n_cap = static_cast<int>(parse_int(key, value));
    else if (key == "refine_reeval") cfg.refiner.reevaluate = parse_bool(key, value);
    else if (key == "checkpoint_window") cfg.checkpoint_window = static_cast<int>(parse_int(key, value));
    else throw ConfigError("unknown config key: " + key);
  }
  return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

void validate_config(const ExperimentConfig& cfg) {
  const auto& d = cfg.data;
  if (d.num_classes < 2) throw ConfigError("num_classes must be at least 2");
  if (d.dim < 1) throw ConfigError("dim must be positive");
  if (d.separation <= 0.0) throw ConfigError("separation must be positive");
  if (d.spread < 0.0) throw ConfigError("spread must be nonnegative");
  if (d.per_class < 1) throw ConfigError("per_class must be positive");
  if (cfg.labels_per_class < 1) throw ConfigError("labels_per_class must be positive");
  if (cfg.labels_per_class > d.per_class)
    throw ConfigError("labels_per_class exceeds per_class");
  if (cfg.test_per_class < 1) throw ConfigError("test_per_class must be positive");
  if (cfg.weak_sigma < 0.0) throw ConfigError("weak_sigma must be nonnegative");
  if (cfg.strong_sigma < 0.0) throw ConfigError("strong_sigma must be nonnegative");
  if (cfg.mask_prob < 0.0 || cfg.mask_prob > 1.0)
    throw ConfigError("mask_prob must lie in [0, 1]");
  if (cfg.scale_jitter < 0.0 || cfg.scale_jitter >= 1.0)
    throw ConfigError("scale_jitter must lie in [0, 1)");
  if (cfg.hidden_width < 1) throw ConfigError("hidden_width must be positive");
  if (cfg.hidden_layers < 0) throw ConfigError("hidden_layers must be nonnegative");
  if (cfg.proj_dim < 1) throw ConfigError("proj_dim must be positive");
  if (cfg.num_prototypes != 0 && cfg.num_prototypes < 2)
    throw ConfigError("num_prototypes must be 0 (auto) or at least 2");
  if (cfg.temp_proto <= 0.0) throw ConfigError("temp_proto must be positive");
  if (cfg.lr <= 0.0) throw ConfigError("lr must be positive");
  if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
    throw ConfigError("momentum must lie in [0, 1)");
  if (cfg.weight_decay < 0.0) throw ConfigError("weight_decay must be nonnegative");
  if (cfg.tau_init.empty()) throw ConfigError("tau_init must not be empty");
  if (cfg.tau_init.size() != 1 &&
      cfg.tau_init.size() != static_cast<size_t>(d.num_classes))
    throw ConfigError("tau_init needs one value or one per class");
  const double chance = 1.0 / static_cast<double>(d.num_classes);
  for (double t : cfg.tau_init)
    if (!(t > chance) || t > 1.0)
      throw ConfigError("tau_init values must lie in (1/k, 1]");
  if (cfg.lambda_u < 0.0) throw ConfigError("lambda_u must be nonnegative");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (cfg.mu_ratio < 0) throw ConfigError("mu_ratio must be nonnegative");
  if (cfg.epochs < 0) throw ConfigError("epochs must be nonnegative");
  if (cfg.steps_per_epoch < 0) throw ConfigError("steps_per_epoch must be nonnegative");
  if (cfg.pretrain_epochs < 0) throw ConfigError("pretrain_epochs must be nonnegative");
  if (cfg.sinkhorn.eps <= 0.0) throw ConfigError("sinkhorn_eps must be positive");
  if (cfg.sinkhorn.iters < 0) throw ConfigError("sinkhorn_iters must be nonnegative");
  if (cfg.alpha < 0.0 || cfg.alpha >= 1.0) throw ConfigError("alpha must lie in [0, 1)");
  if (cfg.epsilon <= 0.0) throw ConfigError("epsilon must be positive");
  if (!(cfg.tau_min > 0.0) || !(cfg.tau_min < cfg.tau_max) || cfg.tau_max > 1.0)
    throw ConfigError("need 0 < tau_min < tau_max <= 1");
  if (cfg.refine_enabled()) validate_refiner(cfg.refiner);
  if (cfg.checkpoint_window < 1) throw ConfigError("checkpoint_window must be positive");
  if (cfg.out_dir.empty()) throw ConfigError("out_dir must not be empty");
}

// ---------------------------------------------------------------- output

std::string format_g9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

void emit_csv(const MetricsTable& table, const std::string& path) {
  if (table.columns.empty()) throw ContractError("emit_csv: no columns");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (size_t c = 0; c < table.columns.size(); ++c)
    out << (c ? "," : "") << table.columns[c];
  out << "\n";
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw ContractError("emit_csv: row width mismatch");
    for (size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
    out << "\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

MetricsTable load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  MetricsTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) cells.push_back(tok);
    if (line.back() == ',') cells.push_back("");
    if (first) {
      table.columns = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.columns.size())
        throw IoError("ragged csv row in " + path);
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw IoError("empty csv: " + path);
  return table;
}

void emit_summary(const RunSummary& s, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "method=" << s.method << "\n";
  out << "seed=" << s.seed << "\n";
  out << "tau0=" << format_g9(s.tau0) << "\n";
  out << "epochs=" << s.epochs_run << "\n";
  out << "checkpoint_window=" << s.checkpoint_window << "\n";
  out << "final_test_acc=" << format_g9(s.final_test_acc) << "\n";
  out << "mean_test_acc_last_window=" << format_g9(s.mean_test_acc_last_window) << "\n";
  out << "promoted_total=" << s.promoted_total << "\n";
  out << "metrics_csv=" << s.csv_path << "\n";
  out << "checkpoint=" << s.checkpoint_path << "\n";
  if (!out) throw IoError("write failed: " + path);
}

std::map<std::string, std::string> load_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw IoError("bad summary line in " + path);
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

// ------------------------------------------------------------------- run

namespace {

struct Objective {
  UnlabeledObjective unlabeled = UnlabeledObjective::none;
  bool with_supervised = true;
};

Objective objective_for(Method m, bool ssl_phase) {
  switch (m) {
    case Method::fixmatch: return {UnlabeledObjective::distill, true};
    case Method::composite:
    case Method::composite_adaptive:
    case Method::less: return {UnlabeledObjective::composite, true};
    case Method::ssl_then_fixmatch:
      return ssl_phase ? Objective{UnlabeledObjective::coreg, false}
                       : Objective{UnlabeledObjective::distill, true};
    case Method::ssl_only: return {UnlabeledObjective::coreg, false};
  }
  throw ContractError("objective_for: bad enum value");
}

MetricsTable make_metrics_table(int k) {
  MetricsTable t;
  t.columns = {"epoch",        "step",          "method",    "seed",
               "loss_sup",     "loss_distill",  "loss_coreg", "loss_total",
               "gated_frac",   "conf_correct",  "conf_incorrect", "unconf",
               "test_acc",     "promoted_total"};
  for (int c = 0; c < k; ++c) t.columns.push_back("tau_c" + std::to_string(c));
  for (int c = 0; c < k; ++c) t.columns.push_back("p_c" + std::to_string(c));
  return t;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir + ": " + ec.message());
}

}  // namespace

RunSummary run_experiment(const ExperimentConfig& cfg) {
  validate_config(cfg);
  ensure_dir(cfg.out_dir);
  Rng root(cfg.seed);

  DataPool pool;
  Mat test_x;
  std::vector<int> test_y;
  if (cfg.dataset_path.empty()) {
    const BlobGenerator gen(cfg.data, root.split("centers"));
    Rng data_rng = root.split("data");
    pool = make_pool(gen, data_rng);
    Rng split_rng = root.split("labelsplit");
    pool = split_barely(std::move(pool), cfg.labels_per_class, split_rng);
    Rng test_rng = root.split("test");
    std::tie(test_x, test_y) = gen.sample(cfg.test_per_class, test_rng);
  } else {
    pool = load_pool_csv(cfg.dataset_path);
    if (pool.labeled_ids.empty())
      throw ConfigError("loaded dataset has no labeled rows: " + cfg.dataset_path);
    if (pool.unlabeled_ids.empty())
      throw ConfigError("loaded dataset has no unlabeled rows: " + cfg.dataset_path);
    if (cfg.tau_init.size() > 1 &&
        cfg.tau_init.size() != static_cast<size_t>(pool.num_classes))
      throw ConfigError("tau_init length does not match loaded dataset classes");
    // no generator to draw held-out points from: evaluate on the raw
    // unlabeled features (transductive accuracy)
    test_x = Mat(static_cast<Eigen::Index>(pool.unlabeled_ids.size()), pool.dim());
    for (size_t t = 0; t < pool.unlabeled_ids.size(); ++t) {
      test_x.row(static_cast<Eigen::Index>(t)) = pool.features.row(pool.unlabeled_ids[t]);
      test_y.push_back(pool.oracle_label(pool.unlabeled_ids[t]));
    }
  }
  if (cfg.save_dataset) save_pool_csv(pool, cfg.out_dir + "/dataset.csv");

  const AugmentationFamily weak = make_weak(cfg.weak_sigma_effective());
  const AugmentationFamily strong =
      make_strong(cfg.strong_sigma_effective(), cfg.mask_prob, cfg.scale_jitter);

  const int k = pool.num_classes;
  ModelSpec mspec;
  mspec.input_dim = pool.dim();
  mspec.num_classes = k;
  mspec.hidden_width = cfg.hidden_width;
  mspec.hidden_layers = cfg.hidden_layers;
  mspec.proj_dim = cfg.proj_dim;
  mspec.num_prototypes = cfg.num_prototypes;
  mspec.temp_proto = cfg.temp_proto;
  Rng init_rng = root.split("init");
  ModelState model = init_model(mspec, init_rng);
  model.sgd = {cfg.lr, cfg.momentum, cfg.weight_decay};

  Vec tau0(k);
  if (cfg.tau_init.size() == 1)
    tau0.setConstant(cfg.tau_init[0]);
  else
    for (int c = 0; c < k; ++c) tau0(c) = cfg.tau_init[static_cast<size_t>(c)];
  ThresholdState thresholds = make_thresholds(tau0, pool.class_priors, cfg.alpha,
                                              cfg.epsilon, cfg.tau_min, cfg.tau_max);

  const bool adaptive_on = cfg.adaptive_enabled();
  const bool refine_on = cfg.refine_enabled();
  PredictionHistory history;
  if (refine_on)
    history = PredictionHistory(pool.unlabeled_ids, k, cfg.refiner.n_cap);

  const int draws_per_step = std::max(1, cfg.mu_ratio * cfg.batch_size);
  const int steps = cfg.steps_per_epoch > 0
                        ? cfg.steps_per_epoch
                        : std::max(1, (static_cast<int>(pool.unlabeled_ids.size()) +
                                       draws_per_step - 1) /
                                          draws_per_step);
  const long total_steps = static_cast<long>(steps) * std::max(1, cfg.epochs);

  MetricsTable table = make_metrics_table(k);
  std::vector<double> epoch_acc;
  ModelState last_good = model;
  long gstep = 0;

  try {
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
      double sum_sup = 0, sum_distill = 0, sum_coreg = 0, sum_total = 0;
      long sum_gated = 0, sum_bu = 0;
      const bool ssl_phase =
          cfg.method == Method::ssl_then_fixmatch && epoch <= cfg.pretrain_epochs;
      const Objective obj = objective_for(cfg.method, ssl_phase);

      for (int s = 0; s < steps; ++s, ++gstep) {
        Rng step_rng = root.split("batch", static_cast<std::uint64_t>(epoch),
                                  static_cast<std::uint64_t>(s));
        const Batch batch = sample_batch(pool, cfg.batch_size, cfg.mu_ratio, weak,
                                         strong, step_rng);
        ParamSet grads = zero_grads(model);
        ConfidentPrediction gates;
        const LossBreakdown bd =
            training_loss(model, batch, thresholds.tau, obj.unlabeled,
                          obj.with_supervised, cfg.lambda_u, cfg.sinkhorn, &grads,
                          &gates);
        if (!std::isfinite(bd.total))
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch) +
                             " step " + std::to_string(s));
        const double lr =
            cfg.cosine_lr
                ? cfg.lr * std::cos(7.0 * std::numbers::pi * static_cast<double>(gstep) /
                                    (16.0 * static_cast<double>(total_steps)))
                : cfg.lr;
        sgd_step(model, grads, lr);

        const int b_u = batch.unlabeled_count();
        if (b_u > 0 && !gates.label.empty()) {
          if (adaptive_on && !ssl_phase) {
            std::vector<int> counts(static_cast<size_t>(k), 0);
            for (int j = 0; j < b_u; ++j)
              if (gates.gate[static_cast<size_t>(j)])
                ++counts[static_cast<size_t>(gates.label[static_cast<size_t>(j)])];
            update_thresholds(thresholds, counts, b_u);
          }
          if (refine_on)
            for (int j = 0; j < b_u; ++j)
              history.record(batch.unlabeled_ids[static_cast<size_t>(j)],
                             gates.label[static_cast<size_t>(j)],
                             gates.gate[static_cast<size_t>(j)] != 0);
        }

        sum_sup += bd.supervised;
        sum_distill += bd.distill;
        sum_coreg += bd.coreg;
        sum_total += bd.total;
        sum_gated += bd.gated_count;
        sum_bu += b_u;
      }

      if (refine_on) epoch_end_promote(history, cfg.refiner, pool);

      const LedgerRecord led =
          ledger(model, pool, thresholds.tau, weak,
                 root.split("ledger", static_cast<std::uint64_t>(epoch)), test_x, test_y);
      epoch_acc.push_back(led.test_accuracy);

      std::vector<std::string> row;
      row.push_back(std::to_string(epoch));
      row.push_back(std::to_string(gstep));
      row.push_back(method_name(cfg.method));
      row.push_back(std::to_string(cfg.seed));
      const auto dsteps = static_cast<double>(steps);
      row.push_back(format_g9(sum_sup / dsteps));
      row.push_back(format_g9(sum_distill / dsteps));
      row.push_back(format_g9(sum_coreg / dsteps));
      row.push_back(format_g9(sum_total / dsteps));
      row.push_back(format_g9(sum_bu > 0 ? static_cast<double>(sum_gated) /
                                               static_cast<double>(sum_bu)
                                         : 0.0));
      row.push_back(format_g9(led.confident_correct));
      row.push_back(format_g9(led.confident_incorrect));
      row.push_back(format_g9(led.unconfident));
      row.push_back(format_g9(led.test_accuracy));
      row.push_back(std::to_string(pool.promoted.size()));
      for (int c = 0; c < k; ++c) row.push_back(format_g9(thresholds.tau(c)));
      for (int c = 0; c < k; ++c) row.push_back(format_g9(thresholds.p_conf(c)));
      table.rows.push_back(std::move(row));

      last_good = model;
    }
  } catch (const NumericError& e) {
    const std::string rescue = cfg.out_dir + "/checkpoint_lastgood.bin";
    save_checkpoint(last_good, rescue);
    emit_csv(table, cfg.out_dir + "/metrics.csv");
    throw NumericError(std::string(e.what()) + "; last good checkpoint: " + rescue);
  }

  emit_csv(table, cfg.out_dir + "/metrics.csv");
  save_checkpoint(model, cfg.out_dir + "/checkpoint.bin");

  RunSummary summary;
  summary.method = method_name(cfg.method);
  summary.seed = cfg.seed;
  summary.tau0 = cfg.tau_init[0];
  summary.epochs_run = cfg.epochs;
  summary.checkpoint_window = cfg.checkpoint_window;
  summary.promoted_total = static_cast<int>(pool.promoted.size());
  summary.out_dir = cfg.out_dir;
  summary.csv_path = "metrics.csv";
  summary.checkpoint_path = "checkpoint.bin";
  if (epoch_acc.empty()) {
    const double acc = test_accuracy(model, test_x, test_y);
    summary.final_test_acc = acc;
    summary.mean_test_acc_last_window = acc;
  } else {
    summary.final_test_acc = epoch_acc.back();
    const auto window =
        std::min<size_t>(epoch_acc.size(), static_cast<size_t>(cfg.checkpoint_window));
    double sum = 0;
    for (size_t i = epoch_acc.size() - window; i < epoch_acc.size(); ++i)
      sum += epoch_acc[i];
    summary.mean_test_acc_last_window = sum / static_cast<double>(window);
  }
  emit_summary(summary, cfg.out_dir + "/summary.txt");
  return summary;
}

// ----------------------------------------------------------------- sweep

namespace {

int thread_budget() {
  const char* env = std::getenv("LESSLAB_THREADS");
  if (!env || !*env) return 1;
  const int n = static_cast<int>(parse_int("LESSLAB_THREADS", env));
  if (n < 1) throw ConfigError("LESSLAB_THREADS must be a positive integer");
  return n;
}

std::string tau_dir_name(double tau, std::uint64_t seed) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "tau_%g_seed_%llu", tau,
                static_cast<unsigned long long>(seed));
  return buf;
}

}  // namespace

SweepResult sweep_tau(const ExperimentConfig& cfg, const std::vector<double>& taus,
                      const std::vector<std::uint64_t>& seeds) {
  if (taus.empty()) throw ConfigError("sweep: no tau values");
  if (seeds.empty()) throw ConfigError("sweep: no seeds");
  const double chance = 1.0 / static_cast<double>(cfg.data.num_classes);
  for (double t : taus)
    if (!(t > chance) || t > 1.0)
      throw ConfigError("sweep: tau values must lie in (1/k, 1]");
  validate_config(cfg);
  ensure_dir(cfg.out_dir);

  struct Job {
    double tau;
    std::uint64_t seed;
    ExperimentConfig cfg;
  };
  std::vector<Job> jobs;
  for (double tau : taus) {
    for (std::uint64_t seed : seeds) {
      ExperimentConfig sub = cfg;
      sub.tau_init = {tau};
      sub.seed = seed;
      sub.out_dir = cfg.out_dir + "/" + tau_dir_name(tau, seed);
      jobs.push_back({tau, seed, std::move(sub)});
    }
  }

  std::vector<RunSummary> results(jobs.size());
  std::atomic<size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  auto worker = [&] {
    for (;;) {
      const size_t i = next.fetch_add(1);
      if (i >= jobs.size()) return;
      try {
        results[i] = run_experiment(jobs[i].cfg);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  const int n_threads =
      std::min<int>(thread_budget(), static_cast<int>(jobs.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  SweepResult result;
  for (size_t i = 0; i < jobs.size(); ++i)
    result.cells.push_back({jobs[i].tau, jobs[i].seed, results[i]});

  for (double tau : taus) {
    std::vector<double> accs;
    for (const auto& cell : result.cells)
      if (cell.tau == tau) accs.push_back(cell.summary.mean_test_acc_last_window);
    const auto n = static_cast<double>(accs.size());
    double mean = 0;
    for (double a : accs) mean += a;
    mean /= n;
    double var = 0;
    if (accs.size() > 1) {
      for (double a : accs) var += (a - mean) * (a - mean);
      var /= n - 1.0;
    }
    result.table.push_back({tau, mean, std::sqrt(var), static_cast<int>(accs.size())});
  }

  MetricsTable sweep_csv;
  sweep_csv.columns = {"tau", "mean_acc", "std_acc", "runs"};
  for (const auto& row : result.table)
    sweep_csv.rows.push_back({format_g9(row.tau), format_g9(row.mean_acc),
                              format_g9(row.std_acc), std::to_string(row.runs)});
  emit_csv(sweep_csv, cfg.out_dir + "/sweep.csv");
  return result;
}

// ---------------------------------------------------------------- report

std::string report_runs(const std::string& root) {
  if (!fs::exists(root)) throw IoError("no such directory: " + root);
  std::vector<std::pair<std::string, std::map<std::string, std::string>>> found;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file() || entry.path().filename() != "summary.txt") continue;
    const std::string dir =
        fs::relative(entry.path().parent_path(), root).generic_string();
    found.emplace_back(dir == "." ? "" : dir, load_summary(entry.path().string()));
  }
  if (found.empty()) return "no run summaries under " + root + "\n";
  std::sort(found.begin(), found.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  const std::vector<std::string> cols = {"run",   "method",         "seed",
                                         "tau0",  "final_test_acc", "mean_acc_last_window",
                                         "promoted"};
  const std::vector<std::string> keys = {"",      "method",         "seed",
                                         "tau0",  "final_test_acc", "mean_test_acc_last_window",
                                         "promoted_total"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& [dir, kv] : found) {
    std::vector<std::string> row;
    row.push_back(dir.empty() ? "." : dir);
    for (size_t c = 1; c < keys.size(); ++c) {
      const auto it = kv.find(keys[c]);
      row.push_back(it == kv.end() ? "-" : it->second);
    }
    rows.push_back(std::move(row));
  }

  std::vector<size_t> width(cols.size());
  for (size_t c = 0; c < cols.size(); ++c) width[c] = cols[c].size();
  for (const auto& row : rows)
    for (size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());

  std::ostringstream out;
  auto emit_row = [&](const std::vector<std::string>& row) {
    for (size_t c = 0; c < row.size(); ++c) {
      out << row[c];
      if (c + 1 < row.size())
        out << std::string(width[c] - row[c].size() + 2, ' ');
    }
    out << "\n";
  };
  emit_row(cols);
  for (const auto& row : rows) emit_row(row);

  // aggregate by (method, tau0)
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& [dir, kv] : found) {
    const auto m = kv.find("method");
    const auto t = kv.find("tau0");
    const auto a = kv.find("mean_test_acc_last_window");
    if (m == kv.end() || t == kv.end() || a == kv.end()) continue;
    try {
      groups[{m->second, t->second}].push_back(std::stod(a->second));
    } catch (const std::exception&) {
      // unparseable accuracy: leave it out of the aggregate
    }
  }
  if (!groups.empty()) {
    out << "\naggregate mean_test_acc_last_window by (method, tau0):\n";
    for (const auto& [key, accs] : groups) {
      double mean = 0;
      for (double a : accs) mean += a;
      mean /= static_cast<double>(accs.size());
      double var = 0;
      if (accs.size() > 1) {
        for (double a : accs) var += (a - mean) * (a - mean);
        var /= static_cast<double>(accs.size()) - 1.0;
      }
      out << "  " << key.first << " tau0=" << key.second << "  n=" << accs.size()
          << "  mean=" << format_g9(mean) << "  std=" << format_g9(std::sqrt(var))
          << "\n";
    }
  }
  return out.str();
}

}  // namespace lesslab
