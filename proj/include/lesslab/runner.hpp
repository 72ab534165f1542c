#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "lesslab/data.hpp"
#include "lesslab/losses.hpp"
#include "lesslab/refine.hpp"

namespace lesslab {

// Training recipes. fixmatch = supervised + gated distillation;
// composite routes ungated samples to clustering consistency instead;
// composite_adaptive adds per-class threshold adaptation; less adds
// history-based pseudo-label promotion on top of that. ssl_only trains
// clustering consistency alone; ssl_then_fixmatch warm-starts with it.
enum class Method {
  fixmatch,
  composite,
  composite_adaptive,
  less,
  ssl_then_fixmatch,
  ssl_only,
};

std::string method_name(Method m);
Method parse_method(const std::string& name);

enum class Toggle { automatic, on, off };

struct ExperimentConfig {
  Method method = Method::less;
  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";

  // data
  BlobSpec data;
  int labels_per_class = 1;
  int test_per_class = 200;
  std::string dataset_path;   // load a dumped pool instead of generating
  bool save_dataset = false;  // dump dataset.csv into out_dir

  // augmentation; sigma 0 derives from separation (weak 0.05 s, strong 0.15 s)
  double weak_sigma = 0.0;
  double strong_sigma = 0.0;
  double mask_prob = 0.3;
  double scale_jitter = 0.2;

  // model
  int hidden_width = 64;
  int hidden_layers = 2;
  int proj_dim = 16;
  int num_prototypes = 0;  // 0 -> 2 * num_classes
  double temp_proto = 0.1;

  // optimizer
  double lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  bool cosine_lr = true;

  // training
  std::vector<double> tau_init{0.98};  // scalar or one value per class
  double lambda_u = 1.0;
  int batch_size = 4;
  int mu_ratio = 7;
  int epochs = 60;
  int steps_per_epoch = 0;  // 0 -> one pass over U per epoch
  int pretrain_epochs = 10;

  SinkhornConfig sinkhorn;

  // threshold adaptation (auto: composite_adaptive and less)
  Toggle adaptive = Toggle::automatic;
  double alpha = 0.9;
  double epsilon = 0.001;
  double tau_min = 0.6;
  double tau_max = 0.9999;

  // promotion (auto: less)
  Toggle refine = Toggle::automatic;
  RefinerConfig refiner;

  int checkpoint_window = 10;

  bool adaptive_enabled() const;
  bool refine_enabled() const;
  double weak_sigma_effective() const;
  double strong_sigma_effective() const;
};

// Flat key=value file; '#' starts a comment, blank lines are skipped.
// Unknown keys, duplicate keys, and unparseable values are ConfigErrors.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);
void validate_config(const ExperimentConfig& cfg);

// ---------------------------------------------------------------- output

std::string format_g9(double v);  // %.9g, the metrics float format

struct MetricsTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

void emit_csv(const MetricsTable& table, const std::string& path);
MetricsTable load_csv(const std::string& path);

struct RunSummary {
  std::string method;
  std::uint64_t seed = 0;
  double tau0 = 0.0;
  int epochs_run = 0;
  int checkpoint_window = 0;
  double final_test_acc = 0.0;
  double mean_test_acc_last_window = 0.0;
  int promoted_total = 0;
  std::string out_dir;
  std::string csv_path;
  std::string checkpoint_path;
};

void emit_summary(const RunSummary& summary, const std::string& path);
std::map<std::string, std::string> load_summary(const std::string& path);

// ------------------------------------------------------------------ run

// Full experiment: build data, train, write metrics.csv / summary.txt /
// checkpoint.bin under cfg.out_dir. A non-finite loss aborts with a
// NumericError after saving checkpoint_lastgood.bin and the partial CSV.
RunSummary run_experiment(const ExperimentConfig& cfg);

struct SweepCell {
  double tau = 0.0;
  std::uint64_t seed = 0;
  RunSummary summary;
};

struct SweepRow {
  double tau = 0.0;
  double mean_acc = 0.0;
  double std_acc = 0.0;  // sample standard deviation, 0 for a single run
  int runs = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<SweepRow> table;
};

// One run per (tau, seed), each in its own subdirectory of cfg.out_dir,
// aggregated over seeds by the last-window mean accuracy. Honors the
// LESSLAB_THREADS environment variable (default 1).
SweepResult sweep_tau(const ExperimentConfig& cfg, const std::vector<double>& taus,
                      const std::vector<std::uint64_t>& seeds);

// Collect every summary.txt under root (recursively) into one table.
std::string report_runs(const std::string& root);

}  // namespace lesslab
