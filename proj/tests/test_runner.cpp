#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "lesslab/runner.hpp"

using namespace lesslab;
namespace fs = std::filesystem;

namespace {

std::string fresh_dir(const char* name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(bool(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// a configuration small enough that a full run takes a fraction of a second
ExperimentConfig small_cfg(const std::string& out) {
  ExperimentConfig cfg;
  cfg.method = Method::less;
  cfg.seed = 3;
  cfg.out_dir = out;
  cfg.data.num_classes = 3;
  cfg.data.dim = 6;
  cfg.data.separation = 4.0;
  cfg.data.spread = 0.6;
  cfg.data.per_class = 30;
  cfg.labels_per_class = 1;
  cfg.test_per_class = 20;
  cfg.hidden_width = 16;
  cfg.hidden_layers = 1;
  cfg.proj_dim = 8;
  cfg.num_prototypes = 6;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.mu_ratio = 3;
  cfg.checkpoint_window = 2;
  return cfg;
}

}  // namespace

TEST_CASE("an empty config text yields the documented defaults") {
  const ExperimentConfig cfg = parse_config_text("# just a comment\n\n");
  CHECK(cfg.method == Method::less);
  CHECK(cfg.seed == 1);
  CHECK(cfg.epochs == 60);
  CHECK(cfg.batch_size == 4);
  CHECK(cfg.mu_ratio == 7);
  CHECK(cfg.tau_init == std::vector<double>{0.98});
  CHECK(cfg.lambda_u == 1.0);
  CHECK(cfg.adaptive == Toggle::automatic);
  CHECK(cfg.refine == Toggle::automatic);
  CHECK(cfg.data.num_classes == 5);
  CHECK(cfg.refiner.n_min == 30);
  CHECK(cfg.refiner.n_cap == 64);
  CHECK(cfg.sinkhorn.eps == 0.05);
  CHECK(cfg.sinkhorn.iters == 3);
}

TEST_CASE("config parsing handles comments, spacing, and typed values") {
  const ExperimentConfig cfg = parse_config_text(
      "method = fixmatch   # inline comment\n"
      "  seed=42\n"
      "tau_init = 0.9, 0.95, 0.85\n"
      "lambda_u=0.5\n"
      "cosine_lr = false\n"
      "adaptive = on\n"
      "refine=off\n"
      "save_dataset = true\n"
      "out_dir = runs/demo\n");
  CHECK(cfg.method == Method::fixmatch);
  CHECK(cfg.seed == 42);
  CHECK(cfg.tau_init == std::vector<double>{0.9, 0.95, 0.85});
  CHECK(cfg.lambda_u == 0.5);
  CHECK_FALSE(cfg.cosine_lr);
  CHECK(cfg.adaptive == Toggle::on);
  CHECK(cfg.refine == Toggle::off);
  CHECK(cfg.save_dataset);
  CHECK(cfg.out_dir == "runs/demo");
}

TEST_CASE("config parsing rejects unknown keys, duplicates, and junk") {
  CHECK_THROWS_AS(parse_config_text("not_a_key=1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("seed=1\nseed=2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("epochs=abc\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("epochs=12x\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("lr=0.0.1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("cosine_lr=yes\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("adaptive=maybe\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("method=sgd\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("just a line\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("=5\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("tau_init=\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_file("/no/such/lesslab.cfg"), IoError);
}

TEST_CASE("method names round-trip through the parser") {
  for (Method m : {Method::fixmatch, Method::composite, Method::composite_adaptive,
                   Method::less, Method::ssl_then_fixmatch, Method::ssl_only})
    CHECK(parse_method(method_name(m)) == m);
  CHECK_THROWS_AS(parse_method("bogus"), ConfigError);
}

TEST_CASE("toggles resolve by method under auto") {
  ExperimentConfig cfg;
  cfg.method = Method::fixmatch;
  CHECK_FALSE(cfg.adaptive_enabled());
  CHECK_FALSE(cfg.refine_enabled());
  cfg.method = Method::composite;
  CHECK_FALSE(cfg.adaptive_enabled());
  cfg.method = Method::composite_adaptive;
  CHECK(cfg.adaptive_enabled());
  CHECK_FALSE(cfg.refine_enabled());
  cfg.method = Method::less;
  CHECK(cfg.adaptive_enabled());
  CHECK(cfg.refine_enabled());

  cfg.adaptive = Toggle::off;
  cfg.refine = Toggle::off;
  CHECK_FALSE(cfg.adaptive_enabled());
  CHECK_FALSE(cfg.refine_enabled());
  cfg.method = Method::fixmatch;
  cfg.adaptive = Toggle::on;
  cfg.refine = Toggle::on;
  CHECK(cfg.adaptive_enabled());
  CHECK(cfg.refine_enabled());
}

TEST_CASE("effective augmentation strengths derive from the separation") {
  ExperimentConfig cfg;
  cfg.data.separation = 4.0;
  CHECK(cfg.weak_sigma_effective() == 0.05 * 4.0);
  CHECK(cfg.strong_sigma_effective() == 0.15 * 4.0);
  cfg.weak_sigma = 0.33;
  cfg.strong_sigma = 0.77;
  CHECK(cfg.weak_sigma_effective() == 0.33);
  CHECK(cfg.strong_sigma_effective() == 0.77);
}

TEST_CASE("config validation rejects out-of-range settings") {
  const auto bad = [](auto&& mutate) {
    ExperimentConfig cfg = small_cfg("runs/x");
    mutate(cfg);
    CHECK_THROWS_AS(validate_config(cfg), ConfigError);
  };
  validate_config(small_cfg("runs/x"));  // the base is fine

  bad([](ExperimentConfig& c) { c.data.num_classes = 1; });
  bad([](ExperimentConfig& c) { c.data.separation = 0.0; });
  bad([](ExperimentConfig& c) { c.labels_per_class = 31; });
  bad([](ExperimentConfig& c) { c.tau_init = {0.2}; });       // below 1/k
  bad([](ExperimentConfig& c) { c.tau_init = {1.01}; });      // above 1
  bad([](ExperimentConfig& c) { c.tau_init = {0.9, 0.9}; });  // wrong length
  bad([](ExperimentConfig& c) { c.tau_init.clear(); });
  bad([](ExperimentConfig& c) { c.lambda_u = -0.5; });
  bad([](ExperimentConfig& c) { c.momentum = 1.0; });
  bad([](ExperimentConfig& c) { c.mask_prob = 1.5; });
  bad([](ExperimentConfig& c) { c.scale_jitter = 1.0; });
  bad([](ExperimentConfig& c) { c.tau_min = 0.99999; });  // >= tau_max
  bad([](ExperimentConfig& c) { c.sinkhorn.eps = 0.0; });
  bad([](ExperimentConfig& c) { c.checkpoint_window = 0; });
  bad([](ExperimentConfig& c) { c.out_dir.clear(); });
  bad([](ExperimentConfig& c) { c.refiner.n_min = 29; });  // refine is on for less

  // the refiner is only validated when promotion is actually enabled
  ExperimentConfig off = small_cfg("runs/x");
  off.method = Method::fixmatch;
  off.refiner.n_min = 29;
  validate_config(off);
}

TEST_CASE("metrics csv io round-trips tables") {
  MetricsTable t;
  t.columns = {"a", "b", "c"};
  t.rows = {{"1", "x", "0.5"}, {"2", "", "-0.25"}};
  const std::string path = fresh_dir("lesslab_csv") + "/t.csv";
  emit_csv(t, path);
  const MetricsTable back = load_csv(path);
  CHECK(back.columns == t.columns);
  CHECK(back.rows == t.rows);

  MetricsTable ragged = t;
  ragged.rows.push_back({"only", "two"});
  CHECK_THROWS_AS(emit_csv(ragged, path), ContractError);
  CHECK_THROWS_AS(emit_csv(MetricsTable{}, path), ContractError);

  {
    std::ofstream out(path);
    out << "a,b\n1,2,3\n";
  }
  CHECK_THROWS_AS(load_csv(path), IoError);
  {
    std::ofstream out(path);
  }
  CHECK_THROWS_AS(load_csv(path), IoError);
  CHECK_THROWS_AS(load_csv("/no/such/file.csv"), IoError);
}

TEST_CASE("format_g9 prints nine significant digits") {
  CHECK(format_g9(0.5) == "0.5");
  CHECK(format_g9(1.0 / 3.0) == "0.333333333");
  CHECK(format_g9(123456789.0) == "123456789");
  CHECK(format_g9(0.0) == "0");
}

TEST_CASE("run summaries round-trip through their key=value file") {
  RunSummary s;
  s.method = "composite";
  s.seed = 17;
  s.tau0 = 0.98;
  s.epochs_run = 12;
  s.checkpoint_window = 5;
  s.final_test_acc = 0.9125;
  s.mean_test_acc_last_window = 0.908;
  s.promoted_total = 42;
  s.csv_path = "metrics.csv";
  s.checkpoint_path = "checkpoint.bin";
  const std::string path = fresh_dir("lesslab_summary") + "/summary.txt";
  emit_summary(s, path);
  const auto kv = load_summary(path);
  CHECK(kv.at("method") == "composite");
  CHECK(kv.at("seed") == "17");
  CHECK(kv.at("tau0") == "0.98");
  CHECK(kv.at("epochs") == "12");
  CHECK(kv.at("final_test_acc") == "0.9125");
  CHECK(kv.at("mean_test_acc_last_window") == "0.908");
  CHECK(kv.at("promoted_total") == "42");
  CHECK(kv.at("metrics_csv") == "metrics.csv");
  CHECK(kv.at("checkpoint") == "checkpoint.bin");
  CHECK_THROWS_AS(load_summary("/no/such/summary.txt"), IoError);
}

TEST_CASE("a run writes metrics, checkpoint, and a consistent summary") {
  const std::string out = fresh_dir("lesslab_run_basic");
  const ExperimentConfig cfg = small_cfg(out);
  const RunSummary summary = run_experiment(cfg);

  CHECK(fs::exists(out + "/metrics.csv"));
  CHECK(fs::exists(out + "/checkpoint.bin"));
  CHECK(fs::exists(out + "/summary.txt"));

  const MetricsTable m = load_csv(out + "/metrics.csv");
  CHECK(int(m.rows.size()) == cfg.epochs);
  CHECK(int(m.columns.size()) == 14 + 2 * 3);
  CHECK(m.columns[0] == "epoch");
  CHECK(m.columns[12] == "test_acc");
  CHECK(m.columns[14] == "tau_c0");
  CHECK(m.rows[0][0] == "1");
  CHECK(m.rows[0][2] == "less");
  CHECK(m.rows[0][3] == "3");
  // steps_per_epoch 0 means one pass over U: ceil(87 / 12) = 8 steps
  CHECK(m.rows[0][1] == "8");
  CHECK(m.rows[2][1] == "24");

  const auto kv = load_summary(out + "/summary.txt");
  CHECK(kv.at("method") == "less");
  CHECK(kv.at("epochs") == "3");
  CHECK(kv.at("final_test_acc") == m.rows[2][12]);
  CHECK(kv.at("promoted_total") == m.rows[2][13]);
  CHECK(summary.method == "less");
  CHECK(summary.epochs_run == 3);

  const ModelState back = load_checkpoint(out + "/checkpoint.bin");
  CHECK(back.spec.input_dim == 6);
  CHECK(back.spec.num_classes == 3);
  fs::remove_all(out);
}

TEST_CASE("epochs zero still produces a header-only csv and a summary") {
  const std::string out = fresh_dir("lesslab_run_zero");
  ExperimentConfig cfg = small_cfg(out);
  cfg.epochs = 0;
  const RunSummary summary = run_experiment(cfg);
  const MetricsTable m = load_csv(out + "/metrics.csv");
  CHECK(m.rows.empty());
  CHECK(summary.final_test_acc == summary.mean_test_acc_last_window);
  CHECK(fs::exists(out + "/checkpoint.bin"));
  fs::remove_all(out);
}

TEST_CASE("explicit steps_per_epoch overrides the one-pass default") {
  const std::string out = fresh_dir("lesslab_run_steps");
  ExperimentConfig cfg = small_cfg(out);
  cfg.steps_per_epoch = 5;
  cfg.epochs = 2;
  run_experiment(cfg);
  const MetricsTable m = load_csv(out + "/metrics.csv");
  CHECK(m.rows[0][1] == "5");
  CHECK(m.rows[1][1] == "10");
  fs::remove_all(out);
}

TEST_CASE("static-threshold methods keep tau pinned in the csv") {
  const std::string out = fresh_dir("lesslab_run_static");
  ExperimentConfig cfg = small_cfg(out);
  cfg.method = Method::composite;  // adaptive resolves to off
  run_experiment(cfg);
  const MetricsTable m = load_csv(out + "/metrics.csv");
  for (const auto& row : m.rows)
    for (int c = 0; c < 3; ++c) CHECK(row[size_t(14 + c)] == "0.98");
  fs::remove_all(out);
}

TEST_CASE("runs are deterministic across repeats") {
  const std::string a = fresh_dir("lesslab_run_det_a");
  const std::string b = fresh_dir("lesslab_run_det_b");
  ExperimentConfig ca = small_cfg(a);
  ExperimentConfig cb = small_cfg(b);
  run_experiment(ca);
  run_experiment(cb);
  CHECK(slurp(a + "/metrics.csv") == slurp(b + "/metrics.csv"));
  CHECK(slurp(a + "/summary.txt") == slurp(b + "/summary.txt"));
  CHECK(slurp(a + "/checkpoint.bin") == slurp(b + "/checkpoint.bin"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("an unreachable gate matches a lambda-zero run byte for byte") {
  // tau = 1.0 never gates, so fixmatch's unlabeled loss is identically zero
  // and the trajectory must match turning the unlabeled term off
  const std::string a = fresh_dir("lesslab_run_tau1");
  const std::string b = fresh_dir("lesslab_run_lam0");
  ExperimentConfig ca = small_cfg(a);
  ca.method = Method::fixmatch;
  ca.tau_init = {1.0};
  ExperimentConfig cb = small_cfg(b);
  cb.method = Method::fixmatch;
  cb.tau_init = {1.0};
  cb.lambda_u = 0.0;
  run_experiment(ca);
  run_experiment(cb);
  CHECK(slurp(a + "/metrics.csv") == slurp(b + "/metrics.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("less with adaptation and promotion disabled reproduces composite") {
  const std::string a = fresh_dir("lesslab_run_lessoff");
  const std::string b = fresh_dir("lesslab_run_compo");
  ExperimentConfig ca = small_cfg(a);
  ca.method = Method::less;
  ca.adaptive = Toggle::off;
  ca.refine = Toggle::off;
  ExperimentConfig cb = small_cfg(b);
  cb.method = Method::composite;
  run_experiment(ca);
  run_experiment(cb);

  MetricsTable ma = load_csv(a + "/metrics.csv");
  MetricsTable mb = load_csv(b + "/metrics.csv");
  REQUIRE(ma.rows.size() == mb.rows.size());
  CHECK(ma.rows[0][2] == "less");
  CHECK(mb.rows[0][2] == "composite");
  for (auto& row : ma.rows) row[2].clear();  // only the method label differs
  for (auto& row : mb.rows) row[2].clear();
  CHECK(ma.rows == mb.rows);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("a diverging run aborts with a rescue checkpoint and partial csv") {
  const std::string out = fresh_dir("lesslab_run_abort");
  ExperimentConfig cfg = small_cfg(out);
  cfg.method = Method::fixmatch;
  cfg.data.per_class = 5;
  cfg.mu_ratio = 0;  // supervised-only steps diverge fastest
  cfg.batch_size = 2;
  cfg.steps_per_epoch = 500;
  cfg.epochs = 1;
  cfg.lr = 1.0;
  cfg.momentum = 0.0;
  cfg.weight_decay = 10.0;  // p <- p - (g + 10 p): weights grow 9x per step
  cfg.cosine_lr = false;

  bool threw = false;
  try {
    run_experiment(cfg);
  } catch (const NumericError& e) {
    threw = true;
    CHECK(std::string(e.what()).find("last good checkpoint") != std::string::npos);
  }
  CHECK(threw);
  CHECK(fs::exists(out + "/checkpoint_lastgood.bin"));
  CHECK(fs::exists(out + "/metrics.csv"));
  const ModelState rescued = load_checkpoint(out + "/checkpoint_lastgood.bin");
  CHECK(rescued.spec.num_classes == 3);
  fs::remove_all(out);
}

TEST_CASE("a dumped dataset can seed another run") {
  const std::string a = fresh_dir("lesslab_run_dump");
  ExperimentConfig ca = small_cfg(a);
  ca.epochs = 1;
  ca.save_dataset = true;
  run_experiment(ca);
  REQUIRE(fs::exists(a + "/dataset.csv"));

  const std::string b = fresh_dir("lesslab_run_fromcsv");
  ExperimentConfig cb = small_cfg(b);
  cb.epochs = 2;
  cb.dataset_path = a + "/dataset.csv";
  const RunSummary summary = run_experiment(cb);
  CHECK(summary.epochs_run == 2);
  CHECK(load_csv(b + "/metrics.csv").rows.size() == 2);

  // the loaded pool must carry both kinds of rows
  const std::string c = fresh_dir("lesslab_run_badcsv");
  {
    std::ofstream outcsv(c + "/all_unlabeled.csv");
    outcsv << "id,label,split,f0\n0,0,unlabeled,0.5\n1,1,unlabeled,-0.5\n";
  }
  ExperimentConfig cc = small_cfg(c);
  cc.dataset_path = c + "/all_unlabeled.csv";
  CHECK_THROWS_AS(run_experiment(cc), ConfigError);

  // per-class tau lists must match the dataset's class count
  ExperimentConfig cd = small_cfg(c);
  cd.dataset_path = a + "/dataset.csv";
  cd.tau_init = {0.9, 0.9, 0.9};  // matches: fine
  run_experiment(cd);
  fs::remove_all(a);
  fs::remove_all(b);
  fs::remove_all(c);
}

TEST_CASE("sweeps fan out over tau and seed and aggregate by tau") {
  const std::string out = fresh_dir("lesslab_sweep");
  ExperimentConfig cfg = small_cfg(out);
  cfg.epochs = 2;
  const SweepResult res = sweep_tau(cfg, {0.9, 0.8}, {1, 2});
  CHECK(res.cells.size() == 4);
  CHECK(res.table.size() == 2);
  CHECK(fs::exists(out + "/tau_0.9_seed_1/summary.txt"));
  CHECK(fs::exists(out + "/tau_0.8_seed_2/metrics.csv"));
  CHECK(fs::exists(out + "/sweep.csv"));

  // aggregate row = mean and sample std of the per-seed window accuracies
  for (const SweepRow& row : res.table) {
    std::vector<double> accs;
    for (const auto& cell : res.cells)
      if (cell.tau == row.tau) accs.push_back(cell.summary.mean_test_acc_last_window);
    REQUIRE(accs.size() == 2);
    const double mean = 0.5 * (accs[0] + accs[1]);
    const double sd = std::abs(accs[0] - accs[1]) / std::sqrt(2.0);
    CHECK(row.mean_acc == doctest::Approx(mean).epsilon(1e-12));
    CHECK(row.std_acc == doctest::Approx(sd).epsilon(1e-9));
    CHECK(row.runs == 2);
  }

  const MetricsTable sweep_csv = load_csv(out + "/sweep.csv");
  CHECK(sweep_csv.columns == std::vector<std::string>{"tau", "mean_acc", "std_acc", "runs"});
  CHECK(sweep_csv.rows.size() == 2);

  // a sweep cell matches the standalone run with the same tau and seed
  const std::string solo = fresh_dir("lesslab_sweep_solo");
  ExperimentConfig single = small_cfg(solo);
  single.epochs = 2;
  single.tau_init = {0.9};
  single.seed = 1;
  const RunSummary alone = run_experiment(single);
  CHECK(res.cells[0].summary.mean_test_acc_last_window ==
        alone.mean_test_acc_last_window);
  CHECK(slurp(out + "/tau_0.9_seed_1/metrics.csv") == slurp(solo + "/metrics.csv"));

  CHECK_THROWS_AS(sweep_tau(cfg, {}, {1}), ConfigError);
  CHECK_THROWS_AS(sweep_tau(cfg, {0.9}, {}), ConfigError);
  CHECK_THROWS_AS(sweep_tau(cfg, {0.3}, {1}), ConfigError);  // below 1/k
  fs::remove_all(out);
  fs::remove_all(solo);
}

TEST_CASE("parallel sweeps reproduce serial ones byte for byte") {
  const std::string a = fresh_dir("lesslab_sweep_serial");
  const std::string b = fresh_dir("lesslab_sweep_par");
  ExperimentConfig ca = small_cfg(a);
  ca.epochs = 2;
  ExperimentConfig cb = small_cfg(b);
  cb.epochs = 2;

  unsetenv("LESSLAB_THREADS");
  sweep_tau(ca, {0.9, 0.8}, {1, 2});
  setenv("LESSLAB_THREADS", "2", 1);
  sweep_tau(cb, {0.9, 0.8}, {1, 2});
  unsetenv("LESSLAB_THREADS");

  CHECK(slurp(a + "/sweep.csv") == slurp(b + "/sweep.csv"));
  for (const char* cell : {"tau_0.9_seed_1", "tau_0.9_seed_2", "tau_0.8_seed_1",
                           "tau_0.8_seed_2"})
    CHECK(slurp(a + "/" + cell + "/metrics.csv") ==
          slurp(b + "/" + cell + "/metrics.csv"));

  setenv("LESSLAB_THREADS", "0", 1);
  CHECK_THROWS_AS(sweep_tau(ca, {0.9}, {1}), ConfigError);
  unsetenv("LESSLAB_THREADS");
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("report collects summaries into an aligned table with aggregates") {
  const std::string out = fresh_dir("lesslab_report");
  ExperimentConfig cfg = small_cfg(out);
  cfg.epochs = 1;
  sweep_tau(cfg, {0.9}, {1, 2});

  const std::string report = report_runs(out);
  CHECK(report.find("run") != std::string::npos);
  CHECK(report.find("method") != std::string::npos);
  CHECK(report.find("tau_0.9_seed_1") != std::string::npos);
  CHECK(report.find("tau_0.9_seed_2") != std::string::npos);
  CHECK(report.find("aggregate mean_test_acc_last_window") != std::string::npos);
  CHECK(report.find("less tau0=0.9  n=2") != std::string::npos);

  const std::string empty = fresh_dir("lesslab_report_empty");
  CHECK(report_runs(empty).find("no run summaries under") != std::string::npos);
  CHECK_THROWS_AS(report_runs("/no/such/dir/lesslab"), IoError);
  fs::remove_all(out);
  fs::remove_all(empty);
}

TEST_CASE("ssl pretraining phases switch objectives at the configured epoch") {
  const std::string out = fresh_dir("lesslab_run_ssl");
  ExperimentConfig cfg = small_cfg(out);
  cfg.method = Method::ssl_then_fixmatch;
  cfg.pretrain_epochs = 2;
  cfg.epochs = 4;
  run_experiment(cfg);
  const MetricsTable m = load_csv(out + "/metrics.csv");
  REQUIRE(m.rows.size() == 4);
  for (int e : {0, 1}) {  // clustering-only warmup: no supervised, no distill
    CHECK(m.rows[size_t(e)][4] == "0");
    CHECK(m.rows[size_t(e)][5] == "0");
    CHECK(m.rows[size_t(e)][6] != "0");
  }
  for (int e : {2, 3}) {  // fixmatch phase
    CHECK(m.rows[size_t(e)][4] != "0");
    CHECK(m.rows[size_t(e)][6] == "0");
  }

  ExperimentConfig co = small_cfg(out + "_only");
  co.method = Method::ssl_only;
  co.epochs = 2;
  run_experiment(co);
  const MetricsTable mo = load_csv(out + "_only/metrics.csv");
  for (const auto& row : mo.rows) {
    CHECK(row[4] == "0");
    CHECK(row[5] == "0");
  }
  fs::remove_all(out);
  fs::remove_all(out + "_only");
}

TEST_CASE("promotion shows up in the metrics of a promoting run") {
  // strong supervision and an easy pool make promotions reliable
  const std::string out = fresh_dir("lesslab_run_promote");
  ExperimentConfig cfg = small_cfg(out);
  cfg.method = Method::less;
  cfg.data.spread = 0.3;
  cfg.labels_per_class = 4;
  cfg.epochs = 36;
  cfg.steps_per_epoch = 12;
  cfg.refiner.n_min = 30;
  cfg.refiner.lambda = 0.9;
  cfg.refiner.n_cap = 40;
  const RunSummary summary = run_experiment(cfg);
  const MetricsTable m = load_csv(out + "/metrics.csv");
  CHECK(summary.promoted_total > 0);
  CHECK(m.rows.back()[13] == std::to_string(summary.promoted_total));
  // the promoted count never decreases without reevaluation
  int prev = 0;
  for (const auto& row : m.rows) {
    const int cur = std::stoi(row[13]);
    CHECK(cur >= prev);
    prev = cur;
  }
  fs::remove_all(out);
}
