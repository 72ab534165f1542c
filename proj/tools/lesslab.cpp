// lesslab command line: run one experiment, sweep thresholds, or report
// on finished runs. Exit codes: 0 ok, 2 config error, 3 numeric abort,
// 4 I/O failure.

#include <cstdint>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lesslab/runner.hpp"

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(tok);
  return out;
}

std::vector<double> parse_taus(const std::string& s) {
  std::vector<double> out;
  for (const auto& tok : split_commas(s)) {
    try {
      size_t pos = 0;
      out.push_back(std::stod(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw lesslab::ConfigError("bad tau value: '" + tok + "'");
    }
  }
  if (out.empty()) throw lesslab::ConfigError("empty tau list");
  return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> out;
  for (const auto& tok : split_commas(s)) {
    try {
      size_t pos = 0;
      out.push_back(std::stoull(tok, &pos));
      if (pos != tok.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw lesslab::ConfigError("bad seed value: '" + tok + "'");
    }
  }
  if (out.empty()) throw lesslab::ConfigError("empty seed list");
  return out;
}

void print_summary(const lesslab::RunSummary& s) {
  std::cout << "run complete: " << s.out_dir << "\n"
            << "  method=" << s.method << " seed=" << s.seed
            << " epochs=" << s.epochs_run << "\n"
            << "  final_test_acc=" << lesslab::format_g9(s.final_test_acc)
            << " mean_test_acc_last_window="
            << lesslab::format_g9(s.mean_test_acc_last_window)
            << " promoted_total=" << s.promoted_total << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lesslab: a desk-scale lab for barely-supervised learning"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  CLI::App* cmd_run = app.add_subcommand("run", "train one configuration");
  cmd_run->add_option("--config", run_config, "key=value config file")->required();
  cmd_run->add_option("--out-dir", run_out, "override out_dir from the config");

  std::string sweep_config, sweep_out;
  std::string sweep_tau = "0.95,0.98,0.995";
  std::string sweep_seeds = "1,2,3";
  CLI::App* cmd_sweep =
      app.add_subcommand("sweep", "run a threshold sweep over several seeds");
  cmd_sweep->add_option("--config", sweep_config, "key=value config file")->required();
  cmd_sweep->add_option("--tau", sweep_tau, "comma-separated tau values");
  cmd_sweep->add_option("--seeds", sweep_seeds, "comma-separated seeds");
  cmd_sweep->add_option("--out-dir", sweep_out, "override out_dir from the config");

  std::string report_dir;
  CLI::App* cmd_report =
      app.add_subcommand("report", "aggregate summaries of finished runs");
  cmd_report->add_option("--runs", report_dir, "directory to scan")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (cmd_run->parsed()) {
      lesslab::ExperimentConfig cfg = lesslab::parse_config_file(run_config);
      if (!run_out.empty()) cfg.out_dir = run_out;
      print_summary(lesslab::run_experiment(cfg));
    } else if (cmd_sweep->parsed()) {
      lesslab::ExperimentConfig cfg = lesslab::parse_config_file(sweep_config);
      if (!sweep_out.empty()) cfg.out_dir = sweep_out;
      const lesslab::SweepResult result =
          lesslab::sweep_tau(cfg, parse_taus(sweep_tau), parse_seeds(sweep_seeds));
      std::printf("%10s %12s %12s %6s\n", "tau", "mean_acc", "std_acc", "runs");
      for (const auto& row : result.table)
        std::printf("%10s %12s %12s %6d\n", lesslab::format_g9(row.tau).c_str(),
                    lesslab::format_g9(row.mean_acc).c_str(),
                    lesslab::format_g9(row.std_acc).c_str(), row.runs);
      std::cout << "wrote " << cfg.out_dir << "/sweep.csv\n";
    } else if (cmd_report->parsed()) {
      std::cout << lesslab::report_runs(report_dir);
    }
  } catch (const lesslab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const lesslab::NumericError& e) {
    std::cerr << "numeric abort: " << e.what() << "\n";
    return 3;
  } catch (const lesslab::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
