// Command-line front end: run, eval, plot, gradcheck, oracle.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "crlmaze/config.hpp"
#include "crlmaze/gradcheck.hpp"
#include "crlmaze/harness.hpp"
#include "crlmaze/plot.hpp"
#include "crlmaze/testing/oracles.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitRunFailure = 2;

int cmd_run(const std::string& config_path, bool plots) {
  crlmaze::ExperimentConfig cfg = crlmaze::load_config(config_path);
  crlmaze::apply_env_overrides(cfg);
  std::cout << "running " << crlmaze::experiment_cells(cfg).size() << " cells into " << cfg.output_dir
            << " (parallelism " << cfg.parallelism << ")" << std::endl;
  const auto report = crlmaze::run_experiment(cfg, &std::cout);
  if (plots) crlmaze::emit_plots(cfg.output_dir);
  std::cout << "summary: " << (std::filesystem::path(cfg.output_dir) / "summary.csv").string() << std::endl;
  return report.exit_code == 0 ? kExitOk : kExitRunFailure;
}

int cmd_eval(const std::string& dir) {
  namespace fs = std::filesystem;
  const crlmaze::ExperimentConfig cfg = crlmaze::load_config(fs::path(dir) / crlmaze::run_files::config);
  const auto cells = crlmaze::experiment_cells(cfg);
  if (cells.size() != 1) throw crlmaze::ConfigError(dir + " does not hold a single-cell config snapshot");
  const auto r = crlmaze::evaluate_run_dir(dir, cfg, cells.front());
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    std::printf("R[%zu]", i + 1);
    for (const auto& c : r.rows[i]) std::printf("  %10.2f (sd %8.2f)", c.mean, c.std);
    std::printf("\n");
  }
  if (r.square()) std::printf("A = %.4f\n", crlmaze::a_metric(r));
  return kExitOk;
}

int cmd_plot(const std::string& dir) {
  for (const auto& f : crlmaze::emit_plots(dir)) std::cout << f.string() << "\n";
  return kExitOk;
}

int cmd_gradcheck(int seeds) {
  bool ok = true;
  for (const auto& c : crlmaze::run_gradient_checks(seeds)) {
    const bool pass = c.max_relative_error <= 1e-4;
    ok = ok && pass;
    std::printf("%s %-28s params=%zu max_rel_err=%.3e\n", pass ? "PASS" : "FAIL", c.name.c_str(), c.n_params,
                c.max_relative_error);
  }
  return ok ? kExitOk : kExitRunFailure;
}

int cmd_oracle(const std::string& scratch) {
  bool ok = true;
  for (const auto& r : crlmaze::testing::run_all_oracles(scratch)) {
    ok = ok && r.passed;
    std::printf("%s %-28s %s\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
  }
  return ok ? kExitOk : kExitRunFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual reinforcement learning maze laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  bool plots = false;
  auto* run = app.add_subcommand("run", "Train and evaluate every cell of an experiment config");
  run->add_option("config", config_path, "Experiment config file")->required();
  run->add_flag("--plots", plots, "Render SVG plots after the run");

  std::string run_dir;
  auto* eval = app.add_subcommand("eval", "Re-evaluate the checkpoints of one run directory");
  eval->add_option("run_dir", run_dir, "Directory {scenario}/{strategy}/{seed}")->required();

  std::string results_dir;
  auto* plot = app.add_subcommand("plot", "Render reward curves and the A-metric bar chart");
  plot->add_option("results_dir", results_dir, "Experiment output directory")->required();

  int seeds = 3;
  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of every loss gradient");
  grad->add_option("--seeds", seeds, "Random networks per loss")->check(CLI::PositiveNumber);

  std::string scratch = (std::filesystem::temp_directory_path() / "crlmaze-oracle").string();
  auto* oracle = app.add_subcommand("oracle", "Run the reference oracles");
  oracle->add_option("--scratch", scratch, "Directory for temporary run artifacts");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) return cmd_run(config_path, plots);
    if (*eval) return cmd_eval(run_dir);
    if (*plot) return cmd_plot(results_dir);
    if (*grad) return cmd_gradcheck(seeds);
    if (*oracle) return cmd_oracle(scratch);
  } catch (const crlmaze::ConfigError& e) {
    std::cerr << "config error";
    if (!e.key().empty()) std::cerr << " [" << e.key() << "]";
    std::cerr << ": " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRunFailure;
  }
  return kExitOk;
}
