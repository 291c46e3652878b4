#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "pfeddl/commands.hpp"
#include "pfeddl/config.hpp"
#include "pfeddl/error.hpp"

namespace cli = pfeddl::cli;

int main(int argc, char** argv) {
  CLI::App app{"Personalized federated dictionary learning"};
  app.fallthrough();
  app.require_subcommand(1);

  std::string config_path;
  bool quickstart = false;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> threads;
  std::optional<int> folds;
  std::string data_root;
  std::vector<std::string> sets;

  auto* config_opt = app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_flag("--quickstart", quickstart, "Desk-scale synthetic profile")->excludes(config_opt);
  app.add_option("--seed", seed, "Run seed; also reseeds synthetic data");
  app.add_option("--out", out, "Output directory");
  app.add_option("--threads", threads, "Worker threads for per-site work")
      ->check(CLI::PositiveNumber);
  app.add_option("--folds", folds, "Cross-validation folds");
  app.add_option("--data", data_root, "Directory of site_* subdirectories, e.g. synth output");
  app.add_option("--set", sets, "Hyperparameter override NAME=VALUE (repeatable)");

  auto* synth = app.add_subcommand("synth", "Write a planted synthetic federation");
  auto* train = app.add_subcommand("train", "Cross-validated training and report");
  auto* align = app.add_subcommand("align", "Pretrain, align and write the alignment record");
  bool planted = false;
  align->add_flag("--planted", planted, "Align signed-permuted copies of a random dictionary");
  auto* sweep = app.add_subcommand("sweep", "Train once per hyperparameter value");
  std::string sweep_param;
  std::vector<double> sweep_values;
  sweep->add_option("--param", sweep_param, "Hyperparameter to vary");
  sweep->add_option("--values", sweep_values, "Values, comma separated")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  cli::RunConfig config;
  try {
    if (!config_path.empty()) {
      config = cli::load_config(config_path);
    } else if (quickstart) {
      config = cli::quickstart_config();
    }
    cli::configure_logging(config.log_level);

    if (!data_root.empty()) cli::use_data_root(config, data_root);
    if (seed) {
      config.hyper.seed = *seed;
      if (config.synthetic) config.synthetic->seed = *seed;
    }
    if (!out.empty()) config.out = out;
    if (threads) config.threads = *threads;
    if (folds) config.folds = *folds;
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw pfeddl::ConfigError("--set expects NAME=VALUE, got '" + s + "'");
      const std::string name = s.substr(0, eq);
      std::size_t used = 0;
      double value = 0.0;
      try {
        value = std::stod(s.substr(eq + 1), &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != s.size() - eq - 1) {
        throw pfeddl::ConfigError("--set " + name + ": '" + s.substr(eq + 1) + "' is not a number");
      }
      if (name == "seed") {
        config.hyper.seed = static_cast<std::uint64_t>(value);
      } else if (name == "k") {
        config.hyper.k = static_cast<pfeddl::Index>(value);  // literal, unlike sweeps
      } else {
        cli::set_hyperparam(config.hyper, name, value);
      }
    }
    if (!sweep_param.empty() || !sweep_values.empty()) {
      config.sweep = cli::SweepRange{sweep_param, sweep_values};
    }
  } catch (const std::exception& e) {
    cli::configure_logging("info");
    spdlog::error("{}", e.what());
    return 2;
  }

  if (*synth) return cli::cmd_synth(config, std::cout);
  if (*train) return cli::cmd_train(config, std::cout);
  if (*align) return cli::cmd_align(config, cli::AlignOptions{planted}, std::cout);
  if (*sweep) return cli::cmd_sweep(config, std::cout);
  return 2;
}
