#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfeddl/dataio.hpp"
#include "pfeddl/evaluation.hpp"
#include "pfeddl/types.hpp"

namespace pfeddl::cli {

struct SweepRange {
  std::string param;  // a Hyperparams field name
  std::vector<double> values;
};

/// Resolved settings for one CLI invocation.
///
/// Config file schema (JSON, every key optional, unknown keys rejected):
///   profile      "paper" (default) or "quickstart"; the base the rest applies to
///   data         {"synthetic": {d, k_true, g_true, sites, samples_per_site,
///                               sparsity, noise_std, margin, seed}}
///                or {"sites": [dir, ...], "truth": dir}
///   hyper        {lambda1, lambda2, lambda3, lambda4, eta, k, g,
///                 iters_local, iters_fed, iters_pretrain, seed}
///   folds, threads, out, log_level
///   roi          {"sign": "absolute"|"signed", "top_atoms", "top_rois"}
///   sweep        {"param": name, "values": [...]}
struct RunConfig {
  std::optional<io::SyntheticSpec> synthetic;
  std::vector<std::filesystem::path> site_dirs;
  std::optional<std::filesystem::path> truth_dir;

  Hyperparams hyper;
  int folds = 4;
  unsigned threads = 1;
  std::filesystem::path out = "pfeddl_out";
  std::string log_level = "info";

  eval::RoiSign roi_sign = eval::RoiSign::Absolute;
  Index top_atoms = 10;
  Index top_rois = 10;

  std::optional<SweepRange> sweep;
};

/// Desk-scale planted federation with hyperparameters that train it in seconds.
RunConfig quickstart_config();

/// Applies a JSON document on top of its profile.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);
nlohmann::ordered_json config_to_json(const RunConfig& config);

/// Replaces the data source with the site_* subdirectories of a synth output
/// directory (sorted by name), plus its truth/ directory when present.
void use_data_root(RunConfig& config, const std::filesystem::path& root);

/// Sets a hyperparameter by name. Integer fields reject fractional values.
/// Setting k also rescales g to keep g/k (rounded, clamped to [0, k]).
void set_hyperparam(Hyperparams& hyper, const std::string& name, double value);

/// Names accepted by set_hyperparam.
const std::vector<std::string>& hyperparam_names();

}  // namespace pfeddl::cli
